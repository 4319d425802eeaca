//! Distance from a qubit channel's Pauli-eigenstate statistics to the set of
//! statistics reachable by measure-and-prepare models whose preparation,
//! measurement and output spaces are capped at `d_A` and `d_B`.
//!
//! The model is fitted by L-BFGS on the squared residual, with every positive
//! object written through an unconstrained square root:
//! `rho = A A^dag / tr(A A^dag)` and `E_k = S^{-1/2} (A_k A_k^dag) S^{-1/2}`.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{restart_rng, OptimizerConfig};
use crate::channel::Channel;
use crate::depol::{depolarizing, DepolParams};
use crate::error::{Error, Result};
use crate::pmtest::{run_test1, run_test2, PmTestI, PmTestII, Statistics, TestKind, Weights};
use crate::qmat::{named_qubit_state, CMatrix, DensityMatrix, Effect, C64};

const PAULI: [&str; 6] = ["ket0", "ket1", "plus", "minus", "R", "L"];
const LBFGS_MEMORY: usize = 10;
const MAX_ITERS: u64 = 4000;
/// Squared residual below which the statistics count as reproduced.
pub const SIMULABLE_SSQ: f64 = 1e-11;
const EARLY_STOP_SSQ: f64 = 1e-14;

fn pauli_states() -> Vec<DensityMatrix> {
    PAULI.iter().map(|n| named_qubit_state(n).expect("named qubit state")).collect()
}

/// Statistics of a qubit channel on the six Pauli eigenstates, measured with
/// the three Pauli measurements (test I) or the Bell projection with the six
/// eigenstates on B' (test II).
pub fn pauli_statistics(ch: &Channel, kind: TestKind) -> Result<Statistics> {
    if ch.d_in() != 2 || ch.d_out() != 2 {
        return Err(Error::InvalidArgument(format!(
            "Pauli statistics need a qubit channel, got {} -> {}",
            ch.d_in(),
            ch.d_out()
        )));
    }
    let states = pauli_states();
    match kind {
        TestKind::I => {
            let effects = states.iter().map(|s| Effect::from(s.clone())).collect();
            run_test1(ch, &PmTestI::new(states, effects, Weights::zeros(6, 6))?)
        }
        TestKind::II => run_test2(ch, &PmTestII::new(states.clone(), states, Weights::zeros(6, 6))?),
    }
}

fn block(p: &[f64], d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| C64::new(p[i * d + j], p[d * d + i * d + j]))
}

fn write_grad(x: &CMatrix, out: &mut [f64]) {
    let d = x.rows();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] += x[(i, j)].re;
            out[d * d + i * d + j] += x[(i, j)].im;
        }
    }
}

struct StateFwd {
    a: CMatrix,
    norm: f64,
    rho: CMatrix,
}

fn state_fwd(p: &[f64], d: usize) -> StateFwd {
    let a = block(p, d);
    let m = a.matmul(&a.adjoint());
    let norm = m.trace().re.max(1e-300);
    StateFwd { rho: m.scale(1.0 / norm), a, norm }
}

/// Pulls `dC = Re tr[G d rho]` back to the real parameters of `A`.
fn state_grad(s: &StateFwd, g: &CMatrix, out: &mut [f64]) {
    let d = s.a.rows();
    let mut gm = g.clone();
    gm.add_scaled(-g.expect(&s.rho), &CMatrix::identity(d));
    write_grad(&gm.matmul(&s.a).scale(2.0 / s.norm), out);
}

struct PovmFwd {
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
    r: CMatrix,
    values: Vec<f64>,
    vectors: CMatrix,
    e: Vec<CMatrix>,
}

fn povm_fwd(p: &[f64], d: usize, k: usize) -> PovmFwd {
    let n = 2 * d * d;
    let a: Vec<CMatrix> = (0..k).map(|i| block(&p[i * n..(i + 1) * n], d)).collect();
    let eps = CMatrix::identity(d).scale(1e-12);
    let b: Vec<CMatrix> = a.iter().map(|a| (&a.matmul(&a.adjoint()) + &eps).hermitian_part()).collect();
    let mut s = CMatrix::zeros(d, d);
    for bk in &b {
        s += bk;
    }
    let eig = s.eigh().expect("sum of positive blocks is Hermitian");
    let r = eig.reconstruct_with(|l| 1.0 / l.max(1e-300).sqrt());
    let e = b.iter().map(|bk| r.matmul(bk).matmul(&r)).collect();
    PovmFwd { a, b, r, values: eig.values, vectors: eig.vectors, e }
}

/// Pulls `dC = sum_k Re tr[G_k dE_k]` back through `S^{-1/2}` (Daleckii-Krein).
fn povm_grad(f: &PovmFwd, g: &[CMatrix], out: &mut [f64]) {
    let d = f.r.rows();
    let mut h = CMatrix::zeros(d, d);
    for (bk, gk) in f.b.iter().zip(g) {
        h += &bk.matmul(&f.r).matmul(gk);
        h += &gk.matmul(&f.r).matmul(bk);
    }
    let v = &f.vectors;
    let hv = v.adjoint().matmul(&h).matmul(v);
    let inv_sqrt = |x: f64| 1.0 / x.sqrt();
    let gamma = |i: usize, j: usize| {
        let (si, sj) = (f.values[i], f.values[j]);
        if (si - sj).abs() > 1e-10 * si.abs().max(sj.abs()) {
            (inv_sqrt(si) - inv_sqrt(sj)) / (si - sj)
        } else {
            -0.5 * si.powf(-1.5)
        }
    };
    let gs = v.matmul(&CMatrix::from_fn(d, d, |i, j| hv[(i, j)] * gamma(i, j))).matmul(&v.adjoint());
    let n = 2 * d * d;
    for (i, (ak, gk)) in f.a.iter().zip(g).enumerate() {
        let gb = &f.r.matmul(gk).matmul(&f.r) + &gs;
        write_grad(&gb.matmul(ak).scale(2.0), &mut out[i * n..(i + 1) * n]);
    }
}

/// Measure-and-prepare model of the 6x6 Pauli table.
///
/// Test I: `P(b|x) = sum_k tr[E_k xi_x] tr[tau_k F_b]` with three binary
/// measurements `F`. Test II: `P(x,y) = d_B sum_k t_k tr[E_k xi_x] tr[omega_k psi_y]`,
/// `t_k = sin^2 s_k`.
pub(crate) struct Model {
    kind: TestKind,
    d_a: usize,
    d_b: usize,
    k: usize,
    target: Vec<Vec<f64>>,
    off_povm: usize,
    off_out: usize,
    off_r: usize,
    len: usize,
}

pub(crate) struct Fit {
    pub ssq: f64,
    pub l1: f64,
}

impl Model {
    pub(crate) fn new(kind: TestKind, d_a: usize, d_b: usize, k: usize, target: &Statistics) -> Model {
        let (na, nb) = (2 * d_a * d_a, 2 * d_b * d_b);
        let off_povm = 6 * na;
        let off_out = off_povm + k * na;
        let (off_r, len) = match kind {
            TestKind::I => (off_out + k * nb, off_out + k * nb + 6 * nb),
            TestKind::II => (off_out + k * (nb + 1), off_out + k * (nb + 1) + 6 * nb),
        };
        Model { kind, d_a, d_b, k, target: target.table().to_vec(), off_povm, off_out, off_r, len }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Cost, optional gradient and the model table.
    fn eval(&self, p: &[f64], grad: Option<&mut [f64]>) -> (f64, Vec<Vec<f64>>) {
        let (na, nb) = (2 * self.d_a * self.d_a, 2 * self.d_b * self.d_b);
        let xi: Vec<StateFwd> = (0..6).map(|x| state_fwd(&p[x * na..(x + 1) * na], self.d_a)).collect();
        let povm = povm_fwd(&p[self.off_povm..self.off_out], self.d_a, self.k);
        let a: Vec<Vec<f64>> = xi.iter().map(|s| povm.e.iter().map(|e| e.expect(&s.rho)).collect()).collect();

        // B side: q[k][b] and the pieces needed to differentiate it.
        let mut outs: Vec<StateFwd> = vec![];
        let mut rs: Vec<StateFwd> = vec![];
        let mut fpovms: Vec<PovmFwd> = vec![];
        let mut ts: Vec<(f64, f64)> = vec![];
        let mut r_ops: Vec<CMatrix> = vec![];
        let q: Vec<Vec<f64>> = match self.kind {
            TestKind::I => {
                outs = (0..self.k).map(|k| state_fwd(&p[self.off_out + k * nb..self.off_out + (k + 1) * nb], self.d_b)).collect();
                fpovms = (0..3)
                    .map(|j| povm_fwd(&p[self.off_r + 2 * j * nb..self.off_r + 2 * (j + 1) * nb], self.d_b, 2))
                    .collect();
                r_ops = fpovms.iter().flat_map(|f| f.e.iter().cloned()).collect();
                outs.iter().map(|tau| r_ops.iter().map(|f| tau.rho.expect(f)).collect()).collect()
            }
            TestKind::II => {
                let db = self.d_b as f64;
                for k in 0..self.k {
                    let base = self.off_out + k * (nb + 1);
                    let s = p[base];
                    ts.push((s.sin().powi(2), (2.0 * s).sin()));
                    outs.push(state_fwd(&p[base + 1..base + 1 + nb], self.d_b));
                }
                rs = (0..6).map(|y| state_fwd(&p[self.off_r + y * nb..self.off_r + (y + 1) * nb], self.d_b)).collect();
                (0..self.k)
                    .map(|k| rs.iter().map(|psi| db * ts[k].0 * outs[k].rho.expect(&psi.rho)).collect())
                    .collect()
            }
        };

        let mut model = vec![vec![0.0; 6]; 6];
        let mut resid = vec![vec![0.0; 6]; 6];
        let mut cost = 0.0;
        for x in 0..6 {
            for b in 0..6 {
                let m: f64 = (0..self.k).map(|k| a[x][k] * q[k][b]).sum();
                model[x][b] = m;
                resid[x][b] = m - self.target[x][b];
                cost += resid[x][b] * resid[x][b];
            }
        }
        let Some(out) = grad else {
            return (cost, model);
        };
        out.iter_mut().for_each(|g| *g = 0.0);

        // dC/da[x][k] and dC/dq[k][b]
        let ga: Vec<Vec<f64>> =
            (0..6).map(|x| (0..self.k).map(|k| (0..6).map(|b| 2.0 * resid[x][b] * q[k][b]).sum()).collect()).collect();
        let gq: Vec<Vec<f64>> =
            (0..self.k).map(|k| (0..6).map(|b| (0..6).map(|x| 2.0 * resid[x][b] * a[x][k]).sum()).collect()).collect();

        for (x, s) in xi.iter().enumerate() {
            let mut g = CMatrix::zeros(self.d_a, self.d_a);
            for (k, e) in povm.e.iter().enumerate() {
                g.add_scaled(ga[x][k], e);
            }
            state_grad(s, &g, &mut out[x * na..(x + 1) * na]);
        }
        let ge: Vec<CMatrix> = (0..self.k)
            .map(|k| {
                let mut g = CMatrix::zeros(self.d_a, self.d_a);
                for (x, s) in xi.iter().enumerate() {
                    g.add_scaled(ga[x][k], &s.rho);
                }
                g
            })
            .collect();
        povm_grad(&povm, &ge, &mut out[self.off_povm..self.off_out]);

        match self.kind {
            TestKind::I => {
                for (k, tau) in outs.iter().enumerate() {
                    let mut g = CMatrix::zeros(self.d_b, self.d_b);
                    for (b, f) in r_ops.iter().enumerate() {
                        g.add_scaled(gq[k][b], f);
                    }
                    state_grad(tau, &g, &mut out[self.off_out + k * nb..self.off_out + (k + 1) * nb]);
                }
                for (j, f) in fpovms.iter().enumerate() {
                    let g: Vec<CMatrix> = (0..2)
                        .map(|o| {
                            let mut g = CMatrix::zeros(self.d_b, self.d_b);
                            for (k, tau) in outs.iter().enumerate() {
                                g.add_scaled(gq[k][2 * j + o], &tau.rho);
                            }
                            g
                        })
                        .collect();
                    povm_grad(f, &g, &mut out[self.off_r + 2 * j * nb..self.off_r + 2 * (j + 1) * nb]);
                }
            }
            TestKind::II => {
                let db = self.d_b as f64;
                for k in 0..self.k {
                    let base = self.off_out + k * (nb + 1);
                    let (t, dt) = ts[k];
                    out[base] = (0..6).map(|y| gq[k][y] * db * outs[k].rho.expect(&rs[y].rho)).sum::<f64>() * dt;
                    let mut g = CMatrix::zeros(self.d_b, self.d_b);
                    for (y, psi) in rs.iter().enumerate() {
                        g.add_scaled(gq[k][y] * db * t, &psi.rho);
                    }
                    state_grad(&outs[k], &g, &mut out[base + 1..base + 1 + nb]);
                }
                for (y, psi) in rs.iter().enumerate() {
                    let mut g = CMatrix::zeros(self.d_b, self.d_b);
                    for (k, om) in outs.iter().enumerate() {
                        g.add_scaled(gq[k][y] * db * ts[k].0, &om.rho);
                    }
                    state_grad(psi, &g, &mut out[self.off_r + y * nb..self.off_r + (y + 1) * nb]);
                }
            }
        }
        (cost, model)
    }

    pub(crate) fn cost(&self, p: &[f64]) -> f64 {
        self.eval(p, None).0
    }

    pub(crate) fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len];
        self.eval(p, Some(&mut g));
        g
    }

    pub(crate) fn fit(&self, p: &[f64]) -> Fit {
        let (ssq, model) = self.eval(p, None);
        let l1 = model.iter().flatten().zip(self.target.iter().flatten()).map(|(m, t)| (m - t).abs()).sum();
        Fit { ssq, l1 }
    }
}

/// Cost function that remembers the best point it has seen, so a failed line
/// search still yields a usable result.
struct Tracked<'a> {
    model: &'a Model,
    best: RefCell<(f64, Vec<f64>)>,
}

impl Tracked<'_> {
    fn record(&self, p: &[f64], c: f64) {
        let mut best = self.best.borrow_mut();
        if c < best.0 {
            *best = (c, p.to_vec());
        }
    }
}

fn local_fit(model: &Model, p0: Vec<f64>) -> Result<Vec<f64>> {
    let c0 = model.cost(&p0);
    let tracked = Tracked { model, best: RefCell::new((c0, p0.clone())) };
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), LBFGS_MEMORY)
        .with_tolerance_grad(1e-13)
        .and_then(|s| s.with_tolerance_cost(1e-18))
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    // Line-search failures near an exact fit are expected; the tracked best survives them.
    let _ = Executor::new(&tracked, solver).configure(|s| s.param(p0).max_iters(MAX_ITERS)).run();
    Ok(tracked.best.into_inner().1)
}

impl CostFunction for &Tracked<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let c = self.model.cost(p);
        self.record(p, c);
        Ok(c)
    }
}

impl Gradient for &Tracked<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.model.gradient(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    /// `sum_{x,b} |P_N - P_EB|` at the best fit.
    pub value: f64,
    /// Squared residual minimized by the fit.
    pub ssq: f64,
    pub restarts_used: usize,
}

impl DistanceResult {
    pub fn is_simulable(&self) -> bool {
        self.ssq <= SIMULABLE_SSQ
    }
}

/// Minimal L1 distance between the channel's Pauli statistics and those of
/// any measure-and-prepare model within the dimension caps. Uses
/// `cfg.n_outcomes` (default `d_A d_B`) outcomes and up to `cfg.restarts`
/// restarts, stopping early on an exact fit.
pub fn eb_distance(ch: &Channel, kind: TestKind, d_a: usize, d_b: usize, cfg: &OptimizerConfig) -> Result<DistanceResult> {
    cfg.validate()?;
    if d_a == 0 || d_b == 0 {
        return Err(Error::InvalidArgument("dimension caps must be positive".into()));
    }
    let target = pauli_statistics(ch, kind)?;
    let k = cfg.n_outcomes.unwrap_or(d_a * d_b);
    let model = Model::new(kind, d_a, d_b, k, &target);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut used = 0;
    for i in 0..cfg.restarts {
        used += 1;
        let mut rng = restart_rng(cfg.rng_seed, i as u64);
        let p0: Vec<f64> = (0..model.len()).map(|_| rng.sample(StandardNormal)).collect();
        let p = local_fit(&model, p0)?;
        let c = model.cost(&p);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, p));
        }
        if c < EARLY_STOP_SSQ {
            break;
        }
    }
    let (_, p) = best.expect("at least one restart");
    let fit = model.fit(&p);
    Ok(DistanceResult { value: fit.l1, ssq: fit.ssq, restarts_used: used })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    /// Smallest depolarizing `gamma` whose statistics no capped model reproduces;
    /// `None` when even the identity channel is reproduced.
    pub gamma: Option<f64>,
    /// Bisection steps taken.
    pub steps: usize,
}

/// Bisection on `gamma in [1/3, 1]` for the onset of a nonzero distance of
/// the qubit depolarizing channel, to within `tol`.
pub fn sdi_threshold(kind: TestKind, d_a: usize, d_b: usize, cfg: &OptimizerConfig, tol: f64) -> Result<ThresholdResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let separated = |g: f64| -> Result<bool> {
        let ch = depolarizing(DepolParams::new(g, 2)?);
        Ok(!eb_distance(&ch, kind, d_a, d_b, cfg)?.is_simulable())
    };
    let (mut lo, mut hi) = (1.0 / 3.0, 1.0);
    let mut steps = 1;
    if !separated(hi)? {
        return Ok(ThresholdResult { gamma: None, steps });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        steps += 1;
        if separated(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult { gamma: Some(hi), steps })
}
