//! SDI search: Nelder-Mead over the angles of pure preparations (and pure
//! assisting states for test II), each simplex vertex scored by a short inner
//! see-saw, followed by a joint see-saw polish of the best point.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rayon::prelude::*;

use super::seesaw::{Point, Problem, RBlock};
use super::{merge, restart_rng, EbBoundResult, OptimizerConfig, Spec};
use crate::error::{Error, Result};
use crate::qmat::{CMatrix, C64};

const INNER_RESTARTS: u64 = 2;
const INNER_ITERS: usize = 60;
/// Offsets the inner seed stream away from the outer restarts.
const INNER_SEED: u64 = 0x5d1_0000;

/// Unit vector from `2(d-1)` hyperspherical angles: moduli from the first
/// `d-1`, relative phases from the rest.
pub(crate) fn ket_from_angles(angles: &[f64], d: usize) -> Vec<C64> {
    let (theta, phi) = angles.split_at(d - 1);
    let mut v = vec![C64::new(0.0, 0.0); d];
    let mut carry = 1.0;
    for j in 0..d {
        let r = if j + 1 < d { carry * theta[j].cos() } else { carry };
        if j + 1 < d {
            carry *= theta[j].sin();
        }
        let ph = if j == 0 { 0.0 } else { phi[j - 1] };
        v[j] = C64::from_polar(r, ph);
    }
    v
}

fn pure_from_angles(angles: &[f64], d: usize) -> CMatrix {
    CMatrix::outer(&ket_from_angles(angles, d))
}

struct Layout {
    rows: usize,
    cols: usize,
    d_a: usize,
    d_b: usize,
    /// test II also searches the assisting states
    with_r: bool,
}

impl Layout {
    fn per(d: usize) -> usize {
        2 * (d - 1)
    }

    fn len(&self) -> usize {
        self.rows * Self::per(self.d_a) + if self.with_r { self.cols * Self::per(self.d_b) } else { 0 }
    }

    fn unpack(&self, p: &[f64]) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let na = Self::per(self.d_a);
        let xi = (0..self.rows).map(|x| pure_from_angles(&p[x * na..(x + 1) * na], self.d_a)).collect();
        let r = if self.with_r {
            let nb = Self::per(self.d_b);
            let off = self.rows * na;
            (0..self.cols)
                .map(|b| pure_from_angles(&p[off + b * nb..off + (b + 1) * nb], self.d_b).transpose())
                .collect()
        } else {
            vec![]
        };
        (xi, r)
    }
}

/// Inner problem: preparations fixed, everything else optimized.
struct Inner<'a> {
    problem: Problem<'a>,
    layout: Layout,
    seed: u64,
}

impl Inner<'_> {
    fn best_point(&self, p: &[f64]) -> Point {
        let (xi, r) = self.layout.unpack(p);
        let points = (0..INNER_RESTARTS)
            .map(|j| {
                let mut rng = restart_rng(self.seed.wrapping_add(INNER_SEED), j);
                self.problem.descend(self.problem.random_point(&mut rng, &xi, &r))
            })
            .collect();
        merge(points).0
    }
}

impl CostFunction for &Inner<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.best_point(p).value)
    }
}

pub(super) fn search(spec: &Spec, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    cfg.validate()?;
    let full = spec.problem(cfg);
    let layout = Layout {
        rows: spec.w.len(),
        cols: spec.w.first().map_or(0, Vec::len),
        d_a: spec.d_a,
        d_b: spec.d_b,
        with_r: spec.r_block == RBlock::FreePure,
    };
    let n = layout.len();
    let inner = Inner {
        problem: Problem {
            xi_free: false,
            r_block: if layout.with_r { RBlock::Fixed } else { spec.r_block },
            max_iters: INNER_ITERS.min(cfg.max_seesaw_iters),
            ..full.clone()
        },
        layout,
        seed: cfg.rng_seed,
    };
    let results: Vec<Result<Point>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(cfg.rng_seed, i as u64);
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let best = if n == 0 {
                x0
            } else {
                let mut simplex = vec![x0.clone()];
                for j in 0..n {
                    let mut v = x0.clone();
                    v[j] += 0.4;
                    simplex.push(v);
                }
                let solver = NelderMead::new(simplex)
                    .with_sd_tolerance(1e-9)
                    .map_err(|e| Error::Optimizer(e.to_string()))?;
                let res = Executor::new(&inner, solver)
                    .configure(|s| s.max_iters((30 * n) as u64))
                    .run()
                    .map_err(|e| Error::Optimizer(e.to_string()))?;
                res.state().best_param.clone().unwrap_or(x0)
            };
            let start = inner.best_point(&best);
            Ok(full.descend(start))
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let (best, converged) = merge(points);
    Ok(spec.result(best, cfg.restarts, converged))
}
