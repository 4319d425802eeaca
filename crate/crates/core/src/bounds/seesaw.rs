//! Block-coordinate minimization of the bilinear form
//!
//! `V = sum_{x,b} w_xb sum_k t_k tr[E_k xi_x] tr[tau_k R_b]`
//!
//! over measure-and-prepare parameters `{E_k, tau_k, t_k}` and, optionally, the
//! preparations `xi_x` and the B-side operators `R_b` (effects for test I,
//! transposed assisting states for test II). Every block update is an exact
//! minimizer, so `V` never increases.

use rand::Rng;

use crate::qmat::random::{random_povm, random_pure_state, SeedRng};
use crate::qmat::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Marginal {
    /// `t_k = 1`: the A marginal of the Choi operator is exactly `I/d_A`.
    Eq,
    /// `t_k in [0, 1]`: the marginal is only bounded by `I/d_A`.
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RBlock {
    Fixed,
    /// Independent effects `0 <= R_b <= I`.
    FreeEffects,
    /// Pure states.
    FreePure,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem<'a> {
    pub w: &'a [Vec<f64>],
    pub d_a: usize,
    pub d_b: usize,
    pub k: usize,
    pub marginal: Marginal,
    pub xi_free: bool,
    pub r_block: RBlock,
    pub max_iters: usize,
    pub conv_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub xi: Vec<CMatrix>,
    pub r: Vec<CMatrix>,
    pub povm: Vec<CMatrix>,
    pub taus: Vec<CMatrix>,
    pub t: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn min_eigvec_projector(m: &CMatrix) -> (f64, CMatrix) {
    let e = m.hermitian_part().eigh().expect("Hermitian by construction");
    (e.values[0], CMatrix::outer(&e.vector(0)))
}

/// Projector onto the span of eigenvectors with negative eigenvalue.
fn negative_projector(m: &CMatrix) -> CMatrix {
    m.hermitian_part()
        .spectral_map(|l| if l < 0.0 { 1.0 } else { 0.0 })
        .expect("Hermitian by construction")
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    m.hermitian_part().spectral_map(|l| l.max(0.0).sqrt()).expect("Hermitian by construction")
}

impl Problem<'_> {
    fn rows(&self) -> usize {
        self.w.len()
    }

    fn cols(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    /// `a[x][k] = tr[E_k xi_x]`
    fn a_table(&self, p: &Point) -> Vec<Vec<f64>> {
        p.xi.iter().map(|x| p.povm.iter().map(|e| e.expect(x)).collect()).collect()
    }

    /// `q[k][b] = tr[tau_k R_b]`
    fn q_table(&self, p: &Point) -> Vec<Vec<f64>> {
        p.taus.iter().map(|tau| p.r.iter().map(|r| tau.expect(r)).collect()).collect()
    }

    pub fn value(&self, p: &Point) -> f64 {
        let a = self.a_table(p);
        let q = self.q_table(p);
        let mut v = 0.0;
        for (x, row) in self.w.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s: f64 = (0..self.k).map(|k| p.t[k] * a[x][k] * q[k][b]).sum();
                v += w * s;
            }
        }
        v
    }

    fn tau_step(&self, p: &mut Point) {
        let a = self.a_table(p);
        for k in 0..self.k {
            let mut n = CMatrix::zeros(self.d_b, self.d_b);
            for (x, row) in self.w.iter().enumerate() {
                for (b, &w) in row.iter().enumerate() {
                    if w != 0.0 {
                        n.add_scaled(w * a[x][k], &p.r[b]);
                    }
                }
            }
            let (lambda, proj) = min_eigvec_projector(&n);
            p.taus[k] = proj;
            p.t[k] = match self.marginal {
                Marginal::Eq => 1.0,
                Marginal::Le if lambda < 0.0 => 1.0,
                Marginal::Le => 0.0,
            };
        }
    }

    fn r_step(&self, p: &mut Point) {
        if self.r_block == RBlock::Fixed {
            return;
        }
        let a = self.a_table(p);
        for b in 0..self.cols() {
            let mut g = CMatrix::zeros(self.d_b, self.d_b);
            let mut any = false;
            for (x, row) in self.w.iter().enumerate() {
                let w = row[b];
                if w == 0.0 {
                    continue;
                }
                any = true;
                for k in 0..self.k {
                    if p.t[k] != 0.0 {
                        g.add_scaled(w * p.t[k] * a[x][k], &p.taus[k]);
                    }
                }
            }
            if !any {
                continue;
            }
            p.r[b] = match self.r_block {
                RBlock::FreeEffects => negative_projector(&g),
                RBlock::FreePure => min_eigvec_projector(&g).1,
                RBlock::Fixed => unreachable!(),
            };
        }
    }

    fn xi_step(&self, p: &mut Point) {
        if !self.xi_free {
            return;
        }
        let q = self.q_table(p);
        for x in 0..self.rows() {
            let mut c = CMatrix::zeros(self.d_a, self.d_a);
            let mut any = false;
            for (b, &w) in self.w[x].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                any = true;
                for k in 0..self.k {
                    if p.t[k] != 0.0 {
                        c.add_scaled(w * p.t[k] * q[k][b], &p.povm[k]);
                    }
                }
            }
            if any {
                p.xi[x] = min_eigvec_projector(&c).1;
            }
        }
    }

    /// Pairwise refinement of `min sum_k tr[E_k M_k]` over POVMs.
    fn povm_step(&self, p: &mut Point) {
        let q = self.q_table(p);
        let m: Vec<CMatrix> = (0..self.k)
            .map(|k| {
                let mut mk = CMatrix::zeros(self.d_a, self.d_a);
                if p.t[k] != 0.0 {
                    for (x, row) in self.w.iter().enumerate() {
                        for (b, &w) in row.iter().enumerate() {
                            if w != 0.0 {
                                mk.add_scaled(w * p.t[k] * q[k][b], &p.xi[x]);
                            }
                        }
                    }
                }
                mk
            })
            .collect();
        for i in 0..self.k {
            for j in i + 1..self.k {
                let s = &p.povm[i] + &p.povm[j];
                let root = psd_sqrt(&s);
                let diff = root.matmul(&(&m[i] - &m[j])).matmul(&root);
                let proj = negative_projector(&diff);
                let ei = root.matmul(&proj).matmul(&root).hermitian_part();
                let ej = (&s - &ei).hermitian_part();
                p.povm[i] = ei;
                p.povm[j] = ej;
            }
        }
    }

    /// Random starting point; `xi0`/`r0` are used for the blocks that are not free.
    pub fn random_point(&self, rng: &mut SeedRng, xi0: &[CMatrix], r0: &[CMatrix]) -> Point {
        let povm = random_povm(rng, self.d_a, self.k)
            .effects()
            .iter()
            .map(|e| e.matrix().clone())
            .collect();
        let xi = if self.xi_free {
            (0..self.rows()).map(|_| random_pure_state(rng, self.d_a).into_matrix()).collect()
        } else {
            xi0.to_vec()
        };
        let r = match self.r_block {
            RBlock::Fixed => r0.to_vec(),
            RBlock::FreePure => (0..self.cols()).map(|_| random_pure_state(rng, self.d_b).into_matrix()).collect(),
            RBlock::FreeEffects => (0..self.cols())
                .map(|_| {
                    if rng.random::<bool>() {
                        random_pure_state(rng, self.d_b).into_matrix()
                    } else {
                        crate::qmat::random::random_effect(rng, self.d_b).matrix().clone()
                    }
                })
                .collect(),
        };
        Point {
            xi,
            r,
            povm,
            taus: vec![CMatrix::zeros(self.d_b, self.d_b); self.k],
            t: vec![1.0; self.k],
            value: f64::INFINITY,
            iterations: 0,
        }
    }

    /// Runs block updates until the value stalls.
    pub fn descend(&self, mut p: Point) -> Point {
        self.tau_step(&mut p);
        let mut value = self.value(&p);
        let mut iters = 0;
        while iters < self.max_iters {
            iters += 1;
            self.r_step(&mut p);
            self.xi_step(&mut p);
            self.povm_step(&mut p);
            self.tau_step(&mut p);
            let next = self.value(&p);
            let done = (value - next).abs() <= self.conv_tol * value.abs().max(1.0);
            value = next.min(value);
            if done {
                break;
            }
        }
        p.value = self.value(&p);
        p.iterations = iters;
        p
    }
}
