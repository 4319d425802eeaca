//! Turning a bipartite Hermitian operator `W` into a test whose witness operator is `W`.
//!
//! `W` is expanded as `sum_pq C_pq P_p (x) Q_q` with `0 <= P_p, Q_q <= I` and
//! `P_0 = Q_0 = I`; the test then prepares `P_p^T / tr P_p` and measures `Q_q`
//! (or prepares `Q_q^T / tr Q_q` on B').

use nalgebra::DMatrix;

use super::{PmTestI, PmTestII, Weights};
use crate::error::{Error, Result};
use crate::qmat::{max_entangled, CMatrix, DensityMatrix, Effect, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompileMode {
    /// Generalized Gell-Mann product basis.
    #[default]
    GellMann,
    /// Operator Schmidt decomposition; at most `min(d_A, d_B)^2 + 1` settings per side.
    Schmidt,
}

/// Generalized Gell-Mann matrices with the identity first. Non-identity
/// elements satisfy `tr[G_i G_j] = 2 delta_ij`.
pub(crate) fn gell_mann(d: usize) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(d)];
    for j in 0..d {
        for k in j + 1..d {
            out.push(CMatrix::from_fn(d, d, |r, c| {
                if (r, c) == (j, k) || (r, c) == (k, j) {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }));
            out.push(CMatrix::from_fn(d, d, |r, c| {
                if (r, c) == (j, k) {
                    C64::new(0.0, -1.0)
                } else if (r, c) == (k, j) {
                    C64::new(0.0, 1.0)
                } else {
                    ZERO
                }
            }));
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..d)
            .map(|j| match j.cmp(&l) {
                std::cmp::Ordering::Less => norm,
                std::cmp::Ordering::Equal => -(l as f64) * norm,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(CMatrix::diag(&diag));
    }
    out
}

/// A Hermitian operator written as `alpha I + beta P` with `0 <= P <= I`.
struct Shifted {
    alpha: f64,
    beta: f64,
    p: Option<CMatrix>,
}

fn shift(x: &CMatrix) -> Result<Shifted> {
    let eig = x.eigh()?;
    let (lo, hi) = (eig.values[0], *eig.values.last().expect("non-empty"));
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    if hi - lo <= 1e-13 * scale {
        return Ok(Shifted { alpha: (lo + hi) / 2.0, beta: 0.0, p: None });
    }
    let n = x.rows();
    let p = (x - &CMatrix::identity(n).scale(lo)).scale(1.0 / (hi - lo)).hermitian_part();
    Ok(Shifted { alpha: lo, beta: hi - lo, p: Some(p) })
}

/// Positive factors `[I, P_1, ...]` and the map `G_i = sum_p T[i][p] P_p`.
fn positive_factors(basis: &[CMatrix]) -> Result<(Vec<CMatrix>, Vec<Vec<f64>>)> {
    let d = basis.first().map_or(0, CMatrix::rows);
    let mut factors = vec![CMatrix::identity(d)];
    let mut t = Vec::with_capacity(basis.len());
    for g in basis {
        let s = shift(g)?;
        let mut row = vec![0.0; basis.len() + 1];
        row[0] = s.alpha;
        if let Some(p) = s.p {
            let idx = factors.iter().position(|f| f.max_abs_diff(&p) < 1e-14).unwrap_or_else(|| {
                factors.push(p);
                factors.len() - 1
            });
            row[idx] += s.beta;
        }
        t.push(row);
    }
    for row in &mut t {
        row.truncate(factors.len());
    }
    Ok((factors, t))
}

/// `W = sum_pq C_pq P_p (x) Q_q`.
struct Expansion {
    p: Vec<CMatrix>,
    q: Vec<CMatrix>,
    c: Vec<Vec<f64>>,
}

fn expand(w: &CMatrix, d_a: usize, d_b: usize, mode: CompileMode) -> Result<Expansion> {
    if !w.is_square() || w.rows() != d_a * d_b {
        return Err(Error::dims(format!("operator is {}x{}, expected {}", w.rows(), w.cols(), d_a * d_b)));
    }
    let defect = w.hermiticity_defect();
    if defect > crate::qmat::TOL_HERM * w.data().iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(Error::NotHermitian(defect));
    }
    let w = w.hermitian_part();
    let ga = gell_mann(d_a);
    let gb = gell_mann(d_b);
    let norm = |g: &CMatrix| g.trace_product(g).re;
    // Real coefficients in the orthogonal product basis.
    let coef = DMatrix::from_fn(ga.len(), gb.len(), |i, j| {
        w.trace_product(&ga[i].kron(&gb[j])).re / (norm(&ga[i]) * norm(&gb[j]))
    });

    let (xs, ys, c): (Vec<CMatrix>, Vec<CMatrix>, DMatrix<f64>) = match mode {
        CompileMode::GellMann => (ga, gb, coef),
        CompileMode::Schmidt => {
            let svd = coef.clone().svd(true, true);
            let u = svd.u.ok_or_else(|| Error::Decomposition("SVD produced no U".into()))?;
            let vt = svd.v_t.ok_or_else(|| Error::Decomposition("SVD produced no V".into()))?;
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (k, &s) in svd.singular_values.iter().enumerate() {
                if s <= 1e-12 * smax.max(1e-300) {
                    continue;
                }
                let mut x = CMatrix::zeros(d_a, d_a);
                for (i, g) in ga.iter().enumerate() {
                    x.add_scaled(u[(i, k)] * s, g);
                }
                let mut y = CMatrix::zeros(d_b, d_b);
                for (j, g) in gb.iter().enumerate() {
                    y.add_scaled(vt[(k, j)], g);
                }
                xs.push(x);
                ys.push(y);
            }
            let r = xs.len();
            (xs, ys, DMatrix::identity(r, r))
        }
    };
    let (p, ta) = positive_factors(&xs)?;
    let (q, tb) = positive_factors(&ys)?;
    // C' = T_A^T c T_B
    let mut cp = vec![vec![0.0; q.len()]; p.len()];
    for (i, ra) in ta.iter().enumerate() {
        for (j, rb) in tb.iter().enumerate() {
            let cij = c[(i, j)];
            if cij == 0.0 {
                continue;
            }
            for (pi, &a) in ra.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (qi, &b) in rb.iter().enumerate() {
                    cp[pi][qi] += a * cij * b;
                }
            }
        }
    }
    let tol = 1e-14 * cp.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for v in cp.iter_mut().flatten() {
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
    Ok(prune(Expansion { p, q, c: cp }))
}

/// Drops factors whose row or column of coefficients vanishes.
fn prune(e: Expansion) -> Expansion {
    let keep_p: Vec<usize> = (0..e.p.len()).filter(|&i| e.c[i].iter().any(|v| *v != 0.0)).collect();
    let keep_q: Vec<usize> = (0..e.q.len()).filter(|&j| e.c.iter().any(|row| row[j] != 0.0)).collect();
    Expansion {
        p: keep_p.iter().map(|&i| e.p[i].clone()).collect(),
        q: keep_q.iter().map(|&j| e.q[j].clone()).collect(),
        c: keep_p.iter().map(|&i| keep_q.iter().map(|&j| e.c[i][j]).collect()).collect(),
    }
}

fn normalized_transpose(m: &CMatrix) -> (f64, DensityMatrix) {
    let tr = m.trace().re;
    (tr, DensityMatrix::from_trusted(m.transpose().scale(1.0 / tr).hermitian_part()))
}

/// Test I with `witness_operator_I(result) = w`.
pub fn compile_witness_to_test1(w: &CMatrix, d_a: usize, d_b: usize, mode: CompileMode) -> Result<PmTestI> {
    let e = expand(w, d_a, d_b, mode)?;
    if e.p.is_empty() {
        return Ok(PmTestI::empty(d_a, d_b));
    }
    let (traces, inputs): (Vec<f64>, Vec<DensityMatrix>) = e.p.iter().map(normalized_transpose).unzip();
    let effects: Vec<Effect> = e.q.iter().map(|q| Effect::from_trusted(q.clone())).collect();
    let rows: Vec<Vec<f64>> = e.c.iter().zip(&traces).map(|(row, t)| row.iter().map(|c| c * t).collect()).collect();
    PmTestI::new(inputs, effects, Weights::from_rows(&rows)?)
}

/// Test II with the Bell measurement and `witness_operator_II(result) = w`.
pub fn compile_witness_to_test2(w: &CMatrix, d_a: usize, d_b: usize, mode: CompileMode) -> Result<PmTestII> {
    let e = expand(w, d_a, d_b, mode)?;
    if e.p.is_empty() {
        return PmTestII::empty(d_a, d_b, d_b, Effect::from(max_entangled(d_b)?));
    }
    let (ta, inputs): (Vec<f64>, Vec<DensityMatrix>) = e.p.iter().map(normalized_transpose).unzip();
    let (tb, assists): (Vec<f64>, Vec<DensityMatrix>) = e.q.iter().map(normalized_transpose).unzip();
    let rows: Vec<Vec<f64>> = e
        .c
        .iter()
        .zip(&ta)
        .map(|(row, a)| row.iter().zip(&tb).map(|(c, b)| c * a * b).collect())
        .collect();
    PmTestII::new(inputs, assists, Weights::from_rows(&rows)?)
}
