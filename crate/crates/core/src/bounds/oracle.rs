//! Brute-force reference for `min tr[W sigma]` over Choi operators of
//! measure-and-prepare maps, independent of the see-saw.
//!
//! Both factors range over a fixed grid of pure states. For each grid vector
//! `e` the best B factor is found by scanning the grid; the weights `c_e` of
//! the rank-one POVM `{c_e |e><e|}` are then chosen by a linear program, so the
//! marginal constraint holds exactly.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use super::sdi::ket_from_angles;
use crate::error::{Error, Result};
use crate::qmat::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalConstraint {
    /// `tr_B sigma = I/d_A`
    Eq,
    /// `tr_B sigma <= I/d_A`
    Le,
}

/// Pure states on a hyperspherical grid with `n` points per angle.
fn grid(d: usize, n: usize) -> Vec<Vec<C64>> {
    let m = d - 1;
    let total = n.pow((2 * m) as u32);
    let step_theta = if n > 1 { std::f64::consts::FRAC_PI_2 / (n - 1) as f64 } else { 0.0 };
    let step_phi = std::f64::consts::TAU / n as f64;
    (0..total)
        .map(|mut idx| {
            let mut angles = vec![0.0; 2 * m];
            for (a, angle) in angles.iter_mut().enumerate() {
                let j = idx % n;
                idx /= n;
                *angle = if a < m { j as f64 * step_theta } else { j as f64 * step_phi };
            }
            ket_from_angles(&angles, d)
        })
        .collect()
}

/// `(<e*| (x) I) W (|e*> (x) I)` on B.
fn contract_a(w: &CMatrix, e: &[C64], d_a: usize, d_b: usize) -> CMatrix {
    CMatrix::from_fn(d_b, d_b, |r, c| {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..d_a {
            for j in 0..d_a {
                // <e*| has components e_i
                s += e[i] * w[(i * d_b + r, j * d_b + c)] * e[j].conj();
            }
        }
        s
    })
}

fn expectation(m: &CMatrix, v: &[C64]) -> f64 {
    let d = v.len();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            s += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    s.re
}

/// Upper bound on `min tr[W sigma]`; tightens as `density` grows. Dimensions
/// are capped at 3.
pub fn oracle_grid_min(w: &CMatrix, constraint: MarginalConstraint, d_a: usize, d_b: usize, density: usize) -> Result<f64> {
    if !(1..=3).contains(&d_a) || !(1..=3).contains(&d_b) {
        return Err(Error::InvalidArgument(format!("grid oracle supports dimensions up to 3, got {d_a}x{d_b}")));
    }
    if density < 2 {
        return Err(Error::InvalidArgument("grid density must be at least 2".into()));
    }
    if !w.is_square() || w.rows() != d_a * d_b {
        return Err(Error::dims(format!("operator is {}x{}, expected {}", w.rows(), w.cols(), d_a * d_b)));
    }
    if w.data().iter().all(|z| z.norm() == 0.0) {
        return Ok(0.0);
    }
    let ga = grid(d_a, density);
    let gb = grid(d_b, density);
    let values: Vec<f64> = ga
        .iter()
        .map(|e| {
            let m = contract_a(w, e, d_a, d_b);
            let v = gb.iter().map(|b| expectation(&m, b)).fold(f64::INFINITY, f64::min);
            match constraint {
                MarginalConstraint::Eq => v,
                MarginalConstraint::Le => v.min(0.0),
            }
        })
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = values.iter().map(|v| lp.add_var(v / d_a as f64, (0.0, f64::INFINITY))).collect();
    for r in 0..d_a {
        for s in r..d_a {
            let re: Vec<_> = ga.iter().zip(&vars).map(|(e, &x)| (x, (e[r] * e[s].conj()).re)).collect();
            lp.add_constraint(re.as_slice(), ComparisonOp::Eq, if r == s { 1.0 } else { 0.0 });
            if r != s {
                let im: Vec<_> = ga.iter().zip(&vars).map(|(e, &x)| (x, (e[r] * e[s].conj()).im)).collect();
                lp.add_constraint(im.as_slice(), ComparisonOp::Eq, 0.0);
            }
        }
    }
    let sol = lp.solve().map_err(|e| Error::Optimizer(format!("grid LP: {e}")))?;
    Ok(sol.objective())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::max_entangled;

    #[test]
    fn grid_states_are_normalized() {
        for d in 1..=3 {
            for v in grid(d, 4) {
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_operator() {
        assert_eq!(oracle_grid_min(&CMatrix::zeros(4, 4), MarginalConstraint::Eq, 2, 2, 6).unwrap(), 0.0);
    }

    #[test]
    fn identity_gives_one() {
        let v = oracle_grid_min(&CMatrix::identity(4), MarginalConstraint::Eq, 2, 2, 6).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let v = oracle_grid_min(&CMatrix::identity(4), MarginalConstraint::Le, 2, 2, 6).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn isotropic_witness_is_nonnegative_and_tight() {
        let phi = max_entangled(2).unwrap().into_matrix();
        let w = &CMatrix::identity(4).scale(0.5) - &phi;
        let v = oracle_grid_min(&w, MarginalConstraint::Eq, 2, 2, 24).unwrap();
        assert!((-1e-9..=1e-3).contains(&v), "{v}");
    }

    #[test]
    fn rejects_large_dimensions() {
        assert!(oracle_grid_min(&CMatrix::identity(8), MarginalConstraint::Eq, 4, 2, 4).is_err());
    }
}
