use serde::Deserialize;

use super::matrix::{CMatrix, C64, I, ONE, ZERO};
use crate::error::{Error, Result};

/// Numerical tolerances used by the validating constructors.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// max entrywise `|M - M^dag|`
    pub herm: f64,
    /// `|tr rho - 1|`
    pub trace: f64,
    /// slack on eigenvalue bounds (PSD, `E <= I`) and on POVM completeness
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: super::TOL_HERM,
            trace: super::TOL_TR,
            psd: super::TOL_PSD,
        }
    }
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::InvalidState(format!(
                "{}x{} is not a non-empty square matrix",
                mat.rows(),
                mat.cols()
            )));
        }
        let defect = mat.hermiticity_defect();
        if defect > tol.herm {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:.3e})")));
        }
        let tr = mat.trace();
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = mat.min_eigenvalue()?;
        if min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { mat })
    }

    /// Normalized projector onto `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        Ok(DensityMatrix {
            mat: CMatrix::outer(psi).scale(1.0 / norm2),
        })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            mat: CMatrix::identity(d).scale(1.0 / d as f64),
        }
    }

    /// Wraps a matrix known to be a state by construction (no checks in release builds).
    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        debug_assert!(mat.is_hermitian(1e-8), "untrusted state: {mat:?}");
        DensityMatrix { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn transpose(&self) -> DensityMatrix {
        DensityMatrix {
            mat: self.mat.transpose(),
        }
    }
}

/// A validated POVM element `0 <= E <= I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    mat: CMatrix,
}

impl Effect {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::InvalidEffect("not a non-empty square matrix".into()));
        }
        let defect = mat.hermiticity_defect();
        if defect > tol.herm {
            return Err(Error::InvalidEffect(format!("not Hermitian (defect {defect:.3e})")));
        }
        let eig = mat.eigh()?;
        let (lo, hi) = (eig.values[0], *eig.values.last().unwrap());
        if lo < -tol.psd || hi > 1.0 + tol.psd {
            return Err(Error::InvalidEffect(format!(
                "spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
            )));
        }
        Ok(Effect { mat })
    }

    pub fn identity(d: usize) -> Self {
        Effect {
            mat: CMatrix::identity(d),
        }
    }

    pub fn zero(d: usize) -> Self {
        Effect {
            mat: CMatrix::zeros(d, d),
        }
    }

    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        debug_assert!(mat.is_hermitian(1e-8), "untrusted effect: {mat:?}");
        Effect { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

impl From<DensityMatrix> for Effect {
    /// Every density matrix is also an effect.
    fn from(rho: DensityMatrix) -> Self {
        Effect { mat: rho.mat }
    }
}

/// A complete measurement: effects on a common space summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<Effect>,
}

impl Povm {
    pub fn new(effects: Vec<Effect>) -> Result<Self> {
        Self::with_tolerances(effects, &Tolerances::default())
    }

    pub fn with_tolerances(effects: Vec<Effect>, tol: &Tolerances) -> Result<Self> {
        let d = effects
            .first()
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?
            .dim();
        if effects.iter().any(|e| e.dim() != d) {
            return Err(Error::InvalidPovm("effects of different dimensions".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for e in &effects {
            sum += e.matrix();
        }
        let err = sum.max_abs_diff(&CMatrix::identity(d));
        if err > tol.psd {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {err:.3e}"
            )));
        }
        Ok(Povm { effects })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        Povm {
            effects: (0..d)
                .map(|k| Effect::from_trusted(CMatrix::basis_projector(d, k)))
                .collect(),
        }
    }

    pub(crate) fn from_trusted(effects: Vec<Effect>) -> Self {
        Povm { effects }
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }
}

/// Vector `(|k> + phase |l>)/sqrt(2)` in dimension `d`.
pub fn superposition(d: usize, k: usize, l: usize, phase: C64) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; d];
    v[k] = C64::new(s, 0.0);
    v[l] = phase * s;
    v
}

pub fn basis_ket(d: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

/// The qubit shorthands `ket0 ket1 plus minus R L`.
pub fn named_qubit_state(name: &str) -> Option<DensityMatrix> {
    let psi = match name {
        "ket0" => basis_ket(2, 0),
        "ket1" => basis_ket(2, 1),
        "plus" => superposition(2, 0, 1, ONE),
        "minus" => superposition(2, 0, 1, -ONE),
        "R" => superposition(2, 0, 1, I),
        "L" => superposition(2, 0, 1, -I),
        _ => return None,
    };
    DensityMatrix::pure(&psi).ok()
}

/// Unnormalized maximally entangled vector `sum_m |mm>`.
fn max_entangled_vector(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    for m in 0..d {
        v[m * d + m] = ONE;
    }
    v
}

/// `Phi_+ = sum_{mn} |mm><nn| / d`.
pub fn max_entangled(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximally entangled state needs d >= 2, got {d}"
        )));
    }
    DensityMatrix::pure(&max_entangled_vector(d))
}
