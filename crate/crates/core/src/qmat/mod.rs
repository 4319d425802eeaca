//! Complex linear algebra and quantum-state primitives.

mod matrix;
pub mod random;
mod states;
pub mod text;

pub use matrix::{eig_hermitian, CMatrix, Eigh, Subsystem, C64, I, ONE, ZERO};
pub use states::{
    basis_ket, max_entangled, named_qubit_state, superposition, DensityMatrix, Effect, Povm,
    Tolerances,
};

/// Default Hermiticity tolerance (max entrywise `|M - M^dag|`).
pub const TOL_HERM: f64 = 1e-10;
/// Default trace tolerance for density matrices.
pub const TOL_TR: f64 = 1e-10;
/// Default eigenvalue slack for positivity and `E <= I`.
pub const TOL_PSD: f64 = 1e-9;

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kron(b)
}

pub fn partial_trace(m: &CMatrix, subsystem: Subsystem, d_a: usize, d_b: usize) -> crate::Result<CMatrix> {
    m.partial_trace(subsystem, d_a, d_b)
}

pub fn partial_transpose(m: &CMatrix, subsystem: Subsystem, d_a: usize, d_b: usize) -> crate::Result<CMatrix> {
    m.partial_transpose(subsystem, d_a, d_b)
}

#[cfg(test)]
mod tests;
