//! Seeded random states, effects and measurements built from Gaussian vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, DensityMatrix, Effect, Povm, C64};

pub type SeedRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Unit vector with Haar-distributed direction.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| gaussian_c64(rng)).collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    DensityMatrix::from_trusted(CMatrix::outer(&random_unit_vector(rng, d)))
}

/// Mixed state `G G^dag / tr(G G^dag)` with a square Ginibre `G`.
pub fn random_mixed_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    let g = gaussian_matrix(rng, d, d);
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::from_trusted(m.scale(1.0 / tr).hermitian_part())
}

/// Random POVM with `k` outcomes: `E_j = S^{-1/2} G_j G_j^dag S^{-1/2}`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Povm {
    let blocks: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = gaussian_matrix(rng, d, d);
            g.matmul(&g.adjoint())
        })
        .collect();
    normalize_povm(&blocks)
}

/// Maps positive blocks `B_j` to the POVM `S^{-1/2} B_j S^{-1/2}`, `S = sum_j B_j`.
pub fn normalize_povm(blocks: &[CMatrix]) -> Povm {
    let d = blocks[0].rows();
    let mut s = CMatrix::zeros(d, d);
    for b in blocks {
        s += b;
    }
    let s = s.hermitian_part();
    let inv_sqrt = s
        .spectral_map(|l| if l > 1e-14 { 1.0 / l.sqrt() } else { 0.0 })
        .expect("sum of positive blocks is Hermitian");
    Povm::from_trusted(
        blocks
            .iter()
            .map(|b| Effect::from_trusted(inv_sqrt.matmul(b).matmul(&inv_sqrt).hermitian_part()))
            .collect(),
    )
}

/// Random effect with spectrum drawn uniformly in `[0, 1]`.
pub fn random_effect<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Effect {
    let u = random_unitary(rng, d);
    let spectrum: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let m = u.matmul(&CMatrix::diag(&spectrum)).matmul(&u.adjoint());
    Effect::from_trusted(m.hermitian_part())
}

/// Haar-ish unitary from the polar factor of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    isometry_from(&gaussian_matrix(rng, d, d))
}

/// Polar isometry `G (G^dag G)^{-1/2}` of a tall matrix.
pub fn isometry_from(g: &CMatrix) -> CMatrix {
    let gram = g.adjoint().matmul(g).hermitian_part();
    let inv_sqrt = gram
        .spectral_map(|l| if l > 1e-14 { 1.0 / l.sqrt() } else { 0.0 })
        .expect("Gram matrix is Hermitian");
    g.matmul(&inv_sqrt)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    gaussian_matrix(rng, d, d).hermitian_part()
}
