use proptest::prelude::*;

use super::random::{self, gaussian_matrix};
use super::*;
use crate::Error;

fn sx() -> CMatrix {
    CMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn sz() -> CMatrix {
    CMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]])
}

fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

#[test]
fn kron_examples() {
    assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
    let p0 = CMatrix::basis_projector(2, 0);
    let p1 = CMatrix::basis_projector(2, 1);
    assert_eq!(kron(&p0, &p1), CMatrix::diag(&[0.0, 1.0, 0.0, 0.0]));
    // sx (x) sx |00> = |11>
    let xx = kron(&sx(), &sx());
    let ket00 = CMatrix::from_real(&[&[1.0], &[0.0], &[0.0], &[0.0]]);
    let ket11 = CMatrix::from_real(&[&[0.0], &[0.0], &[0.0], &[1.0]]);
    assert_eq!(xx.matmul(&ket00), ket11);
}

#[test]
fn kron_rectangular_index_layout() {
    let a = CMatrix::from_real(&[&[1.0, 2.0]]);
    let b = CMatrix::from_real(&[&[3.0], &[4.0]]);
    let k = kron(&a, &b);
    assert_eq!((k.rows(), k.cols()), (2, 2));
    assert_eq!(k, CMatrix::from_real(&[&[3.0, 6.0], &[4.0, 8.0]]));
}

#[test]
fn partial_trace_examples() {
    let mixed = CMatrix::identity(4).scale(0.25);
    let half = CMatrix::identity(2).scale(0.5);
    assert!(close(&partial_trace(&mixed, Subsystem::B, 2, 2).unwrap(), &half, 1e-15));
    let phi = max_entangled(2).unwrap();
    assert!(close(&partial_trace(phi.matrix(), Subsystem::B, 2, 2).unwrap(), &half, 1e-15));
    let p01 = kron(&CMatrix::basis_projector(2, 0), &CMatrix::basis_projector(2, 1));
    assert_eq!(partial_trace(&p01, Subsystem::A, 2, 2).unwrap(), CMatrix::basis_projector(2, 1));
}

#[test]
fn partial_trace_rejects_bad_dims() {
    let m = CMatrix::identity(4);
    assert!(matches!(partial_trace(&m, Subsystem::B, 2, 3), Err(Error::DimensionMismatch(_))));
    assert!(matches!(partial_transpose(&m, Subsystem::B, 3, 1), Err(Error::DimensionMismatch(_))));
}

#[test]
fn partial_transpose_examples() {
    let mixed = CMatrix::identity(4).scale(0.25);
    assert_eq!(partial_transpose(&mixed, Subsystem::B, 2, 2).unwrap(), mixed);

    let phi = max_entangled(2).unwrap();
    let pt = partial_transpose(phi.matrix(), Subsystem::B, 2, 2).unwrap();
    let vals = pt.eigh().unwrap().values;
    let want = [-0.5, 0.5, 0.5, 0.5];
    for (v, w) in vals.iter().zip(want) {
        assert!((v - w).abs() < 1e-12, "{vals:?}");
    }

    let mut rng = random::rng(3);
    let rho = random::random_mixed_state(&mut rng, 2);
    let sigma = random::random_mixed_state(&mut rng, 3);
    let prod = kron(rho.matrix(), sigma.matrix());
    let pt = partial_transpose(&prod, Subsystem::B, 2, 3).unwrap();
    assert!(close(&pt, &kron(rho.matrix(), &sigma.matrix().transpose()), 1e-15));
    let pta = partial_transpose(&prod, Subsystem::A, 2, 3).unwrap();
    assert!(close(&pta, &kron(&rho.matrix().transpose(), sigma.matrix()), 1e-15));
}

#[test]
fn eig_examples() {
    let e = eig_hermitian(&sz()).unwrap();
    assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);

    let phi = max_entangled(2).unwrap();
    let e = eig_hermitian(phi.matrix()).unwrap();
    for (v, w) in e.values.iter().zip([0.0, 0.0, 0.0, 1.0]) {
        assert!((v - w).abs() < 1e-12);
    }

    let e = eig_hermitian(&(sx() + sz())).unwrap();
    let r2 = 2f64.sqrt();
    assert!((e.values[0] + r2).abs() < 1e-12 && (e.values[1] - r2).abs() < 1e-12);
}

#[test]
fn eig_rejects_non_hermitian() {
    let m = CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
    assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
}

#[test]
fn max_entangled_examples() {
    let phi2 = max_entangled(2).unwrap();
    let want = CMatrix::from_real(&[
        &[0.5, 0.0, 0.0, 0.5],
        &[0.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0],
        &[0.5, 0.0, 0.0, 0.5],
    ]);
    assert!(close(phi2.matrix(), &want, 1e-15));

    let phi3 = max_entangled(3).unwrap();
    let v: Vec<C64> = (0..9)
        .map(|i| if i % 4 == 0 { C64::new(1.0 / 3f64.sqrt(), 0.0) } else { ZERO })
        .collect();
    assert!(close(phi3.matrix(), &CMatrix::outer(&v), 1e-15));

    for d in 2..=5 {
        let phi = max_entangled(d).unwrap();
        let marg = phi.matrix().partial_trace(Subsystem::B, d, d).unwrap();
        assert!(close(&marg, &CMatrix::identity(d).scale(1.0 / d as f64), 1e-14));
        let marg_a = phi.matrix().partial_trace(Subsystem::A, d, d).unwrap();
        assert!(close(&marg_a, &CMatrix::identity(d).scale(1.0 / d as f64), 1e-14));
        let vals = phi.matrix().eigh().unwrap().values;
        assert!((vals[d * d - 1] - 1.0).abs() < 1e-12 && vals[d * d - 2].abs() < 1e-12);
    }
    assert!(matches!(max_entangled(1), Err(Error::InvalidArgument(_))));
}

#[test]
fn constructors_reject_invalid() {
    assert!(DensityMatrix::new(CMatrix::diag(&[0.5, 0.4])).is_err());
    assert!(DensityMatrix::new(CMatrix::diag(&[1.2, -0.2])).is_err());
    assert!(DensityMatrix::new(CMatrix::from_real(&[&[0.5, 0.1], &[0.0, 0.5]])).is_err());
    assert!(DensityMatrix::new(CMatrix::diag(&[0.7, 0.3])).is_ok());

    assert!(Effect::new(CMatrix::diag(&[1.1, 0.0])).is_err());
    assert!(Effect::new(CMatrix::diag(&[-0.1, 0.5])).is_err());
    assert!(Effect::new(CMatrix::diag(&[1.0, 0.0])).is_ok());

    let e0 = Effect::new(CMatrix::basis_projector(2, 0)).unwrap();
    let e1 = Effect::new(CMatrix::basis_projector(2, 1)).unwrap();
    assert!(Povm::new(vec![e0.clone(), e1]).is_ok());
    assert!(Povm::new(vec![e0.clone()]).is_err());
    assert!(Povm::new(vec![e0, Effect::identity(3)]).is_err());
    assert!(Povm::new(vec![]).is_err());

    assert!(CMatrix::from_vec(1, 1, vec![C64::new(f64::NAN, 0.0)]).is_err());
    assert!(CMatrix::from_vec(2, 1, vec![ONE]).is_err());
}

#[test]
fn named_states_are_the_pauli_eigenstates() {
    let sy = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => -I,
        (1, 0) => I,
        _ => ZERO,
    });
    let cases = [("ket0", sz(), 1.0), ("ket1", sz(), -1.0), ("plus", sx(), 1.0), ("minus", sx(), -1.0), ("R", sy.clone(), 1.0), ("L", sy, -1.0)];
    for (name, pauli, sign) in cases {
        let rho = named_qubit_state(name).unwrap();
        assert!((rho.matrix().expect(&pauli) - sign).abs() < 1e-14, "{name}");
    }
    assert!(named_qubit_state("nope").is_none());
}

#[test]
fn random_objects_are_valid() {
    let mut rng = random::rng(11);
    for d in 2..=4 {
        DensityMatrix::new(random::random_mixed_state(&mut rng, d).into_matrix()).unwrap();
        DensityMatrix::new(random::random_pure_state(&mut rng, d).into_matrix()).unwrap();
        let povm = random::random_povm(&mut rng, d, 3);
        Povm::new(povm.effects().to_vec()).unwrap();
        for e in povm.effects() {
            Effect::new(e.matrix().clone()).unwrap();
        }
        Effect::new(random::random_effect(&mut rng, d).matrix().clone()).unwrap();
        let u = random::random_unitary(&mut rng, d);
        assert!(close(&u.adjoint().matmul(&u), &CMatrix::identity(d), 1e-12));
    }
}

fn seeded_matrix(seed: u64, rows: usize, cols: usize) -> CMatrix {
    gaussian_matrix(&mut random::rng(seed), rows, cols)
}

proptest! {
    #[test]
    fn kron_is_associative_and_bilinear(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
        let a = seeded_matrix(seed, da, da);
        let b = seeded_matrix(seed ^ 1, db, db);
        let c = seeded_matrix(seed ^ 2, 2, 2);
        let b2 = seeded_matrix(seed ^ 3, db, db);
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);

        let s = 1.7;
        let lin = kron(&a, &(&b + &b2.scale(s)));
        let split = kron(&a, &b) + kron(&a, &b2).scale(s);
        prop_assert!(lin.max_abs_diff(&split) < 1e-12);
        let lin_a = kron(&(&a + &a.scale(s)), &b);
        prop_assert!(lin_a.max_abs_diff(&kron(&a, &b).scale(1.0 + s)) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let a = seeded_matrix(seed, da, da);
        let b = seeded_matrix(seed ^ 9, db, db);
        let ab = kron(&a, &b);
        let tb = ab.partial_trace(Subsystem::B, da, db).unwrap();
        prop_assert!(tb.max_abs_diff(&a.scale_c(b.trace())) < 1e-12);
        let ta = ab.partial_trace(Subsystem::A, da, db).unwrap();
        prop_assert!(ta.max_abs_diff(&b.scale_c(a.trace())) < 1e-12);
        prop_assert!((tb.trace() - ab.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_an_exact_involution(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let m = seeded_matrix(seed, da * db, da * db);
        let twice = m
            .partial_transpose(Subsystem::B, da, db).unwrap()
            .partial_transpose(Subsystem::B, da, db).unwrap();
        prop_assert_eq!(twice, m);
    }

    #[test]
    fn eigh_reconstructs(seed in any::<u64>(), d in 1usize..7) {
        let m = random::random_hermitian(&mut random::rng(seed), d);
        let e = m.eigh().unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.reconstruct_with(|l| l);
        prop_assert!((&back - &m).frobenius_norm() < 1e-9);
        let gram = e.vectors.adjoint().matmul(&e.vectors);
        prop_assert!(gram.max_abs_diff(&CMatrix::identity(d)) < 1e-9);
        for i in 0..d {
            let v = CMatrix::from_fn(d, 1, |r, _| e.vectors[(r, i)]);
            let mv = m.matmul(&v);
            prop_assert!(mv.max_abs_diff(&v.scale(e.values[i])) < 1e-9);
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let m = seeded_matrix(seed, r, c).map(|z| z * 1e-3f64.powi((seed % 7) as i32));
        let back = text::parse_matrix(&text::write_matrix(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}
