use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::channel::{choi_of_eb, random_channel, random_eb_params};
use crate::depol::{closed_form_w1, closed_form_w2, depolarizing, DepolParams};
use crate::qmat::random::{self, random_effect, random_hermitian, random_mixed_state, random_pure_state};
use crate::qmat::{named_qubit_state, CMatrix};

fn depol(g: f64, d: usize) -> Channel {
    depolarizing(DepolParams::new(g, d).unwrap())
}

fn ket(name: &str) -> DensityMatrix {
    named_qubit_state(name).unwrap()
}

fn single_test1(xi: DensityMatrix, f: Effect) -> PmTestI {
    PmTestI::new(vec![xi], vec![f], Weights::from_rows(&[vec![1.0]]).unwrap()).unwrap()
}

/// `I - d Phi_+`, the operator the standard designs realize.
fn bell_witness(d: usize) -> CMatrix {
    CMatrix::identity(d * d) - max_entangled(d).unwrap().matrix().scale(d as f64)
}

fn random_test1<R: Rng>(rng: &mut R, d_a: usize, d_b: usize) -> PmTestI {
    let nx = rng.random_range(1..4);
    let nb = rng.random_range(1..4);
    let inputs = (0..nx).map(|_| random_mixed_state(rng, d_a)).collect();
    let effects = (0..nb).map(|_| random_effect(rng, d_b)).collect();
    let rows: Vec<Vec<f64>> = (0..nx).map(|_| (0..nb).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    PmTestI::new(inputs, effects, Weights::from_rows(&rows).unwrap()).unwrap()
}

fn random_test2<R: Rng>(rng: &mut R, d_a: usize, d_b: usize, d_bp: usize) -> PmTestII {
    let nx = rng.random_range(1..4);
    let ny = rng.random_range(1..4);
    let inputs = (0..nx).map(|_| random_mixed_state(rng, d_a)).collect();
    let assists = (0..ny).map(|_| random_mixed_state(rng, d_bp)).collect();
    let rows: Vec<Vec<f64>> = (0..nx).map(|_| (0..ny).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let f = random_effect(rng, d_b * d_bp);
    PmTestII::with_labels(
        inputs,
        assists,
        f,
        Weights::from_rows(&rows).unwrap(),
        default_labels(nx),
        default_labels(ny),
    )
    .unwrap()
}

#[test]
fn run_test1_examples() {
    let t = single_test1(ket("ket0"), Effect::from(ket("ket0")));
    assert!((run_test1(&Channel::identity(2), &t).unwrap().get(0, 0) - 1.0).abs() < 1e-12);
    let t = single_test1(ket("ket0"), Effect::from(ket("ket1")));
    assert!((run_test1(&depol(0.5, 2), &t).unwrap().get(0, 0) - 0.25).abs() < 1e-12);
    let mut rng = random::rng(1);
    for _ in 0..5 {
        let t = single_test1(random_pure_state(&mut rng, 2), Effect::from(random_pure_state(&mut rng, 2)));
        assert!((run_test1(&depol(0.0, 2), &t).unwrap().get(0, 0) - 0.5).abs() < 1e-12);
    }
    assert!(run_test1(&depol(0.5, 3), &t).is_err());
}

#[test]
fn run_test2_examples() {
    let w = Weights::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let t = PmTestII::new(vec![ket("ket0")], vec![ket("ket0"), ket("ket1")], w).unwrap();
    let s = run_test2(&Channel::identity(2), &t).unwrap();
    assert!((s.get(0, 0) - 0.5).abs() < 1e-12);
    assert!(s.get(0, 1).abs() < 1e-12);
    let t3 = table3(2).unwrap();
    let v = witness_value(&run_test2(&depol(1.0 / 3.0, 2), &t3).unwrap(), t3.weights()).unwrap();
    assert!(v.abs() < 1e-12);
}

#[test]
fn witness_value_examples() {
    let t2 = table2(2).unwrap();
    for (g, want) in [(0.0, 1.0), (1.0, -2.0)] {
        let v = witness_value(&run_test1(&depol(g, 2), &t2).unwrap(), t2.weights()).unwrap();
        assert!((v - want).abs() < 1e-12, "gamma {g}: {v}");
    }
    let stats = run_test1(&depol(0.4, 2), &t2).unwrap();
    let zero = Weights::zeros(t2.inputs().len(), t2.effects().len());
    assert_eq!(witness_value(&stats, &zero).unwrap(), 0.0);
    assert!(witness_value(&stats, &Weights::zeros(1, 1)).is_err());
}

#[test]
fn design_witness_operators() {
    for d in 2..=4 {
        let w1 = witness_operator_I(&table2(d).unwrap());
        assert!(w1.max_abs_diff(&bell_witness(d)) < 1e-12, "table2({d})");
        let w2 = witness_operator_II(&table3(d).unwrap());
        assert!(w2.max_abs_diff(&bell_witness(d)) < 1e-12, "table3({d})");
    }
    let t = single_test1(ket("ket0"), Effect::from(ket("ket1")));
    assert!(witness_operator_I(&t).max_abs_diff(&CMatrix::basis_projector(4, 1)) < 1e-15);
    let t = PmTestII::new(vec![ket("ket0")], vec![ket("ket0")], Weights::from_rows(&[vec![1.0]]).unwrap()).unwrap();
    assert!(witness_operator_II(&t).max_abs_diff(&CMatrix::basis_projector(4, 0)) < 1e-15);
}

#[test]
fn designs_match_closed_forms() {
    for d in 2..=3 {
        let t2 = table2(d).unwrap();
        let t3 = table3(d).unwrap();
        for g in [0.0, 0.2, 1.0 / (d as f64 + 1.0), 0.6, 1.0] {
            let p = DepolParams::new(g, d).unwrap();
            let w1 = witness_value(&run_test1(&depolarizing(p), &t2).unwrap(), t2.weights()).unwrap();
            let w2 = witness_value(&run_test2(&depolarizing(p), &t3).unwrap(), t3.weights()).unwrap();
            assert!((w1 - closed_form_w1(p)).abs() < 1e-9);
            assert!((w2 - closed_form_w2(p)).abs() < 1e-9);
            assert!((w1 - d as f64 * w2).abs() < 1e-9);
        }
    }
}

#[test]
fn four_state_value() {
    let t = four_state_test();
    let r = reduced_four_state_test();
    for g in [0.0, 0.3, 0.5, 0.55, 1.0] {
        let v = witness_value(&run_test2(&depol(g, 2), &t).unwrap(), t.weights()).unwrap();
        assert!((v - (1.0 - 2.0 * g) / 2.0).abs() < 1e-12);
        let v = witness_value(&run_test2(&depol(g, 2), &r).unwrap(), r.weights()).unwrap();
        assert!((v - (1.0 - 2.0 * g) / 4.0).abs() < 1e-12);
    }
}

#[test]
fn four_state_witness_operator() {
    let phi = max_entangled(2).unwrap().into_matrix();
    let z = CMatrix::diag(&[1.0, -1.0]);
    let x = CMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let mut expected = CMatrix::identity(4);
    expected -= &z.kron(&z);
    expected -= &x.kron(&x);
    let w = witness_operator_II(&four_state_test());
    assert!(w.max_abs_diff(&expected.scale(0.5)) < 1e-12);
    assert!(phi.expect(&w) < 0.0);
}

#[test]
fn correlation_identity_test1() {
    let mut rng = random::rng(11);
    for i in 0..200 {
        let (d_a, d_b) = (rng.random_range(2..4), rng.random_range(2..4));
        let nk = rng.random_range(1..4);
        let ch = random_channel(&mut rng, d_a, d_b, nk);
        let t = random_test1(&mut rng, d_a, d_b);
        let stats = run_test1(&ch, &t).unwrap();
        for row in stats.table() {
            assert!(row.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
        }
        let direct = witness_value(&stats, t.weights()).unwrap();
        let via_choi = d_a as f64 * witness_operator_I(&t).expect(ch.choi_state().matrix());
        assert!((direct - via_choi).abs() < 1e-9, "pair {i}: {direct} vs {via_choi}");
    }
}

#[test]
fn correlation_identity_test2() {
    let mut rng = random::rng(12);
    for i in 0..200 {
        let (d_a, d_b, d_bp) = (rng.random_range(2..4), rng.random_range(2..4), rng.random_range(2..4));
        let nk = rng.random_range(1..4);
        let ch = random_channel(&mut rng, d_a, d_b, nk);
        let t = random_test2(&mut rng, d_a, d_b, d_bp);
        let stats = run_test2(&ch, &t).unwrap();
        for row in stats.table() {
            assert!(row.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
        }
        let direct = witness_value(&stats, t.weights()).unwrap();
        let st = effective_state(&ch, t.fixed_effect(), d_bp).unwrap();
        assert!(st.trace().re <= d_bp as f64 / d_b as f64 + 1e-9);
        assert!(st.min_eigenvalue().unwrap() > -1e-9);
        let via = (d_a * d_b) as f64 * witness_operator_II(&t).expect(&st);
        assert!((direct - via).abs() < 1e-9, "pair {i}: {direct} vs {via}");
    }
}

#[test]
fn bell_effect_identity() {
    let mut rng = random::rng(13);
    for _ in 0..20 {
        let d = rng.random_range(2..4);
        let d_a = rng.random_range(2..4);
        let ch = random_channel(&mut rng, d_a, d, 2);
        let phi = Effect::from(max_entangled(d).unwrap());
        let st = effective_state(&ch, &phi, d).unwrap();
        let want = ch.choi_state().matrix().scale(1.0 / (d * d) as f64);
        assert!(st.max_abs_diff(&want) < 1e-12);

        let nx = rng.random_range(1..4);
        let inputs = (0..nx).map(|_| random_mixed_state(&mut rng, d_a)).collect();
        let assists = (0..2).map(|_| random_mixed_state(&mut rng, d)).collect();
        let rows: Vec<Vec<f64>> = (0..nx).map(|_| vec![rng.random_range(-1.0..1.0), 1.0]).collect();
        let t = PmTestII::new(inputs, assists, Weights::from_rows(&rows).unwrap()).unwrap();
        let direct = witness_value(&run_test2(&ch, &t).unwrap(), t.weights()).unwrap();
        let via = d_a as f64 / d as f64 * witness_operator_II(&t).expect(ch.choi_state().matrix());
        assert!((direct - via).abs() < 1e-9);
    }
}

#[test]
fn effective_state_of_identity_effect() {
    let st = effective_state(&Channel::identity(2), &Effect::identity(4), 2).unwrap();
    assert!((st.trace().re - 1.0).abs() < 1e-12);
    assert!(st.max_abs_diff(&CMatrix::identity(4).scale(0.25)) < 1e-12);
}

#[test]
fn effective_state_of_eb_channel() {
    let mut rng = random::rng(14);
    for _ in 0..20 {
        let (d_a, d_b, d_bp) = (2, rng.random_range(2..4), rng.random_range(2..4));
        let p = random_eb_params(&mut rng, d_a, d_b, 3);
        let ch = crate::channel::eb_channel(&p).unwrap();
        let f = random_effect(&mut rng, d_b * d_bp);
        let st = effective_state(&ch, &f, d_bp).unwrap();
        let marg = st.partial_trace(Subsystem::B, d_a, d_bp).unwrap();
        let gap = CMatrix::identity(d_a).scale(1.0 / d_a as f64) - marg;
        assert!(gap.min_eigenvalue().unwrap() > -1e-9);
        // Product form: the Choi operator is separable and the result stays PPT.
        let pt = st.partial_transpose(Subsystem::B, d_a, d_bp).unwrap();
        assert!(pt.min_eigenvalue().unwrap() > -1e-9);
        assert!(choi_of_eb(&p).max_abs_diff(ch.choi_state().matrix()) < 1e-9);
    }
}

#[test]
fn compile_bell_witness() {
    for d in 2..=3 {
        for mode in [CompileMode::GellMann, CompileMode::Schmidt] {
            let t1 = compile_witness_to_test1(&bell_witness(d), d, d, mode).unwrap();
            let t2 = compile_witness_to_test2(&bell_witness(d), d, d, mode).unwrap();
            for g in [0.0, 0.25, 0.5, 1.0] {
                let p = DepolParams::new(g, d).unwrap();
                let v1 = witness_value(&run_test1(&depolarizing(p), &t1).unwrap(), t1.weights()).unwrap();
                assert!((v1 - closed_form_w1(p)).abs() < 1e-9);
                let v2 = witness_value(&run_test2(&depolarizing(p), &t2).unwrap(), t2.weights()).unwrap();
                assert!((v2 - closed_form_w2(p)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn compile_zero_and_product() {
    let t = compile_witness_to_test1(&CMatrix::zeros(4, 4), 2, 2, CompileMode::GellMann).unwrap();
    assert!(t.inputs().is_empty());
    assert!(witness_operator_I(&t).max_abs_diff(&CMatrix::zeros(4, 4)) == 0.0);
    let t = compile_witness_to_test2(&CMatrix::zeros(6, 6), 2, 3, CompileMode::Schmidt).unwrap();
    assert!(t.inputs().is_empty());

    let mut rng = random::rng(15);
    let a = random_pure_state(&mut rng, 2);
    let b = random_pure_state(&mut rng, 3);
    let w = a.matrix().kron(b.matrix());
    let t = compile_witness_to_test2(&w, 2, 3, CompileMode::Schmidt).unwrap();
    assert_eq!((t.inputs().len(), t.assists().len()), (1, 1));
    assert!(witness_operator_II(&t).max_abs_diff(&w) < 1e-9);
}

#[test]
fn compile_rejects_bad_input() {
    assert!(compile_witness_to_test1(&CMatrix::zeros(4, 4), 2, 3, CompileMode::GellMann).is_err());
    let mut m = CMatrix::zeros(4, 4);
    m.add_scaled(1.0, &CMatrix::from_fn(4, 4, |r, c| if r == 0 && c == 1 { crate::qmat::ONE } else { crate::qmat::ZERO }));
    assert!(compile_witness_to_test1(&m, 2, 2, CompileMode::GellMann).is_err());
}

#[test]
fn schmidt_mode_setting_count() {
    let mut rng = random::rng(16);
    for (d_a, d_b) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        let w = random_hermitian(&mut rng, d_a * d_b);
        let t = compile_witness_to_test1(&w, d_a, d_b, CompileMode::Schmidt).unwrap();
        let dmin = d_a.min(d_b);
        assert!(t.inputs().len() <= dmin * dmin + 1);
        assert!(t.effects().len() <= dmin * dmin + 1);
    }
}

#[test]
fn npt_witness_examples() {
    let sigma = depol(1.0, 2).choi_state();
    let w = witness_from_npt_choi(&sigma).unwrap();
    assert!((w.expect(sigma.matrix()) + 0.5).abs() < 1e-9);
    let sigma = depol(0.5, 2).choi_state();
    let w = witness_from_npt_choi(&sigma).unwrap();
    assert!(w.expect(sigma.matrix()) < 0.0);
    assert!(matches!(witness_from_npt_choi(&depol(0.2, 2).choi_state()), Err(Error::PptInput)));
}

#[test]
fn npt_witness_is_nonnegative_on_products() {
    let mut rng = random::rng(17);
    for d in 2..=3 {
        let sigma = depol(0.9, d).choi_state();
        let w = witness_from_npt_choi(&sigma).unwrap();
        for _ in 0..50 {
            let rho = random_mixed_state(&mut rng, d).matrix().kron(random_mixed_state(&mut rng, d).matrix());
            assert!(w.expect(&rho) >= -1e-12);
        }
    }
}

#[test]
fn file_round_trip() {
    for t in [
        PmTest::I(table2(2).unwrap()),
        PmTest::II(table3(3).unwrap()),
        PmTest::II(four_state_test()),
    ] {
        let parsed = PmTest::parse(&t.to_text()).unwrap();
        assert_eq!(parsed.kind(), t.kind());
        assert_eq!(parsed.weights(), t.weights());
        let (a, b) = match (&t, &parsed) {
            (PmTest::I(a), PmTest::I(b)) => (witness_operator_I(a), witness_operator_I(b)),
            (PmTest::II(a), PmTest::II(b)) => (witness_operator_II(a), witness_operator_II(b)),
            _ => unreachable!(),
        };
        assert_eq!(a, b);
    }
}

#[test]
fn file_shorthands() {
    let text = "\
# reduced four-state design
pmtest II 2 2
state 0 ket0
state + plus
assist 1 ket1
assist - minus
effect F phi+
weights
0 1 1
+ - 1
0 - -1
";
    let PmTest::II(t) = PmTest::parse(text).unwrap() else { panic!("kind") };
    let four = reduced_four_state_test();
    assert_eq!(t.weights(), four.weights());
    assert!(witness_operator_II(&t).max_abs_diff(&witness_operator_II(&four)) < 1e-15);
    assert!(t.has_bell_effect());

    let text = "pmtest I 3 3\nstate a ket2\neffect b\ndims: 3 3\n1 0 0\n0 0 0\n0 0 0\nweights\na b 0.5\n";
    let PmTest::I(t) = PmTest::parse(text).unwrap() else { panic!("kind") };
    assert_eq!(t.weights().get(0, 0), 0.5);
}

#[test]
fn file_errors() {
    let bad = [
        "",
        "pmtest III 2 2\n",
        "pmtest I 2\n",
        "pmtest I 2 2\nstate a bogus\n",
        "pmtest I 2 2\nstate a ket0\neffect b ket0\nweights\na c 1\n",
        "pmtest I 2 2\nstate a ket0\neffect b ket0\nweights\na b x\n",
        "pmtest I 2 2\nstate a\ndims: 2 2\n1 0\n0 0.5\n",
        "pmtest I 2 2\nstate a ket0\nstate a ket1\neffect b ket0\n",
    ];
    for text in bad {
        assert!(PmTest::parse(text).is_err(), "accepted {text:?}");
    }
    let mismatch = "pmtest I 2 2\nstate a\ndims: 3 3\n1 0 0\n0 0 0\n0 0 0\n";
    assert!(matches!(PmTest::parse(mismatch), Err(Error::DimensionMismatch(_))));
}

#[test]
fn named_designs() {
    assert_eq!(PmTest::named("table2(3)").unwrap().unwrap().kind(), TestKind::I);
    assert_eq!(PmTest::named("table3(2)").unwrap().unwrap().kind(), TestKind::II);
    assert!(PmTest::named("table2(1)").unwrap().is_err());
    assert!(PmTest::named("tests.txt").is_none());
    assert_eq!(PmTest::named("four-state").unwrap().unwrap().d_a(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compile_round_trip(seed in any::<u64>(), d_a in 2usize..4, d_b in 2usize..4, schmidt in any::<bool>()) {
        let mut rng = random::rng(seed);
        let w = random_hermitian(&mut rng, d_a * d_b);
        let mode = if schmidt { CompileMode::Schmidt } else { CompileMode::GellMann };
        let t1 = compile_witness_to_test1(&w, d_a, d_b, mode).unwrap();
        prop_assert!(witness_operator_I(&t1).max_abs_diff(&w) < 1e-9);
        let t2 = compile_witness_to_test2(&w, d_a, d_b, mode).unwrap();
        prop_assert!(witness_operator_II(&t2).max_abs_diff(&w) < 1e-9);
    }

    #[test]
    fn statistics_are_probabilities(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let ch = random_channel(&mut rng, 2, 3, 3);
        let t = random_test1(&mut rng, 2, 3);
        for row in run_test1(&ch, &t).unwrap().table() {
            prop_assert!(row.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
        }
        let t = random_test2(&mut rng, 2, 3, 2);
        for row in run_test2(&ch, &t).unwrap().table() {
            prop_assert!(row.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
        }
    }
}
