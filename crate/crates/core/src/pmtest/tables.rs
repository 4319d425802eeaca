//! The standard depolarizing-channel test designs for any dimension.

use super::{PmTestI, PmTestII, Weights};
use crate::error::{Error, Result};
use crate::qmat::{basis_ket, max_entangled, superposition, CMatrix, DensityMatrix, Effect, C64, I, ONE};

/// Pair states `+_kl, -_kl, R_kl, L_kl` for `k < l`, with their labels.
fn pair_states(d: usize) -> Vec<(String, DensityMatrix)> {
    let mut out = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            let suffix = if d == 2 { String::new() } else { format!("{k}{l}") };
            for (name, phase) in [("+", ONE), ("-", -ONE), ("R", I), ("L", -I)] {
                let psi = superposition(d, k, l, phase);
                out.push((format!("{name}{suffix}"), DensityMatrix::pure(&psi).expect("unit vector")));
            }
        }
    }
    out
}

fn basis_states(d: usize) -> Vec<(String, DensityMatrix)> {
    (0..d)
        .map(|k| (k.to_string(), DensityMatrix::pure(&basis_ket(d, k)).expect("unit vector")))
        .collect()
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("test designs need d >= 2, got {d}")));
    }
    Ok(())
}

/// Weight between two pair-state labels: `+` with `+` is -1/2, `+` with `-` is +1/2,
/// with the `R/L` partner chosen by `rl_same`.
fn pair_weight(x: &str, y: &str, rl_same_sign: f64) -> f64 {
    let (kx, sx) = x.split_at(1);
    let (ky, sy) = y.split_at(1);
    if sx != sy {
        return 0.0;
    }
    match (kx, ky) {
        ("+", "+") | ("-", "-") => -0.5,
        ("+", "-") | ("-", "+") => 0.5,
        ("R", "R") | ("L", "L") => -0.5 * rl_same_sign,
        ("R", "L") | ("L", "R") => 0.5 * rl_same_sign,
        _ => 0.0,
    }
}

/// Test I design: `w_k = 1` on `(|k>, I - |k><k|)` and `-/+1/2` on matching/opposite
/// `(+_kl, -_kl)` and `(R_kl, L_kl)` pairs.
pub fn table2(d: usize) -> Result<PmTestI> {
    check_d(d)?;
    let basis = basis_states(d);
    let pairs = pair_states(d);
    let mut inputs = Vec::new();
    let mut input_labels = Vec::new();
    let mut effects = Vec::new();
    let mut effect_labels = Vec::new();
    for (label, s) in &basis {
        inputs.push(s.clone());
        input_labels.push(label.clone());
        effects.push(Effect::new(CMatrix::identity(d) - s.matrix()).expect("complement projector"));
        effect_labels.push(format!("not{label}"));
    }
    for (label, s) in &pairs {
        inputs.push(s.clone());
        input_labels.push(label.clone());
        effects.push(Effect::from(s.clone()));
        effect_labels.push(label.clone());
    }
    let mut w = Weights::zeros(inputs.len(), effects.len());
    for k in 0..d {
        w.set(k, k, 1.0);
    }
    for (i, (lx, _)) in pairs.iter().enumerate() {
        for (j, (lb, _)) in pairs.iter().enumerate() {
            w.set(d + i, d + j, pair_weight(lx, lb, 1.0));
        }
    }
    PmTestI::with_labels(inputs, effects, w, input_labels, effect_labels)
}

/// Test II design with the Bell measurement: `w_kl = 1 - delta_kl` on basis pairs,
/// `-1/2` on `(+,+), (-,-), (R,L), (L,R)` and `+1/2` on `(+,-), (-,+), (R,R), (L,L)`.
pub fn table3(d: usize) -> Result<PmTestII> {
    check_d(d)?;
    let states: Vec<(String, DensityMatrix)> = basis_states(d).into_iter().chain(pair_states(d)).collect();
    let labels: Vec<String> = states.iter().map(|(l, _)| l.clone()).collect();
    let mats: Vec<DensityMatrix> = states.into_iter().map(|(_, s)| s).collect();
    let n = mats.len();
    let mut w = Weights::zeros(n, n);
    for k in 0..d {
        for l in 0..d {
            if k != l {
                w.set(k, l, 1.0);
            }
        }
    }
    for x in d..n {
        for y in d..n {
            w.set(x, y, pair_weight(&labels[x], &labels[y], -1.0));
        }
    }
    let phi = Effect::from(max_entangled(d)?);
    PmTestII::with_labels(mats.clone(), mats, phi, w, labels.clone(), labels)
}

/// Qubit test II with `xi, psi in {|+>, |->, |0>, |1>}`, `w_01 = w_10 = 1`,
/// `w_+- = w_-+ = 1/2` and `w_++ = w_-- = -1/2`. Its witness operator is
/// `(I - Z (x) Z - X (x) X) / 2`, nonnegative on every product state.
pub fn four_state_test() -> PmTestII {
    let ket = |v: Vec<C64>| DensityMatrix::pure(&v).expect("unit vector");
    let states = vec![
        ket(superposition(2, 0, 1, ONE)),
        ket(superposition(2, 0, 1, -ONE)),
        ket(basis_ket(2, 0)),
        ket(basis_ket(2, 1)),
    ];
    let w = Weights::from_rows(&[
        vec![-0.5, 0.5, 0.0, 0.0],
        vec![0.5, -0.5, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ])
    .expect("rectangular");
    let phi = Effect::from(max_entangled(2).expect("d = 2"));
    let labels: Vec<String> = ["+", "-", "0", "1"].iter().map(|l| l.to_string()).collect();
    PmTestII::with_labels(states.clone(), states, phi, w, labels.clone(), labels).expect("consistent design")
}

/// Qubit test II with `xi in {|0>, |+>}`, `psi in {|1>, |->}`, `w_01 = w_+- = 1`, `w_0- = -1`.
///
/// Its depolarizing value `(1 - 2 gamma)/4` changes sign at `gamma = 1/2`, but
/// its EB bound is negative (about -0.21 for DD), so the sign change alone
/// certifies nothing.
pub fn reduced_four_state_test() -> PmTestII {
    let ket = |v: Vec<C64>| DensityMatrix::pure(&v).expect("unit vector");
    let inputs = vec![ket(basis_ket(2, 0)), ket(superposition(2, 0, 1, ONE))];
    let assists = vec![ket(basis_ket(2, 1)), ket(superposition(2, 0, 1, -ONE))];
    let w = Weights::from_rows(&[vec![1.0, -1.0], vec![0.0, 1.0]]).expect("rectangular");
    let phi = Effect::from(max_entangled(2).expect("d = 2"));
    PmTestII::with_labels(
        inputs,
        assists,
        phi,
        w,
        vec!["0".into(), "+".into()],
        vec!["1".into(), "-".into()],
    )
    .expect("consistent design")
}
