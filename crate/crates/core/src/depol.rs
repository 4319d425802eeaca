//! Closed-form reference results for the depolarizing channel
//! `N_gamma(rho) = gamma rho + (1 - gamma) I/d`.

use std::f64::consts::FRAC_PI_4;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::pmtest::{self, PmTestII};
use crate::qmat::{CMatrix, Effect, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolParams {
    gamma: f64,
    d: usize,
}

impl DepolParams {
    pub fn new(gamma: f64, d: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} outside [0, 1]")));
        }
        if d < 2 {
            return Err(Error::InvalidArgument(format!("dimension {d} < 2")));
        }
        Ok(DepolParams { gamma, d })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Detection efficiencies for the Pauli-type effects of the test-I design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiencies {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Efficiencies {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y), ("z", z)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("efficiency eps_{name} = {v} outside (0, 1]")));
            }
        }
        Ok(Efficiencies { x, y, z })
    }
}

/// Imperfect Bell measurement `eps |phi_theta><phi_theta|`, `|phi_theta> = cos t |00> + sin t |11>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellTilt {
    pub eps: f64,
    pub theta: f64,
}

impl BellTilt {
    pub fn new(eps: f64, theta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid tilt eps={eps}, theta={theta}")));
        }
        Ok(BellTilt { eps, theta })
    }

    pub fn ideal() -> Self {
        BellTilt { eps: 1.0, theta: FRAC_PI_4 }
    }

    pub fn effect(&self) -> Effect {
        let (s, c) = self.theta.sin_cos();
        let v = [C64::new(c, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
        Effect::new(CMatrix::outer(&v).scale(self.eps)).expect("eps in (0, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorImperfection {
    Efficiencies(Efficiencies),
    BellTilt(BellTilt),
}

/// Heisenberg-Weyl twirl with weight `gamma + (1-gamma)/d^2` on the identity.
pub fn depolarizing(p: DepolParams) -> Channel {
    let d = p.d;
    let omega = |k: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64);
    let rest = (1.0 - p.gamma) / (d * d) as f64;
    let mut kraus = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let w = if a == 0 && b == 0 { p.gamma + rest } else { rest };
            if w == 0.0 {
                continue;
            }
            // X^a Z^b |k> = omega^{bk} |k + a>
            let s = w.sqrt();
            kraus.push(CMatrix::from_fn(d, d, |r, c| {
                if r == (c + a) % d {
                    omega((b * c) % d) * s
                } else {
                    ZERO
                }
            }));
        }
    }
    Channel::new(d, d, kraus).expect("Heisenberg-Weyl twirl is trace preserving")
}

/// The depolarizing channel is entanglement breaking iff `gamma <= 1/(d+1)`.
pub fn neb_threshold(d: usize) -> f64 {
    1.0 / (d as f64 + 1.0)
}

/// Value of the test-I design on `N_gamma`: `(d-1)[1 - (d+1) gamma]`.
pub fn closed_form_w1(p: DepolParams) -> f64 {
    let d = p.d as f64;
    (d - 1.0) * (1.0 - (d + 1.0) * p.gamma)
}

/// Value of the test-II design with a perfect Bell measurement: `(d-1)/d [1 - (d+1) gamma]`.
pub fn closed_form_w2(p: DepolParams) -> f64 {
    let d = p.d as f64;
    (d - 1.0) / d * (1.0 - (d + 1.0) * p.gamma)
}

/// Test-I value with lossy detectors, and the apparent threshold `gamma_eps`.
pub fn closed_form_w1_eff(p: DepolParams, eff: Efficiencies) -> (f64, f64) {
    let d = p.d as f64;
    let g = p.gamma;
    let value = (eff.z - g * eff.z - g * (eff.x + eff.y) * d / 2.0) * (d - 1.0);
    (value, gamma_eps(p.d, eff))
}

/// `2 eps_z / (2 eps_z + d eps_x + d eps_y)`
pub fn gamma_eps(d: usize, eff: Efficiencies) -> f64 {
    let d = d as f64;
    2.0 * eff.z / (2.0 * eff.z + d * eff.x + d * eff.y)
}

/// Test-II value with a tilted, lossy Bell measurement, and `gamma_theta` (qubits only).
pub fn closed_form_w2_tilt(p: DepolParams, tilt: BellTilt) -> Result<(f64, f64)> {
    if p.d != 2 {
        return Err(Error::InvalidArgument(format!("tilted Bell analysis is for qubits, got d = {}", p.d)));
    }
    let s2 = (2.0 * tilt.theta).sin();
    let value = tilt.eps / 2.0 * (1.0 - (1.0 + 2.0 * s2) * p.gamma);
    Ok((value, gamma_theta(tilt.theta)))
}

/// `1 / (1 + 2 sin 2 theta)`
pub fn gamma_theta(theta: f64) -> f64 {
    1.0 / (1.0 + 2.0 * (2.0 * theta).sin())
}

/// The tilted inequality certifies something only when `gamma_theta` lands in `[1/3, 1)`,
/// i.e. `sin 2 theta > 0`. Other tilts make the inequality unusable.
pub fn tilt_is_usable(theta: f64) -> bool {
    let g = gamma_theta(theta);
    g.is_finite() && g > 0.0 && g < 1.0
}

/// Qubit test II on the four states `|+>, |->, |0>, |1>`; value `(1 - 2 gamma)/2`.
pub fn four_state_test() -> PmTestII {
    pmtest::four_state_test()
}

/// Test-II designs for qubits with fewer states than `table3(2)`: the
/// four-state test and the two-input reduction of it.
pub fn reduced_tests() -> Vec<PmTestII> {
    vec![four_state_test(), pmtest::reduced_four_state_test()]
}

/// `table2(d)` with effects scaled by the detector efficiencies:
/// `eps_z` on the computational-basis effects, `eps_x` on `+/-`, `eps_y` on `R/L`.
pub fn table2_with_efficiencies(d: usize, eff: Efficiencies) -> Result<pmtest::PmTestI> {
    let t = pmtest::table2(d)?;
    let effects = t
        .effects()
        .iter()
        .zip(t.effect_labels())
        .map(|(f, label)| {
            let scale = match label.chars().next() {
                Some('+') | Some('-') => eff.x,
                Some('R') | Some('L') => eff.y,
                _ => eff.z,
            };
            Effect::new(f.matrix().scale(scale))
        })
        .collect::<Result<Vec<_>>>()?;
    pmtest::PmTestI::with_labels(
        t.inputs().to_vec(),
        effects,
        t.weights().clone(),
        t.input_labels().to_vec(),
        t.effect_labels().to_vec(),
    )
}

/// `table3(2)` measured with `eps |phi_theta><phi_theta|` instead of `Phi_+`.
pub fn table3_with_tilt(tilt: BellTilt) -> Result<PmTestII> {
    let t = pmtest::table3(2)?;
    t.with_fixed_effect(tilt.effect())
}

/// Full simulation of the lossy-detector pipeline on `N_gamma`.
pub fn simulate_w1_eff(p: DepolParams, eff: Efficiencies) -> Result<f64> {
    let t = table2_with_efficiencies(p.d, eff)?;
    let stats = pmtest::run_test1(&depolarizing(p), &t)?;
    pmtest::witness_value(&stats, t.weights())
}

/// Full simulation of the tilted Bell-measurement pipeline on `N_gamma` (qubits).
pub fn simulate_w2_tilt(p: DepolParams, tilt: BellTilt) -> Result<f64> {
    if p.d != 2 {
        return Err(Error::InvalidArgument("tilted Bell analysis is for qubits".into()));
    }
    let t = table3_with_tilt(tilt)?;
    let stats = pmtest::run_test2(&depolarizing(p), &t)?;
    pmtest::witness_value(&stats, t.weights())
}

/// Isotropic state `gamma Phi_+ + (1-gamma) I/d^2`.
pub fn isotropic_state(p: DepolParams) -> CMatrix {
    let d = p.d;
    let phi = crate::qmat::max_entangled(d).expect("d >= 2");
    phi.matrix().scale(p.gamma) + CMatrix::identity(d * d).scale((1.0 - p.gamma) / (d * d) as f64)
}
