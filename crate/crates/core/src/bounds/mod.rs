//! Entanglement-breaking bounds `C_EB`: the smallest witness value any
//! measure-and-prepare channel can produce, under three trust levels.
//!
//! * DD: preparations and measurements are trusted.
//! * MDI: preparations are trusted, the measurement is not.
//! * SDI: only the Hilbert-space dimensions are trusted.
//!
//! All bounds are computed by [`seesaw`] block minimization with seeded random
//! restarts; SDI adds a Nelder-Mead search over the preparations.

mod distance;
mod oracle;
mod sdi;
mod seesaw;


use std::fmt;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::EbChannelParams;
use crate::error::{Error, Result};
use crate::pmtest::{witness_value, PmTest, PmTestI, PmTestII, Statistics, TestKind};
use crate::qmat::random::SeedRng;
use crate::qmat::{CMatrix, DensityMatrix, Effect, Povm};

pub use distance::{eb_distance, pauli_statistics, sdi_threshold, DistanceResult, ThresholdResult};
pub use oracle::{oracle_grid_min, MarginalConstraint};

use seesaw::{Marginal, Point, Problem, RBlock};

/// Gap by which a witness value must undercut the bound to count as a violation.
pub const MARGIN_GUARD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    DdI,
    DdII,
    MdiI,
    MdiII,
    SdiI,
    SdiII,
}

impl Scenario {
    pub fn kind(self) -> TestKind {
        match self {
            Scenario::DdI | Scenario::MdiI | Scenario::SdiI => TestKind::I,
            _ => TestKind::II,
        }
    }

    /// `dd`, `mdi` or `sdi` combined with the kind of test.
    pub fn from_name(name: &str, kind: TestKind) -> Result<Scenario> {
        Ok(match (name.to_ascii_lowercase().as_str(), kind) {
            ("dd", TestKind::I) => Scenario::DdI,
            ("dd", TestKind::II) => Scenario::DdII,
            ("mdi", TestKind::I) => Scenario::MdiI,
            ("mdi", TestKind::II) => Scenario::MdiII,
            ("sdi", TestKind::I) => Scenario::SdiI,
            ("sdi", TestKind::II) => Scenario::SdiII,
            _ => return Err(Error::InvalidArgument(format!("unknown scenario `{name}` (dd, mdi, sdi)"))),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::DdI => "DD_I",
            Scenario::DdII => "DD_II",
            Scenario::MdiI => "MDI_I",
            Scenario::MdiII => "MDI_II",
            Scenario::SdiI => "SDI_I",
            Scenario::SdiII => "SDI_II",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of POVM outcomes; `d_A^2` when unset.
    pub n_outcomes: Option<usize>,
    pub restarts: usize,
    pub max_seesaw_iters: usize,
    pub conv_tol: f64,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { n_outcomes: None, restarts: 50, max_seesaw_iters: 500, conv_tol: 1e-8, rng_seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: OptimizerConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.n_outcomes == Some(0) {
            return Err(Error::InvalidArgument("n_outcomes must be at least 1".into()));
        }
        if !(self.conv_tol.is_finite() && self.conv_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("conv_tol = {} must be a nonnegative number", self.conv_tol)));
        }
        Ok(())
    }

    pub fn outcomes(&self, d_a: usize) -> usize {
        self.n_outcomes.unwrap_or(d_a * d_a)
    }
}

/// Independent, reproducible random stream for restart `index`.
pub(crate) fn restart_rng(seed: u64, index: u64) -> SeedRng {
    let mut rng = SeedRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct EbBoundResult {
    pub scenario: Scenario,
    /// The bound `C_EB`.
    pub value: f64,
    /// Minimizing measure-and-prepare parameters; `t_k` are set for MDI/SDI test II.
    pub argmin: EbChannelParams,
    /// Optimized preparations (SDI only).
    pub inputs: Option<Vec<DensityMatrix>>,
    /// Optimized effects `F_b` (MDI and SDI test I).
    pub effects: Option<Vec<Effect>>,
    /// Optimized assisting states `psi_y` (SDI test II).
    pub assists: Option<Vec<DensityMatrix>>,
    /// See-saw sweeps used by the best restart.
    pub iterations: usize,
    pub restarts_used: usize,
    /// The best value recurred (within 1e-6) in at least three restarts.
    pub converged: bool,
}

impl EbBoundResult {
    /// Recomputes the bound from the stored minimizer and the test's weights.
    pub fn reevaluate(&self, t: &PmTest) -> Result<f64> {
        let spec = Spec::new(t, self.scenario, None)?;
        let k = self.argmin.povm().len();
        let xi = match &self.inputs {
            Some(v) => v.iter().map(|s| s.matrix().clone()).collect(),
            None => spec.xi0.clone(),
        };
        let r = match (&self.effects, &self.assists) {
            (Some(f), _) => f.iter().map(|e| e.matrix().clone()).collect(),
            (_, Some(a)) => a.iter().map(|s| s.matrix().transpose()).collect(),
            _ => spec.r0.clone(),
        };
        let cfg = OptimizerConfig { n_outcomes: Some(k), ..OptimizerConfig::default() };
        let problem = spec.problem(&cfg);
        let point = Point {
            xi,
            r,
            povm: self.argmin.povm().effects().iter().map(|e| e.matrix().clone()).collect(),
            taus: self.argmin.states().iter().map(|s| s.matrix().clone()).collect(),
            t: (0..k).map(|i| self.argmin.weight(i)).collect(),
            value: f64::NAN,
            iterations: 0,
        };
        Ok(spec.prefactor * problem.value(&point))
    }
}

/// What is fixed and what is optimized for one scenario.
pub(crate) struct Spec {
    scenario: Scenario,
    w: Vec<Vec<f64>>,
    d_a: usize,
    d_b: usize,
    xi0: Vec<CMatrix>,
    r0: Vec<CMatrix>,
    marginal: Marginal,
    xi_free: bool,
    r_block: RBlock,
    prefactor: f64,
}

fn weight_rows(w: &crate::pmtest::Weights) -> Vec<Vec<f64>> {
    (0..w.rows()).map(|x| (0..w.cols()).map(|b| w.get(x, b)).collect()).collect()
}

fn mismatch(scenario: Scenario, kind: TestKind) -> Error {
    Error::ScenarioMismatch { scenario: scenario.to_string(), kind: kind.to_string() }
}

impl Spec {
    /// `caps` overrides `(d_A, d_B)` in the SDI scenarios.
    pub(crate) fn new(t: &PmTest, scenario: Scenario, caps: Option<(usize, usize)>) -> Result<Spec> {
        if t.kind() != scenario.kind() {
            return Err(mismatch(scenario, t.kind()));
        }
        match t {
            PmTest::I(t) => Ok(Self::test1(t, scenario, caps)),
            PmTest::II(t) => Self::test2(t, scenario, caps),
        }
    }

    fn test1(t: &PmTestI, scenario: Scenario, caps: Option<(usize, usize)>) -> Spec {
        let (d_a, d_b) = match scenario {
            Scenario::SdiI => caps.unwrap_or((t.d_a(), t.d_b())),
            _ => (t.d_a(), t.d_b()),
        };
        Spec {
            scenario,
            w: weight_rows(t.weights()),
            d_a,
            d_b,
            xi0: t.inputs().iter().map(|s| s.matrix().clone()).collect(),
            r0: t.effects().iter().map(|e| e.matrix().clone()).collect(),
            marginal: Marginal::Eq,
            xi_free: scenario == Scenario::SdiI,
            r_block: match scenario {
                Scenario::DdI => RBlock::Fixed,
                _ => RBlock::FreeEffects,
            },
            prefactor: 1.0,
        }
    }

    fn test2(t: &PmTestII, scenario: Scenario, caps: Option<(usize, usize)>) -> Result<Spec> {
        let xi0 = t.inputs().iter().map(|s| s.matrix().clone()).collect();
        let r0 = t.assists().iter().map(|s| s.matrix().transpose()).collect();
        let w = weight_rows(t.weights());
        let (d_a, d_b, d_bp) = (t.d_a(), t.d_b(), t.d_bprime());
        Ok(match scenario {
            Scenario::DdII => {
                if !t.has_bell_effect() {
                    return Err(Error::InvalidArgument(
                        "the DD test-II bound assumes the Bell measurement Phi_+".into(),
                    ));
                }
                Spec {
                    scenario,
                    w,
                    d_a,
                    d_b: d_bp,
                    xi0,
                    r0,
                    marginal: Marginal::Eq,
                    xi_free: false,
                    r_block: RBlock::Fixed,
                    prefactor: 1.0 / d_b as f64,
                }
            }
            Scenario::MdiII => Spec {
                scenario,
                w,
                d_a,
                d_b: d_bp,
                xi0,
                r0,
                marginal: Marginal::Le,
                xi_free: false,
                r_block: RBlock::Fixed,
                // t_k may reach d_B'/d_B when the assisting system is larger
                prefactor: d_b.max(d_bp) as f64,
            },
            _ => {
                let (ca, cb) = caps.unwrap_or((d_a, d_b));
                Spec {
                    scenario,
                    w,
                    d_a: ca,
                    d_b: cb,
                    xi0,
                    r0,
                    marginal: Marginal::Le,
                    xi_free: true,
                    r_block: RBlock::FreePure,
                    prefactor: cb as f64,
                }
            }
        })
    }

    pub(crate) fn problem(&self, cfg: &OptimizerConfig) -> Problem<'_> {
        Problem {
            w: &self.w,
            d_a: self.d_a,
            d_b: self.d_b,
            k: cfg.outcomes(self.d_a),
            marginal: self.marginal,
            xi_free: self.xi_free,
            r_block: self.r_block,
            max_iters: cfg.max_seesaw_iters,
            conv_tol: cfg.conv_tol,
        }
    }

    fn result(&self, best: Point, restarts_used: usize, converged: bool) -> EbBoundResult {
        let povm = Povm::from_trusted(best.povm.into_iter().map(Effect::from_trusted).collect());
        let states = best.taus.into_iter().map(|m| DensityMatrix::from_trusted(m.hermitian_part())).collect();
        let subnorm = (self.marginal == Marginal::Le).then_some(best.t);
        let argmin = EbChannelParams::with_subnorm(povm, states, subnorm).expect("optimizer keeps parameters valid");
        let free_r = self.r_block != RBlock::Fixed;
        EbBoundResult {
            scenario: self.scenario,
            value: self.prefactor * best.value,
            argmin,
            inputs: self
                .xi_free
                .then(|| best.xi.into_iter().map(|m| DensityMatrix::from_trusted(m.hermitian_part())).collect()),
            effects: (free_r && self.r_block == RBlock::FreeEffects)
                .then(|| best.r.iter().map(|m| Effect::from_trusted(m.hermitian_part())).collect()),
            assists: (free_r && self.r_block == RBlock::FreePure)
                .then(|| best.r.iter().map(|m| DensityMatrix::from_trusted(m.transpose().hermitian_part())).collect()),
            iterations: best.iterations,
            restarts_used,
            converged,
        }
    }
}

/// Best of independent restarts; ties go to the lower restart index.
pub(crate) fn merge(points: Vec<Point>) -> (Point, bool) {
    let mut best_idx = 0;
    for (i, p) in points.iter().enumerate() {
        if p.value < points[best_idx].value {
            best_idx = i;
        }
    }
    let best_value = points[best_idx].value;
    let hits = points.iter().filter(|p| (p.value - best_value).abs() <= 1e-6).count();
    let best = points.into_iter().nth(best_idx).expect("at least one restart");
    (best, hits >= 3)
}

fn seesaw_bound(spec: &Spec, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    cfg.validate()?;
    let problem = spec.problem(cfg);
    let points: Vec<Point> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(cfg.rng_seed, i as u64);
            problem.descend(problem.random_point(&mut rng, &spec.xi0, &spec.r0))
        })
        .collect();
    let (best, converged) = merge(points);
    Ok(spec.result(best, cfg.restarts, converged))
}

/// `C^{I,DD} = d_A min tr[W_I sigma]` over Choi operators of measure-and-prepare channels.
pub fn bound_dd_test1(t: &PmTestI, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    seesaw_bound(&Spec::test1(t, Scenario::DdI, None), cfg)
}

/// `C^{II,DD} = (d_A/d_B) min tr[W_II sigma]`; the test must use the Bell measurement.
pub fn bound_dd_test2(t: &PmTestII, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    seesaw_bound(&Spec::test2(t, Scenario::DdII, None)?, cfg)
}

/// Test-I bound with the effects `F_b` untrusted: each is optimized as an
/// independent effect `0 <= F_b <= I`.
pub fn bound_mdi_test1(t: &PmTestI, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    seesaw_bound(&Spec::test1(t, Scenario::MdiI, None), cfg)
}

/// `C^{II,MDI} = d_A d_B min tr[W_II sigma~]` with `tr_B sigma~ <= I/d_A`.
pub fn bound_mdi_test2(t: &PmTestII, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    seesaw_bound(&Spec::test2(t, Scenario::MdiII, None)?, cfg)
}

/// Dimension-only bound: preparations, measurements and the channel are all
/// optimized within `d_A` and `d_B`. Only the weights of `t` are used.
pub fn bound_sdi(t: &PmTest, d_a: usize, d_b: usize, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    if d_a == 0 || d_b == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let scenario = match t.kind() {
        TestKind::I => Scenario::SdiI,
        TestKind::II => Scenario::SdiII,
    };
    let spec = Spec::new(t, scenario, Some((d_a, d_b)))?;
    sdi::search(&spec, cfg)
}

/// Bound for any scenario; SDI uses the test's own dimensions as caps.
pub fn bound(t: &PmTest, scenario: Scenario, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    match (t, scenario) {
        (PmTest::I(t), Scenario::DdI) => bound_dd_test1(t, cfg),
        (PmTest::I(t), Scenario::MdiI) => bound_mdi_test1(t, cfg),
        (PmTest::II(t), Scenario::DdII) => bound_dd_test2(t, cfg),
        (PmTest::II(t), Scenario::MdiII) => bound_mdi_test2(t, cfg),
        (_, Scenario::SdiI | Scenario::SdiII) if t.kind() == scenario.kind() => {
            bound_sdi(t, t.d_a(), t.d_b(), cfg)
        }
        _ => Err(mismatch(scenario, t.kind())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    NotCertified,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "Certified",
            Verdict::NotCertified => "NotCertified",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub verdict: Verdict,
    pub witness: f64,
    pub bound: EbBoundResult,
    /// `C_EB - W`; positive when the inequality is violated.
    pub margin: f64,
}

/// Certified iff `W < C_EB - MARGIN_GUARD`.
pub fn certify(stats: &Statistics, t: &PmTest, scenario: Scenario, cfg: &OptimizerConfig) -> Result<Certification> {
    if stats.kind() != t.kind() || scenario.kind() != t.kind() {
        return Err(mismatch(scenario, t.kind()));
    }
    let witness = witness_value(stats, t.weights())?;
    let bound = bound(t, scenario, cfg)?;
    Ok(verdict_for(witness, bound))
}

pub fn verdict_for(witness: f64, bound: EbBoundResult) -> Certification {
    let margin = bound.value - witness;
    let verdict = if witness < bound.value - MARGIN_GUARD { Verdict::Certified } else { Verdict::NotCertified };
    Certification { verdict, witness, bound, margin }
}

/// `min tr[W sigma]` over Choi operators `sum_k E_k^T/d_A (x) t_k tau_k` of
/// measure-and-prepare maps, by see-saw on a compiled decomposition of `W`.
pub fn seesaw_min(w: &CMatrix, constraint: MarginalConstraint, d_a: usize, d_b: usize, cfg: &OptimizerConfig) -> Result<f64> {
    let t = crate::pmtest::compile_witness_to_test1(w, d_a, d_b, crate::pmtest::CompileMode::GellMann)?;
    let mut spec = Spec::test1(&t, Scenario::DdI, None);
    spec.d_a = d_a;
    spec.d_b = d_b;
    spec.marginal = match constraint {
        MarginalConstraint::Eq => Marginal::Eq,
        MarginalConstraint::Le => Marginal::Le,
    };
    if spec.w.is_empty() {
        return Ok(0.0);
    }
    Ok(seesaw_bound(&spec, cfg)?.value / d_a as f64)
}
