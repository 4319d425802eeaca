//! Prepare-and-measure tests of type I (states in, effects out) and type II
//! (states in, assisting states and one fixed joint effect out).

mod compile;
mod format;
mod tables;

#[cfg(test)]
mod tests;

use std::fmt;

use crate::channel::{Channel, ChoiState};
use crate::error::{Error, Result};
use crate::qmat::{max_entangled, CMatrix, DensityMatrix, Effect, Subsystem, ZERO};

pub use compile::{compile_witness_to_test1, compile_witness_to_test2, CompileMode};
pub use format::PmTest;
pub use tables::{four_state_test, reduced_four_state_test, table2, table3};

/// Dense real coefficient table `w[x][b]` (or `w[x][y]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Weights {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Weights { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dims("ragged weight rows"));
        }
        if rows.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Weights { rows: r, cols: c, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, b: usize) -> f64 {
        self.data[x * self.cols + b]
    }

    pub fn set(&mut self, x: usize, b: usize, w: f64) {
        self.data[x * self.cols + b] = w;
    }

    /// Non-zero entries as `(x, b, w)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i / self.cols, i % self.cols, w))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|w| *w == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    I,
    II,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::I => "I",
            TestKind::II => "II",
        })
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn check_labels(labels: &[String], n: usize, what: &str) -> Result<()> {
    if labels.len() != n {
        return Err(Error::dims(format!("{} {what} labels for {n} entries", labels.len())));
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || l.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("{what} label `{l}` must be a non-empty word")));
        }
        if labels[..i].contains(l) {
            return Err(Error::InvalidArgument(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

/// Test I: prepare `xi_x` on A, send through the channel, measure `F_b` on B.
#[derive(Debug, Clone)]
pub struct PmTestI {
    d_a: usize,
    d_b: usize,
    inputs: Vec<DensityMatrix>,
    effects: Vec<Effect>,
    weights: Weights,
    input_labels: Vec<String>,
    effect_labels: Vec<String>,
}

impl PmTestI {
    pub fn new(inputs: Vec<DensityMatrix>, effects: Vec<Effect>, weights: Weights) -> Result<Self> {
        let (li, le) = (default_labels(inputs.len()), default_labels(effects.len()));
        Self::with_labels(inputs, effects, weights, li, le)
    }

    pub fn with_labels(
        inputs: Vec<DensityMatrix>,
        effects: Vec<Effect>,
        weights: Weights,
        input_labels: Vec<String>,
        effect_labels: Vec<String>,
    ) -> Result<Self> {
        let d_a = inputs.first().ok_or_else(|| Error::InvalidArgument("test I needs inputs".into()))?.dim();
        let d_b = effects.first().ok_or_else(|| Error::InvalidArgument("test I needs effects".into()))?.dim();
        Self::build(d_a, d_b, inputs, effects, weights, input_labels, effect_labels)
    }

    /// Test with no settings; its witness operator is zero.
    pub fn empty(d_a: usize, d_b: usize) -> Self {
        PmTestI {
            d_a,
            d_b,
            inputs: vec![],
            effects: vec![],
            weights: Weights::zeros(0, 0),
            input_labels: vec![],
            effect_labels: vec![],
        }
    }

    fn build(
        d_a: usize,
        d_b: usize,
        inputs: Vec<DensityMatrix>,
        effects: Vec<Effect>,
        weights: Weights,
        input_labels: Vec<String>,
        effect_labels: Vec<String>,
    ) -> Result<Self> {
        if inputs.iter().any(|s| s.dim() != d_a) {
            return Err(Error::dims("inputs of differing dimension"));
        }
        if effects.iter().any(|f| f.dim() != d_b) {
            return Err(Error::dims("effects of differing dimension"));
        }
        if weights.rows() != inputs.len() || weights.cols() != effects.len() {
            return Err(Error::dims(format!(
                "weights are {}x{}, test has {} inputs and {} effects",
                weights.rows(),
                weights.cols(),
                inputs.len(),
                effects.len()
            )));
        }
        check_labels(&input_labels, inputs.len(), "input")?;
        check_labels(&effect_labels, effects.len(), "effect")?;
        Ok(PmTestI { d_a, d_b, inputs, effects, weights, input_labels, effect_labels })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn effect_labels(&self) -> &[String] {
        &self.effect_labels
    }
}

/// Test II: prepare `xi_x` on A and `psi_y` on B', measure the fixed effect `F` on B B'.
#[derive(Debug, Clone)]
pub struct PmTestII {
    d_a: usize,
    d_b: usize,
    d_bp: usize,
    inputs: Vec<DensityMatrix>,
    assists: Vec<DensityMatrix>,
    fixed_effect: Effect,
    weights: Weights,
    input_labels: Vec<String>,
    assist_labels: Vec<String>,
}

impl PmTestII {
    /// Test with the Bell effect `Phi_+` on `d_B x d_B`.
    pub fn new(inputs: Vec<DensityMatrix>, assists: Vec<DensityMatrix>, weights: Weights) -> Result<Self> {
        let d_b = assists.first().ok_or_else(|| Error::InvalidArgument("test II needs assisting states".into()))?.dim();
        let phi = Effect::from(max_entangled(d_b)?);
        let (li, la) = (default_labels(inputs.len()), default_labels(assists.len()));
        Self::with_labels(inputs, assists, phi, weights, li, la)
    }

    pub fn with_labels(
        inputs: Vec<DensityMatrix>,
        assists: Vec<DensityMatrix>,
        fixed_effect: Effect,
        weights: Weights,
        input_labels: Vec<String>,
        assist_labels: Vec<String>,
    ) -> Result<Self> {
        let d_a = inputs.first().ok_or_else(|| Error::InvalidArgument("test II needs inputs".into()))?.dim();
        let d_bp = assists.first().ok_or_else(|| Error::InvalidArgument("test II needs assisting states".into()))?.dim();
        if !fixed_effect.dim().is_multiple_of(d_bp) {
            return Err(Error::dims(format!(
                "fixed effect of dimension {} is not on B x B' with d_B' = {d_bp}",
                fixed_effect.dim()
            )));
        }
        let d_b = fixed_effect.dim() / d_bp;
        Self::build(d_a, d_b, d_bp, inputs, assists, fixed_effect, weights, input_labels, assist_labels)
    }

    pub fn empty(d_a: usize, d_b: usize, d_bp: usize, fixed_effect: Effect) -> Result<Self> {
        Self::build(d_a, d_b, d_bp, vec![], vec![], fixed_effect, Weights::zeros(0, 0), vec![], vec![])
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        d_a: usize,
        d_b: usize,
        d_bp: usize,
        inputs: Vec<DensityMatrix>,
        assists: Vec<DensityMatrix>,
        fixed_effect: Effect,
        weights: Weights,
        input_labels: Vec<String>,
        assist_labels: Vec<String>,
    ) -> Result<Self> {
        if inputs.iter().any(|s| s.dim() != d_a) {
            return Err(Error::dims("inputs of differing dimension"));
        }
        if assists.iter().any(|s| s.dim() != d_bp) {
            return Err(Error::dims("assisting states of differing dimension"));
        }
        if fixed_effect.dim() != d_b * d_bp {
            return Err(Error::dims(format!("fixed effect must act on {d_b}x{d_bp}")));
        }
        if d_b != d_bp && is_bell_effect(&fixed_effect) {
            return Err(Error::dims(format!("Phi_+ measurement needs d_B' = d_B, got {d_bp} != {d_b}")));
        }
        if weights.rows() != inputs.len() || weights.cols() != assists.len() {
            return Err(Error::dims(format!(
                "weights are {}x{}, test has {} inputs and {} assisting states",
                weights.rows(),
                weights.cols(),
                inputs.len(),
                assists.len()
            )));
        }
        check_labels(&input_labels, inputs.len(), "input")?;
        check_labels(&assist_labels, assists.len(), "assist")?;
        Ok(PmTestII { d_a, d_b, d_bp, inputs, assists, fixed_effect, weights, input_labels, assist_labels })
    }

    /// Same preparations and weights, measured with a different joint effect.
    pub fn with_fixed_effect(self, fixed_effect: Effect) -> Result<Self> {
        Self::build(
            self.d_a,
            self.d_b,
            self.d_bp,
            self.inputs,
            self.assists,
            fixed_effect,
            self.weights,
            self.input_labels,
            self.assist_labels,
        )
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn d_bprime(&self) -> usize {
        self.d_bp
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn assists(&self) -> &[DensityMatrix] {
        &self.assists
    }

    pub fn fixed_effect(&self) -> &Effect {
        &self.fixed_effect
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn assist_labels(&self) -> &[String] {
        &self.assist_labels
    }

    /// True when the fixed effect is the Bell projector `Phi_+`.
    pub fn has_bell_effect(&self) -> bool {
        self.d_b == self.d_bp && is_bell_effect(&self.fixed_effect)
    }
}

fn is_bell_effect(f: &Effect) -> bool {
    let n = f.dim();
    let k = (n as f64).sqrt().round() as usize;
    if k < 2 || k * k != n {
        return false;
    }
    max_entangled(k).is_ok_and(|phi| phi.matrix().max_abs_diff(f.matrix()) < 1e-12)
}

/// Probability table indexed like the owning test: `P(b|x)` or `P(x, y)`, rows are `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistics {
    kind: TestKind,
    table: Vec<Vec<f64>>,
}

impl Statistics {
    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn get(&self, x: usize, b: usize) -> f64 {
        self.table[x][b]
    }

    pub fn rows(&self) -> usize {
        self.table.len()
    }

    pub fn cols(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }
}

/// `P(b|x) = tr[N(xi_x) F_b]`
pub fn run_test1(ch: &Channel, t: &PmTestI) -> Result<Statistics> {
    if ch.d_in() != t.d_a || ch.d_out() != t.d_b {
        return Err(Error::dims(format!(
            "channel is {}->{}, test I expects {}->{}",
            ch.d_in(),
            ch.d_out(),
            t.d_a,
            t.d_b
        )));
    }
    let table = t
        .inputs
        .iter()
        .map(|xi| {
            let out = ch.apply_operator(xi.matrix())?;
            Ok(t.effects.iter().map(|f| out.expect(f.matrix())).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Statistics { kind: TestKind::I, table })
}

/// `P(x, y) = tr[(N(xi_x) (x) psi_y) F]`
pub fn run_test2(ch: &Channel, t: &PmTestII) -> Result<Statistics> {
    if ch.d_in() != t.d_a || ch.d_out() != t.d_b {
        return Err(Error::dims(format!(
            "channel is {}->{}, test II expects {}->{}",
            ch.d_in(),
            ch.d_out(),
            t.d_a,
            t.d_b
        )));
    }
    let f = t.fixed_effect.matrix();
    let table = t
        .inputs
        .iter()
        .map(|xi| {
            let out = ch.apply_operator(xi.matrix())?;
            Ok(t.assists.iter().map(|psi| out.kron(psi.matrix()).expect(f)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Statistics { kind: TestKind::II, table })
}

/// `sum_{x,b} w_xb P(b|x)`
pub fn witness_value(stats: &Statistics, weights: &Weights) -> Result<f64> {
    if stats.rows() != weights.rows() || (stats.rows() > 0 && stats.cols() != weights.cols()) {
        return Err(Error::dims(format!(
            "statistics are {}x{}, weights are {}x{}",
            stats.rows(),
            stats.cols(),
            weights.rows(),
            weights.cols()
        )));
    }
    Ok(weights.nonzero().map(|(x, b, w)| w * stats.get(x, b)).sum())
}

/// `W_I = sum w_xb xi_x^T (x) F_b`
#[allow(non_snake_case)]
pub fn witness_operator_I(t: &PmTestI) -> CMatrix {
    let mut w = CMatrix::zeros(t.d_a * t.d_b, t.d_a * t.d_b);
    for (x, b, c) in t.weights.nonzero() {
        w.add_scaled(c, &t.inputs[x].matrix().transpose().kron(t.effects[b].matrix()));
    }
    w
}

/// `W_II = sum w_xy xi_x^T (x) psi_y^T`
#[allow(non_snake_case)]
pub fn witness_operator_II(t: &PmTestII) -> CMatrix {
    let mut w = CMatrix::zeros(t.d_a * t.d_bp, t.d_a * t.d_bp);
    for (x, y, c) in t.weights.nonzero() {
        w.add_scaled(c, &t.inputs[x].matrix().transpose().kron(&t.assists[y].matrix().transpose()));
    }
    w
}

/// `sigma~(F) = (1/d_B) tr_B[(I (x) F)(sigma_N (x) I)]^{T_B'}` on A' B'.
///
/// Satisfies `P(x, y) = d_A d_B tr[(xi_x^T (x) psi_y^T) sigma~]`. It is positive
/// semidefinite with trace at most `d_B' / d_B`.
pub fn effective_state(ch: &Channel, f: &Effect, d_bp: usize) -> Result<CMatrix> {
    let (d_a, d_b) = (ch.d_in(), ch.d_out());
    if f.dim() != d_b * d_bp {
        return Err(Error::dims(format!("effect of dimension {} is not on {d_b}x{d_bp}", f.dim())));
    }
    Ok(effective_state_of(ch.choi_state().matrix(), f.matrix(), d_a, d_b, d_bp))
}

pub(crate) fn effective_state_of(sigma: &CMatrix, f: &CMatrix, d_a: usize, d_b: usize, d_bp: usize) -> CMatrix {
    // X[(a,c),(a2,c2)] = sum_{b,b1} F[(b,c),(b1,c2)] sigma[(a,b1),(a2,b)], then transpose on c.
    let n = d_a * d_bp;
    let scale = 1.0 / d_b as f64;
    CMatrix::from_fn(n, n, |r, s| {
        let (a, c2) = (r / d_bp, r % d_bp);
        let (a2, c) = (s / d_bp, s % d_bp);
        let mut acc = ZERO;
        for b in 0..d_b {
            for b1 in 0..d_b {
                acc += f[(b * d_bp + c, b1 * d_bp + c2)] * sigma[(a * d_b + b1, a2 * d_b + b)];
            }
        }
        acc * scale
    })
}

/// NPT witness `(|eta><eta|)^{T_B}` from the most negative eigenvector of `sigma^{T_B}`.
pub fn witness_from_npt_choi(sigma: &ChoiState) -> Result<CMatrix> {
    let (d_a, d_b) = (sigma.d_a(), sigma.d_b());
    let pt = sigma.matrix().partial_transpose(Subsystem::B, d_a, d_b)?;
    let eig = pt.eigh()?;
    if eig.values[0] >= -1e-9 {
        return Err(Error::PptInput);
    }
    CMatrix::outer(&eig.vector(0)).partial_transpose(Subsystem::B, d_a, d_b)
}
