//! Text format for tests:
//!
//! ```text
//! pmtest I 2 2
//! state x0 ket0
//! effect b1
//! dims: 2 2
//! 0 0
//! 0 1
//! weights
//! x0 b1 1.0
//! ```
//!
//! Test II files use `state` for inputs, `assist` for the states on B', and an
//! optional single `effect` for the joint measurement (default `phi+`).

use std::collections::HashMap;

use super::{four_state_test, reduced_four_state_test, table2, table3, PmTestI, PmTestII, TestKind, Weights};
use crate::error::{Error, Result};
use crate::qmat::text::{next_content, read_matrix, write_matrix};
use crate::qmat::{basis_ket, max_entangled, named_qubit_state, CMatrix, DensityMatrix, Effect};

#[derive(Debug, Clone)]
pub enum PmTest {
    I(PmTestI),
    II(PmTestII),
}

impl PmTest {
    pub fn kind(&self) -> TestKind {
        match self {
            PmTest::I(_) => TestKind::I,
            PmTest::II(_) => TestKind::II,
        }
    }

    pub fn d_a(&self) -> usize {
        match self {
            PmTest::I(t) => t.d_a(),
            PmTest::II(t) => t.d_a(),
        }
    }

    pub fn d_b(&self) -> usize {
        match self {
            PmTest::I(t) => t.d_b(),
            PmTest::II(t) => t.d_b(),
        }
    }

    pub fn weights(&self) -> &Weights {
        match self {
            PmTest::I(t) => t.weights(),
            PmTest::II(t) => t.weights(),
        }
    }

    /// Built-in designs: `table2(d)`, `table3(d)`, `four-state` and `reduced-four-state`.
    pub fn named(name: &str) -> Option<Result<PmTest>> {
        let name = name.trim();
        if name == "four-state" {
            return Some(Ok(PmTest::II(four_state_test())));
        }
        if name == "reduced-four-state" {
            return Some(Ok(PmTest::II(reduced_four_state_test())));
        }
        let arg = |prefix: &str| -> Option<Result<usize>> {
            let inner = name.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(
                inner
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArgument(format!("bad dimension in `{name}`: {e}"))),
            )
        };
        if let Some(d) = arg("table2") {
            return Some(d.and_then(table2).map(PmTest::I));
        }
        if let Some(d) = arg("table3") {
            return Some(d.and_then(table3).map(PmTest::II));
        }
        None
    }

    pub fn parse(text: &str) -> Result<PmTest> {
        Parser::new(text).run()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let block = |out: &mut String, kw: &str, label: &str, m: &CMatrix| {
            out.push_str(&format!("{kw} {label}\n"));
            out.push_str(&write_matrix(m));
        };
        let weights = |out: &mut String, w: &Weights, rows: &[String], cols: &[String]| {
            out.push_str("weights\n");
            for (x, b, v) in w.nonzero() {
                out.push_str(&format!("{} {} {:.17e}\n", rows[x], cols[b], v));
            }
        };
        match self {
            PmTest::I(t) => {
                out.push_str(&format!("pmtest I {} {}\n", t.d_a(), t.d_b()));
                for (l, s) in t.input_labels().iter().zip(t.inputs()) {
                    block(&mut out, "state", l, s.matrix());
                }
                for (l, f) in t.effect_labels().iter().zip(t.effects()) {
                    block(&mut out, "effect", l, f.matrix());
                }
                weights(&mut out, t.weights(), t.input_labels(), t.effect_labels());
            }
            PmTest::II(t) => {
                out.push_str(&format!("pmtest II {} {} {}\n", t.d_a(), t.d_b(), t.d_bprime()));
                for (l, s) in t.input_labels().iter().zip(t.inputs()) {
                    block(&mut out, "state", l, s.matrix());
                }
                for (l, s) in t.assist_labels().iter().zip(t.assists()) {
                    block(&mut out, "assist", l, s.matrix());
                }
                block(&mut out, "effect", "F", t.fixed_effect().matrix());
                weights(&mut out, t.weights(), t.input_labels(), t.assist_labels());
            }
        }
        out
    }
}

struct Parser<'a> {
    lines: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
}

type Labeled<T> = Vec<(String, T)>;

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(text.lines().enumerate().map(|(i, l)| {
            let t = l.split('#').next().unwrap_or("").trim();
            (i + 1, t)
        }));
        Parser { lines: it }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        next_content(&mut self.lines)
    }

    /// Matrix from a shorthand on the block line, or from a following `dims:` block.
    fn payload(&mut self, ln: usize, shorthand: Option<&str>, d: usize, what: &str) -> Result<CMatrix> {
        match shorthand {
            Some(name) => shorthand_matrix(name, d).ok_or_else(|| {
                Error::parse(ln, format!("unknown {what} shorthand `{name}` for dimension {d}"))
            }),
            None => read_matrix(&mut self.lines),
        }
    }

    fn run(mut self) -> Result<PmTest> {
        let (ln, header) = self.next().ok_or_else(|| Error::parse(1, "empty test file"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::parse(ln, "expected `pmtest I|II <d_A> <d_B> [<d_B'>]`");
        if f.first() != Some(&"pmtest") || !(4..=5).contains(&f.len()) {
            return Err(bad_header());
        }
        let kind = match f[1] {
            "I" => TestKind::I,
            "II" => TestKind::II,
            _ => return Err(bad_header()),
        };
        let nums: Vec<usize> = f[2..]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(ln, format!("bad dimension: {e}")))?;
        if nums.contains(&0) {
            return Err(Error::parse(ln, "dimensions must be positive"));
        }
        let (d_a, d_b) = (nums[0], nums[1]);
        if kind == TestKind::I && nums.len() == 3 {
            return Err(Error::parse(ln, "test I takes exactly two dimensions"));
        }
        let d_bp = nums.get(2).copied().unwrap_or(d_b);

        let mut states: Labeled<DensityMatrix> = vec![];
        let mut assists: Labeled<DensityMatrix> = vec![];
        let mut effects: Labeled<Effect> = vec![];
        let mut weight_lines: Vec<(usize, String, String, f64)> = vec![];
        let mut in_weights = false;
        while let Some((ln, line)) = self.next() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if in_weights {
                let [x, b, v] = f[..] else {
                    return Err(Error::parse(ln, "weight lines are `<x> <b|y> <real>`"));
                };
                let v: f64 = v.parse().map_err(|e| Error::parse(ln, format!("bad weight `{v}`: {e}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(ln, "non-finite weight"));
                }
                weight_lines.push((ln, x.to_string(), b.to_string(), v));
                continue;
            }
            match (f[0], f.len()) {
                ("weights", 1) => in_weights = true,
                ("state", 2 | 3) => {
                    let m = self.payload(ln, f.get(2).copied(), d_a, "state")?;
                    let s = DensityMatrix::new(m).map_err(|e| Error::parse(ln, e.to_string()))?;
                    check_dim(ln, s.dim(), d_a)?;
                    states.push((f[1].to_string(), s));
                }
                ("assist", 2 | 3) if kind == TestKind::II => {
                    let m = self.payload(ln, f.get(2).copied(), d_bp, "state")?;
                    let s = DensityMatrix::new(m).map_err(|e| Error::parse(ln, e.to_string()))?;
                    check_dim(ln, s.dim(), d_bp)?;
                    assists.push((f[1].to_string(), s));
                }
                ("effect", 2 | 3) => {
                    let d = if kind == TestKind::I { d_b } else { d_b * d_bp };
                    let m = match (kind, f.get(2).copied()) {
                        (TestKind::II, Some("phi+")) if d_b == d_bp => max_entangled(d_b)?.into_matrix(),
                        (_, sh) => self.payload(ln, sh, d, "effect")?,
                    };
                    let e = Effect::new(m).map_err(|e| Error::parse(ln, e.to_string()))?;
                    check_dim(ln, e.dim(), d)?;
                    if kind == TestKind::II && !effects.is_empty() {
                        return Err(Error::parse(ln, "test II has a single fixed effect"));
                    }
                    effects.push((f[1].to_string(), e));
                }
                _ => return Err(Error::parse(ln, format!("unexpected line `{line}`"))),
            }
        }

        let cols: Vec<&str> = match kind {
            TestKind::I => effects.iter().map(|(l, _)| l.as_str()).collect(),
            TestKind::II => assists.iter().map(|(l, _)| l.as_str()).collect(),
        };
        let row_idx: HashMap<&str, usize> = states.iter().enumerate().map(|(i, (l, _))| (l.as_str(), i)).collect();
        let col_idx: HashMap<&str, usize> = cols.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let mut w = Weights::zeros(states.len(), cols.len());
        for (ln, x, b, v) in weight_lines {
            let xi = *row_idx.get(x.as_str()).ok_or_else(|| Error::parse(ln, format!("unknown input `{x}`")))?;
            let bi = *col_idx.get(b.as_str()).ok_or_else(|| Error::parse(ln, format!("unknown label `{b}`")))?;
            w.set(xi, bi, w.get(xi, bi) + v);
        }
        let (sl, sm): (Vec<String>, Vec<DensityMatrix>) = states.into_iter().unzip();
        let wrap = |e: Error| match e {
            Error::Parse { .. } => e,
            other => Error::parse(0, other.to_string()),
        };
        match kind {
            TestKind::I => {
                let (el, em): (Vec<String>, Vec<Effect>) = effects.into_iter().unzip();
                PmTestI::with_labels(sm, em, w, sl, el).map(PmTest::I).map_err(wrap)
            }
            TestKind::II => {
                let (al, am): (Vec<String>, Vec<DensityMatrix>) = assists.into_iter().unzip();
                let f = match effects.pop() {
                    Some((_, f)) => f,
                    None if d_b == d_bp => Effect::from(max_entangled(d_b)?),
                    None => return Err(Error::parse(0, "test II with d_B' != d_B needs an explicit effect")),
                };
                PmTestII::with_labels(sm, am, f, w, sl, al).map(PmTest::II).map_err(wrap)
            }
        }
    }
}

fn check_dim(ln: usize, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("line {ln}: operator has dimension {got}, expected {want}")));
    }
    Ok(())
}

/// `ket<k>` in any dimension, the qubit names `ket0 ket1 plus minus R L`, and `identity`.
fn shorthand_matrix(name: &str, d: usize) -> Option<CMatrix> {
    if name == "identity" {
        return Some(CMatrix::identity(d));
    }
    if d == 2 {
        if let Some(s) = named_qubit_state(name) {
            return Some(s.into_matrix());
        }
    }
    let k: usize = name.strip_prefix("ket")?.parse().ok()?;
    (k < d).then(|| CMatrix::outer(&basis_ket(d, k)))
}
