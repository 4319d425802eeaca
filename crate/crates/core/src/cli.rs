//! The `nebwit` command-line driver.
//!
//! Exit codes: 0 success (or certified), 3 not certified, 4 dimension
//! mismatch, 5 parse or usage error, 6 any other failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, certify, sdi_threshold, verdict_for, EbBoundResult, OptimizerConfig, Scenario, Verdict};
use crate::channel::{is_eb_by_ppt, Channel, EbVerdict};
use crate::depol::{self, BellTilt, DepolParams};
use crate::error::{Error, Result};
use crate::pmtest::{self, run_test1, run_test2, PmTest, Statistics, TestKind};
use crate::qmat::text::write_matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 3;
pub const EXIT_DIMS: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
pub const EXIT_OTHER: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "nebwit", version, about = "Certify non-entanglement-breaking channels from prepare-and-measure statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct OptFlags {
    /// Seed for the optimizer restarts
    #[arg(long, env = "NEBWIT_SEED")]
    seed: Option<u64>,
    /// Number of random restarts
    #[arg(long)]
    restarts: Option<usize>,
    /// Number of POVM outcomes of the measure-and-prepare model
    #[arg(long)]
    outcomes: Option<usize>,
    /// See-saw convergence tolerance; for `reproduce table1` the bisection width
    #[arg(long)]
    tol: Option<f64>,
    /// TOML file with optimizer settings (n_outcomes, restarts, max_seesaw_iters, conv_tol, rng_seed)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Dd,
    Mdi,
    Sdi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    /// d,gamma,w1_closed,w1_sim,w2_closed,w2_sim,bound_I,bound_II,certified_I,certified_II
    DepolDd,
    /// eps,theta,gamma_theta,usable,gamma,w_closed,w_sim,bound,certified
    DepolMdi,
    /// test,d_a,d_b,gamma_min,steps
    Table1,
    /// d,neb_threshold,ppt_threshold,closed_form_root
    Thresholds,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the Choi matrix of a channel and its PPT verdict
    Choi {
        /// Channel file, or `depolarizing gamma=<g> d=<d>` / `identity d=<d>`
        #[arg(required = true, num_args = 1..)]
        channel: Vec<String>,
    },
    /// Simulate a test on a channel and compare the witness value with the EB bound
    Certify {
        /// Channel file or shorthand (quote shorthands with spaces)
        channel: String,
        /// Test file, or `table2(d)`, `table3(d)`, `four-state`, `reduced-four-state`
        test: String,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Dimension caps for the SDI scenario
        #[arg(long, num_args = 2, value_names = ["D_A", "D_B"])]
        dims: Option<Vec<usize>>,
        #[command(flatten)]
        opt: OptFlags,
    },
    /// Compute the EB bound of a test and dump the minimizer
    Bound {
        /// Test file or named design
        test: String,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Dimension caps for the SDI scenario
        #[arg(long, num_args = 2, value_names = ["D_A", "D_B"])]
        dims: Option<Vec<usize>>,
        #[command(flatten)]
        opt: OptFlags,
    },
    /// Regenerate the depolarizing-channel results as CSV
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        /// Bell-state tilt for depol-mdi, in radians
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        theta: f64,
        /// Detection efficiency for depol-mdi
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// table1 cells such as `2x2,2x3` (default: all cells with d_A, d_B <= 3)
        #[arg(long, value_delimiter = ',')]
        cells: Vec<String>,
        /// Also run table1 cells with a dimension of 4 or 5 (slow)
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        opt: OptFlags,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch(_) => EXIT_DIMS,
        Error::Parse { .. } => EXIT_PARSE,
        _ => EXIT_OTHER,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let echo = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let mut buf = String::new();
    let result = match cli.command {
        Command::Choi { channel } => cmd_choi(&channel.join(" "), &mut buf),
        Command::Certify { channel, test, scenario, dims, opt } => {
            cmd_certify(&echo, &channel, &test, scenario, dims, &opt, &mut buf)
        }
        Command::Bound { test, scenario, dims, opt } => cmd_bound(&echo, &test, scenario, dims, &opt, &mut buf),
        Command::Reproduce { target, theta, eps, cells, full, opt } => {
            cmd_reproduce(target, theta, eps, &cells, full, &opt, &mut buf, err)
        }
    };
    // stdout is written only once the command has finished
    match result {
        Ok(code) => {
            let _ = out.write_all(buf.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn optimizer_config(opt: &OptFlags) -> Result<OptimizerConfig> {
    let mut cfg = match &opt.config {
        Some(path) => OptimizerConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => OptimizerConfig::default(),
    };
    if let Some(s) = opt.seed {
        cfg.rng_seed = s;
    }
    if let Some(r) = opt.restarts {
        cfg.restarts = r;
    }
    if let Some(k) = opt.outcomes {
        cfg.n_outcomes = Some(k);
    }
    if let Some(t) = opt.tol {
        cfg.conv_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn key_values(spec: &[&str]) -> Result<Vec<(String, String)>> {
    spec.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(1, format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| Error::parse(1, format!("bad value for {key}: {e}")))
}

/// A channel file, or `depolarizing gamma=<g> [d=<d>]`, or `identity [d=<d>]`.
pub fn load_channel(spec: &str) -> Result<Channel> {
    let words: Vec<&str> = spec.split(|c: char| c.is_whitespace() || c == ',' || c == ':').filter(|w| !w.is_empty()).collect();
    match words.first().copied() {
        Some(name @ ("depolarizing" | "identity")) => {
            let (mut gamma, mut d) = (None, 2usize);
            for (k, v) in key_values(&words[1..])? {
                match k.as_str() {
                    "gamma" if name == "depolarizing" => gamma = Some(number::<f64>(&k, &v)?),
                    "d" => d = number(&k, &v)?,
                    _ => return Err(Error::parse(1, format!("unknown parameter `{k}` for {name}"))),
                }
            }
            if name == "identity" {
                return Ok(Channel::identity(d));
            }
            let gamma = gamma.ok_or_else(|| Error::parse(1, "depolarizing needs gamma=<value>"))?;
            Ok(depol::depolarizing(DepolParams::new(gamma, d).map_err(|e| Error::parse(1, e.to_string()))?))
        }
        _ => Channel::parse(&std::fs::read_to_string(Path::new(spec))?),
    }
}

/// A test file or a named design.
pub fn load_test(spec: &str) -> Result<PmTest> {
    match PmTest::named(spec) {
        Some(t) => t.map_err(|e| Error::parse(1, e.to_string())),
        None => PmTest::parse(&std::fs::read_to_string(Path::new(spec))?),
    }
}

fn num(v: f64) -> String {
    // print tiny round-off as an exact zero so reports are stable
    let v = if v.abs() < 5e-10 { 0.0 } else { v };
    format!("{v:.9}")
}

fn cmd_choi(spec: &str, out: &mut String) -> Result<i32> {
    let ch = load_channel(spec)?;
    let choi = ch.choi_state();
    out.push_str(&write_matrix(choi.matrix()));
    out.push_str(&format!("min_pt_eigenvalue: {}\n", num(choi.min_pt_eigenvalue())));
    out.push_str(&format!("verdict: {}\n", is_eb_by_ppt(&ch)));
    Ok(EXIT_OK)
}

fn scenario_for(arg: ScenarioArg, kind: TestKind) -> Scenario {
    let name = match arg {
        ScenarioArg::Dd => "dd",
        ScenarioArg::Mdi => "mdi",
        ScenarioArg::Sdi => "sdi",
    };
    Scenario::from_name(name, kind).expect("known scenario names")
}

fn compute_bound(t: &PmTest, scenario: Scenario, dims: Option<Vec<usize>>, cfg: &OptimizerConfig) -> Result<EbBoundResult> {
    match (scenario, dims) {
        (Scenario::SdiI | Scenario::SdiII, Some(d)) => bounds::bound_sdi(t, d[0], d[1], cfg),
        (_, Some(_)) => Err(Error::InvalidArgument("--dims applies to the sdi scenario only".into())),
        (_, None) => bounds::bound(t, scenario, cfg),
    }
}

fn run_stats(ch: &Channel, t: &PmTest) -> Result<Statistics> {
    match t {
        PmTest::I(t) => run_test1(ch, t),
        PmTest::II(t) => run_test2(ch, t),
    }
}

fn optimizer_lines(out: &mut String, r: &EbBoundResult, cfg: &OptimizerConfig) {
    out.push_str(&format!("seed: {}\n", cfg.rng_seed));
    out.push_str(&format!("restarts: {}\n", r.restarts_used));
    out.push_str(&format!("outcomes: {}\n", r.argmin.povm().len()));
    out.push_str(&format!("iterations: {}\n", r.iterations));
    out.push_str(&format!("converged: {}\n", r.converged));
}

fn cmd_certify(
    echo: &str,
    channel: &str,
    test: &str,
    scenario: ScenarioArg,
    dims: Option<Vec<usize>>,
    opt: &OptFlags,
    out: &mut String,
) -> Result<i32> {
    let start = Instant::now();
    let cfg = optimizer_config(opt)?;
    let ch = load_channel(channel)?;
    let t = load_test(test)?;
    let scenario = scenario_for(scenario, t.kind());
    let stats = run_stats(&ch, &t)?;
    let cert = if dims.is_some() {
        let witness = pmtest::witness_value(&stats, t.weights())?;
        verdict_for(witness, compute_bound(&t, scenario, dims, &cfg)?)
    } else {
        certify(&stats, &t, scenario, &cfg)?
    };
    out.push_str(&format!("command: nebwit {echo}\n"));
    out.push_str(&format!("scenario: {scenario}\n"));
    out.push_str(&format!("witness: {}\n", num(cert.witness)));
    out.push_str(&format!("bound: {}\n", num(cert.bound.value)));
    out.push_str(&format!("verdict: {}\n", cert.verdict));
    out.push_str(&format!("margin: {}\n", num(cert.margin)));
    optimizer_lines(out, &cert.bound, &cfg);
    out.push_str(&format!("seconds: {:.3}\n", start.elapsed().as_secs_f64()));
    out.push_str(&format!(
        "summary: verdict={} scenario={} witness={} bound={} margin={}\n",
        cert.verdict,
        scenario,
        num(cert.witness),
        num(cert.bound.value),
        num(cert.margin)
    ));
    Ok(match cert.verdict {
        Verdict::Certified => EXIT_OK,
        Verdict::NotCertified => EXIT_NOT_CERTIFIED,
    })
}

fn cmd_bound(echo: &str, test: &str, scenario: ScenarioArg, dims: Option<Vec<usize>>, opt: &OptFlags, out: &mut String) -> Result<i32> {
    let start = Instant::now();
    let cfg = optimizer_config(opt)?;
    let t = load_test(test)?;
    let scenario = scenario_for(scenario, t.kind());
    let r = compute_bound(&t, scenario, dims, &cfg)?;
    out.push_str(&format!("command: nebwit {echo}\n"));
    out.push_str(&format!("scenario: {scenario}\n"));
    out.push_str(&format!("bound: {}\n", num(r.value)));
    optimizer_lines(out, &r, &cfg);
    out.push_str(&format!("seconds: {:.3}\n", start.elapsed().as_secs_f64()));
    for (k, (e, s)) in r.argmin.povm().effects().iter().zip(r.argmin.states()).enumerate() {
        out.push_str(&format!("povm_effect: {k}\n{}", write_matrix(e.matrix())));
        out.push_str(&format!("output_state: {k}\n{}", write_matrix(s.matrix())));
        if let Some(t) = r.argmin.subnorm() {
            out.push_str(&format!("weight: {k} {}\n", num(t[k])));
        }
    }
    let dumps = [("input", &r.inputs), ("assist", &r.assists)];
    for (label, states) in dumps {
        for (i, s) in states.iter().flatten().enumerate() {
            out.push_str(&format!("{label}: {i}\n{}", write_matrix(s.matrix())));
        }
    }
    for (i, e) in r.effects.iter().flatten().enumerate() {
        out.push_str(&format!("effect: {i}\n{}", write_matrix(e.matrix())));
    }
    out.push_str(&format!("summary: scenario={} bound={} converged={}\n", scenario, num(r.value), r.converged));
    Ok(EXIT_OK)
}

fn parse_cell(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::parse(1, format!("cell `{s}` is not of the form <d_A>x<d_B>"));
    let (a, b) = s.trim().split_once('x').ok_or_else(bad)?;
    let (a, b) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if !(1..=5).contains(&a) || !(1..=5).contains(&b) {
        return Err(Error::InvalidArgument(format!("cell {a}x{b} is outside 1..5")));
    }
    Ok((a, b))
}

#[allow(clippy::too_many_arguments)]
fn cmd_reproduce(
    target: Target,
    theta: f64,
    eps: f64,
    cells: &[String],
    full: bool,
    opt: &OptFlags,
    out: &mut String,
    err: &mut dyn Write,
) -> Result<i32> {
    let cfg = optimizer_config(opt)?;
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    match target {
        Target::DepolDd => {
            out.push_str("d,gamma,w1_closed,w1_sim,w2_closed,w2_sim,bound_I,bound_II,certified_I,certified_II\n");
            for d in [2, 3] {
                let t2 = pmtest::table2(d)?;
                let t3 = pmtest::table3(d)?;
                let b1 = bounds::bound_dd_test1(&t2, &cfg)?.value;
                let b2 = bounds::bound_dd_test2(&t3, &cfg)?.value;
                for &g in &grid {
                    let p = DepolParams::new(g, d)?;
                    let ch = depol::depolarizing(p);
                    let w1 = pmtest::witness_value(&run_test1(&ch, &t2)?, t2.weights())?;
                    let w2 = pmtest::witness_value(&run_test2(&ch, &t3)?, t3.weights())?;
                    out.push_str(&format!(
                        "{d},{g:.2},{},{},{},{},{},{},{},{}\n",
                        num(depol::closed_form_w1(p)),
                        num(w1),
                        num(depol::closed_form_w2(p)),
                        num(w2),
                        num(b1),
                        num(b2),
                        w1 < b1 - bounds::MARGIN_GUARD,
                        w2 < b2 - bounds::MARGIN_GUARD
                    ));
                }
            }
        }
        Target::DepolMdi => {
            let tilt = BellTilt::new(eps, theta)?;
            let t = depol::table3_with_tilt(tilt)?;
            let b = bounds::bound_mdi_test2(&t, &cfg)?.value;
            let g_theta = depol::gamma_theta(theta);
            let usable = depol::tilt_is_usable(theta);
            out.push_str("eps,theta,gamma_theta,usable,gamma,w_closed,w_sim,bound,certified\n");
            for &g in &grid {
                let p = DepolParams::new(g, 2)?;
                let (w_closed, _) = depol::closed_form_w2_tilt(p, tilt)?;
                let w_sim = depol::simulate_w2_tilt(p, tilt)?;
                out.push_str(&format!(
                    "{eps},{theta:.6},{},{usable},{g:.2},{},{},{},{}\n",
                    num(g_theta),
                    num(w_closed),
                    num(w_sim),
                    num(b),
                    w_sim < b - bounds::MARGIN_GUARD
                ));
            }
        }
        Target::Thresholds => {
            out.push_str("d,neb_threshold,ppt_threshold,closed_form_root\n");
            for d in 2..=4 {
                let ppt = bisect(|g| Ok(is_eb_by_ppt(&depol::depolarizing(DepolParams::new(g, d)?)) == EbVerdict::NonEb), 1e-9)?;
                let root = bisect(|g| Ok(depol::closed_form_w1(DepolParams::new(g, d)?) < 0.0), 1e-12)?;
                out.push_str(&format!("{d},{:.6},{:.6},{:.6}\n", depol::neb_threshold(d), ppt, root));
            }
        }
        Target::Table1 => {
            let tol = opt.tol.unwrap_or(1e-4);
            let list: Vec<(usize, usize)> = if cells.is_empty() {
                let max = if full { 5 } else { 3 };
                (2..=max).flat_map(|a| (2..=max).map(move |b| (a, b))).collect()
            } else {
                cells.iter().map(|c| parse_cell(c)).collect::<Result<_>>()?
            };
            if list.iter().any(|&(a, b)| a > 3 || b > 3) {
                let _ = writeln!(err, "warning: cells with a dimension above 3 can take hours");
            }
            // table1 bisects a distance, so --tol is its width and not a see-saw setting
            let cfg = OptimizerConfig { conv_tol: OptimizerConfig::default().conv_tol, ..cfg };
            out.push_str("test,d_a,d_b,gamma_min,steps\n");
            for kind in [TestKind::I, TestKind::II] {
                for &(a, b) in &list {
                    let r = sdi_threshold(kind, a, b, &cfg, tol)?;
                    let g = r.gamma.map_or("-".to_string(), |g| format!("{g:.4}"));
                    out.push_str(&format!("{kind},{a},{b},{g},{}\n", r.steps));
                }
            }
        }
    }
    Ok(EXIT_OK)
}

/// Smallest `gamma in [0, 1]` with `above(gamma)`, assuming monotonicity.
fn bisect(above: impl Fn(f64) -> Result<bool>, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["nebwit"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn channel_shorthands() {
        let ch = load_channel("depolarizing gamma=0.4 d=3").unwrap();
        assert_eq!((ch.d_in(), ch.d_out()), (3, 3));
        assert_eq!(load_channel("identity").unwrap().d_in(), 2);
        assert!(matches!(load_channel("depolarizing d=2"), Err(Error::Parse { .. })));
        assert!(matches!(load_channel("depolarizing gamma=2"), Err(Error::Parse { .. })));
        assert!(matches!(load_channel("identity q=1"), Err(Error::Parse { .. })));
    }

    #[test]
    fn choi_verdicts() {
        let (code, out, _) = run_str(&["choi", "depolarizing", "gamma=0.4", "d=2"]);
        assert_eq!(code, 0);
        assert!(out.ends_with("verdict: NonEB\n"), "{out}");
        let (_, out, _) = run_str(&["choi", "depolarizing gamma=0.2 d=2"]);
        assert!(out.ends_with("verdict: EB\n"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&["certify"]).0, EXIT_PARSE);
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_PARSE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn cells() {
        assert_eq!(parse_cell("2x3").unwrap(), (2, 3));
        assert!(parse_cell("23").is_err());
        assert!(parse_cell("2x9").is_err());
    }

    #[test]
    fn bisection() {
        let g = bisect(|g| Ok(g > 0.25), 1e-9).unwrap();
        assert!((g - 0.25).abs() < 1e-8);
    }
}
