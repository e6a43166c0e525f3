//! The `analyze`, `sweep`, `audit` and `figures` subcommands.
//!
//! Every command writes its data to `--output` (or stdout) and a short
//! human-readable summary to stderr unless `--quiet` is set.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use merl_core::conditional::{
    expected_cond_variance, nested_correction_term, relation_residual, sequential_expected_cond_variance,
    variance_of_cond_expectation, ControlChain, ObservablePair,
};
use merl_core::linalg::Register;
use merl_core::merl::{best_order_search, merl_spectrum, traditional_bound, LTraMode, MerlScenario, MerlSpectrum, SeparabilityVerdict, Tolerances};
use merl_core::par;
use merl_core::random::{random_hermitian, random_mixed, random_pure, rng_for};
use merl_core::scenarios::{OamBasisMap, OAM_MU_MAX};
use merl_core::state::{variance, Observable};

use crate::document::{LTraSpec, ScenarioDocument, StateSpec};
use crate::error::CliError;
use crate::output::{cell, emit, json, num, verdict_text, AnalyzeReport, Format};

/// Flags shared by all subcommands.
#[derive(Clone, Debug)]
pub struct Options {
    pub output: Option<PathBuf>,
    pub format: Format,
    pub quiet: bool,
    pub seed: u64,
    pub tolerance_split: Option<f64>,
    pub best_order: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self { output: None, format: Format::Json, quiet: false, seed: 0, tolerance_split: None, best_order: false }
    }
}

/// stdout and stderr handles, injectable for tests.
pub struct Streams<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Streams<'_> {
    fn note(&mut self, opts: &Options, msg: &str) {
        if !opts.quiet {
            let _ = writeln!(self.err, "{msg}");
        }
    }
}

pub fn load_document(path: &Path) -> Result<ScenarioDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ScenarioDocument::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn build(doc: &ScenarioDocument, opts: &Options) -> Result<MerlScenario, CliError> {
    let mut sc = doc.build()?;
    if let Some(t) = opts.tolerance_split {
        sc.tolerances.split_tol = Some(t);
        sc.validate().map_err(|e| CliError::Parse(format!("--tolerance-split: {e}")))?;
    }
    Ok(sc)
}

fn evaluate(sc: &MerlScenario, best_order: bool) -> Result<(Vec<usize>, MerlSpectrum), CliError> {
    if best_order {
        let found = best_order_search(sc)?;
        Ok((found.ordering, found.spectrum))
    } else {
        Ok((sc.chain.controls().to_vec(), merl_spectrum(sc)?))
    }
}

fn summary(order: &[usize], s: &MerlSpectrum) -> String {
    let lines = s.lines.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    format!(
        "order {:?}: lines [{lines}], {} of {} splits, verdict: {}",
        order,
        s.split_count,
        s.splits.len(),
        verdict_text(&s.verdict)
    )
}

pub fn analyze(path: &Path, opts: &Options, io: &mut Streams<'_>) -> Result<(), CliError> {
    let doc = load_document(path)?;
    let sc = build(&doc, opts)?;
    let (order, spectrum) = evaluate(&sc, opts.best_order)?;
    io.note(opts, &summary(&order, &spectrum));
    for n in &spectrum.notes {
        io.note(opts, &format!("note: {n}"));
    }
    let report = AnalyzeReport::new(order, spectrum);
    let data = match opts.format {
        Format::Json => json(&report)?,
        Format::Csv => report.csv(),
    };
    emit(&data, opts.output.as_deref(), io.out)
}

/// Parameters `merl sweep` can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// `μ` of an `oam_ghz` state.
    Mu,
    /// Explicit traditional bound.
    LTra,
}

impl SweepParam {
    pub fn from_name(name: &str) -> Result<Self, CliError> {
        match name {
            "mu" => Ok(Self::Mu),
            "l_tra" => Ok(Self::LTra),
            _ => Err(CliError::Parse(format!("--param: unknown sweep parameter {name:?} (expected \"mu\" or \"l_tra\")"))),
        }
    }

    fn apply(self, doc: &ScenarioDocument, value: f64) -> Result<ScenarioDocument, CliError> {
        let mut doc = doc.clone();
        match self {
            Self::Mu => match &mut doc.state {
                StateSpec::OamGhz { mu, .. } => *mu = value,
                _ => return Err(CliError::Parse("--param mu: state builder must be \"oam_ghz\"".into())),
            },
            Self::LTra => doc.l_tra = LTraSpec::Value(value),
        }
        Ok(doc)
    }
}

/// `steps` evenly spaced points from `from` to `to`; a single step is `from`.
pub fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![from],
        n => (0..n).map(|i| if i + 1 == n { to } else { from + (to - from) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub param: f64,
    pub lines: Vec<f64>,
    pub split_count: usize,
    pub verdict: Option<SeparabilityVerdict>,
}

pub fn sweep_rows(
    doc: &ScenarioDocument,
    param: SweepParam,
    values: &[f64],
    opts: &Options,
) -> Result<Vec<SweepRow>, CliError> {
    par::try_map(values, |&v| {
        let sc = build(&param.apply(doc, v)?, opts)?;
        let (_, s) = evaluate(&sc, opts.best_order)?;
        Ok(SweepRow { param: v, lines: s.lines, split_count: s.split_count, verdict: s.verdict })
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let n = rows.first().map_or(0, |r| r.lines.len());
    let mut out = String::from("param");
    for m in 0..n {
        let _ = write!(out, ",L{m}");
    }
    out.push_str(",splitCount\n");
    for r in rows {
        out.push_str(&num(r.param));
        for &l in &r.lines {
            out.push(',');
            out.push_str(&num(l));
        }
        let _ = writeln!(out, ",{}", r.split_count);
    }
    out
}

pub fn sweep(
    path: &Path,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    opts: &Options,
    io: &mut Streams<'_>,
) -> Result<(), CliError> {
    let param = SweepParam::from_name(param)?;
    if steps == 0 {
        return Err(CliError::Parse("--steps: must be at least 1".into()));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(CliError::Parse("--from/--to: must be finite".into()));
    }
    let doc = load_document(path)?;
    let rows = sweep_rows(&doc, param, &grid(from, to, steps), opts)?;
    let max_split = rows.iter().map(|r| r.split_count).max().unwrap_or(0);
    io.note(opts, &format!("{} points, up to {max_split} splits", rows.len()));
    let data = match opts.format {
        Format::Json => json(&rows)?,
        Format::Csv => sweep_csv(&rows),
    };
    emit(&data, opts.output.as_deref(), io.out)
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckTally {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// Largest violation seen, in the direction the check forbids.
    pub worst: f64,
}

impl CheckTally {
    fn new(name: &'static str) -> Self {
        Self { name, ..Self::default() }
    }

    fn record(&mut self, violation: f64, tol: f64) {
        self.worst = self.worst.max(violation);
        if violation <= tol {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }

    fn merge(&mut self, o: &CheckTally) {
        self.passed += o.passed;
        self.failed += o.failed;
        self.worst = self.worst.max(o.worst);
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckTally>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn text(&self) -> String {
        let mut out = format!("audit: {} trials, seed {}\n", self.trials, self.seed);
        for c in &self.checks {
            let tag = if c.failed == 0 { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag}  {:<20} {:>6} passed {:>6} failed  worst {:.3e}", c.name, c.passed, c.failed, c.worst);
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("check,passed,failed,worst\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{},{},{}", c.name, c.passed, c.failed, num(c.worst));
        }
        out
    }
}

const AUDIT_REGISTERS: [&[usize]; 6] = [&[2, 2, 2], &[2, 3, 2], &[3, 2, 2], &[2, 2, 2, 2], &[3, 3, 2], &[2, 3, 3]];
const AUDIT_TOL: f64 = 1e-8;
const CHECK_NAMES: [&str; 5] = ["total_variance", "reduction", "telescoping", "monotonicity", "relation"];

fn audit_scenario(trial: usize, seed: u64) -> Result<MerlScenario, CliError> {
    let dims = AUDIT_REGISTERS[trial % AUDIT_REGISTERS.len()];
    let reg = Register::new(dims.to_vec())?;
    let mut rng = rng_for(seed, trial as u64);
    let state = if trial.is_multiple_of(2) { random_pure(&reg, &mut rng) } else { random_mixed(&reg, &mut rng) };
    let chain = ControlChain::new(0, (1..dims.len()).collect(), dims.len())?;
    let k = 1 + trial % 3;
    let pairs = (0..k)
        .map(|_| {
            let q = Observable::new(&reg, 0, random_hermitian(dims[0], &mut rng))?;
            let os = (1..dims.len())
                .map(|s| Observable::new(&reg, s, random_hermitian(dims[s], &mut rng)))
                .collect::<Result<Vec<_>, _>>()?;
            ObservablePair::new(q, os)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MerlScenario::new(state, chain, pairs, LTraMode::SumOfVariances, Tolerances::default())?)
}

fn audit_trial(trial: usize, seed: u64) -> Result<[CheckTally; 5], CliError> {
    let sc = audit_scenario(trial, seed)?;
    let mut t = CHECK_NAMES.map(CheckTally::new);
    let s = &sc.state;
    for pair in &sc.pairs {
        let q = pair.q();
        let controls = pair.controls_for(&sc.chain)?;
        let v = variance(q, s)?;
        let scale = AUDIT_TOL * v.max(1.0);
        let ecv = expected_cond_variance(q, &controls[0], s)?;
        let vce = variance_of_cond_expectation(q, &controls[0], s)?;
        t[0].record((v - ecv - vce).abs(), scale);
        t[1].record(ecv - v, scale);
        for m in 2..=controls.len() {
            let before = sequential_expected_cond_variance(q, &controls[..m - 1], s)?;
            let after = sequential_expected_cond_variance(q, &controls[..m], s)?;
            let nested = nested_correction_term(q, &controls[m - 1], &controls[..m - 1], s)?;
            t[2].record((before - after - nested).abs(), scale);
        }
    }
    let spectrum = merl_spectrum(&sc)?;
    let scale = AUDIT_TOL * spectrum.lines[0].max(1.0);
    for w in spectrum.lines.windows(2) {
        t[3].record(w[1] - w[0], scale);
    }
    let residual = relation_residual(&sc.pairs, &sc.chain, s, traditional_bound(&sc)?)?;
    t[4].record(-residual, scale);
    Ok(t)
}

pub fn run_audit(trials: usize, seed: u64) -> Result<AuditReport, CliError> {
    let per_trial = par::map_range(trials, |i| audit_trial(i, seed));
    let mut checks = CHECK_NAMES.map(CheckTally::new).to_vec();
    for r in per_trial {
        for (acc, c) in checks.iter_mut().zip(r?.iter()) {
            acc.merge(c);
        }
    }
    Ok(AuditReport { trials, seed, checks })
}

pub fn audit(trials: usize, opts: &Options, io: &mut Streams<'_>) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Parse("--trials: must be at least 1".into()));
    }
    let report = run_audit(trials, opts.seed)?;
    let data = match opts.format {
        Format::Json => json(&report)?,
        Format::Csv => report.csv(),
    };
    emit(&data, opts.output.as_deref(), io.out)?;
    if opts.output.is_some() || opts.format != Format::Json {
        io.note(opts, report.text().trim_end());
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: usize = report.checks.iter().map(|c| c.failed).sum();
        Err(CliError::Numeric(format!("audit: {failed} checks failed")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    All,
}

pub const FIG3_POINTS: usize = 50;

fn write_file(dir: &Path, name: &str, data: &str) -> Result<PathBuf, CliError> {
    let p = dir.join(name);
    fs::write(&p, data).map_err(|e| CliError::io(&p, e))?;
    Ok(p)
}

fn fig2(dir: &Path, opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let docs = ScenarioDocument::fig2();
    let spectra = par::try_map(&docs, |(_, d)| evaluate(&build(d, opts)?, opts.best_order))?;
    let mut lines = String::from("state,m,line\n");
    let mut verdicts = String::from("state,control_order,split_count,verdict\n");
    let mut written = Vec::new();
    for ((name, doc), (order, s)) in docs.iter().zip(&spectra) {
        for (m, &l) in s.lines.iter().enumerate() {
            let _ = writeln!(lines, "{name},{m},{}", num(l));
        }
        let order = order.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(verdicts, "{name},{order},{},{}", s.split_count, cell(&verdict_text(&s.verdict)));
        written.push(write_file(dir, &format!("fig2_{name}.toml"), &doc.to_toml()?)?);
    }
    written.push(write_file(dir, "fig2_lines.csv", &lines)?);
    written.push(write_file(dir, "fig2_verdicts.csv", &verdicts)?);
    Ok(written)
}

fn fig3(dir: &Path, opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let values = grid(0.0, OAM_MU_MAX, FIG3_POINTS);
    let mut out = String::from("basis_map,mu,L0,L1,L2,split_count,verdict\n");
    for map in [OamBasisMap::Positional, OamBasisMap::MValue] {
        let doc = ScenarioDocument::fig3(0.0, map);
        for r in sweep_rows(&doc, SweepParam::Mu, &values, opts)? {
            let ls = r.lines.iter().map(|&l| num(l)).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{},{},{ls},{},{}", map.name(), num(r.param), r.split_count, cell(&verdict_text(&r.verdict)));
        }
    }
    let doc = ScenarioDocument::fig3(1.0 / 3f64.sqrt(), OamBasisMap::Positional);
    Ok(vec![write_file(dir, "fig3_sweep.csv", &out)?, write_file(dir, "fig3_ghz.toml", &doc.to_toml()?)?])
}

pub fn figures(which: Figure, dir: &Path, opts: &Options, io: &mut Streams<'_>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    if matches!(which, Figure::Fig2 | Figure::All) {
        written.extend(fig2(dir, opts)?);
    }
    if matches!(which, Figure::Fig3 | Figure::All) {
        written.extend(fig3(dir, opts)?);
    }
    for p in written {
        io.note(opts, &format!("wrote {}", p.display()));
    }
    Ok(())
}
