//! Monte Carlo experiments over sampled presentations, configured from a
//! TOML file and emitted as CSV or JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cancellation::{first_moment_piece_bound, satisfies_cprime, DehnSolver};
use crate::cayley::{build_ball_with, verify_ball, VerifyChecks, DEFAULT_VERTEX_BUDGET};
use crate::error::{Error, Result};
use crate::sampler::{derive_seed, parse_rational, rng_from_seed, sample_presentation_with, Density, DensityParams};
use crate::sentences::{parse_sentence, refute_on_ball_free, refute_with_solver, to_clausal, EquationalClause};
use crate::words::Presentation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cprime,
    Sentence,
    Geometry,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub ball_vertices: usize,
    pub tuples: u64,
    /// Zero disables the wall-clock limit.
    pub ms_per_trial: u64,
}

impl Default for Budgets {
    fn default() -> Budgets {
        Budgets {
            ball_vertices: DEFAULT_VERTEX_BUDGET,
            tuples: 10_000_000,
            ms_per_trial: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub rank: usize,
    pub density: Density,
    pub lengths: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub lambda: Rational64,
    pub sentence: Option<String>,
    /// Ball radius for geometry runs, tuple length for sentence runs.
    pub ball: usize,
    pub checks: VerifyChecks,
    pub budgets: Budgets,
    /// Zero uses every core.
    pub workers: usize,
    /// Off by default so that reruns are byte-identical.
    pub record_time: bool,
}

impl ExperimentConfig {
    pub fn new(kind: Kind, rank: usize, density: Density, lengths: Vec<usize>, trials: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            rank,
            density,
            lengths,
            seed,
            trials,
            lambda: default_lambda(kind),
            sentence: None,
            ball: 3,
            checks: VerifyChecks::all(),
            budgets: Budgets::default(),
            workers: 0,
            record_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if self.lengths.is_empty() {
            return Err(Error::InvalidParams("length_list is empty".into()));
        }
        for &l in &self.lengths {
            DensityParams::new(self.rank, self.density, l, self.seed)?;
        }
        if self.kind == Kind::Sentence && self.sentence.is_none() {
            return Err(Error::InvalidParams("sentence experiments need a sentence".into()));
        }
        Ok(())
    }
}

fn default_lambda(kind: Kind) -> Rational64 {
    match kind {
        Kind::Sentence => Rational64::new(1, 6),
        Kind::Cprime | Kind::Geometry => Rational64::new(1, 8),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    fn rational(&self) -> Result<Rational64> {
        match self {
            Number::Int(i) => Ok(Rational64::from_integer(*i)),
            Number::Float(f) => parse_rational(&f.to_string()),
            Number::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    rank: usize,
    density: Number,
    length_list: Vec<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Kind,
    trials: usize,
    lambda: Option<Number>,
    sentence_file: Option<PathBuf>,
    sentence: Option<String>,
    ball: Option<usize>,
    checks: Option<String>,
    workers: Option<usize>,
    #[serde(default)]
    record_time: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    ball_vertices: Option<usize>,
    tuples: Option<u64>,
    ms_per_trial: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    experiment: RawExperiment,
    #[serde(default)]
    budget: RawBudget,
}

/// Parses a configuration; relative sentence files resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| {
                let before = &text[..s.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (line, column)
            })
            .unwrap_or((1, 1));
        crate::error::parse_err(line, column, e.message().to_string())
    })?;
    let kind = raw.experiment.kind;
    let sentence = match (&raw.experiment.sentence, &raw.experiment.sentence_file) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(f)) => Some(std::fs::read_to_string(base.join(f))?),
        (None, None) => None,
    };
    let defaults = Budgets::default();
    let cfg = ExperimentConfig {
        kind,
        rank: raw.model.rank,
        density: Density(raw.model.density.rational()?),
        lengths: raw.model.length_list,
        seed: raw.model.seed,
        trials: raw.experiment.trials,
        lambda: match &raw.experiment.lambda {
            Some(l) => l.rational()?,
            None => default_lambda(kind),
        },
        sentence,
        ball: raw.experiment.ball.unwrap_or(3),
        checks: match &raw.experiment.checks {
            Some(c) => VerifyChecks::parse(c)?,
            None => VerifyChecks::all(),
        },
        budgets: Budgets {
            ball_vertices: raw.budget.ball_vertices.unwrap_or(defaults.ball_vertices),
            tuples: raw.budget.tuples.unwrap_or(defaults.tuples),
            ms_per_trial: raw.budget.ms_per_trial.unwrap_or(defaults.ms_per_trial),
        },
        workers: raw.experiment.workers.unwrap_or(0),
        record_time: raw.experiment.record_time,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ell: usize,
    pub n: usize,
    pub d: String,
    pub trials: usize,
    pub success: usize,
    pub failures: usize,
    pub skipped: usize,
    /// Successes over trials that were not skipped.
    pub fraction: f64,
    pub oracle: Option<f64>,
    pub seed: u64,
    pub ms: u64,
    pub pairs_checked: u64,
    pub violations: u64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Outcome {
    Success,
    Failure,
    Skip(String),
}

#[derive(Clone, Debug)]
struct Trial {
    outcome: Outcome,
    pairs: u64,
    violations: u64,
}

impl Trial {
    fn plain(outcome: Outcome) -> Trial {
        Trial {
            outcome,
            pairs: 0,
            violations: 0,
        }
    }
}

fn sample(cfg: &ExperimentConfig, length: usize, seed: u64) -> Result<Presentation> {
    let params = DensityParams::new(cfg.rank, cfg.density, length, seed)?;
    let mut rng = rng_from_seed(seed);
    Ok(sample_presentation_with(&params, &mut rng)?.presentation)
}

fn skip_on_budget(e: Error) -> Result<Trial> {
    match e {
        Error::Budget(m) => Ok(Trial::plain(Outcome::Skip(format!("budget: {m}")))),
        other => Err(other),
    }
}

fn cprime_trial(cfg: &ExperimentConfig, length: usize, seed: u64) -> Result<Trial> {
    let p = match sample(cfg, length, seed) {
        Ok(p) => p,
        Err(e) => return skip_on_budget(e),
    };
    Ok(Trial::plain(if satisfies_cprime(&p, cfg.lambda) {
        Outcome::Success
    } else {
        Outcome::Failure
    }))
}

struct SentenceSetup {
    clauses: Vec<EquationalClause>,
    /// Whether the free group of the same rank refutes each clause.
    free_refuted: bool,
}

fn sentence_setup(cfg: &ExperimentConfig) -> Result<SentenceSetup> {
    let text = cfg.sentence.as_deref().unwrap_or_default();
    let clauses = to_clausal(&parse_sentence(text)?);
    let mut free_refuted = false;
    for c in &clauses {
        if refute_on_ball_free(c, cfg.rank, cfg.ball, cfg.budgets.tuples)?.witness.is_some() {
            free_refuted = true;
            break;
        }
    }
    Ok(SentenceSetup { clauses, free_refuted })
}

fn small_cancellation(p: &Presentation, lambda: Rational64) -> bool {
    satisfies_cprime(p, lambda) && satisfies_cprime(p, Rational64::new(1, 6))
}

// success: the group refutes the sentence on the ball exactly when the
// free group does
fn sentence_trial(cfg: &ExperimentConfig, setup: &SentenceSetup, length: usize, seed: u64) -> Result<Trial> {
    let p = match sample(cfg, length, seed) {
        Ok(p) => p,
        Err(e) => return skip_on_budget(e),
    };
    if !small_cancellation(&p, cfg.lambda) {
        return Ok(Trial::plain(Outcome::Skip(format!("not C'({})", cfg.lambda))));
    }
    let solver = DehnSolver::new_unchecked(&p);
    let mut refuted = false;
    for c in &setup.clauses {
        match refute_with_solver(c, &solver, cfg.ball, cfg.budgets.tuples) {
            Ok(r) => {
                if let Some(w) = r.witness {
                    log::info!("seed {seed}: counterexample {w:?}");
                    refuted = true;
                    break;
                }
            }
            Err(e) => return skip_on_budget(e),
        }
    }
    Ok(Trial::plain(if refuted == setup.free_refuted {
        Outcome::Success
    } else {
        Outcome::Failure
    }))
}

fn geometry_trial(cfg: &ExperimentConfig, length: usize, seed: u64) -> Result<Trial> {
    let p = match sample(cfg, length, seed) {
        Ok(p) => p,
        Err(e) => return skip_on_budget(e),
    };
    if !small_cancellation(&p, cfg.lambda) {
        return Ok(Trial::plain(Outcome::Skip(format!("not C'({})", cfg.lambda))));
    }
    let solver = DehnSolver::new_unchecked(&p);
    let ball = match build_ball_with(&p, cfg.ball, Box::new(solver), cfg.budgets.ball_vertices) {
        Ok(b) => b,
        Err(e) => return skip_on_budget(e),
    };
    let report = verify_ball(&ball, cfg.checks);
    for v in &report.violations {
        log::warn!("seed {seed}: {:?} {}", v.kind, v.detail);
    }
    Ok(Trial {
        outcome: if report.violations.is_empty() {
            Outcome::Success
        } else {
            Outcome::Failure
        },
        pairs: report.pairs_checked as u64,
        violations: report.violations.len() as u64,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))
}

/// Runs every cell of the grid. Trial `t` of cell `c` draws from the seed
/// `derive_seed(seed, c, t)`, so results do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let setup = match cfg.kind {
        Kind::Sentence => Some(sentence_setup(cfg)?),
        _ => None,
    };
    let workers = pool(cfg.workers)?;
    let mut rows = Vec::with_capacity(cfg.lengths.len());
    for (cell, &length) in cfg.lengths.iter().enumerate() {
        let started = Instant::now();
        let trials: Vec<Trial> = workers.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(cfg.seed, cell as u64, t as u64);
                    let clock = Instant::now();
                    let trial = match cfg.kind {
                        Kind::Cprime => cprime_trial(cfg, length, seed),
                        Kind::Sentence => sentence_trial(cfg, setup.as_ref().expect("setup"), length, seed),
                        Kind::Geometry => geometry_trial(cfg, length, seed),
                    }?;
                    let limit = cfg.budgets.ms_per_trial;
                    if limit > 0 && clock.elapsed().as_millis() > u128::from(limit) {
                        return Ok(Trial::plain(Outcome::Skip("budget: wall time".into())));
                    }
                    Ok(trial)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        rows.push(summarize(cfg, length, &trials, if cfg.record_time { started.elapsed().as_millis() as u64 } else { 0 }));
    }
    Ok(rows)
}

pub fn run_cprime_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_kind(cfg, Kind::Cprime)
}

pub fn run_sentence_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_kind(cfg, Kind::Sentence)
}

pub fn run_geometry_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_kind(cfg, Kind::Geometry)
}

fn run_kind(cfg: &ExperimentConfig, kind: Kind) -> Result<Vec<ResultRow>> {
    let mut c = cfg.clone();
    c.kind = kind;
    run_experiment(&c)
}

fn summarize(cfg: &ExperimentConfig, length: usize, trials: &[Trial], ms: u64) -> ResultRow {
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut success, mut failures, mut skipped) = (0, 0, 0);
    for t in trials {
        match &t.outcome {
            Outcome::Success => success += 1,
            Outcome::Failure => failures += 1,
            Outcome::Skip(r) => {
                skipped += 1;
                *reasons.entry(r.as_str()).or_default() += 1;
            }
        }
    }
    let counted = trials.len() - skipped;
    let mut notes: Vec<String> = reasons.into_iter().map(|(r, n)| format!("{r} ({n})")).collect();
    if counted == 0 {
        notes.push("all trials skipped".into());
    }
    if cfg.kind == Kind::Sentence {
        notes.push("desk-scale evidence".into());
    }
    ResultRow {
        ell: length,
        n: cfg.rank,
        d: cfg.density.0.to_string(),
        trials: trials.len(),
        success,
        failures,
        skipped,
        fraction: if counted == 0 { 0.0 } else { success as f64 / counted as f64 },
        oracle: match cfg.kind {
            Kind::Cprime => Some(first_moment_piece_bound(cfg.rank, cfg.density, length, cfg.lambda)),
            _ => None,
        },
        seed: cfg.seed,
        ms,
        pairs_checked: trials.iter().map(|t| t.pairs).sum(),
        violations: trials.iter().map(|t| t.violations).sum(),
        notes,
    }
}

pub const CSV_HEADER: &str = "ell,n,d,trials,success,fraction,oracle,seed,ms";

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let d = parse_rational(&r.d).map(|q| *q.numer() as f64 / *q.denom() as f64).unwrap_or(f64::NAN);
        let oracle = r.oracle.map(|o| o.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.ell, r.n, d, r.trials, r.success, r.fraction, oracle, r.seed, r.ms
        ));
    }
    out
}

pub fn to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub fn from_json(text: &str) -> Result<Vec<ResultRow>> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParams(format!("bad result table: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    };
    std::fs::write(path, text)?;
    Ok(())
}
