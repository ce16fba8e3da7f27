use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use randgroup::cancellation::{max_piece_length, satisfies_cprime, DehnSolver, Occurrence};
use randgroup::cayley::{build_ball, verify_ball, VerifyChecks};
use randgroup::diagrams::{
    advk_ratio_ln, advk_total_bound, diagram_from_dehn_trace, face_bound, ln_big, BoundsParams, VanKampenDiagram,
};
use randgroup::harness::{emit, load_config, run_experiment, Format};
use randgroup::sampler::{parse_rational, sample_presentation, Density, DensityParams};
use randgroup::sentences::{
    parse_sentence, refute_on_ball_free, refute_with_solver, to_clausal, TriangularSystem,
};
use randgroup::unification::{
    boundary_decoration, build_layout, free_letter_bound, fulfill_probability_bound, prune_singletons, unify_positions,
    BoundarySpan, DecorationOutcome, PruneOutcome,
};
use randgroup::words::{Presentation, Template, Word};
use randgroup::{Error, Result};

#[derive(Parser)]
#[command(name = "randgroup", version, about = "Random groups in the density model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a presentation at density d.
    Sample {
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        density: String,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the longest piece and the C'(λ) verdict.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "1/6")]
        lambda: String,
    },
    /// Decide whether a word is trivial with Dehn's algorithm.
    Wp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        word: String,
        /// Also write a van Kampen diagram when the word is trivial.
        #[arg(long)]
        diagram: Option<PathBuf>,
    },
    /// Build a ball in the Cayley graph and check geodesic structure.
    Ball {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value = "single-layer,minimizers,digons")]
        verify: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Verify a van Kampen diagram file.
    Diagram {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        diagram: PathBuf,
    },
    /// Search for counterexamples to a universal sentence among short words.
    Sentence {
        /// Presentation; the free group of rank `--rank` when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long)]
        sentence: PathBuf,
        #[arg(long)]
        ball: usize,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        #[arg(long)]
        json: bool,
    },
    /// Diagram-count and probability bounds.
    Bounds {
        #[arg(long = "K", default_value_t = 10)]
        k: u64,
        #[arg(long, default_value_t = 3)]
        r: u64,
        #[arg(long, default_value = "1/16")]
        d: String,
        #[arg(long, default_value = "1/16")]
        eps: String,
        #[arg(long, default_value_t = 50)]
        l: u64,
        #[arg(long, default_value_t = 3)]
        q: u64,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        relators: u64,
        #[arg(long)]
        json: bool,
    },
    /// Unify letter positions of a triangular system and decorate a boundary.
    Unify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        lengths: PathBuf,
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        relators: usize,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Run a Monte-Carlo experiment described by a TOML file.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_presentation(path: &Path) -> Result<Presentation> {
    Presentation::parse(&read(path)?)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One equation per line, either `w` or `w = 1`.
fn parse_system(text: &str) -> Result<TriangularSystem> {
    let mut eqs = Vec::new();
    for (line, l) in content_lines(text) {
        let body = l.strip_suffix("= 1").or_else(|| l.strip_suffix("=1")).unwrap_or(l).trim();
        let t = Template::parse(body).map_err(|e| match e {
            Error::Parse { column, message, .. } => Error::Parse { line, column, message },
            other => other,
        })?;
        eqs.push(t);
    }
    Ok(TriangularSystem::from_equations(eqs))
}

/// `name = len` or `name len` per line.
fn parse_lengths(text: &str) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for (line, l) in content_lines(text) {
        let parts: Vec<&str> = l.split(|c: char| c == '=' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || Error::Parse { line, column: 1, message: format!("expected `name = length`, got `{l}`") };
        if parts.len() != 2 {
            return Err(bad());
        }
        let n: usize = parts[1].parse().map_err(|_| bad())?;
        out.insert(parts[0].to_string(), n);
    }
    Ok(out)
}

/// `component start len` per line, in unit positions.
fn parse_spans(text: &str) -> Result<Vec<BoundarySpan>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let nums: std::result::Result<Vec<usize>, _> = l.split_whitespace().map(str::parse).collect();
        match nums.as_deref() {
            Ok([component, start, len]) => out.push(BoundarySpan { component: *component, start: *start, len: *len }),
            _ => {
                return Err(Error::Parse { line, column: 1, message: format!("expected `component start len`, got `{l}`") })
            }
        }
    }
    Ok(out)
}

fn sample(rank: usize, density: &str, length: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let params = DensityParams::new(rank, Density(parse_rational(density)?), length, seed)?;
    let p = sample_presentation(&params)?;
    let text = p.to_file_string();
    match out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn occurrence(o: &Occurrence) -> String {
    let inv = if o.inverted { "^-1" } else { "" };
    format!("r{}{inv}[{}]", o.relator + 1, o.position)
}

fn check(input: &Path, lambda: &str) -> Result<()> {
    let p = load_presentation(input)?;
    let lambda = parse_rational(lambda)?;
    let report = max_piece_length(&p);
    println!("max_piece_length = {}", report.max_piece_length);
    println!("relator_length = {}", p.relator_length());
    let verdict = if satisfies_cprime(&p, lambda) { "holds" } else { "fails" };
    println!("C'({lambda}) {verdict}");
    for w in &report.witnesses {
        println!("witness {} at {} and {}", w.word, occurrence(&w.first), occurrence(&w.second));
    }
    Ok(())
}

fn wp(input: &Path, word: &str, diagram: Option<&Path>) -> Result<()> {
    let p = load_presentation(input)?;
    let w: Word = word.parse()?;
    let solver = DehnSolver::new(&p)?;
    let trace = solver.reduce(&w);
    let trivial = trace.result.is_empty();
    println!("{}", if trivial { "trivial" } else { "nontrivial" });
    println!("{}", serde_json::to_string_pretty(&trace).expect("trace serializes"));
    if let Some(path) = diagram {
        if !trivial {
            return Err(Error::NontrivialWord);
        }
        write(path, &diagram_from_dehn_trace(&w, &solver)?.to_json())?;
    }
    Ok(())
}

fn ball(input: &Path, radius: usize, verify: &str, report: Option<&Path>) -> Result<()> {
    let p = load_presentation(input)?;
    let checks = VerifyChecks::parse(verify)?;
    let b = build_ball(&p, radius)?;
    let r = verify_ball(&b, checks);
    println!(
        "vertices = {}, pairs_checked = {}, violations = {}, digon_count = {}, max_divisor_len = {}",
        r.vertices,
        r.pairs_checked,
        r.violations.len(),
        r.digon_count,
        r.max_divisor_len
    );
    if let Some(path) = report {
        write(path, &serde_json::to_string_pretty(&r).expect("report serializes"))?;
    }
    Ok(())
}

fn diagram(input: &Path, file: &Path) -> Result<bool> {
    let p = load_presentation(input)?;
    let d = VanKampenDiagram::from_json(&read(file)?)?;
    let report = d.verify(&p);
    if report.valid {
        println!("valid, boundary {}", d.boundary_word());
    } else {
        println!("invalid");
        for problem in &report.problems {
            println!("  {problem}");
        }
    }
    Ok(report.valid)
}

fn sentence(input: Option<&Path>, rank: usize, file: &Path, ball: usize, budget: u64, as_json: bool) -> Result<()> {
    let s = parse_sentence(&read(file)?)?;
    let solver = match input {
        Some(path) => Some(DehnSolver::new(&load_presentation(path)?)?),
        None => None,
    };
    let mut clauses = Vec::new();
    let mut holds = true;
    for c in to_clausal(&s) {
        let r = match &solver {
            Some(solver) => refute_with_solver(&c, solver, ball, budget)?,
            None => refute_on_ball_free(&c, rank, ball, budget)?,
        };
        holds &= r.witness.is_none();
        clauses.push(json!({ "clause": c, "refutation": r }));
    }
    if as_json {
        println!("{}", pretty(&json!({ "ball": ball, "refuted": !holds, "clauses": clauses })));
    } else if holds {
        println!("no counterexample with words of length at most {ball}");
    } else {
        for c in &clauses {
            if let Some(w) = c["refutation"]["witness"].as_object() {
                let parts: Vec<String> = w.iter().map(|(k, v)| format!("{k} = {}", v.as_str().unwrap_or(""))).collect();
                println!("counterexample: {}", parts.join(", "));
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bounds(k: u64, r: u64, d: &str, eps: &str, l: u64, q: u64, rank: usize, relators: u64, as_json: bool) -> Result<()> {
    let params = BoundsParams {
        k,
        r,
        d: parse_rational(d)?,
        epsilon: parse_rational(eps)?,
        q,
        n_rel: relators,
        rank,
        length: l,
        ..BoundsParams::default()
    };
    let f = face_bound(&params)?;
    let total = advk_total_bound(&params)?;
    let prob = fulfill_probability_bound(rank, relators as usize, l as usize, params.d)?;
    let ln_total = ln_big(&total);
    let ln_prob = prob.exponent_single.to_f64().unwrap_or(f64::NAN) * ((prob.base) as f64).ln();
    let ln_quotient = advk_ratio_ln(&params)?;
    if as_json {
        println!(
            "{}",
            pretty(&json!({
                "face_bound": f,
                "advk_total_bound": total.to_string(),
                "ln_advk_total_bound": ln_total,
                "probability": prob,
                "ln_probability": ln_prob,
                "ln_quotient": ln_quotient,
            }))
        );
    } else {
        let ten = std::f64::consts::LN_10;
        println!("face_bound = {f}");
        println!("advk_total_bound ~ 10^{:.2}", ln_total / ten);
        println!("probability = {}^({}) ~ 10^{:.2}", prob.base, prob.exponent_single, ln_prob / ten);
        println!("quotient ~ 10^{:.2} (ln {:.3})", ln_quotient / ten, ln_quotient);
    }
    Ok(())
}

fn unify(
    system: &Path,
    lengths: &Path,
    boundary: Option<&Path>,
    relators: usize,
    length: Option<usize>,
    as_json: bool,
) -> Result<()> {
    let sys = parse_system(&read(system)?)?;
    let lens = parse_lengths(&read(lengths)?)?;
    let layout = build_layout(&sys, &lens)?;
    let alphabet = unify_positions(&layout)?;
    let pieces: Vec<Value> =
        alphabet.pieces.iter().map(|p| json!({ "len": p.len(), "occurrences": p.occurrences })).collect();
    let mut status = "none";
    let mut singletons: Vec<usize> = Vec::new();
    let mut removed: Vec<usize> = Vec::new();
    let mut dof = alphabet.degrees_of_freedom();
    if let Some(path) = boundary {
        let spans = parse_spans(&read(path)?)?;
        match boundary_decoration(&alphabet, &spans)? {
            DecorationOutcome::Decoration(d) => {
                status = "decoration";
                dof = d.multiplicity().len();
            }
            DecorationOutcome::Pre { pre, singletons: s } => {
                singletons = s;
                match prune_singletons(&pre) {
                    PruneOutcome::Decorated { decoration, removed: r } => {
                        status = "pre-decoration, pruned to decoration";
                        dof = decoration.multiplicity().len();
                        removed = r;
                    }
                    PruneOutcome::AllRemoved { removed: r } => {
                        status = "pre-decoration, every component removed";
                        dof = 0;
                        removed = r;
                    }
                }
            }
        }
    }
    let length = length.unwrap_or_else(|| layout.total());
    let bound = free_letter_bound(relators, length);
    if as_json {
        println!(
            "{}",
            pretty(&json!({
                "pieces": pieces,
                "decoration_status": status,
                "singletons": singletons,
                "removed_components": removed,
                "degrees_of_freedom": dof,
                "prop_a_bound": bound.to_string(),
            }))
        );
    } else {
        println!("pieces = {}", pieces.len());
        for (i, p) in alphabet.pieces.iter().enumerate() {
            println!("  p{} len {} occurrences {}", i + 1, p.len(), p.occurrences.len());
        }
        println!("decoration_status = {status}");
        println!("singletons = {singletons:?}");
        println!("degrees_of_freedom = {dof}");
        println!("prop_a_bound = {bound}");
    }
    Ok(())
}

fn mc(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let rows = run_experiment(&cfg)?;
    for r in &rows {
        println!(
            "ell={} n={} d={} trials={} success={} skipped={} fraction={:.4}",
            r.ell, r.n, r.d, r.trials, r.success, r.skipped, r.fraction
        );
    }
    if let Some(path) = out {
        emit(&rows, Format::from_path(path), path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sample { rank, density, length, seed, out } => sample(rank, &density, length, seed, out.as_deref())?,
        Command::Check { input, lambda } => check(&input, &lambda)?,
        Command::Wp { input, word, diagram } => wp(&input, &word, diagram.as_deref())?,
        Command::Ball { input, radius, verify, report } => ball(&input, radius, &verify, report.as_deref())?,
        Command::Diagram { input, diagram: file } => return diagram(&input, &file),
        Command::Sentence { input, rank, sentence: file, ball, budget, json } => {
            sentence(input.as_deref(), rank, &file, ball, budget, json)?
        }
        Command::Bounds { k, r, d, eps, l, q, rank, relators, json } => {
            bounds(k, r, &d, &eps, l, q, rank, relators, json)?
        }
        Command::Unify { system, lengths, boundary, relators, length, json } => {
            unify(&system, &lengths, boundary.as_deref(), relators, length, json)?
        }
        Command::Mc { config, out } => mc(&config, out.as_deref())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
