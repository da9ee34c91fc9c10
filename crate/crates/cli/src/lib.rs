//! Command-line front end: reads an assessment document, runs a check,
//! correction, extension or gain evaluation, prints a human-readable report
//! and optionally writes a JSON report.
//!
//! Exit codes: 0 coherent or success, 1 incoherent, 2 input error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_traits::Signed;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use coherence_core::coherence::{ChainRefutation, Refutation};
use coherence_core::correction::CorrectedValues;
use coherence_core::{
    check, correct, evaluate_gain, extension_interval, gain_sweep, parse_rational, Assessment, AtomMask, AtomSet,
    CorrectionOptions, Event, Kind, Limits, RuleRegistry, Universe, Verdict,
};
use num_rational::BigRational;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_RULE: &str = "brier";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCOHERENT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Digits printed for approximate values.
const DECIMAL_DIGITS: usize = 30;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Core(#[from] coherence_core::Error),
    #[error("{0}")]
    Usage(String),
}

fn field(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Field {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
pub struct DocumentOptions {
    pub rule: String,
    pub limits: Limits,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub assessment: Assessment,
    pub options: DocumentOptions,
}

fn parse_labels(universe: &Arc<Universe>, value: &Value, path: &str) -> Result<Event, CliError> {
    let items = value
        .as_array()
        .ok_or_else(|| field(path, "expected a list of world labels"))?;
    let mut labels = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let label = item
            .as_str()
            .ok_or_else(|| field(format!("{path}[{i}]"), "expected a string"))?;
        if universe.index_of(label).is_none() {
            return Err(field(format!("{path}[{i}]"), format!("unknown world label `{label}`")));
        }
        labels.push(label);
    }
    Ok(Event::from_labels(universe, labels)?)
}

fn parse_limit(options: &serde_json::Map<String, Value>, key: &str, default: usize) -> Result<usize, CliError> {
    match options.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| field(format!("options.{key}"), "expected a non-negative integer")),
    }
}

/// Parses and validates an assessment document.
pub fn parse_document(text: &str) -> Result<Document, CliError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root.as_object().ok_or_else(|| field("$", "expected a JSON object"))?;
    for key in obj.keys() {
        if !["worlds", "kind", "assessments", "options"].contains(&key.as_str()) {
            return Err(field(key.as_str(), "unknown field"));
        }
    }
    let worlds = obj
        .get("worlds")
        .ok_or_else(|| field("worlds", "missing field"))?
        .as_array()
        .ok_or_else(|| field("worlds", "expected a list of strings"))?;
    let mut labels = Vec::with_capacity(worlds.len());
    for (i, w) in worlds.iter().enumerate() {
        labels.push(
            w.as_str()
                .ok_or_else(|| field(format!("worlds[{i}]"), "expected a string"))?
                .to_string(),
        );
    }
    let universe = Universe::new(labels).map_err(|e| field("worlds", e.to_string()))?;
    let kind = match obj.get("kind") {
        None | Some(Value::Null) => Kind::Belief,
        Some(Value::String(s)) => s.parse::<Kind>().map_err(|e| field("kind", e))?,
        Some(_) => return Err(field("kind", "expected a string")),
    };
    let rows = obj
        .get("assessments")
        .ok_or_else(|| field("assessments", "missing field"))?
        .as_array()
        .ok_or_else(|| field("assessments", "expected a list"))?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let path = format!("assessments[{i}]");
        let row = row.as_object().ok_or_else(|| field(&path, "expected an object"))?;
        for key in row.keys() {
            if key != "event" && key != "value" {
                return Err(field(format!("{path}.{key}"), "unknown field"));
            }
        }
        let event = parse_labels(
            &universe,
            row.get("event")
                .ok_or_else(|| field(format!("{path}.event"), "missing field"))?,
            &format!("{path}.event"),
        )?;
        let value = match row.get("value") {
            Some(Value::String(s)) => parse_rational(s).map_err(|e| field(format!("{path}.value"), e.to_string()))?,
            Some(_) => {
                return Err(field(
                    format!("{path}.value"),
                    "expected a string such as \"3/8\" or \"0.375\"",
                ))
            }
            None => return Err(field(format!("{path}.value"), "missing field")),
        };
        if !coherence_core::rational::in_unit_interval(&value) {
            return Err(field(
                format!("{path}.value"),
                format!("value {value} is outside [0, 1]"),
            ));
        }
        parsed.push((event, value));
    }
    let empty = serde_json::Map::new();
    let options = match obj.get("options") {
        None | Some(Value::Null) => &empty,
        Some(Value::Object(o)) => o,
        Some(_) => return Err(field("options", "expected an object")),
    };
    for key in options.keys() {
        if !["rule", "chain_limit", "atom_limit", "tolerance"].contains(&key.as_str()) {
            return Err(field(format!("options.{key}"), "unknown field"));
        }
    }
    let rule = match options.get("rule") {
        None | Some(Value::Null) => DEFAULT_RULE.to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(field("options.rule", "expected a string")),
    };
    let defaults = Limits::default();
    let limits = Limits {
        atom_limit: parse_limit(options, "atom_limit", defaults.atom_limit)?,
        chain_limit: parse_limit(options, "chain_limit", defaults.chain_limit)?,
    };
    let tolerance = match options.get("tolerance") {
        None | Some(Value::Null) => coherence_core::correction::DEFAULT_TOLERANCE,
        Some(Value::Number(n)) => n.as_f64().expect("JSON numbers are finite"),
        Some(Value::String(s)) => {
            let r = parse_rational(s).map_err(|e| field("options.tolerance", e.to_string()))?;
            coherence_core::HighPrecision::from_rational(&r).to_f64()
        }
        Some(_) => return Err(field("options.tolerance", "expected a number")),
    };
    if tolerance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(field("options.tolerance", "must be positive"));
    }
    let assessment = Assessment::new(&universe, parsed, kind)?;
    Ok(Document {
        assessment,
        options: DocumentOptions {
            rule,
            limits,
            tolerance,
        },
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "coherence",
    version,
    about = "Coherence checks, Dutch books and corrections for belief assessments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Assessment document (JSON)
    pub file: PathBuf,
    /// Override the document's kind: belief, probability or necessity
    #[arg(long)]
    pub kind: Option<String>,
    /// Override the document's scoring rule
    #[arg(long)]
    pub rule: Option<String>,
    /// Also write the JSON report to this path
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Largest number of atoms for enumerating the generated algebra
    #[arg(long)]
    pub atom_limit: Option<usize>,
    /// Largest number of atoms for enumerating chains
    #[arg(long)]
    pub chain_limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide coherence; print a witness mass or a Dutch book
    Check(Common),
    /// Project the values onto the coherent set
    Correct(Common),
    /// Coherent range for one more event
    Extend {
        #[command(flatten)]
        common: Common,
        /// Comma-separated world labels of the new event
        #[arg(long)]
        target: String,
    },
    /// Gain of a stake vector on an observed event, or on all events
    Gain {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stakes, one per assessed event
        #[arg(long, allow_hyphen_values = true)]
        stakes: String,
        /// Comma-separated world labels of the observed event
        #[arg(long, conflicts_with = "sweep")]
        observed: Option<String>,
        /// Evaluate the gain on every non-empty event of the generated algebra
        #[arg(long)]
        sweep: bool,
    },
}

fn load(common: &Common) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(&common.file).map_err(|source| CliError::Io {
        path: common.file.clone(),
        source,
    })?;
    let mut doc = parse_document(&text)?;
    if let Some(kind) = &common.kind {
        let kind = kind.parse::<Kind>().map_err(|e| field("--kind", e))?;
        doc.assessment = doc.assessment.with_kind(kind);
    }
    if let Some(rule) = &common.rule {
        doc.options.rule = rule.clone();
    }
    if let Some(n) = common.atom_limit {
        doc.options.limits.atom_limit = n;
    }
    if let Some(n) = common.chain_limit {
        doc.options.limits.chain_limit = n;
    }
    Ok(doc)
}

fn labels_of(event: &Event) -> Vec<String> {
    event.labels().into_iter().map(str::to_string).collect()
}

fn mask_labels(atoms: &AtomSet, mask: AtomMask) -> Vec<String> {
    labels_of(&atoms.event_of(mask))
}

fn braces(labels: &[String]) -> String {
    format!("{{{}}}", labels.join(","))
}

fn parse_event_arg(universe: &Arc<Universe>, text: &str, flag: &str) -> Result<Event, CliError> {
    let labels: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    for label in &labels {
        if universe.index_of(label).is_none() {
            return Err(field(flag, format!("unknown world label `{label}`")));
        }
    }
    Ok(Event::from_labels(universe, labels)?)
}

#[derive(Serialize)]
struct MassEntry {
    event: Vec<String>,
    weight: String,
}

#[derive(Serialize)]
struct WitnessReport {
    mass: Vec<MassEntry>,
    chain: Option<Vec<Vec<String>>>,
}

#[derive(Serialize)]
struct BookReport {
    stakes: Vec<String>,
    gain_bound: String,
}

#[derive(Serialize)]
struct ChainBookReport {
    chain: Vec<Vec<String>>,
    stakes: Vec<String>,
    gain_bound: String,
}

#[derive(Serialize)]
struct RefutationReport {
    dutch_book: Option<BookReport>,
    per_chain: Vec<ChainBookReport>,
    chains_refuted: Option<u64>,
    chains_pruned: Option<u64>,
}

#[derive(Serialize)]
struct CheckReport {
    schema_version: u32,
    command: &'static str,
    kind: String,
    coherent: bool,
    events: Vec<Vec<String>>,
    values: Vec<String>,
    atoms: Vec<Vec<String>>,
    witness: Option<WitnessReport>,
    refutation: Option<RefutationReport>,
}

fn strings(values: &[BigRational]) -> Vec<String> {
    values.iter().map(ToString::to_string).collect()
}

fn book_report(book: &coherence_core::DutchBook) -> BookReport {
    BookReport {
        stakes: strings(&book.stakes),
        gain_bound: book.gain_bound.to_string(),
    }
}

fn chain_labels(atoms: &AtomSet, chain: &coherence_core::Chain) -> Vec<Vec<String>> {
    chain.elements().iter().map(|&m| mask_labels(atoms, m)).collect()
}

fn check_report(assessment: &Assessment, verdict: &Verdict) -> CheckReport {
    let atoms = &verdict.atoms;
    let witness = verdict.witness().map(|mass| WitnessReport {
        mass: mass
            .focal()
            .map(|(m, w)| MassEntry {
                event: mask_labels(atoms, m),
                weight: w.to_string(),
            })
            .collect(),
        chain: verdict.witness_chain().map(|c| chain_labels(atoms, c)),
    });
    let refutation = verdict.refutation().map(|r| {
        let per_chain = |chains: &[ChainRefutation]| -> Vec<ChainBookReport> {
            chains
                .iter()
                .map(|c| ChainBookReport {
                    chain: chain_labels(atoms, &c.chain),
                    stakes: strings(&c.dutch_book.stakes),
                    gain_bound: c.dutch_book.gain_bound.to_string(),
                })
                .collect()
        };
        match r {
            Refutation::Stakes(book) => RefutationReport {
                dutch_book: Some(book_report(book)),
                per_chain: Vec::new(),
                chains_refuted: None,
                chains_pruned: None,
            },
            Refutation::PerChain { chains, uniform } => RefutationReport {
                dutch_book: uniform.as_ref().map(book_report),
                per_chain: per_chain(chains),
                chains_refuted: Some(chains.len() as u64),
                chains_pruned: None,
            },
            Refutation::AllChainsInfeasible {
                chains,
                pruned,
                uniform,
            } => RefutationReport {
                dutch_book: uniform.as_ref().map(book_report),
                per_chain: Vec::new(),
                chains_refuted: Some(*chains),
                chains_pruned: Some(*pruned),
            },
        }
    });
    CheckReport {
        schema_version: SCHEMA_VERSION,
        command: "check",
        kind: verdict.kind.to_string(),
        coherent: verdict.is_coherent(),
        events: assessment.events().iter().map(labels_of).collect(),
        values: strings(assessment.values()),
        atoms: atoms.atoms().iter().map(labels_of).collect(),
        witness,
        refutation,
    }
}

fn render_check(report: &CheckReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind      {}", report.kind);
    let atoms: Vec<String> = report.atoms.iter().map(|a| braces(a)).collect();
    let _ = writeln!(out, "atoms     {}", atoms.join(" "));
    let _ = writeln!(
        out,
        "verdict   {}",
        if report.coherent { "coherent" } else { "incoherent" }
    );
    let width = report.events.iter().map(|e| braces(e).len()).max().unwrap_or(5).max(5);
    if let Some(w) = &report.witness {
        if let Some(chain) = &w.chain {
            let chain: Vec<String> = chain.iter().map(|e| braces(e)).collect();
            let _ = writeln!(out, "chain     {}", chain.join(" ⊂ "));
        }
        let _ = writeln!(out, "witness mass");
        for entry in &w.mass {
            let _ = writeln!(out, "  {:<width$}  {}", braces(&entry.event), entry.weight);
        }
    }
    if let Some(r) = &report.refutation {
        if let Some(book) = &r.dutch_book {
            let scope = if report.kind == "probability" { "atom" } else { "event" };
            let _ = writeln!(out, "dutch book (gain at most {} on every {scope})", book.gain_bound);
            let _ = writeln!(out, "  {:<width$}  {:<8}  stake", "event", "value");
            for ((e, v), s) in report.events.iter().zip(&report.values).zip(&book.stakes) {
                let _ = writeln!(out, "  {:<width$}  {:<8}  {}", braces(e), v, s);
            }
        }
        if let Some(n) = r.chains_refuted {
            let _ = writeln!(out, "no chain carries the values ({n} chains refuted)");
        }
        if let Some(p) = r.chains_pruned {
            let _ = writeln!(out, "  {p} chains ruled out by the cumulative test");
        }
        for c in &r.per_chain {
            let chain: Vec<String> = c.chain.iter().map(|e| braces(e)).collect();
            let _ = writeln!(
                out,
                "  chain {}: stakes [{}], gain at most {}",
                chain.join(" ⊂ "),
                c.stakes.join(", "),
                c.gain_bound
            );
        }
    }
    out
}

#[derive(Serialize)]
struct CorrectedRow {
    event: Vec<String>,
    original: String,
    corrected: String,
}

#[derive(Serialize)]
struct AssessmentOut {
    event: Vec<String>,
    value: String,
}

#[derive(Serialize)]
struct OptionsOut {
    rule: String,
    atom_limit: usize,
    chain_limit: usize,
    tolerance: f64,
}

#[derive(Serialize)]
struct DocumentOut {
    worlds: Vec<String>,
    kind: String,
    assessments: Vec<AssessmentOut>,
    options: OptionsOut,
}

#[derive(Serialize)]
struct CorrectReport {
    schema_version: u32,
    command: &'static str,
    kind: String,
    rule: String,
    exact: bool,
    rows: Vec<CorrectedRow>,
    divergence: String,
    weights: Vec<MassEntry>,
    weight_degeneracy: bool,
    chain: Option<Vec<Vec<String>>>,
    corrected_document: Option<DocumentOut>,
}

fn render_correct(report: &CorrectReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind        {}", report.kind);
    let _ = writeln!(out, "rule        {}", report.rule);
    if let Some(chain) = &report.chain {
        let chain: Vec<String> = chain.iter().map(|e| braces(e)).collect();
        let _ = writeln!(out, "chain       {}", chain.join(" ⊂ "));
    }
    let _ = writeln!(out, "divergence  {}", report.divergence);
    let width = report
        .rows
        .iter()
        .map(|r| braces(&r.event).len())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = writeln!(out, "  {:<width$}  {:<8}  corrected", "event", "value");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "  {:<width$}  {:<8}  {}",
            braces(&r.event),
            r.original,
            r.corrected
        );
    }
    let _ = writeln!(
        out,
        "weights{}",
        if report.weight_degeneracy {
            " (one representative; other weights give the same values)"
        } else {
            ""
        }
    );
    for w in &report.weights {
        let _ = writeln!(out, "  {:<width$}  {}", braces(&w.event), w.weight);
    }
    out
}

fn document_out(assessment: &Assessment, values: &[BigRational], options: &DocumentOptions) -> DocumentOut {
    DocumentOut {
        worlds: assessment.universe().labels().to_vec(),
        kind: assessment.kind().to_string(),
        assessments: assessment
            .events()
            .iter()
            .zip(values)
            .map(|(e, v)| AssessmentOut {
                event: labels_of(e),
                value: v.to_string(),
            })
            .collect(),
        options: OptionsOut {
            rule: options.rule.clone(),
            atom_limit: options.limits.atom_limit,
            chain_limit: options.limits.chain_limit,
            tolerance: options.tolerance,
        },
    }
}

#[derive(Serialize)]
struct ExtendReport {
    schema_version: u32,
    command: &'static str,
    kind: String,
    target: Vec<String>,
    lo: String,
    hi: String,
    pieces: Vec<[String; 2]>,
}

#[derive(Serialize)]
struct GainRow {
    observed: Vec<String>,
    gain: String,
}

#[derive(Serialize)]
struct GainReport {
    schema_version: u32,
    command: &'static str,
    stakes: Vec<String>,
    gains: Vec<GainRow>,
    max_gain: String,
}

/// Output of one command: exit code, human text and JSON report.
pub struct Outcome {
    pub code: i32,
    pub human: String,
    pub json: Option<Value>,
}

fn run_check(doc: &Document) -> Result<Outcome, CliError> {
    let verdict = check(&doc.assessment, &doc.options.limits)?;
    let report = check_report(&doc.assessment, &verdict);
    Ok(Outcome {
        code: if verdict.is_coherent() {
            EXIT_OK
        } else {
            EXIT_INCOHERENT
        },
        human: render_check(&report),
        json: Some(serde_json::to_value(&report)?),
    })
}

fn run_correct(doc: &Document) -> Result<Outcome, CliError> {
    let registry = RuleRegistry::default();
    let rule = registry.get(&doc.options.rule)?;
    let options = CorrectionOptions {
        limits: doc.options.limits,
        tolerance: doc.options.tolerance,
        ..CorrectionOptions::default()
    };
    let result = correct(&doc.assessment, rule.as_ref(), &options)?;
    let atoms = &result.atoms;
    let a = &doc.assessment;
    let (corrected, divergence, weights, document): (Vec<String>, String, Vec<MassEntry>, Option<DocumentOut>) =
        match &result.values {
            CorrectedValues::Exact {
                corrected,
                divergence,
                weights,
            } => (
                strings(corrected),
                divergence.to_string(),
                weights
                    .focal()
                    .map(|(m, w)| MassEntry {
                        event: mask_labels(atoms, m),
                        weight: w.to_string(),
                    })
                    .collect(),
                Some(document_out(a, corrected, &doc.options)),
            ),
            CorrectedValues::Approx {
                corrected,
                divergence,
                weights,
                ..
            } => (
                corrected.iter().map(|x| x.to_decimal(DECIMAL_DIGITS)).collect(),
                divergence.to_decimal(DECIMAL_DIGITS),
                weights
                    .iter()
                    .map(|(m, w)| MassEntry {
                        event: mask_labels(atoms, *m),
                        weight: w.to_decimal(DECIMAL_DIGITS),
                    })
                    .collect(),
                None,
            ),
        };
    let report = CorrectReport {
        schema_version: SCHEMA_VERSION,
        command: "correct",
        kind: result.kind.to_string(),
        rule: result.rule.clone(),
        exact: result.is_exact(),
        rows: a
            .events()
            .iter()
            .zip(a.values())
            .zip(&corrected)
            .map(|((e, v), c)| CorrectedRow {
                event: labels_of(e),
                original: v.to_string(),
                corrected: c.clone(),
            })
            .collect(),
        divergence,
        weights,
        weight_degeneracy: result.weight_degeneracy,
        chain: result.chain.as_ref().map(|c| chain_labels(atoms, c)),
        corrected_document: document,
    };
    Ok(Outcome {
        code: EXIT_OK,
        human: render_correct(&report),
        json: Some(serde_json::to_value(&report)?),
    })
}

fn run_extend(doc: &Document, target: &str) -> Result<Outcome, CliError> {
    let a = &doc.assessment;
    let target = parse_event_arg(a.universe(), target, "--target")?;
    match extension_interval(a, &target, &doc.options.limits) {
        Err(coherence_core::Error::Incoherent(kind)) => Ok(Outcome {
            code: EXIT_INCOHERENT,
            human: format!("the assessment is not coherent as a {kind} assessment; run `coherence correct` first\n"),
            json: None,
        }),
        Err(e) => Err(e.into()),
        Ok(interval) => {
            let report = ExtendReport {
                schema_version: SCHEMA_VERSION,
                command: "extend",
                kind: a.kind().to_string(),
                target: labels_of(&target),
                lo: interval.lo.to_string(),
                hi: interval.hi.to_string(),
                pieces: interval
                    .pieces
                    .iter()
                    .map(|(l, h)| [l.to_string(), h.to_string()])
                    .collect(),
            };
            let mut human = format!("{}  [{}, {}]\n", braces(&report.target), report.lo, report.hi);
            if report.pieces.len() > 1 {
                let pieces: Vec<String> = report.pieces.iter().map(|[l, h]| format!("[{l}, {h}]")).collect();
                let _ = writeln!(human, "  coherent values: {}", pieces.join(" ∪ "));
            }
            Ok(Outcome {
                code: EXIT_OK,
                human,
                json: Some(serde_json::to_value(&report)?),
            })
        }
    }
}

fn run_gain(doc: &Document, stakes: &str, observed: Option<&str>, sweep: bool) -> Result<Outcome, CliError> {
    let a = &doc.assessment;
    let stakes: Vec<BigRational> = stakes
        .split(',')
        .map(str::trim)
        .enumerate()
        .map(|(i, s)| parse_rational(s).map_err(|e| field(format!("--stakes[{i}]"), e.to_string())))
        .collect::<Result<_, _>>()?;
    if stakes.len() != a.len() {
        return Err(field(
            "--stakes",
            format!("{} stakes given for {} assessed events", stakes.len(), a.len()),
        ));
    }
    let rows: Vec<(Event, BigRational)> = match (observed, sweep) {
        (_, true) => gain_sweep(a, &stakes, &doc.options.limits)?,
        (Some(text), false) => {
            let event = parse_event_arg(a.universe(), text, "--observed")?;
            let gain = evaluate_gain(a, &stakes, &event)?;
            vec![(event, gain)]
        }
        (None, false) => return Err(CliError::Usage("give --observed EVENT or --sweep".into())),
    };
    let max = rows.iter().map(|(_, g)| g.clone()).max().expect("at least one row");
    let report = GainReport {
        schema_version: SCHEMA_VERSION,
        command: "gain",
        stakes: strings(&stakes),
        gains: rows
            .iter()
            .map(|(e, g)| GainRow {
                observed: labels_of(e),
                gain: g.to_string(),
            })
            .collect(),
        max_gain: max.to_string(),
    };
    let width = report
        .gains
        .iter()
        .map(|g| braces(&g.observed).len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut human = format!("  {:<width$}  gain\n", "observed");
    for g in &report.gains {
        let _ = writeln!(human, "  {:<width$}  {}", braces(&g.observed), g.gain);
    }
    let _ = writeln!(
        human,
        "max gain  {}{}",
        report.max_gain,
        if max.is_negative() { " (sure loss)" } else { "" }
    );
    Ok(Outcome {
        code: EXIT_OK,
        human,
        json: Some(serde_json::to_value(&report)?),
    })
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Check(c) | Command::Correct(c) => c,
        Command::Extend { common, .. } | Command::Gain { common, .. } => common,
    }
}

/// Runs a parsed command without writing anything.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let doc = load(common(&cli.command))?;
    match &cli.command {
        Command::Check(_) => run_check(&doc),
        Command::Correct(_) => run_correct(&doc),
        Command::Extend { target, .. } => run_extend(&doc, target),
        Command::Gain {
            stakes,
            observed,
            sweep,
            ..
        } => run_gain(&doc, stakes, observed.as_deref(), *sweep),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the command, printing the human report to `out` and errors to
/// `err`. Returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = execute(cli).and_then(|outcome| {
        if let (Some(path), Some(json)) = (&common(&cli.command).json, &outcome.json) {
            write_json(path, json)?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            let _ = out.write_all(outcome.human.as_bytes());
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "worlds": ["w1", "w2", "w3"],
        "kind": "belief",
        "assessments": [
            {"event": ["w1", "w2"], "value": "1/4"},
            {"event": ["w2", "w3"], "value": "1"},
            {"event": ["w2"], "value": "0.5"}
        ]
    }"#;

    #[test]
    fn parses_example() {
        let doc = parse_document(EXAMPLE).unwrap();
        assert_eq!(doc.assessment.len(), 3);
        assert_eq!(doc.assessment.values()[2].to_string(), "1/2");
        assert_eq!(doc.options.rule, "brier");
        assert_eq!(doc.assessment.kind(), Kind::Belief);
    }

    #[test]
    fn minimal_document_defaults_to_belief() {
        let doc = parse_document(r#"{"worlds":["w"],"assessments":[{"event":["w"],"value":"1"}]}"#).unwrap();
        assert_eq!(doc.assessment.kind(), Kind::Belief);
    }

    #[test]
    fn field_paths_in_errors() {
        let cases = [
            (
                r#"{"worlds":["w"],"assessments":[{"event":["w"],"value":"3/0"}]}"#,
                "assessments[0].value: invalid rational `3/0`",
            ),
            (
                r#"{"worlds":["w"],"assessments":[{"event":["x"],"value":"1"}]}"#,
                "assessments[0].event[0]: unknown world label `x`",
            ),
            (
                r#"{"worlds":["w"],"assessments":[{"event":["w"],"value":0.5}]}"#,
                "assessments[0].value: expected a string",
            ),
            (
                r#"{"worlds":["w"],"assessments":[{"event":["w"],"value":"3/2"}]}"#,
                "assessments[0].value: value 3/2 is outside [0, 1]",
            ),
            (
                r#"{"worlds":["w","w"],"assessments":[]}"#,
                "worlds: duplicate world label `w`",
            ),
            (
                r#"{"worlds":["w"],"kind":"fuzzy","assessments":[]}"#,
                "kind: unknown kind `fuzzy`",
            ),
            (
                r#"{"worlds":["w"],"assessments":[],"options":{"rule":3}}"#,
                "options.rule: expected a string",
            ),
            (r#"{"worlds":["w"],"assessments":[],"extra":1}"#, "extra: unknown field"),
        ];
        for (text, expected) in cases {
            let err = parse_document(text).unwrap_err().to_string();
            assert!(err.starts_with(expected), "{err} vs {expected}");
        }
        let err = parse_document("{\n  \"worlds\": [\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn reports_are_deterministic() {
        let doc = parse_document(EXAMPLE).unwrap();
        let a = serde_json::to_string(&run_check(&doc).unwrap().json).unwrap();
        let b = serde_json::to_string(&run_check(&doc).unwrap().json).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\":1"));
    }
}
