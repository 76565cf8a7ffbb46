//! The `leaklint` command line: `scan`, `mine`, `bench` and `stats`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use leaklint_core::bench::{evaluate, load_manifest, stats, Counts, Metrics, StatsReport};
use leaklint_core::checkers::{run_all, CheckerId, Confidence, Diagnostic, Finding, ScanOptions};
use leaklint_core::registry::{builtin_registry, load_registry, ConsequenceKind, Registry};
use leaklint_miner::{parse_jsonl, read_git_history, CandidateCommit, Miner, MinerDiagnostic, MiningConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming a registry file used when `--registry` is
/// absent.
pub const REGISTRY_ENV: &str = "LEAKLINT_REGISTRY";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "leaklint", version, about = "Resource-leak checker and leak-fix commit miner for Android/Java code")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze `.java` files under the given roots.
    Scan(ScanArgs),
    /// List candidate leak-fix commits of a git working copy or a JSON-lines export.
    Mine(MineArgs),
    /// Score a findings report against a bug manifest.
    Bench(BenchArgs),
    /// Summarize a bug manifest by class, consequence and extent.
    Stats(StatsArgs),
}

#[derive(Debug, clap::Args)]
pub struct ScanArgs {
    #[arg(required = true)]
    pub roots: Vec<PathBuf>,
    /// Registry file merged over the built-in one.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Comma-separated checkers to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub checkers: Vec<CheckerId>,
    /// Also report findings that rest on wildcard signature matches.
    #[arg(long)]
    pub include_low: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Worker threads (default: logical CPU count).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct MineArgs {
    /// A git working copy or a JSON-lines file of `{id, log, diff}` records.
    pub input: PathBuf,
    /// JSON miner configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// A `scan --format json` report or a JSON array of findings.
    pub findings: PathBuf,
    /// Manifest CSV.
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, clap::Args)]
pub struct StatsArgs {
    /// Manifest CSV.
    pub manifest: PathBuf,
    /// Registry used for entries without a consequence.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub files_scanned: usize,
    pub by_checker: BTreeMap<CheckerId, usize>,
    pub by_consequence: BTreeMap<ConsequenceKind, usize>,
}

#[derive(Debug, Serialize)]
pub struct ScanOutput<'a> {
    pub version: &'static str,
    pub registry_digest: String,
    pub findings: &'a [Finding],
    pub diagnostics: &'a [Diagnostic],
    pub summary: Summary,
}

/// Hex SHA-256 of the registry's canonical JSON.
pub fn registry_digest(reg: &Registry) -> String {
    hex::encode(Sha256::digest(reg.to_json().as_bytes()))
}

fn resolve_registry(flag: Option<&Path>) -> Result<Registry, String> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(REGISTRY_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    match path {
        Some(p) => load_registry(&p).map_err(|e| e.to_string()),
        None => Ok(builtin_registry()),
    }
}

fn check_root(root: &Path) -> Result<(), String> {
    let meta = std::fs::metadata(root).map_err(|e| format!("cannot read {}: {e}", root.display()))?;
    if meta.is_dir() {
        std::fs::read_dir(root).map_err(|e| format!("cannot read {}: {e}", root.display()))?;
    }
    Ok(())
}

fn summarize(findings: &[Finding], files_scanned: usize) -> Summary {
    let mut by_checker: BTreeMap<CheckerId, usize> = CheckerId::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut by_consequence: BTreeMap<ConsequenceKind, usize> =
        ConsequenceKind::ALL.into_iter().map(|c| (c, 0)).collect();
    for f in findings {
        *by_checker.entry(f.checker).or_default() += 1;
        *by_consequence.entry(f.consequence).or_default() += 1;
    }
    Summary { total: findings.len(), files_scanned, by_checker, by_consequence }
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn diag_line(d: &Diagnostic) -> String {
    let sev = serde_json::to_value(d.severity).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    match d.line {
        Some(l) => format!("{}:{l}: {sev}: {}", d.file, d.message),
        None => format!("{}: {sev}: {}", d.file, d.message),
    }
}

fn miner_diag_line(d: &MinerDiagnostic) -> String {
    let mut s = String::new();
    if let Some(id) = &d.commit_id {
        s.push_str(&format!("{id}: "));
    }
    if let Some(l) = d.line {
        s.push_str(&format!("line {l}: "));
    }
    s + &d.message
}

pub fn cmd_scan(args: &ScanArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let reg = match resolve_registry(args.registry.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    for root in &args.roots {
        if let Err(e) = check_root(root) {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    }
    let mut opts = ScanOptions { include_low: args.include_low, ..ScanOptions::default() };
    if !args.checkers.is_empty() {
        opts.checkers = args.checkers.iter().copied().collect();
    }
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            writeln!(err, "error: cannot start {jobs} workers: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let report = pool.install(|| run_all(&args.roots, &reg, &opts));
    for d in &report.diagnostics {
        writeln!(err, "{}", diag_line(d))?;
    }
    let summary = summarize(&report.findings, report.files_scanned);
    match args.format {
        Format::Json => write_json(
            out,
            &ScanOutput {
                version: VERSION,
                registry_digest: registry_digest(&reg),
                findings: &report.findings,
                diagnostics: &report.diagnostics,
                summary,
            },
        )?,
        Format::Text => {
            for f in &report.findings {
                writeln!(
                    out,
                    "{}:{}: {}: {}.{}: {} [{}, consequence {}, {}, {} confidence]",
                    f.file,
                    f.line,
                    f.checker,
                    f.class,
                    f.method,
                    f.message,
                    f.resource_class,
                    f.consequence.mark(),
                    f.extent.as_str(),
                    if f.confidence == Confidence::High { "high" } else { "low" },
                )?;
            }
            writeln!(out, "{} finding(s) in {} file(s)", summary.total, summary.files_scanned)?;
        }
    }
    Ok(if report.findings.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
}

pub fn cmd_mine(args: &MineArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let config = match &args.config {
        Some(p) => MiningConfig::load(p),
        None => Ok(MiningConfig::default()),
    };
    let miner = match config.and_then(Miner::new) {
        Ok(m) => m,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let loaded = if args.input.is_dir() {
        read_git_history(&args.input).map(|h| (h, Vec::new())).map_err(|e| e.to_string())
    } else {
        std::fs::read_to_string(&args.input)
            .map(|t| parse_jsonl(&t))
            .map_err(|e| format!("cannot read {}: {e}", args.input.display()))
    };
    let (history, mut diagnostics) = match loaded {
        Ok(x) => x,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let result = miner.mine(&history);
    diagnostics.extend(result.diagnostics);
    for d in &diagnostics {
        writeln!(err, "{}", miner_diag_line(d))?;
    }
    match args.format {
        Format::Json => write_json(out, &result.candidates)?,
        Format::Text => write_candidates(out, &result.candidates)?,
    }
    Ok(EXIT_OK)
}

fn write_candidates(out: &mut dyn Write, candidates: &[CandidateCommit]) -> std::io::Result<()> {
    for c in candidates {
        let reason = serde_json::to_value(c.reason).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        write!(out, "{} {reason}", c.commit_id)?;
        if !c.matched_log_stems.is_empty() {
            write!(out, " log: {}", c.matched_log_stems.join(", "))?;
        }
        if c.diff_skipped {
            write!(out, " (diff skipped)")?;
        }
        writeln!(out)?;
        for l in &c.matched_diff_lines {
            if l.file.is_empty() {
                writeln!(out, "    {}", l.text.trim())?;
            } else {
                writeln!(out, "    {}: {}", l.file, l.text.trim())?;
            }
        }
    }
    writeln!(out, "{} candidate(s)", candidates.len())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FindingsFile {
    Report { findings: Vec<Finding> },
    Bare(Vec<Finding>),
}

/// Reads a scan report or a bare array of findings.
pub fn load_findings(path: &Path) -> Result<Vec<Finding>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    match serde_json::from_str::<FindingsFile>(&text) {
        Ok(FindingsFile::Report { findings } | FindingsFile::Bare(findings)) => Ok(findings),
        Err(e) => Err(format!("{}: not a findings report: {e}", path.display())),
    }
}

/// Rounds to three decimals and formats like JSON (`1.0`, `0.667`).
fn ratio(x: f64) -> String {
    serde_json::to_string(&((x * 1000.0).round() / 1000.0)).unwrap_or_default()
}

fn counts_json(c: &Counts) -> serde_json::Value {
    json!({"tp": c.tp, "fp": c.fp, "fn": c.fn_, "precision": c.precision(), "recall": c.recall()})
}

fn metrics_json(m: &Metrics) -> serde_json::Value {
    let per: serde_json::Map<String, serde_json::Value> =
        m.per_checker.iter().map(|(k, c)| (k.to_string(), counts_json(c))).collect();
    json!({"overall": counts_json(&m.overall), "per_checker": per})
}

fn counts_line(c: &Counts) -> String {
    format!("tp={} fp={} fn={} precision={} recall={}", c.tp, c.fp, c.fn_, ratio(c.precision()), ratio(c.recall()))
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let findings = match load_findings(&args.findings) {
        Ok(f) => f,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let entries = match load_manifest(&args.manifest) {
        Ok(e) => e,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let m = evaluate(&findings, &entries);
    match args.format {
        Format::Json => write_json(out, &metrics_json(&m))?,
        Format::Text => {
            writeln!(out, "overall: {}", counts_line(&m.overall))?;
            for (c, counts) in &m.per_checker {
                writeln!(out, "{c}: {}", counts_line(counts))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn write_stats(out: &mut dyn Write, s: &StatsReport) -> std::io::Result<()> {
    writeln!(out, "total: {}", s.total)?;
    for (class, n) in &s.by_class {
        writeln!(out, "class {class}: {n}")?;
    }
    for (cons, n) in &s.by_consequence {
        writeln!(out, "consequence {cons}: {n}")?;
    }
    for (ext, share) in &s.by_extent {
        writeln!(out, "extent {ext}: {} ({:.1}%)", share.count, share.percent)?;
    }
    let split: Vec<String> = s.by_extent.iter().map(|(k, v)| format!("{k} {:.1}%", v.percent)).collect();
    writeln!(out, "extent split: {}", split.join(" / "))
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let reg = match resolve_registry(args.registry.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let entries = match load_manifest(&args.manifest) {
        Ok(e) => e,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FATAL);
        }
    };
    let report = stats(&entries, &reg);
    match args.format {
        Format::Json => write_json(out, &report)?,
        Format::Text => write_stats(out, &report)?,
    }
    Ok(EXIT_OK)
}

/// Parses `argv` and runs the selected command, returning the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Scan(a) => cmd_scan(a, out, err),
        Command::Mine(a) => cmd_mine(a, out, err),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::Stats(a) => cmd_stats(a, out, err),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_FATAL
    })
}
