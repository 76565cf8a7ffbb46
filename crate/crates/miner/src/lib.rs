//! Finds candidate resource-leak fix commits in a version-control history
//! by keyword search over commit logs and added diff lines.

mod porter;

use std::path::{Path, PathBuf};
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem_word;

/// Commit-log keywords searched in stemmed form.
pub const LOG_KEYWORDS: [&str; 10] =
    ["leak", "leakage", "release", "recycle", "cancel", "unload", "unlock", "unmount", "unregister", "close"];

/// Literal substrings marking a release call on an added diff line.
pub const DIFF_SIGNATURES: [&str; 11] = [
    ".close(",
    ".release(",
    ".removeUpdates(",
    ".unlock(",
    ".stop(",
    ".abandonAudioFocus(",
    ".cancel(",
    ".disableNetwork(",
    ".stopPreview(",
    ".stopFaceDetection(",
    ".unregisterListener(",
];

/// Version-bump and issue-closing phrases removed from logs before
/// matching.
pub const DEFAULT_REMOVAL_PATTERNS: [&str; 2] = ["release (v|ver)?[0-9]+", "close issue #?[0-9]+"];

/// Forms of the default patterns that match canonicalized text, where
/// `v1.0.1` has become `v1 0 1` and `#168` has become `168`. A version has
/// at most three numeric parts, so a phrase never swallows a number that
/// follows it.
const CANONICAL_REMOVAL_PATTERNS: [&str; 2] =
    [r"\brelease (?:v|ver)? ?[0-9]+(?: [0-9]+){0,2}\b", r"\bclose issue [0-9]+\b"];

pub const MAX_DIFF_BYTES: usize = 1_048_576;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("invalid removal pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("invalid miner config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("git history of {path}: {message}")]
    Git { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub log_keywords: Vec<String>,
    /// Always contains the default patterns; loaded patterns are appended.
    pub removal_patterns: Vec<String>,
    pub diff_signatures: Vec<String>,
    pub max_diff_bytes: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            log_keywords: LOG_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            removal_patterns: DEFAULT_REMOVAL_PATTERNS.iter().map(|s| s.to_string()).collect(),
            diff_signatures: DIFF_SIGNATURES.iter().map(|s| s.to_string()).collect(),
            max_diff_bytes: MAX_DIFF_BYTES,
        }
    }
}

impl MiningConfig {
    pub fn from_json_str(text: &str, path: &Path) -> Result<MiningConfig, MinerError> {
        let mut cfg: MiningConfig =
            serde_json::from_str(text).map_err(|source| MinerError::Config { path: path.into(), source })?;
        let mut patterns: Vec<String> = DEFAULT_REMOVAL_PATTERNS.iter().map(|s| s.to_string()).collect();
        for p in cfg.removal_patterns {
            if !patterns.contains(&p) {
                patterns.push(p);
            }
        }
        cfg.removal_patterns = patterns;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<MiningConfig, MinerError> {
        let text = std::fs::read_to_string(path).map_err(|source| MinerError::Io { path: path.into(), source })?;
        Self::from_json_str(&text, path)
    }
}

/// Lowercases, turns every non-alphanumeric character into a space and
/// collapses whitespace.
pub fn canonicalize(text: &str) -> String {
    let spaced: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
        .collect();
    collapse(&spaced)
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Compiled removal patterns.
#[derive(Debug, Clone)]
pub struct NoisePatterns {
    regexes: Vec<Regex>,
}

impl NoisePatterns {
    /// Compiles `patterns`; the default patterns are replaced by their
    /// canonical-text forms.
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<NoisePatterns, MinerError> {
        let mut regexes = Vec::with_capacity(patterns.len());
        for p in patterns {
            let p = p.as_ref();
            let source = match DEFAULT_REMOVAL_PATTERNS.iter().position(|d| *d == p) {
                Some(i) => CANONICAL_REMOVAL_PATTERNS[i],
                None => p,
            };
            let re = Regex::new(source)
                .map_err(|source| MinerError::InvalidPattern { pattern: p.to_string(), source })?;
            regexes.push(re);
        }
        Ok(NoisePatterns { regexes })
    }
}

impl Default for NoisePatterns {
    fn default() -> Self {
        NoisePatterns::new(&DEFAULT_REMOVAL_PATTERNS).expect("default patterns compile")
    }
}

/// Deletes every match of every pattern, repeating until nothing matches.
pub fn remove_noise(text: &str, patterns: &NoisePatterns) -> String {
    let mut cur = collapse(text);
    loop {
        let mut next = cur.clone();
        for re in &patterns.regexes {
            next = re.replace_all(&next, "").into_owned();
        }
        let next = collapse(&next);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    #[serde(rename = "id")]
    pub commit_id: String,
    pub log: String,
    pub diff: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchReason {
    Log,
    Diff,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub file: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCommit {
    pub commit_id: String,
    pub matched_log_stems: Vec<String>,
    pub matched_diff_lines: Vec<DiffLine>,
    pub reason: MatchReason,
    /// The diff exceeded the size cutoff and was not scanned.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub diff_skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerDiagnostic {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commit_id: Option<String>,
    /// 1-based line in the diff or input file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffScan {
    pub lines: Vec<DiffLine>,
    pub malformed: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MineOutput {
    pub candidates: Vec<CandidateCommit>,
    pub diagnostics: Vec<MinerDiagnostic>,
}

/// A compiled [`MiningConfig`].
#[derive(Debug, Clone)]
pub struct Miner {
    config: MiningConfig,
    noise: NoisePatterns,
    /// `(keyword, stem)` pairs.
    keywords: Vec<(String, String)>,
}

fn hunk_counts(header: &str) -> Option<(usize, usize)> {
    let rest = header.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(" +")?;
    let (new, _) = rest.split_once(" @@")?;
    let count = |range: &str| -> Option<usize> {
        match range.split_once(',') {
            Some((start, n)) => {
                start.parse::<usize>().ok()?;
                n.parse().ok()
            }
            None => range.parse::<usize>().ok().map(|_| 1),
        }
    };
    Some((count(old)?, count(new)?))
}

fn header_path(rest: &str) -> String {
    let p = rest.split('\t').next().unwrap_or(rest).trim_end();
    p.strip_prefix("a/").or_else(|| p.strip_prefix("b/")).unwrap_or(p).to_string()
}

impl Miner {
    pub fn new(config: MiningConfig) -> Result<Miner, MinerError> {
        let noise = NoisePatterns::new(&config.removal_patterns)?;
        let keywords = config.log_keywords.iter().map(|k| (k.clone(), stem_word(&canonicalize(k)))).collect();
        Ok(Miner { config, noise, keywords })
    }

    pub fn config(&self) -> &MiningConfig {
        &self.config
    }

    /// Keywords whose stems occur among the stemmed tokens of the cleaned
    /// log, in configuration order.
    pub fn match_log(&self, log: &str) -> Vec<String> {
        let cleaned = remove_noise(&canonicalize(log), &self.noise);
        let stems: std::collections::BTreeSet<String> = cleaned.split(' ').map(stem_word).collect();
        self.keywords.iter().filter(|(_, s)| stems.contains(s)).map(|(k, _)| k.clone()).collect()
    }

    /// Added lines containing a diff signature, attributed to the file of
    /// their hunk. Lines that break hunk accounting are reported and
    /// skipped.
    pub fn scan_diff(&self, diff: &str) -> DiffScan {
        let mut out = DiffScan::default();
        let hunked = diff.lines().any(|l| l.starts_with("@@ "));
        let mut old_path = String::new();
        let mut file = String::new();
        let (mut old_left, mut new_left) = (0usize, 0usize);
        for (i, raw) in diff.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let lineno = i + 1;
            let in_hunk = old_left > 0 || new_left > 0;
            let mut added = false;
            if in_hunk {
                match line.chars().next() {
                    Some('+') if new_left > 0 => {
                        new_left -= 1;
                        added = true;
                    }
                    Some('-') if old_left > 0 => old_left -= 1,
                    Some(' ') | None if old_left > 0 && new_left > 0 => {
                        old_left -= 1;
                        new_left -= 1;
                    }
                    Some('\\') => {}
                    _ => {
                        out.malformed.push((lineno, format!("line does not fit the hunk for {file}")));
                        old_left = 0;
                        new_left = 0;
                    }
                }
            } else if let Some(rest) = line.strip_prefix("diff --git ") {
                let b = rest.rsplit_once(" b/").map_or(rest, |(_, b)| b);
                file = b.to_string();
                old_path.clone_from(&file);
            } else if let Some(rest) = line.strip_prefix("--- ") {
                old_path = header_path(rest);
            } else if let Some(rest) = line.strip_prefix("+++ ") {
                let p = header_path(rest);
                file = if p == "/dev/null" { old_path.clone() } else { p };
            } else if line.starts_with("@@") {
                match hunk_counts(line) {
                    Some((o, n)) => (old_left, new_left) = (o, n),
                    None => out.malformed.push((lineno, format!("bad hunk header {line:?}"))),
                }
            } else if line.starts_with('+') {
                if hunked {
                    out.malformed.push((lineno, "added line outside any hunk".into()));
                } else {
                    added = true;
                }
            }
            if !added || line.starts_with("++") {
                continue;
            }
            let text = &line[1..];
            if self.config.diff_signatures.iter().any(|s| text.contains(s.as_str())) {
                out.lines.push(DiffLine { file: file.clone(), text: text.trim_end().to_string() });
            }
        }
        if old_left > 0 || new_left > 0 {
            out.malformed.push((diff.lines().count(), format!("hunk for {file} ends early")));
        }
        out
    }

    /// Candidate for one commit, or `None` when neither log nor diff match.
    pub fn evaluate(&self, commit: &CommitRecord, diagnostics: &mut Vec<MinerDiagnostic>) -> Option<CandidateCommit> {
        let log_hits = self.match_log(&commit.log);
        let matched_log_stems: Vec<String> = log_hits.iter().map(|k| stem_word(&canonicalize(k))).collect();
        let diff_skipped = commit.diff.len() > self.config.max_diff_bytes;
        let matched_diff_lines = if diff_skipped {
            diagnostics.push(MinerDiagnostic {
                commit_id: Some(commit.commit_id.clone()),
                line: None,
                message: format!(
                    "diff of {} bytes exceeds {} bytes; matched on log only",
                    commit.diff.len(),
                    self.config.max_diff_bytes
                ),
            });
            Vec::new()
        } else {
            let scan = self.scan_diff(&commit.diff);
            diagnostics.extend(scan.malformed.into_iter().map(|(line, message)| MinerDiagnostic {
                commit_id: Some(commit.commit_id.clone()),
                line: Some(line),
                message: format!("malformed diff: {message}"),
            }));
            scan.lines
        };
        let reason = match (matched_log_stems.is_empty(), matched_diff_lines.is_empty()) {
            (true, true) => return None,
            (false, true) => MatchReason::Log,
            (true, false) => MatchReason::Diff,
            (false, false) => MatchReason::Both,
        };
        Some(CandidateCommit {
            commit_id: commit.commit_id.clone(),
            matched_log_stems,
            matched_diff_lines,
            reason,
            diff_skipped,
        })
    }

    /// Candidates in history order.
    pub fn mine(&self, history: &[CommitRecord]) -> MineOutput {
        let mut out = MineOutput::default();
        for c in history {
            if let Some(cand) = self.evaluate(c, &mut out.diagnostics) {
                out.candidates.push(cand);
            }
        }
        out
    }
}

/// Parses a JSON-lines export of commits. Malformed lines are reported
/// and skipped.
pub fn parse_jsonl(text: &str) -> (Vec<CommitRecord>, Vec<MinerDiagnostic>) {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        id: String,
        log: String,
        diff: String,
    }
    let mut commits = Vec::new();
    let mut diags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let diag = |message: String| MinerDiagnostic { commit_id: None, line: Some(i + 1), message };
        match serde_json::from_str::<Row>(line) {
            Ok(r) if r.id.is_empty() => diags.push(diag("commit with empty id".into())),
            Ok(r) => commits.push(CommitRecord { commit_id: r.id, log: r.log, diff: r.diff }),
            Err(e) => diags.push(diag(format!("malformed commit record: {e}"))),
        }
    }
    (commits, diags)
}

pub fn read_jsonl(path: &Path) -> Result<(Vec<CommitRecord>, Vec<MinerDiagnostic>), MinerError> {
    let text = std::fs::read_to_string(path).map_err(|source| MinerError::Io { path: path.into(), source })?;
    Ok(parse_jsonl(&text))
}

const RECORD_SEP: char = '\u{1e}';
const FIELD_SEP: char = '\u{1f}';

/// Splits `git log -p` output produced with [`GIT_LOG_FORMAT`].
fn parse_git_log(out: &str) -> Vec<CommitRecord> {
    out.split(RECORD_SEP)
        .filter_map(|rec| {
            let mut parts = rec.splitn(3, FIELD_SEP);
            let id = parts.next()?.trim().to_string();
            let log = parts.next()?.trim_end().to_string();
            let diff = parts.next().unwrap_or("").trim_start_matches('\n').to_string();
            (!id.is_empty()).then_some(CommitRecord { commit_id: id, log, diff })
        })
        .collect()
}

const GIT_LOG_FORMAT: &str = "--format=%x1e%H%x1f%B%x1f";

/// Commits of the working copy at `dir`, oldest first, via the `git`
/// command.
pub fn read_git_history(dir: &Path) -> Result<Vec<CommitRecord>, MinerError> {
    let err = |message: String| MinerError::Git { path: dir.into(), message };
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "core.quotepath=off", "log", "--reverse", "-p", "--no-color", "--no-ext-diff", GIT_LOG_FORMAT])
        .output()
        .map_err(|e| err(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(err(String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    Ok(parse_git_log(&String::from_utf8_lossy(&out.stdout)))
}
