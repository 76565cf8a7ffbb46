//! Benchmark manifests: loading, scoring findings against known leaks, and
//! summary statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::{CheckerId, Finding};
use crate::dataflow::LeakExtent;
use crate::registry::{builtin_registry, ConsequenceKind, Registry};

pub const MANIFEST_HEADER: [&str; 9] =
    ["app", "resource_class", "file", "method", "buggy_rev", "fix_rev", "report_url", "extent", "consequence"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{locus}: {message}")]
    Format { locus: String, message: String },
    #[error("row {row}: {message}")]
    Validation { row: usize, message: String },
}

/// One known leak in the benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub app: String,
    pub resource_class: String,
    pub file: String,
    /// Empty when the leak is not attributed to a single method.
    pub method: String,
    pub buggy_rev: String,
    pub fix_rev: String,
    pub report_url: Option<String>,
    pub extent: Option<LeakExtent>,
    pub consequence: Option<ConsequenceKind>,
}

fn fmt_err(row: usize, message: impl Into<String>) -> BenchError {
    BenchError::Format { locus: format!("row {row}"), message: message.into() }
}

/// Parses manifest CSV text. Rows are numbered from 1 after the header.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| BenchError::Format { locus: "header".into(), message: e.to_string() })?
        .clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(BenchError::Format {
            locus: "header".into(),
            message: format!("expected `{}`", MANIFEST_HEADER.join(",")),
        });
    }
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| fmt_err(row, e.to_string()))?;
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(fmt_err(row, format!("expected {} fields, found {}", MANIFEST_HEADER.len(), rec.len())));
        }
        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        for (i, name) in MANIFEST_HEADER.iter().enumerate() {
            let required = matches!(*name, "app" | "resource_class" | "file" | "buggy_rev");
            if required && field(i).is_empty() {
                return Err(fmt_err(row, format!("missing required field `{name}`")));
            }
        }
        let extent = match field(7).as_str() {
            "" => None,
            s => Some(LeakExtent::parse(s).ok_or_else(|| fmt_err(row, format!("bad extent `{s}`")))?),
        };
        let consequence = match field(8).as_str() {
            "" => None,
            s => Some(ConsequenceKind::from_mark(s).ok_or_else(|| fmt_err(row, format!("bad consequence `{s}`")))?),
        };
        let report_url = Some(field(6)).filter(|s| !s.is_empty());
        let entry = ManifestEntry {
            app: field(0),
            resource_class: field(1),
            file: field(2),
            method: field(3),
            buggy_rev: field(4),
            fix_rev: field(5),
            report_url,
            extent,
            consequence,
        };
        let key = (
            entry.app.clone(),
            entry.file.clone(),
            entry.method.clone(),
            entry.buggy_rev.clone(),
            entry.resource_class.clone(),
        );
        if !seen.insert(key) {
            return Err(BenchError::Validation { row, message: "duplicate entry".into() });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
    parse_manifest(&text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall: Counts,
    pub per_checker: BTreeMap<CheckerId, Counts>,
}

fn norm_path(p: &str) -> String {
    let p = p.replace('\\', "/");
    p.trim_start_matches("./").to_string()
}

/// Whether `f` reports the leak described by `e`.
pub fn matches(f: &Finding, e: &ManifestEntry) -> bool {
    if norm_path(&f.file) != norm_path(&e.file) || f.resource_class != e.resource_class {
        return false;
    }
    if e.method.is_empty() || e.method == f.method {
        return true;
    }
    let simple_class = f.class.rsplit(['.', '$']).next().unwrap_or(&f.class);
    e.method == format!("{}.{}", f.class, f.method) || e.method == format!("{simple_class}.{}", f.method)
}

/// Maximum one-to-one matching between findings and entries (Kuhn's
/// augmenting paths), so each finding and entry counts at most once.
fn max_matching(findings: &[&Finding], entries: &[&ManifestEntry]) -> usize {
    let adj: Vec<Vec<usize>> = findings
        .iter()
        .map(|f| (0..entries.len()).filter(|&j| matches(f, entries[j])).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; entries.len()];
    fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &j in &adj[i] {
            if std::mem::replace(&mut seen[j], true) {
                continue;
            }
            if owner[j].map_or(true, |k| augment(k, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut size = 0;
    for i in 0..findings.len() {
        let mut seen = vec![false; entries.len()];
        if augment(i, &adj, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

fn score(findings: &[&Finding], entries: &[&ManifestEntry]) -> Counts {
    let tp = max_matching(findings, entries);
    Counts { tp, fp: findings.len() - tp, fn_: entries.len() - tp }
}

/// The manifest entries a checker is expected to find.
pub fn in_scope(checker: CheckerId, e: &ManifestEntry, reg: &Registry) -> bool {
    let extent_ok = |allowed: &[LeakExtent]| e.extent.map_or(true, |x| allowed.contains(&x));
    match checker {
        CheckerId::MoveToFirst | CheckerId::GetCount => {
            e.resource_class == "android.database.Cursor" && extent_ok(&[LeakExtent::SomeNormalPaths])
        }
        CheckerId::SwapCursor => e.resource_class == "android.database.Cursor" && extent_ok(&[LeakExtent::Complete]),
        CheckerId::ReacquireCounted => reg.get(&e.resource_class).is_some_and(|s| s.counted),
        CheckerId::LostReference => extent_ok(&[LeakExtent::Complete, LeakExtent::SomeNormalPaths]),
        CheckerId::LackingReference | CheckerId::LifecyclePairing => extent_ok(&[LeakExtent::Complete]),
    }
}

/// Scores findings against the manifest entries of one revision.
pub fn evaluate(findings: &[Finding], entries: &[ManifestEntry]) -> Metrics {
    let reg = builtin_registry();
    let all_f: Vec<&Finding> = findings.iter().collect();
    let all_e: Vec<&ManifestEntry> = entries.iter().collect();
    let mut per_checker = BTreeMap::new();
    for c in CheckerId::ALL {
        let fs: Vec<&Finding> = findings.iter().filter(|f| f.checker == c).collect();
        let es: Vec<&ManifestEntry> = entries.iter().filter(|e| in_scope(c, e, &reg)).collect();
        per_checker.insert(c, score(&fs, &es));
    }
    Metrics { overall: score(&all_f, &all_e), per_checker }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    /// Percentage of the total, rounded half-up to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub by_class: BTreeMap<String, usize>,
    pub by_consequence: BTreeMap<String, usize>,
    pub by_extent: BTreeMap<String, Share>,
}

/// `count / total` as a percentage rounded half-up to one decimal place.
pub fn percent_1dp(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let tenths = (count as u128 * 2000 + total as u128) / (2 * total as u128);
    tenths as f64 / 10.0
}

pub const UNSPECIFIED: &str = "unspecified";

/// Counts by class, consequence and extent. Entries without a consequence
/// take the one the registry assigns to their class.
pub fn stats(entries: &[ManifestEntry], reg: &Registry) -> StatsReport {
    let total = entries.len();
    let mut by_class = BTreeMap::new();
    let mut by_consequence = BTreeMap::new();
    let mut extents: BTreeMap<String, usize> = BTreeMap::new();
    for e in entries {
        *by_class.entry(e.resource_class.clone()).or_insert(0) += 1;
        let cons = e.consequence.or_else(|| reg.get(&e.resource_class).map(|s| s.consequence));
        let label = cons.map_or(UNSPECIFIED, |c| c.mark());
        *by_consequence.entry(label.to_string()).or_insert(0) += 1;
        let ext = e.extent.map_or(UNSPECIFIED, |x| x.as_str());
        *extents.entry(ext.to_string()).or_insert(0) += 1;
    }
    let by_extent = extents
        .into_iter()
        .map(|(k, count)| (k, Share { count, percent: percent_1dp(count, total) }))
        .collect();
    StatsReport { total, by_class, by_consequence, by_extent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::Confidence;

    const HEADER: &str = "app,resource_class,file,method,buggy_rev,fix_rev,report_url,extent,consequence\n";

    fn finding(file: &str, class: &str, method: &str, rc: &str) -> Finding {
        Finding {
            checker: CheckerId::LostReference,
            class: class.into(),
            file: file.into(),
            method: method.into(),
            line: 1,
            resource_class: rc.into(),
            consequence: ConsequenceKind::MemoryWaste,
            extent: LeakExtent::Complete,
            confidence: Confidence::High,
            message: String::new(),
            binding: String::new(),
        }
    }

    #[test]
    fn parses_rows() {
        let text = format!("{HEADER}a,android.database.Cursor,src/A.java,m,r1,r2,,complete,I\nb,java.io.InputStream,B.java,,r1,r2,http://x,,\n");
        let m = parse_manifest(&text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].extent, Some(LeakExtent::Complete));
        assert_eq!(m[1].report_url.as_deref(), Some("http://x"));
        assert_eq!(m[1].consequence, None);
    }

    #[test]
    fn rejects_bad_header_missing_field_and_duplicates() {
        assert!(matches!(parse_manifest("app,file\n"), Err(BenchError::Format { .. })));
        let missing = format!("{HEADER}a,,A.java,m,r1,r2,,,\n");
        let err = parse_manifest(&missing).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        let dup = format!("{HEADER}a,C,A.java,m,r1,r2,,,\na,C,A.java,m,r1,r3,,,\n");
        assert!(matches!(parse_manifest(&dup), Err(BenchError::Validation { row: 2, .. })));
    }

    #[test]
    fn duplicate_findings_do_not_inflate_tp() {
        let text = format!("{HEADER}a,C,A.java,m,r1,r2,,,\n");
        let entries = parse_manifest(&text).unwrap();
        let f = finding("A.java", "A", "m", "C");
        let m = evaluate(&[f.clone(), f], &entries);
        assert_eq!(m.overall, Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn method_forms_and_empty_inputs() {
        let text = format!("{HEADER}a,C,A.java,A.m,r1,r2,,,\n");
        let entries = parse_manifest(&text).unwrap();
        assert!(matches(&finding("./A.java", "A", "m", "C"), &entries[0]));
        let m = evaluate(&[], &[]);
        assert_eq!(m.overall.precision(), 1.0);
        assert_eq!(m.overall.recall(), 1.0);
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(percent_1dp(191, 298), 64.1);
        assert_eq!(percent_1dp(51, 298), 17.1);
        assert_eq!(percent_1dp(56, 298), 18.8);
        assert_eq!(percent_1dp(1, 8), 12.5);
        assert_eq!(percent_1dp(1, 16), 6.3);
    }
}
