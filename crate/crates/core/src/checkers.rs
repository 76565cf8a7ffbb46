//! Leak checkers built on the CFG and dataflow results, and the driver that
//! runs them over a source tree.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::dataflow::{
    analyze, binding_of, classify_extent, classify_extent_at, Analysis, Binding, Extractor, FlowEventKind, Key,
    LeakExtent, MethodContext,
};
use crate::java::cfg::{Cfg, EdgeLabel, NodeId, NodeKind};
use crate::java::ir::{BinOp, Call, Expr, LValue, LocalId, Receiver, VarRef};
use crate::java::{build_cfg, lifecycle_role, parse_unit, ClassDecl, LifecycleSide, MethodDecl, SourceUnit};
use crate::registry::{ConsequenceKind, Registry, SpecId};

/// Source files larger than this are skipped.
pub const MAX_FILE_BYTES: u64 = 2 * 1024 * 1024;

const CURSOR: &str = "android.database.Cursor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckerId {
    MoveToFirst,
    GetCount,
    SwapCursor,
    LostReference,
    LackingReference,
    LifecyclePairing,
    ReacquireCounted,
}

impl CheckerId {
    pub const ALL: [CheckerId; 7] = [
        CheckerId::MoveToFirst,
        CheckerId::GetCount,
        CheckerId::SwapCursor,
        CheckerId::LostReference,
        CheckerId::LackingReference,
        CheckerId::LifecyclePairing,
        CheckerId::ReacquireCounted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckerId::MoveToFirst => "move_to_first",
            CheckerId::GetCount => "get_count",
            CheckerId::SwapCursor => "swap_cursor",
            CheckerId::LostReference => "lost_reference",
            CheckerId::LackingReference => "lacking_reference",
            CheckerId::LifecyclePairing => "lifecycle_pairing",
            CheckerId::ReacquireCounted => "reacquire_counted",
        }
    }
}

impl fmt::Display for CheckerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckerId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown checker `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub checker: CheckerId,
    pub class: String,
    pub file: String,
    pub method: String,
    pub line: u32,
    pub resource_class: String,
    pub consequence: ConsequenceKind,
    pub extent: LeakExtent,
    pub confidence: Confidence,
    pub message: String,
    /// Variable, field or call the finding is about; only used to merge
    /// duplicates.
    #[serde(skip)]
    pub binding: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<u32>,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub checkers: BTreeSet<CheckerId>,
    /// Keep findings that rest on wildcard signature matches.
    pub include_low: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { checkers: CheckerId::ALL.into_iter().collect(), include_low: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<Diagnostic>,
    pub files_scanned: usize,
}

/// Everything known about one analyzed method.
struct MethodFacts<'a> {
    unit: &'a SourceUnit,
    class: &'a ClassDecl,
    method: &'a MethodDecl,
    cfg: Cfg,
    ctx: MethodContext,
    analysis: Analysis,
}

impl<'a> MethodFacts<'a> {
    fn extractor<'r>(&'r self, reg: &'r Registry) -> Extractor<'r> {
        Extractor { ctx: &self.ctx, reg }
    }

    fn finding(&self, reg: &Registry, checker: CheckerId, spec: SpecId, line: u32) -> Finding {
        let s = reg.spec(spec);
        Finding {
            checker,
            class: self.class.name.clone(),
            file: self.unit.path.to_string_lossy().replace('\\', "/"),
            method: self.method.name.clone(),
            line,
            resource_class: s.class_name.clone(),
            consequence: s.consequence,
            extent: LeakExtent::Complete,
            confidence: Confidence::High,
            message: String::new(),
            binding: String::new(),
        }
    }

    fn confidence(&self, key_sites: Option<&BTreeSet<NodeId>>, spec: SpecId) -> Confidence {
        let high = key_sites.map_or(true, |s| self.analysis.confidence_high(s, spec));
        if high {
            Confidence::High
        } else {
            Confidence::Low
        }
    }
}

fn calls_in(kind: &NodeKind) -> Vec<&Call> {
    fn collect<'a>(e: &'a Expr, out: &mut Vec<&'a Call>) {
        e.walk(&mut |x| {
            if let Expr::Call(c) = x {
                out.push(c);
            }
        });
    }
    let mut out = Vec::new();
    for e in kind.exprs() {
        collect(e, &mut out);
    }
    out
}

/// Whether some node reachable from `starts` releases `binding`.
fn release_reachable(cfg: &Cfg, ex: &Extractor<'_>, starts: &[NodeId], binding: &Binding, spec: SpecId) -> bool {
    let mut seen = vec![false; cfg.len()];
    let mut work: VecDeque<NodeId> = starts.iter().copied().collect();
    while let Some(n) = work.pop_front() {
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        if calls_in(&cfg.node(n).kind).iter().any(|c| ex.releases_binding(c, binding, Some(spec))) {
            return true;
        }
        work.extend(cfg.successors(n).map(|e| e.to));
    }
    false
}

/// Boolean locals assigned exactly once, mapped to the assigned value.
fn single_assignments(cfg: &Cfg) -> HashMap<LocalId, &Expr> {
    let mut seen: HashMap<LocalId, (usize, &Expr)> = HashMap::new();
    for node in cfg.nodes() {
        if let NodeKind::Assign { target: LValue::Var(VarRef::Local(id)), value } = &node.kind {
            let e = seen.entry(*id).or_insert((0, value));
            e.0 += 1;
        }
    }
    seen.into_iter().filter(|(_, (n, _))| *n == 1).map(|(k, (_, v))| (k, v)).collect()
}

/// How a condition behaves when the cursor it inspects is empty.
struct EmptyTest<'e> {
    /// Recognizes the primitive test and returns the cursor binding and the
    /// value the test takes on an empty cursor.
    atom: &'e dyn Fn(&Expr) -> Option<(Binding, bool)>,
    forwards: HashMap<LocalId, &'e Expr>,
}

impl EmptyTest<'_> {
    /// `Some((cursor, value))` where `value` is the whole condition's value on
    /// an empty cursor, `None` inside when it depends on other operands.
    fn eval(&self, e: &Expr, depth: u32) -> Option<(Binding, Option<bool>)> {
        if depth > 8 {
            return None;
        }
        if let Some((b, v)) = (self.atom)(e) {
            return Some((b, Some(v)));
        }
        match e {
            Expr::Not(inner) => self.eval(inner, depth + 1).map(|(b, v)| (b, v.map(|x| !x))),
            Expr::Binary { op: op @ (BinOp::Eq | BinOp::Ne), lhs, rhs } => {
                let (lit, other) = match (lhs.as_bool(), rhs.as_bool()) {
                    (_, Some(l)) => (l, lhs),
                    (Some(l), _) => (l, rhs),
                    _ => return None,
                };
                let keep = (*op == BinOp::Eq) == lit;
                self.eval(other, depth + 1).map(|(b, v)| (b, v.map(|x| if keep { x } else { !x })))
            }
            Expr::Binary { op: op @ (BinOp::And | BinOp::Or), lhs, rhs } => {
                let absorbing = *op == BinOp::Or;
                let (b, v) = self.eval(lhs, depth + 1).or_else(|| self.eval(rhs, depth + 1))?;
                Some((b, if v == Some(absorbing) { v } else { None }))
            }
            Expr::Var(VarRef::Local(id)) => {
                let value = self.forwards.get(id)?;
                self.eval(value, depth + 1)
            }
            _ => None,
        }
    }
}

fn cursor_receiver(c: &Call, name: &str) -> Option<Binding> {
    if c.name != name || !c.args.is_empty() {
        return None;
    }
    match &c.receiver {
        Receiver::Expr(r) => match &**r {
            Expr::Var(v) => Some(binding_of(v)),
            _ => None,
        },
        _ => None,
    }
}

fn move_to_first_atom(e: &Expr) -> Option<(Binding, bool)> {
    match e {
        Expr::Call(c) => cursor_receiver(c, "moveToFirst").map(|b| (b, false)),
        _ => None,
    }
}

fn get_count_atom(e: &Expr) -> Option<(Binding, bool)> {
    let Expr::Binary { op, lhs, rhs } = e else { return None };
    let (call, k, op) = match (&**lhs, &**rhs) {
        (Expr::Call(c), k) => (c, k.as_int()?, *op),
        (k, Expr::Call(c)) => (c, k.as_int()?, op.flipped()),
        _ => return None,
    };
    let b = cursor_receiver(call, "getCount")?;
    let empty = match op {
        BinOp::Eq => 0 == k,
        BinOp::Ne => 0 != k,
        BinOp::Lt => 0 < k,
        BinOp::Le => 0 <= k,
        BinOp::Gt => 0 > k,
        BinOp::Ge => 0 >= k,
        _ => return None,
    };
    Some((b, empty))
}

fn binding_label(ctx: &MethodContext, b: &Binding) -> String {
    ctx.binding_name(b)
}

fn check_empty_branch(
    facts: &MethodFacts<'_>,
    reg: &Registry,
    checker: CheckerId,
    atom: &dyn Fn(&Expr) -> Option<(Binding, bool)>,
    out: &mut Vec<Finding>,
) {
    let Some(cursor) = reg.lookup(CURSOR) else { return };
    let cfg = &facts.cfg;
    let test = EmptyTest { atom, forwards: single_assignments(cfg) };
    let ex = facts.extractor(reg);
    for (n, node) in cfg.nodes().iter().enumerate() {
        let cond = match &node.kind {
            NodeKind::Branch(c) | NodeKind::LoopHead(Some(c)) => c,
            _ => continue,
        };
        let Some((b, Some(value))) = test.eval(cond, 0) else { continue };
        let key: Key = (b.clone(), cursor);
        let held = facts.analysis.in_envs[n].value(&key).filter(|v| v.state.is_leaking());
        let Some(held) = held else { continue };
        let label = if value { EdgeLabel::True } else { EdgeLabel::False };
        let targets: Vec<NodeId> = cfg.successors(n).filter(|e| e.label == label).map(|e| e.to).collect();
        if targets.is_empty() || release_reachable(cfg, &ex, &targets, &b, cursor) {
            continue;
        }
        let name = binding_label(&facts.ctx, &b);
        let mut f = facts.finding(reg, checker, cursor, node.line);
        f.extent = classify_extent(cfg, &facts.analysis, &key).extent.unwrap_or(LeakExtent::SomeNormalPaths);
        f.confidence = facts.confidence(Some(&held.sites), cursor);
        let test_name = if checker == CheckerId::MoveToFirst { "moveToFirst()" } else { "getCount()" };
        f.message = format!("cursor `{name}` is not closed on the branch where {test_name} reports it empty");
        f.binding = name;
        out.push(f);
    }
}

fn check_swap_cursor(facts: &MethodFacts<'_>, reg: &Registry, out: &mut Vec<Finding>) {
    let Some(cursor) = reg.lookup(CURSOR) else { return };
    let cfg = &facts.cfg;
    let ex = facts.extractor(reg);
    fn is_swap(e: &Expr) -> Option<&Call> {
        match e {
            Expr::Call(c) if c.name == "swapCursor" && c.args.len() == 1 => Some(c),
            _ => None,
        }
    }
    for (n, node) in cfg.nodes().iter().enumerate() {
        let (call, kept) = match &node.kind {
            NodeKind::Expr(e) => match is_swap(e) {
                Some(c) => (c, None),
                None => continue,
            },
            NodeKind::Assign { target: LValue::Var(v), value } => match is_swap(value) {
                Some(c) => (c, Some(binding_of(v))),
                None => continue,
            },
            _ => continue,
        };
        let message = match &kept {
            None => "cursor returned by swapCursor() is discarded without being closed".to_string(),
            Some(b) => {
                let succ: Vec<NodeId> = cfg.successors(n).map(|e| e.to).collect();
                if release_reachable(cfg, &ex, &succ, b, cursor) {
                    continue;
                }
                format!("old cursor `{}` returned by swapCursor() is never closed", binding_label(&facts.ctx, b))
            }
        };
        let adapter = ex
            .call_site_type(call)
            .or_else(|| match call.receiver {
                Receiver::Implicit | Receiver::Super => facts.class.superclass.clone(),
                _ => None,
            })
            .is_some_and(|t| t.split('<').next().unwrap_or(&t).ends_with("CursorAdapter"));
        let mut f = facts.finding(reg, CheckerId::SwapCursor, cursor, node.line);
        f.confidence = if adapter { Confidence::High } else { Confidence::Low };
        f.message = message;
        f.binding = kept.map_or_else(|| "swapCursor".into(), |b| binding_label(&facts.ctx, &b));
        out.push(f);
    }
}

fn check_events(facts: &MethodFacts<'_>, reg: &Registry, opts: &ScanOptions, out: &mut Vec<Finding>) {
    let cfg = &facts.cfg;
    for ev in &facts.analysis.events {
        let spec = reg.spec(ev.spec);
        let checker = match ev.kind {
            FlowEventKind::LostReference => CheckerId::LostReference,
            FlowEventKind::UnboundAcquire => CheckerId::LackingReference,
            FlowEventKind::ReacquireWhileHeld if spec.counted => CheckerId::ReacquireCounted,
            FlowEventKind::ReacquireWhileHeld => continue,
        };
        if !opts.checkers.contains(&checker) {
            continue;
        }
        let mut f = facts.finding(reg, checker, ev.spec, ev.line);
        f.confidence = facts.confidence(Some(&ev.sites), ev.spec);
        let simple = spec.simple_name();
        match (&ev.binding, ev.kind) {
            (Some(b), FlowEventKind::LostReference) => {
                let name = binding_label(&facts.ctx, b);
                let key = (b.clone(), ev.spec);
                f.extent = classify_extent_at(cfg, &facts.analysis, &key, ev.node)
                    .extent
                    .unwrap_or(LeakExtent::SomeNormalPaths);
                let from = ev
                    .sites
                    .iter()
                    .filter_map(|&s| facts.analysis.site(s, ev.spec).map(|x| x.line))
                    .min();
                f.message = match from {
                    Some(l) => format!("`{name}` is overwritten while still holding the {simple} acquired at line {l}"),
                    None => format!("`{name}` is overwritten while still holding a {simple}"),
                };
                f.binding = name;
            }
            (Some(b), _) => {
                let name = binding_label(&facts.ctx, b);
                let key = (b.clone(), ev.spec);
                f.extent = classify_extent(cfg, &facts.analysis, &key).extent.unwrap_or(LeakExtent::Complete);
                f.message = format!(
                    "{simple} `{name}` is acquired again while already held; release it before re-acquiring"
                );
                f.binding = name;
            }
            (None, _) => {
                f.message = format!("{simple} acquired here is never stored, so it can never be released");
                f.binding = format!("@{}", ev.node);
            }
        }
        out.push(f);
    }
}

/// Finds release calls for `binding` in `method`, following unqualified calls
/// into other methods of the same class.
fn releases_in_method(
    facts_of: &dyn Fn(&MethodDecl) -> Option<(Cfg, MethodContext)>,
    class: &ClassDecl,
    method: &MethodDecl,
    binding: &Binding,
    spec: SpecId,
    reg: &Registry,
    visited: &mut BTreeSet<(String, usize)>,
) -> bool {
    if !visited.insert((method.name.clone(), method.arity())) {
        return false;
    }
    let Some((cfg, ctx)) = facts_of(method) else { return false };
    let ex = Extractor { ctx: &ctx, reg };
    for node in cfg.nodes() {
        for c in calls_in(&node.kind) {
            if ex.releases_binding(c, binding, Some(spec)) {
                return true;
            }
            if matches!(c.receiver, Receiver::Implicit | Receiver::Expr(_)) {
                let on_this = match &c.receiver {
                    Receiver::Implicit => true,
                    Receiver::Expr(r) => matches!(**r, Expr::This),
                    _ => false,
                };
                if !on_this {
                    continue;
                }
                for helper in class.methods_named(&c.name).filter(|m| m.arity() == c.args.len()) {
                    if releases_in_method(facts_of, class, helper, binding, spec, reg, visited) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn check_lifecycle(
    unit: &SourceUnit,
    class: &ClassDecl,
    methods: &[MethodFacts<'_>],
    reg: &Registry,
    out: &mut Vec<Finding>,
) {
    let facts_of = |m: &MethodDecl| -> Option<(Cfg, MethodContext)> {
        if let Some(f) = methods.iter().find(|f| std::ptr::eq(f.method, m)) {
            return Some((f.cfg.clone(), f.ctx.clone()));
        }
        let cfg = build_cfg(m).ok()?;
        Some((cfg, MethodContext::new(unit, class, m)))
    };
    for facts in methods {
        let Some((_, pair, LifecycleSide::Acquirer)) = lifecycle_role(&facts.method.name, reg) else {
            continue;
        };
        let exit = &facts.analysis.in_envs[facts.cfg.normal_exit()];
        for ((b, spec), v) in exit.iter() {
            if !matches!(b, Binding::Field(_)) || !v.state.is_leaking() {
                continue;
            }
            let releasers: Vec<&MethodDecl> = class.methods_named(&pair.releaser).collect();
            let released = releasers.iter().any(|r| {
                releases_in_method(&facts_of, class, r, b, *spec, reg, &mut BTreeSet::new())
            });
            if released {
                continue;
            }
            let name = facts.ctx.binding_name(b);
            let line = v
                .sites
                .iter()
                .filter_map(|&s| facts.analysis.site(s, *spec).map(|x| x.line))
                .min()
                .unwrap_or(facts.method.start_line);
            let simple = reg.spec(*spec).simple_name();
            let mut f = facts.finding(reg, CheckerId::LifecyclePairing, *spec, line);
            f.confidence = facts.confidence(Some(&v.sites), *spec);
            f.message = if releasers.is_empty() {
                format!(
                    "{simple} `{name}` acquired in {} is not released: {} is not overridden",
                    pair.acquirer, pair.releaser
                )
            } else {
                format!("{simple} `{name}` acquired in {} is never released in {}", pair.acquirer, pair.releaser)
            };
            f.binding = name;
            out.push(f);
        }
    }
}

/// Runs the enabled checkers on one parsed compilation unit.
pub fn check_unit(unit: &SourceUnit, reg: &Registry, opts: &ScanOptions) -> (Vec<Finding>, Vec<Diagnostic>) {
    let mut findings = Vec::new();
    let mut diags = Vec::new();
    let file = unit.path.to_string_lossy().replace('\\', "/");
    for class in &unit.classes {
        let mut facts = Vec::new();
        for method in &class.methods {
            if method.body.is_none() {
                continue;
            }
            let cfg = match build_cfg(method) {
                Ok(c) => c,
                Err(e) => {
                    diags.push(Diagnostic {
                        file: file.clone(),
                        line: Some(method.start_line),
                        severity: Severity::Error,
                        message: format!("{}.{}: {e}", class.name, method.name),
                    });
                    continue;
                }
            };
            let ctx = MethodContext::new(unit, class, method);
            match analyze(&cfg, &ctx, reg) {
                Ok(analysis) => facts.push(MethodFacts { unit, class, method, cfg, ctx, analysis }),
                Err(e) => diags.push(Diagnostic {
                    file: file.clone(),
                    line: Some(method.start_line),
                    severity: Severity::Error,
                    message: format!("{}.{}: {e}", class.name, method.name),
                }),
            }
        }
        for f in &facts {
            if opts.checkers.contains(&CheckerId::MoveToFirst) {
                check_empty_branch(f, reg, CheckerId::MoveToFirst, &move_to_first_atom, &mut findings);
            }
            if opts.checkers.contains(&CheckerId::GetCount) {
                check_empty_branch(f, reg, CheckerId::GetCount, &get_count_atom, &mut findings);
            }
            if opts.checkers.contains(&CheckerId::SwapCursor) {
                check_swap_cursor(f, reg, &mut findings);
            }
            check_events(f, reg, opts, &mut findings);
        }
        if opts.checkers.contains(&CheckerId::LifecyclePairing) {
            check_lifecycle(unit, class, &facts, reg, &mut findings);
        }
    }
    (findings, diags)
}

/// Parses and checks one source text; `path` is the name used in findings.
pub fn check_source(text: &str, path: &str, reg: &Registry, opts: &ScanOptions) -> (Vec<Finding>, Vec<Diagnostic>) {
    match parse_unit(text, path) {
        Ok(unit) => check_unit(&unit, reg, opts),
        Err(e) => (
            Vec::new(),
            vec![Diagnostic {
                file: path.to_string(),
                line: Some(e.line),
                severity: Severity::Error,
                message: e.to_string(),
            }],
        ),
    }
}

/// Java files under `root` with their display paths relative to it.
fn java_files(root: &Path) -> Vec<(PathBuf, String)> {
    if root.is_file() {
        let name = root.file_name().map_or_else(|| root.to_string_lossy().into_owned(), |n| n.to_string_lossy().into_owned());
        return vec![(root.to_path_buf(), name)];
    }
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap_or(e.path());
            let display = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            (e.path().to_path_buf(), display)
        })
        .collect()
}

fn scan_file(path: &Path, display: &str, reg: &Registry, opts: &ScanOptions) -> (Vec<Finding>, Vec<Diagnostic>) {
    let diag = |severity, message: String| Diagnostic { file: display.to_string(), line: None, severity, message };
    match std::fs::metadata(path) {
        Ok(m) if m.len() > MAX_FILE_BYTES => {
            return (
                Vec::new(),
                vec![diag(Severity::Warning, format!("skipped: {} bytes exceeds the {MAX_FILE_BYTES}-byte limit", m.len()))],
            )
        }
        Ok(_) => {}
        Err(e) => return (Vec::new(), vec![diag(Severity::Error, e.to_string())]),
    }
    match std::fs::read(path) {
        Ok(bytes) => check_source(&String::from_utf8_lossy(&bytes), display, reg, opts),
        Err(e) => (Vec::new(), vec![diag(Severity::Error, e.to_string())]),
    }
}

/// Scans files and directories with the enabled checkers.
///
/// Work is spread over the current rayon pool. Findings are deduplicated and
/// ordered by file, line and checker regardless of scheduling.
pub fn run_all(roots: &[PathBuf], reg: &Registry, opts: &ScanOptions) -> ScanReport {
    let mut files = Vec::new();
    let mut diagnostics = Vec::new();
    for root in roots {
        if !root.exists() {
            diagnostics.push(Diagnostic {
                file: root.to_string_lossy().into_owned(),
                line: None,
                severity: Severity::Error,
                message: "no such file or directory".into(),
            });
            continue;
        }
        files.extend(java_files(root));
    }
    let results: Vec<_> = files.par_iter().map(|(p, d)| scan_file(p, d, reg, opts)).collect();
    let mut findings = Vec::new();
    for (f, d) in results {
        findings.extend(f);
        diagnostics.extend(d);
    }
    ScanReport { findings: finalize(findings, opts), diagnostics, files_scanned: files.len() }
}

/// Applies the confidence filter, merges duplicates and sorts.
pub fn finalize(findings: Vec<Finding>, opts: &ScanOptions) -> Vec<Finding> {
    let mut unique: BTreeMap<(String, u32, CheckerId, String), Finding> = BTreeMap::new();
    for f in findings {
        if !opts.checkers.contains(&f.checker) || (!opts.include_low && f.confidence == Confidence::Low) {
            continue;
        }
        unique.entry((f.file.clone(), f.line, f.checker, f.binding.clone())).or_insert(f);
    }
    unique.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::builtin_registry;

    fn scan(src: &str) -> Vec<Finding> {
        let reg = builtin_registry();
        let opts = ScanOptions::default();
        let (f, d) = check_source(src, "T.java", &reg, &opts);
        assert!(d.is_empty(), "{d:?}");
        finalize(f, &opts)
    }

    fn ids(f: &[Finding]) -> Vec<CheckerId> {
        f.iter().map(|x| x.checker).collect()
    }

    #[test]
    fn move_to_first_missing_close() {
        let f = scan(
            "class T { SQLiteDatabase db; void m() {\n Cursor c = db.query(\"t\");\n if (c.moveToFirst()) {\n use(c);\n c.close();\n }\n } }",
        );
        assert_eq!(ids(&f), [CheckerId::MoveToFirst]);
        assert_eq!(f[0].line, 3);
        assert_eq!(f[0].extent, LeakExtent::SomeNormalPaths);
    }

    #[test]
    fn move_to_first_closed_after() {
        let f = scan(
            "class T { SQLiteDatabase db; void m() { Cursor c = db.query(\"t\"); if (c.moveToFirst()) { use(c); } c.close(); } }",
        );
        assert!(f.is_empty(), "{f:?}");
    }

    #[test]
    fn negated_and_compared_forms() {
        for cond in ["!c.moveToFirst()", "c.moveToFirst() == false", "false == c.moveToFirst()"] {
            let src = format!(
                "class T {{ SQLiteDatabase db; void m() {{ Cursor c = db.query(\"t\"); if ({cond}) {{ return; }} c.close(); }} }}"
            );
            assert_eq!(ids(&scan(&src)), [CheckerId::MoveToFirst], "{cond}");
        }
    }

    #[test]
    fn get_count_forms() {
        for cond in ["c.getCount() > 0", "c.getCount() >= 1", "c.getCount() != 0", "0 < c.getCount()"] {
            let src = format!(
                "class T {{ SQLiteDatabase db; void m() {{ Cursor c = db.query(\"t\"); if ({cond}) {{ c.close(); }} }} }}"
            );
            assert_eq!(ids(&scan(&src)), [CheckerId::GetCount], "{cond}");
        }
        let src = "class T { SQLiteDatabase db; void m() { Cursor c = db.query(\"t\"); if (c.getCount() == 0) { return; } c.close(); } }";
        assert_eq!(ids(&scan(src)), [CheckerId::GetCount]);
    }

    #[test]
    fn swap_cursor_discarded() {
        let f = scan("class T { SimpleCursorAdapter adapter; void m(Cursor newC) { adapter.swapCursor(newC); } }");
        assert_eq!(ids(&f), [CheckerId::SwapCursor]);
        let f = scan(
            "class T { SimpleCursorAdapter adapter; void m(Cursor newC) { Cursor old = adapter.swapCursor(newC); if (old != null) old.close(); } }",
        );
        assert!(f.is_empty());
        let f = scan("class T { SimpleCursorAdapter adapter; void m(Cursor newC) { adapter.changeCursor(newC); } }");
        assert!(f.is_empty());
    }

    #[test]
    fn lost_and_lacking_reference() {
        let f = scan("class T { SQLiteDatabase db; void m() {\n Cursor cur = db.query(\"a\");\n cur = db.query(\"b\");\n cur.close(); } }");
        assert_eq!(ids(&f), [CheckerId::LostReference]);
        assert_eq!(f[0].line, 3);
        assert_eq!(f[0].extent, LeakExtent::Complete);
        let f = scan("class T { void m(File f) { new FileReader(f); } }");
        assert_eq!(ids(&f), [CheckerId::LackingReference]);
        let f = scan("class T { void m(File f) throws IOException { BufferedReader r = new BufferedReader(new FileReader(f)); r.readLine(); r.close(); } }");
        assert!(f.is_empty(), "{f:?}");
    }

    #[test]
    fn lacking_reference_in_activity() {
        let f = scan("class T extends Activity { void m(String name) { decode(openFileInput(name)); } }");
        assert_eq!(ids(&f), [CheckerId::LackingReference]);
        assert_eq!(f[0].resource_class, "java.io.FileInputStream");
    }

    #[test]
    fn lifecycle_pairing() {
        let f = scan(
            "class T extends Activity { SQLiteDatabase db; DbHelper helper;\n void onCreate(Bundle b) {\n db = SQLiteDatabase.openOrCreateDatabase(\"x\", null);\n }\n void onDestroy() { } }",
        );
        assert_eq!(ids(&f), [CheckerId::LifecyclePairing]);
        assert_eq!(f[0].line, 3);
        let f = scan(
            "class T extends Activity { SQLiteDatabase db;\n void onCreate(Bundle b) { db = SQLiteDatabase.openOrCreateDatabase(\"x\", null); }\n void onDestroy() { closeDb(); }\n void closeDb() { if (db != null) db.close(); } }",
        );
        assert!(f.is_empty(), "{f:?}");
    }

    #[test]
    fn reacquire_counted() {
        let f = scan(
            "class T { PowerManager.WakeLock wl; void onReceive() { for (int i = 0; i < n; i++) { wl.acquire(); } } }",
        );
        assert_eq!(ids(&f), [CheckerId::ReacquireCounted]);
        assert!(f[0].message.contains("release"));
        let f = scan("class T { PowerManager.WakeLock wl; void m() { wl.acquire(); work(); wl.release(); wl.acquire(); } }");
        assert!(f.is_empty());
    }

    #[test]
    fn low_confidence_hidden() {
        let src = "class T { Helper h; void m() { h.query(\"a\"); } }";
        assert!(scan(src).is_empty());
        let reg = builtin_registry();
        let opts = ScanOptions { include_low: true, ..Default::default() };
        let (f, _) = check_source(src, "T.java", &reg, &opts);
        assert_eq!(ids(&finalize(f, &opts)), [CheckerId::LackingReference]);
    }
}
