//! Control-flow graphs over the method IR.
//!
//! Every call may throw. Exception edges lead to the handlers of the
//! innermost enclosing `try`, then on to its `finally` and outward. A
//! `finally` block is copied once per way of leaving its region: one copy for
//! normal completion, one for exceptional completion (which resumes
//! propagation afterwards) and one per `return`, `break` or `continue` that
//! crosses it.

use std::collections::HashSet;

use thiserror::Error;

use super::ir::*;
use super::MethodDecl;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("malformed IR: {0}")]
    MalformedIr(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Entry,
    NormalExit,
    ExceptionalExit,
    Assign { target: LValue, value: Expr },
    Expr(Expr),
    Return(Option<Expr>),
    Throw(Expr),
    /// Two-way branch of an `if` or a `switch` case test.
    Branch(Expr),
    /// `None` for loops without a condition.
    LoopHead(Option<Expr>),
    TryEnter,
    CatchEnter { param: LocalId, types: Vec<String> },
    FinallyEnter,
    RegionExit,
}

impl NodeKind {
    /// Expressions evaluated at the node, in evaluation order.
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            NodeKind::Assign { target, value } => {
                let mut v = Vec::new();
                match target {
                    LValue::Field { owner, .. } => v.push(owner),
                    LValue::Other(e) => v.push(e),
                    LValue::Var(_) => {}
                }
                v.push(value);
                v
            }
            NodeKind::Expr(e) | NodeKind::Throw(e) | NodeKind::Branch(e) => vec![e],
            NodeKind::Return(Some(e)) | NodeKind::LoopHead(Some(e)) => vec![e],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub line: Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Seq,
    True,
    False,
    Exception,
    /// Leaves an exceptional `finally` copy to continue propagating.
    FinallyResume,
}

impl EdgeLabel {
    pub fn is_exceptional(self) -> bool {
        matches!(self, EdgeLabel::Exception | EdgeLabel::FinallyResume)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    succ: Vec<Vec<EdgeId>>,
    pred: Vec<Vec<EdgeId>>,
    back: Vec<bool>,
}

const ENTRY: NodeId = 0;
const NORMAL_EXIT: NodeId = 1;
const EXCEPTIONAL_EXIT: NodeId = 2;

impl Cfg {
    pub fn entry(&self) -> NodeId {
        ENTRY
    }

    pub fn normal_exit(&self) -> NodeId {
        NORMAL_EXIT
    }

    pub fn exceptional_exit(&self) -> NodeId {
        EXCEPTIONAL_EXIT
    }

    pub fn is_exit(&self, n: NodeId) -> bool {
        n == NORMAL_EXIT || n == EXCEPTIONAL_EXIT
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, n: NodeId) -> &Node {
        &self.nodes[n]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn succ_edges(&self, n: NodeId) -> &[EdgeId] {
        &self.succ[n]
    }

    pub fn pred_edges(&self, n: NodeId) -> &[EdgeId] {
        &self.pred[n]
    }

    pub fn successors(&self, n: NodeId) -> impl Iterator<Item = Edge> + '_ {
        self.succ[n].iter().map(move |&e| self.edges[e])
    }

    pub fn is_back_edge(&self, e: EdgeId) -> bool {
        self.back[e]
    }

    pub fn back_edges(&self) -> Vec<EdgeId> {
        (0..self.edges.len()).filter(|&e| self.back[e]).collect()
    }

    /// Reverse postorder from the entry.
    pub fn reverse_postorder(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(ENTRY, 0usize)];
        seen[ENTRY] = true;
        while let Some((n, i)) = stack.pop() {
            if let Some(&e) = self.succ[n].get(i) {
                stack.push((n, i + 1));
                let to = self.edges[e].to;
                if !seen[to] {
                    seen[to] = true;
                    stack.push((to, 0));
                }
            } else {
                order.push(n);
            }
        }
        order.reverse();
        order
    }

    fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Cfg {
        let mut succ = vec![Vec::new(); nodes.len()];
        let mut pred = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            succ[e.from].push(i);
            pred[e.to].push(i);
        }
        let mut cfg = Cfg { back: vec![false; edges.len()], nodes, edges, succ, pred };
        cfg.back = cfg.find_back_edges();
        cfg
    }

    // An edge is a back edge when it targets a node on the DFS stack.
    fn find_back_edges(&self) -> Vec<bool> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let mut mark = vec![Mark::White; self.nodes.len()];
        let mut back = vec![false; self.edges.len()];
        let mut stack = vec![(ENTRY, 0usize)];
        mark[ENTRY] = Mark::Grey;
        while let Some((n, i)) = stack.pop() {
            if let Some(&e) = self.succ[n].get(i) {
                stack.push((n, i + 1));
                let to = self.edges[e].to;
                match mark[to] {
                    Mark::White => {
                        mark[to] = Mark::Grey;
                        stack.push((to, 0));
                    }
                    Mark::Grey => back[e] = true,
                    Mark::Black => {}
                }
            } else {
                mark[n] = Mark::Black;
            }
        }
        back
    }
}

type Frontier = Vec<(NodeId, EdgeLabel)>;

struct TryFrame {
    in_body: bool,
    catches: Vec<NodeId>,
    catch_all: bool,
    finally: Option<Vec<Stmt>>,
    pending: Frontier,
}

#[derive(PartialEq)]
enum TargetKind {
    Loop,
    Switch,
    Block,
}

struct JumpTarget {
    label: Option<String>,
    kind: TargetKind,
    depth: usize,
    breaks: Frontier,
    continues: Frontier,
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    seen: HashSet<(NodeId, NodeId, EdgeLabel)>,
    frames: Vec<TryFrame>,
    targets: Vec<JumpTarget>,
    nlocals: usize,
}

fn constant_true(cond: &Option<Expr>) -> bool {
    cond.as_ref().map_or(true, |c| c.as_bool() == Some(true))
}

impl Builder {
    fn add_node(&mut self, kind: NodeKind, line: Line) -> Result<NodeId, CfgError> {
        let mut bad = None;
        for e in kind.exprs() {
            e.walk(&mut |x| {
                if let Expr::Var(VarRef::Local(id)) = x {
                    if id.0 as usize >= self.nlocals {
                        bad = Some(*id);
                    }
                }
            });
        }
        if let NodeKind::Assign { target: LValue::Var(VarRef::Local(id)), .. }
        | NodeKind::CatchEnter { param: id, .. } = &kind
        {
            if id.0 as usize >= self.nlocals {
                bad = Some(*id);
            }
        }
        if let Some(id) = bad {
            return Err(CfgError::MalformedIr(format!("line {line}: local #{} is not declared", id.0)));
        }
        self.nodes.push(Node { kind, line });
        Ok(self.nodes.len() - 1)
    }

    fn add_edge(&mut self, from: NodeId, to: NodeId, label: EdgeLabel) {
        if self.seen.insert((from, to, label)) {
            self.edges.push(Edge { from, to, label });
        }
    }

    fn connect(&mut self, front: Frontier, to: NodeId) {
        for (from, label) in front {
            self.add_edge(from, to, label);
        }
    }

    fn route_exception(&mut self, from: NodeId, label: EdgeLabel) {
        for i in (0..self.frames.len()).rev() {
            if self.frames[i].in_body {
                for c in self.frames[i].catches.clone() {
                    self.add_edge(from, c, label);
                }
                if self.frames[i].catch_all {
                    return;
                }
            }
            if self.frames[i].finally.is_some() {
                self.frames[i].pending.push((from, label));
                return;
            }
        }
        self.add_edge(from, EXCEPTIONAL_EXIT, label);
    }

    fn simple(&mut self, kind: NodeKind, line: Line, front: Frontier) -> Result<NodeId, CfgError> {
        let throws = kind.exprs().iter().any(|e| e.contains_call());
        let n = self.add_node(kind, line)?;
        self.connect(front, n);
        if throws {
            self.route_exception(n, EdgeLabel::Exception);
        }
        Ok(n)
    }

    /// Runs the `finally` blocks between the current position and try depth
    /// `depth`, innermost first.
    fn route_jump(&mut self, mut front: Frontier, depth: usize, line: Line) -> Result<Frontier, CfgError> {
        let mut i = self.frames.len();
        while i > depth {
            i -= 1;
            if let Some(fin) = self.frames[i].finally.clone() {
                let saved = self.frames.split_off(i);
                let r = self.finally_copy(&fin, front, line);
                self.frames.extend(saved);
                front = r?;
            }
        }
        Ok(front)
    }

    fn finally_copy(&mut self, fin: &[Stmt], front: Frontier, line: Line) -> Result<Frontier, CfgError> {
        let line = fin.first().map_or(line, |s| s.line);
        let f = self.add_node(NodeKind::FinallyEnter, line)?;
        self.connect(front, f);
        let out = self.block(fin, vec![(f, EdgeLabel::Seq)])?;
        if out.is_empty() {
            return Ok(out);
        }
        let end_line = fin.last().map_or(line, |s| s.line);
        let x = self.add_node(NodeKind::RegionExit, end_line)?;
        self.connect(out, x);
        Ok(vec![(x, EdgeLabel::Seq)])
    }

    fn block(&mut self, stmts: &[Stmt], mut front: Frontier) -> Result<Frontier, CfgError> {
        for s in stmts {
            front = self.stmt(s, front)?;
        }
        Ok(front)
    }

    fn find_target(&self, label: &Option<String>, continuing: bool) -> Option<usize> {
        (0..self.targets.len()).rev().find(|&i| {
            let t = &self.targets[i];
            let kind_ok = if continuing {
                t.kind == TargetKind::Loop
            } else {
                label.is_some() || t.kind != TargetKind::Block
            };
            kind_ok && (label.is_none() || t.label == *label)
        })
    }

    fn stmt(&mut self, s: &Stmt, front: Frontier) -> Result<Frontier, CfgError> {
        let line = s.line;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let n = self.simple(NodeKind::Assign { target: target.clone(), value: value.clone() }, line, front)?;
                Ok(vec![(n, EdgeLabel::Seq)])
            }
            StmtKind::Expr(e) => {
                let n = self.simple(NodeKind::Expr(e.clone()), line, front)?;
                Ok(vec![(n, EdgeLabel::Seq)])
            }
            StmtKind::Return(e) => {
                let n = self.simple(NodeKind::Return(e.clone()), line, front)?;
                let out = self.route_jump(vec![(n, EdgeLabel::Seq)], 0, line)?;
                self.connect(out, NORMAL_EXIT);
                Ok(Vec::new())
            }
            StmtKind::Throw(e) => {
                let n = self.add_node(NodeKind::Throw(e.clone()), line)?;
                self.connect(front, n);
                self.route_exception(n, EdgeLabel::Exception);
                Ok(Vec::new())
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let n = self.simple(NodeKind::Branch(cond.clone()), line, front)?;
                let mut out = self.block(then_branch, vec![(n, EdgeLabel::True)])?;
                out.extend(self.block(else_branch, vec![(n, EdgeLabel::False)])?);
                Ok(out)
            }
            StmtKind::Loop { label, kind, cond, body, update } => self.loop_stmt(label, *kind, cond, body, update, line, front),
            StmtKind::Switch { label, scrutinee, cases } => self.switch(label, scrutinee, cases, line, front),
            StmtKind::Try { body, catches, finally } => {
                let t = self.add_node(NodeKind::TryEnter, line)?;
                self.connect(front, t);
                let mut catch_nodes = Vec::new();
                for c in catches {
                    catch_nodes.push(self.add_node(NodeKind::CatchEnter { param: c.param, types: c.types.clone() }, c.line)?);
                }
                self.frames.push(TryFrame {
                    in_body: true,
                    catches: catch_nodes.clone(),
                    catch_all: catches.iter().any(CatchClause::catches_all),
                    finally: finally.clone(),
                    pending: Vec::new(),
                });
                let r = (|| {
                    let mut normal = self.block(body, vec![(t, EdgeLabel::Seq)])?;
                    self.frames.last_mut().expect("try frame").in_body = false;
                    for (c, &n) in catches.iter().zip(&catch_nodes) {
                        normal.extend(self.block(&c.body, vec![(n, EdgeLabel::Seq)])?);
                    }
                    Ok(normal)
                })();
                let frame = self.frames.pop().expect("try frame");
                let mut normal = r?;
                if let Some(fin) = &frame.finally {
                    if !normal.is_empty() {
                        normal = self.finally_copy(fin, normal, line)?;
                    }
                    if !frame.pending.is_empty() {
                        let end = self.finally_copy(fin, frame.pending, line)?;
                        for (n, _) in end {
                            self.route_exception(n, EdgeLabel::FinallyResume);
                        }
                    }
                }
                Ok(normal)
            }
            StmtKind::Labeled { label, body } => {
                self.targets.push(JumpTarget {
                    label: Some(label.clone()),
                    kind: TargetKind::Block,
                    depth: self.frames.len(),
                    breaks: Vec::new(),
                    continues: Vec::new(),
                });
                let r = self.block(body, front);
                let t = self.targets.pop().expect("jump target");
                let mut out = r?;
                out.extend(t.breaks);
                Ok(out)
            }
            StmtKind::Break(label) | StmtKind::Continue(label) => {
                let continuing = matches!(s.kind, StmtKind::Continue(_));
                let Some(i) = self.find_target(label, continuing) else {
                    let what = if continuing { "continue" } else { "break" };
                    return Err(CfgError::MalformedIr(format!("line {line}: `{what}` has no target")));
                };
                let depth = self.targets[i].depth;
                let out = self.route_jump(front, depth, line)?;
                if continuing {
                    self.targets[i].continues.extend(out);
                } else {
                    self.targets[i].breaks.extend(out);
                }
                Ok(Vec::new())
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn loop_stmt(
        &mut self,
        label: &Option<String>,
        kind: LoopKind,
        cond: &Option<Expr>,
        body: &[Stmt],
        update: &[Stmt],
        line: Line,
        front: Frontier,
    ) -> Result<Frontier, CfgError> {
        self.targets.push(JumpTarget {
            label: label.clone(),
            kind: TargetKind::Loop,
            depth: self.frames.len(),
            breaks: Vec::new(),
            continues: Vec::new(),
        });
        let r = if kind == LoopKind::DoWhile {
            self.do_while(cond, body, line, front)
        } else {
            self.while_loop(cond, body, update, line, front)
        };
        let t = self.targets.pop().expect("jump target");
        let head = r?;
        let mut exit = t.breaks;
        if !constant_true(cond) {
            exit.push((head, EdgeLabel::False));
        }
        Ok(exit)
    }

    fn while_loop(
        &mut self,
        cond: &Option<Expr>,
        body: &[Stmt],
        update: &[Stmt],
        line: Line,
        front: Frontier,
    ) -> Result<NodeId, CfgError> {
        let head = self.simple(NodeKind::LoopHead(cond.clone()), line, front)?;
        let mut cont = self.block(body, vec![(head, EdgeLabel::True)])?;
        cont.extend(std::mem::take(&mut self.targets.last_mut().expect("jump target").continues));
        if !update.is_empty() && !cont.is_empty() {
            cont = self.block(update, cont)?;
        }
        self.connect(cont, head);
        Ok(head)
    }

    fn do_while(&mut self, cond: &Option<Expr>, body: &[Stmt], line: Line, front: Frontier) -> Result<NodeId, CfgError> {
        let first = self.nodes.len();
        let mut cont = self.block(body, front)?;
        cont.extend(std::mem::take(&mut self.targets.last_mut().expect("jump target").continues));
        let head = self.simple(NodeKind::LoopHead(cond.clone()), line, cont)?;
        let start = if first < head && self.edges.iter().any(|e| e.to == first) { first } else { head };
        self.add_edge(head, start, EdgeLabel::True);
        Ok(head)
    }

    fn switch(
        &mut self,
        label: &Option<String>,
        scrutinee: &Expr,
        cases: &[SwitchCase],
        line: Line,
        mut front: Frontier,
    ) -> Result<Frontier, CfgError> {
        let scr = if scrutinee.contains_call() {
            let n = self.simple(NodeKind::Expr(scrutinee.clone()), line, front)?;
            front = vec![(n, EdgeLabel::Seq)];
            Expr::Other(Vec::new())
        } else {
            scrutinee.clone()
        };
        let mut chain = front;
        let mut tests = Vec::new();
        for case in cases {
            if case.labels.is_empty() {
                tests.push(None);
                continue;
            }
            let cond = case
                .labels
                .iter()
                .map(|l| Expr::Binary { op: BinOp::Eq, lhs: Box::new(scr.clone()), rhs: Box::new(l.clone()) })
                .reduce(|a, b| Expr::Binary { op: BinOp::Or, lhs: Box::new(a), rhs: Box::new(b) })
                .expect("non-empty labels");
            let n = self.simple(NodeKind::Branch(cond), case.line, chain)?;
            chain = vec![(n, EdgeLabel::False)];
            tests.push(Some(n));
        }
        let has_default = tests.iter().any(Option::is_none);
        self.targets.push(JumpTarget {
            label: label.clone(),
            kind: TargetKind::Switch,
            depth: self.frames.len(),
            breaks: Vec::new(),
            continues: Vec::new(),
        });
        let r = (|| {
            let mut fall: Frontier = Vec::new();
            for (case, test) in cases.iter().zip(&tests) {
                let mut entry = std::mem::take(&mut fall);
                match test {
                    Some(n) => entry.push((*n, EdgeLabel::True)),
                    None => entry.extend(chain.iter().copied()),
                }
                fall = self.block(&case.body, entry)?;
            }
            Ok(fall)
        })();
        let t = self.targets.pop().expect("jump target");
        let mut out = r?;
        out.extend(t.breaks);
        if !has_default {
            out.extend(chain);
        }
        Ok(out)
    }

    fn finish(self) -> Cfg {
        // Keep nodes reachable from the entry, plus both exits.
        let n = self.nodes.len();
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            succ[e.from].push(e.to);
        }
        let mut keep = vec![false; n];
        let mut stack = vec![ENTRY];
        keep[ENTRY] = true;
        while let Some(x) = stack.pop() {
            for &y in &succ[x] {
                if !keep[y] {
                    keep[y] = true;
                    stack.push(y);
                }
            }
        }
        keep[NORMAL_EXIT] = true;
        keep[EXCEPTIONAL_EXIT] = true;
        let mut remap = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.into_iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len();
                nodes.push(node);
            }
        }
        let edges = self
            .edges
            .into_iter()
            .filter(|e| keep[e.from] && keep[e.to])
            .map(|e| Edge { from: remap[e.from], to: remap[e.to], label: e.label })
            .collect();
        Cfg::from_parts(nodes, edges)
    }
}

/// Builds the CFG of a method. Bodiless methods get `entry -> normal exit`.
pub fn build_cfg(method: &MethodDecl) -> Result<Cfg, CfgError> {
    let line = method.start_line;
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        seen: HashSet::new(),
        frames: Vec::new(),
        targets: Vec::new(),
        nlocals: method.locals.len(),
    };
    b.add_node(NodeKind::Entry, line)?;
    b.add_node(NodeKind::NormalExit, method.end_line)?;
    b.add_node(NodeKind::ExceptionalExit, method.end_line)?;
    let body = method.body.as_deref().unwrap_or(&[]);
    let out = b.block(body, vec![(ENTRY, EdgeLabel::Seq)])?;
    b.connect(out, NORMAL_EXIT);
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::super::parse_unit;
    use super::*;

    fn cfg_of(body: &str) -> Cfg {
        let unit = parse_unit(&format!("class T {{ void m(Object p) {{ {body} }} }}"), "T.java").unwrap();
        build_cfg(&unit.classes[0].methods[0]).unwrap()
    }

    fn count_kind(cfg: &Cfg, f: impl Fn(&NodeKind) -> bool) -> usize {
        cfg.nodes().iter().filter(|n| f(&n.kind)).count()
    }

    fn reaches(cfg: &Cfg, from: NodeId, to: NodeId) -> bool {
        let mut seen = vec![false; cfg.len()];
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if !std::mem::replace(&mut seen[n], true) {
                stack.extend(cfg.successors(n).map(|e| e.to));
            }
        }
        false
    }

    #[test]
    fn straight_line() {
        let cfg = cfg_of("int x = 1; x = 2;");
        assert_eq!(cfg.len(), 5);
        assert!(cfg.edges().iter().all(|e| e.label == EdgeLabel::Seq));
        assert!(!reaches(&cfg, cfg.entry(), cfg.exceptional_exit()));
    }

    #[test]
    fn calls_may_throw() {
        let cfg = cfg_of("a(); b();");
        let exc = cfg.pred_edges(cfg.exceptional_exit()).len();
        assert_eq!(exc, 2);
    }

    #[test]
    fn branch_has_true_and_false_edges() {
        let cfg = cfg_of("if (p == null) { return; } p.hashCode();");
        for (i, n) in cfg.nodes().iter().enumerate() {
            if matches!(n.kind, NodeKind::Branch(_)) {
                let labels: Vec<_> = cfg.successors(i).map(|e| e.label).collect();
                assert_eq!(labels.iter().filter(|l| **l == EdgeLabel::True).count(), 1);
                assert_eq!(labels.iter().filter(|l| **l == EdgeLabel::False).count(), 1);
            }
        }
    }

    #[test]
    fn finally_copies_per_route() {
        let cfg = cfg_of("try { a(); if (p == null) return; } catch (IOException e) { b(); } finally { c(); }");
        // Normal completion, exceptional completion, and the return.
        assert_eq!(count_kind(&cfg, |k| *k == NodeKind::FinallyEnter), 3);
        let resumes = cfg.edges().iter().filter(|e| e.label == EdgeLabel::FinallyResume).count();
        assert_eq!(resumes, 1);
        assert!(reaches(&cfg, cfg.entry(), cfg.exceptional_exit()));
    }

    #[test]
    fn every_exit_path_passes_finally() {
        let cfg = cfg_of("try { a(); return; } finally { release(); }");
        // Removing finally nodes must disconnect the try body from both exits.
        let try_body: Vec<_> = (0..cfg.len())
            .filter(|&i| matches!(&cfg.node(i).kind, NodeKind::Expr(Expr::Call(c)) if c.name == "a"))
            .collect();
        let mut seen = vec![false; cfg.len()];
        let mut stack = try_body.clone();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n], true) || cfg.node(n).kind == NodeKind::FinallyEnter {
                continue;
            }
            stack.extend(cfg.successors(n).map(|e| e.to));
        }
        assert!(!seen[cfg.normal_exit()] && !seen[cfg.exceptional_exit()]);
    }

    #[test]
    fn catch_all_stops_propagation() {
        let cfg = cfg_of("try { a(); } catch (Exception e) { }");
        assert!(!reaches(&cfg, cfg.entry(), cfg.exceptional_exit()));
        let cfg = cfg_of("try { a(); } catch (IOException e) { }");
        assert!(reaches(&cfg, cfg.entry(), cfg.exceptional_exit()));
    }

    #[test]
    fn loops_have_back_edges() {
        let cfg = cfg_of("for (int i = 0; i < 3; i++) { if (i == 1) continue; a(); }");
        assert_eq!(cfg.back_edges().len(), 1);
        for e in cfg.back_edges() {
            assert!(matches!(cfg.node(cfg.edge(e).to).kind, NodeKind::LoopHead(_)));
        }
        let cfg = cfg_of("do { a(); } while (p != null);");
        assert_eq!(cfg.back_edges().len(), 1);
    }

    #[test]
    fn infinite_loop_has_no_false_edge() {
        let cfg = cfg_of("while (true) { if (p == null) break; }");
        let head = (0..cfg.len()).find(|&i| matches!(cfg.node(i).kind, NodeKind::LoopHead(_))).unwrap();
        assert!(cfg.successors(head).all(|e| e.label == EdgeLabel::True));
        assert!(reaches(&cfg, cfg.entry(), cfg.normal_exit()));
    }

    #[test]
    fn switch_fallthrough_and_default() {
        let cfg = cfg_of("switch (p.hashCode()) { case 1: a(); case 2: b(); break; default: c(); }");
        assert_eq!(count_kind(&cfg, |k| matches!(k, NodeKind::Branch(_))), 2);
        let a = (0..cfg.len()).find(|&i| matches!(&cfg.node(i).kind, NodeKind::Expr(Expr::Call(c)) if c.name == "a")).unwrap();
        let b = (0..cfg.len()).find(|&i| matches!(&cfg.node(i).kind, NodeKind::Expr(Expr::Call(c)) if c.name == "b")).unwrap();
        assert!(cfg.successors(a).any(|e| e.to == b));
    }

    #[test]
    fn unreachable_code_is_pruned() {
        let cfg = cfg_of("return; ");
        assert_eq!(cfg.len(), 4);
        let cfg = cfg_of("throw new IllegalStateException(); ");
        assert!(!reaches(&cfg, cfg.entry(), cfg.normal_exit()));
    }

    #[test]
    fn labeled_break_crosses_loops() {
        let cfg = cfg_of("outer: while (p != null) { while (true) { break outer; } }");
        assert!(reaches(&cfg, cfg.entry(), cfg.normal_exit()));
    }

    #[test]
    fn undeclared_local_is_malformed() {
        let method = MethodDecl {
            name: "m".into(),
            params: Vec::new(),
            locals: Vec::new(),
            body: Some(vec![Stmt::new(StmtKind::Expr(Expr::Var(VarRef::Local(LocalId(3)))), 1)]),
            is_constructor: false,
            start_line: 1,
            end_line: 1,
        };
        assert!(matches!(build_cfg(&method), Err(CfgError::MalformedIr(_))));
        let method = MethodDecl { body: Some(vec![Stmt::new(StmtKind::Break(None), 1)]), ..method };
        assert!(matches!(build_cfg(&method), Err(CfgError::MalformedIr(_))));
    }
}
