//! Intra-procedural resource-state analysis over method CFGs.
//!
//! Every node is reduced once to a list of [`Op`]s on bindings (acquire,
//! release, escape, overwrite, move). The fixpoint engine interprets those ops
//! over [`AbstractState`]; path enumeration interprets the same ops concretely
//! to classify how far a leak extends.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::cfg::{Cfg, EdgeId, EdgeLabel, NodeId, NodeKind};
use crate::java::ir::{BinOp, Call, Expr, LValue, Line, LocalId, LocalVar, NewObject, Receiver, VarRef};
use crate::java::{ClassDecl, MethodDecl, SourceUnit};
use crate::registry::{CallSite, ReceiverType, Registry, SpecId, SpecMatch};

/// Upper bound on tracked acquisition counts.
pub const COUNT_CAP: u8 = 8;
/// Path enumeration gives up beyond this many paths.
pub const MAX_PATHS: usize = 100_000;
/// Worklist steps allowed per CFG node before the engine gives up.
pub const STEPS_PER_NODE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataflowError {
    #[error("dataflow did not converge after {steps} steps")]
    NonTermination { steps: usize },
    #[error("more than {MAX_PATHS} paths")]
    PathExplosion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbstractState {
    Bottom,
    /// Held `n` times (always 1 for uncounted resources).
    Acquired(u8),
    Released,
    MaybeReleased,
    Escaped,
}

impl AbstractState {
    pub fn join(self, other: AbstractState) -> AbstractState {
        use AbstractState::*;
        match (self, other) {
            (Bottom, x) | (x, Bottom) => x,
            (Escaped, _) | (_, Escaped) => Escaped,
            (Acquired(a), Acquired(b)) => Acquired(a.max(b)),
            (Released, Released) => Released,
            _ => MaybeReleased,
        }
    }

    pub fn leq(self, other: AbstractState) -> bool {
        self.join(other) == other
    }

    /// Held on at least one path and not handed off.
    pub fn is_leaking(self) -> bool {
        matches!(self, AbstractState::Acquired(_) | AbstractState::MaybeReleased)
    }

    pub fn release(self) -> AbstractState {
        use AbstractState::*;
        match self {
            Acquired(n) if n > 1 => Acquired(n - 1),
            Acquired(_) | MaybeReleased | Released => Released,
            other => other,
        }
    }

    /// Acquire through a method on the resource itself (`lock.acquire()`).
    pub fn acquire_in_place(self, counted: bool) -> AbstractState {
        use AbstractState::*;
        match self {
            Bottom | Released => Acquired(1),
            Acquired(n) if counted => Acquired(n.saturating_add(1).min(COUNT_CAP)),
            other => other,
        }
    }
}

/// A tracked name: a local of the method or a field (`this` included).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Binding {
    Local(LocalId),
    Field(String),
}

pub type Key = (Binding, SpecId);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbsValue {
    pub state: AbstractState,
    /// Nodes whose acquire produced the held value.
    pub sites: BTreeSet<NodeId>,
}

impl AbsValue {
    fn join_from(&mut self, other: &AbsValue) -> bool {
        let state = self.state.join(other.state);
        let before = self.sites.len();
        self.sites.extend(other.sites.iter().copied());
        let changed = state != self.state || self.sites.len() != before;
        self.state = state;
        changed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbstractEnv {
    values: BTreeMap<Key, AbsValue>,
}

impl AbstractEnv {
    pub fn state(&self, key: &Key) -> AbstractState {
        self.values.get(key).map_or(AbstractState::Bottom, |v| v.state)
    }

    pub fn value(&self, key: &Key) -> Option<&AbsValue> {
        self.values.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &AbsValue)> {
        self.values.iter()
    }

    /// Pointwise join; reports whether `self` grew.
    pub fn join_from(&mut self, other: &AbstractEnv) -> bool {
        let mut changed = false;
        for (k, v) in &other.values {
            match self.values.get_mut(k) {
                Some(mine) => changed |= mine.join_from(v),
                None => {
                    self.values.insert(k.clone(), v.clone());
                    changed = true;
                }
            }
        }
        changed
    }

    fn keys_of(&self, b: &Binding) -> Vec<Key> {
        self.values.keys().filter(|(kb, _)| kb == b).cloned().collect()
    }

    fn set(&mut self, key: Key, v: AbsValue) {
        if v.state == AbstractState::Bottom {
            self.values.remove(&key);
        } else {
            self.values.insert(key, v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowEventKind {
    LostReference,
    ReacquireWhileHeld,
    UnboundAcquire,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlowEvent {
    pub line: Line,
    pub node: NodeId,
    pub kind: FlowEventKind,
    /// `None` for an acquire whose result is never stored.
    pub binding: Option<Binding>,
    pub spec: SpecId,
    /// Acquire sites of the affected value (the call itself when unbound).
    pub sites: BTreeSet<NodeId>,
}

/// Where a resource was obtained and how sure the match is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcquireSite {
    pub node: NodeId,
    pub line: Line,
    pub spec: SpecId,
    pub via_wildcard: bool,
    /// Typed match, or a wildcard match stored into a variable declared with
    /// the resource's type.
    pub high_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Op {
    Acquire { key: Key, counted: bool },
    AcquireInPlace { key: Key, counted: bool },
    Release { binding: Binding, specs: Vec<SpecId> },
    Escape(Binding),
    /// The binding is overwritten. Silent clears come from null-check
    /// refinement and never report; `keep` is the spec an accompanying
    /// Acquire handles itself.
    Clear { binding: Binding, silent: bool, keep: Option<SpecId> },
    Move { from: Binding, to: Binding },
}

impl Op {
    fn survives_exception(&self) -> bool {
        matches!(self, Op::Release { .. } | Op::Escape(_))
    }
}

#[derive(Debug, Clone, Default)]
struct NodeEffects {
    ops: Vec<Op>,
    unbound: Vec<(SpecId, bool)>,
    sites: Vec<AcquireSite>,
    /// Binding known to be null on the edge with this label.
    null_edge: Option<(Binding, EdgeLabel)>,
}

/// Type facts the analysis needs about the method's surroundings.
#[derive(Debug, Clone, Default)]
pub struct MethodContext {
    pub class_name: String,
    pub locals: Vec<LocalVar>,
    pub field_types: HashMap<String, String>,
    /// Receiver type of unqualified calls.
    pub implicit_receiver: Option<String>,
    pub superclass: Option<String>,
    /// Methods declared by the enclosing class; unqualified calls to them are
    /// never library calls.
    pub own_methods: BTreeSet<String>,
}

const CONTEXT_CLASS: &str = "android.content.Context";

fn is_context_like(ty: &str) -> bool {
    let simple = ty.rsplit('.').next().unwrap_or(ty);
    let simple = simple.split('<').next().unwrap_or(simple);
    simple.ends_with("Activity")
        || simple.ends_with("Service")
        || matches!(simple, "Application" | "Context" | "ContextWrapper" | "ContextThemeWrapper")
}

impl MethodContext {
    /// Context for a method with no surrounding class information.
    pub fn bare(method: &MethodDecl) -> MethodContext {
        MethodContext { locals: method.locals.clone(), ..Default::default() }
    }

    pub fn new(unit: &SourceUnit, class: &ClassDecl, method: &MethodDecl) -> MethodContext {
        let mut field_types = HashMap::new();
        let mut own_methods = BTreeSet::new();
        let mut implicit_receiver = None;
        let mut cur = Some(class);
        while let Some(c) = cur {
            for f in &c.fields {
                field_types.entry(f.name.clone()).or_insert_with(|| f.ty.clone());
            }
            own_methods.extend(c.methods.iter().map(|m| m.name.clone()));
            if implicit_receiver.is_none() && c.superclass.as_deref().is_some_and(is_context_like) {
                implicit_receiver = Some(CONTEXT_CLASS.to_string());
            }
            cur = c.outer.as_deref().and_then(|o| unit.class(o));
        }
        MethodContext {
            class_name: class.name.clone(),
            locals: method.locals.clone(),
            field_types,
            implicit_receiver,
            superclass: class.superclass.clone(),
            own_methods,
        }
    }

    pub fn binding_name(&self, b: &Binding) -> String {
        match b {
            Binding::Local(id) => self.locals[id.0 as usize].name.clone(),
            Binding::Field(f) => f.clone(),
        }
    }

    pub fn declared_type(&self, b: &Binding) -> Option<&str> {
        match b {
            Binding::Local(id) => self.locals[id.0 as usize].ty.as_deref(),
            Binding::Field(f) if f == "this" => Some(&self.class_name),
            Binding::Field(f) => self.field_types.get(f).map(String::as_str),
        }
    }
}

pub fn binding_of(v: &VarRef) -> Binding {
    match v {
        VarRef::Local(id) => Binding::Local(*id),
        VarRef::Free(name) => Binding::Field(name.clone()),
    }
}

fn expr_binding(e: &Expr) -> Option<Binding> {
    match e {
        Expr::Var(v) => Some(binding_of(v)),
        Expr::This => Some(Binding::Field("this".into())),
        _ => None,
    }
}

// Return types of common framework getters, used to type call receivers.
const KNOWN_GETTERS: &[(&str, &str)] = &[
    ("getContentResolver", "android.content.ContentResolver"),
    ("getAssets", "android.content.res.AssetManager"),
    ("openConnection", "java.net.URLConnection"),
    ("getApplicationContext", CONTEXT_CLASS),
    ("getBaseContext", CONTEXT_CLASS),
];

/// Position of an expression relative to where its value goes.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    /// Value discarded or consumed without being stored.
    Free,
    /// Receiver of a call or owner of a field access.
    Receiver,
    /// Stored into a tracked binding by the enclosing assignment.
    Bound,
    /// Direct argument of a wrapper that takes over its closing.
    Wrapped,
    /// Argument of a call that does not take over the resource: variables
    /// escape, fresh resources are lost.
    Arg,
    /// Returned, captured or stored out of reach.
    Escaping,
}

pub(crate) struct Extractor<'a> {
    pub ctx: &'a MethodContext,
    pub reg: &'a Registry,
}

/// A fresh resource value produced by an expression.
struct Fresh {
    spec: SpecId,
    via_wildcard: bool,
}

impl<'a> Extractor<'a> {
    fn receiver_type(&self, r: &Receiver) -> Option<String> {
        match r {
            Receiver::Implicit => self.ctx.implicit_receiver.clone(),
            Receiver::Super => self
                .ctx
                .implicit_receiver
                .clone()
                .or_else(|| self.ctx.superclass.clone()),
            Receiver::Type(t) => Some(t.clone()),
            Receiver::Expr(e) => self.expr_type(e),
        }
    }

    pub(crate) fn expr_type(&self, e: &Expr) -> Option<String> {
        match e {
            Expr::Var(v) => self.ctx.declared_type(&binding_of(v)).map(str::to_string),
            Expr::This => Some(self.ctx.class_name.clone()),
            Expr::New(n) => Some(n.ty.clone()),
            Expr::Call(c) => {
                if let Some(m) = self.acquire_match(c) {
                    if !m.resource_arg {
                        return Some(self.reg.spec(m.spec).class_name.clone());
                    }
                }
                KNOWN_GETTERS.iter().find(|(n, _)| *n == c.name).map(|(_, t)| t.to_string())
            }
            _ => None,
        }
    }

    pub(crate) fn call_site_type(&self, c: &Call) -> Option<String> {
        self.receiver_type(&c.receiver)
    }

    fn is_own_method(&self, c: &Call) -> bool {
        matches!(c.receiver, Receiver::Implicit) && self.ctx.own_methods.contains(&c.name)
    }

    fn acquire_match(&self, c: &Call) -> Option<SpecMatch> {
        if self.is_own_method(c) {
            return None;
        }
        let ty = self.receiver_type(&c.receiver);
        let recv = ty.as_deref().map_or(ReceiverType::Unknown, ReceiverType::Known);
        self.reg.match_acquire(&CallSite::new(recv, &c.name, c.args.len())).ok().flatten()
    }

    fn new_match(&self, n: &NewObject) -> Option<SpecMatch> {
        let site = CallSite::new(ReceiverType::Known(&n.ty), "<init>", n.args.len());
        self.reg.match_acquire(&site).ok().flatten().filter(|m| !m.via_wildcard)
    }

    /// The acquire is a method of the resource object itself.
    fn is_self_acquire(&self, spec: SpecId, c: &Call) -> bool {
        let s = self.reg.spec(spec);
        s.acquire_sigs
            .iter()
            .any(|sig| sig.receiver_class == s.class_name && sig.matches_name(&c.name, c.args.len()))
    }

    /// Specs whose receiver-side release matches the call name.
    fn receiver_release_specs(&self, c: &Call) -> Vec<SpecId> {
        self.reg
            .ids()
            .filter(|&id| {
                self.reg
                    .spec(id)
                    .release_sigs
                    .iter()
                    .any(|s| !s.resource_arg && s.matches_name(&c.name, c.args.len()))
            })
            .collect()
    }

    /// Specs released by passing the resource as an argument.
    pub(crate) fn arg_release_specs(&self, c: &Call) -> Vec<SpecId> {
        let ty = self.receiver_type(&c.receiver);
        self.reg
            .ids()
            .filter(|&id| {
                self.reg.spec(id).release_sigs.iter().any(|s| {
                    s.resource_arg
                        && s.matches_name(&c.name, c.args.len())
                        && (s.is_wildcard()
                            || ty.as_deref().is_some_and(|t| crate::registry::type_matches(t, &s.receiver_class)))
                })
            })
            .collect()
    }

    /// Whether the call releases `b` for some spec, by receiver or argument.
    pub(crate) fn releases_binding(&self, c: &Call, b: &Binding, spec: Option<SpecId>) -> bool {
        let ok = |ids: Vec<SpecId>| spec.map_or(!ids.is_empty(), |s| ids.contains(&s));
        if let Receiver::Expr(r) = &c.receiver {
            if expr_binding(r).as_ref() == Some(b) && ok(self.receiver_release_specs(c)) {
                return true;
            }
        }
        c.args.iter().any(|a| expr_binding(a).as_ref() == Some(b)) && ok(self.arg_release_specs(c))
    }

    fn extract(&self, node: NodeId, kind: &NodeKind, line: Line) -> NodeEffects {
        let mut fx = NodeEffects::default();
        match kind {
            NodeKind::Assign { target, value } => {
                match target {
                    LValue::Field { owner, .. } => self.eval(owner, Pos::Receiver, node, line, &mut fx),
                    LValue::Other(e) => self.eval(e, Pos::Free, node, line, &mut fx),
                    LValue::Var(_) => {}
                }
                self.assign(target, value, node, line, &mut fx);
            }
            NodeKind::Expr(e) | NodeKind::Throw(e) => self.eval(e, Pos::Free, node, line, &mut fx),
            NodeKind::Return(Some(e)) => self.eval(e, Pos::Escaping, node, line, &mut fx),
            NodeKind::Branch(e) | NodeKind::LoopHead(Some(e)) => {
                self.eval(e, Pos::Free, node, line, &mut fx);
                fx.null_edge = null_test(e);
            }
            _ => {}
        }
        fx
    }

    fn assign(&self, target: &LValue, value: &Expr, node: NodeId, line: Line, fx: &mut NodeEffects) {
        let to = match target {
            LValue::Var(v) => Some(binding_of(v)),
            _ => None,
        };
        let Some(to) = to else {
            // Stored into another object or an array: the value leaves our hands.
            self.eval(value, Pos::Escaping, node, line, fx);
            return;
        };
        if let Some(from) = expr_binding(value) {
            if from != to {
                fx.ops.push(Op::Move { from, to });
            }
            return;
        }
        match self.eval_value(value, Pos::Bound, node, line, fx) {
            Some(fresh) => {
                let spec = self.reg.spec(fresh.spec);
                let high = !fresh.via_wildcard
                    || self
                        .ctx
                        .declared_type(&to)
                        .and_then(|t| self.reg.resolve_type(t))
                        == Some(fresh.spec);
                fx.sites.push(AcquireSite {
                    node,
                    line,
                    spec: fresh.spec,
                    via_wildcard: fresh.via_wildcard,
                    high_confidence: high,
                });
                fx.ops.push(Op::Clear { binding: to.clone(), silent: false, keep: Some(fresh.spec) });
                fx.ops.push(Op::Acquire { key: (to, fresh.spec), counted: spec.counted });
            }
            None => fx.ops.push(Op::Clear { binding: to, silent: false, keep: None }),
        }
    }

    fn eval(&self, e: &Expr, pos: Pos, node: NodeId, line: Line, fx: &mut NodeEffects) {
        if let Some(fresh) = self.eval_value(e, pos, node, line, fx) {
            match pos {
                Pos::Free | Pos::Receiver | Pos::Arg => {
                    fx.unbound.push((fresh.spec, fresh.via_wildcard));
                    fx.sites.push(AcquireSite {
                        node,
                        line,
                        spec: fresh.spec,
                        via_wildcard: fresh.via_wildcard,
                        high_confidence: !fresh.via_wildcard,
                    });
                }
                Pos::Bound | Pos::Wrapped | Pos::Escaping => {}
            }
        }
    }

    /// Emits the ops of evaluating `e`; returns the fresh resource it yields.
    fn eval_value(&self, e: &Expr, pos: Pos, node: NodeId, line: Line, fx: &mut NodeEffects) -> Option<Fresh> {
        match e {
            Expr::Call(c) => self.eval_call(c, node, line, fx),
            Expr::New(n) => {
                let m = self.new_match(n);
                let wraps = m.is_some_and(|m| self.reg.spec(m.spec).closes_wrapped);
                let arg_pos = if wraps { Pos::Wrapped } else { Pos::Arg };
                for a in &n.args {
                    self.eval(a, arg_pos, node, line, fx);
                }
                for id in &n.captured {
                    fx.ops.push(Op::Escape(Binding::Local(*id)));
                }
                m.map(|m| Fresh { spec: m.spec, via_wildcard: false })
            }
            Expr::Var(v) => {
                if matches!(pos, Pos::Escaping | Pos::Wrapped | Pos::Bound | Pos::Arg) {
                    fx.ops.push(Op::Escape(binding_of(v)));
                }
                None
            }
            Expr::Lambda { captured, .. } => {
                for id in captured {
                    fx.ops.push(Op::Escape(Binding::Local(*id)));
                }
                None
            }
            Expr::Field { owner, .. } => {
                self.eval(owner, Pos::Receiver, node, line, fx);
                None
            }
            Expr::Not(inner) => {
                self.eval(inner, Pos::Free, node, line, fx);
                None
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.eval(lhs, Pos::Free, node, line, fx);
                self.eval(rhs, Pos::Free, node, line, fx);
                None
            }
            Expr::Assign { target, value } => {
                match &**target {
                    LValue::Field { owner, .. } => self.eval(owner, Pos::Receiver, node, line, fx),
                    LValue::Other(t) => self.eval(t, Pos::Free, node, line, fx),
                    LValue::Var(_) => {}
                }
                self.assign(target, value, node, line, fx);
                None
            }
            Expr::Other(parts) => {
                let inner = match pos {
                    Pos::Free | Pos::Receiver => Pos::Free,
                    Pos::Arg => Pos::Arg,
                    _ => Pos::Escaping,
                };
                for p in parts {
                    self.eval(p, inner, node, line, fx);
                }
                None
            }
            Expr::This | Expr::Literal(_) => None,
        }
    }

    fn eval_call(&self, c: &Call, node: NodeId, line: Line, fx: &mut NodeEffects) -> Option<Fresh> {
        let recv_binding = match &c.receiver {
            Receiver::Expr(r) => {
                self.eval(r, Pos::Receiver, node, line, fx);
                expr_binding(r)
            }
            _ => None,
        };
        let acquire = self.acquire_match(c);
        let arg_release = self.arg_release_specs(c);
        // Arguments named by a registration or unregistration call stay ours.
        let arg_is_resource = acquire.is_some_and(|m| m.resource_arg) || !arg_release.is_empty();
        for a in &c.args {
            if arg_is_resource && expr_binding(a).is_some() {
                continue;
            }
            self.eval(a, Pos::Arg, node, line, fx);
        }
        if let Some(b) = &recv_binding {
            let specs = self.receiver_release_specs(c);
            if !specs.is_empty() {
                fx.ops.push(Op::Release { binding: b.clone(), specs });
            }
        }
        if !arg_release.is_empty() {
            for a in &c.args {
                if let Some(b) = expr_binding(a) {
                    fx.ops.push(Op::Release { binding: b, specs: arg_release.clone() });
                }
            }
        }
        let m = acquire?;
        let spec = self.reg.spec(m.spec);
        if m.resource_arg {
            for a in &c.args {
                let Some(b) = expr_binding(a) else { continue };
                let typed = self.ctx.declared_type(&b).and_then(|t| self.reg.resolve_type(t));
                if typed == Some(m.spec) || b == Binding::Field("this".into()) {
                    fx.sites.push(AcquireSite { node, line, spec: m.spec, via_wildcard: m.via_wildcard, high_confidence: true });
                    fx.ops.push(Op::AcquireInPlace { key: (b, m.spec), counted: spec.counted });
                }
            }
            return None;
        }
        if let Some(b) = recv_binding.filter(|_| self.is_self_acquire(m.spec, c)) {
            fx.sites.push(AcquireSite { node, line, spec: m.spec, via_wildcard: m.via_wildcard, high_confidence: !m.via_wildcard });
            fx.ops.push(Op::AcquireInPlace { key: (b, m.spec), counted: spec.counted });
            return None;
        }
        Some(Fresh { spec: m.spec, via_wildcard: m.via_wildcard })
    }
}

/// `v == null` / `v != null` (either operand order): the binding and the
/// edge on which it is null.
fn null_test(e: &Expr) -> Option<(Binding, EdgeLabel)> {
    let Expr::Binary { op, lhs, rhs } = e else { return None };
    let var = if rhs.is_null() {
        lhs
    } else if lhs.is_null() {
        rhs
    } else {
        return None;
    };
    let b = match &**var {
        Expr::Var(v) => binding_of(v),
        _ => return None,
    };
    match op {
        BinOp::Eq => Some((b, EdgeLabel::True)),
        BinOp::Ne => Some((b, EdgeLabel::False)),
        _ => None,
    }
}

/// Result of running the engine on one method.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// State on entry to each node.
    pub in_envs: Vec<AbstractEnv>,
    /// State leaving each node along normal edges.
    pub out_envs: Vec<AbstractEnv>,
    /// State leaving each node along exception edges.
    pub exc_envs: Vec<AbstractEnv>,
    pub events: Vec<FlowEvent>,
    pub sites: Vec<AcquireSite>,
    pub iterations: usize,
    effects: Vec<NodeEffects>,
}

impl Analysis {
    pub fn site(&self, node: NodeId, spec: SpecId) -> Option<&AcquireSite> {
        self.sites.iter().find(|s| s.node == node && s.spec == spec)
    }

    /// High confidence when any contributing acquire site is.
    pub fn confidence_high(&self, sites: &BTreeSet<NodeId>, spec: SpecId) -> bool {
        sites.is_empty()
            || sites
                .iter()
                .any(|&n| self.site(n, spec).map_or(true, |s| s.high_confidence))
    }

    /// Nodes whose ops release `binding` (any spec).
    pub fn release_nodes(&self, binding: &Binding) -> Vec<NodeId> {
        (0..self.effects.len())
            .filter(|&n| {
                self.effects[n]
                    .ops
                    .iter()
                    .any(|op| matches!(op, Op::Release { binding: b, .. } if b == binding))
            })
            .collect()
    }
}

fn apply(
    env: &mut AbstractEnv,
    op: &Op,
    node: NodeId,
    line: Line,
    events: &mut Option<&mut BTreeSet<FlowEvent>>,
) {
    let mut emit = |kind, key: &Key, sites: &BTreeSet<NodeId>| {
        if let Some(ev) = events.as_deref_mut() {
            ev.insert(FlowEvent {
                line,
                node,
                kind,
                binding: Some(key.0.clone()),
                spec: key.1,
                sites: sites.clone(),
            });
        }
    };
    match op {
        Op::Acquire { key, counted } => {
            let prev = env.value(key).cloned();
            let state = match prev.as_ref().map(|v| (v.state, &v.sites)) {
                Some((AbstractState::Acquired(n), sites)) if *counted => {
                    emit(FlowEventKind::ReacquireWhileHeld, key, sites);
                    AbstractState::Acquired(n.saturating_add(1).min(COUNT_CAP))
                }
                Some((st, sites)) if st.is_leaking() => {
                    emit(FlowEventKind::LostReference, key, sites);
                    AbstractState::Acquired(1)
                }
                _ => AbstractState::Acquired(1),
            };
            env.set(key.clone(), AbsValue { state, sites: BTreeSet::from([node]) });
        }
        Op::AcquireInPlace { key, counted } => {
            let prev = env.value(key).cloned().unwrap_or(AbsValue {
                state: AbstractState::Bottom,
                sites: BTreeSet::new(),
            });
            if *counted && matches!(prev.state, AbstractState::Acquired(_)) {
                emit(FlowEventKind::ReacquireWhileHeld, key, &prev.sites);
            }
            let state = prev.state.acquire_in_place(*counted);
            let mut sites = if matches!(prev.state, AbstractState::Acquired(_) | AbstractState::MaybeReleased) {
                prev.sites
            } else {
                BTreeSet::new()
            };
            sites.insert(node);
            env.set(key.clone(), AbsValue { state, sites });
        }
        Op::Release { binding, specs } => {
            for spec in specs {
                let key = (binding.clone(), *spec);
                if let Some(v) = env.value(&key).cloned() {
                    env.set(key, AbsValue { state: v.state.release(), sites: v.sites });
                }
            }
        }
        Op::Escape(b) => {
            for key in env.keys_of(b) {
                let sites = env.value(&key).map(|v| v.sites.clone()).unwrap_or_default();
                env.set(key, AbsValue { state: AbstractState::Escaped, sites });
            }
        }
        Op::Clear { binding, silent, keep } => {
            for key in env.keys_of(binding) {
                if Some(key.1) == *keep {
                    continue;
                }
                let v = env.value(&key).cloned().unwrap();
                if !silent && v.state.is_leaking() {
                    emit(FlowEventKind::LostReference, &key, &v.sites);
                }
                env.set(key, AbsValue { state: AbstractState::Bottom, sites: BTreeSet::new() });
            }
        }
        Op::Move { from, to } => {
            for key in env.keys_of(to) {
                let v = env.value(&key).cloned().unwrap();
                if v.state.is_leaking() {
                    emit(FlowEventKind::LostReference, &key, &v.sites);
                }
                env.set(key, AbsValue { state: AbstractState::Bottom, sites: BTreeSet::new() });
            }
            for key in env.keys_of(from) {
                let v = env.value(&key).cloned().unwrap();
                env.set((to.clone(), key.1), v.clone());
                env.set(key, AbsValue { state: AbstractState::Escaped, sites: v.sites });
            }
        }
    }
}

fn edge_env(cfg: &Cfg, e: EdgeId, effects: &[NodeEffects], out: &[AbstractEnv], exc: &[AbstractEnv]) -> AbstractEnv {
    let edge = cfg.edge(e);
    let mut env = if edge.label.is_exceptional() { exc[edge.from].clone() } else { out[edge.from].clone() };
    if let Some((b, label)) = &effects[edge.from].null_edge {
        if *label == edge.label {
            let op = Op::Clear { binding: b.clone(), silent: true, keep: None };
            apply(&mut env, &op, edge.from, 0, &mut None);
        }
    }
    env
}

fn transfer(
    env: &AbstractEnv,
    fx: &NodeEffects,
    exceptional: bool,
    node: NodeId,
    line: Line,
    mut events: Option<&mut BTreeSet<FlowEvent>>,
) -> AbstractEnv {
    let mut out = env.clone();
    for op in &fx.ops {
        if exceptional && !op.survives_exception() {
            continue;
        }
        apply(&mut out, op, node, line, &mut events);
    }
    out
}

/// Runs the resource-state analysis to a fixpoint and collects flow events.
pub fn analyze(cfg: &Cfg, ctx: &MethodContext, reg: &Registry) -> Result<Analysis, DataflowError> {
    let ex = Extractor { ctx, reg };
    let n = cfg.len();
    let effects: Vec<NodeEffects> =
        (0..n).map(|i| ex.extract(i, &cfg.node(i).kind, cfg.node(i).line)).collect();
    let mut out = vec![AbstractEnv::default(); n];
    let mut exc = vec![AbstractEnv::default(); n];
    let in_of = |node: NodeId, out: &[AbstractEnv], exc: &[AbstractEnv]| {
        let mut env = AbstractEnv::default();
        for &e in cfg.pred_edges(node) {
            env.join_from(&edge_env(cfg, e, &effects, out, exc));
        }
        env
    };

    let order = cfg.reverse_postorder();
    let mut queued = vec![false; n];
    let mut work: VecDeque<NodeId> = VecDeque::new();
    for &v in &order {
        queued[v] = true;
        work.push_back(v);
    }
    let limit = STEPS_PER_NODE.saturating_mul(n.max(1));
    let mut steps = 0usize;
    while let Some(v) = work.pop_front() {
        queued[v] = false;
        steps += 1;
        if steps > limit {
            return Err(DataflowError::NonTermination { steps });
        }
        let input = in_of(v, &out, &exc);
        let line = cfg.node(v).line;
        let new_out = transfer(&input, &effects[v], false, v, line, None);
        let new_exc = transfer(&input, &effects[v], true, v, line, None);
        // Accumulate: counted release is not monotone on its own.
        let changed = out[v].join_from(&new_out) | exc[v].join_from(&new_exc);
        if changed {
            for succ in cfg.successors(v) {
                if !queued[succ.to] {
                    queued[succ.to] = true;
                    work.push_back(succ.to);
                }
            }
        }
    }

    let mut events = BTreeSet::new();
    let mut in_envs = Vec::with_capacity(n);
    let mut sites = Vec::new();
    let reachable: BTreeSet<NodeId> = order.iter().copied().collect();
    for (v, eff) in effects.iter().enumerate() {
        let input = in_of(v, &out, &exc);
        if reachable.contains(&v) {
            let line = cfg.node(v).line;
            transfer(&input, eff, false, v, line, Some(&mut events));
            for &(spec, _) in &eff.unbound {
                events.insert(FlowEvent {
                    line,
                    node: v,
                    kind: FlowEventKind::UnboundAcquire,
                    binding: None,
                    spec,
                    sites: BTreeSet::from([v]),
                });
            }
            sites.extend(effects[v].sites.iter().cloned());
        }
        in_envs.push(input);
    }
    Ok(Analysis {
        in_envs,
        out_envs: out,
        exc_envs: exc,
        events: events.into_iter().collect(),
        sites,
        iterations: steps,
        effects,
    })
}

/// A local still holding a resource when the method exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakCandidate {
    pub key: Key,
    pub state: AbstractState,
    /// Exits (normal and/or exceptional) at which the state is leaking.
    pub exits: Vec<NodeId>,
    pub sites: BTreeSet<NodeId>,
}

/// Local bindings whose state at an exit is `Acquired` or `MaybeReleased`.
pub fn leaks_at_exit(cfg: &Cfg, analysis: &Analysis) -> Vec<LeakCandidate> {
    let mut found: BTreeMap<Key, LeakCandidate> = BTreeMap::new();
    for exit in [cfg.normal_exit(), cfg.exceptional_exit()] {
        for (key, v) in analysis.in_envs[exit].iter() {
            if !matches!(key.0, Binding::Local(_)) || !v.state.is_leaking() {
                continue;
            }
            let c = found.entry(key.clone()).or_insert_with(|| LeakCandidate {
                key: key.clone(),
                state: v.state,
                exits: Vec::new(),
                sites: BTreeSet::new(),
            });
            c.state = c.state.join(v.state);
            c.exits.push(exit);
            c.sites.extend(v.sites.iter().copied());
        }
    }
    found.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeakExtent {
    /// No path releases the resource.
    #[serde(rename = "complete")]
    Complete,
    /// Only paths through an exception leak it.
    #[serde(rename = "exceptional")]
    ExceptionalOnly,
    /// Some normal paths leak it.
    #[serde(rename = "normal")]
    SomeNormalPaths,
}

impl LeakExtent {
    pub fn as_str(self) -> &'static str {
        match self {
            LeakExtent::Complete => "complete",
            LeakExtent::ExceptionalOnly => "exceptional",
            LeakExtent::SomeNormalPaths => "normal",
        }
    }

    pub fn parse(s: &str) -> Option<LeakExtent> {
        match s {
            "complete" => Some(LeakExtent::Complete),
            "exceptional" => Some(LeakExtent::ExceptionalOnly),
            "normal" => Some(LeakExtent::SomeNormalPaths),
            _ => None,
        }
    }
}

impl fmt::Display for LeakExtent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtentResult {
    /// `None` when no path leaks the binding.
    pub extent: Option<LeakExtent>,
    /// Path enumeration blew up and a heuristic was used instead.
    pub approximate: bool,
}

/// One Entry-to-exit path; `edges[i]` leads from `nodes[i]` to `nodes[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn is_exceptional(&self, cfg: &Cfg) -> bool {
        self.edges.iter().any(|&e| cfg.edge(e).label.is_exceptional())
    }
}

/// All Entry-to-exit paths taking each back edge at most `unroll_limit`
/// times, in depth-first successor order.
pub fn brute_force_paths(cfg: &Cfg, unroll_limit: usize) -> Result<Vec<Path>, DataflowError> {
    enumerate_paths(cfg, unroll_limit, |n| cfg.is_exit(n))
}

fn enumerate_paths(cfg: &Cfg, unroll_limit: usize, is_end: impl Fn(NodeId) -> bool) -> Result<Vec<Path>, DataflowError> {
    let mut paths = Vec::new();
    let mut nodes = vec![cfg.entry()];
    let mut edges: Vec<EdgeId> = Vec::new();
    let mut taken = vec![0usize; cfg.edges().len()];
    // Each frame: node and index of the next successor edge to try.
    let mut stack = vec![(cfg.entry(), 0usize)];
    if is_end(cfg.entry()) {
        return Ok(vec![Path { nodes, edges }]);
    }
    while let Some(&mut (n, ref mut i)) = stack.last_mut() {
        let succ = cfg.succ_edges(n);
        if *i >= succ.len() {
            stack.pop();
            nodes.pop();
            if let Some(e) = edges.pop() {
                if cfg.is_back_edge(e) {
                    taken[e] -= 1;
                }
            }
            continue;
        }
        let e = succ[*i];
        *i += 1;
        if cfg.is_back_edge(e) {
            if taken[e] >= unroll_limit {
                continue;
            }
            taken[e] += 1;
        }
        let to = cfg.edge(e).to;
        nodes.push(to);
        edges.push(e);
        if is_end(to) {
            paths.push(Path { nodes: nodes.clone(), edges: edges.clone() });
            if paths.len() > MAX_PATHS {
                return Err(DataflowError::PathExplosion);
            }
            nodes.pop();
            edges.pop();
            if cfg.is_back_edge(e) {
                taken[e] -= 1;
            }
        } else {
            stack.push((to, 0));
        }
    }
    Ok(paths)
}

/// Concrete state of one binding along one path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathState {
    pub count: u32,
    pub escaped: bool,
    /// Some release of the binding happened on the path.
    pub released: bool,
}

impl PathState {
    pub fn leaking(&self) -> bool {
        self.count > 0 && !self.escaped
    }
}

fn apply_concrete(states: &mut BTreeMap<Key, PathState>, op: &Op) {
    let keys_of = |states: &BTreeMap<Key, PathState>, b: &Binding| -> Vec<Key> {
        states.keys().filter(|(kb, _)| kb == b).cloned().collect()
    };
    match op {
        Op::Acquire { key, counted } => {
            let s = states.entry(key.clone()).or_default();
            if *counted && s.count > 0 && !s.escaped {
                s.count += 1;
            } else {
                s.count = 1;
                s.escaped = false;
            }
        }
        Op::AcquireInPlace { key, counted } => {
            let s = states.entry(key.clone()).or_default();
            if *counted {
                s.count += 1;
            } else if s.count == 0 {
                s.count = 1;
            }
        }
        Op::Release { binding, specs } => {
            for spec in specs {
                if let Some(s) = states.get_mut(&(binding.clone(), *spec)) {
                    s.count = s.count.saturating_sub(1);
                    s.released = true;
                }
            }
        }
        Op::Escape(b) => {
            for k in keys_of(states, b) {
                states.get_mut(&k).unwrap().escaped = true;
            }
        }
        Op::Clear { binding, keep, .. } => {
            for k in keys_of(states, binding) {
                if Some(k.1) == *keep {
                    continue;
                }
                let s = states.get_mut(&k).unwrap();
                s.count = 0;
                s.escaped = false;
            }
        }
        Op::Move { from, to } => {
            for k in keys_of(states, to) {
                let s = states.get_mut(&k).unwrap();
                s.count = 0;
                s.escaped = false;
            }
            for k in keys_of(states, from) {
                let v = states[&k];
                states.insert((to.clone(), k.1), v);
                states.get_mut(&k).unwrap().escaped = true;
            }
        }
    }
}

/// Replays a path's ops concretely; the last node's ops are not run.
pub fn simulate_path(cfg: &Cfg, analysis: &Analysis, path: &Path) -> BTreeMap<Key, PathState> {
    let mut states = BTreeMap::new();
    for (i, &e) in path.edges.iter().enumerate() {
        let node = path.nodes[i];
        let fx = &analysis.effects[node];
        let label = cfg.edge(e).label;
        for op in &fx.ops {
            if label.is_exceptional() && !op.survives_exception() {
                continue;
            }
            apply_concrete(&mut states, op);
        }
        if let Some((b, l)) = &fx.null_edge {
            if *l == label {
                apply_concrete(&mut states, &Op::Clear { binding: b.clone(), silent: true, keep: None });
            }
        }
    }
    states
}

fn classify_paths(cfg: &Cfg, analysis: &Analysis, key: &Key, paths: &[Path]) -> Option<LeakExtent> {
    let mut any_leak = false;
    let mut any_release = false;
    let mut normal_leak = false;
    let mut normal_release = false;
    for p in paths {
        let s = simulate_path(cfg, analysis, p).get(key).copied().unwrap_or_default();
        let exceptional = p.is_exceptional(cfg);
        any_leak |= s.leaking();
        any_release |= s.released;
        normal_leak |= s.leaking() && !exceptional;
        normal_release |= s.released && !exceptional;
    }
    if !any_leak {
        None
    } else if !any_release {
        Some(LeakExtent::Complete)
    } else if !normal_leak && normal_release {
        Some(LeakExtent::ExceptionalOnly)
    } else {
        Some(LeakExtent::SomeNormalPaths)
    }
}

fn heuristic_extent(cfg: &Cfg, analysis: &Analysis, key: &Key, end: Option<NodeId>) -> Option<LeakExtent> {
    let released = !analysis.release_nodes(&key.0).is_empty();
    let leaks_at = |n: NodeId| analysis.in_envs[n].state(key).is_leaking();
    let (normal, any) = match end {
        Some(n) => (leaks_at(n), leaks_at(n)),
        None => {
            let normal = leaks_at(cfg.normal_exit());
            (normal, normal || leaks_at(cfg.exceptional_exit()))
        }
    };
    if !any {
        None
    } else if !released {
        Some(LeakExtent::Complete)
    } else if normal {
        Some(LeakExtent::SomeNormalPaths)
    } else {
        Some(LeakExtent::ExceptionalOnly)
    }
}

/// Classifies how a binding leaks over the Entry-to-exit paths.
pub fn classify_extent(cfg: &Cfg, analysis: &Analysis, key: &Key) -> ExtentResult {
    match brute_force_paths(cfg, 2) {
        Ok(paths) => ExtentResult { extent: classify_paths(cfg, analysis, key, &paths), approximate: false },
        Err(_) => ExtentResult { extent: heuristic_extent(cfg, analysis, key, None), approximate: true },
    }
}

/// Like [`classify_extent`], over path prefixes ending at `node`; the value
/// held there is treated as leaked.
pub fn classify_extent_at(cfg: &Cfg, analysis: &Analysis, key: &Key, node: NodeId) -> ExtentResult {
    match enumerate_paths(cfg, 2, |n| n == node) {
        Ok(paths) => ExtentResult { extent: classify_paths(cfg, analysis, key, &paths), approximate: false },
        Err(_) => ExtentResult { extent: heuristic_extent(cfg, analysis, key, Some(node)), approximate: true },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::{build_cfg, parse_unit};
    use crate::registry::builtin_registry;

    fn run(body: &str) -> (Cfg, MethodContext, Analysis) {
        let src = format!("class A extends Activity {{ SQLiteDatabase db; void m() {{ {body} }} }}");
        let unit = parse_unit(&src, "A.java").unwrap();
        let class = &unit.classes[0];
        let method = class.methods.iter().find(|m| m.name == "m").unwrap();
        let cfg = build_cfg(method).unwrap();
        let reg = builtin_registry();
        let ctx = MethodContext::new(&unit, class, method);
        let a = analyze(&cfg, &ctx, &reg).unwrap();
        (cfg, ctx, a)
    }

    fn key(ctx: &MethodContext, name: &str, class: &str) -> Key {
        let id = ctx.locals.iter().position(|l| l.name == name).unwrap();
        (Binding::Local(LocalId(id as u32)), builtin_registry().lookup(class).unwrap())
    }

    const CURSOR: &str = "android.database.Cursor";
    const WAKELOCK: &str = "android.os.PowerManager.WakeLock";

    #[test]
    fn join_table() {
        use AbstractState::*;
        assert_eq!(Acquired(1).join(Released), MaybeReleased);
        assert_eq!(Released.join(Escaped), Escaped);
        assert_eq!(Acquired(2).join(Acquired(5)), Acquired(5));
        assert_eq!(Bottom.join(Released), Released);
        assert_eq!(MaybeReleased.release(), Released);
        assert_eq!(Acquired(2).release(), Acquired(1));
        assert_eq!(Acquired(8).acquire_in_place(true), Acquired(8));
    }

    #[test]
    fn acquire_then_close() {
        let (cfg, ctx, a) = run("Cursor c = db.query(\"t\"); c.close();");
        assert_eq!(a.in_envs[cfg.normal_exit()].state(&key(&ctx, "c", CURSOR)), AbstractState::Released);
        assert!(a.events.is_empty());
        assert!(leaks_at_exit(&cfg, &a).is_empty());
    }

    #[test]
    fn counted_double_acquire() {
        let (cfg, ctx, a) = run("PowerManager.WakeLock w = pm.newWakeLock(1, \"t\"); w.acquire(); w.acquire();");
        assert_eq!(a.in_envs[cfg.normal_exit()].state(&key(&ctx, "w", WAKELOCK)), AbstractState::Acquired(2));
        let re: Vec<_> = a.events.iter().filter(|e| e.kind == FlowEventKind::ReacquireWhileHeld).collect();
        assert_eq!(re.len(), 1);
    }

    #[test]
    fn overwrite_loses_reference() {
        let (_, _, a) = run("Cursor c = db.query(\"a\");\n c = db.query(\"b\");\n c.close();");
        assert_eq!(a.events.len(), 1);
        assert_eq!(a.events[0].kind, FlowEventKind::LostReference);
        assert_eq!(a.events[0].line, 2);
    }

    #[test]
    fn alias_transfers_obligation() {
        let (cfg, ctx, a) = run("Cursor c = db.query(\"a\"); Cursor d = c; c = db.query(\"b\"); c.close(); d.close();");
        assert!(a.events.is_empty());
        assert_eq!(a.in_envs[cfg.normal_exit()].state(&key(&ctx, "d", CURSOR)), AbstractState::Released);
    }

    #[test]
    fn null_check_refines() {
        let (cfg, _, a) = run("Cursor c = null; try { c = db.query(\"a\"); c.moveToFirst(); } finally { if (c != null) c.close(); }");
        assert!(leaks_at_exit(&cfg, &a).is_empty());
    }

    #[test]
    fn unbound_acquire_event() {
        let (_, _, a) = run("new FileReader(f);");
        assert_eq!(a.events.len(), 1);
        assert_eq!(a.events[0].kind, FlowEventKind::UnboundAcquire);
    }

    #[test]
    fn wrapped_acquire_is_absorbed() {
        let (cfg, _, a) = run("BufferedReader r = new BufferedReader(new FileReader(f)); r.readLine(); r.close();");
        assert!(a.events.is_empty());
        assert!(leaks_at_exit(&cfg, &a).iter().all(|l| l.exits == vec![cfg.exceptional_exit()]) );
    }

    #[test]
    fn path_counts() {
        let (cfg, _, _) = run("int x = 1;");
        assert_eq!(brute_force_paths(&cfg, 2).unwrap().len(), 1);
        let (cfg, _, _) = run("int x; if (p) x = 1; else x = 2;");
        assert_eq!(brute_force_paths(&cfg, 2).unwrap().len(), 2);
        let (cfg, _, _) = run("int x; if (p) x = 1; else x = 2; foo();");
        assert_eq!(brute_force_paths(&cfg, 2).unwrap().len(), 4);
    }

    #[test]
    fn extents() {
        let (cfg, ctx, a) = run("Cursor c = db.query(\"a\"); c.moveToFirst();");
        let k = key(&ctx, "c", CURSOR);
        assert_eq!(classify_extent(&cfg, &a, &k).extent, Some(LeakExtent::Complete));
        let (cfg, ctx, a) = run("Cursor c = db.query(\"a\"); try { c.moveToFirst(); c.close(); } catch (Exception e) { }");
        let k = key(&ctx, "c", CURSOR);
        assert_eq!(classify_extent(&cfg, &a, &k).extent, Some(LeakExtent::ExceptionalOnly));
        let (cfg, ctx, a) = run("Cursor c = db.query(\"a\"); if (p) { c.close(); }");
        let k = key(&ctx, "c", CURSOR);
        assert_eq!(classify_extent(&cfg, &a, &k).extent, Some(LeakExtent::SomeNormalPaths));
    }

    #[test]
    fn loop_terminates_within_bound() {
        let (cfg, _, a) = run("PowerManager.WakeLock w = pm.newWakeLock(1, \"t\"); while (p) { w.acquire(); if (q) w.release(); }");
        assert!(a.iterations <= cfg.len() * (4 + COUNT_CAP as usize));
    }
}
