//! Brute-force leak oracle: replays every Entry-to-exit path concretely and
//! joins the per-path outcomes, independently of the fixpoint engine.

use std::collections::{BTreeMap, BTreeSet};

use leaklint_core::dataflow::{brute_force_paths, AbstractState, Path};
use leaklint_core::java::cfg::{Cfg, EdgeLabel, NodeKind};
use leaklint_core::java::ir::{BinOp, Call, Expr, LValue, LocalId, Receiver, VarRef};
use leaklint_core::java::{ClassDecl, MethodDecl};
use leaklint_core::registry::{CallSite, ReceiverType, Registry, SpecId};

#[derive(Clone, Copy, Default, Debug)]
struct Held {
    count: u32,
    escaped: bool,
}

pub struct Oracle<'a> {
    pub reg: &'a Registry,
    pub class: &'a ClassDecl,
    pub method: &'a MethodDecl,
}

type State = BTreeMap<(LocalId, SpecId), Held>;

impl Oracle<'_> {
    fn var_type(&self, v: &VarRef) -> Option<String> {
        match v {
            VarRef::Local(id) => self.method.locals[id.0 as usize].ty.clone(),
            VarRef::Free(n) => self.class.field(n).map(|f| f.ty.clone()),
        }
    }

    fn receiver_type(&self, r: &Receiver) -> Option<String> {
        match r {
            Receiver::Expr(e) => match &**e {
                Expr::Var(v) => self.var_type(v),
                _ => None,
            },
            Receiver::Type(t) => Some(t.clone()),
            Receiver::Implicit => {
                let sup = self.class.superclass.as_deref().unwrap_or("");
                sup.ends_with("Activity").then(|| "android.content.Context".to_string())
            }
            Receiver::Super => None,
        }
    }

    fn acquire_spec(&self, e: &Expr) -> Option<SpecId> {
        let (ty, name, arity) = match e {
            Expr::Call(c) => (self.receiver_type(&c.receiver), c.name.as_str(), c.args.len()),
            Expr::New(n) => (Some(n.ty.clone()), "<init>", n.args.len()),
            _ => return None,
        };
        let recv = ty.as_deref().map_or(ReceiverType::Unknown, ReceiverType::Known);
        let m = self.reg.match_acquire(&CallSite::new(recv, name, arity)).ok()??;
        if matches!(e, Expr::New(_)) && m.via_wildcard {
            return None;
        }
        Some(m.spec)
    }

    fn local_of(e: &Expr) -> Option<LocalId> {
        match e {
            Expr::Var(VarRef::Local(id)) => Some(*id),
            _ => None,
        }
    }

    fn calls(e: &Expr) -> Vec<&Call> {
        let mut out = Vec::new();
        e.walk(&mut |x| {
            if let Expr::Call(c) = x {
                out.push(c);
            }
        });
        out
    }

    fn locals_in_args(e: &Expr) -> Vec<LocalId> {
        let mut out = Vec::new();
        e.walk(&mut |x| {
            let args = match x {
                Expr::Call(c) => &c.args,
                Expr::New(n) => &n.args,
                _ => return,
            };
            out.extend(args.iter().filter_map(Self::local_of));
        });
        out
    }

    fn exprs(kind: &NodeKind) -> Vec<&Expr> {
        kind.exprs()
    }

    /// Effects of calls inside the node: releases, in-place acquires, escapes.
    fn call_effects(&self, kind: &NodeKind, st: &mut State, exceptional: bool) {
        for e in Self::exprs(kind) {
            for id in Self::locals_in_args(e) {
                for (k, h) in st.iter_mut() {
                    if k.0 == id {
                        h.escaped = true;
                    }
                }
            }
            for c in Self::calls(e) {
                let Some(id) = (match &c.receiver {
                    Receiver::Expr(r) => Self::local_of(r),
                    _ => None,
                }) else {
                    continue;
                };
                for (k, h) in st.iter_mut() {
                    let spec = self.reg.spec(k.1);
                    let releases = spec
                        .release_sigs
                        .iter()
                        .any(|s| !s.resource_arg && s.matches_name(&c.name, c.args.len()));
                    if k.0 == id && releases {
                        h.count = h.count.saturating_sub(1);
                    }
                }
                if exceptional {
                    continue;
                }
                let ty = self.method.locals[id.0 as usize].ty.clone();
                let recv = ty.as_deref().map_or(ReceiverType::Unknown, ReceiverType::Known);
                if let Ok(Some(m)) = self.reg.match_acquire(&CallSite::new(recv, &c.name, c.args.len())) {
                    let spec = self.reg.spec(m.spec);
                    let own = spec.acquire_sigs.iter().any(|s| s.receiver_class == spec.class_name);
                    if own && !m.resource_arg {
                        let h = st.entry((id, m.spec)).or_default();
                        if spec.counted {
                            h.count += 1;
                        } else if h.count == 0 {
                            h.count = 1;
                        }
                    }
                }
            }
        }
    }

    fn overwrite(st: &mut State, id: LocalId) {
        for (k, h) in st.iter_mut() {
            if k.0 == id {
                *h = Held::default();
            }
        }
    }

    fn step(&self, kind: &NodeKind, label: EdgeLabel, st: &mut State) {
        let exceptional = label.is_exceptional();
        self.call_effects(kind, st, exceptional);
        match kind {
            NodeKind::Return(Some(e)) => {
                if let Some(id) = Self::local_of(e) {
                    for (k, h) in st.iter_mut() {
                        if k.0 == id {
                            h.escaped = true;
                        }
                    }
                }
            }
            NodeKind::Assign { target: LValue::Var(VarRef::Local(x)), value } if !exceptional => {
                if let Some(src) = Self::local_of(value) {
                    let moved: Vec<_> = st.iter().filter(|(k, _)| k.0 == src).map(|(k, h)| (k.1, *h)).collect();
                    Self::overwrite(st, *x);
                    for (spec, h) in moved {
                        st.insert((*x, spec), h);
                        st.get_mut(&(src, spec)).unwrap().escaped = true;
                    }
                } else {
                    Self::overwrite(st, *x);
                    if let Some(spec) = self.acquire_spec(value) {
                        st.insert((*x, spec), Held { count: 1, escaped: false });
                    }
                }
            }
            NodeKind::Branch(Expr::Binary { op, lhs, rhs }) if rhs.is_null() => {
                if let Some(id) = Self::local_of(lhs) {
                    let null_edge = match op {
                        BinOp::Eq => EdgeLabel::True,
                        BinOp::Ne => EdgeLabel::False,
                        _ => return,
                    };
                    if label == null_edge {
                        Self::overwrite(st, id);
                    }
                }
            }
            _ => {}
        }
    }

    fn run(&self, cfg: &Cfg, path: &Path) -> State {
        let mut st = State::new();
        for (i, &e) in path.edges.iter().enumerate() {
            self.step(&cfg.node(path.nodes[i]).kind, cfg.edge(e).label, &mut st);
        }
        st
    }

    /// `(exit node, local, spec)` for every binding some path leaves held
    /// at that exit, under the join of all path outcomes at the exit.
    pub fn leaks(&self, cfg: &Cfg) -> BTreeSet<(usize, LocalId, SpecId)> {
        let paths = brute_force_paths(cfg, 2).expect("small CFG");
        let mut joined: BTreeMap<(usize, LocalId, SpecId), AbstractState> = BTreeMap::new();
        for p in &paths {
            let exit = *p.nodes.last().unwrap();
            for ((id, spec), h) in self.run(cfg, p) {
                let s = if h.escaped {
                    AbstractState::Escaped
                } else if h.count > 0 {
                    AbstractState::Acquired(1)
                } else {
                    AbstractState::Released
                };
                let slot = joined.entry((exit, id, spec)).or_insert(AbstractState::Bottom);
                *slot = slot.join(s);
            }
        }
        joined.into_iter().filter(|(_, s)| s.is_leaking()).map(|(k, _)| k).collect()
    }
}
