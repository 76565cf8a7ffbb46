//! Normalized statements and expressions for one method body.
//!
//! The parser lowers Java straight into this form: blocks are flattened,
//! casts and parentheses disappear, ternaries used as a whole right-hand side
//! become `If`s, and anything the analyses do not look into is kept as
//! [`Expr::Other`] with its sub-expressions in evaluation order.

pub type Line = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalId(pub u32);

/// A parameter or local variable declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalVar {
    pub name: String,
    /// Declared type as written; `None` for `var` and untyped lambda params.
    pub ty: Option<String>,
    pub line: Line,
    pub is_param: bool,
}

/// A resolved variable reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Local(LocalId),
    /// Not declared in the method: a field of the enclosing class, an
    /// inherited field, or a variable captured from an enclosing method.
    Free(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Null,
    Bool(bool),
    Number(String),
    Str(String),
    Char(String),
    Class(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Arith,
}

impl BinOp {
    /// The operator with its operands swapped (`a < b` is `b > a`).
    pub fn flipped(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Receiver {
    /// Unqualified call on `this`.
    Implicit,
    Super,
    /// Static call through a type name.
    Type(String),
    Expr(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub receiver: Receiver,
    pub name: String,
    pub args: Vec<Expr>,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewObject {
    pub ty: String,
    pub args: Vec<Expr>,
    /// Synthetic class name when the expression declares an anonymous class.
    pub anon_class: Option<String>,
    /// Locals of the enclosing method referenced inside the anonymous body.
    pub captured: Vec<LocalId>,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Call(Call),
    New(NewObject),
    /// Includes `this.x`, which the parser folds into `Var(Free("x"))`.
    Var(VarRef),
    Field { owner: Box<Expr>, name: String },
    This,
    Literal(Literal),
    Not(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    /// Simple assignment used as a value, e.g. in a loop condition.
    Assign { target: Box<LValue>, value: Box<Expr> },
    Lambda { class_name: String, captured: Vec<LocalId> },
    Other(Vec<Expr>),
}

impl Expr {
    pub fn other(parts: Vec<Expr>) -> Expr {
        Expr::Other(parts)
    }

    /// Whether the expression performs a call (including constructors).
    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Call(_) | Expr::New(_)));
        found
    }

    /// Pre-order traversal over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Call(c) => {
                if let Receiver::Expr(r) = &c.receiver {
                    r.walk(f);
                }
                c.args.iter().for_each(|a| a.walk(f));
            }
            Expr::New(n) => n.args.iter().for_each(|a| a.walk(f)),
            Expr::Field { owner, .. } => owner.walk(f),
            Expr::Not(e) => e.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Assign { target, value } => {
                target.walk(f);
                value.walk(f);
            }
            Expr::Other(parts) => parts.iter().for_each(|p| p.walk(f)),
            Expr::Var(_) | Expr::This | Expr::Literal(_) | Expr::Lambda { .. } => {}
        }
    }

    pub fn as_var(&self) -> Option<&VarRef> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Expr::Literal(Literal::Null))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Expr::Literal(Literal::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Expr::Literal(Literal::Number(n)) => n.trim_end_matches(['l', 'L']).parse().ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(VarRef),
    Field { owner: Expr, name: String },
    /// Array element or other non-variable target.
    Other(Expr),
}

impl LValue {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match self {
            LValue::Var(_) => {}
            LValue::Field { owner, .. } => owner.walk(f),
            LValue::Other(e) => e.walk(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    While,
    DoWhile,
    For,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatchClause {
    pub param: LocalId,
    pub types: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: Line,
}

impl CatchClause {
    /// Catches every unchecked exception a call can throw.
    pub fn catches_all(&self) -> bool {
        self.types.iter().any(|t| {
            let simple = t.rsplit('.').next().unwrap_or(t);
            matches!(simple, "Throwable" | "Exception" | "RuntimeException")
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchCase {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Vec<Stmt>,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { target: LValue, value: Expr },
    Expr(Expr),
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    Loop { label: Option<String>, kind: LoopKind, cond: Option<Expr>, body: Vec<Stmt>, update: Vec<Stmt> },
    Switch { label: Option<String>, scrutinee: Expr, cases: Vec<SwitchCase> },
    Try { body: Vec<Stmt>, catches: Vec<CatchClause>, finally: Option<Vec<Stmt>> },
    Labeled { label: String, body: Vec<Stmt> },
    Return(Option<Expr>),
    Throw(Expr),
    Break(Option<String>),
    Continue(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: Line,
}

impl Stmt {
    pub fn new(kind: StmtKind, line: Line) -> Stmt {
        Stmt { kind, line }
    }
}

/// Visits every statement of a body, nested ones included.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                walk_stmts(then_branch, f);
                walk_stmts(else_branch, f);
            }
            StmtKind::Loop { body, update, .. } => {
                walk_stmts(body, f);
                walk_stmts(update, f);
            }
            StmtKind::Switch { cases, .. } => cases.iter().for_each(|c| walk_stmts(&c.body, f)),
            StmtKind::Try { body, catches, finally } => {
                walk_stmts(body, f);
                catches.iter().for_each(|c| walk_stmts(&c.body, f));
                if let Some(fin) = finally {
                    walk_stmts(fin, f);
                }
            }
            StmtKind::Labeled { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}
