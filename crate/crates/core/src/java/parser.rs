//! Recursive-descent parser lowering Java source directly into the IR.

use std::collections::{BTreeSet, HashMap};

use super::ir::*;
use super::lexer::{Tok, Token};
use super::{ClassDecl, ClassKind, FieldDecl, MethodDecl, SyntaxError};

type PResult<T> = Result<T, SyntaxError>;

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null",
];

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"];

const MEMBER_MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "sealed",
];

const PACKAGE_ROOTS: &[&str] = &["java", "javax", "android", "androidx", "com", "org", "net", "io", "dalvik", "junit", "kotlin"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_primitive(s: &str) -> bool {
    PRIMITIVES.contains(&s)
}

fn is_type_like(s: &str) -> bool {
    let mut chars = s.chars();
    let upper_start = chars.next().is_some_and(|c| c.is_ascii_uppercase());
    let all_caps = s.len() > 1 && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
    upper_start && !all_caps
}

struct MethodCtx {
    locals: Vec<LocalVar>,
    scopes: Vec<HashMap<String, LocalId>>,
}

impl Default for MethodCtx {
    fn default() -> Self {
        MethodCtx { locals: Vec::new(), scopes: vec![HashMap::new()] }
    }
}

impl MethodCtx {
    fn lookup(&self, name: &str) -> Option<LocalId> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }
}

enum Frame {
    Method(MethodCtx),
    /// Entered with each class body; collects outer locals referenced inside.
    Boundary(BTreeSet<LocalId>),
}

/// Right-hand side with conditional structure kept for lowering.
enum Rhs {
    Plain(Expr),
    Cond(Expr, Box<Rhs>, Box<Rhs>),
    Assign(LValue, Box<Rhs>),
}

impl Rhs {
    fn into_expr(self) -> Expr {
        match self {
            Rhs::Plain(e) => e,
            Rhs::Cond(c, a, b) => Expr::Other(vec![c, a.into_expr(), b.into_expr()]),
            Rhs::Assign(t, v) => Expr::Assign { target: Box::new(t), value: Box::new(v.into_expr()) },
        }
    }
}

fn to_lvalue(e: Expr) -> LValue {
    match e {
        Expr::Var(v) => LValue::Var(v),
        Expr::Field { owner, name } => LValue::Field { owner: *owner, name },
        other => LValue::Other(other),
    }
}

fn lvalue_expr(t: &LValue) -> Expr {
    match t {
        LValue::Var(v) => Expr::Var(v.clone()),
        LValue::Field { owner, name } => Expr::Field { owner: Box::new(owner.clone()), name: name.clone() },
        LValue::Other(e) => e.clone(),
    }
}

fn lower_assign(target: LValue, rhs: Rhs, line: Line) -> Vec<Stmt> {
    match rhs {
        Rhs::Plain(value) => vec![Stmt::new(StmtKind::Assign { target, value }, line)],
        Rhs::Cond(cond, a, b) => {
            let then_branch = lower_assign(target.clone(), *a, line);
            let else_branch = lower_assign(target, *b, line);
            vec![Stmt::new(StmtKind::If { cond, then_branch, else_branch }, line)]
        }
        Rhs::Assign(inner, value) => {
            let mut out = lower_assign(inner.clone(), *value, line);
            out.push(Stmt::new(StmtKind::Assign { target, value: lvalue_expr(&inner) }, line));
            out
        }
    }
}

fn lower_return(rhs: Rhs, line: Line) -> Vec<Stmt> {
    match rhs {
        Rhs::Cond(cond, a, b) => {
            let then_branch = lower_return(*a, line);
            let else_branch = lower_return(*b, line);
            vec![Stmt::new(StmtKind::If { cond, then_branch, else_branch }, line)]
        }
        Rhs::Assign(t, v) => {
            let mut out = lower_assign(t.clone(), *v, line);
            out.push(Stmt::new(StmtKind::Return(Some(lvalue_expr(&t))), line));
            out
        }
        Rhs::Plain(e) => vec![Stmt::new(StmtKind::Return(Some(e)), line)],
    }
}

#[derive(Clone, Copy)]
enum BinTok {
    Op(BinOp),
    InstanceOf,
}

struct ClassCtx {
    name: String,
    kind: ClassKind,
    anon_count: u32,
    lambda_count: u32,
}

/// Statements and locals of a synthetic initializer method.
#[derive(Default)]
struct InitMethod {
    ctx: Option<MethodCtx>,
    body: Vec<Stmt>,
    start: Line,
    end: Line,
}

impl InitMethod {
    fn finish(self, name: &str) -> Option<MethodDecl> {
        if self.body.is_empty() {
            return None;
        }
        Some(MethodDecl {
            name: name.to_string(),
            params: Vec::new(),
            locals: self.ctx.map(|c| c.locals).unwrap_or_default(),
            body: Some(self.body),
            is_constructor: false,
            start_line: self.start,
            end_line: self.end,
        })
    }
}

pub(super) struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    frames: Vec<Frame>,
    class_stack: Vec<ClassCtx>,
    classes: Vec<Option<ClassDecl>>,
}

impl<'t> Parser<'t> {
    pub(super) fn new(toks: &'t [Token]) -> Self {
        Parser { toks, pos: 0, frames: Vec::new(), class_stack: Vec::new(), classes: Vec::new() }
    }

    // ---- token helpers ----

    fn tok_at(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.tok_at(0).tok
    }

    fn punct_at(&self, n: usize, p: &str) -> bool {
        matches!(&self.tok_at(n).tok, Tok::Punct(q) if *q == p)
    }

    fn is(&self, p: &str) -> bool {
        self.punct_at(0, p)
    }

    fn ident_at(&self, n: usize) -> Option<&str> {
        match &self.tok_at(n).tok {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn kw_at(&self, n: usize, kw: &str) -> bool {
        self.ident_at(n) == Some(kw)
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.kw_at(0, kw)
    }

    /// A non-keyword identifier at offset `n`.
    fn name_at(&self, n: usize) -> Option<&str> {
        self.ident_at(n).filter(|s| !is_keyword(s))
    }

    fn advance(&mut self) {
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn line(&self) -> Line {
        self.tok_at(0).line
    }

    fn prev_line(&self) -> Line {
        self.toks[self.pos.saturating_sub(1)].line
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        let t = self.tok_at(0);
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Int(s) | Tok::Float(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Char(_) => "character literal".into(),
            Tok::Eof => "end of input".into(),
        };
        SyntaxError::new(t.line, t.col, format!("{}, found {found}", msg.into()))
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`")))
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.name_at(0) {
            Some(s) => {
                let s = s.to_string();
                self.advance();
                Ok(s)
            }
            None => Err(self.err("expected identifier")),
        }
    }

    /// Whether token `n` starts exactly where token `n - 1` ends.
    fn adjacent(&self, n: usize) -> bool {
        let a = self.tok_at(n - 1);
        let b = self.tok_at(n);
        let len = match &a.tok {
            Tok::Punct(p) => p.len() as u32,
            _ => return false,
        };
        a.line == b.line && a.col + len == b.col
    }

    // Skips a bracketed region starting at an opening token.
    fn skip_balanced(&mut self) -> PResult<()> {
        let (open, close) = match self.peek() {
            Tok::Punct("(") => ("(", ")"),
            Tok::Punct("{") => ("{", "}"),
            Tok::Punct("[") => ("[", "]"),
            _ => return Err(self.err("expected bracket")),
        };
        let start = self.tok_at(0).clone();
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return Err(SyntaxError::new(start.line, start.col, format!("unclosed `{open}`"))),
                Tok::Punct(p) if *p == open => depth += 1,
                Tok::Punct(p) if *p == close => {
                    depth -= 1;
                    if depth == 0 {
                        self.advance();
                        return Ok(());
                    }
                }
                _ => {}
            }
            self.advance();
        }
    }

    // ---- frames and scopes ----

    fn ctx(&mut self) -> PResult<&mut MethodCtx> {
        if !matches!(self.frames.last(), Some(Frame::Method(_))) {
            return Err(self.err("declaration outside of a method body"));
        }
        match self.frames.last_mut() {
            Some(Frame::Method(m)) => Ok(m),
            _ => unreachable!("checked above"),
        }
    }

    fn push_scope(&mut self) {
        if let Some(Frame::Method(m)) = self.frames.last_mut() {
            m.scopes.push(HashMap::new());
        }
    }

    fn pop_scope(&mut self) {
        if let Some(Frame::Method(m)) = self.frames.last_mut() {
            m.scopes.pop();
        }
    }

    fn declare(&mut self, name: &str, ty: Option<String>, line: Line, is_param: bool) -> PResult<LocalId> {
        let ty = ty.filter(|t| t != "var");
        let ctx = self.ctx()?;
        let id = LocalId(ctx.locals.len() as u32);
        ctx.locals.push(LocalVar { name: name.to_string(), ty, line, is_param });
        ctx.scopes.last_mut().expect("method scope").insert(name.to_string(), id);
        Ok(id)
    }

    /// Resolves a simple name against the enclosing method scopes, recording
    /// captures when the name belongs to an enclosing method.
    fn resolve(&mut self, name: &str) -> Option<VarRef> {
        let mut boundary: Option<usize> = None;
        for i in (0..self.frames.len()).rev() {
            match &self.frames[i] {
                Frame::Boundary(_) => boundary = Some(i),
                Frame::Method(m) => {
                    if let Some(id) = m.lookup(name) {
                        return match boundary {
                            None => Some(VarRef::Local(id)),
                            Some(b) => {
                                if let Frame::Boundary(set) = &mut self.frames[b] {
                                    set.insert(id);
                                }
                                Some(VarRef::Free(name.to_string()))
                            }
                        };
                    }
                }
            }
        }
        None
    }

    fn enclosing_class(&self) -> String {
        self.class_stack
            .iter()
            .rev()
            .find(|c| c.kind != ClassKind::Lambda)
            .map(|c| c.name.clone())
            .unwrap_or_default()
    }

    fn next_anon_name(&mut self) -> String {
        let c = self.class_stack.iter_mut().rev().find(|c| c.kind != ClassKind::Lambda);
        match c {
            Some(c) => {
                c.anon_count += 1;
                format!("{}${}", c.name, c.anon_count)
            }
            None => "$1".to_string(),
        }
    }

    fn next_lambda_name(&mut self) -> String {
        let c = self.class_stack.iter_mut().rev().find(|c| c.kind != ClassKind::Lambda);
        match c {
            Some(c) => {
                c.lambda_count += 1;
                format!("{}$lambda${}", c.name, c.lambda_count)
            }
            None => "$lambda$1".to_string(),
        }
    }

    // ---- compilation unit and declarations ----

    pub(super) fn compilation_unit(mut self) -> PResult<Vec<ClassDecl>> {
        self.skip_annotations()?;
        if self.eat_kw("package") {
            self.qualified_name()?;
            self.expect(";")?;
        }
        while self.eat_kw("import") {
            self.eat_kw("static");
            self.qualified_name()?;
            if self.eat(".") {
                self.expect("*")?;
            }
            self.expect(";")?;
        }
        loop {
            if self.eat(";") {
                continue;
            }
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            self.member_modifiers()?;
            if !self.at_type_decl() {
                return Err(self.err("expected class, interface, enum or record declaration"));
            }
            self.type_decl(None)?;
        }
        Ok(self.classes.into_iter().flatten().collect())
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let mut s = self.name()?;
        while self.is(".") && self.name_at(1).is_some() {
            self.advance();
            s.push('.');
            s.push_str(&self.name()?);
        }
        Ok(s)
    }

    fn skip_annotations(&mut self) -> PResult<()> {
        while self.is("@") && !self.kw_at(1, "interface") {
            self.advance();
            self.qualified_name()?;
            if self.is("(") {
                self.skip_balanced()?;
            }
        }
        Ok(())
    }

    /// Skips member modifiers and annotations; returns whether `static` was seen.
    fn member_modifiers(&mut self) -> PResult<bool> {
        let mut is_static = false;
        loop {
            self.skip_annotations()?;
            match self.ident_at(0) {
                Some("static") if !self.punct_at(1, "{") => is_static = true,
                Some(m) if MEMBER_MODIFIERS.contains(&m) => {}
                Some("default") if !self.punct_at(1, ":") && !self.punct_at(1, "->") => {}
                Some("non") if self.punct_at(1, "-") && self.kw_at(2, "sealed") => {
                    self.advance();
                    self.advance();
                }
                _ => return Ok(is_static),
            }
            self.advance();
        }
    }

    fn local_modifiers(&mut self) -> PResult<()> {
        loop {
            self.skip_annotations()?;
            if !(self.eat_kw("final") || self.eat_kw("abstract") || self.eat_kw("static") || self.eat_kw("strictfp")) {
                return Ok(());
            }
        }
    }

    fn at_type_decl(&self) -> bool {
        match self.ident_at(0) {
            Some("class" | "interface" | "enum") => true,
            Some("record") => self.name_at(1).is_some() && (self.punct_at(2, "(") || self.punct_at(2, "<")),
            _ => self.is("@") && self.kw_at(1, "interface"),
        }
    }

    fn type_decl(&mut self, outer: Option<String>) -> PResult<String> {
        let line = self.line();
        let kind = if self.eat("@") {
            self.expect_kw("interface")?;
            ClassKind::Annotation
        } else {
            let k = match self.ident_at(0) {
                Some("class") => ClassKind::Class,
                Some("interface") => ClassKind::Interface,
                Some("enum") => ClassKind::Enum,
                Some("record") => ClassKind::Record,
                _ => return Err(self.err("expected type declaration")),
            };
            self.advance();
            k
        };
        let simple = self.name()?;
        let name = match &outer {
            Some(o) => format!("{o}${simple}"),
            None => simple.clone(),
        };
        if self.is("<") {
            self.skip_type_args()?;
        }
        let mut components = Vec::new();
        if kind == ClassKind::Record {
            self.expect("(")?;
            while !self.eat(")") {
                self.skip_annotations()?;
                let fline = self.line();
                let ty = self.ty()?;
                let ty = if self.eat("...") { format!("{ty}[]") } else { ty };
                let fname = self.name()?;
                components.push(FieldDecl { name: fname, ty, line: fline });
                if !self.eat(",") {
                    self.expect(")")?;
                    break;
                }
            }
        }
        let mut superclass = None;
        let mut interfaces = Vec::new();
        loop {
            if self.eat_kw("extends") {
                let list = self.type_list()?;
                if kind == ClassKind::Interface {
                    interfaces.extend(list);
                } else {
                    superclass = list.into_iter().next();
                }
            } else if self.eat_kw("implements") {
                interfaces.extend(self.type_list()?);
            } else if self.eat_kw("permits") {
                self.type_list()?;
            } else {
                break;
            }
        }
        let decl = ClassDecl {
            name,
            kind,
            superclass,
            interfaces,
            fields: components,
            methods: Vec::new(),
            outer,
            start_line: line,
            end_line: line,
        };
        let (name, _) = self.class_body(decl, &simple)?;
        Ok(name)
    }

    fn type_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.ty()?];
        while self.eat(",") {
            out.push(self.ty()?);
        }
        Ok(out)
    }

    /// Parses `{ members }` for `decl`, registers the class and returns its
    /// name with the enclosing-method locals it captured.
    fn class_body(&mut self, mut decl: ClassDecl, simple: &str) -> PResult<(String, Vec<LocalId>)> {
        let slot = self.classes.len();
        self.classes.push(None);
        self.frames.push(Frame::Boundary(BTreeSet::new()));
        self.class_stack.push(ClassCtx { name: decl.name.clone(), kind: decl.kind, anon_count: 0, lambda_count: 0 });
        let mut inst = InitMethod::default();
        let mut stat = InitMethod::default();

        self.expect("{")?;
        if decl.kind == ClassKind::Enum {
            self.enum_constants(&mut decl, &mut stat)?;
        }
        loop {
            if self.eat("}") {
                decl.end_line = self.prev_line();
                break;
            }
            if self.eat(";") {
                continue;
            }
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.err("expected `}`"));
            }
            self.member(&mut decl, simple, &mut inst, &mut stat)?;
        }

        self.class_stack.pop();
        let captured = match self.frames.pop() {
            Some(Frame::Boundary(set)) => set.into_iter().collect(),
            _ => Vec::new(),
        };
        decl.methods.extend(inst.finish("<instinit>"));
        decl.methods.extend(stat.finish("<clinit>"));
        let name = decl.name.clone();
        self.classes[slot] = Some(decl);
        Ok((name, captured))
    }

    fn with_init<T>(&mut self, init: &mut InitMethod, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        if init.body.is_empty() && init.ctx.is_none() {
            init.start = self.line();
        }
        self.frames.push(Frame::Method(init.ctx.take().unwrap_or_default()));
        let r = f(self);
        if let Some(Frame::Method(m)) = self.frames.pop() {
            init.ctx = Some(m);
        }
        init.end = self.prev_line();
        r
    }

    fn enum_constants(&mut self, decl: &mut ClassDecl, stat: &mut InitMethod) -> PResult<()> {
        loop {
            self.skip_annotations()?;
            let Some(name) = self.name_at(0).map(str::to_string) else { break };
            let line = self.line();
            self.advance();
            decl.fields.push(FieldDecl { name, ty: decl.name.clone(), line });
            if self.is("(") {
                let args = self.with_init(stat, |p| p.call_args())?;
                if args.iter().any(Expr::contains_call) {
                    stat.body.push(Stmt::new(StmtKind::Expr(Expr::Other(args)), line));
                }
            }
            if self.is("{") {
                let anon = self.next_anon_name();
                let body = ClassDecl {
                    name: anon,
                    kind: ClassKind::Anonymous,
                    superclass: Some(decl.name.clone()),
                    interfaces: Vec::new(),
                    fields: Vec::new(),
                    methods: Vec::new(),
                    outer: Some(decl.name.clone()),
                    start_line: line,
                    end_line: line,
                };
                self.class_body(body, "")?;
            }
            if !self.eat(",") {
                break;
            }
        }
        if !self.eat(";") && !self.is("}") {
            return Err(self.err("expected `;` or `}` after enum constants"));
        }
        Ok(())
    }

    fn member(&mut self, decl: &mut ClassDecl, simple: &str, inst: &mut InitMethod, stat: &mut InitMethod) -> PResult<()> {
        if self.is("{") {
            let body = self.with_init(inst, |p| p.block().map(|(b, _)| b))?;
            inst.body.extend(body);
            return Ok(());
        }
        if self.is_kw("static") && self.punct_at(1, "{") {
            self.advance();
            let body = self.with_init(stat, |p| p.block().map(|(b, _)| b))?;
            stat.body.extend(body);
            return Ok(());
        }
        let start = self.line();
        let is_static = self.member_modifiers()?;
        if self.at_type_decl() {
            self.type_decl(Some(decl.name.clone()))?;
            return Ok(());
        }
        if self.is("<") {
            self.skip_type_args()?;
        }
        if self.kw_at(0, simple) && self.punct_at(1, "(") {
            self.advance();
            let m = self.method(simple, true, start)?;
            decl.methods.push(m);
            return Ok(());
        }
        if decl.kind == ClassKind::Record && self.kw_at(0, simple) && self.punct_at(1, "{") {
            self.advance();
            self.frames.push(Frame::Method(MethodCtx::default()));
            let (body, end) = self.block()?;
            let locals = self.pop_method();
            decl.methods.push(MethodDecl {
                name: simple.to_string(),
                params: Vec::new(),
                locals,
                body: Some(body),
                is_constructor: true,
                start_line: start,
                end_line: end,
            });
            return Ok(());
        }
        let ty = self.ty()?;
        let name = self.name()?;
        if self.is("(") {
            let m = self.method(&name, false, start)?;
            decl.methods.push(m);
            return Ok(());
        }
        // Field declarators.
        let mut name = name;
        loop {
            let line = self.line();
            let mut fty = ty.clone();
            while self.is("[") && self.punct_at(1, "]") {
                self.advance();
                self.advance();
                fty.push_str("[]");
            }
            decl.fields.push(FieldDecl { name: name.clone(), ty: fty, line });
            if self.eat("=") {
                let init = if is_static { &mut *stat } else { &mut *inst };
                let target = LValue::Var(VarRef::Free(name.clone()));
                let stmts = self.with_init(init, |p| {
                    let rhs = p.var_init()?;
                    Ok(lower_assign(target, rhs, line))
                })?;
                init.body.extend(stmts);
            }
            if !self.eat(",") {
                break;
            }
            name = self.name()?;
        }
        self.expect(";")
    }

    fn pop_method(&mut self) -> Vec<LocalVar> {
        match self.frames.pop() {
            Some(Frame::Method(m)) => m.locals,
            _ => Vec::new(),
        }
    }

    fn method(&mut self, name: &str, is_constructor: bool, start: Line) -> PResult<MethodDecl> {
        self.frames.push(Frame::Method(MethodCtx::default()));
        let r = self.method_rest(name, is_constructor, start);
        let locals = self.pop_method();
        r.map(|mut m| {
            m.locals = locals;
            m
        })
    }

    fn method_rest(&mut self, name: &str, is_constructor: bool, start: Line) -> PResult<MethodDecl> {
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                self.local_modifiers()?;
                let line = self.line();
                let mut ty = self.ty()?;
                if self.eat("...") {
                    ty.push_str("[]");
                }
                if self.eat_kw("this") {
                    // Receiver parameter.
                } else {
                    let pname = self.name()?;
                    while self.is("[") && self.punct_at(1, "]") {
                        self.advance();
                        self.advance();
                        ty.push_str("[]");
                    }
                    params.push(self.declare(&pname, Some(ty), line, true)?);
                }
                if !self.eat(",") {
                    self.expect(")")?;
                    break;
                }
            }
        }
        while self.is("[") && self.punct_at(1, "]") {
            self.advance();
            self.advance();
        }
        if self.eat_kw("throws") {
            self.type_list()?;
        }
        let (body, end) = if self.is("{") {
            let (b, end) = self.block()?;
            (Some(b), end)
        } else if self.eat_kw("default") {
            while !self.is(";") {
                if matches!(self.peek(), Tok::Eof) {
                    return Err(self.err("expected `;`"));
                }
                if self.is("(") || self.is("{") {
                    self.skip_balanced()?;
                } else {
                    self.advance();
                }
            }
            self.advance();
            (None, self.prev_line())
        } else {
            self.expect(";")?;
            (None, self.prev_line())
        };
        Ok(MethodDecl {
            name: name.to_string(),
            params,
            locals: Vec::new(),
            body,
            is_constructor,
            start_line: start,
            end_line: end,
        })
    }

    // ---- types ----

    fn skip_type_args(&mut self) -> PResult<()> {
        let start = self.tok_at(0).clone();
        self.expect("<")?;
        let mut depth = 1usize;
        while depth > 0 {
            match self.peek() {
                Tok::Punct("<") => depth += 1,
                Tok::Punct(">") => depth -= 1,
                Tok::Punct("." | "," | "?" | "[" | "]" | "&") | Tok::Ident(_) => {}
                Tok::Punct("@") => {
                    self.skip_annotations()?;
                    continue;
                }
                _ => return Err(SyntaxError::new(start.line, start.col, "malformed type arguments")),
            }
            self.advance();
        }
        Ok(())
    }

    /// Parses a type, returning its name without type arguments.
    fn ty(&mut self) -> PResult<String> {
        self.skip_annotations()?;
        let mut s = match self.ident_at(0) {
            Some(p) if is_primitive(p) => {
                let p = p.to_string();
                self.advance();
                p
            }
            Some(_) => {
                let mut s = self.name()?;
                loop {
                    if self.is("<") {
                        self.skip_type_args()?;
                    }
                    if self.is(".") && (self.name_at(1).is_some() || self.punct_at(1, "@")) {
                        self.advance();
                        self.skip_annotations()?;
                        s.push('.');
                        s.push_str(&self.name()?);
                    } else {
                        break;
                    }
                }
                s
            }
            None => return Err(self.err("expected type")),
        };
        while self.is("[") && self.punct_at(1, "]") {
            self.advance();
            self.advance();
            s.push_str("[]");
        }
        Ok(s)
    }

    fn try_ty(&mut self) -> Option<String> {
        let save = self.pos;
        match self.ty() {
            Ok(t) => Some(t),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<(Vec<Stmt>, Line)> {
        self.expect("{")?;
        self.push_scope();
        let mut out = Vec::new();
        let r = loop {
            if self.eat("}") {
                break Ok(());
            }
            if matches!(self.peek(), Tok::Eof) {
                break Err(self.err("expected `}`"));
            }
            if let Err(e) = self.statement(&mut out) {
                break Err(e);
            }
        };
        self.pop_scope();
        r.map(|_| (out, self.prev_line()))
    }

    /// Parses a sub-statement in its own scope.
    fn scoped_statement(&mut self) -> PResult<Vec<Stmt>> {
        self.push_scope();
        let mut out = Vec::new();
        let r = self.statement(&mut out);
        self.pop_scope();
        r.map(|_| out)
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.expect("(")?;
        let e = self.expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn statement(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let line = self.line();
        if self.is("{") {
            let (b, _) = self.block()?;
            out.extend(b);
            return Ok(());
        }
        if self.eat(";") {
            return Ok(());
        }
        if let Some(kw) = self.ident_at(0).map(str::to_string) {
            match kw.as_str() {
                "if" => {
                    self.advance();
                    let cond = self.paren_expr()?;
                    let then_branch = self.scoped_statement()?;
                    let else_branch = if self.eat_kw("else") { self.scoped_statement()? } else { Vec::new() };
                    out.push(Stmt::new(StmtKind::If { cond, then_branch, else_branch }, line));
                    return Ok(());
                }
                "while" => {
                    self.advance();
                    let cond = self.paren_expr()?;
                    let body = self.scoped_statement()?;
                    out.push(Stmt::new(
                        StmtKind::Loop { label: None, kind: LoopKind::While, cond: Some(cond), body, update: Vec::new() },
                        line,
                    ));
                    return Ok(());
                }
                "do" => {
                    self.advance();
                    let body = self.scoped_statement()?;
                    self.expect_kw("while")?;
                    let cond = self.paren_expr()?;
                    self.expect(";")?;
                    out.push(Stmt::new(
                        StmtKind::Loop { label: None, kind: LoopKind::DoWhile, cond: Some(cond), body, update: Vec::new() },
                        line,
                    ));
                    return Ok(());
                }
                "for" => {
                    self.advance();
                    self.push_scope();
                    let r = self.for_loop(line, out);
                    self.pop_scope();
                    return r;
                }
                "try" => {
                    self.advance();
                    self.push_scope();
                    let r = self.try_stmt(line, out);
                    self.pop_scope();
                    return r;
                }
                "switch" => {
                    self.advance();
                    let s = self.switch(line)?;
                    out.push(s);
                    return Ok(());
                }
                "return" => {
                    self.advance();
                    if self.eat(";") {
                        out.push(Stmt::new(StmtKind::Return(None), line));
                    } else {
                        let rhs = self.rhs()?;
                        self.expect(";")?;
                        out.extend(lower_return(rhs, line));
                    }
                    return Ok(());
                }
                "throw" => {
                    self.advance();
                    let e = self.expression()?;
                    self.expect(";")?;
                    out.push(Stmt::new(StmtKind::Throw(e), line));
                    return Ok(());
                }
                "break" | "continue" => {
                    self.advance();
                    let label = match self.name_at(0) {
                        Some(l) => {
                            let l = l.to_string();
                            self.advance();
                            Some(l)
                        }
                        None => None,
                    };
                    self.expect(";")?;
                    let kind = if kw == "break" { StmtKind::Break(label) } else { StmtKind::Continue(label) };
                    out.push(Stmt::new(kind, line));
                    return Ok(());
                }
                "synchronized" if self.punct_at(1, "(") => {
                    self.advance();
                    let lock = self.paren_expr()?;
                    if lock.contains_call() {
                        out.push(Stmt::new(StmtKind::Expr(lock), line));
                    }
                    let (b, _) = self.block()?;
                    out.extend(b);
                    return Ok(());
                }
                "assert" => {
                    self.advance();
                    let mut parts = vec![self.expression()?];
                    if self.eat(":") {
                        parts.push(self.expression()?);
                    }
                    self.expect(";")?;
                    out.push(Stmt::new(StmtKind::Expr(Expr::Other(parts)), line));
                    return Ok(());
                }
                "yield" if !self.punct_at(1, "=") && !self.punct_at(1, "(") && !self.punct_at(1, ".") => {
                    self.advance();
                    let e = self.expression()?;
                    self.expect(";")?;
                    out.push(Stmt::new(StmtKind::Expr(e), line));
                    return Ok(());
                }
                _ => {}
            }
            if self.name_at(0).is_some() && self.punct_at(1, ":") {
                let label = kw;
                self.advance();
                self.advance();
                let labels_loop = matches!(self.ident_at(0), Some("for" | "while" | "do" | "switch"));
                let mut body = self.scoped_statement()?;
                match body.last_mut().map(|s| &mut s.kind) {
                    Some(StmtKind::Loop { label: l @ None, .. }) | Some(StmtKind::Switch { label: l @ None, .. })
                        if labels_loop =>
                    {
                        *l = Some(label);
                        out.extend(body);
                    }
                    _ => out.push(Stmt::new(StmtKind::Labeled { label, body }, line)),
                }
                return Ok(());
            }
        }

        // Local class or variable declaration.
        let save = self.pos;
        self.local_modifiers()?;
        if self.at_type_decl() {
            let outer = self.enclosing_class();
            self.frames.push(Frame::Boundary(BTreeSet::new()));
            let r = self.type_decl(Some(outer));
            self.frames.pop();
            return r.map(|_| ());
        }
        if let Some(ty) = self.try_ty() {
            if self.name_at(0).is_some() && ["=", ";", ",", "["].iter().any(|p| self.punct_at(1, p)) {
                self.declarators(ty, out)?;
                return self.expect(";");
            }
        }
        self.pos = save;

        let rhs = self.rhs()?;
        self.expect(";")?;
        match rhs {
            Rhs::Assign(t, v) => out.extend(lower_assign(t, *v, line)),
            other => out.push(Stmt::new(StmtKind::Expr(other.into_expr()), line)),
        }
        Ok(())
    }

    fn declarators(&mut self, ty: String, out: &mut Vec<Stmt>) -> PResult<()> {
        loop {
            let line = self.line();
            let name = self.name()?;
            let mut vty = ty.clone();
            while self.is("[") && self.punct_at(1, "]") {
                self.advance();
                self.advance();
                vty.push_str("[]");
            }
            let id = self.declare(&name, Some(vty), line, false)?;
            if self.eat("=") {
                let rhs = self.var_init()?;
                out.extend(lower_assign(LValue::Var(VarRef::Local(id)), rhs, line));
            }
            if !self.eat(",") {
                return Ok(());
            }
        }
    }

    fn var_init(&mut self) -> PResult<Rhs> {
        if self.is("{") {
            Ok(Rhs::Plain(self.array_init()?))
        } else {
            self.rhs()
        }
    }

    fn array_init(&mut self) -> PResult<Expr> {
        self.expect("{")?;
        let mut parts = Vec::new();
        while !self.eat("}") {
            parts.push(self.var_init()?.into_expr());
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        Ok(Expr::Other(parts))
    }

    fn for_loop(&mut self, line: Line, out: &mut Vec<Stmt>) -> PResult<()> {
        self.expect("(")?;
        // Enhanced for.
        let save = self.pos;
        self.local_modifiers()?;
        if let Some(ty) = self.try_ty() {
            if self.name_at(0).is_some() && self.punct_at(1, ":") {
                let vline = self.line();
                let name = self.name()?;
                self.advance();
                let iterable = self.expression()?;
                self.expect(")")?;
                let id = self.declare(&name, Some(ty), vline, false)?;
                let mut body = vec![Stmt::new(
                    StmtKind::Assign { target: LValue::Var(VarRef::Local(id)), value: Expr::Other(Vec::new()) },
                    vline,
                )];
                body.extend(self.scoped_statement()?);
                if iterable.contains_call() {
                    out.push(Stmt::new(StmtKind::Expr(iterable), line));
                }
                out.push(Stmt::new(
                    StmtKind::Loop {
                        label: None,
                        kind: LoopKind::For,
                        cond: Some(Expr::Other(Vec::new())),
                        body,
                        update: Vec::new(),
                    },
                    line,
                ));
                return Ok(());
            }
        }
        self.pos = save;

        if !self.eat(";") {
            let save = self.pos;
            self.local_modifiers()?;
            let mut declared = false;
            if let Some(ty) = self.try_ty() {
                if self.name_at(0).is_some() && ["=", ";", ",", "["].iter().any(|p| self.punct_at(1, p)) {
                    self.declarators(ty, out)?;
                    declared = true;
                }
            }
            if !declared {
                self.pos = save;
                loop {
                    let l = self.line();
                    self.expr_stmt_into(l, out)?;
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect(";")?;
        }
        let cond = if self.is(";") { None } else { Some(self.expression()?) };
        self.expect(";")?;
        let mut update = Vec::new();
        if !self.is(")") {
            loop {
                let l = self.line();
                self.expr_stmt_into(l, &mut update)?;
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = self.scoped_statement()?;
        out.push(Stmt::new(StmtKind::Loop { label: None, kind: LoopKind::For, cond, body, update }, line));
        Ok(())
    }

    fn expr_stmt_into(&mut self, line: Line, out: &mut Vec<Stmt>) -> PResult<()> {
        match self.rhs()? {
            Rhs::Assign(t, v) => out.extend(lower_assign(t, *v, line)),
            other => out.push(Stmt::new(StmtKind::Expr(other.into_expr()), line)),
        }
        Ok(())
    }

    fn try_stmt(&mut self, line: Line, out: &mut Vec<Stmt>) -> PResult<()> {
        // Resources as (prefix statements, variable to close).
        let mut resources: Vec<(Vec<Stmt>, Expr, Line)> = Vec::new();
        if self.eat("(") {
            loop {
                if self.eat(")") {
                    break;
                }
                let rline = self.line();
                let save = self.pos;
                self.local_modifiers()?;
                let mut handled = false;
                if let Some(ty) = self.try_ty() {
                    if self.name_at(0).is_some() && self.punct_at(1, "=") {
                        let name = self.name()?;
                        self.advance();
                        let id = self.declare(&name, Some(ty), rline, false)?;
                        let rhs = self.rhs()?;
                        let stmts = lower_assign(LValue::Var(VarRef::Local(id)), rhs, rline);
                        resources.push((stmts, Expr::Var(VarRef::Local(id)), rline));
                        handled = true;
                    }
                }
                if !handled {
                    self.pos = save;
                    let e = self.expression()?;
                    resources.push((Vec::new(), e, rline));
                }
                if !self.eat(";") {
                    self.expect(")")?;
                    break;
                }
            }
        }
        let (mut body, _) = self.block()?;
        for (prefix, var, rline) in resources.into_iter().rev() {
            let close = Expr::Call(Call {
                receiver: Receiver::Expr(Box::new(var)),
                name: "close".to_string(),
                args: Vec::new(),
                line: rline,
            });
            let inner = Stmt::new(
                StmtKind::Try {
                    body,
                    catches: Vec::new(),
                    finally: Some(vec![Stmt::new(StmtKind::Expr(close), rline)]),
                },
                rline,
            );
            body = prefix;
            body.push(inner);
        }
        let mut catches = Vec::new();
        while self.is_kw("catch") {
            let cline = self.line();
            self.advance();
            self.expect("(")?;
            self.local_modifiers()?;
            let mut types = vec![self.ty()?];
            while self.eat("|") {
                types.push(self.ty()?);
            }
            let pline = self.line();
            let pname = self.name()?;
            self.expect(")")?;
            self.push_scope();
            let param = self.declare(&pname, types.first().cloned(), pline, false);
            let blk = param.and_then(|p| self.block().map(|(b, _)| (p, b)));
            self.pop_scope();
            let (param, body) = blk?;
            catches.push(CatchClause { param, types, body, line: cline });
        }
        let finally = if self.eat_kw("finally") { Some(self.block()?.0) } else { None };
        if catches.is_empty() && finally.is_none() {
            if body.is_empty() {
                return Err(self.err("expected `catch` or `finally`"));
            }
            out.extend(body);
        } else {
            out.push(Stmt::new(StmtKind::Try { body, catches, finally }, line));
        }
        Ok(())
    }

    fn switch(&mut self, line: Line) -> PResult<Stmt> {
        let scrutinee = self.paren_expr()?;
        self.expect("{")?;
        self.push_scope();
        let r = self.switch_cases();
        self.pop_scope();
        let cases = r?;
        Ok(Stmt::new(StmtKind::Switch { label: None, scrutinee, cases }, line))
    }

    fn switch_cases(&mut self) -> PResult<Vec<SwitchCase>> {
        let mut cases: Vec<SwitchCase> = Vec::new();
        loop {
            if self.eat("}") {
                return Ok(cases);
            }
            let cline = self.line();
            let mut labels = Vec::new();
            let mut is_default = false;
            if self.eat_kw("default") {
                is_default = true;
            } else if self.eat_kw("case") {
                loop {
                    if self.eat_kw("default") {
                        is_default = true;
                    } else {
                        let save = self.pos;
                        let mut pattern = false;
                        if let Some(_ty) = self.try_ty() {
                            if self.name_at(0).is_some() && !self.kw_at(0, "when") {
                                let pl = self.line();
                                let n = self.name()?;
                                self.declare(&n, Some(_ty), pl, false)?;
                                pattern = true;
                            } else if self.is("(") && self.name_at(0).is_none() {
                                self.skip_balanced()?;
                                pattern = true;
                            }
                        }
                        if pattern {
                            labels.push(Expr::Other(Vec::new()));
                        } else {
                            self.pos = save;
                            labels.push(self.binary(1)?);
                        }
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                if self.eat_kw("when") {
                    self.expression()?;
                }
            } else {
                return Err(self.err("expected `case` or `default`"));
            }
            if is_default {
                // A default folded into a labeled case still matches anything.
                labels.clear();
            }
            if self.eat("->") {
                let mut body = if self.is("{") {
                    self.block()?.0
                } else if self.is_kw("throw") {
                    let mut v = Vec::new();
                    self.statement(&mut v)?;
                    v
                } else {
                    let mut v = Vec::new();
                    let l = self.line();
                    self.expr_stmt_into(l, &mut v)?;
                    self.expect(";")?;
                    v
                };
                if !matches!(body.last().map(|s| &s.kind), Some(StmtKind::Return(_) | StmtKind::Throw(_))) {
                    body.push(Stmt::new(StmtKind::Break(None), self.prev_line()));
                }
                cases.push(SwitchCase { labels, body, line: cline });
            } else {
                self.expect(":")?;
                let mut body = Vec::new();
                while !self.is_kw("case") && !self.is_kw("default") && !self.is("}") {
                    if matches!(self.peek(), Tok::Eof) {
                        return Err(self.err("expected `}`"));
                    }
                    self.statement(&mut body)?;
                }
                cases.push(SwitchCase { labels, body, line: cline });
            }
        }
    }

    // ---- expressions ----

    fn expression(&mut self) -> PResult<Expr> {
        Ok(self.rhs()?.into_expr())
    }

    fn rhs(&mut self) -> PResult<Rhs> {
        if self.at_lambda() {
            return Ok(Rhs::Plain(self.lambda()?));
        }
        let lhs = self.binary(1)?;
        if self.eat("?") {
            let a = self.rhs()?;
            self.expect(":")?;
            let b = self.rhs()?;
            return Ok(Rhs::Cond(lhs, Box::new(a), Box::new(b)));
        }
        if let Some(compound) = self.assign_op() {
            let value = self.rhs()?;
            return Ok(if compound {
                Rhs::Plain(Expr::Other(vec![lhs, value.into_expr()]))
            } else {
                Rhs::Assign(to_lvalue(lhs), Box::new(value))
            });
        }
        Ok(Rhs::Plain(lhs))
    }

    /// Consumes an assignment operator; `Some(true)` for compound ones.
    fn assign_op(&mut self) -> Option<bool> {
        match self.peek() {
            Tok::Punct("=") => {
                self.advance();
                Some(false)
            }
            Tok::Punct("+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=") => {
                self.advance();
                Some(true)
            }
            Tok::Punct(">") => {
                let n = if self.punct_at(1, ">=") && self.adjacent(1) {
                    2
                } else if self.punct_at(1, ">") && self.adjacent(1) && self.punct_at(2, ">=") && self.adjacent(2) {
                    3
                } else {
                    return None;
                };
                for _ in 0..n {
                    self.advance();
                }
                Some(true)
            }
            _ => None,
        }
    }

    /// Binary operator at the cursor: precedence, kind and token count.
    fn binop(&self) -> Option<(u8, BinTok, usize)> {
        let op = |o| BinTok::Op(o);
        Some(match self.peek() {
            Tok::Punct("||") => (1, op(BinOp::Or), 1),
            Tok::Punct("&&") => (2, op(BinOp::And), 1),
            Tok::Punct("|") => (3, op(BinOp::Arith), 1),
            Tok::Punct("^") => (4, op(BinOp::Arith), 1),
            Tok::Punct("&") => (5, op(BinOp::Arith), 1),
            Tok::Punct("==") => (6, op(BinOp::Eq), 1),
            Tok::Punct("!=") => (6, op(BinOp::Ne), 1),
            Tok::Punct("<") => (7, op(BinOp::Lt), 1),
            Tok::Punct("<=") => (7, op(BinOp::Le), 1),
            Tok::Punct(">=") => (7, op(BinOp::Ge), 1),
            Tok::Ident(s) if s == "instanceof" => (7, BinTok::InstanceOf, 1),
            Tok::Punct(">") => {
                if self.punct_at(1, ">=") && self.adjacent(1) {
                    return None;
                }
                if self.punct_at(1, ">") && self.adjacent(1) {
                    if self.punct_at(2, ">=") && self.adjacent(2) {
                        return None;
                    }
                    let n = if self.punct_at(2, ">") && self.adjacent(2) { 3 } else { 2 };
                    (8, op(BinOp::Arith), n)
                } else {
                    (7, op(BinOp::Gt), 1)
                }
            }
            Tok::Punct("<<") => (8, op(BinOp::Arith), 1),
            Tok::Punct("+" | "-") => (9, op(BinOp::Arith), 1),
            Tok::Punct("*" | "/" | "%") => (10, op(BinOp::Arith), 1),
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some((prec, tok, len)) = self.binop() {
            if prec < min {
                break;
            }
            for _ in 0..len {
                self.advance();
            }
            match tok {
                BinTok::InstanceOf => {
                    self.eat_kw("final");
                    let line = self.line();
                    let ty = self.ty()?;
                    if self.is("(") {
                        self.skip_balanced()?;
                    } else if let Some(n) = self.name_at(0).map(str::to_string) {
                        self.advance();
                        self.declare(&n, Some(ty), line, false)?;
                    }
                    lhs = Expr::Other(vec![lhs]);
                }
                BinTok::Op(op) => {
                    let rhs = self.binary(prec + 1)?;
                    lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
                }
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Punct("!") => {
                self.advance();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Tok::Punct("-") => {
                self.advance();
                match self.unary()? {
                    Expr::Literal(Literal::Number(n)) => Ok(Expr::Literal(Literal::Number(format!("-{n}")))),
                    e => Ok(Expr::Other(vec![e])),
                }
            }
            Tok::Punct("+" | "~" | "++" | "--") => {
                self.advance();
                Ok(Expr::Other(vec![self.unary()?]))
            }
            Tok::Punct("(") => {
                if self.at_lambda() {
                    return self.lambda();
                }
                if let Some(e) = self.try_cast()? {
                    return Ok(e);
                }
                let e = self.primary()?;
                self.postfix(e)
            }
            _ => {
                let e = self.primary()?;
                self.postfix(e)
            }
        }
    }

    // Casts are transparent: `(Cursor) x` is just `x`.
    fn try_cast(&mut self) -> PResult<Option<Expr>> {
        let save = self.pos;
        self.advance();
        if let Some(ty) = self.try_ty() {
            while self.eat("&") {
                if self.try_ty().is_none() {
                    self.pos = save;
                    return Ok(None);
                }
            }
            if self.eat(")") {
                let prim = is_primitive(&ty);
                if prim || self.starts_cast_operand() {
                    if self.at_lambda() {
                        return self.lambda().map(Some);
                    }
                    return self.unary().map(Some);
                }
            }
        }
        self.pos = save;
        Ok(None)
    }

    fn starts_cast_operand(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s) || matches!(s.as_str(), "this" | "super" | "new" | "true" | "false" | "null" | "switch"),
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) | Tok::Char(_) => true,
            Tok::Punct(p) => matches!(*p, "(" | "!" | "~"),
            Tok::Eof => false,
        }
    }

    fn at_lambda(&self) -> bool {
        if self.name_at(0).is_some() && self.punct_at(1, "->") {
            return true;
        }
        if !self.is("(") {
            return false;
        }
        let mut depth = 0usize;
        let mut i = self.pos;
        while i < self.toks.len() {
            match &self.toks[i].tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(self.toks.get(i + 1).map(|t| &t.tok), Some(Tok::Punct("->")));
                    }
                }
                Tok::Punct(";" | "{" | "}") | Tok::Eof => return false,
                _ => {}
            }
            i += 1;
        }
        false
    }

    fn lambda(&mut self) -> PResult<Expr> {
        let line = self.line();
        let class_name = self.next_lambda_name();
        let outer = self.enclosing_class();
        self.frames.push(Frame::Boundary(BTreeSet::new()));
        self.class_stack.push(ClassCtx { name: class_name.clone(), kind: ClassKind::Lambda, anon_count: 0, lambda_count: 0 });
        self.frames.push(Frame::Method(MethodCtx::default()));
        let r = self.lambda_rest(line);
        let locals = self.pop_method();
        self.class_stack.pop();
        let captured: Vec<LocalId> = match self.frames.pop() {
            Some(Frame::Boundary(set)) => set.into_iter().collect(),
            _ => Vec::new(),
        };
        let (params, body, end) = r?;
        let method = MethodDecl {
            name: "lambda".to_string(),
            params,
            locals,
            body: Some(body),
            is_constructor: false,
            start_line: line,
            end_line: end,
        };
        self.classes.push(Some(ClassDecl {
            name: class_name.clone(),
            kind: ClassKind::Lambda,
            superclass: None,
            interfaces: Vec::new(),
            fields: Vec::new(),
            methods: vec![method],
            outer: Some(outer),
            start_line: line,
            end_line: end,
        }));
        Ok(Expr::Lambda { class_name, captured })
    }

    fn lambda_rest(&mut self, line: Line) -> PResult<(Vec<LocalId>, Vec<Stmt>, Line)> {
        let mut params = Vec::new();
        if self.eat("(") {
            while !self.eat(")") {
                self.local_modifiers()?;
                let pline = self.line();
                if self.name_at(0).is_some() && (self.punct_at(1, ",") || self.punct_at(1, ")")) {
                    let n = self.name()?;
                    params.push(self.declare(&n, None, pline, true)?);
                } else {
                    let mut ty = self.ty()?;
                    if self.eat("...") {
                        ty.push_str("[]");
                    }
                    let n = self.name()?;
                    params.push(self.declare(&n, Some(ty), pline, true)?);
                }
                if !self.eat(",") {
                    self.expect(")")?;
                    break;
                }
            }
        } else {
            let pline = self.line();
            let n = self.name()?;
            params.push(self.declare(&n, None, pline, true)?);
        }
        self.expect("->")?;
        if self.is("{") {
            let (body, end) = self.block()?;
            Ok((params, body, end))
        } else {
            let rhs = self.rhs()?;
            Ok((params, lower_return(rhs, line), self.prev_line()))
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if !self.eat(",") {
                self.expect(")")?;
                return Ok(args);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let line = self.line();
        let tok = self.peek().clone();
        match tok {
            Tok::Int(n) | Tok::Float(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(n)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            Tok::Char(c) => {
                self.advance();
                Ok(Expr::Literal(Literal::Char(c)))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expression()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(id) => match id.as_str() {
                "true" | "false" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Bool(id == "true")))
                }
                "null" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Null))
                }
                "this" => {
                    self.advance();
                    if self.is("(") {
                        let args = self.call_args()?;
                        return Ok(Expr::Call(Call { receiver: Receiver::Implicit, name: "this".into(), args, line }));
                    }
                    Ok(Expr::This)
                }
                "super" => {
                    self.advance();
                    if self.is("(") {
                        let args = self.call_args()?;
                        return Ok(Expr::Call(Call { receiver: Receiver::Super, name: "super".into(), args, line }));
                    }
                    if self.eat("::") {
                        self.advance();
                        return Ok(Expr::Other(Vec::new()));
                    }
                    self.expect(".")?;
                    if self.is("<") {
                        self.skip_type_args()?;
                    }
                    let name = self.name()?;
                    if self.is("(") {
                        let args = self.call_args()?;
                        return Ok(Expr::Call(Call { receiver: Receiver::Super, name, args, line }));
                    }
                    Ok(Expr::Var(VarRef::Free(name)))
                }
                "new" => self.creator(),
                "switch" => {
                    self.advance();
                    let s = self.switch(line)?;
                    match s.kind {
                        StmtKind::Switch { scrutinee, .. } => Ok(Expr::Other(vec![scrutinee])),
                        _ => unreachable!("switch lowering yields a switch"),
                    }
                }
                p if is_primitive(p) => {
                    self.ty()?;
                    if self.eat("::") {
                        self.advance();
                        return Ok(Expr::Other(Vec::new()));
                    }
                    self.expect(".")?;
                    self.expect_kw("class")?;
                    Ok(Expr::Literal(Literal::Class(p.to_string())))
                }
                _ if is_keyword(&id) => Err(self.err("expected expression")),
                _ => self.name_expr(id, line),
            },
            _ => Err(self.err("expected expression")),
        }
    }

    fn name_expr(&mut self, name: String, line: Line) -> PResult<Expr> {
        if self.punct_at(1, "(") {
            self.advance();
            let args = self.call_args()?;
            return Ok(Expr::Call(Call { receiver: Receiver::Implicit, name, args, line }));
        }
        if let Some(v) = self.resolve(&name) {
            self.advance();
            return Ok(Expr::Var(v));
        }
        let dotted = self.punct_at(1, ".") && self.name_at(2).is_some();
        let package = PACKAGE_ROOTS.contains(&name.as_str()) && dotted;
        let typed = is_type_like(&name)
            && (self.punct_at(1, ".") || self.punct_at(1, "::") || (self.punct_at(1, "[") && self.punct_at(2, "]")));
        if !package && !typed {
            self.advance();
            return Ok(Expr::Var(VarRef::Free(name)));
        }
        let mut ty = name;
        self.advance();
        if package {
            // Package segments up to the first type-like one.
            while self.is(".") {
                match self.name_at(1) {
                    Some(seg) if !is_type_like(seg) && self.punct_at(2, ".") => {
                        ty.push('.');
                        ty.push_str(seg);
                        self.advance();
                        self.advance();
                    }
                    Some(seg) if is_type_like(seg) => {
                        ty.push('.');
                        ty.push_str(seg);
                        self.advance();
                        self.advance();
                        break;
                    }
                    _ => break,
                }
            }
        }
        while self.is(".") {
            match self.name_at(1) {
                Some(seg) if is_type_like(seg) && !self.punct_at(2, "(") => {
                    ty.push('.');
                    ty.push_str(seg);
                    self.advance();
                    self.advance();
                }
                _ => break,
            }
        }
        if self.is("[") && self.punct_at(1, "]") {
            while self.is("[") && self.punct_at(1, "]") {
                self.advance();
                self.advance();
            }
            if self.eat("::") {
                self.advance();
                return Ok(Expr::Other(Vec::new()));
            }
            self.expect(".")?;
            self.expect_kw("class")?;
            return Ok(Expr::Literal(Literal::Class(ty)));
        }
        if self.eat("::") {
            self.advance();
            return Ok(Expr::Other(Vec::new()));
        }
        if !self.is(".") {
            return Ok(Expr::Other(Vec::new()));
        }
        self.advance();
        if self.is("<") {
            self.skip_type_args()?;
        }
        match self.ident_at(0) {
            Some("class") => {
                self.advance();
                Ok(Expr::Literal(Literal::Class(ty)))
            }
            Some("this") => {
                self.advance();
                Ok(Expr::This)
            }
            Some("new") => self.creator(),
            Some(_) => {
                let member = self.name()?;
                if self.is("(") {
                    let args = self.call_args()?;
                    Ok(Expr::Call(Call { receiver: Receiver::Type(ty), name: member, args, line }))
                } else {
                    // Static field through a type name; not tracked.
                    Ok(Expr::Other(Vec::new()))
                }
            }
            None => Err(self.err("expected member name")),
        }
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let line = self.line();
            if self.is(".") {
                self.advance();
                if self.is("<") {
                    self.skip_type_args()?;
                }
                match self.ident_at(0) {
                    Some("new") => {
                        e = self.creator()?;
                        continue;
                    }
                    Some("this") => {
                        self.advance();
                        e = Expr::This;
                        continue;
                    }
                    Some("class") => {
                        self.advance();
                        e = Expr::Literal(Literal::Class(String::new()));
                        continue;
                    }
                    _ => {}
                }
                let name = self.name()?;
                if self.is("(") {
                    let args = self.call_args()?;
                    let receiver = if e == Expr::This { Receiver::Implicit } else { Receiver::Expr(Box::new(e)) };
                    e = Expr::Call(Call { receiver, name, args, line });
                } else if e == Expr::This {
                    e = Expr::Var(VarRef::Free(name));
                } else {
                    e = Expr::Field { owner: Box::new(e), name };
                }
            } else if self.is("[") {
                self.advance();
                let idx = self.expression()?;
                self.expect("]")?;
                e = Expr::Other(vec![e, idx]);
            } else if self.is("++") || self.is("--") {
                self.advance();
                e = Expr::Other(vec![e]);
            } else if self.is("::") {
                self.advance();
                if self.is("<") {
                    self.skip_type_args()?;
                }
                self.advance();
                e = Expr::Other(vec![e]);
            } else {
                return Ok(e);
            }
        }
    }

    fn creator(&mut self) -> PResult<Expr> {
        let line = self.line();
        self.expect_kw("new")?;
        if self.is("<") {
            self.skip_type_args()?;
        }
        self.skip_annotations()?;
        let mut ty = match self.ident_at(0) {
            Some(p) if is_primitive(p) => {
                let p = p.to_string();
                self.advance();
                p
            }
            _ => {
                let mut s = self.name()?;
                loop {
                    if self.is("<") {
                        self.skip_type_args()?;
                    }
                    if self.is(".") && self.name_at(1).is_some() {
                        self.advance();
                        s.push('.');
                        s.push_str(&self.name()?);
                    } else {
                        break;
                    }
                }
                s
            }
        };
        if self.is("[") {
            let mut parts = Vec::new();
            while self.eat("[") {
                if !self.eat("]") {
                    parts.push(self.expression()?);
                    self.expect("]")?;
                }
                ty.push_str("[]");
            }
            if self.is("{") {
                parts.push(self.array_init()?);
            }
            return Ok(Expr::Other(parts));
        }
        let args = self.call_args()?;
        if !self.is("{") {
            return Ok(Expr::New(NewObject { ty, args, anon_class: None, captured: Vec::new(), line }));
        }
        let name = self.next_anon_name();
        let outer = self.enclosing_class();
        let decl = ClassDecl {
            name,
            kind: ClassKind::Anonymous,
            superclass: Some(ty.clone()),
            interfaces: Vec::new(),
            fields: Vec::new(),
            methods: Vec::new(),
            outer: Some(outer),
            start_line: line,
            end_line: line,
        };
        let (name, captured) = self.class_body(decl, "")?;
        Ok(Expr::New(NewObject { ty, args, anon_class: Some(name), captured, line }))
    }
}
