//! Java source front end: a tolerant parser for the subset of Java the
//! checkers need, lowered into a per-method IR, plus CFG construction.

pub mod cfg;
pub mod ir;
mod lexer;
mod parser;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::registry::{LifecyclePair, Registry};
use ir::{Line, LocalId, LocalVar, Stmt};

pub use cfg::{build_cfg, Cfg, CfgError, EdgeId, EdgeLabel, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        SyntaxError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
    Anonymous,
    /// Body of a lambda expression, analyzed like an anonymous class.
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: String,
    pub line: Line,
}

/// Method identity: owning class, name and parameter count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId {
    pub class: String,
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}/{}", self.class, self.name, self.arity)
    }
}

/// One method (or constructor, or initializer block) lowered to IR.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<LocalId>,
    /// Every parameter and local declared in the body, indexed by [`LocalId`].
    pub locals: Vec<LocalVar>,
    /// `None` for abstract and native methods.
    pub body: Option<Vec<Stmt>>,
    pub is_constructor: bool,
    pub start_line: Line,
    pub end_line: Line,
}

impl MethodDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn local(&self, id: LocalId) -> &LocalVar {
        &self.locals[id.0 as usize]
    }

    pub fn contains_line(&self, line: Line) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    /// Binary-style name: `A`, `A$Inner`, `A$1` for anonymous classes.
    pub name: String,
    pub kind: ClassKind,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub outer: Option<String>,
    pub start_line: Line,
    pub end_line: Line,
}

impl ClassDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn method_id(&self, m: &MethodDecl) -> MethodId {
        MethodId { class: self.name.clone(), name: m.name.clone(), arity: m.arity() }
    }

    pub fn methods_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MethodDecl> + 'a {
        self.methods.iter().filter(move |m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub classes: Vec<ClassDecl>,
}

impl SourceUnit {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Parses one Java compilation unit.
///
/// Constructs outside the supported subset are kept as opaque expressions;
/// only text that cannot be tokenized or bracketed is rejected.
pub fn parse_unit(text: &str, path: impl AsRef<Path>) -> Result<SourceUnit, SyntaxError> {
    let tokens = lexer::tokenize(text)?;
    let classes = parser::Parser::new(&tokens).compilation_unit()?;
    Ok(SourceUnit { path: path.as_ref().to_path_buf(), classes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleSide {
    Acquirer,
    Releaser,
}

/// Places a callback within the registry's lifecycle pairs by name.
pub fn lifecycle_role<'r>(
    method_name: &str,
    reg: &'r Registry,
) -> Option<(usize, &'r LifecyclePair, LifecycleSide)> {
    reg.lifecycle_pairs().iter().enumerate().find_map(|(i, p)| {
        if p.acquirer == method_name {
            Some((i, p, LifecycleSide::Acquirer))
        } else if p.releaser == method_name {
            Some((i, p, LifecycleSide::Releaser))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::builtin_registry;

    #[test]
    fn minimal_class() {
        let unit = parse_unit("class A { void m() {} }", "A.java").unwrap();
        assert_eq!(unit.classes.len(), 1);
        let a = &unit.classes[0];
        assert_eq!(a.name, "A");
        assert_eq!(a.methods.len(), 1);
        assert_eq!(a.methods[0].body.as_ref().unwrap().len(), 0);
    }

    #[test]
    fn anonymous_class_gets_synthetic_name() {
        let src = "class A { void m() { new Thread() { public void run() { work(); } }.start(); } }";
        let unit = parse_unit(src, "A.java").unwrap();
        let names: Vec<_> = unit.classes.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["A", "A$1"]);
        assert_eq!(unit.classes[1].kind, ClassKind::Anonymous);
        assert_eq!(unit.classes[1].methods[0].name, "run");
    }

    #[test]
    fn malformed_parameter_list() {
        let err = parse_unit("class A { void m( }", "A.java").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 19);
    }

    #[test]
    fn lifecycle_roles() {
        let reg = builtin_registry();
        let (i, pair, side) = lifecycle_role("onCreate", &reg).unwrap();
        assert_eq!((pair.acquirer.as_str(), pair.releaser.as_str()), ("onCreate", "onDestroy"));
        assert_eq!(side, LifecycleSide::Acquirer);
        let (j, _, side) = lifecycle_role("onDestroy", &reg).unwrap();
        assert_eq!(i, j);
        assert_eq!(side, LifecycleSide::Releaser);
        assert!(lifecycle_role("toString", &reg).is_none());
    }
}
