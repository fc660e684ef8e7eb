//! Abstract syntax tree for the mini imperative language.
//!
//! The language is deliberately small: string literals, variables,
//! concatenation, `format` templating, direct and indirect calls, globals,
//! conditionals and loops. That is exactly the surface the dataflow
//! analysis needs; there are no types, closures or arithmetic.

use std::sync::Arc;

/// Position of a node in its source file. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loc {
    pub file: Arc<str>,
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(file: &Arc<str>, line: u32, col: u32) -> Self {
        Loc {
            file: Arc::clone(file),
            line,
            col,
        }
    }
}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub globals: Vec<GlobalDecl>,
    pub entry: String,
}

#[derive(Debug, Clone)]
pub struct GlobalDecl {
    pub name: String,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub is_builtin: bool,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Assign {
        lhs: String,
        expr: Expr,
        loc: Loc,
    },
    /// Expression statement; the expression is a direct or indirect call.
    Call {
        call: Expr,
        loc: Loc,
    },
    Return {
        expr: Option<Expr>,
        loc: Loc,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        loc: Loc,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        loc: Loc,
    },
}

impl Stmt {
    pub fn loc(&self) -> &Loc {
        match self {
            Stmt::Assign { loc, .. }
            | Stmt::Call { loc, .. }
            | Stmt::Return { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::While { loc, .. } => loc,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    StrLit {
        text: String,
        loc: Loc,
    },
    Var {
        name: String,
        loc: Loc,
    },
    Concat {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        loc: Loc,
    },
    /// `format("a %s b", x)`; the template holds `%s` placeholders only and
    /// the placeholder count equals the argument count.
    Format {
        template: String,
        args: Vec<Expr>,
        loc: Loc,
    },
    /// Call through a statically known function or builtin name.
    Call {
        callee: String,
        args: Vec<Expr>,
        loc: Loc,
    },
    /// Call through a variable holding a function name at runtime.
    IndirectCall {
        var: String,
        args: Vec<Expr>,
        loc: Loc,
    },
}

impl Expr {
    pub fn loc(&self) -> &Loc {
        match self {
            Expr::StrLit { loc, .. }
            | Expr::Var { loc, .. }
            | Expr::Concat { loc, .. }
            | Expr::Format { loc, .. }
            | Expr::Call { loc, .. }
            | Expr::IndirectCall { loc, .. } => loc,
        }
    }
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.globals.iter().any(|g| g.name == name)
    }

    /// Canonical source text; two programs are structurally equal iff their
    /// canonical texts match.
    pub fn canonical_text(&self) -> String {
        super::unparse::unparse(self)
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.canonical_text() == other.canonical_text()
    }
}

/// Number of `%s` placeholders in a format template. Returns `None` when the
/// template contains a `%` not followed by `s`.
pub fn placeholder_count(template: &str) -> Option<usize> {
    let bytes = template.as_bytes();
    let mut count = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if bytes.get(i + 1) == Some(&b's') {
                count += 1;
                i += 2;
            } else {
                return None;
            }
        } else {
            i += 1;
        }
    }
    Some(count)
}
