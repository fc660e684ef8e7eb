//! Program indexing: flattened statements, reaching definitions, resolved
//! variable uses, and the value-flow contexts every expression feeds.
//!
//! Local variables are tracked flow-sensitively (reaching definitions with a
//! fixpoint over loops); globals are flow-insensitive — a use of a global
//! sees every definition of it in the whole program.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::builtins::{BuiltinRole, BuiltinSet, SinkKind};
use crate::minilang::{Expr, FunctionDef, Loc, Program, Stmt};

/// Statement/expression identity inside one program: (line, column).
pub type LocKey = (u32, u32);

pub fn lockey(loc: &Loc) -> LocKey {
    (loc.line, loc.col)
}

/// A point in the value-flow graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowPoint {
    /// Definition of a local variable at a statement.
    VarDef {
        func: String,
        var: String,
        stmt: LocKey,
    },
    /// A global variable (one point program-wide).
    Global { var: String },
    /// A function parameter.
    Param { func: String, index: usize },
    /// The value returned by a function.
    Return { func: String },
}

impl FlowPoint {
    /// Node label for dependency trees: assignments label the variable,
    /// argument/return steps label the function.
    pub fn label(&self) -> String {
        match self {
            FlowPoint::VarDef { var, .. } => var.clone(),
            FlowPoint::Global { var } => var.clone(),
            FlowPoint::Param { func, .. } => format!("{func}()"),
            FlowPoint::Return { func } => format!("{func}()"),
        }
    }
}

/// What an expression's value feeds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowContext {
    Point(FlowPoint),
    /// Argument `index` of a sink call.
    SinkArg {
        func: String,
        sink: String,
        stmt: LocKey,
        call: LocKey,
        index: usize,
    },
    /// Argument of a non-sink effect builtin (file I/O, logging).
    EffectArg {
        func: String,
        builtin: String,
        stmt: LocKey,
    },
    /// Argument of an indirect call; resolved to candidate params once the
    /// call graph is pruned.
    IndirectArg {
        call: LocKey,
        index: usize,
    },
    /// Value does not propagate (conditions, discarded results).
    Discard,
}

/// Where a variable use resolves to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefSite {
    Stmt(LocKey),
    Param(usize),
    GlobalAll,
    /// No definition reaches this use.
    Undefined,
}

#[derive(Debug, Clone)]
pub struct UseInfo {
    pub func: String,
    pub var: String,
    pub expr: LocKey,
    pub stmt: LocKey,
    pub defs: Vec<DefSite>,
    pub context: FlowContext,
}

/// A string literal (or format template) occurrence in value position.
#[derive(Debug, Clone)]
pub struct LiteralOccurrence {
    pub func: String,
    pub text: String,
    pub expr: LocKey,
    pub stmt: LocKey,
    pub context: FlowContext,
}

/// An input-API call occurrence.
#[derive(Debug, Clone)]
pub struct ApiOccurrence {
    pub func: String,
    pub name: String,
    pub expr: LocKey,
    pub stmt: LocKey,
    pub context: FlowContext,
    /// First argument when it is a literal (`read_config("app.conf", ...)`).
    pub first_literal_arg: Option<String>,
}

/// A call to an effect builtin (file I/O, config writes, logging).
#[derive(Debug, Clone)]
pub struct EffectCallSite {
    pub func: String,
    pub name: String,
    pub stmt: LocKey,
    pub call: LocKey,
    pub loc: Loc,
    /// First argument when it is a literal (path-like).
    pub first_literal_arg: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SinkCallSite {
    pub func: String,
    pub sink: String,
    pub kind: SinkKind,
    pub stmt: LocKey,
    pub call: LocKey,
    pub arg_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallTargetKind {
    Direct(String),
    /// Variable holding the callee name.
    Indirect(String),
}

/// A call to a program function (direct) or through a variable (indirect).
#[derive(Debug, Clone)]
pub struct ProgramCallSite {
    pub caller: String,
    pub stmt: LocKey,
    pub call: LocKey,
    pub target: CallTargetKind,
    pub arg_count: usize,
    /// What the call's return value feeds.
    pub value_context: FlowContext,
}

pub struct ProgramIndex<'p> {
    pub program: &'p Program,
    pub builtins: &'p BuiltinSet,
    pub globals: BTreeSet<String>,
    /// Global name -> defining statements (func, stmt).
    pub global_defs: BTreeMap<String, Vec<(String, LocKey)>>,
    /// All variable uses, keyed by use-expression location.
    pub uses: BTreeMap<LocKey, UseInfo>,
    pub literals: Vec<LiteralOccurrence>,
    pub api_calls: Vec<ApiOccurrence>,
    pub effect_calls: Vec<EffectCallSite>,
    pub sink_calls: Vec<SinkCallSite>,
    pub program_calls: Vec<ProgramCallSite>,
    /// RHS expression of each defining statement, keyed by statement.
    pub def_rhs: BTreeMap<LocKey, (String, String)>, // stmt -> (func, var)
    /// Statement lookup: stmt loc -> function name.
    pub stmt_func: BTreeMap<LocKey, String>,
    /// Function arity table (program functions only).
    pub arity: BTreeMap<String, usize>,
    /// Return statements per function.
    pub returns: BTreeMap<String, Vec<LocKey>>,
}

type Env = HashMap<String, BTreeSet<DefSite>>;

struct Walker<'b> {
    builtins: &'b BuiltinSet,
    globals: BTreeSet<String>,
    out: IndexAccum,
}

#[derive(Default)]
struct IndexAccum {
    global_defs: BTreeMap<String, Vec<(String, LocKey)>>,
    uses: BTreeMap<LocKey, UseInfo>,
    literals: Vec<LiteralOccurrence>,
    api_calls: Vec<ApiOccurrence>,
    effect_calls: Vec<EffectCallSite>,
    sink_calls: Vec<SinkCallSite>,
    program_calls: Vec<ProgramCallSite>,
    def_rhs: BTreeMap<LocKey, (String, String)>,
    stmt_func: BTreeMap<LocKey, String>,
    returns: BTreeMap<String, Vec<LocKey>>,
    seen_literals: BTreeSet<LocKey>,
    seen_calls: BTreeSet<LocKey>,
}

impl<'p> ProgramIndex<'p> {
    pub fn build(program: &'p Program, builtins: &'p BuiltinSet) -> ProgramIndex<'p> {
        let globals: BTreeSet<String> = program.globals.iter().map(|g| g.name.clone()).collect();
        let mut walker = Walker {
            builtins,
            globals: globals.clone(),
            out: IndexAccum::default(),
        };
        for f in &program.functions {
            walker.walk_function(f);
        }
        let arity = program
            .functions
            .iter()
            .map(|f| (f.name.clone(), f.params.len()))
            .collect();
        let out = walker.out;
        ProgramIndex {
            program,
            builtins,
            globals,
            global_defs: out.global_defs,
            uses: out.uses,
            literals: out.literals,
            api_calls: out.api_calls,
            effect_calls: out.effect_calls,
            sink_calls: out.sink_calls,
            program_calls: out.program_calls,
            def_rhs: out.def_rhs,
            stmt_func: out.stmt_func,
            arity,
            returns: out.returns,
        }
    }

    /// The flow point a definition site stands for.
    pub fn point_of(&self, func: &str, var: &str, site: &DefSite) -> Option<FlowPoint> {
        match site {
            DefSite::Stmt(stmt) => Some(FlowPoint::VarDef {
                func: func.to_owned(),
                var: var.to_owned(),
                stmt: *stmt,
            }),
            DefSite::Param(index) => Some(FlowPoint::Param {
                func: func.to_owned(),
                index: *index,
            }),
            DefSite::GlobalAll => Some(FlowPoint::Global {
                var: var.to_owned(),
            }),
            DefSite::Undefined => None,
        }
    }

    pub fn find_function(&self, name: &str) -> Option<&'p FunctionDef> {
        self.program.functions.iter().find(|f| f.name == name)
    }

    /// Finds the statement with the given location key.
    pub fn find_stmt(&self, key: LocKey) -> Option<&'p Stmt> {
        fn search(stmts: &[Stmt], key: LocKey) -> Option<&Stmt> {
            for s in stmts {
                if lockey(s.loc()) == key {
                    return Some(s);
                }
                match s {
                    Stmt::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        if let Some(found) =
                            search(then_body, key).or_else(|| search(else_body, key))
                        {
                            return Some(found);
                        }
                    }
                    Stmt::While { body, .. } => {
                        if let Some(found) = search(body, key) {
                            return Some(found);
                        }
                    }
                    _ => {}
                }
            }
            None
        }
        for f in &self.program.functions {
            if let Some(found) = search(&f.body, key) {
                return Some(found);
            }
        }
        None
    }

    /// Finds an expression by location inside the statement at `stmt`.
    pub fn find_expr(&self, stmt: LocKey, expr: LocKey) -> Option<&'p Expr> {
        let s = self.find_stmt(stmt)?;
        stmt_exprs(s)
            .into_iter()
            .find_map(|e| find_in_expr(e, expr))
    }
}

/// Top-level expressions of a statement (not recursing into bodies).
pub fn stmt_exprs(stmt: &Stmt) -> Vec<&Expr> {
    match stmt {
        Stmt::Assign { expr, .. } => vec![expr],
        Stmt::Call { call, .. } => vec![call],
        Stmt::Return { expr, .. } => expr.iter().collect(),
        Stmt::If { cond, .. } | Stmt::While { cond, .. } => vec![cond],
    }
}

pub fn find_in_expr(expr: &Expr, key: LocKey) -> Option<&Expr> {
    if lockey(expr.loc()) == key {
        return Some(expr);
    }
    match expr {
        Expr::Concat { lhs, rhs, .. } => find_in_expr(lhs, key).or_else(|| find_in_expr(rhs, key)),
        Expr::Format { args, .. } | Expr::Call { args, .. } | Expr::IndirectCall { args, .. } => {
            args.iter().find_map(|a| find_in_expr(a, key))
        }
        _ => None,
    }
}

impl<'b> Walker<'b> {
    fn walk_function(&mut self, f: &FunctionDef) {
        let mut env: Env = HashMap::new();
        for (i, p) in f.params.iter().enumerate() {
            env.insert(p.clone(), BTreeSet::from([DefSite::Param(i)]));
        }
        self.walk_body(&f.body, &mut env, &f.name);
    }

    fn walk_body(&mut self, stmts: &[Stmt], env: &mut Env, func: &str) {
        for stmt in stmts {
            let stmt_key = lockey(stmt.loc());
            self.out.stmt_func.insert(stmt_key, func.to_owned());
            match stmt {
                Stmt::Assign { lhs, expr, .. } => {
                    let ctx = if self.globals.contains(lhs) {
                        self.out
                            .global_defs
                            .entry(lhs.clone())
                            .or_default()
                            .push((func.to_owned(), stmt_key));
                        FlowContext::Point(FlowPoint::Global { var: lhs.clone() })
                    } else {
                        FlowContext::Point(FlowPoint::VarDef {
                            func: func.to_owned(),
                            var: lhs.clone(),
                            stmt: stmt_key,
                        })
                    };
                    self.out
                        .def_rhs
                        .insert(stmt_key, (func.to_owned(), lhs.clone()));
                    self.walk_expr(expr, ctx, env, func, stmt_key);
                    if !self.globals.contains(lhs) {
                        env.insert(lhs.clone(), BTreeSet::from([DefSite::Stmt(stmt_key)]));
                    }
                }
                Stmt::Call { call, .. } => {
                    self.walk_expr(call, FlowContext::Discard, env, func, stmt_key);
                }
                Stmt::Return { expr, .. } => {
                    let rets = self.out.returns.entry(func.to_owned()).or_default();
                    if !rets.contains(&stmt_key) {
                        rets.push(stmt_key);
                    }
                    if let Some(e) = expr {
                        let ctx = FlowContext::Point(FlowPoint::Return {
                            func: func.to_owned(),
                        });
                        self.walk_expr(e, ctx, env, func, stmt_key);
                    }
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    ..
                } => {
                    self.walk_expr(cond, FlowContext::Discard, env, func, stmt_key);
                    let mut then_env = env.clone();
                    self.walk_body(then_body, &mut then_env, func);
                    let mut else_env = env.clone();
                    self.walk_body(else_body, &mut else_env, func);
                    *env = merge(then_env, else_env);
                }
                Stmt::While { cond, body, .. } => {
                    // Fixpoint: re-walking records uses into sets, so extra
                    // passes only add the defs that loop back around.
                    loop {
                        let before = env.clone();
                        self.walk_expr(cond, FlowContext::Discard, env, func, stmt_key);
                        let mut inner = env.clone();
                        self.walk_body(body, &mut inner, func);
                        *env = merge(env.clone(), inner);
                        if *env == before {
                            break;
                        }
                    }
                }
            }
        }
    }

    fn walk_expr(&mut self, expr: &Expr, ctx: FlowContext, env: &Env, func: &str, stmt: LocKey) {
        match expr {
            Expr::StrLit { text, loc } => {
                self.record_literal(func, text, lockey(loc), stmt, ctx);
            }
            Expr::Var { name, loc } => {
                let defs: Vec<DefSite> = if self.globals.contains(name) {
                    vec![DefSite::GlobalAll]
                } else {
                    match env.get(name) {
                        Some(sites) => sites.iter().cloned().collect(),
                        None => vec![DefSite::Undefined],
                    }
                };
                let key = lockey(loc);
                match self.out.uses.get_mut(&key) {
                    Some(existing) => {
                        // Loop re-walks union in newly reaching defs.
                        for d in defs {
                            if !existing.defs.contains(&d) {
                                existing.defs.push(d);
                            }
                        }
                    }
                    None => {
                        self.out.uses.insert(
                            key,
                            UseInfo {
                                func: func.to_owned(),
                                var: name.clone(),
                                expr: key,
                                stmt,
                                defs,
                                context: ctx,
                            },
                        );
                    }
                }
            }
            Expr::Concat { lhs, rhs, .. } => {
                self.walk_expr(lhs, ctx.clone(), env, func, stmt);
                self.walk_expr(rhs, ctx, env, func, stmt);
            }
            Expr::Format {
                template,
                args,
                loc,
            } => {
                self.record_literal(func, template, lockey(loc), stmt, ctx.clone());
                for a in args {
                    self.walk_expr(a, ctx.clone(), env, func, stmt);
                }
            }
            Expr::Call { callee, args, loc } => {
                let call_key = lockey(loc);
                match self.builtins.role(callee) {
                    Some(BuiltinRole::Sink(kind)) => {
                        if self.out.seen_calls.insert(call_key) {
                            self.out.sink_calls.push(SinkCallSite {
                                func: func.to_owned(),
                                sink: callee.clone(),
                                kind,
                                stmt,
                                call: call_key,
                                arg_count: args.len(),
                            });
                        }
                        for (i, a) in args.iter().enumerate() {
                            let actx = FlowContext::SinkArg {
                                func: func.to_owned(),
                                sink: callee.clone(),
                                stmt,
                                call: call_key,
                                index: i,
                            };
                            self.walk_expr(a, actx, env, func, stmt);
                        }
                    }
                    Some(BuiltinRole::InputApi) => {
                        if self.out.seen_calls.insert(call_key) {
                            let first_literal_arg = match args.first() {
                                Some(Expr::StrLit { text, .. }) => Some(text.clone()),
                                _ => None,
                            };
                            self.out.api_calls.push(ApiOccurrence {
                                func: func.to_owned(),
                                name: callee.clone(),
                                expr: call_key,
                                stmt,
                                context: ctx,
                                first_literal_arg,
                            });
                        }
                        for a in args {
                            self.walk_expr(a, FlowContext::Discard, env, func, stmt);
                        }
                    }
                    Some(BuiltinRole::Effect) => {
                        if self.out.seen_calls.insert(call_key) {
                            let first_literal_arg = match args.first() {
                                Some(Expr::StrLit { text, .. }) => Some(text.clone()),
                                _ => None,
                            };
                            self.out.effect_calls.push(EffectCallSite {
                                func: func.to_owned(),
                                name: callee.clone(),
                                stmt,
                                call: call_key,
                                loc: loc.clone(),
                                first_literal_arg,
                            });
                        }
                        for a in args {
                            let actx = FlowContext::EffectArg {
                                func: func.to_owned(),
                                builtin: callee.clone(),
                                stmt,
                            };
                            self.walk_expr(a, actx, env, func, stmt);
                        }
                    }
                    Some(BuiltinRole::RandWrapper) | Some(BuiltinRole::TblDerandWrapper) => {
                        // Wrappers are value-transparent.
                        for a in args {
                            self.walk_expr(a, ctx.clone(), env, func, stmt);
                        }
                    }
                    None => {
                        // Direct call to a program function.
                        if self.out.seen_calls.insert(call_key) {
                            self.out.program_calls.push(ProgramCallSite {
                                caller: func.to_owned(),
                                stmt,
                                call: call_key,
                                target: CallTargetKind::Direct(callee.clone()),
                                arg_count: args.len(),
                                value_context: ctx,
                            });
                        }
                        for (i, a) in args.iter().enumerate() {
                            let actx = FlowContext::Point(FlowPoint::Param {
                                func: callee.clone(),
                                index: i,
                            });
                            self.walk_expr(a, actx, env, func, stmt);
                        }
                    }
                }
            }
            Expr::IndirectCall { var, args, loc } => {
                let call_key = lockey(loc);
                if self.out.seen_calls.insert(call_key) {
                    self.out.program_calls.push(ProgramCallSite {
                        caller: func.to_owned(),
                        stmt,
                        call: call_key,
                        target: CallTargetKind::Indirect(var.clone()),
                        arg_count: args.len(),
                        value_context: ctx,
                    });
                }
                for (i, a) in args.iter().enumerate() {
                    let actx = FlowContext::IndirectArg {
                        call: call_key,
                        index: i,
                    };
                    self.walk_expr(a, actx, env, func, stmt);
                }
            }
        }
    }

    fn record_literal(
        &mut self,
        func: &str,
        text: &str,
        expr: LocKey,
        stmt: LocKey,
        ctx: FlowContext,
    ) {
        if matches!(ctx, FlowContext::Discard) {
            return;
        }
        if self.out.seen_literals.insert(expr) {
            self.out.literals.push(LiteralOccurrence {
                func: func.to_owned(),
                text: text.to_owned(),
                expr,
                stmt,
                context: ctx,
            });
        }
    }
}

fn merge(a: Env, b: Env) -> Env {
    let mut out = a;
    for (var, sites) in b {
        out.entry(var).or_default().extend(sites);
    }
    out
}
