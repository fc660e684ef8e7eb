//! Backward tracing from sink arguments.
//!
//! From every argument of every sink call, the walk follows defining
//! expressions and definition sites toward sources. Meeting a flow point the
//! forward pass marked trusted-only adds its defining expression to the
//! instrumentation set; meeting an untrusted-touched point ends that branch
//! with nothing. Each (flow point) is visited at most once per argument, so
//! cyclic def-use chains terminate.

use std::collections::HashSet;

use crate::builtins::SinkKind;
use crate::minilang::{Expr, Stmt};

use super::callgraph::{call_args_at, CallGraph};
use super::forward::ForwardResult;
use super::forward::Trust;
use super::index::{lockey, DefSite, FlowPoint, LocKey, ProgramIndex};

/// An expression chosen for randomization wrapping.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Target {
    pub func: String,
    pub stmt: LocKey,
    pub expr: LocKey,
    pub var: String,
}

/// Per sink-argument outcome of the backward walk.
#[derive(Debug, Clone)]
pub struct SinkArgReport {
    pub func: String,
    pub sink: String,
    pub kind: SinkKind,
    pub call: LocKey,
    pub index: usize,
    pub found_trusted: bool,
    pub hit_untrusted: bool,
}

impl SinkArgReport {
    /// No trusted origin found anywhere behind this argument: the command is
    /// completely dynamic and nothing can be instrumented for it.
    pub fn unresolved(&self) -> bool {
        !self.found_trusted
    }
}

pub struct BackwardResult {
    pub targets: std::collections::BTreeSet<Target>,
    pub reports: Vec<SinkArgReport>,
}

pub fn backward_analysis(
    index: &ProgramIndex,
    call_graph: &CallGraph,
    forward: &ForwardResult,
) -> BackwardResult {
    let mut targets = std::collections::BTreeSet::new();
    let mut reports = Vec::new();

    for sink in &index.sink_calls {
        let Some(call_expr) = index.find_expr(sink.stmt, sink.call) else {
            continue;
        };
        let args = match call_expr {
            Expr::Call { args, .. } => args,
            _ => continue,
        };
        for (i, arg) in args.iter().enumerate() {
            let mut walk = Walk {
                index,
                call_graph,
                forward,
                targets: std::collections::BTreeSet::new(),
                visited: HashSet::new(),
                found_trusted: false,
                hit_untrusted: false,
            };
            let slot = format!("{}.arg{i}", sink.sink);
            walk.expr(arg, &sink.func, sink.stmt, &slot);
            reports.push(SinkArgReport {
                func: sink.func.clone(),
                sink: sink.sink.clone(),
                kind: sink.kind,
                call: sink.call,
                index: i,
                found_trusted: walk.found_trusted,
                hit_untrusted: walk.hit_untrusted,
            });
            targets.extend(walk.targets);
        }
    }

    BackwardResult { targets, reports }
}

struct Walk<'a, 'p> {
    index: &'a ProgramIndex<'p>,
    call_graph: &'a CallGraph,
    forward: &'a ForwardResult,
    targets: std::collections::BTreeSet<Target>,
    visited: HashSet<FlowPoint>,
    found_trusted: bool,
    hit_untrusted: bool,
}

impl<'a, 'p> Walk<'a, 'p> {
    fn add_target(&mut self, func: &str, stmt: LocKey, expr: LocKey, var: &str) {
        self.found_trusted = true;
        self.targets.insert(Target {
            func: func.to_owned(),
            stmt,
            expr,
            var: var.to_owned(),
        });
    }

    /// Trust classification of a literal or API occurrence, as decided by
    /// the forward pass.
    fn source_trust(&self, expr: LocKey) -> Option<Trust> {
        self.forward.source_trust.get(&expr).copied()
    }

    fn expr(&mut self, expr: &Expr, func: &str, stmt: LocKey, label: &str) {
        match expr {
            Expr::StrLit { loc, .. } => {
                let key = lockey(loc);
                match self.source_trust(key) {
                    Some(Trust::Trusted) => self.add_target(func, stmt, key, label),
                    _ => self.hit_untrusted = true,
                }
            }
            Expr::Var { name, loc } => {
                let Some(info) = self.index.uses.get(&lockey(loc)) else {
                    return;
                };
                for def in info.defs.clone() {
                    self.def_site(func, name, &def);
                }
            }
            Expr::Concat { lhs, rhs, .. } => {
                self.expr(lhs, func, stmt, label);
                self.expr(rhs, func, stmt, label);
            }
            Expr::Format { args, loc, .. } => {
                // The template is a literal occurrence recorded at the
                // format expression's location.
                let key = lockey(loc);
                match self.source_trust(key) {
                    Some(Trust::Trusted) => self.add_target(func, stmt, key, label),
                    _ => self.hit_untrusted = true,
                }
                for a in args {
                    self.expr(a, func, stmt, label);
                }
            }
            Expr::Call { callee, args, loc } => {
                let key = lockey(loc);
                if let Some(role) = self.index.builtins.role(callee) {
                    use crate::builtins::BuiltinRole::*;
                    match role {
                        InputApi => match self.source_trust(key) {
                            Some(Trust::Trusted) => self.add_target(func, stmt, key, label),
                            _ => self.hit_untrusted = true,
                        },
                        RandWrapper | TblDerandWrapper => {
                            for a in args {
                                self.expr(a, func, stmt, label);
                            }
                        }
                        Sink(_) | Effect => {
                            // Outcome strings of sinks/effects are dead ends.
                        }
                    }
                } else {
                    self.returns_of(callee);
                }
            }
            Expr::IndirectCall { loc, .. } => {
                let resolution = self.call_graph.indirect_resolution();
                if let Some(callees) = resolution.get(&lockey(loc)) {
                    for callee in callees.clone() {
                        self.returns_of(&callee);
                    }
                }
            }
        }
    }

    fn returns_of(&mut self, func: &str) {
        let point = FlowPoint::Return {
            func: func.to_owned(),
        };
        if !self.visited.insert(point) {
            return;
        }
        let Some(return_stmts) = self.index.returns.get(func).cloned() else {
            return;
        };
        for stmt_key in return_stmts {
            if let Some(Stmt::Return { expr: Some(e), .. }) = self.index.find_stmt(stmt_key) {
                let label = format!("{func}.return");
                self.expr(e, func, stmt_key, &label);
            }
        }
    }

    fn def_site(&mut self, func: &str, var: &str, def: &DefSite) {
        let Some(point) = self.index.point_of(func, var, def) else {
            return;
        };
        if !self.visited.insert(point.clone()) {
            return;
        }
        // Purely untrusted points end the branch: the value is not command
        // relevant. Mixed points (a composition like the trusted editor and
        // the untrusted temp name meeting in one buffer) are walked into
        // their parts; purely trusted points become targets below.
        let trusted_only = self.forward.trusted_only(&point);
        if self.forward.untrusted_touched(&point) && !trusted_only {
            let mixed = self.forward.trusted_points.contains(&point);
            if !mixed {
                self.hit_untrusted = true;
                return;
            }
        }

        match &point {
            FlowPoint::VarDef { stmt, .. } => {
                let rhs = self.index.find_stmt(*stmt).and_then(|s| match s {
                    Stmt::Assign { expr, .. } => Some(expr),
                    _ => None,
                });
                let Some(rhs) = rhs else { return };
                if trusted_only {
                    self.add_target(func, *stmt, lockey(rhs.loc()), var);
                } else {
                    self.expr(rhs, func, *stmt, var);
                }
            }
            FlowPoint::Global { var: g } => {
                let defs = self.index.global_defs.get(g).cloned().unwrap_or_default();
                for (def_func, def_stmt) in defs {
                    if let Some(Stmt::Assign { expr, .. }) = self.index.find_stmt(def_stmt) {
                        if trusted_only {
                            self.add_target(&def_func, def_stmt, lockey(expr.loc()), g);
                        } else {
                            self.expr(expr, &def_func, def_stmt, g);
                        }
                    }
                }
            }
            FlowPoint::Param {
                func: callee,
                index: arg_index,
            } => {
                // Trusted-only or unknown alike: the defining expressions
                // live at the callers, so recurse there.
                let caller_sites: Vec<LocKey> =
                    self.call_graph.callers_of(callee).map(|e| e.site).collect();
                for site in caller_sites {
                    if let Some((args, caller_func, caller_stmt)) = call_args_at(self.index, site) {
                        if let Some(arg) = args.get(*arg_index) {
                            let label = format!("{callee}.arg{arg_index}");
                            self.expr(arg, &caller_func, caller_stmt, &label);
                        }
                    }
                }
            }
            FlowPoint::Return { func: callee } => {
                let callee = callee.clone();
                self.visited.remove(&point);
                self.returns_of(&callee);
            }
        }
    }
}
