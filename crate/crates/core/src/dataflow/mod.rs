//! Bidirectional command-composition analysis.
//!
//! Forward propagation from trusted and untrusted sources meets backward
//! tracing from sink arguments; where the backward walk reaches a
//! trusted-only flow point it records the defining expression for
//! instrumentation, and where it reaches anything touched by untrusted data
//! it concludes the value is not command-relevant and stops.

pub mod backward;
pub mod callgraph;
pub mod flow;
pub mod forward;
pub mod index;

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::builtins::BuiltinSet;
use crate::minilang::{Expr, Loc, Program, Stmt};
use crate::tcs::{TrustedSpec, Violation};

pub use backward::{SinkArgReport, Target};
pub use callgraph::{build_call_graph, CallEdge, CallGraph};
pub use forward::{DepNode, DepNodeKind, DepTree, Trust};
pub use index::{FlowContext, FlowPoint, LocKey, ProgramIndex};

/// Full analysis output: both forward tree families, the instrumentation
/// set, and per-argument resolution reports.
pub struct Analysis {
    pub call_graph: CallGraph,
    pub trusted_trees: Vec<DepTree>,
    pub untrusted_trees: Vec<DepTree>,
    pub ins_out: BTreeSet<Target>,
    pub sink_reports: Vec<SinkArgReport>,
}

impl Analysis {
    pub fn unresolved(&self) -> Vec<&SinkArgReport> {
        self.sink_reports
            .iter()
            .filter(|r| r.unresolved())
            .collect()
    }
}

/// Runs the bidirectional analysis with the default sink-command vocabulary.
pub fn analyze(program: &Program, spec: &TrustedSpec, builtins: &BuiltinSet) -> Analysis {
    analyze_with_vocabulary(program, spec, builtins, &crate::tcs::default_vocabulary())
}

pub fn analyze_with_vocabulary(
    program: &Program,
    spec: &TrustedSpec,
    builtins: &BuiltinSet,
    vocabulary: &BTreeSet<String>,
) -> Analysis {
    let index = ProgramIndex::build(program, builtins);
    let call_graph = build_call_graph(&index);
    let resolution = call_graph.indirect_resolution();
    let graph = flow::FlowGraph::build(&index, &resolution);
    let fwd = forward::forward_analysis(&index, &graph, &resolution, spec, vocabulary, builtins);
    let bwd = backward::backward_analysis(&index, &call_graph, &fwd);
    Analysis {
        call_graph,
        trusted_trees: fwd.trusted_trees,
        untrusted_trees: fwd.untrusted_trees,
        ins_out: bwd.targets,
        sink_reports: bwd.reports,
    }
}

/// Renders the analysis as a stable structured text document: call-graph
/// edges, dependency trees, the instrumentation set, and unresolved sink
/// arguments, all in deterministic order.
pub fn render_report(analysis: &Analysis) -> String {
    let mut out = String::new();

    writeln!(out, "== call graph ==").unwrap();
    let mut edges = analysis.call_graph.edges.clone();
    edges.sort();
    for e in edges {
        let mut flags = Vec::new();
        if e.indirect {
            flags.push("indirect");
        }
        if e.builtin {
            flags.push("builtin");
        }
        let flags = if flags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", flags.join(","))
        };
        writeln!(
            out,
            "{} -> {} @{}:{}{}",
            e.caller, e.callee, e.site.0, e.site.1, flags
        )
        .unwrap();
    }

    for (title, trees) in [
        ("trusted trees", &analysis.trusted_trees),
        ("untrusted trees", &analysis.untrusted_trees),
    ] {
        writeln!(out, "== {title} ==").unwrap();
        let mut ordered: Vec<&DepTree> = trees.iter().collect();
        ordered.sort_by_key(|t| t.root().at);
        for tree in ordered {
            render_tree(tree, 0, 0, &mut out);
        }
    }

    writeln!(out, "== ins_out ==").unwrap();
    for t in &analysis.ins_out {
        writeln!(
            out,
            "{} {} stmt@{}:{} expr@{}:{}",
            t.func, t.var, t.stmt.0, t.stmt.1, t.expr.0, t.expr.1
        )
        .unwrap();
    }

    writeln!(out, "== unresolved ==").unwrap();
    let mut unresolved: Vec<&SinkArgReport> = analysis.unresolved();
    unresolved.sort_by_key(|r| (r.call, r.index));
    if unresolved.is_empty() {
        writeln!(out, "(none)").unwrap();
    }
    for r in unresolved {
        let reason = if r.hit_untrusted {
            "completely-dynamic"
        } else {
            "unknown-origin"
        };
        writeln!(
            out,
            "{} {}.arg{} @{}:{} {}",
            r.func, r.sink, r.index, r.call.0, r.call.1, reason
        )
        .unwrap();
    }

    out
}

fn render_tree(tree: &DepTree, node: usize, depth: usize, out: &mut String) {
    let n = &tree.nodes[node];
    for _ in 0..depth {
        out.push_str("  ");
    }
    writeln!(
        out,
        "{} {} @{}:{}",
        match n.kind {
            DepNodeKind::Source => "src",
            DepNodeKind::Var => "var",
            DepNodeKind::Func => "fn ",
            DepNodeKind::Sink => "sink",
        },
        n.name,
        n.at.0,
        n.at.1
    )
    .unwrap();
    for &c in &tree.children[node] {
        render_tree(tree, c, depth + 1, out);
    }
}

/// Where the command-name (first-token) position of a sink argument comes
/// from: a literal, or something dynamic.
#[derive(Debug, Clone)]
pub enum CommandOrigin {
    Literal { text: String, loc: Loc },
    Dynamic { sink: String, loc: Loc },
}

/// Leftmost-origin walk used for spec suggestion: for each sink argument,
/// finds the literals that can form the start of the composed command.
pub fn command_name_origins(
    program: &Program,
    builtins: &BuiltinSet,
    sink_names: &BTreeSet<String>,
) -> Vec<CommandOrigin> {
    let index = ProgramIndex::build(program, builtins);
    let call_graph = build_call_graph(&index);
    let mut origins = Vec::new();

    for sink in &index.sink_calls {
        if !sink_names.contains(&sink.sink) {
            continue;
        }
        let Some(call_expr) = index.find_expr(sink.stmt, sink.call) else {
            continue;
        };
        let Expr::Call { args, .. } = call_expr else {
            continue;
        };
        let Some(first) = args.first() else { continue };
        let mut visited = HashSet::new();
        leftmost(
            first,
            &sink.func,
            &index,
            &call_graph,
            &sink.sink,
            &mut visited,
            &mut origins,
        );
    }
    origins
}

fn leftmost(
    expr: &Expr,
    func: &str,
    index: &ProgramIndex,
    call_graph: &CallGraph,
    sink: &str,
    visited: &mut HashSet<FlowPoint>,
    out: &mut Vec<CommandOrigin>,
) {
    match expr {
        Expr::StrLit { text, loc } => out.push(CommandOrigin::Literal {
            text: text.clone(),
            loc: loc.clone(),
        }),
        Expr::Concat { lhs, .. } => leftmost(lhs, func, index, call_graph, sink, visited, out),
        Expr::Format {
            template,
            args,
            loc,
        } => {
            if template.starts_with("%s") {
                if let Some(first) = args.first() {
                    leftmost(first, func, index, call_graph, sink, visited, out);
                }
            } else {
                out.push(CommandOrigin::Literal {
                    text: template.clone(),
                    loc: loc.clone(),
                });
            }
        }
        Expr::Var { name, loc } => {
            let Some(info) = index.uses.get(&index::lockey(loc)) else {
                return;
            };
            for def in info.defs.clone() {
                let Some(point) = index.point_of(func, name, &def) else {
                    out.push(CommandOrigin::Dynamic {
                        sink: sink.to_owned(),
                        loc: loc.clone(),
                    });
                    continue;
                };
                if !visited.insert(point.clone()) {
                    continue;
                }
                match &point {
                    FlowPoint::VarDef { stmt, .. } => {
                        if let Some(Stmt::Assign { expr, .. }) = index.find_stmt(*stmt) {
                            leftmost(expr, func, index, call_graph, sink, visited, out);
                        }
                    }
                    FlowPoint::Global { var } => {
                        for (f, s) in index.global_defs.get(var).cloned().unwrap_or_default() {
                            if let Some(Stmt::Assign { expr, .. }) = index.find_stmt(s) {
                                leftmost(expr, &f, index, call_graph, sink, visited, out);
                            }
                        }
                    }
                    FlowPoint::Param {
                        func: callee,
                        index: i,
                    } => {
                        let sites: Vec<LocKey> =
                            call_graph.callers_of(callee).map(|e| e.site).collect();
                        for site in sites {
                            if let Some((args, caller, _)) = callgraph::call_args_at(index, site) {
                                if let Some(arg) = args.get(*i) {
                                    leftmost(arg, &caller, index, call_graph, sink, visited, out);
                                }
                            }
                        }
                    }
                    FlowPoint::Return { .. } => {}
                }
            }
        }
        Expr::Call { callee, args, loc } => {
            if let Some(role) = index.builtins.role(callee) {
                use crate::builtins::BuiltinRole::*;
                match role {
                    InputApi => out.push(CommandOrigin::Dynamic {
                        sink: sink.to_owned(),
                        loc: loc.clone(),
                    }),
                    RandWrapper | TblDerandWrapper => {
                        if let Some(a) = args.first() {
                            leftmost(a, func, index, call_graph, sink, visited, out);
                        }
                    }
                    _ => {}
                }
            } else {
                let point = FlowPoint::Return {
                    func: callee.clone(),
                };
                if visited.insert(point) {
                    for stmt_key in index.returns.get(callee).cloned().unwrap_or_default() {
                        if let Some(Stmt::Return { expr: Some(e), .. }) = index.find_stmt(stmt_key)
                        {
                            leftmost(e, callee, index, call_graph, sink, visited, out);
                        }
                    }
                }
            }
        }
        Expr::IndirectCall { loc, .. } => out.push(CommandOrigin::Dynamic {
            sink: sink.to_owned(),
            loc: loc.clone(),
        }),
    }
}

/// Finds writes into trusted config paths that can carry remote-controlled
/// data. Remote-controlled means originating from an untrusted input API;
/// program constants are the developer's own and never violate.
pub fn config_write_violations(
    program: &Program,
    spec: &TrustedSpec,
    builtins: &BuiltinSet,
    vocabulary: &BTreeSet<String>,
) -> Vec<Violation> {
    let _ = vocabulary;
    let index = ProgramIndex::build(program, builtins);
    let call_graph = build_call_graph(&index);
    let graph = flow::FlowGraph::build(&index, &call_graph.indirect_resolution());

    // Propagate from untrusted API returns only.
    let mut tainted_effects: HashSet<LocKey> = HashSet::new();
    let mut work: Vec<FlowPoint> = Vec::new();
    let mut seen: HashSet<FlowPoint> = HashSet::new();
    let seed_ctx = |ctx: &FlowContext,
                    work: &mut Vec<FlowPoint>,
                    tainted_effects: &mut HashSet<LocKey>| match ctx {
        FlowContext::Point(p) => work.push(p.clone()),
        FlowContext::EffectArg { stmt, builtin, .. } if builtin == "write_config" => {
            tainted_effects.insert(*stmt);
        }
        _ => {}
    };
    for api in &index.api_calls {
        let trusted = spec.is_trusted_api(&api.name)
            || (api.name == "read_config"
                && api
                    .first_literal_arg
                    .as_deref()
                    .map(|p| spec.is_trusted_config(p))
                    .unwrap_or(false));
        if !trusted {
            seed_ctx(&api.context, &mut work, &mut tainted_effects);
        }
    }
    while let Some(p) = work.pop() {
        if !seen.insert(p.clone()) {
            continue;
        }
        for step in graph.steps_from(&p) {
            match &step.to {
                FlowContext::Point(q) => work.push(q.clone()),
                FlowContext::EffectArg { stmt, builtin, .. } if builtin == "write_config" => {
                    tainted_effects.insert(*stmt);
                }
                _ => {}
            }
        }
    }

    let mut violations = Vec::new();
    for call in &index.effect_calls {
        if call.name != "write_config" {
            continue;
        }
        let Some(path) = &call.first_literal_arg else {
            continue;
        };
        if !spec.is_trusted_config(path) {
            continue;
        }
        if tainted_effects.contains(&call.stmt) {
            violations.push(Violation {
                location: call.loc.clone(),
                config_path: path.clone(),
                message: format!(
                    "untrusted data written into trusted config `{path}`; redefine the trusted command specification"
                ),
            });
        }
    }
    violations
}
