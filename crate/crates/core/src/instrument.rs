//! Randomization-wrapper insertion.
//!
//! A chosen target marks where trusted command data is defined; wrapping it
//! right there would also randomize every other use of the value (log file
//! names, unlink paths), breaking benign behavior. Placement therefore walks
//! the data-dependency graph from the target toward the sink and wraps at
//! the earliest node whose downstream uses are all on the sink path. Table
//! position variables in query sinks additionally get a `tbl_derand`
//! wrapper.

use std::collections::{HashMap, HashSet};

use crate::builtins::{BuiltinSet, SinkKind};
use crate::dataflow::{
    flow::FlowGraph, index::lockey, Analysis, FlowContext, FlowPoint, LocKey, ProgramIndex, Target,
};
use crate::minilang::{Expr, Program, Stmt};
use crate::tcs::TrustedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wrapper {
    Rand,
    TblDerand,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Placement {
    pub stmt: LocKey,
    pub expr: LocKey,
    pub wrapper: Wrapper,
    /// Placement fell through to the sink argument itself because every
    /// earlier node on the path also feeds a non-sink use.
    pub downgraded: bool,
}

#[derive(Debug, Default)]
pub struct InstrumentationPlan {
    pub placements: Vec<Placement>,
    pub notes: Vec<String>,
}

/// Statement-level view of the dependencies from one target: nodes are
/// statements, edges follow dataflow direction, the sink statement is
/// reachable from the root.
#[derive(Debug)]
pub struct DataDepGraph {
    pub root: LocKey,
    pub nodes: Vec<LocKey>,
    pub edges: Vec<(LocKey, LocKey)>,
    pub sink_nodes: Vec<LocKey>,
}

fn root_point(index: &ProgramIndex, target: &Target) -> Option<FlowPoint> {
    let (func, var) = index.def_rhs.get(&target.stmt)?;
    if index.globals.contains(var) {
        Some(FlowPoint::Global { var: var.clone() })
    } else {
        Some(FlowPoint::VarDef {
            func: func.clone(),
            var: var.clone(),
            stmt: target.stmt,
        })
    }
}

/// True when no effect builtin consumes the value downstream of `point`.
fn sink_path_only(graph: &FlowGraph, point: &FlowPoint) -> bool {
    let mut seen = HashSet::new();
    let mut work = vec![point.clone()];
    while let Some(p) = work.pop() {
        if !seen.insert(p.clone()) {
            continue;
        }
        for step in graph.steps_from(&p) {
            match &step.to {
                FlowContext::EffectArg { .. } => return false,
                FlowContext::Point(q) => work.push(q.clone()),
                _ => {}
            }
        }
    }
    true
}

/// Plans wrapping for one target: the earliest node on each root-to-sink
/// path whose downstream contains only the sink path.
pub fn plan_placement(
    program: &Program,
    target: &Target,
    builtins: &BuiltinSet,
) -> InstrumentationPlan {
    let index = ProgramIndex::build(program, builtins);
    let call_graph = crate::dataflow::build_call_graph(&index);
    let graph = FlowGraph::build(&index, &call_graph.indirect_resolution());
    let mut plan = InstrumentationPlan::default();

    let Some(root) = root_point(&index, target) else {
        // The target expression sits directly in a sink argument; wrap it
        // in place.
        plan.placements.push(Placement {
            stmt: target.stmt,
            expr: target.expr,
            wrapper: Wrapper::Rand,
            downgraded: false,
        });
        return plan;
    };

    if sink_path_only(&graph, &root) {
        plan.placements.push(Placement {
            stmt: target.stmt,
            expr: target.expr,
            wrapper: Wrapper::Rand,
            downgraded: false,
        });
        return plan;
    }

    // Enumerate simple paths from the root to sink arguments; on each path
    // pick the earliest step whose downstream is clean. The final step (the
    // use inside the sink argument) is always legal.
    let mut placements = HashSet::new();
    let mut stack: Vec<(FlowPoint, Vec<(LocKey, LocKey)>)> = vec![(root.clone(), Vec::new())];
    let mut visited_paths = HashSet::new();
    while let Some((point, path)) = stack.pop() {
        for step in graph.steps_from(&point) {
            match &step.to {
                FlowContext::SinkArg { .. } => {
                    let mut full = path.clone();
                    full.push((step.use_stmt, step.use_expr));
                    let mut chosen = None;
                    for (i, (stmt, expr)) in full.iter().enumerate() {
                        // The point after step i-1 is legal when the rest of
                        // its downstream avoids effects; re-derive it from
                        // the path prefix.
                        let after: Option<FlowPoint> = if i == full.len() - 1 {
                            None // sink consumption, always legal
                        } else {
                            point_after(&graph, &root, &full[..=i])
                        };
                        let legal = match &after {
                            None => true,
                            Some(p) => sink_path_only(&graph, p),
                        };
                        if legal {
                            chosen = Some(Placement {
                                stmt: *stmt,
                                expr: *expr,
                                wrapper: Wrapper::Rand,
                                downgraded: i == full.len() - 1 && full.len() > 1,
                            });
                            break;
                        }
                    }
                    if let Some(p) = chosen {
                        if p.downgraded {
                            plan.notes.push(format!(
                                "placement downgraded to the sink argument at {}:{}",
                                p.stmt.0, p.stmt.1
                            ));
                        }
                        placements.insert(p);
                    }
                }
                FlowContext::Point(q) => {
                    let mut full = path.clone();
                    full.push((step.use_stmt, step.use_expr));
                    if visited_paths.insert((q.clone(), full.clone())) && full.len() < 32 {
                        stack.push((q.clone(), full));
                    }
                }
                _ => {}
            }
        }
    }

    let mut ordered: Vec<Placement> = placements.into_iter().collect();
    ordered.sort_by_key(|p| (p.stmt, p.expr));
    plan.placements.extend(ordered);
    plan
}

/// The flow point reached after following `prefix` from the root. Paths are
/// short; a linear re-walk keeps the step bookkeeping simple.
fn point_after(
    graph: &FlowGraph,
    root: &FlowPoint,
    prefix: &[(LocKey, LocKey)],
) -> Option<FlowPoint> {
    let mut current = root.clone();
    for (stmt, expr) in prefix {
        let next = graph.steps_from(&current).iter().find_map(|s| {
            if s.use_stmt == *stmt && s.use_expr == *expr {
                match &s.to {
                    FlowContext::Point(q) => Some(q.clone()),
                    _ => None,
                }
            } else {
                None
            }
        })?;
        current = next;
    }
    Some(current)
}

/// Statement-level dependency graph for one target.
pub fn dep_graph(program: &Program, target: &Target, builtins: &BuiltinSet) -> DataDepGraph {
    let index = ProgramIndex::build(program, builtins);
    let call_graph = crate::dataflow::build_call_graph(&index);
    let graph = FlowGraph::build(&index, &call_graph.indirect_resolution());

    let mut nodes: Vec<LocKey> = vec![target.stmt];
    let mut edges = Vec::new();
    let mut sink_nodes = Vec::new();
    let Some(root) = root_point(&index, target) else {
        return DataDepGraph {
            root: target.stmt,
            nodes,
            edges,
            sink_nodes,
        };
    };

    let mut seen = HashSet::new();
    let mut work: Vec<(FlowPoint, LocKey)> = vec![(root, target.stmt)];
    while let Some((point, from_stmt)) = work.pop() {
        if !seen.insert(point.clone()) {
            continue;
        }
        for step in graph.steps_from(&point) {
            let to_stmt = step.use_stmt;
            if !nodes.contains(&to_stmt) {
                nodes.push(to_stmt);
            }
            if !edges.contains(&(from_stmt, to_stmt)) && from_stmt != to_stmt {
                edges.push((from_stmt, to_stmt));
            }
            match &step.to {
                FlowContext::Point(q) => work.push((q.clone(), to_stmt)),
                FlowContext::SinkArg { .. } if !sink_nodes.contains(&to_stmt) => {
                    sink_nodes.push(to_stmt);
                }
                _ => {}
            }
        }
    }
    nodes.sort();
    edges.sort();
    sink_nodes.sort();
    DataDepGraph {
        root: target.stmt,
        nodes,
        edges,
        sink_nodes,
    }
}

/// Produces the instrumented program: `rand` wrappers at planned placements
/// and `tbl_derand` wrappers on unquoted variables in table position of
/// query-sink arguments. The input program is untouched; instrumenting an
/// already-instrumented program changes nothing.
pub fn instrument(
    program: &Program,
    _spec: &TrustedSpec,
    analysis: &Analysis,
    builtins: &BuiltinSet,
) -> Program {
    let mut wraps: HashMap<(LocKey, LocKey), Wrapper> = HashMap::new();
    for target in &analysis.ins_out {
        let plan = plan_placement(program, target, builtins);
        for p in plan.placements {
            wraps.insert((p.stmt, p.expr), Wrapper::Rand);
        }
    }
    for (stmt, expr) in table_position_vars(program, builtins) {
        wraps.insert((stmt, expr), Wrapper::TblDerand);
    }

    let mut out = program.clone();
    for f in &mut out.functions {
        rewrite_body(&mut f.body, &wraps);
    }
    out
}

fn rewrite_body(stmts: &mut [Stmt], wraps: &HashMap<(LocKey, LocKey), Wrapper>) {
    for stmt in stmts {
        let stmt_key = lockey(stmt.loc());
        match stmt {
            Stmt::Assign { expr, .. } => rewrite_expr(expr, stmt_key, wraps, false),
            Stmt::Call { call, .. } => rewrite_expr(call, stmt_key, wraps, false),
            Stmt::Return { expr: Some(e), .. } => rewrite_expr(e, stmt_key, wraps, false),
            Stmt::Return { expr: None, .. } => {}
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                rewrite_expr(cond, stmt_key, wraps, false);
                rewrite_body(then_body, wraps);
                rewrite_body(else_body, wraps);
            }
            Stmt::While { cond, body, .. } => {
                rewrite_expr(cond, stmt_key, wraps, false);
                rewrite_body(body, wraps);
            }
        }
    }
}

fn is_wrapper_call(expr: &Expr) -> bool {
    matches!(expr, Expr::Call { callee, .. } if callee == "rand" || callee == "tbl_derand")
}

fn rewrite_expr(
    expr: &mut Expr,
    stmt: LocKey,
    wraps: &HashMap<(LocKey, LocKey), Wrapper>,
    parent_is_wrapper: bool,
) {
    let key = (stmt, lockey(expr.loc()));
    if let Some(wrapper) = wraps.get(&key) {
        if !parent_is_wrapper && !is_wrapper_call(expr) {
            let loc = expr.loc().clone();
            let inner = std::mem::replace(
                expr,
                Expr::Var {
                    name: String::new(),
                    loc: loc.clone(),
                },
            );
            let callee = match wrapper {
                Wrapper::Rand => "rand",
                Wrapper::TblDerand => "tbl_derand",
            };
            *expr = Expr::Call {
                callee: callee.to_owned(),
                args: vec![inner],
                loc,
            };
            // The freshly wrapped inner expression needs no further pass.
            return;
        }
    }
    let wrapper_here = is_wrapper_call(expr);
    match expr {
        Expr::Concat { lhs, rhs, .. } => {
            rewrite_expr(lhs, stmt, wraps, false);
            rewrite_expr(rhs, stmt, wraps, false);
        }
        Expr::Format { args, .. } => {
            for a in args {
                rewrite_expr(a, stmt, wraps, false);
            }
        }
        Expr::Call { args, .. } | Expr::IndirectCall { args, .. } => {
            for a in args {
                rewrite_expr(a, stmt, wraps, wrapper_here);
            }
        }
        _ => {}
    }
}

/// Finds unquoted variables in table position inside query-sink arguments:
/// a variable whose nearest preceding literal fragment ends in a
/// `from`/`into`/`update` tail while quote parity is even.
fn table_position_vars(program: &Program, builtins: &BuiltinSet) -> Vec<(LocKey, LocKey)> {
    let index = ProgramIndex::build(program, builtins);
    let mut found = Vec::new();
    for sink in &index.sink_calls {
        if sink.kind != SinkKind::Sql {
            continue;
        }
        let Some(Expr::Call { args, .. }) = index.find_expr(sink.stmt, sink.call) else {
            continue;
        };
        for arg in args {
            let mut chain = Vec::new();
            flatten_concat(arg, &mut chain);
            let mut quote_parity_even = true;
            let mut prev_literal_tail: Option<String> = None;
            for element in chain {
                match element {
                    Expr::StrLit { text, .. } => {
                        let quotes = text.bytes().filter(|b| *b == b'\'').count();
                        if quotes % 2 == 1 {
                            quote_parity_even = !quote_parity_even;
                        }
                        prev_literal_tail = Some(text.clone());
                    }
                    Expr::Var { loc, .. } => {
                        if quote_parity_even {
                            if let Some(tail) = &prev_literal_tail {
                                if ends_in_table_keyword(tail) {
                                    found.push((sink.stmt, lockey(loc)));
                                }
                            }
                        }
                        prev_literal_tail = None;
                    }
                    _ => {
                        prev_literal_tail = None;
                    }
                }
            }
        }
    }
    found
}

fn flatten_concat<'e>(expr: &'e Expr, out: &mut Vec<&'e Expr>) {
    match expr {
        Expr::Concat { lhs, rhs, .. } => {
            flatten_concat(lhs, out);
            flatten_concat(rhs, out);
        }
        other => out.push(other),
    }
}

fn ends_in_table_keyword(text: &str) -> bool {
    let trimmed = text.trim_end();
    let last = trimmed
        .rsplit(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .next()
        .unwrap_or("");
    matches!(
        last.to_ascii_lowercase().as_str(),
        "from" | "into" | "update"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::analyze;
    use crate::minilang::parse;

    fn builtins() -> BuiltinSet {
        BuiltinSet::default()
    }

    fn spec(text: &str) -> TrustedSpec {
        TrustedSpec::parse(text, std::path::Path::new("."), "t.tcs").unwrap()
    }

    /// A command string also used to derive a log file name: the wrap must
    /// land on the command-line composition, not the shared definition.
    const MULTI_USE: &str = r#"
fn main(){
    bin = "ls";
    logname = bin + ".log";
    fopen(logname);
    unlink(logname);
    cmdline = bin + " -la";
    system(cmdline);
}
"#;

    #[test]
    fn placement_avoids_non_command_uses() {
        let program = parse(MULTI_USE, "m.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        assert_eq!(analysis.ins_out.len(), 1);
        let instrumented = instrument(&program, &spec("const:ls\n"), &analysis, &b);
        let text = instrumented.canonical_text();
        assert!(
            text.contains("cmdline = rand(bin) + \" -la\";"),
            "wrap belongs on the command composition:\n{text}"
        );
        assert!(
            text.contains("logname = bin + \".log\";"),
            "log name must stay untouched:\n{text}"
        );
        assert!(text.contains("fopen(logname);"));
    }

    #[test]
    fn literal_directly_at_sink_wrapped_in_place() {
        let program = parse(r#"fn main(){ system("ls"); }"#, "t.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let instrumented = instrument(&program, &spec("const:ls\n"), &analysis, &b);
        assert!(instrumented
            .canonical_text()
            .contains(r#"system(rand("ls"));"#));
    }

    #[test]
    fn clean_root_wrapped_at_definition() {
        // Both uses feed only the sink: the root placement is legal and
        // chosen.
        let src = r#"
fn main(){
    bin = "ls";
    a = bin + " -l";
    b = bin + " -a";
    system(a);
    system(b);
}
"#;
        let program = parse(src, "t.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let instrumented = instrument(&program, &spec("const:ls\n"), &analysis, &b);
        let text = instrumented.canonical_text();
        assert!(text.contains(r#"bin = rand("ls");"#), "{text}");
    }

    #[test]
    fn no_targets_means_no_change() {
        let program = parse(r#"fn main(){ system(input()); }"#, "t.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let instrumented = instrument(&program, &spec("const:ls\n"), &analysis, &b);
        assert!(program.structurally_eq(&instrumented));
    }

    #[test]
    fn instrumentation_is_idempotent() {
        for src in [
            MULTI_USE,
            r#"fn main(){ system("ls"); }"#,
            r#"fn main(){ sql_query("select * from " + input()); }"#,
        ] {
            let program = parse(src, "t.mpl").unwrap();
            let b = builtins();
            let sp = spec("const:ls\nconst:select\n");
            let analysis = analyze(&program, &sp, &b);
            let once = instrument(&program, &sp, &analysis, &b);
            let again_analysis = analyze(&once, &sp, &b);
            let twice = instrument(&once, &sp, &again_analysis, &b);
            assert!(
                once.structurally_eq(&twice),
                "not idempotent:\n{}\nvs\n{}",
                once.canonical_text(),
                twice.canonical_text()
            );
        }
    }

    #[test]
    fn table_position_variable_gets_tbl_derand() {
        let src = r#"
fn main(){
    t = input();
    sql_query("select * from " + t);
}
"#;
        let program = parse(src, "t.mpl").unwrap();
        let b = builtins();
        let sp = spec("const:select\n");
        let analysis = analyze(&program, &sp, &b);
        let instrumented = instrument(&program, &sp, &analysis, &b);
        let text = instrumented.canonical_text();
        assert!(
            text.contains("tbl_derand(t)"),
            "table position variable must be wrapped:\n{text}"
        );
    }

    #[test]
    fn quoted_variable_is_not_table_position() {
        let src = r#"
fn main(){
    v = input();
    sql_query("select * from users where name='" + v + "'");
}
"#;
        let program = parse(src, "t.mpl").unwrap();
        let b = builtins();
        let sp = spec("const:select\n");
        let analysis = analyze(&program, &sp, &b);
        let instrumented = instrument(&program, &sp, &analysis, &b);
        assert!(!instrumented.canonical_text().contains("tbl_derand"));
    }

    #[test]
    fn dep_graph_reaches_sink() {
        let program = parse(MULTI_USE, "m.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let target = analysis.ins_out.iter().next().unwrap();
        let g = dep_graph(&program, target, &b);
        assert_eq!(g.root, target.stmt);
        assert_eq!(g.sink_nodes.len(), 1);
        // Root, two derived compositions, two file uses, one sink.
        assert!(g.nodes.len() >= 4, "{g:?}");
        assert!(!g.edges.is_empty());
    }

    #[test]
    fn fully_shared_path_downgrades_to_sink_argument() {
        // Every node on the path also feeds a file API, so the wrap lands
        // on the sink argument itself and the plan says so.
        let src = r#"
fn main(){
    bin = "ls";
    fopen(bin);
    cmdline = bin + " -la";
    unlink(cmdline);
    system(cmdline);
}
"#;
        let program = parse(src, "t.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let target = analysis.ins_out.iter().next().expect("target");
        let plan = plan_placement(&program, target, &b);
        assert!(plan.placements.iter().any(|p| p.downgraded), "{plan:?}");
        assert!(!plan.notes.is_empty());
        let instrumented = instrument(&program, &spec("const:ls\n"), &analysis, &b);
        let text = instrumented.canonical_text();
        assert!(text.contains("system(rand(cmdline));"), "{text}");
        assert!(text.contains("unlink(cmdline);"), "{text}");
    }

    #[test]
    fn diamond_feeding_only_sink_wraps_root() {
        let src = r#"
fn main(){
    bin = "ls";
    left = bin + " -l";
    right = bin + " -a";
    both = left + right;
    system(both);
}
"#;
        let program = parse(src, "t.mpl").unwrap();
        let b = builtins();
        let analysis = analyze(&program, &spec("const:ls\n"), &b);
        let target = analysis.ins_out.iter().next().unwrap();
        let plan = plan_placement(&program, target, &b);
        assert_eq!(plan.placements.len(), 1, "{:?}", plan.placements);
        assert_eq!(plan.placements[0].stmt, target.stmt);
    }
}
