//! Call graph construction with indirect-call approximation.
//!
//! Direct edges come from syntactic calls; calls to builtins are kept as
//! flagged edges so reports show the complete picture. An indirect call
//! conservatively targets every program function of matching arity; a
//! candidate edge is then pruned when no value passed at the call site can
//! reach a sink inside the candidate, since such a callee is not
//! command-relevant.

use std::collections::BTreeSet;

use super::flow::{conservative_resolution, FlowGraph, IndirectResolution};
use super::index::{CallTargetKind, FlowPoint, LocKey, ProgramIndex};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub site: LocKey,
    pub indirect: bool,
    /// Callee is a builtin (sink or input API) rather than a program function.
    pub builtin: bool,
}

#[derive(Debug, Default)]
pub struct CallGraph {
    pub edges: Vec<CallEdge>,
}

impl CallGraph {
    /// Call sites invoking `func` (program-function edges only).
    pub fn callers_of<'a>(&'a self, func: &'a str) -> impl Iterator<Item = &'a CallEdge> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.callee == func && !e.builtin)
    }

    pub fn contains(&self, caller: &str, callee: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.caller == caller && e.callee == callee)
    }

    /// Kept candidate callees per indirect call site.
    pub fn indirect_resolution(&self) -> IndirectResolution {
        let mut map = IndirectResolution::new();
        for edge in &self.edges {
            if edge.indirect {
                map.entry(edge.site).or_default().push(edge.callee.clone());
            }
        }
        map
    }

    /// Program-call resolution covering direct and kept indirect targets.
    pub fn full_resolution(&self) -> IndirectResolution {
        let mut map = IndirectResolution::new();
        for edge in &self.edges {
            if !edge.builtin {
                map.entry(edge.site).or_default().push(edge.callee.clone());
            }
        }
        map
    }
}

pub fn build_call_graph(index: &ProgramIndex) -> CallGraph {
    let mut edges: BTreeSet<CallEdge> = BTreeSet::new();

    for call in &index.program_calls {
        if let CallTargetKind::Direct(callee) = &call.target {
            edges.insert(CallEdge {
                caller: call.caller.clone(),
                callee: callee.clone(),
                site: call.call,
                indirect: false,
                builtin: !index.arity.contains_key(callee),
            });
        }
    }
    for sink in &index.sink_calls {
        edges.insert(CallEdge {
            caller: sink.func.clone(),
            callee: sink.sink.clone(),
            site: sink.call,
            indirect: false,
            builtin: true,
        });
    }
    for api in &index.api_calls {
        edges.insert(CallEdge {
            caller: api.func.clone(),
            callee: api.name.clone(),
            site: api.expr,
            indirect: false,
            builtin: true,
        });
    }

    // Conservative indirect candidates, pruned by sink reachability of the
    // values handed over at the call site.
    let conservative = conservative_resolution(index);
    let graph = FlowGraph::build(index, &conservative);
    for call in &index.program_calls {
        if let CallTargetKind::Indirect(_) = call.target {
            let candidates = conservative.get(&call.call).cloned().unwrap_or_default();
            for callee in candidates {
                let keeps = (0..call.arg_count).any(|i| {
                    graph.reaches_sink(&FlowPoint::Param {
                        func: callee.clone(),
                        index: i,
                    })
                });
                if keeps {
                    edges.insert(CallEdge {
                        caller: call.caller.clone(),
                        callee,
                        site: call.call,
                        indirect: true,
                        builtin: false,
                    });
                }
            }
        }
    }

    CallGraph {
        edges: edges.into_iter().collect(),
    }
}

/// Argument expressions at a call site, looked up by site key. Used by the
/// backward analysis to jump from a parameter to caller arguments.
pub fn call_args_at<'p>(
    index: &ProgramIndex<'p>,
    site: LocKey,
) -> Option<(&'p [crate::minilang::Expr], String, LocKey)> {
    let call_site = index.program_calls.iter().find(|c| c.call == site)?;
    let call_expr = index.find_expr(call_site.stmt, site)?;
    match call_expr {
        crate::minilang::Expr::Call { args, .. }
        | crate::minilang::Expr::IndirectCall { args, .. } => {
            Some((args.as_slice(), call_site.caller.clone(), call_site.stmt))
        }
        _ => None,
    }
}
