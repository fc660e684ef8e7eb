//! The value-flow graph built over index points: which flow point feeds
//! which context, one step at a time. Forward propagation, backward tracing,
//! call-graph pruning and instrumentation placement all navigate this graph.

use std::collections::{BTreeMap, HashMap};

use super::index::{CallTargetKind, FlowContext, FlowPoint, LocKey, ProgramIndex};

/// One outgoing flow step from a point.
#[derive(Debug, Clone)]
pub struct FlowStep {
    pub to: FlowContext,
    /// The use expression this step rides on (a variable read or a call
    /// whose return value carries the flow).
    pub use_expr: LocKey,
    /// Statement containing that use.
    pub use_stmt: LocKey,
    /// Function containing that use.
    pub use_func: String,
}

/// Map from indirect call site to resolved candidate callees.
pub type IndirectResolution = BTreeMap<LocKey, Vec<String>>;

/// Every program function of matching arity: the conservative resolution an
/// indirect call starts from.
pub fn conservative_resolution(index: &ProgramIndex) -> IndirectResolution {
    let mut map = IndirectResolution::new();
    for call in &index.program_calls {
        if let CallTargetKind::Indirect(_) = call.target {
            let candidates: Vec<String> = index
                .arity
                .iter()
                .filter(|(_, a)| **a == call.arg_count)
                .map(|(f, _)| f.clone())
                .collect();
            map.insert(call.call, candidates);
        }
    }
    map
}

#[derive(Debug, Default)]
pub struct FlowGraph {
    succs: HashMap<FlowPoint, Vec<FlowStep>>,
}

impl FlowGraph {
    pub fn build(index: &ProgramIndex, resolution: &IndirectResolution) -> FlowGraph {
        let mut graph = FlowGraph::default();

        for info in index.uses.values() {
            for def in &info.defs {
                let Some(point) = index.point_of(&info.func, &info.var, def) else {
                    continue;
                };
                for ctx in resolve_context(&info.context, resolution) {
                    graph
                        .succs
                        .entry(point.clone())
                        .or_default()
                        .push(FlowStep {
                            to: ctx,
                            use_expr: info.expr,
                            use_stmt: info.stmt,
                            use_func: info.func.clone(),
                        });
                }
            }
        }

        // Return values flow into the context of each call site.
        for call in &index.program_calls {
            let callees: Vec<String> = match &call.target {
                CallTargetKind::Direct(g) => vec![g.clone()],
                CallTargetKind::Indirect(_) => {
                    resolution.get(&call.call).cloned().unwrap_or_default()
                }
            };
            for g in callees {
                if !index.arity.contains_key(&g) {
                    continue;
                }
                let from = FlowPoint::Return { func: g };
                for ctx in resolve_context(&call.value_context, resolution) {
                    graph.succs.entry(from.clone()).or_default().push(FlowStep {
                        to: ctx,
                        use_expr: call.call,
                        use_stmt: call.stmt,
                        use_func: call.caller.clone(),
                    });
                }
            }
        }

        graph
    }

    pub fn steps_from(&self, point: &FlowPoint) -> &[FlowStep] {
        self.succs.get(point).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True when a sink argument is reachable from `start`.
    pub fn reaches_sink(&self, start: &FlowPoint) -> bool {
        let mut seen = std::collections::HashSet::new();
        let mut work = vec![start.clone()];
        while let Some(p) = work.pop() {
            if !seen.insert(p.clone()) {
                continue;
            }
            for step in self.steps_from(&p) {
                match &step.to {
                    FlowContext::SinkArg { .. } => return true,
                    FlowContext::Point(q) => work.push(q.clone()),
                    _ => {}
                }
            }
        }
        false
    }
}

/// Resolves an indexing-time context into flow-graph contexts: indirect
/// argument slots become candidate parameters.
fn resolve_context(ctx: &FlowContext, resolution: &IndirectResolution) -> Vec<FlowContext> {
    match ctx {
        FlowContext::IndirectArg { call, index } => resolution
            .get(call)
            .into_iter()
            .flatten()
            .map(|g| {
                FlowContext::Point(FlowPoint::Param {
                    func: g.clone(),
                    index: *index,
                })
            })
            .collect(),
        FlowContext::Discard => Vec::new(),
        other => vec![other.clone()],
    }
}
