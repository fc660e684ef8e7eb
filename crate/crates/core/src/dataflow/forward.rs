//! Forward propagation from trusted and untrusted sources.
//!
//! Trusted sources: string literals carrying a known command name, returns
//! of spec-trusted APIs, and `read_config` reads of spec-trusted paths.
//! Untrusted sources: returns of every other input API, and constant
//! strings with no command content. Each source occurrence grows a
//! dependency tree along def-use steps; the union of tree members per trust
//! class is what the backward pass consults.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::builtins::BuiltinSet;
use crate::tcs::TrustedSpec;

use super::flow::{FlowGraph, IndirectResolution};
use super::index::{FlowContext, FlowPoint, LocKey, ProgramIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trust {
    Trusted,
    Untrusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepNodeKind {
    Source,
    Var,
    Func,
    Sink,
}

#[derive(Debug, Clone)]
pub struct DepNode {
    pub kind: DepNodeKind,
    pub name: String,
    pub at: LocKey,
    pub trust: Trust,
}

/// Dependency tree from one source occurrence. `children[i]` lists the
/// indices of node `i`'s children; node 0 is the root.
#[derive(Debug, Clone)]
pub struct DepTree {
    pub nodes: Vec<DepNode>,
    pub children: Vec<Vec<usize>>,
}

impl DepTree {
    fn add_node(&mut self, parent: Option<usize>, node: DepNode) -> usize {
        let id = self.nodes.len();
        self.nodes.push(node);
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p].push(id);
        }
        id
    }

    pub fn root(&self) -> &DepNode {
        &self.nodes[0]
    }
}

/// A source occurrence to start propagation from.
#[derive(Debug, Clone)]
pub struct SourceOccurrence {
    pub trust: Trust,
    pub name: String,
    pub expr: LocKey,
    pub func: String,
    pub context: FlowContext,
}

pub struct ForwardResult {
    pub trusted_trees: Vec<DepTree>,
    pub untrusted_trees: Vec<DepTree>,
    pub trusted_points: HashSet<FlowPoint>,
    pub untrusted_points: HashSet<FlowPoint>,
    /// Source classification per literal/API occurrence, reused by the
    /// backward pass: expr loc -> trust.
    pub source_trust: HashMap<LocKey, Trust>,
}

impl ForwardResult {
    pub fn trusted_only(&self, p: &FlowPoint) -> bool {
        self.trusted_points.contains(p) && !self.untrusted_points.contains(p)
    }

    pub fn untrusted_touched(&self, p: &FlowPoint) -> bool {
        self.untrusted_points.contains(p)
    }
}

/// Classifies every source occurrence in the program.
pub fn collect_sources(
    index: &ProgramIndex,
    spec: &TrustedSpec,
    vocabulary: &BTreeSet<String>,
) -> Vec<SourceOccurrence> {
    let mut sources = Vec::new();
    for lit in &index.literals {
        let trust = if spec.literal_is_trusted(&lit.text, vocabulary) {
            Trust::Trusted
        } else {
            Trust::Untrusted
        };
        sources.push(SourceOccurrence {
            trust,
            name: format!("{:?}", lit.text),
            expr: lit.expr,
            func: lit.func.clone(),
            context: lit.context.clone(),
        });
    }
    for api in &index.api_calls {
        let trust =
            if crate::tcs::api_return_is_trusted(spec, &api.name, api.first_literal_arg.as_deref())
            {
                Trust::Trusted
            } else {
                Trust::Untrusted
            };
        sources.push(SourceOccurrence {
            trust,
            name: format!("{}()", api.name),
            expr: api.expr,
            func: api.func.clone(),
            context: api.context.clone(),
        });
    }
    sources.sort_by_key(|s| s.expr);
    sources
}

pub fn forward_analysis(
    index: &ProgramIndex,
    graph: &FlowGraph,
    resolution: &IndirectResolution,
    spec: &TrustedSpec,
    vocabulary: &BTreeSet<String>,
    builtins: &BuiltinSet,
) -> ForwardResult {
    let _ = builtins;
    let sources = collect_sources(index, spec, vocabulary);
    let mut result = ForwardResult {
        trusted_trees: Vec::new(),
        untrusted_trees: Vec::new(),
        trusted_points: HashSet::new(),
        untrusted_points: HashSet::new(),
        source_trust: HashMap::new(),
    };

    for source in sources {
        result.source_trust.insert(source.expr, source.trust);
        let seeds = seed_points(&source.context, resolution);
        let tree = grow_tree(index, graph, &source, &seeds);
        match source.trust {
            Trust::Trusted => {
                mark_points(graph, &seeds, &mut result.trusted_points);
                result.trusted_trees.push(tree);
            }
            Trust::Untrusted => {
                mark_points(graph, &seeds, &mut result.untrusted_points);
                result.untrusted_trees.push(tree);
            }
        }
    }
    result
}

/// Flow points a source occurrence feeds directly. Indirect-call argument
/// positions fan out to every kept candidate's parameter.
fn seed_points(ctx: &FlowContext, resolution: &IndirectResolution) -> Vec<FlowPoint> {
    match ctx {
        FlowContext::Point(p) => vec![p.clone()],
        FlowContext::IndirectArg { call, index } => resolution
            .get(call)
            .into_iter()
            .flatten()
            .map(|g| FlowPoint::Param {
                func: g.clone(),
                index: *index,
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn mark_points(graph: &FlowGraph, seeds: &[FlowPoint], into: &mut HashSet<FlowPoint>) {
    let mut work: Vec<FlowPoint> = seeds.to_vec();
    let mut seen: HashSet<FlowPoint> = HashSet::new();
    while let Some(p) = work.pop() {
        if !seen.insert(p.clone()) {
            continue;
        }
        into.insert(p.clone());
        for step in graph.steps_from(&p) {
            if let FlowContext::Point(q) = &step.to {
                work.push(q.clone());
            }
        }
    }
}

/// Grows the dependency tree for a source: one node per first visit of a
/// flow point, plus leaf nodes for sink/effect endpoints.
fn grow_tree(
    index: &ProgramIndex,
    graph: &FlowGraph,
    source: &SourceOccurrence,
    seeds: &[FlowPoint],
) -> DepTree {
    let _ = index;
    let mut tree = DepTree {
        nodes: Vec::new(),
        children: Vec::new(),
    };
    let root = tree.add_node(
        None,
        DepNode {
            kind: DepNodeKind::Source,
            name: source.name.clone(),
            at: source.expr,
            trust: source.trust,
        },
    );

    let mut visited: HashSet<FlowPoint> = HashSet::new();
    let mut stack: Vec<(usize, FlowPoint)> = Vec::new();
    for p in seeds {
        if visited.insert(p.clone()) {
            let node = tree.add_node(
                Some(root),
                DepNode {
                    kind: point_kind(p),
                    name: p.label(),
                    at: point_at(p, source.expr),
                    trust: source.trust,
                },
            );
            stack.push((node, p.clone()));
        }
    }
    if seeds.is_empty() {
        attach_terminal(&mut tree, root, &source.context, source.trust);
    }

    while let Some((node, point)) = stack.pop() {
        for step in graph.steps_from(&point) {
            match &step.to {
                FlowContext::Point(q) => {
                    if visited.insert(q.clone()) {
                        let child = tree.add_node(
                            Some(node),
                            DepNode {
                                kind: point_kind(q),
                                name: q.label(),
                                at: step.use_expr,
                                trust: source.trust,
                            },
                        );
                        stack.push((child, q.clone()));
                    }
                }
                other => attach_terminal(&mut tree, node, other, source.trust),
            }
        }
    }
    tree
}

fn attach_terminal(tree: &mut DepTree, parent: usize, ctx: &FlowContext, trust: Trust) {
    match ctx {
        FlowContext::SinkArg { sink, call, .. } => {
            let exists = tree.children[parent]
                .iter()
                .any(|&c| tree.nodes[c].kind == DepNodeKind::Sink && tree.nodes[c].at == *call);
            if !exists {
                tree.add_node(
                    Some(parent),
                    DepNode {
                        kind: DepNodeKind::Sink,
                        name: format!("{sink}()"),
                        at: *call,
                        trust,
                    },
                );
            }
        }
        FlowContext::EffectArg { builtin, stmt, .. } => {
            let exists = tree.children[parent]
                .iter()
                .any(|&c| tree.nodes[c].kind == DepNodeKind::Func && tree.nodes[c].at == *stmt);
            if !exists {
                tree.add_node(
                    Some(parent),
                    DepNode {
                        kind: DepNodeKind::Func,
                        name: format!("{builtin}()"),
                        at: *stmt,
                        trust,
                    },
                );
            }
        }
        _ => {}
    }
}

fn point_kind(p: &FlowPoint) -> DepNodeKind {
    match p {
        FlowPoint::VarDef { .. } | FlowPoint::Global { .. } => DepNodeKind::Var,
        FlowPoint::Param { .. } | FlowPoint::Return { .. } => DepNodeKind::Func,
    }
}

fn point_at(p: &FlowPoint, fallback: LocKey) -> LocKey {
    match p {
        FlowPoint::VarDef { stmt, .. } => *stmt,
        _ => fallback,
    }
}
