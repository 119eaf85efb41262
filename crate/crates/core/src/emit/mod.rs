//! Text renderings of a [`WorkflowModel`].
//!
//! Both emitters are pure and byte-deterministic for a given model and view.

mod dot;
mod yw;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

pub use dot::emit_dot;
pub use yw::emit_yw;

use crate::graph::{EdgeKind, Node, NodeKind, WorkflowModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewKind {
    /// Steps, data and parameters.
    Combined,
    /// Steps only.
    Process,
    /// Data only, edges labeled with the deriving step.
    Data,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [ViewKind::Combined, ViewKind::Process, ViewKind::Data];

    /// Whether a node of this kind is drawn in the view.
    pub fn shows(self, kind: NodeKind) -> bool {
        match self {
            ViewKind::Combined => true,
            ViewKind::Process => kind.is_process(),
            ViewKind::Data => kind.is_data(),
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Combined => "combined",
            ViewKind::Process => "process",
            ViewKind::Data => "data",
        })
    }
}

impl FromStr for ViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "combined" => Ok(ViewKind::Combined),
            "process" => Ok(ViewKind::Process),
            "data" => Ok(ViewKind::Data),
            other => Err(format!("unknown view {other:?}")),
        }
    }
}

/// Replaces every character that is not ASCII alphanumeric with `_`.
pub fn sanitize(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if out.is_empty() {
        "_".to_owned()
    } else {
        out
    }
}

/// Step number (1-based) of the step that produces a data node, 0 for sources.
fn producers(model: &WorkflowModel) -> HashMap<&str, usize> {
    let idx = model.index();
    let mut out = HashMap::new();
    for e in &model.edges {
        if e.kind != EdgeKind::Flow {
            continue;
        }
        let from = &model.nodes[idx[e.from.as_str()]];
        if from.kind.is_process() {
            out.insert(e.to.as_str(), from.step_index.map_or(0, |i| i + 1));
        }
    }
    out
}

fn base_name(n: &Node) -> String {
    match n.kind {
        NodeKind::Param => sanitize(n.payload("key").unwrap_or(&n.label)),
        _ => sanitize(&n.label),
    }
}

/// Identifier for every node: the sanitized label, suffixed with the step
/// number wherever two nodes of the same namespace would share a name.
/// Steps and summaries form one namespace, data and parameters another.
pub fn identifiers(model: &WorkflowModel) -> HashMap<String, String> {
    let producers = producers(model);
    let suffix_of = |n: &Node| -> usize {
        match n.kind {
            NodeKind::DataTable | NodeKind::DataColumn => {
                producers.get(n.id.as_str()).copied().unwrap_or(0)
            }
            _ => n.step_index.map_or(0, |i| i + 1),
        }
    };
    let mut out = HashMap::new();
    for process in [true, false] {
        let members: Vec<&Node> = model
            .nodes
            .iter()
            .filter(|n| n.kind.is_process() == process)
            .collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for n in &members {
            *counts.entry(base_name(n)).or_default() += 1;
        }
        let mut taken: BTreeMap<String, usize> = BTreeMap::new();
        for n in &members {
            let base = base_name(n);
            let mut name = if counts[&base] > 1 {
                format!("{base}_{}", suffix_of(n))
            } else {
                base
            };
            let seen = taken.entry(name.clone()).or_default();
            *seen += 1;
            if *seen > 1 {
                name = format!("{name}_{}", *seen - 1);
            }
            out.insert(n.id.clone(), name);
        }
    }
    out
}

/// Edges of a view as `(from, to, label)` node-index triples, sorted by
/// the positions of their endpoints.
pub(crate) fn view_edges(
    model: &WorkflowModel,
    view: ViewKind,
) -> Vec<(usize, usize, Option<String>, EdgeKind)> {
    let idx = model.index();
    let mut out: Vec<(usize, usize, Option<String>, EdgeKind)> = match view {
        ViewKind::Combined => model
            .edges
            .iter()
            .map(|e| {
                (
                    idx[e.from.as_str()],
                    idx[e.to.as_str()],
                    e.label.clone(),
                    e.kind,
                )
            })
            .collect(),
        ViewKind::Process => model
            .process_edges()
            .into_iter()
            .map(|(a, b)| (idx[a.as_str()], idx[b.as_str()], None, EdgeKind::Flow))
            .collect(),
        ViewKind::Data => {
            let mut ins: HashMap<usize, Vec<usize>> = HashMap::new();
            let mut outs: HashMap<usize, Vec<usize>> = HashMap::new();
            for e in model.edges.iter().filter(|e| e.kind == EdgeKind::Flow) {
                let (a, b) = (idx[e.from.as_str()], idx[e.to.as_str()]);
                if model.nodes[a].kind.is_data() && model.nodes[b].kind.is_process() {
                    ins.entry(b).or_default().push(a);
                } else if model.nodes[a].kind.is_process() && model.nodes[b].kind.is_data() {
                    outs.entry(a).or_default().push(b);
                }
            }
            let mut edges = Vec::new();
            for (p, node) in model.nodes.iter().enumerate() {
                if !node.kind.is_process() {
                    continue;
                }
                for &i in ins.get(&p).into_iter().flatten() {
                    for &o in outs.get(&p).into_iter().flatten() {
                        edges.push((i, o, Some(node.label.clone()), EdgeKind::Flow));
                    }
                }
            }
            edges
        }
    };
    out.sort_by_key(|e| (e.0, e.1));
    out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    out
}
