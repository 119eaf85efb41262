use std::collections::HashMap;
use std::fmt::Write as _;

use super::{view_edges, ViewKind};
use crate::graph::{EdgeKind, ModelKind, Node, NodeKind, WorkflowModel};

const STEP_FILL: &str = "#CCFFCC";
const DATA_FILL: &str = "#FAFAD2";
const PARAM_FILL: &str = "#FFFFFF";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn node_attrs(n: &Node) -> String {
    let (style, fill, extra) = match n.kind {
        NodeKind::Step => ("filled", STEP_FILL, ""),
        NodeKind::Summary => ("filled,bold", STEP_FILL, " peripheries=2"),
        NodeKind::DataTable | NodeKind::DataColumn => ("rounded,filled", DATA_FILL, ""),
        NodeKind::Param => ("filled", PARAM_FILL, ""),
    };
    format!(
        "label={} shape=box style={} fillcolor={}{extra}",
        quote(&n.label),
        quote(style),
        quote(fill)
    )
}

/// Component index for each node id, where the node belongs to exactly one
/// component. Data nodes shared between components stay outside clusters.
fn cluster_of(model: &WorkflowModel) -> HashMap<&str, usize> {
    let mut of: HashMap<&str, usize> = HashMap::new();
    if model.kind == ModelKind::Linear {
        return of;
    }
    for (k, group) in model.components.iter().enumerate() {
        for id in group {
            of.insert(id.as_str(), k);
        }
    }
    let idx = model.index();
    let mut touching: HashMap<&str, Vec<usize>> = HashMap::new();
    for e in &model.edges {
        for (here, there) in [(&e.from, &e.to), (&e.to, &e.from)] {
            let node = &model.nodes[idx[here.as_str()]];
            if node.kind.is_process() {
                continue;
            }
            if let Some(&k) = of.get(there.as_str()) {
                touching.entry(here.as_str()).or_default().push(k);
            }
        }
    }
    for (id, mut ks) in touching {
        ks.sort_unstable();
        ks.dedup();
        if let [k] = ks.as_slice() {
            of.insert(id, *k);
        }
    }
    of
}

/// Renders a view of the model as a Graphviz digraph.
pub fn emit_dot(model: &WorkflowModel, view: ViewKind) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&model.name));
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");

    let shown: Vec<usize> = (0..model.nodes.len())
        .filter(|&i| view.shows(model.nodes[i].kind))
        .collect();
    let clusters = cluster_of(model);
    let mut grouped: Vec<Vec<usize>> = vec![Vec::new(); model.components.len()];
    let mut loose = Vec::new();
    for &i in &shown {
        match clusters.get(model.nodes[i].id.as_str()) {
            Some(&k) => grouped[k].push(i),
            None => loose.push(i),
        }
    }
    for (k, members) in grouped.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let _ = writeln!(out, "  subgraph cluster_{k} {{");
        let _ = writeln!(
            out,
            "    label={};",
            quote(&format!("subworkflow {}", k + 1))
        );
        out.push_str("    style=\"dashed\";\n");
        for &i in members {
            let n = &model.nodes[i];
            let _ = writeln!(out, "    {} [{}];", quote(&n.id), node_attrs(n));
        }
        out.push_str("  }\n");
    }
    for &i in &loose {
        let n = &model.nodes[i];
        let _ = writeln!(out, "  {} [{}];", quote(&n.id), node_attrs(n));
    }

    for (from, to, label, kind) in view_edges(model, view) {
        let mut attrs = Vec::new();
        if let Some(l) = label {
            attrs.push(format!("label={}", quote(&l)));
        }
        if kind == EdgeKind::Order {
            attrs.push("style=\"dashed\"".to_owned());
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(" "))
        };
        let _ = writeln!(
            out,
            "  {} -> {}{attrs};",
            quote(&model.nodes[from].id),
            quote(&model.nodes[to].id)
        );
    }
    out.push_str("}\n");
    out
}
