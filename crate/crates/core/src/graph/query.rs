use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{GraphError, WorkflowModel};

#[derive(Clone, Copy)]
enum Direction {
    Up,
    Down,
}

/// Subgraph induced by `node_id` and everything it was derived from.
pub fn upstream_lineage(model: &WorkflowModel, node_id: &str) -> Result<WorkflowModel, GraphError> {
    closure(model, node_id, Direction::Up)
}

/// Subgraph induced by `node_id` and everything derived from it.
pub fn downstream_impact(
    model: &WorkflowModel,
    node_id: &str,
) -> Result<WorkflowModel, GraphError> {
    closure(model, node_id, Direction::Down)
}

fn closure(
    model: &WorkflowModel,
    start: &str,
    dir: Direction,
) -> Result<WorkflowModel, GraphError> {
    if model.node(start).is_none() {
        return Err(GraphError::UnknownNode(start.to_owned()));
    }
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &model.edges {
        let (a, b) = match dir {
            Direction::Up => (e.to.as_str(), e.from.as_str()),
            Direction::Down => (e.from.as_str(), e.to.as_str()),
        };
        adj.entry(a).or_default().push(b);
    }
    let mut keep = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in adj.get(v).into_iter().flatten() {
            if keep.insert(w) {
                queue.push_back(w);
            }
        }
    }
    Ok(induced(model, &keep))
}

fn induced(model: &WorkflowModel, keep: &BTreeSet<&str>) -> WorkflowModel {
    WorkflowModel {
        name: model.name.clone(),
        kind: model.kind,
        nodes: model
            .nodes
            .iter()
            .filter(|n| keep.contains(n.id.as_str()))
            .cloned()
            .collect(),
        edges: model
            .edges
            .iter()
            .filter(|e| keep.contains(e.from.as_str()) && keep.contains(e.to.as_str()))
            .cloned()
            .collect(),
        components: model
            .components
            .iter()
            .map(|g| {
                g.iter()
                    .filter(|id| keep.contains(id.as_str()))
                    .cloned()
                    .collect::<Vec<_>>()
            })
            .filter(|g| !g.is_empty())
            .collect(),
    }
}
