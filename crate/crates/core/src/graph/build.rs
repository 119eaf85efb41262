use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde_json::Value;

use super::dependency::{components, dependency_edges, transitive_reduction};
use super::{Edge, EdgeKind, GraphError, ModelKind, Node, NodeKind, WorkflowModel};
use crate::effects::{ColumnEffect, ColumnId, SchemaState};
use crate::recipe::{RawOperation, Recipe};

const MAX_PARAM_LABEL: usize = 40;

/// The steps folded into one summary node, as their own linear workflow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetailModel {
    pub parent_summary_id: String,
    pub inner: WorkflowModel,
}

fn model_name(recipe: &Recipe) -> String {
    recipe
        .source_name
        .as_deref()
        .and_then(|s| Path::new(s).file_stem())
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("workflow")
        .to_owned()
}

pub(crate) fn step_id(index: usize) -> String {
    format!("S{}", index + 1)
}

fn param_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_owned()
    } else {
        let mut t: String = s.chars().take(max - 1).collect();
        t.push('…');
        t
    }
}

/// Parameter nodes of a step; the engine configuration is not a parameter.
fn param_nodes(op: &RawOperation) -> Vec<Node> {
    op.params
        .iter()
        .filter(|(k, _)| k.as_str() != "engineConfig")
        .map(|(key, value)| {
            let text = param_text(value);
            Node {
                kind: NodeKind::Param,
                id: format!("{}.{key}", step_id(op.index)),
                label: truncate(&format!("{key}: {text}"), MAX_PARAM_LABEL),
                step_index: Some(op.index),
                payload: BTreeMap::from([
                    ("key".to_owned(), key.clone()),
                    ("value".to_owned(), text),
                ]),
            }
        })
        .collect()
}

fn step_node(op: &RawOperation) -> Node {
    let mut payload = BTreeMap::from([("op".to_owned(), op.op_id.clone())]);
    if let Some(d) = &op.description {
        payload.insert("description".to_owned(), d.clone());
    }
    Node {
        kind: NodeKind::Step,
        id: step_id(op.index),
        label: op.short_name().to_owned(),
        step_index: Some(op.index),
        payload,
    }
}

fn table_node(i: usize, schema: &SchemaState) -> Node {
    Node {
        kind: NodeKind::DataTable,
        id: format!("table_{i}"),
        label: format!("table_{i}"),
        step_index: None,
        payload: BTreeMap::from([(
            "columns".to_owned(),
            schema.labels().collect::<Vec<_>>().join(", "),
        )]),
    }
}

/// Table snapshots alternating with steps, in recipe order.
pub fn build_linear(recipe: &Recipe, schemas: &[SchemaState]) -> WorkflowModel {
    assert_eq!(schemas.len(), recipe.len() + 1, "one schema per snapshot");
    let all: Vec<usize> = (0..recipe.len()).collect();
    linear_over(model_name(recipe), recipe, schemas, &all)
}

fn linear_over(
    name: String,
    recipe: &Recipe,
    schemas: &[SchemaState],
    steps: &[usize],
) -> WorkflowModel {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let start = steps.first().copied().unwrap_or(0);
    nodes.push(table_node(0, &schemas[start]));
    for (k, &i) in steps.iter().enumerate() {
        let op = &recipe.operations[i];
        let step = step_node(op);
        for p in param_nodes(op) {
            edges.push(Edge::flow(&p.id, &step.id));
            nodes.push(p);
        }
        edges.push(Edge::flow(format!("table_{k}"), &step.id));
        edges.push(Edge::flow(&step.id, format!("table_{}", k + 1)));
        nodes.push(step);
        nodes.push(table_node(k + 1, &schemas[i + 1]));
    }
    let components = if steps.is_empty() {
        Vec::new()
    } else {
        vec![steps.iter().map(|&i| step_id(i)).collect()]
    };
    WorkflowModel {
        name,
        kind: ModelKind::Linear,
        nodes,
        edges,
        components,
    }
}

/// Column-granularity model: each step reads the current versions of its
/// input columns and produces fresh versions of its outputs.
pub fn build_parallel(
    recipe: &Recipe,
    effects: &[ColumnEffect],
    schemas: &[SchemaState],
) -> WorkflowModel {
    let deps = dependency_edges(recipe, effects);
    let units: Vec<Vec<usize>> = (0..recipe.len()).map(|i| vec![i]).collect();
    column_model(ModelKind::Parallel, recipe, effects, schemas, &deps, &units)
}

/// Parallel model with runs of at least `threshold` same-operation steps
/// on the same columns folded into summary nodes.
pub fn build_collapsed(
    recipe: &Recipe,
    effects: &[ColumnEffect],
    schemas: &[SchemaState],
    threshold: usize,
) -> Result<(WorkflowModel, Vec<DetailModel>), GraphError> {
    if threshold < 2 {
        return Err(GraphError::InvalidThreshold(threshold));
    }
    let deps = dependency_edges(recipe, effects);
    let runs = find_runs(recipe, effects, &deps, threshold);
    let mut in_run = vec![false; recipe.len()];
    for run in &runs {
        for &i in run {
            in_run[i] = true;
        }
    }
    let mut units: Vec<Vec<usize>> = runs.clone();
    units.extend((0..recipe.len()).filter(|&i| !in_run[i]).map(|i| vec![i]));
    let model = column_model(
        ModelKind::Collapsed,
        recipe,
        effects,
        schemas,
        &deps,
        &units,
    );
    let details = runs
        .iter()
        .map(|run| {
            let parent = summary_id(run);
            DetailModel {
                inner: linear_over(format!("{}_{parent}", model.name), recipe, schemas, run),
                parent_summary_id: parent,
            }
        })
        .collect();
    Ok((model, details))
}

fn summary_id(run: &[usize]) -> String {
    format!("summary_{}", step_id(run[0]))
}

/// Maximal runs of steps with the same operation id and output columns,
/// such that no other step inside a run's span interferes with any member.
fn find_runs(
    recipe: &Recipe,
    effects: &[ColumnEffect],
    deps: &BTreeSet<(usize, usize)>,
    threshold: usize,
) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(&str, BTreeSet<ColumnId>), Vec<usize>> = BTreeMap::new();
    for (i, e) in effects.iter().enumerate() {
        let outputs = e.outputs();
        if e.table_scoped || outputs.is_empty() {
            continue;
        }
        groups
            .entry((recipe.operations[i].op_id.as_str(), outputs))
            .or_default()
            .push(i);
    }
    let interferes = |a: usize, b: usize| deps.contains(&(a.min(b), a.max(b)));
    let can_extend = |run: &[usize], next: usize| {
        (run[0] + 1..next)
            .filter(|x| !run.contains(x))
            .all(|x| run.iter().chain([&next]).all(|&m| !interferes(x, m)))
    };

    let mut runs = Vec::new();
    for seq in groups.values() {
        let mut run = vec![seq[0]];
        for &s in &seq[1..] {
            if can_extend(&run, s) {
                run.push(s);
            } else {
                if run.len() >= threshold {
                    runs.push(std::mem::take(&mut run));
                }
                run = vec![s];
            }
        }
        if run.len() >= threshold {
            runs.push(run);
        }
    }
    runs.sort();
    runs
}

fn aggregate<'a>(effects: impl Iterator<Item = &'a ColumnEffect>) -> ColumnEffect {
    let mut agg = ColumnEffect::default();
    for e in effects {
        agg.reads.extend(e.reads.iter().copied());
        agg.writes.extend(e.writes.iter().copied());
        agg.creates.extend(e.creates.iter().cloned());
        agg.deletes.extend(e.deletes.iter().copied());
        agg.table_scoped |= e.table_scoped;
        agg.fallback |= e.fallback;
    }
    agg
}

fn by_position(ids: impl IntoIterator<Item = ColumnId>, schema: &SchemaState) -> Vec<ColumnId> {
    let mut v: Vec<ColumnId> = ids.into_iter().collect();
    v.sort_by_key(|id| (schema.position(*id).unwrap_or(usize::MAX), *id));
    v
}

fn column_model(
    kind: ModelKind,
    recipe: &Recipe,
    effects: &[ColumnEffect],
    schemas: &[SchemaState],
    deps: &BTreeSet<(usize, usize)>,
    units: &[Vec<usize>],
) -> WorkflowModel {
    assert_eq!(schemas.len(), recipe.len() + 1, "one schema per snapshot");
    assert_eq!(effects.len(), recipe.len(), "one effect per step");

    // Emitting units by their last member is a topological order.
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by_key(|&u| *units[u].last().expect("non-empty unit"));
    let mut unit_pos = vec![0usize; recipe.len()];
    for (pos, &u) in order.iter().enumerate() {
        for &i in &units[u] {
            unit_pos[i] = pos;
        }
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut current: BTreeMap<ColumnId, String> = BTreeMap::new();
    let mut versions: BTreeMap<ColumnId, u32> = BTreeMap::new();
    let mut unit_ids: Vec<String> = Vec::with_capacity(order.len());

    for &u in &order {
        let members = &units[u];
        let (first, last) = (members[0], *members.last().unwrap());
        let agg = aggregate(members.iter().map(|&i| &effects[i]));
        let created: BTreeSet<ColumnId> = agg.created_ids().collect();
        let before = &schemas[first];
        let after = &schemas[last + 1];

        let mut inputs = Vec::new();
        for id in by_position(agg.reads.difference(&created).copied(), before) {
            let node_id = current.entry(id).or_insert_with(|| {
                let nid = format!("{id}_v0");
                versions.insert(id, 0);
                nodes.push(column_node(&nid, id, 0, before.label_of(id).unwrap_or("?")));
                nid
            });
            inputs.push(node_id.clone());
        }

        let outputs: Vec<ColumnId> = by_position(
            agg.writes
                .iter()
                .copied()
                .chain(created.iter().copied())
                .filter(|id| !agg.deletes.contains(id)),
            after,
        );

        let node = if let [single] = members.as_slice() {
            let op = &recipe.operations[*single];
            let mut step = step_node(op);
            if !agg.table_scoped {
                if agg.creates.len() >= 2 && inputs.len() == 1 {
                    step.payload.insert("role".to_owned(), "split".to_owned());
                } else if inputs.len() >= 2 && outputs.len() == 1 {
                    step.payload.insert("role".to_owned(), "merge".to_owned());
                }
            }
            for p in param_nodes(op) {
                edges.push(Edge::flow(&p.id, &step.id));
                nodes.push(p);
            }
            step
        } else {
            let op_id = &recipe.operations[first].op_id;
            Node {
                kind: NodeKind::Summary,
                id: summary_id(members),
                label: format!("{op_id} × {}", members.len()),
                step_index: Some(first),
                payload: BTreeMap::from([
                    ("op".to_owned(), op_id.clone()),
                    ("count".to_owned(), members.len().to_string()),
                    (
                        "members".to_owned(),
                        members
                            .iter()
                            .map(|&i| step_id(i))
                            .collect::<Vec<_>>()
                            .join(" "),
                    ),
                ]),
            }
        };
        for input in &inputs {
            edges.push(Edge::flow(input, &node.id));
        }
        let node_id = node.id.clone();
        nodes.push(node);

        for id in outputs {
            let v = versions.entry(id).and_modify(|v| *v += 1).or_insert(0);
            let nid = format!("{id}_v{v}");
            nodes.push(column_node(&nid, id, *v, after.label_of(id).unwrap_or("?")));
            edges.push(Edge::flow(&node_id, &nid));
            current.insert(id, nid);
        }
        for id in &agg.deletes {
            current.remove(id);
        }
        unit_ids.push(node_id);
    }

    let unit_deps: BTreeSet<(usize, usize)> = deps
        .iter()
        .map(|&(i, j)| (unit_pos[i], unit_pos[j]))
        .filter(|(a, b)| a != b)
        .collect();
    let reduced = transitive_reduction(order.len(), unit_deps.iter().copied());
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &edges {
        succ.entry(e.from.as_str()).or_default().push(e.to.as_str());
    }
    let mut order_edges = Vec::new();
    for (a, b) in reduced {
        if !reachable(&succ, &unit_ids[a], &unit_ids[b]) {
            order_edges.push(Edge {
                from: unit_ids[a].clone(),
                to: unit_ids[b].clone(),
                label: None,
                kind: EdgeKind::Order,
            });
        }
    }
    edges.extend(order_edges);

    let components = components(order.len(), unit_deps)
        .into_iter()
        .map(|g| g.into_iter().map(|p| unit_ids[p].clone()).collect())
        .collect();

    WorkflowModel {
        name: model_name(recipe),
        kind,
        nodes,
        edges,
        components,
    }
}

fn column_node(id: &str, column: ColumnId, version: u32, label: &str) -> Node {
    Node {
        kind: NodeKind::DataColumn,
        id: id.to_owned(),
        label: label.to_owned(),
        step_index: None,
        payload: BTreeMap::from([
            ("column".to_owned(), column.to_string()),
            ("version".to_owned(), version.to_string()),
        ]),
    }
}

fn reachable(succ: &HashMap<&str, Vec<&str>>, from: &str, to: &str) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            return true;
        }
        for &w in succ.get(v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}
