//! Workflow graphs built from a traced recipe.
//!
//! Three shapes are produced:
//!
//! * **linear**: table snapshots alternating with steps, in recipe order;
//! * **parallel**: column versions as data, with steps connected only where
//!   their column effects interfere, so independent sub-workflows fall apart
//!   into separate components;
//! * **collapsed**: the parallel model with long runs of near identical steps
//!   folded into summary nodes, each backed by a detail model.

mod build;
pub mod dependency;
mod query;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

pub use build::{build_collapsed, build_linear, build_parallel, DetailModel};
pub use dependency::{commutes, dependency_edges};
pub use query::{downstream_impact, upstream_lineage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Step,
    DataTable,
    DataColumn,
    Param,
    Summary,
}

impl NodeKind {
    pub fn is_data(self) -> bool {
        matches!(self, NodeKind::DataTable | NodeKind::DataColumn)
    }

    /// Steps and summaries.
    pub fn is_process(self) -> bool {
        matches!(self, NodeKind::Step | NodeKind::Summary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub id: String,
    pub label: String,
    pub step_index: Option<usize>,
    pub payload: BTreeMap<String, String>,
}

impl Node {
    pub fn payload(&self, key: &str) -> Option<&str> {
        self.payload.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Data or parameter flowing into or out of a step.
    Flow,
    /// Ordering constraint between two steps that no data path already implies.
    Order,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: Option<String>,
    pub kind: EdgeKind,
}

impl Edge {
    fn flow(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            label: None,
            kind: EdgeKind::Flow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Parallel,
    Collapsed,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Parallel => "parallel",
            ModelKind::Collapsed => "collapsed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowModel {
    pub name: String,
    pub kind: ModelKind,
    /// In ascending step / version order.
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Independent groups of step and summary node ids.
    pub components: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no node with id {0:?}")]
    UnknownNode(String),
    #[error("collapse threshold must be at least 2, got {0}")]
    InvalidThreshold(usize),
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::UnknownNode(_) => "unknown-node",
            GraphError::InvalidThreshold(_) => "invalid-threshold",
        }
    }
}

impl WorkflowModel {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node position by id.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes_of(kind).count()
    }

    /// Direct step-to-step dependencies, transitively reduced: derived from
    /// data passing through exactly one data node plus explicit order edges.
    pub fn process_edges(&self) -> Vec<(String, String)> {
        let idx = self.index();
        let mut producer: HashMap<&str, &str> = HashMap::new();
        for e in &self.edges {
            if e.kind == EdgeKind::Flow
                && self.nodes[idx[e.from.as_str()]].kind.is_process()
                && self.nodes[idx[e.to.as_str()]].kind.is_data()
            {
                producer.insert(e.to.as_str(), e.from.as_str());
            }
        }
        let procs: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind.is_process())
            .collect();
        let pos: HashMap<usize, usize> = procs.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut pairs = Vec::new();
        for e in &self.edges {
            let (from, to) = (idx[e.from.as_str()], idx[e.to.as_str()]);
            match e.kind {
                EdgeKind::Order => pairs.push((pos[&from], pos[&to])),
                EdgeKind::Flow if self.nodes[to].kind.is_process() => {
                    if let Some(p) = producer.get(e.from.as_str()) {
                        pairs.push((pos[&idx[p]], pos[&to]));
                    }
                }
                EdgeKind::Flow => {}
            }
        }
        let reduced = dependency::transitive_reduction(procs.len(), pairs);
        reduced
            .into_iter()
            .map(|(a, b)| {
                (
                    self.nodes[procs[a]].id.clone(),
                    self.nodes[procs[b]].id.clone(),
                )
            })
            .collect()
    }

    /// Topological order of node indices, or `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let idx = self.index();
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            let (a, b) = (*idx.get(e.from.as_str())?, *idx.get(e.to.as_str())?);
            succ[a].push(b);
            indeg[b] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_dag(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Structural problems: duplicate ids, dangling edges, cycles.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let idx = self.index();
        if idx.len() != self.nodes.len() {
            problems.push("duplicate node ids".to_owned());
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !idx.contains_key(end.as_str()) {
                    problems.push(format!("edge endpoint {end:?} does not exist"));
                }
            }
        }
        if problems.is_empty() && !self.is_dag() {
            problems.push("graph has a cycle".to_owned());
        }
        problems
    }
}
