//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use recipeflow::effects::{apply_effect, effect_of, EffectOptions, SchemaState};
use recipeflow::engine::Table;
use recipeflow::graph::WorkflowModel;
use recipeflow::recipe::{parse_recipe, Recipe};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_recipe(name: &str) -> Recipe {
    parse_recipe(&fixture(name), Some(name)).unwrap()
}

// ---------------------------------------------------------------------------
// Random recipes

const LABELS: [&str; 9] = ["a", "b", "c", "d", "e", "f", "x", "y", "z"];
const MAX_COLUMNS: usize = 10;

pub struct Generated {
    pub recipe: Recipe,
    pub initial: SchemaState,
}

fn engine_config(rng: &mut StdRng) -> Option<Value> {
    rng.gen_bool(0.7)
        .then(|| json!({"facets": [], "mode": "row-based"}))
}

fn pick<'a>(rng: &mut StdRng, xs: &'a [String]) -> &'a str {
    xs.choose(rng).expect("non-empty")
}

fn cell_ref(label: &str) -> String {
    format!("cells[{}].value", serde_json::to_string(label).unwrap())
}

fn candidate(rng: &mut StdRng, live: &[String]) -> Value {
    let col = pick(rng, live).to_owned();
    let other = pick(rng, live).to_owned();
    let on_error = *["keep-original", "set-to-blank", "store-error"]
        .choose(rng)
        .unwrap();
    let mut op = match rng.gen_range(0..10) {
        0 | 1 => {
            let expression = match rng.gen_range(0..8) {
                0 => "value.toLowercase()".to_owned(),
                1 => "value.toUppercase()".to_owned(),
                2 => "grel:value.trim()".to_owned(),
                3 => "value.toNumber()".to_owned(),
                4 => "toString(trim(value))".to_owned(),
                5 => format!("value + {}", cell_ref(&other)),
                6 => format!("{}.trim() + \"-\" + value", cell_ref(&other)),
                _ => "value".to_owned(),
            };
            json!({"op": "core/text-transform", "columnName": col, "expression": expression,
                   "onError": on_error, "repeat": rng.gen_bool(0.2), "repeatCount": 3})
        }
        2 => {
            let from = *["a", "B", "a-b", "12", " c "].choose(rng).unwrap();
            let to = *["A", "b", "", "z-z"].choose(rng).unwrap();
            let expression = if rng.gen_bool(0.5) {
                "value"
            } else {
                "value.toLowercase()"
            };
            json!({"op": "core/mass-edit", "columnName": col, "expression": expression,
                   "edits": [{"from": [from], "fromBlank": false, "fromError": false, "to": to},
                             {"from": [], "fromBlank": rng.gen_bool(0.5), "fromError": false, "to": "?"}]})
        }
        3 => {
            let to = *LABELS.choose(rng).unwrap();
            json!({"op": "core/column-rename", "oldColumnName": col, "newColumnName": to})
        }
        4 => json!({"op": "core/column-removal", "columnName": col}),
        5 => {
            let max = *[0, 2, 3].choose(rng).unwrap();
            json!({"op": "core/column-split", "columnName": col, "mode": "separator",
                   "separator": "-", "regex": false, "maxColumns": max, "guessCellType": false,
                   "removeOriginalColumn": rng.gen_bool(0.5)})
        }
        6 => {
            let to = *LABELS.choose(rng).unwrap();
            let expression = if rng.gen_bool(0.5) {
                format!("value + \"/\" + {}", cell_ref(&other))
            } else {
                "value.toUppercase()".to_owned()
            };
            json!({"op": "core/column-addition", "baseColumnName": col, "newColumnName": to,
                   "expression": expression, "onError": on_error})
        }
        7 => json!({"op": "core/column-move", "columnName": col,
                     "index": rng.gen_range(0..live.len())}),
        8 => json!({"op": "core/fill-down", "columnName": col}),
        _ => json!({"op": "core/blank-down", "columnName": col}),
    };
    if let Some(cfg) = engine_config(rng) {
        op["engineConfig"] = cfg;
    }
    op
}

/// Generates a recipe of `5..=15` supported operations over `3..=6`
/// starting columns. Every candidate is checked against the running schema,
/// so the recipe always traces cleanly. Labels are drawn from a small pool to
/// make reuse after renames and removals common.
pub fn random_recipe(rng: &mut StdRng) -> Generated {
    let width = rng.gen_range(3..=6);
    let initial = SchemaState::from_labels(LABELS[..width].iter().copied()).unwrap();
    let target = rng.gen_range(5..=15);
    let opts = EffectOptions::default();
    let mut schema = initial.clone();
    let mut ops = Vec::new();
    while ops.len() < target {
        let live: Vec<String> = schema.labels().map(str::to_owned).collect();
        let op = candidate(rng, &live);
        let parsed = parse_recipe(&Value::Array(vec![op.clone()]).to_string(), None).unwrap();
        let Ok(effect) = effect_of(&parsed.operations[0], &schema, &opts) else {
            continue;
        };
        let Ok(next) = apply_effect(&schema, &effect) else {
            continue;
        };
        if next.is_empty() || next.len() > MAX_COLUMNS {
            continue;
        }
        schema = next;
        ops.push(op);
    }
    let recipe = parse_recipe(&Value::Array(ops).to_string(), Some("random.json")).unwrap();
    Generated { recipe, initial }
}

/// Inserts one operation the catalog does not know at a random position.
pub fn with_unknown_op(rng: &mut StdRng, recipe: &Recipe) -> Recipe {
    let mut ops: Vec<Value> = recipe.operations.iter().map(|o| o.to_json()).collect();
    let at = rng.gen_range(0..=ops.len());
    ops.insert(
        at,
        json!({"op": "ext/custom-cleanup", "columnName": "a", "strength": 3}),
    );
    parse_recipe(&Value::Array(ops).to_string(), Some("random.json")).unwrap()
}

const CELLS: [&str; 13] = [
    "", "", "a", "B", " c ", "a-b", "x-y-z", "12", " 7 ", "3.50", "A-B-C", "-", "b",
];

pub fn random_table(rng: &mut StdRng, schema: &SchemaState, rows: usize) -> Table {
    let rows = (0..rows)
        .map(|_| {
            (0..schema.len())
                .map(|_| (*CELLS.choose(rng).unwrap()).to_owned())
                .collect()
        })
        .collect();
    Table::new(schema.clone(), rows).unwrap()
}

/// Uniformly picks among the ready nodes at every step.
pub fn random_topological_order(
    rng: &mut StdRng,
    n: usize,
    edges: &[(usize, usize)],
) -> Vec<usize> {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in edges {
        indeg[b] += 1;
        succ[a].push(b);
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let v = ready.swap_remove(rng.gen_range(0..ready.len()));
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    assert_eq!(order.len(), n, "cycle in step graph");
    order
}

/// Step-to-step edges of a model as recipe indices.
pub fn step_edges(model: &WorkflowModel) -> Vec<(usize, usize)> {
    let step = |id: &str| {
        model
            .node(id)
            .and_then(|n| n.step_index)
            .expect("step node")
    };
    model
        .process_edges()
        .into_iter()
        .map(|(a, b)| (step(&a), step(&b)))
        .collect()
}

/// Number of distinct topological orders, capped at `cap`.
pub fn count_topological_orders(n: usize, edges: &[(usize, usize)], cap: usize) -> usize {
    fn go(n: usize, pred: &[u64], done: u64, cap: usize) -> usize {
        if done.count_ones() as usize == n {
            return 1;
        }
        let mut total = 0;
        for v in 0..n {
            if done & (1 << v) == 0 && pred[v] & !done == 0 {
                total += go(n, pred, done | (1 << v), cap);
                if total >= cap {
                    return cap;
                }
            }
        }
        total
    }
    assert!(n <= 64);
    let mut pred = vec![0u64; n];
    for &(a, b) in edges {
        pred[b] |= 1 << a;
    }
    go(n, &pred, 0, cap)
}

// ---------------------------------------------------------------------------
// Lineage oracle: fixpoint over the edge list, no adjacency structure.

pub fn ancestors_oracle(model: &WorkflowModel, id: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::from([id.to_owned()]);
    loop {
        let before = set.len();
        for e in &model.edges {
            if set.contains(&e.to) {
                set.insert(e.from.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

pub fn descendants_oracle(model: &WorkflowModel, id: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::from([id.to_owned()]);
    loop {
        let before = set.len();
        for e in &model.edges {
            if set.contains(&e.from) {
                set.insert(e.to.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

// ---------------------------------------------------------------------------
// Expression reference oracle

pub fn regex_references(expr: &str) -> BTreeSet<String> {
    let re = regex::Regex::new(
        r#"cells\["((?:[^"\\]|\\.)*)"\]\.value|cells\.([A-Za-z_][A-Za-z0-9_]*)\.value"#,
    )
    .unwrap();
    re.captures_iter(expr)
        .map(|c| {
            c.get(1)
                .map(|m| m.as_str().replace("\\\"", "\"").replace("\\\\", "\\"))
                .or_else(|| c.get(2).map(|m| m.as_str().to_owned()))
                .unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// DOT grammar checker
//
//   graph     : [strict] (graph | digraph) [ID] '{' stmt_list '}'
//   stmt_list : [stmt [';'] stmt_list]
//   stmt      : ID '=' ID | attr_stmt | edge_stmt | node_stmt | subgraph
//   attr_stmt : (graph | node | edge) attr_list
//   attr_list : '[' [a_list] ']' [attr_list]
//   a_list    : ID '=' ID [(';' | ',')] [a_list]
//   edge_stmt : (node_id | subgraph) edgeRHS [attr_list]
//   edgeRHS   : edgeop (node_id | subgraph) [edgeRHS]
//   node_stmt : node_id [attr_list]
//   node_id   : ID [port]
//   subgraph  : [subgraph [ID]] '{' stmt_list '}'

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Id(String),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && cs.get(i + 1) == Some(&'/') || c == '#' {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && cs.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < cs.len() && !(cs[i] == '*' && cs[i + 1] == '/') {
                i += 1;
            }
            if i + 1 >= cs.len() {
                return Err("unterminated comment".into());
            }
            i += 2;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if cs.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Tok::Id(s));
        } else if c == '-' && matches!(cs.get(i + 1), Some('>') | Some('-')) {
            out.push(Tok::Sym(if cs[i + 1] == '>' { "->" } else { "--" }));
            i += 2;
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '.') {
                i += 1;
            }
            if i == start {
                i += 1;
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
        } else {
            let sym = match c {
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                '=' => "=",
                ';' => ";",
                ',' => ",",
                ':' => ":",
                other => return Err(format!("unexpected character {other:?}")),
            };
            out.push(Tok::Sym(sym));
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct DotGraph {
    pub name: Option<String>,
    pub directed: bool,
    /// Node statements with their attributes.
    pub nodes: Vec<(String, BTreeMap<String, String>)>,
    pub edges: Vec<(String, String, BTreeMap<String, String>)>,
    pub subgraphs: Vec<Option<String>>,
}

impl DotGraph {
    pub fn node_attr(&self, id: &str, key: &str) -> Option<&str> {
        self.nodes
            .iter()
            .find(|(n, _)| n == id)
            .and_then(|(_, a)| a.get(key))
            .map(String::as_str)
    }
}

struct DotParser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

const KEYWORDS: [&str; 6] = ["strict", "graph", "digraph", "node", "edge", "subgraph"];

impl DotParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id(x)) if x.eq_ignore_ascii_case(kw))
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), String> {
        if self.peek_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!(
                "expected {s:?} at token {}, found {:?}",
                self.pos,
                self.peek()
            ))
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => Err(format!(
                "expected ID at token {}, found {other:?}",
                self.pos
            )),
        }
    }

    fn graph(&mut self) -> Result<(), String> {
        if self.peek_kw("strict") {
            self.pos += 1;
        }
        if self.peek_kw("digraph") {
            self.graph.directed = true;
        } else if !self.peek_kw("graph") {
            return Err("expected graph or digraph".into());
        }
        self.pos += 1;
        if !self.peek_sym("{") {
            self.graph.name = Some(self.id()?);
        }
        self.expect_sym("{")?;
        self.stmt_list()?;
        self.expect_sym("}")?;
        if self.pos != self.toks.len() {
            return Err("trailing tokens".into());
        }
        Ok(())
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while !self.peek_sym("}") {
            if self.peek().is_none() {
                return Err("unexpected end of input".into());
            }
            self.stmt()?;
            if self.peek_sym(";") {
                self.pos += 1;
            }
        }
        Ok(())
    }

    fn attr_list(&mut self) -> Result<BTreeMap<String, String>, String> {
        let mut attrs = BTreeMap::new();
        while self.peek_sym("[") {
            self.pos += 1;
            while !self.peek_sym("]") {
                let k = self.id()?;
                self.expect_sym("=")?;
                let v = self.id()?;
                attrs.insert(k, v);
                if self.peek_sym(";") || self.peek_sym(",") {
                    self.pos += 1;
                }
            }
            self.pos += 1;
        }
        Ok(attrs)
    }

    /// Parses a node id or subgraph, returning the node ids it stands for.
    fn operand(&mut self) -> Result<Vec<String>, String> {
        if self.peek_kw("subgraph") || self.peek_sym("{") {
            return self.subgraph();
        }
        if let Some(Tok::Id(s)) = self.peek() {
            if KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k)) {
                return Err(format!("keyword {s:?} used as node id"));
            }
        }
        let id = self.id()?;
        if self.peek_sym(":") {
            self.pos += 1;
            self.id()?;
            if self.peek_sym(":") {
                self.pos += 1;
                self.id()?;
            }
        }
        Ok(vec![id])
    }

    fn subgraph(&mut self) -> Result<Vec<String>, String> {
        let mut name = None;
        if self.peek_kw("subgraph") {
            self.pos += 1;
            if !self.peek_sym("{") {
                name = Some(self.id()?);
            }
        }
        self.graph.subgraphs.push(name);
        let before = self.graph.nodes.len();
        self.expect_sym("{")?;
        self.stmt_list()?;
        self.expect_sym("}")?;
        Ok(self.graph.nodes[before..]
            .iter()
            .map(|(n, _)| n.clone())
            .collect())
    }

    fn stmt(&mut self) -> Result<(), String> {
        if self.peek_kw("graph") || self.peek_kw("node") || self.peek_kw("edge") {
            self.pos += 1;
            if !self.peek_sym("[") {
                return Err("attr_stmt without attr_list".into());
            }
            self.attr_list()?;
            return Ok(());
        }
        if matches!(self.peek(), Some(Tok::Id(_))) && !self.peek_kw("subgraph") {
            if let Some(Tok::Sym("=")) = self.toks.get(self.pos + 1) {
                self.pos += 2;
                self.id()?;
                return Ok(());
            }
        }
        let is_subgraph = self.peek_kw("subgraph") || self.peek_sym("{");
        let mut chain = vec![self.operand()?];
        let op = if self.graph.directed { "->" } else { "--" };
        while self.peek_sym("->") || self.peek_sym("--") {
            if !self.peek_sym(op) {
                return Err(format!(
                    "wrong edge operator for graph kind at token {}",
                    self.pos
                ));
            }
            self.pos += 1;
            chain.push(self.operand()?);
        }
        let attrs = self.attr_list()?;
        if chain.len() == 1 {
            if !is_subgraph {
                self.graph.nodes.push((chain[0][0].clone(), attrs));
            }
        } else {
            for pair in chain.windows(2) {
                for a in &pair[0] {
                    for b in &pair[1] {
                        self.graph.edges.push((a.clone(), b.clone(), attrs.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn parse_dot(src: &str) -> Result<DotGraph, String> {
    let mut p = DotParser {
        toks: lex(src)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    p.graph()?;
    Ok(p.graph)
}

// ---------------------------------------------------------------------------
// YesWorkflow nesting checker

#[derive(Debug, Default, Clone)]
pub struct YwBlock {
    pub name: String,
    pub depth: usize,
    pub ins: Vec<String>,
    pub outs: Vec<String>,
    pub params: Vec<String>,
}

/// Checks balanced `@begin`/`@end` pairs with matching names and that
/// port tags only occur inside a block. Returns blocks in opening order.
pub fn parse_yw(src: &str) -> Result<Vec<YwBlock>, String> {
    let mut blocks: Vec<YwBlock> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| format!("line {}: not a comment", n + 1))?
            .trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let tag = words.next().unwrap();
        let arg = words.next().map(str::to_owned);
        if words.next().is_some() {
            return Err(format!("line {}: trailing words", n + 1));
        }
        let arg = arg.ok_or_else(|| format!("line {}: {tag} without a name", n + 1))?;
        match tag {
            "@begin" => {
                stack.push(blocks.len());
                blocks.push(YwBlock {
                    name: arg,
                    depth: stack.len() - 1,
                    ..Default::default()
                });
            }
            "@end" => {
                let open = stack
                    .pop()
                    .ok_or_else(|| format!("line {}: @end without @begin", n + 1))?;
                if blocks[open].name != arg {
                    return Err(format!(
                        "line {}: @end {arg} closes @begin {}",
                        n + 1,
                        blocks[open].name
                    ));
                }
            }
            "@in" | "@out" | "@param" => {
                let &open = stack
                    .last()
                    .ok_or_else(|| format!("line {}: {tag} outside a block", n + 1))?;
                let b = &mut blocks[open];
                match tag {
                    "@in" => b.ins.push(arg),
                    "@out" => b.outs.push(arg),
                    _ => b.params.push(arg),
                }
            }
            other => return Err(format!("line {}: unknown tag {other}", n + 1)),
        }
    }
    if !stack.is_empty() {
        return Err("unclosed @begin".into());
    }
    Ok(blocks)
}
