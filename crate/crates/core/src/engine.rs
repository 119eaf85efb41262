//! Reference interpreter for a subset of operations.
//!
//! Runs a recipe over a small in-memory table so that reordered executions
//! can be compared with the recorded order. Cells are untyped strings and the
//! empty string counts as blank.
//!
//! Supported: `text-transform`, `mass-edit`, `column-rename`,
//! `column-removal`, `column-split` (plain separator), `column-addition`,
//! `column-move`, `fill-down`, `blank-down`, all without facets.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use serde_json::Value;
use thiserror::Error;

use crate::effects::catalog::{self, OpKind};
use crate::effects::{
    apply_effect, effect_of, trace, ColumnEffect, ColumnId, EffectError, EffectOptions, SchemaState,
};
use crate::graph::dependency_edges;
use crate::grel::{parse_expression, Expr};
use crate::recipe::{RawOperation, Recipe};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub schema: SchemaState,
    /// Each row is aligned to the schema order.
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("step {step}: {op} is not supported by the interpreter ({reason})")]
    UnsupportedOp {
        step: usize,
        op: String,
        reason: &'static str,
    },
    #[error("step {step}: expression {expression:?} is outside the supported subset")]
    ExpressionError { step: usize, expression: String },
    #[error(transparent)]
    Effect(#[from] EffectError),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv: {0}")]
    Csv(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnsupportedOp { .. } => "unsupported-op",
            EngineError::ExpressionError { .. } => "expression-error",
            EngineError::Effect(e) => e.code(),
            EngineError::InvalidOrder(_) => "invalid-order",
            EngineError::RaggedRow { .. } => "ragged-row",
            EngineError::Csv(_) => "csv",
        }
    }
}

impl Table {
    pub fn new(schema: SchemaState, rows: Vec<Vec<String>>) -> Result<Self, EngineError> {
        for (row, cells) in rows.iter().enumerate() {
            if cells.len() != schema.len() {
                return Err(EngineError::RaggedRow {
                    row,
                    expected: schema.len(),
                    found: cells.len(),
                });
            }
        }
        Ok(Table { schema, rows })
    }

    /// Reads a CSV document whose header row holds the column labels.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, EngineError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| EngineError::Csv(e.to_string()))?
            .clone();
        let schema = SchemaState::from_labels(header.iter())?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EngineError::Csv(e.to_string()))?;
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        Table::new(schema, rows)
    }

    /// Columns and cells reordered by column id.
    pub fn sorted_by_id(&self) -> Table {
        let sorted = self.schema.sorted_by_id();
        let perm: Vec<usize> = sorted
            .iter()
            .map(|(id, _)| self.schema.position(*id).expect("live column"))
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| perm.iter().map(|&p| r[p].clone()).collect())
            .collect();
        Table {
            schema: schema_with_ids(&sorted),
            rows,
        }
    }
}

/// Schema holding exactly `cols`, in order, with their ids.
fn schema_with_ids(cols: &[(ColumnId, String)]) -> SchemaState {
    let mut s = SchemaState::default();
    for (id, label) in cols {
        let effect = ColumnEffect {
            creates: vec![(*id, label.clone())],
            ..Default::default()
        };
        s = apply_effect(&s, &effect).expect("unique labels and ids");
    }
    s
}

/// Column-major working copy of a table.
struct Working {
    schema: SchemaState,
    cols: HashMap<ColumnId, Vec<String>>,
    nrows: usize,
}

impl Working {
    fn from_table(t: &Table) -> Self {
        let mut cols = HashMap::new();
        for (pos, (id, _)) in t.schema.columns().iter().enumerate() {
            cols.insert(*id, t.rows.iter().map(|r| r[pos].clone()).collect());
        }
        Working {
            schema: t.schema.clone(),
            cols,
            nrows: t.rows.len(),
        }
    }

    fn into_table(self) -> Table {
        let rows = (0..self.nrows)
            .map(|r| {
                self.schema
                    .columns()
                    .iter()
                    .map(|(id, _)| self.cols[id][r].clone())
                    .collect()
            })
            .collect();
        Table {
            schema: self.schema,
            rows,
        }
    }

    fn column_of(&self, op: &RawOperation, key: &'static str) -> Result<ColumnId, EngineError> {
        let label = op.str_param(key).ok_or_else(|| EffectError::MissingParam {
            step: op.index,
            op: op.op_id.clone(),
            key,
        })?;
        self.schema.id_of(label).ok_or_else(|| {
            EngineError::Effect(EffectError::UnresolvedColumn {
                step: op.index,
                label: label.to_owned(),
            })
        })
    }

    fn eval(&self, expr: &Expr, own: Option<ColumnId>, row: usize) -> Option<String> {
        let value = own.map_or("", |id| self.cols[&id][row].as_str());
        let lookup = |label: &str| {
            self.schema
                .id_of(label)
                .map(|id| self.cols[&id][row].as_str())
        };
        expr.eval(value, &lookup).ok().map(|v| v.to_string())
    }
}

#[derive(Clone, Copy)]
enum OnError {
    KeepOriginal,
    SetToBlank,
    StoreError,
}

fn on_error(op: &RawOperation) -> OnError {
    match op.str_param("onError") {
        Some("set-to-blank") => OnError::SetToBlank,
        Some("store-error") => OnError::StoreError,
        _ => OnError::KeepOriginal,
    }
}

fn resolve_error(mode: OnError, original: &str) -> String {
    match mode {
        OnError::KeepOriginal => original.to_owned(),
        OnError::SetToBlank => String::new(),
        OnError::StoreError => "#ERROR".to_owned(),
    }
}

fn unsupported(op: &RawOperation, reason: &'static str) -> EngineError {
    EngineError::UnsupportedOp {
        step: op.index,
        op: op.op_id.clone(),
        reason,
    }
}

fn expression(op: &RawOperation, default: Option<&str>) -> Result<Expr, EngineError> {
    let src = op
        .str_param("expression")
        .or(default)
        .ok_or_else(|| EffectError::MissingParam {
            step: op.index,
            op: op.op_id.clone(),
            key: "expression",
        })?;
    parse_expression(src).map_err(|_| EngineError::ExpressionError {
        step: op.index,
        expression: src.to_owned(),
    })
}

fn check_engine_config(op: &RawOperation) -> Result<(), EngineError> {
    let Some(cfg) = op.params.get("engineConfig") else {
        return Ok(());
    };
    if cfg.get("mode").and_then(Value::as_str) == Some("record-based") {
        return Err(unsupported(op, "records mode"));
    }
    if cfg
        .get("facets")
        .and_then(Value::as_array)
        .is_some_and(|f| !f.is_empty())
    {
        return Err(unsupported(op, "facets"));
    }
    Ok(())
}

/// Runs one step: values first, then the schema change.
fn step(
    w: &mut Working,
    op: &RawOperation,
    opts: &EffectOptions,
    created_ids: Option<&ColumnEffect>,
) -> Result<(), EngineError> {
    let kind = catalog::lookup(&op.op_id)
        .map(|e| e.kind)
        .ok_or_else(|| unsupported(op, "unknown operation"))?;
    check_engine_config(op)?;
    let mut effect = effect_of(op, &w.schema, opts)?;
    if let Some(linear) = created_ids {
        if !effect.adopt_created_ids(linear) {
            return Err(EngineError::InvalidOrder(format!(
                "step {} creates a different number of columns than in recipe order",
                op.index
            )));
        }
    }

    match kind {
        OpKind::TextTransform => {
            let col = w.column_of(op, "columnName")?;
            let expr = expression(op, None)?;
            let mode = on_error(op);
            let repeat = op.bool_param("repeat").unwrap_or(false);
            let limit = if repeat {
                op.params
                    .get("repeatCount")
                    .and_then(Value::as_u64)
                    .unwrap_or(10)
                    .max(1)
            } else {
                1
            };
            for r in 0..w.nrows {
                for _ in 0..limit {
                    let original = w.cols[&col][r].clone();
                    let new = w
                        .eval(&expr, Some(col), r)
                        .unwrap_or_else(|| resolve_error(mode, &original));
                    let changed = new != original;
                    w.cols.get_mut(&col).unwrap()[r] = new;
                    if !changed {
                        break;
                    }
                }
            }
        }
        OpKind::MassEdit => {
            let col = w.column_of(op, "columnName")?;
            let expr = expression(op, Some("value"))?;
            let edits = parse_edits(op)?;
            for r in 0..w.nrows {
                let Some(key) = w.eval(&expr, Some(col), r) else {
                    continue;
                };
                let hit = edits
                    .iter()
                    .find(|e| e.from.contains(&key) || (e.from_blank && key.is_empty()));
                if let Some(edit) = hit {
                    w.cols.get_mut(&col).unwrap()[r] = edit.to.clone();
                }
            }
        }
        OpKind::ColumnSplit => {
            let col = w.column_of(op, "columnName")?;
            match op.str_param("mode") {
                None | Some("separator") => {}
                Some(_) => return Err(unsupported(op, "only separator splits")),
            }
            if op.bool_param("regex").unwrap_or(false) {
                return Err(unsupported(op, "regex separators"));
            }
            let sep = op
                .str_param("separator")
                .filter(|s| !s.is_empty())
                .ok_or_else(|| unsupported(op, "missing separator"))?;
            let k = effect.creates.len();
            let mut parts: Vec<Vec<String>> = vec![Vec::with_capacity(w.nrows); k];
            for cell in &w.cols[&col] {
                let mut pieces = cell.split(sep);
                for part in parts.iter_mut() {
                    part.push(pieces.next().unwrap_or("").to_owned());
                }
            }
            for ((id, _), cells) in effect.creates.iter().zip(parts) {
                w.cols.insert(*id, cells);
            }
        }
        OpKind::ColumnAddition => {
            let base = w.column_of(op, "baseColumnName")?;
            let expr = expression(op, None)?;
            let mode = on_error(op);
            let cells = (0..w.nrows)
                .map(|r| {
                    w.eval(&expr, Some(base), r)
                        .unwrap_or_else(|| resolve_error(mode, ""))
                })
                .collect();
            let (id, _) = effect.creates[0];
            w.cols.insert(id, cells);
        }
        OpKind::FillDown => {
            let col = w.column_of(op, "columnName")?;
            let cells = w.cols.get_mut(&col).unwrap();
            let mut last: Option<String> = None;
            for cell in cells.iter_mut() {
                if cell.is_empty() {
                    if let Some(prev) = &last {
                        cell.clone_from(prev);
                    }
                } else {
                    last = Some(cell.clone());
                }
            }
        }
        OpKind::BlankDown => {
            let col = w.column_of(op, "columnName")?;
            let cells = w.cols.get_mut(&col).unwrap();
            let mut last: Option<String> = None;
            for cell in cells.iter_mut() {
                let original = cell.clone();
                if !original.is_empty() && last.as_deref() == Some(original.as_str()) {
                    cell.clear();
                }
                last = Some(original);
            }
        }
        OpKind::ColumnRename | OpKind::ColumnMove | OpKind::ColumnRemoval => {}
        OpKind::TableScoped => return Err(unsupported(op, "row-level operation")),
    }

    let next = apply_effect(&w.schema, &effect).map_err(|e| match e {
        EffectError::LabelCollision { label, .. } => EffectError::LabelCollision {
            step: Some(op.index),
            label,
        },
        other => other,
    })?;
    for id in &effect.deletes {
        w.cols.remove(id);
    }
    w.schema = next;
    Ok(())
}

struct Edit {
    from: BTreeSet<String>,
    from_blank: bool,
    to: String,
}

fn parse_edits(op: &RawOperation) -> Result<Vec<Edit>, EngineError> {
    let Some(list) = op.params.get("edits").and_then(Value::as_array) else {
        return Ok(Vec::new());
    };
    list.iter()
        .map(|e| {
            let to = e
                .get("to")
                .and_then(Value::as_str)
                .ok_or_else(|| unsupported(op, "edit without a string \"to\""))?;
            let from = e
                .get("from")
                .and_then(Value::as_array)
                .map(|xs| {
                    xs.iter()
                        .filter_map(Value::as_str)
                        .map(str::to_owned)
                        .collect()
                })
                .unwrap_or_default();
            Ok(Edit {
                from,
                from_blank: e.get("fromBlank").and_then(Value::as_bool).unwrap_or(false),
                to: to.to_owned(),
            })
        })
        .collect()
}

/// Runs the recipe in recorded order.
pub fn execute(recipe: &Recipe, input: &Table, opts: &EffectOptions) -> Result<Table, EngineError> {
    let mut w = Working::from_table(input);
    for op in &recipe.operations {
        step(&mut w, op, opts, None)?;
    }
    Ok(w.into_table())
}

/// Runs the steps in `order`, which must respect every dependency of the
/// recipe. Created columns keep the ids they get in recorded order, so the
/// result can be compared with [`execute`] after sorting by id.
pub fn execute_order(
    recipe: &Recipe,
    order: &[usize],
    input: &Table,
    opts: &EffectOptions,
) -> Result<Table, EngineError> {
    let n = recipe.len();
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in order.iter().enumerate() {
        if i >= n || pos[i] != usize::MAX {
            return Err(EngineError::InvalidOrder(format!(
                "{order:?} is not a permutation of 0..{n}"
            )));
        }
        pos[i] = p;
    }
    if order.len() != n {
        return Err(EngineError::InvalidOrder(format!(
            "{order:?} is not a permutation of 0..{n}"
        )));
    }
    let linear = trace(recipe, &input.schema, opts)?;
    for (i, j) in dependency_edges(recipe, &linear.effects) {
        if pos[i] > pos[j] {
            return Err(EngineError::InvalidOrder(format!(
                "step {j} must run after step {i}"
            )));
        }
    }
    let mut w = Working::from_table(input);
    for &i in order {
        step(
            &mut w,
            &recipe.operations[i],
            opts,
            Some(&linear.effects[i]),
        )?;
    }
    Ok(w.into_table())
}
