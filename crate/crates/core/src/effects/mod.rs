//! Column effects of operations and schema simulation.
//!
//! Columns are tracked by a [`ColumnId`] that is assigned when the column
//! first appears and survives renames. Every operation is summarized by a
//! [`ColumnEffect`] computed against the schema it runs on; applying the
//! effect yields the next schema.

pub mod catalog;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::Value;
use thiserror::Error;

use crate::grel::analyze_expression;
use crate::recipe::{Diagnostic, RawOperation, Recipe};
use catalog::OpKind;

/// Part count used for splits whose arity cannot be read from the recipe.
pub const DEFAULT_SPLIT_ARITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnId(pub u32);

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Ordered live columns of one table snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SchemaState {
    columns: Vec<(ColumnId, String)>,
    next_id: u32,
}

impl SchemaState {
    /// Assigns ids `0..n` in the given order.
    pub fn from_labels<I, S>(labels: I) -> Result<Self, EffectError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut columns: Vec<(ColumnId, String)> = Vec::new();
        for (i, label) in labels.into_iter().enumerate() {
            let label = label.into();
            if columns.iter().any(|(_, l)| *l == label) {
                return Err(EffectError::LabelCollision { step: None, label });
            }
            columns.push((ColumnId(i as u32), label));
        }
        let next_id = columns.len() as u32;
        Ok(SchemaState { columns, next_id })
    }

    pub fn columns(&self) -> &[(ColumnId, String)] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn id_of(&self, label: &str) -> Option<ColumnId> {
        self.columns
            .iter()
            .find(|(_, l)| l == label)
            .map(|(id, _)| *id)
    }

    pub fn label_of(&self, id: ColumnId) -> Option<&str> {
        self.columns
            .iter()
            .find(|(c, _)| *c == id)
            .map(|(_, l)| l.as_str())
    }

    pub fn position(&self, id: ColumnId) -> Option<usize> {
        self.columns.iter().position(|(c, _)| *c == id)
    }

    pub fn ids(&self) -> BTreeSet<ColumnId> {
        self.columns.iter().map(|(id, _)| *id).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(_, l)| l.as_str())
    }

    /// Columns sorted by id, the order used to compare reordered executions.
    pub fn sorted_by_id(&self) -> Vec<(ColumnId, String)> {
        let mut cols = self.columns.clone();
        cols.sort_by_key(|(id, _)| *id);
        cols
    }

    fn fresh_id(&mut self) -> ColumnId {
        let id = ColumnId(self.next_id);
        self.next_id += 1;
        id
    }
}

/// What one operation does to the columns of the table it runs on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnEffect {
    pub reads: BTreeSet<ColumnId>,
    pub writes: BTreeSet<ColumnId>,
    pub creates: Vec<(ColumnId, String)>,
    pub deletes: BTreeSet<ColumnId>,
    pub renames: BTreeMap<ColumnId, String>,
    pub table_scoped: bool,
    /// Produced by the unknown-operation fallback.
    pub fallback: bool,
    /// New columns go immediately right of this column (or into its slot
    /// when it is deleted by the same effect). `None` appends.
    pub anchor: Option<ColumnId>,
    /// Column moved to an absolute position.
    pub moved_to: Option<(ColumnId, usize)>,
    /// Labels the operation looks up by name.
    pub resolves: BTreeSet<String>,
    /// Labels the operation binds or releases (creates, renames, deletes).
    pub relabels: BTreeSet<String>,
}

impl ColumnEffect {
    pub fn created_ids(&self) -> impl Iterator<Item = ColumnId> + '_ {
        self.creates.iter().map(|(id, _)| *id)
    }

    /// Columns whose values or existence change: writes, creates and deletes.
    pub fn outputs(&self) -> BTreeSet<ColumnId> {
        let mut out = self.writes.clone();
        out.extend(self.created_ids());
        out.extend(self.deletes.iter().copied());
        out
    }

    /// Replaces the ids of created columns with the ones `other` assigned,
    /// so executions in different orders agree on column identity.
    pub fn adopt_created_ids(&mut self, other: &ColumnEffect) -> bool {
        if self.creates.len() != other.creates.len() {
            return false;
        }
        for ((id, _), (theirs, _)) in self.creates.iter_mut().zip(&other.creates) {
            *id = *theirs;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EffectError {
    #[error("step {step}: column {label:?} does not exist at this point")]
    UnresolvedColumn { step: usize, label: String },
    #[error("{}column label {label:?} would be duplicated", step_prefix(*step))]
    LabelCollision { step: Option<usize>, label: String },
    #[error("step {step}: {op} is missing parameter {key:?}")]
    MissingParam {
        step: usize,
        op: String,
        key: &'static str,
    },
}

fn step_prefix(step: Option<usize>) -> String {
    step.map(|s| format!("step {s}: ")).unwrap_or_default()
}

impl EffectError {
    pub fn code(&self) -> &'static str {
        match self {
            EffectError::UnresolvedColumn { .. } => "unresolved-column",
            EffectError::LabelCollision { .. } => "label-collision",
            EffectError::MissingParam { .. } => "missing-param",
        }
    }

    pub fn step_index(&self) -> Option<usize> {
        match self {
            EffectError::UnresolvedColumn { step, .. } | EffectError::MissingParam { step, .. } => {
                Some(*step)
            }
            EffectError::LabelCollision { step, .. } => *step,
        }
    }

    fn at_step(self, index: usize) -> Self {
        match self {
            EffectError::LabelCollision { step: None, label } => EffectError::LabelCollision {
                step: Some(index),
                label,
            },
            other => other,
        }
    }
}

impl From<&EffectError> for Diagnostic {
    fn from(err: &EffectError) -> Self {
        Diagnostic::error(err.code(), err.step_index(), err.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectOptions {
    /// Split arity by source column label; overrides anything in the recipe.
    pub split_arity: BTreeMap<String, usize>,
}

struct Resolver<'a> {
    schema: &'a SchemaState,
    op: &'a RawOperation,
    resolves: BTreeSet<String>,
}

impl<'a> Resolver<'a> {
    fn column(&mut self, label: &str) -> Result<ColumnId, EffectError> {
        self.resolves.insert(label.to_owned());
        self.schema
            .id_of(label)
            .ok_or_else(|| EffectError::UnresolvedColumn {
                step: self.op.index,
                label: label.to_owned(),
            })
    }

    fn param(&self, key: &'static str) -> Result<&'a str, EffectError> {
        self.op
            .str_param(key)
            .ok_or_else(|| EffectError::MissingParam {
                step: self.op.index,
                op: self.op.op_id.clone(),
                key,
            })
    }

    /// Columns read by an expression; `None` when it is opaque.
    fn expression(
        &mut self,
        expr: &str,
        own: &str,
    ) -> Result<Option<BTreeSet<ColumnId>>, EffectError> {
        let analysis = analyze_expression(expr, own);
        if analysis.opaque {
            return Ok(None);
        }
        analysis
            .referenced_columns
            .iter()
            .map(|l| self.column(l))
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Some)
    }

    /// Columns read through facets of the engine configuration.
    fn facets(&mut self) -> Result<Option<BTreeSet<ColumnId>>, EffectError> {
        let mut out = BTreeSet::new();
        let Some(engine) = self.op.params.get("engineConfig") else {
            return Ok(Some(out));
        };
        if engine.get("mode").and_then(Value::as_str) == Some("record-based") {
            return Ok(None);
        }
        let facets = engine.get("facets").and_then(Value::as_array);
        for facet in facets.into_iter().flatten() {
            let col = facet
                .get("columnName")
                .and_then(Value::as_str)
                .unwrap_or("");
            if !col.is_empty() {
                out.insert(self.column(col)?);
            }
            if let Some(expr) = facet.get("expression").and_then(Value::as_str) {
                match self.expression(expr, col)? {
                    Some(ids) => out.extend(ids),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(out))
    }
}

fn split_arity(op: &RawOperation, column: &str, opts: &EffectOptions) -> (usize, bool) {
    if let Some(&k) = opts.split_arity.get(column) {
        return (k, false);
    }
    if op.str_param("mode") == Some("lengths") {
        if let Some(n) = op
            .params
            .get("fieldLengths")
            .and_then(Value::as_array)
            .map(Vec::len)
            .filter(|&n| n > 0)
        {
            return (n, false);
        }
    }
    match op.params.get("maxColumns").and_then(Value::as_u64) {
        Some(n) if n > 0 => (n as usize, false),
        _ => (DEFAULT_SPLIT_ARITY, true),
    }
}

/// Computes the effect of `op` against `schema`.
pub fn effect_of(
    op: &RawOperation,
    schema: &SchemaState,
    opts: &EffectOptions,
) -> Result<ColumnEffect, EffectError> {
    effect_with_notes(op, schema, opts, &mut Vec::new())
}

/// Like [`effect_of`], also reporting guesses (such as a defaulted split
/// arity) as warnings.
pub fn effect_with_notes(
    op: &RawOperation,
    schema: &SchemaState,
    opts: &EffectOptions,
    notes: &mut Vec<Diagnostic>,
) -> Result<ColumnEffect, EffectError> {
    let all = schema.ids();
    let Some(entry) = catalog::lookup(&op.op_id) else {
        return Ok(ColumnEffect {
            reads: all.clone(),
            writes: all,
            table_scoped: true,
            fallback: true,
            ..Default::default()
        });
    };
    if entry.kind == OpKind::TableScoped {
        return Ok(ColumnEffect {
            reads: all.clone(),
            writes: all,
            table_scoped: true,
            ..Default::default()
        });
    }

    let mut r = Resolver {
        schema,
        op,
        resolves: BTreeSet::new(),
    };
    let mut effect = ColumnEffect::default();
    // `None` once anything forces the conservative read set.
    let mut extra_reads: Option<BTreeSet<ColumnId>> = Some(BTreeSet::new());

    match entry.kind {
        OpKind::TextTransform | OpKind::MassEdit => {
            let name = r.param("columnName")?;
            let col = r.column(name)?;
            let expr = match entry.kind {
                OpKind::TextTransform => Some(r.param("expression")?),
                _ => op.str_param("expression"),
            };
            if let Some(expr) = expr {
                let refs = r.expression(expr, name)?;
                merge(&mut extra_reads, refs);
            }
            effect.reads.insert(col);
            effect.writes.insert(col);
        }
        OpKind::FillDown | OpKind::BlankDown | OpKind::ColumnMove => {
            let name = r.param("columnName")?;
            let col = r.column(name)?;
            effect.reads.insert(col);
            effect.writes.insert(col);
            if entry.kind == OpKind::ColumnMove {
                let index = op
                    .params
                    .get("index")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| EffectError::MissingParam {
                        step: op.index,
                        op: op.op_id.clone(),
                        key: "index",
                    })?;
                effect.moved_to = Some((col, index as usize));
            }
        }
        OpKind::ColumnRename => {
            let old = r.param("oldColumnName")?;
            let new = r.param("newColumnName")?;
            let col = r.column(old)?;
            effect.reads.insert(col);
            effect.writes.insert(col);
            effect.renames.insert(col, new.to_owned());
            effect.relabels.insert(old.to_owned());
            effect.relabels.insert(new.to_owned());
        }
        OpKind::ColumnRemoval => {
            let name = r.param("columnName")?;
            let col = r.column(name)?;
            effect.reads.insert(col);
            effect.deletes.insert(col);
            effect.relabels.insert(name.to_owned());
        }
        OpKind::ColumnSplit => {
            let name = r.param("columnName")?;
            let col = r.column(name)?;
            let (k, defaulted) = split_arity(op, name, opts);
            if defaulted {
                notes.push(Diagnostic::warning(
                    "split-arity-default",
                    Some(op.index),
                    format!(
                        "split of {name:?} has no fixed part count; assuming {k} (override with --split-arity {name}=<k>)"
                    ),
                ));
            }
            let mut ids = schema.clone();
            effect.reads.insert(col);
            for i in 1..=k {
                let label = format!("{name} {i}");
                effect.relabels.insert(label.clone());
                effect.creates.push((ids.fresh_id(), label));
            }
            if op.bool_param("removeOriginalColumn").unwrap_or(false) {
                effect.deletes.insert(col);
                effect.relabels.insert(name.to_owned());
            }
            effect.anchor = Some(col);
        }
        OpKind::ColumnAddition => {
            let base = r.param("baseColumnName")?;
            let new = r.param("newColumnName")?;
            let expr = r.param("expression")?;
            let col = r.column(base)?;
            let refs = r.expression(expr, base)?;
            merge(&mut extra_reads, refs);
            let mut ids = schema.clone();
            effect.reads.insert(col);
            effect.creates.push((ids.fresh_id(), new.to_owned()));
            effect.relabels.insert(new.to_owned());
            effect.anchor = Some(col);
        }
        OpKind::TableScoped => unreachable!("handled above"),
    }

    let facets = r.facets()?;
    merge(&mut extra_reads, facets);
    match extra_reads {
        Some(ids) => effect.reads.extend(ids),
        None => effect.reads = all,
    }
    effect.resolves = r.resolves;
    Ok(effect)
}

fn merge(extra: &mut Option<BTreeSet<ColumnId>>, more: Option<BTreeSet<ColumnId>>) {
    match (extra.as_mut(), more) {
        (Some(acc), Some(ids)) => acc.extend(ids),
        _ => *extra = None,
    }
}

/// Applies an effect produced against `schema`.
pub fn apply_effect(
    schema: &SchemaState,
    effect: &ColumnEffect,
) -> Result<SchemaState, EffectError> {
    let mut next = schema.clone();
    let live = schema.ids();
    if let Some((id, _)) = effect.creates.iter().find(|(id, _)| live.contains(id)) {
        return Err(EffectError::LabelCollision {
            step: None,
            label: format!(
                "{} (id {id} already live)",
                schema.label_of(*id).unwrap_or("?")
            ),
        });
    }

    let anchor_pos = effect.anchor.and_then(|a| schema.position(a));
    let insert_at = match (effect.anchor, anchor_pos) {
        (Some(a), Some(pos)) => {
            let survivors_before = schema.columns[..pos]
                .iter()
                .filter(|(id, _)| !effect.deletes.contains(id))
                .count();
            if effect.deletes.contains(&a) {
                survivors_before
            } else {
                survivors_before + 1
            }
        }
        _ => schema.len() - effect.deletes.iter().filter(|d| live.contains(d)).count(),
    };

    next.columns.retain(|(id, _)| !effect.deletes.contains(id));
    for (offset, (id, label)) in effect.creates.iter().enumerate() {
        next.columns
            .insert(insert_at + offset, (*id, label.clone()));
        next.next_id = next.next_id.max(id.0 + 1);
    }
    for (id, label) in &effect.renames {
        if let Some(slot) = next.columns.iter_mut().find(|(c, _)| c == id) {
            slot.1 = label.clone();
        }
    }
    if let Some((id, index)) = effect.moved_to {
        if let Some(pos) = next.position(id) {
            let col = next.columns.remove(pos);
            let index = index.min(next.columns.len());
            next.columns.insert(index, col);
        }
    }

    let mut seen = BTreeSet::new();
    for (_, label) in &next.columns {
        if !seen.insert(label.as_str()) {
            return Err(EffectError::LabelCollision {
                step: None,
                label: label.clone(),
            });
        }
    }
    Ok(next)
}

/// Schemas and effects along a recipe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// `n + 1` snapshots for `n` operations.
    pub states: Vec<SchemaState>,
    pub effects: Vec<ColumnEffect>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn trace(
    recipe: &Recipe,
    initial: &SchemaState,
    opts: &EffectOptions,
) -> Result<Trace, EffectError> {
    let mut states = Vec::with_capacity(recipe.len() + 1);
    let mut effects = Vec::with_capacity(recipe.len());
    let mut diagnostics = Vec::new();
    states.push(initial.clone());
    for op in &recipe.operations {
        let current = states.last().expect("initial state");
        let effect = effect_with_notes(op, current, opts, &mut diagnostics)?;
        let next = apply_effect(current, &effect).map_err(|e| e.at_step(op.index))?;
        effects.push(effect);
        states.push(next);
    }
    Ok(Trace {
        states,
        effects,
        diagnostics,
    })
}

pub fn trace_schema(
    recipe: &Recipe,
    initial: &SchemaState,
    opts: &EffectOptions,
) -> Result<Vec<SchemaState>, EffectError> {
    trace(recipe, initial, opts).map(|t| t.states)
}

/// Smallest schema the recipe can run on: every label looked up before any
/// step creates it, in order of first mention.
pub fn infer_initial_schema(recipe: &Recipe, opts: &EffectOptions) -> SchemaState {
    let mut labels: Vec<String> = Vec::new();
    loop {
        let initial =
            SchemaState::from_labels(labels.iter().cloned()).expect("inferred labels are distinct");
        match trace(recipe, &initial, opts) {
            Err(EffectError::UnresolvedColumn { label, .. }) if !labels.contains(&label) => {
                labels.push(label);
            }
            _ => return initial,
        }
    }
}
