//! Parsing of exported OpenRefine operation histories.
//!
//! OpenRefine's "Extract" dialog produces a JSON array of operation objects.
//! Each object carries an `"op"` identifier (for example `core/column-split`),
//! an optional human readable `"description"`, and operation specific
//! parameters. Parameters are kept verbatim so that downstream passes can
//! decide which ones they understand.

use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::effects::catalog;

/// One entry of an exported operation history.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOperation {
    pub op_id: String,
    pub description: Option<String>,
    /// Every key except `op` and `description`, in document order.
    pub params: Map<String, Value>,
    pub index: usize,
}

impl RawOperation {
    /// The operation name without its `core/` namespace.
    pub fn short_name(&self) -> &str {
        self.op_id.strip_prefix("core/").unwrap_or(&self.op_id)
    }

    pub fn str_param(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn bool_param(&self, key: &str) -> Option<bool> {
        self.params.get(key).and_then(Value::as_bool)
    }

    /// Rebuilds the JSON object this operation was parsed from.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("op".to_owned(), Value::String(self.op_id.clone()));
        if let Some(desc) = &self.description {
            obj.insert("description".to_owned(), Value::String(desc.clone()));
        }
        for (k, v) in &self.params {
            obj.insert(k.clone(), v.clone());
        }
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recipe {
    pub operations: Vec<RawOperation>,
    pub source_name: Option<String>,
}

impl Recipe {
    pub fn len(&self) -> usize {
        self.operations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operations.is_empty()
    }

    /// Builds a recipe from already parsed operations, renumbering indices.
    pub fn from_operations(ops: impl IntoIterator<Item = RawOperation>) -> Self {
        let operations = ops
            .into_iter()
            .enumerate()
            .map(|(index, op)| RawOperation { index, ..op })
            .collect();
        Recipe {
            operations,
            source_name: None,
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.operations.iter().map(RawOperation::to_json).collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecipeError {
    #[error("recipe is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("top-level JSON value is {found}, expected an array of operations")]
    NotAnArray { found: &'static str },
    #[error("entry {index} has no string \"op\" field")]
    MissingOpField { index: usize },
}

impl RecipeError {
    pub fn code(&self) -> &'static str {
        match self {
            RecipeError::MalformedJson(_) => "malformed-json",
            RecipeError::NotAnArray { .. } => "not-an-array",
            RecipeError::MissingOpField { .. } => "missing-op-field",
        }
    }

    pub fn step_index(&self) -> Option<usize> {
        match self {
            RecipeError::MissingOpField { index } => Some(*index),
            _ => None,
        }
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Parses an exported operation history.
///
/// A bare JSON object is accepted as a one element recipe. Duplicate keys
/// inside one object resolve to the last occurrence.
pub fn parse_recipe(text: &str, source_name: Option<&str>) -> Result<Recipe, RecipeError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| RecipeError::MalformedJson(e.to_string()))?;
    let entries = match value {
        Value::Array(items) => items,
        obj @ Value::Object(_) => vec![obj],
        other => {
            return Err(RecipeError::NotAnArray {
                found: kind_name(&other),
            })
        }
    };

    let mut operations = Vec::with_capacity(entries.len());
    for (index, entry) in entries.into_iter().enumerate() {
        let Value::Object(mut obj) = entry else {
            return Err(RecipeError::MissingOpField { index });
        };
        let op_id = match obj.shift_remove("op") {
            Some(Value::String(s)) if !s.is_empty() => s,
            _ => return Err(RecipeError::MissingOpField { index }),
        };
        let description = match obj.get("description") {
            Some(Value::String(_)) => match obj.shift_remove("description") {
                Some(Value::String(s)) => Some(s),
                _ => None,
            },
            _ => None,
        };
        operations.push(RawOperation {
            op_id,
            description,
            params: obj,
            index,
        });
    }

    Ok(Recipe {
        operations,
        source_name: source_name.map(str::to_owned),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub step_index: Option<usize>,
    pub message: String,
    pub code: &'static str,
}

impl Diagnostic {
    pub fn new(
        severity: Severity,
        code: &'static str,
        step_index: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Diagnostic {
            severity,
            step_index,
            message: message.into(),
            code,
        }
    }

    pub fn error(code: &'static str, step: Option<usize>, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, code, step, message)
    }

    pub fn warning(code: &'static str, step: Option<usize>, message: impl Into<String>) -> Self {
        Self::new(Severity::Warning, code, step, message)
    }

    pub fn info(code: &'static str, step: Option<usize>, message: impl Into<String>) -> Self {
        Self::new(Severity::Info, code, step, message)
    }
}

/// `severity code step message`, with `-` standing in for a missing step.
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step_index {
            Some(i) => write!(f, "{} {} {} {}", self.severity, self.code, i, self.message),
            None => write!(f, "{} {} - {}", self.severity, self.code, self.message),
        }
    }
}

impl From<&RecipeError> for Diagnostic {
    fn from(err: &RecipeError) -> Self {
        Diagnostic::error(err.code(), err.step_index(), err.to_string())
    }
}

/// Checks a parsed recipe against the effect catalog.
pub fn validate_recipe(recipe: &Recipe) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for op in &recipe.operations {
        let Some(entry) = catalog::lookup(&op.op_id) else {
            out.push(Diagnostic::warning(
                "unknown-op",
                Some(op.index),
                format!(
                    "operation {:?} is not in the effect catalog; it will be treated as touching every column",
                    op.op_id
                ),
            ));
            continue;
        };
        for key in op.params.keys() {
            if !entry.uses_param(key) {
                out.push(Diagnostic::info(
                    "unused-param",
                    Some(op.index),
                    format!("parameter {key:?} of {} is kept but not analyzed", op.op_id),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rename_entry_keeps_name_keys() {
        let text =
            r#"[{"op":"core/column-rename","oldColumnName":"date 2","newColumnName":"year"}]"#;
        let recipe = parse_recipe(text, None).unwrap();
        assert_eq!(recipe.len(), 1);
        let op = &recipe.operations[0];
        assert_eq!(op.op_id, "core/column-rename");
        assert_eq!(op.str_param("oldColumnName"), Some("date 2"));
        assert_eq!(op.str_param("newColumnName"), Some("year"));
        assert_eq!(op.index, 0);
    }

    #[test]
    fn empty_array() {
        let recipe = parse_recipe("[]", Some("empty.json")).unwrap();
        assert!(recipe.is_empty());
        assert_eq!(recipe.source_name.as_deref(), Some("empty.json"));
    }

    #[test]
    fn missing_op_names_index() {
        let err = parse_recipe(r#"[{"description":"x"}]"#, None).unwrap_err();
        assert_eq!(err, RecipeError::MissingOpField { index: 0 });
        assert_eq!(err.code(), "missing-op-field");

        let err = parse_recipe(r#"[{"op":"core/mass-edit"}, 3]"#, None).unwrap_err();
        assert_eq!(err, RecipeError::MissingOpField { index: 1 });

        let err = parse_recipe(r#"[{"op": 7}]"#, None).unwrap_err();
        assert_eq!(err, RecipeError::MissingOpField { index: 0 });
    }

    #[test]
    fn malformed_and_non_array() {
        assert_eq!(
            parse_recipe("[{", None).unwrap_err().code(),
            "malformed-json"
        );
        assert_eq!(parse_recipe("42", None).unwrap_err().code(), "not-an-array");
        assert_eq!(
            parse_recipe("\"x\"", None).unwrap_err().code(),
            "not-an-array"
        );
    }

    #[test]
    fn bare_object_is_one_step() {
        let recipe =
            parse_recipe(r#"{"op":"core/column-removal","columnName":"a"}"#, None).unwrap();
        assert_eq!(recipe.len(), 1);
        assert_eq!(recipe.operations[0].str_param("columnName"), Some("a"));
    }

    #[test]
    fn duplicate_keys_last_wins() {
        let recipe = parse_recipe(
            r#"[{"op":"core/column-removal","columnName":"a","columnName":"b"}]"#,
            None,
        )
        .unwrap();
        assert_eq!(recipe.operations[0].str_param("columnName"), Some("b"));
    }

    #[test]
    fn description_is_split_out() {
        let recipe = parse_recipe(
            r#"[{"op":"core/column-removal","description":"Remove column a","columnName":"a"}]"#,
            None,
        )
        .unwrap();
        let op = &recipe.operations[0];
        assert_eq!(op.description.as_deref(), Some("Remove column a"));
        assert!(!op.params.contains_key("description"));
        assert!(!op.params.contains_key("op"));
    }

    #[test]
    fn validate_known_op_is_clean() {
        let recipe =
            parse_recipe(r#"[{"op":"core/column-removal","columnName":"a"}]"#, None).unwrap();
        let diags = validate_recipe(&recipe);
        assert!(diags.iter().all(|d| d.severity != Severity::Error));
        assert!(diags.iter().all(|d| d.code != "unknown-op"));
    }

    #[test]
    fn validate_unknown_op_warns() {
        let recipe = parse_recipe(r#"[{"op":"vendor/exotic-op"}]"#, None).unwrap();
        let diags = validate_recipe(&recipe);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert_eq!(diags[0].code, "unknown-op");
        assert_eq!(diags[0].step_index, Some(0));
    }

    #[test]
    fn validate_unused_param_is_info() {
        let recipe = parse_recipe(
            r#"[{"op":"core/column-removal","columnName":"a","flavour":"x"}]"#,
            None,
        )
        .unwrap();
        let diags = validate_recipe(&recipe);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Info);
        assert_eq!(diags[0].code, "unused-param");
    }

    #[test]
    fn validate_empty() {
        assert!(validate_recipe(&Recipe::default()).is_empty());
    }

    #[test]
    fn diagnostic_line_format() {
        let d = Diagnostic::warning("unknown-op", Some(3), "boom");
        assert_eq!(d.to_string(), "warning unknown-op 3 boom");
        let d = Diagnostic::error("not-an-array", None, "bad");
        assert_eq!(d.to_string(), "error not-an-array - bad");
    }
}
