//! Static description of the operations whose column effects are modeled.

use std::fmt::Write as _;

/// Effect class of a cataloged operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    TextTransform,
    MassEdit,
    ColumnRename,
    ColumnRemoval,
    ColumnSplit,
    ColumnAddition,
    ColumnMove,
    FillDown,
    BlankDown,
    /// Touches the row structure (or the whole schema) of every column.
    TableScoped,
}

#[derive(Debug)]
pub struct CatalogEntry {
    pub op_id: &'static str,
    pub kind: OpKind,
    pub params: &'static [&'static str],
    pub reads: &'static str,
    pub writes: &'static str,
    pub creates: &'static str,
    pub deletes: &'static str,
}

impl CatalogEntry {
    pub fn table_scoped(&self) -> bool {
        self.kind == OpKind::TableScoped
    }

    /// Whether a parameter key is interpreted by the analysis.
    pub fn uses_param(&self, key: &str) -> bool {
        key == "engineConfig" || self.params.contains(&key)
    }
}

const ALL: &str = "all live columns";

pub static CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        op_id: "core/text-transform",
        kind: OpKind::TextTransform,
        params: &[
            "columnName",
            "expression",
            "onError",
            "repeat",
            "repeatCount",
        ],
        reads: "columnName + expression references (all if opaque)",
        writes: "columnName",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/mass-edit",
        kind: OpKind::MassEdit,
        params: &["columnName", "expression", "edits"],
        reads: "columnName + expression references (all if opaque)",
        writes: "columnName",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/column-rename",
        kind: OpKind::ColumnRename,
        params: &["oldColumnName", "newColumnName"],
        reads: "oldColumnName",
        writes: "oldColumnName (relabeled to newColumnName)",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/column-removal",
        kind: OpKind::ColumnRemoval,
        params: &["columnName"],
        reads: "columnName",
        writes: "-",
        creates: "-",
        deletes: "columnName",
    },
    CatalogEntry {
        op_id: "core/column-split",
        kind: OpKind::ColumnSplit,
        params: &[
            "columnName",
            "guessCellType",
            "removeOriginalColumn",
            "mode",
            "separator",
            "regex",
            "maxColumns",
            "fieldLengths",
        ],
        reads: "columnName",
        writes: "-",
        creates: "\"<columnName> 1\" .. \"<columnName> k\"",
        deletes: "columnName if removeOriginalColumn",
    },
    CatalogEntry {
        op_id: "core/column-addition",
        kind: OpKind::ColumnAddition,
        params: &[
            "baseColumnName",
            "expression",
            "onError",
            "newColumnName",
            "columnInsertIndex",
        ],
        reads: "baseColumnName + expression references (all if opaque)",
        writes: "-",
        creates: "newColumnName",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/column-move",
        kind: OpKind::ColumnMove,
        params: &["columnName", "index"],
        reads: "columnName",
        writes: "columnName (position only)",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/column-reorder",
        kind: OpKind::TableScoped,
        params: &["columnNames"],
        reads: ALL,
        writes: ALL,
        creates: "-",
        deletes: "columns not listed",
    },
    CatalogEntry {
        op_id: "core/fill-down",
        kind: OpKind::FillDown,
        params: &["columnName"],
        reads: "columnName",
        writes: "columnName",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/blank-down",
        kind: OpKind::BlankDown,
        params: &["columnName"],
        reads: "columnName",
        writes: "columnName",
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/row-removal",
        kind: OpKind::TableScoped,
        params: &[],
        reads: ALL,
        writes: ALL,
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/row-reorder",
        kind: OpKind::TableScoped,
        params: &["mode", "sorting"],
        reads: ALL,
        writes: ALL,
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/row-star",
        kind: OpKind::TableScoped,
        params: &["starred"],
        reads: ALL,
        writes: ALL,
        creates: "-",
        deletes: "-",
    },
    CatalogEntry {
        op_id: "core/row-flag",
        kind: OpKind::TableScoped,
        params: &["flagged"],
        reads: ALL,
        writes: ALL,
        creates: "-",
        deletes: "-",
    },
];

pub fn lookup(op_id: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.op_id == op_id)
}

/// Markdown reference table, one row per operation id.
pub fn reference_markdown() -> String {
    let mut out = String::from(
        "# Operation catalog\n\n\
         Column effects assumed for each supported OpenRefine operation.\n\
         Operations not listed here are treated as table-scoped and force the\n\
         whole recipe into a single sequential chain.\n\n\
         | op | reads | writes | creates | deletes | table_scoped |\n\
         |----|-------|--------|---------|---------|--------------|\n",
    );
    for e in CATALOG {
        let _ = writeln!(
            out,
            "| `{}` | {} | {} | {} | {} | {} |",
            e.op_id,
            e.reads,
            e.writes,
            e.creates,
            e.deletes,
            e.table_scoped()
        );
    }
    out
}
