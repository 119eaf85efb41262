use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{identifiers, sanitize, ViewKind};
use crate::graph::{EdgeKind, NodeKind, WorkflowModel};

/// Renders the model as YesWorkflow comment annotations.
///
/// One outer block wraps one block per step (or summary) in step order.
/// Parameters are only listed in the combined view.
pub fn emit_yw(model: &WorkflowModel, view: ViewKind) -> String {
    let names = identifiers(model);
    let idx = model.index();
    let mut ins: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut outs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut params: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut produced = BTreeSet::new();
    let mut consumed = BTreeSet::new();
    for e in model.edges.iter().filter(|e| e.kind == EdgeKind::Flow) {
        let (a, b) = (idx[e.from.as_str()], idx[e.to.as_str()]);
        let (ka, kb) = (model.nodes[a].kind, model.nodes[b].kind);
        if ka == NodeKind::Param && kb.is_process() {
            params.entry(b).or_default().push(a);
        } else if ka.is_data() && kb.is_process() {
            ins.entry(b).or_default().push(a);
            consumed.insert(a);
        } else if ka.is_process() && kb.is_data() {
            outs.entry(a).or_default().push(b);
            produced.insert(b);
        }
    }
    for v in ins
        .values_mut()
        .chain(outs.values_mut())
        .chain(params.values_mut())
    {
        v.sort_unstable();
    }

    let name = |i: usize| names[&model.nodes[i].id].as_str();
    let workflow = sanitize(&model.name);
    let mut out = String::new();
    let _ = writeln!(out, "# @begin {workflow}");
    for (i, n) in model.nodes.iter().enumerate() {
        if n.kind.is_data() && consumed.contains(&i) && !produced.contains(&i) {
            let _ = writeln!(out, "# @in {}", name(i));
        }
    }
    for (i, n) in model.nodes.iter().enumerate() {
        if n.kind.is_data() && produced.contains(&i) && !consumed.contains(&i) {
            let _ = writeln!(out, "# @out {}", name(i));
        }
    }

    for (i, n) in model.nodes.iter().enumerate() {
        if !n.kind.is_process() {
            continue;
        }
        let step = name(i);
        out.push_str("#\n");
        let _ = writeln!(out, "# @begin {step}");
        if view == ViewKind::Combined {
            for &p in params.get(&i).into_iter().flatten() {
                let _ = writeln!(out, "# @param {}", name(p));
            }
        }
        for &d in ins.get(&i).into_iter().flatten() {
            let _ = writeln!(out, "# @in {}", name(d));
        }
        for &d in outs.get(&i).into_iter().flatten() {
            let _ = writeln!(out, "# @out {}", name(d));
        }
        let _ = writeln!(out, "# @end {step}");
    }
    if model.nodes.iter().any(|n| n.kind.is_process()) {
        out.push_str("#\n");
    }
    let _ = writeln!(out, "# @end {workflow}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{infer_initial_schema, trace, EffectOptions, SchemaState};
    use crate::graph::build_linear;
    use crate::recipe::parse_recipe;

    #[test]
    fn empty_model_is_bare_outer_block() {
        let m = build_linear(&Default::default(), &[SchemaState::default()]);
        assert_eq!(
            emit_yw(&m, ViewKind::Combined),
            "# @begin workflow\n# @end workflow\n"
        );
    }

    #[test]
    fn rename_block() {
        let r = parse_recipe(
            r#"[{"op":"core/column-rename","oldColumnName":"date 2","newColumnName":"year"}]"#,
            Some("rename.json"),
        )
        .unwrap();
        let opts = EffectOptions::default();
        let t = trace(&r, &infer_initial_schema(&r, &opts), &opts).unwrap();
        let m = build_linear(&r, &t.states);
        let text = emit_yw(&m, ViewKind::Combined);
        assert_eq!(
            text,
            "# @begin rename\n\
             # @in table_0\n\
             # @out table_1\n\
             #\n\
             # @begin column_rename\n\
             # @param oldColumnName\n\
             # @param newColumnName\n\
             # @in table_0\n\
             # @out table_1\n\
             # @end column_rename\n\
             #\n\
             # @end rename\n"
        );
        assert!(!emit_yw(&m, ViewKind::Process).contains("@param"));
    }
}
