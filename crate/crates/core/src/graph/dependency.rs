//! Interference between step effects.
//!
//! Two steps commute when neither changes a column the other touches and
//! neither binds or releases a label the other uses. Table-scoped steps
//! never commute with anything.

use std::collections::BTreeSet;

use crate::effects::{ColumnEffect, ColumnId};
use crate::recipe::Recipe;

fn footprint(e: &ColumnEffect) -> BTreeSet<ColumnId> {
    let mut f = e.outputs();
    f.extend(e.reads.iter().copied());
    f
}

fn disjoint<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> bool {
    a.intersection(b).next().is_none()
}

/// Whether two steps can run in either order with the same result.
pub fn commutes(a: &ColumnEffect, b: &ColumnEffect) -> bool {
    if a.table_scoped || b.table_scoped {
        return false;
    }
    if !disjoint(&a.outputs(), &footprint(b)) || !disjoint(&b.outputs(), &footprint(a)) {
        return false;
    }
    let names_b: BTreeSet<&String> = b.relabels.iter().chain(&b.resolves).collect();
    let names_a: BTreeSet<&String> = a.relabels.iter().chain(&a.resolves).collect();
    a.relabels.iter().all(|l| !names_b.contains(l))
        && b.relabels.iter().all(|l| !names_a.contains(l))
}

/// All ordered pairs `(i, j)`, `i < j`, whose effects do not commute.
///
/// A recipe containing an operation outside the catalog is serialized
/// entirely: the unknown step may change what any later label refers to.
pub fn dependency_edges(recipe: &Recipe, effects: &[ColumnEffect]) -> BTreeSet<(usize, usize)> {
    debug_assert_eq!(recipe.len(), effects.len());
    let n = effects.len();
    let serialize_all = effects.iter().any(|e| e.fallback);
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if serialize_all || !commutes(&effects[i], &effects[j]) {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Minimal edge set with the same reachability, for a DAG whose edges all
/// point from a lower to a higher index.
pub fn transitive_reduction(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> BTreeSet<(usize, usize)> {
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (a, b) in edges {
        assert!(a < b, "edge ({a}, {b}) does not point forward");
        succ[a].insert(b);
    }
    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    let mut kept = BTreeSet::new();
    for v in (0..n).rev() {
        let mut acc = vec![0u64; words];
        for &w in &succ[v] {
            if acc[w / 64] >> (w % 64) & 1 == 1 {
                continue;
            }
            kept.insert((v, w));
            acc[w / 64] |= 1 << (w % 64);
            for (dst, src) in acc.iter_mut().zip(&reach[w]) {
                *dst |= *src;
            }
        }
        reach[v] = acc;
    }
    kept
}

/// Weakly connected groups of `0..n`, each sorted, ordered by first element.
pub fn components(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}
