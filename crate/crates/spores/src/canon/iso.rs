//! Homomorphism search between terms.
//!
//! A homomorphism `t1 -> t2` is a map on bound labels that sends the atom bag
//! of `t1` exactly onto the atom bag of `t2` (a bag bijection — every copy
//! accounted for). Free indices must match verbatim. The map need not be
//! injective on labels; two bound labels of `t1` may collapse onto one label
//! of `t2`. A pair of homomorphisms in opposite directions certifies the
//! terms are isomorphic, i.e. equal up to renaming of bound labels.
//!
//! Both terms must satisfy the [`Term`] invariant that every bound label
//! occurs in at least one atom; the search reports no homomorphism otherwise.

use super::{Index, Term};

/// The first homomorphism found, as `map[b1] = b2` over bound labels.
pub fn find_hom(t1: &Term, t2: &Term) -> Option<Vec<usize>> {
    let mut out = None;
    search(t1, t2, &mut |m| {
        out = Some(m.to_vec());
        true
    });
    out
}

/// All distinct homomorphisms (deduplicated: different atom matchings can
/// induce the same label map).
pub fn all_homs(t1: &Term, t2: &Term) -> Vec<Vec<usize>> {
    let mut maps = Vec::new();
    search(t1, t2, &mut |m| {
        maps.push(m.to_vec());
        false
    });
    maps.sort();
    maps.dedup();
    maps
}

/// Terms are isomorphic when homomorphisms exist in both directions (this
/// forces the map to be a label bijection).
pub fn isomorphic(t1: &Term, t2: &Term) -> bool {
    t1.bound == t2.bound
        && t1.atoms.len() == t2.atoms.len()
        && find_hom(t1, t2).is_some()
        && find_hom(t2, t1).is_some()
}

/// Backtracking bag matcher. Calls `found` with the completed label map for
/// every successful matching; stops early once `found` returns true.
fn search(t1: &Term, t2: &Term, found: &mut impl FnMut(&[usize]) -> bool) {
    if t1.atoms.len() != t2.atoms.len() {
        return;
    }
    // cheap prune: the matrix-name multisets must agree
    let mut n1: Vec<&str> = t1.atoms.iter().map(|a| a.mat.as_str()).collect();
    let mut n2: Vec<&str> = t2.atoms.iter().map(|a| a.mat.as_str()).collect();
    n1.sort_unstable();
    n2.sort_unstable();
    if n1 != n2 {
        return;
    }
    let mut map: Vec<Option<usize>> = vec![None; t1.bound];
    let mut used = vec![false; t2.atoms.len()];
    step(t1, t2, 0, &mut used, &mut map, found);
}

fn step(
    t1: &Term,
    t2: &Term,
    pos: usize,
    used: &mut [bool],
    map: &mut Vec<Option<usize>>,
    found: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if pos == t1.atoms.len() {
        // invariant: every bound label occurs somewhere, so the map is total
        let full: Option<Vec<usize>> = map.iter().copied().collect();
        return match full {
            Some(m) => found(&m),
            None => false,
        };
    }
    let a1 = &t1.atoms[pos];
    for q in 0..t2.atoms.len() {
        if used[q] {
            continue;
        }
        let a2 = &t2.atoms[q];
        if a1.mat != a2.mat || a1.indices.len() != a2.indices.len() {
            continue;
        }
        let mut assigned = Vec::new();
        let ok = a1.indices.iter().zip(&a2.indices).all(|(x, y)| match (x, y) {
            (Index::Free(f1), Index::Free(f2)) => f1 == f2,
            (Index::Bound(b1), Index::Bound(b2)) => match map[*b1] {
                Some(t) => t == *b2,
                None => {
                    map[*b1] = Some(*b2);
                    assigned.push(*b1);
                    true
                }
            },
            _ => false,
        });
        if ok {
            used[q] = true;
            if step(t1, t2, pos + 1, used, map, found) {
                return true;
            }
            used[q] = false;
        }
        for b in assigned {
            map[b] = None;
        }
    }
    false
}
