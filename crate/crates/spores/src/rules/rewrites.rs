//! The rewrite rule inventory.
//!
//! Three families:
//! - relational identities that move work around: flattening, distributing
//!   products over sums, factoring, pushing aggregates through joins;
//! - reverse translations that read relational shapes back as matrix
//!   expressions (these produce the extractable plans);
//! - matrix-level hygiene: transpose and power simplifications.
//!
//! Searchers validate as much as they can read-only so sampling slots are
//! not wasted on dead matches; appliers re-derive everything from the match
//! via canonical ids, which keeps them correct under batching.

use super::{connect, joined, unioned, Match, Rule};
use crate::egraph::{EGraph, Id, Op, RuleError};
use crate::ir::la::{broadcast, LaShape};
use crate::ir::Schema;
use std::collections::BTreeSet;

/// Joins wider than this are not re-partitioned (the enumeration is 2^n).
const MAX_PARTS: usize = 5;

/// Match-tag bit marking a mirrored two-way split (the right part is the
/// one acted on). Partition masks stay below `1 << (MAX_PARTS - 1)`.
const SWAP: u16 = 0x8000;
/// Exponents beyond this are not folded further.
const MAX_POW: u32 = 32;
/// Cap on common factors tried per union.
const MAX_DIVISORS: usize = 8;

pub(super) fn all() -> Vec<Box<dyn Rule>> {
    vec![
        Box::new(DoubleTranspose),
        Box::new(UnbindBind),
        Box::new(BindUnbind),
        Box::new(TransposeSlots),
        Box::new(JoinUnit),
        Box::new(JoinLits),
        Box::new(UnionZero),
        Box::new(JoinFlatten),
        Box::new(UnionFlatten),
        Box::new(AggAbsent),
        Box::new(AbsentAgg),
        Box::new(AggMerge),
        Box::new(AggSplit),
        Box::new(AggPush),
        Box::new(AggPull),
        Box::new(AggUnion),
        Box::new(UnionAgg),
        Box::new(JoinDistribute),
        Box::new(UnionFactor),
        Box::new(AggToSum),
        Box::new(AggJoinToMMult),
        Box::new(JoinToMult),
        Box::new(UnionToPlus),
        Box::new(SquareIntro),
        Box::new(SquareExpand),
        Box::new(MinusIntro),
    ]
}

// ---- helpers ----

fn schema_of(g: &EGraph, id: Id) -> Option<Schema> {
    g.meta(id).kind.schema()
}

fn schema_union(g: &EGraph, ids: &[Id]) -> Option<Schema> {
    let mut out = Schema::empty();
    for id in ids {
        out = out.union(&schema_of(g, *id)?);
    }
    Some(out)
}

fn without_index(ids: &[Id], p: usize) -> Vec<Id> {
    let mut out = ids.to_vec();
    out.remove(p);
    out
}

/// Unordered two-way splits of `0..n` encoded as masks; the part holding
/// index 0 is the left side.
fn partition_masks(n: usize) -> impl Iterator<Item = u16> {
    let end = if (2..=MAX_PARTS).contains(&n) {
        1u16 << (n - 1)
    } else {
        1
    };
    1..end
}

fn split(ids: &[Id], mask: u16) -> (Vec<Id>, Vec<Id>) {
    let mut l = vec![ids[0]];
    let mut r = Vec::new();
    for (i, id) in ids.iter().enumerate().skip(1) {
        if mask & (1 << (i - 1)) != 0 {
            r.push(*id);
        } else {
            l.push(*id);
        }
    }
    (l, r)
}

fn is_const(g: &EGraph, id: Id, v: f64) -> bool {
    matches!(g.meta(id).constant, Some(c) if (c - v).abs() < 1e-12)
}

/// True when any of `ids` canonicalizes into `cls`'s class. Rules that
/// inline one node's children into another skip such self-mentions: a class
/// can legitimately contain a node built from itself (x ≡ x ⋈ 1 after unit
/// elimination), and inlining that definition grows terms forever.
fn mentions(g: &EGraph, ids: &[Id], cls: Id) -> bool {
    let c = g.find(cls);
    ids.iter().any(|i| g.find(*i) == c)
}

/// Read a relation back as a matrix, giving its attributes the row/col roles
/// named by `a0`/`a1` (either may be absent from the schema). A scalar
/// relation is returned as-is.
fn unbind_slots(
    g: &mut EGraph,
    rel: Id,
    schema: &Schema,
    a0: Option<&String>,
    a1: Option<&String>,
) -> Result<Id, RuleError> {
    let row = a0.filter(|a| schema.dim(a).is_some());
    let col = a1.filter(|a| schema.dim(a).is_some());
    if row.is_none() && col.is_none() {
        return Ok(rel);
    }
    g.add(Op::Unbind {
        e: rel,
        row: row.cloned(),
        col: col.cloned(),
    })
}

fn shape_within(schema: &Schema, a0: Option<&String>, a1: Option<&String>) -> LaShape {
    let r = a0.and_then(|a| schema.dim(a)).unwrap_or(1);
    let c = a1.and_then(|a| schema.dim(a)).unwrap_or(1);
    LaShape::mat(r, c)
}

/// Sorted attribute names of a schema (row attribute first by convention).
fn sorted_names(schema: &Schema) -> Vec<String> {
    schema.iter().map(|(n, _)| n.to_string()).collect()
}

fn changed_since(g: &EGraph, nodes_before: usize, merged: bool) -> bool {
    merged || g.n_nodes() != nodes_before
}

// ---- matrix-level hygiene ----

/// t(t(X)) is X.
struct DoubleTranspose;

impl Rule for DoubleTranspose {
    fn name(&self) -> &'static str {
        "double-transpose"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                if let Op::Transpose(a) = node {
                    for inner in &g.class(*a).nodes {
                        if let Op::Transpose(x) = inner {
                            out.push(Match::with_ids(q, vec![*x]));
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        g.merge(m.root, m.ids[0])
    }
}

/// Unbinding a relation that is itself a bind gives back the bound matrix —
/// directly if the slots agree, transposed if they are swapped.
struct UnbindBind;

impl Rule for UnbindBind {
    fn name(&self) -> &'static str {
        "unbind-bind"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for u in g.class_ids() {
            for node in &g.class(u).nodes {
                let Op::Unbind { e, row, col } = node else {
                    continue;
                };
                for inner in &g.class(*e).nodes {
                    let Op::Bind { m, row: r2, col: c2 } = inner else {
                        continue;
                    };
                    if row == r2 && col == c2 {
                        out.push(Match {
                            root: u,
                            ids: vec![*m],
                            attrs: Vec::new(),
                            tag: 0,
                        });
                    } else if row == c2 && col == r2 {
                        out.push(Match {
                            root: u,
                            ids: vec![*m],
                            attrs: Vec::new(),
                            tag: 1,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let la = if m.tag == 0 {
            m.ids[0]
        } else {
            g.add(Op::Transpose(m.ids[0]))?
        };
        g.merge(m.root, la)
    }
}

/// Binding a matrix that is itself an unbind of a relation, with the same
/// names, gives back that relation.
struct BindUnbind;

impl Rule for BindUnbind {
    fn name(&self) -> &'static str {
        "bind-unbind"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Bind { m, row, col } = node else {
                    continue;
                };
                for inner in &g.class(*m).nodes {
                    let Op::Unbind { e, row: r2, col: c2 } = inner else {
                        continue;
                    };
                    if row == r2 && col == c2 && g.find(*e) != g.find(q) {
                        out.push(Match::with_ids(q, vec![*e]));
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        g.merge(m.root, m.ids[0])
    }
}

/// Every way of reading a relation as a matrix has a transposed twin; tie
/// the two together through transpose nodes so either orientation is
/// reachable from the other.
struct TransposeSlots;

impl Rule for TransposeSlots {
    fn name(&self) -> &'static str {
        "transpose-slots"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for u in g.class_ids() {
            for node in &g.class(u).nodes {
                let Op::Unbind { e, row, col } = node else {
                    continue;
                };
                if row.is_none() && col.is_none() {
                    continue;
                }
                let mut attrs = Vec::new();
                let mut tag = 0u16;
                if let Some(r) = row {
                    attrs.push(r.clone());
                    tag |= 1;
                }
                if let Some(c) = col {
                    attrs.push(c.clone());
                    tag |= 2;
                }
                out.push(Match {
                    root: u,
                    ids: vec![*e],
                    attrs,
                    tag,
                });
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let row = (m.tag & 1 != 0).then(|| m.attrs[0].clone());
        let col = (m.tag & 2 != 0).then(|| m.attrs[(m.tag & 1) as usize].clone());
        let twin = g.add(Op::Unbind {
            e: m.ids[0],
            row: col,
            col: row,
        })?;
        let t1 = g.add(Op::Transpose(m.root))?;
        let mut merged = g.merge(t1, twin)?;
        let t2 = g.add(Op::Transpose(twin))?;
        merged |= g.merge(t2, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// x ∘ x is x², and x ∘ x^k is x^(k+1).
struct SquareIntro;

impl Rule for SquareIntro {
    fn name(&self) -> &'static str {
        "square-intro"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::ElemMult([a, b]) = node else {
                    continue;
                };
                if a == b {
                    out.push(Match {
                        root: q,
                        ids: vec![*a],
                        attrs: Vec::new(),
                        tag: 2,
                    });
                    continue;
                }
                for (base, other) in [(*a, *b), (*b, *a)] {
                    for inner in &g.class(other).nodes {
                        if let Op::ElemPow(x, k) = inner {
                            if *x == base && *k < MAX_POW {
                                out.push(Match {
                                    root: q,
                                    ids: vec![base],
                                    attrs: Vec::new(),
                                    tag: (*k + 1) as u16,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let p = g.add(Op::ElemPow(m.ids[0], m.tag as u32))?;
        let merged = g.merge(p, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// x^k is x ∘ x^(k-1).
struct SquareExpand;

impl Rule for SquareExpand {
    fn name(&self) -> &'static str {
        "square-expand"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                if let Op::ElemPow(a, k) = node {
                    if *k >= 2 {
                        out.push(Match {
                            root: q,
                            ids: vec![*a],
                            attrs: Vec::new(),
                            tag: *k as u16,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let a = m.ids[0];
        let rest = if m.tag == 2 {
            a
        } else {
            g.add(Op::ElemPow(a, m.tag as u32 - 1))?
        };
        let mul = g.add(Op::ElemMult([a, rest]))?;
        let merged = g.merge(mul, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// a + (-1 ∘ b) is a - b.
struct MinusIntro;

impl Rule for MinusIntro {
    fn name(&self) -> &'static str {
        "minus-intro"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::ElemPlus([a, b]) = node else {
                    continue;
                };
                for (keep, neg) in [(*a, *b), (*b, *a)] {
                    for inner in &g.class(neg).nodes {
                        let Op::ElemMult([l, r]) = inner else {
                            continue;
                        };
                        for (lit, operand) in [(*l, *r), (*r, *l)] {
                            if is_const(g, lit, -1.0) {
                                out.push(Match::with_ids(q, vec![keep, operand]));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let d = g.add(Op::ElemMinus([m.ids[0], m.ids[1]]))?;
        let merged = g.merge(d, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

// ---- relational identities ----

/// A join whose child is itself (equal to) a join flattens into one n-way
/// join.
struct JoinFlatten;

impl Rule for JoinFlatten {
    fn name(&self) -> &'static str {
        "join-flatten"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                for (p, c) in cs.iter().enumerate() {
                    if g.find(*c) == q {
                        continue; // a join folded into its own class must not re-flatten
                    }
                    let nested = g.class(*c).nodes.iter().any(|n| match n {
                        Op::Join(ics) => !mentions(g, ics, *c) && !mentions(g, ics, q),
                        _ => false,
                    });
                    if nested {
                        out.push(Match {
                            root: q,
                            ids: cs.clone(),
                            attrs: Vec::new(),
                            tag: p as u16,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let p = m.tag as usize;
        if g.find(m.ids[p]) == g.find(m.root) {
            return Ok(false);
        }
        let before = g.n_nodes();
        let rest = without_index(&m.ids, p);
        let inners: Vec<Vec<Id>> = g
            .class(m.ids[p])
            .nodes
            .iter()
            .filter_map(|n| match n {
                Op::Join(ics)
                    if !mentions(g, ics, m.ids[p]) && !mentions(g, ics, m.root) =>
                {
                    Some(ics.clone())
                }
                _ => None,
            })
            .collect();
        let mut merged = false;
        for ics in inners {
            let mut all = rest.clone();
            all.extend(ics);
            let flat = g.add(Op::Join(all))?;
            merged |= g.merge(flat, m.root)?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// Same for sums.
struct UnionFlatten;

impl Rule for UnionFlatten {
    fn name(&self) -> &'static str {
        "union-flatten"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Union(cs) = node else {
                    continue;
                };
                for (p, c) in cs.iter().enumerate() {
                    if g.find(*c) == q {
                        continue;
                    }
                    let nested = g.class(*c).nodes.iter().any(|n| match n {
                        Op::Union(ics) => !mentions(g, ics, *c) && !mentions(g, ics, q),
                        _ => false,
                    });
                    if nested {
                        out.push(Match {
                            root: q,
                            ids: cs.clone(),
                            attrs: Vec::new(),
                            tag: p as u16,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let p = m.tag as usize;
        if g.find(m.ids[p]) == g.find(m.root) {
            return Ok(false);
        }
        let before = g.n_nodes();
        let rest = without_index(&m.ids, p);
        let inners: Vec<Vec<Id>> = g
            .class(m.ids[p])
            .nodes
            .iter()
            .filter_map(|n| match n {
                Op::Union(ics)
                    if !mentions(g, ics, m.ids[p]) && !mentions(g, ics, m.root) =>
                {
                    Some(ics.clone())
                }
                _ => None,
            })
            .collect();
        let mut merged = false;
        for ics in inners {
            let mut all = rest.clone();
            all.extend(ics);
            let flat = g.add(Op::Union(all))?;
            merged |= g.merge(flat, m.root)?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// Multiplying by a known 1 changes nothing.
struct JoinUnit;

impl Rule for JoinUnit {
    fn name(&self) -> &'static str {
        "join-unit"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                let units = cs.iter().filter(|c| is_const(g, **c, 1.0)).count();
                if units > 0 && units < cs.len() {
                    out.push(Match::with_ids(q, cs.clone()));
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let keep: Vec<Id> = m
            .ids
            .iter()
            .copied()
            .filter(|c| !is_const(g, *c, 1.0))
            .collect();
        if keep.is_empty() || keep.len() == m.ids.len() {
            return Ok(false);
        }
        let before = g.n_nodes();
        let slim = joined(g, &keep)?;
        let merged = g.merge(slim, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// Two or more known-constant factors in a join multiply out into one
/// literal, so sign pairs cancel and scalar chains collapse.
struct JoinLits;

impl Rule for JoinLits {
    fn name(&self) -> &'static str {
        "join-lits"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                let consts = cs
                    .iter()
                    .filter(|c| g.meta(**c).constant.is_some())
                    .count();
                if consts >= 2 && consts < cs.len() {
                    out.push(Match::with_ids(q, cs.clone()));
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let mut product = 1.0f64;
        let mut keep = Vec::new();
        let mut folded = 0;
        for c in &m.ids {
            match g.meta(*c).constant {
                Some(v) => {
                    product *= v;
                    folded += 1;
                }
                None => keep.push(*c),
            }
        }
        if folded < 2 || keep.is_empty() {
            return Ok(false);
        }
        let before = g.n_nodes();
        if product != 1.0 {
            let lit = g.add(Op::lit(product))?;
            keep.insert(0, lit);
        }
        let slim = joined(g, &keep)?;
        let merged = g.merge(slim, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// Adding a known zero changes nothing — as long as dropping it doesn't
/// shrink the schema (a zero can still broadcast the sum wider).
struct UnionZero;

impl Rule for UnionZero {
    fn name(&self) -> &'static str {
        "union-zero"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            let Some(sq) = schema_of(g, q) else { continue };
            for node in &g.class(q).nodes {
                let Op::Union(cs) = node else {
                    continue;
                };
                let keep: Vec<Id> = cs
                    .iter()
                    .copied()
                    .filter(|c| g.meta(*c).sparsity != 0.0)
                    .collect();
                if keep.is_empty() || keep.len() == cs.len() {
                    continue;
                }
                match schema_union(g, &keep) {
                    Some(s) if s == sq => out.push(Match::with_ids(q, cs.clone())),
                    _ => {}
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let Some(sq) = schema_of(g, m.root) else {
            return Ok(false);
        };
        let keep: Vec<Id> = m
            .ids
            .iter()
            .copied()
            .filter(|c| g.meta(*c).sparsity != 0.0)
            .collect();
        if keep.is_empty() || keep.len() == m.ids.len() || schema_union(g, &keep) != Some(sq) {
            return Ok(false);
        }
        let before = g.n_nodes();
        let slim = unioned(g, &keep)?;
        let merged = g.merge(slim, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// Summing over an attribute a relation doesn't mention just multiplies by
/// that attribute's domain size.
struct AggAbsent;

impl Rule for AggAbsent {
    fn name(&self) -> &'static str {
        "agg-absent"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, c) = node else {
                    continue;
                };
                let Some(sc) = schema_of(g, *c) else { continue };
                for a in attrs {
                    if sc.dim(a).is_none() {
                        let mut names = vec![a.clone()];
                        names.extend(attrs.iter().filter(|x| *x != a).cloned());
                        out.push(Match {
                            root: q,
                            ids: vec![*c],
                            attrs: names,
                            tag: 0,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let dl = g.add(Op::DimLit(m.attrs[0].clone()))?;
        let body = if m.attrs.len() == 1 {
            m.ids[0]
        } else {
            g.add(Op::RAgg(m.attrs[1..].iter().cloned().collect(), m.ids[0]))?
        };
        let j = g.add(Op::Join(vec![dl, body]))?;
        let merged = g.merge(j, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// The reverse: a join with a domain-size factor the rest doesn't mention is
/// a sum over that attribute.
struct AbsentAgg;

impl Rule for AbsentAgg {
    fn name(&self) -> &'static str {
        "absent-agg"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                for (p, c) in cs.iter().enumerate() {
                    for inner in &g.class(*c).nodes {
                        let Op::DimLit(a) = inner else { continue };
                        let rest = without_index(cs, p);
                        let Some(rs) = schema_union(g, &rest) else {
                            continue;
                        };
                        if rs.dim(a).is_none() {
                            out.push(Match {
                                root: q,
                                ids: cs.clone(),
                                attrs: vec![a.clone()],
                                tag: p as u16,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let rest = without_index(&m.ids, m.tag as usize);
        let body = joined(g, &rest)?;
        let agg = g.add(Op::RAgg([m.attrs[0].clone()].into_iter().collect(), body))?;
        let merged = g.merge(agg, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// Nested sums collapse into one sum over the combined attributes.
struct AggMerge;

impl Rule for AggMerge {
    fn name(&self) -> &'static str {
        "agg-merge"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(a, c) = node else {
                    continue;
                };
                for inner in &g.class(*c).nodes {
                    let Op::RAgg(b, x) = inner else { continue };
                    if a.is_disjoint(b) {
                        let mut names: Vec<String> = a.iter().cloned().collect();
                        names.extend(b.iter().cloned());
                        out.push(Match {
                            root: q,
                            ids: vec![*x],
                            attrs: names,
                            tag: a.len() as u16,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let attrs: BTreeSet<String> = m.attrs.iter().cloned().collect();
        let agg = g.add(Op::RAgg(attrs, m.ids[0]))?;
        let merged = g.merge(agg, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// A sum over several attributes can peel any one of them into an inner sum.
struct AggSplit;

impl Rule for AggSplit {
    fn name(&self) -> &'static str {
        "agg-split"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, x) = node else {
                    continue;
                };
                if attrs.len() < 2 {
                    continue;
                }
                for a in attrs {
                    let mut names = vec![a.clone()];
                    names.extend(attrs.iter().filter(|n| *n != a).cloned());
                    out.push(Match {
                        root: q,
                        ids: vec![*x],
                        attrs: names,
                        tag: 0,
                    });
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let inner = g.add(Op::RAgg(
            [m.attrs[0].clone()].into_iter().collect(),
            m.ids[0],
        ))?;
        let outer = g.add(Op::RAgg(m.attrs[1..].iter().cloned().collect(), inner))?;
        let merged = g.merge(outer, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// Σ_A (l ⋈ r) = Σ_rest ((Σ_Al l) ⋈ r) when the attributes Al only occur on
/// the left side — the heart of sum-product factoring.
struct AggPush;

impl Rule for AggPush {
    fn name(&self) -> &'static str {
        "agg-push"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, jc) = node else {
                    continue;
                };
                for jn in &g.class(*jc).nodes {
                    let Op::Join(cs) = jn else { continue };
                    for mask in partition_masks(cs.len()) {
                        let (l, r) = split(cs, mask);
                        let (Some(sl), Some(sr)) =
                            (schema_union(g, &l), schema_union(g, &r))
                        else {
                            continue;
                        };
                        // Either part can receive the sum; the high tag bit
                        // says which one (clear = left).
                        for (sa, sb, dir) in [(&sl, &sr, 0), (&sr, &sl, SWAP)] {
                            let movable = attrs
                                .iter()
                                .any(|a| sa.dim(a).is_some() && sb.dim(a).is_none());
                            if movable {
                                out.push(Match {
                                    root: q,
                                    ids: cs.clone(),
                                    attrs: attrs.iter().cloned().collect(),
                                    tag: mask | dir,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let (mut l, mut r) = split(&m.ids, m.tag & !SWAP);
        if m.tag & SWAP != 0 {
            std::mem::swap(&mut l, &mut r);
        }
        let (Some(sl), Some(sr)) = (schema_union(g, &l), schema_union(g, &r)) else {
            return Ok(false);
        };
        let pushed: BTreeSet<String> = m
            .attrs
            .iter()
            .filter(|a| sl.dim(a).is_some() && sr.dim(a).is_none())
            .cloned()
            .collect();
        if pushed.is_empty() {
            return Ok(false);
        }
        let before = g.n_nodes();
        let lid = joined(g, &l)?;
        let inner = g.add(Op::RAgg(pushed.clone(), lid))?;
        let mut outer_children = vec![inner];
        outer_children.extend(r);
        let body = g.add(Op::Join(outer_children))?;
        let rest: BTreeSet<String> = m
            .attrs
            .iter()
            .filter(|a| !pushed.contains(*a))
            .cloned()
            .collect();
        let result = if rest.is_empty() {
            body
        } else {
            g.add(Op::RAgg(rest, body))?
        };
        let merged = g.merge(result, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// The reverse: an inner sum whose attributes no sibling mentions floats out
/// of the join.
struct AggPull;

impl Rule for AggPull {
    fn name(&self) -> &'static str {
        "agg-pull"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                for (p, c) in cs.iter().enumerate() {
                    for inner in &g.class(*c).nodes {
                        let Op::RAgg(b, x) = inner else { continue };
                        let rest = without_index(cs, p);
                        let Some(rs) = schema_union(g, &rest) else {
                            continue;
                        };
                        if b.iter().all(|a| rs.dim(a).is_none()) {
                            out.push(Match {
                                root: q,
                                ids: {
                                    let mut v = cs.clone();
                                    v.push(*x);
                                    v
                                },
                                attrs: b.iter().cloned().collect(),
                                tag: p as u16,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let x = *m.ids.last().expect("pulled class");
        let cs = &m.ids[..m.ids.len() - 1];
        let mut children = without_index(cs, m.tag as usize);
        children.push(x);
        let body = g.add(Op::Join(children))?;
        let agg = g.add(Op::RAgg(m.attrs.iter().cloned().collect(), body))?;
        let merged = g.merge(agg, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// A sum of a sum-of-relations distributes over the summands.
struct AggUnion;

impl Rule for AggUnion {
    fn name(&self) -> &'static str {
        "agg-union"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, c) = node else {
                    continue;
                };
                let has_union = g.class(*c).nodes.iter().any(|n| match n {
                    Op::Union(us) => !mentions(g, us, *c) && !mentions(g, us, q),
                    _ => false,
                });
                if has_union {
                    out.push(Match {
                        root: q,
                        ids: vec![*c],
                        attrs: attrs.iter().cloned().collect(),
                        tag: 0,
                    });
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let attrs: BTreeSet<String> = m.attrs.iter().cloned().collect();
        let unions: Vec<Vec<Id>> = g
            .class(m.ids[0])
            .nodes
            .iter()
            .filter_map(|n| match n {
                Op::Union(us) if !mentions(g, us, m.ids[0]) && !mentions(g, us, m.root) => {
                    Some(us.clone())
                }
                _ => None,
            })
            .collect();
        let mut merged = false;
        for us in unions {
            let mut terms = Vec::with_capacity(us.len());
            for u in us {
                terms.push(g.add(Op::RAgg(attrs.clone(), u))?);
            }
            let un = unioned(g, &terms)?;
            merged |= g.merge(un, m.root)?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// The reverse: a sum of equal-attribute aggregates is one aggregate of the
/// summands.
struct UnionAgg;

impl Rule for UnionAgg {
    fn name(&self) -> &'static str {
        "union-agg"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Union(cs) = node else {
                    continue;
                };
                let mut common: Option<BTreeSet<BTreeSet<String>>> = None;
                for c in cs {
                    let sets: BTreeSet<BTreeSet<String>> = g
                        .class(*c)
                        .nodes
                        .iter()
                        .filter_map(|n| match n {
                            Op::RAgg(a, _) => Some(a.clone()),
                            _ => None,
                        })
                        .collect();
                    common = Some(match common {
                        None => sets,
                        Some(prev) => prev.intersection(&sets).cloned().collect(),
                    });
                    if common.as_ref().is_some_and(BTreeSet::is_empty) {
                        break;
                    }
                }
                for attrs in common.unwrap_or_default() {
                    out.push(Match {
                        root: q,
                        ids: cs.clone(),
                        attrs: attrs.into_iter().collect(),
                        tag: 0,
                    });
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let attrs: BTreeSet<String> = m.attrs.iter().cloned().collect();
        let mut inner = Vec::with_capacity(m.ids.len());
        for c in &m.ids {
            let found = g.class(*c).nodes.iter().find_map(|n| match n {
                Op::RAgg(a, x) if *a == attrs => Some(*x),
                _ => None,
            });
            match found {
                Some(x) => inner.push(x),
                None => return Ok(false),
            }
        }
        let before = g.n_nodes();
        let un = unioned(g, &inner)?;
        let agg = g.add(Op::RAgg(attrs, un))?;
        let merged = g.merge(agg, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

/// A join against a sum distributes into a sum of joins.
struct JoinDistribute;

impl Rule for JoinDistribute {
    fn name(&self) -> &'static str {
        "join-distribute"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                for (p, c) in cs.iter().enumerate() {
                    let has_union = g.class(*c).nodes.iter().any(|n| match n {
                        Op::Union(us) => !mentions(g, us, *c) && !mentions(g, us, q),
                        _ => false,
                    });
                    if has_union {
                        out.push(Match {
                            root: q,
                            ids: cs.clone(),
                            attrs: Vec::new(),
                            tag: p as u16,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let before = g.n_nodes();
        let rest = without_index(&m.ids, m.tag as usize);
        let pivot = m.ids[m.tag as usize];
        let unions: Vec<Vec<Id>> = g
            .class(pivot)
            .nodes
            .iter()
            .filter_map(|n| match n {
                Op::Union(us) if !mentions(g, us, pivot) && !mentions(g, us, m.root) => {
                    Some(us.clone())
                }
                _ => None,
            })
            .collect();
        let mut merged = false;
        for us in unions {
            let mut terms = Vec::with_capacity(us.len());
            for u in us {
                let mut children = rest.clone();
                children.push(u);
                terms.push(g.add(Op::Join(children))?);
            }
            let un = unioned(g, &terms)?;
            merged |= g.merge(un, m.root)?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// The reverse: a sum whose summands share a factor pulls it out. A summand
/// equal to the factor itself contributes a quotient of 1.
struct UnionFactor;

impl Rule for UnionFactor {
    fn name(&self) -> &'static str {
        "union-factor"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::Union(cs) = node else {
                    continue;
                };
                let mut common: Option<BTreeSet<Id>> = None;
                for c in cs {
                    let mut divisors: BTreeSet<Id> = [g.find(*c)].into();
                    for n in &g.class(*c).nodes {
                        if let Op::Join(jcs) = n {
                            if !mentions(g, jcs, *c) {
                                divisors.extend(jcs.iter().map(|ch| g.find(*ch)));
                            }
                        }
                    }
                    common = Some(match common {
                        None => divisors,
                        Some(prev) => prev.intersection(&divisors).cloned().collect(),
                    });
                    if common.as_ref().is_some_and(BTreeSet::is_empty) {
                        break;
                    }
                }
                for x in common.unwrap_or_default().into_iter().take(MAX_DIVISORS) {
                    let mut ids = cs.clone();
                    ids.push(x);
                    out.push(Match {
                        root: q,
                        ids,
                        attrs: Vec::new(),
                        tag: cs.len() as u16,
                    });
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let cs = &m.ids[..m.tag as usize];
        let x = g.find(m.ids[m.tag as usize]);
        let mut quotients = Vec::with_capacity(cs.len());
        for c in cs {
            if g.find(*c) == x {
                quotients.push(None); // a literal 1, added lazily below
                continue;
            }
            let q = g.class(*c).nodes.iter().find_map(|n| match n {
                Op::Join(jcs) if !mentions(g, jcs, *c) => jcs
                    .iter()
                    .position(|ch| g.find(*ch) == x)
                    .map(|p| without_index(jcs, p)),
                _ => None,
            });
            match q {
                Some(rest) => quotients.push(Some(rest)),
                None => return Ok(false),
            }
        }
        let before = g.n_nodes();
        let mut qids = Vec::with_capacity(quotients.len());
        for q in quotients {
            qids.push(match q {
                None => g.add(Op::lit(1.0))?,
                Some(rest) => joined(g, &rest)?,
            });
        }
        let uq = unioned(g, &qids)?;
        let fact = g.add(Op::Join(vec![x, uq]))?;
        let merged = g.merge(fact, m.root)?;
        Ok(changed_since(g, before, merged))
    }
}

// ---- reverse translations: relational shapes back to matrices ----

/// An aggregate that consumes attributes of a narrow relation is a matrix
/// sum: over everything, over rows, or over columns.
struct AggToSum;

impl Rule for AggToSum {
    fn name(&self) -> &'static str {
        "agg-to-sum"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, r) = node else {
                    continue;
                };
                let Some(s) = schema_of(g, *r) else { continue };
                if s.len() > 2 || s.is_empty() {
                    continue;
                }
                if attrs.iter().all(|a| s.dim(a).is_some()) {
                    out.push(Match {
                        root: q,
                        ids: vec![*r],
                        attrs: attrs.iter().cloned().collect(),
                        tag: 0,
                    });
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let r = m.ids[0];
        let Some(s) = schema_of(g, r) else {
            return Ok(false);
        };
        let names = sorted_names(&s);
        let dies: BTreeSet<&String> = m.attrs.iter().collect();
        let before = g.n_nodes();
        // Either attribute may play the row; reading both orientations back
        // keeps the matrix level closed under transposition.
        let orients: [(Option<&String>, Option<&String>); 2] = match names.len() {
            1 => [(Some(&names[0]), None), (None, Some(&names[0]))],
            _ => [
                (Some(&names[0]), Some(&names[1])),
                (Some(&names[1]), Some(&names[0])),
            ],
        };
        let mut merged = false;
        for (orow, ocol) in orients {
            let u = g.add(Op::Unbind {
                e: r,
                row: orow.cloned(),
                col: ocol.cloned(),
            })?;
            let (la, row, col) = if dies.len() == names.len() {
                (g.add(Op::Agg(u))?, None, None)
            } else if orow.is_some_and(|a| dies.contains(a)) {
                (g.add(Op::ColAgg(u))?, None, ocol)
            } else {
                (g.add(Op::RowAgg(u))?, orow, None)
            };
            merged |= connect(g, la, m.root, row, col)?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// Σ_k of a join that pairs up through k alone is a matrix product. Both
/// operand orders are produced; they are each other's transposes.
struct AggJoinToMMult;

impl Rule for AggJoinToMMult {
    fn name(&self) -> &'static str {
        "agg-join-to-mmult"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            for node in &g.class(q).nodes {
                let Op::RAgg(attrs, jc) = node else {
                    continue;
                };
                if attrs.len() != 1 {
                    continue;
                }
                let k = attrs.iter().next().expect("one attr");
                for jn in &g.class(*jc).nodes {
                    let Op::Join(cs) = jn else { continue };
                    for mask in partition_masks(cs.len()) {
                        let (l, r) = split(cs, mask);
                        let (Some(sl), Some(sr)) =
                            (schema_union(g, &l), schema_union(g, &r))
                        else {
                            continue;
                        };
                        let shared_only_k = sl.dim(k).is_some()
                            && sr.dim(k).is_some()
                            && sl
                                .iter()
                                .all(|(n, _)| n == k.as_str() || sr.dim(n).is_none());
                        if shared_only_k && sl.len() <= 2 && sr.len() <= 2 {
                            out.push(Match {
                                root: q,
                                ids: cs.clone(),
                                attrs: vec![k.clone()],
                                tag: mask,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let k = &m.attrs[0];
        let (l, r) = split(&m.ids, m.tag);
        let before = g.n_nodes();
        let lid = joined(g, &l)?;
        let rid = joined(g, &r)?;
        let (Some(sl), Some(sr)) = (schema_of(g, lid), schema_of(g, rid)) else {
            return Ok(false);
        };
        let al = sorted_names(&sl).into_iter().find(|n| n != k);
        let ar = sorted_names(&sr).into_iter().find(|n| n != k);
        let mut merged = false;
        for (first, fa, second, sa) in [(lid, &al, rid, &ar), (rid, &ar, lid, &al)] {
            let el = g.add(Op::Unbind {
                e: first,
                row: fa.clone(),
                col: Some(k.clone()),
            })?;
            let er = g.add(Op::Unbind {
                e: second,
                row: Some(k.clone()),
                col: sa.clone(),
            })?;
            let la = g.add(Op::MMult([el, er]))?;
            merged |= connect(g, la, m.root, fa.as_ref(), sa.as_ref())?;
        }
        Ok(changed_since(g, before, merged))
    }
}

/// A two-way split of a join over a narrow schema is a pointwise product or
/// an outer product, depending on how the parts share attributes.
struct JoinToMult;

impl JoinToMult {
    /// Decide the matrix op for a split without mutating the graph; returns
    /// the op constructor choice: 0 = pointwise, 1 = l*r, 2 = r*l.
    fn classify(
        sq: &Schema,
        sl: &Schema,
        sr: &Schema,
        a0: Option<&String>,
        a1: Option<&String>,
    ) -> Option<u8> {
        let el = shape_within(sl, a0, a1);
        let er = shape_within(sr, a0, a1);
        let expected = shape_within(sq, a0, a1);
        if broadcast(el, er) == Some(expected) {
            return Some(0);
        }
        if el.cols() == er.rows() && LaShape::mat(el.rows(), er.cols()) == expected {
            return Some(1);
        }
        if er.cols() == el.rows() && LaShape::mat(er.rows(), el.cols()) == expected {
            return Some(2);
        }
        None
    }
}

impl Rule for JoinToMult {
    fn name(&self) -> &'static str {
        "join-to-mult"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            let Some(sq) = schema_of(g, q) else { continue };
            if sq.len() > 2 {
                continue;
            }
            let names = sorted_names(&sq);
            for node in &g.class(q).nodes {
                let Op::Join(cs) = node else {
                    continue;
                };
                for mask in partition_masks(cs.len()) {
                    let (l, r) = split(cs, mask);
                    let (Some(sl), Some(sr)) = (schema_union(g, &l), schema_union(g, &r))
                    else {
                        continue;
                    };
                    if Self::classify(&sq, &sl, &sr, names.first(), names.get(1)).is_some() {
                        out.push(Match {
                            root: q,
                            ids: cs.clone(),
                            attrs: Vec::new(),
                            tag: mask,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let Some(sq) = schema_of(g, m.root) else {
            return Ok(false);
        };
        let names = sorted_names(&sq);
        let (a0, a1) = (names.first(), names.get(1));
        let (l, r) = split(&m.ids, m.tag);
        let before = g.n_nodes();
        let lid = joined(g, &l)?;
        let rid = joined(g, &r)?;
        let (Some(sl), Some(sr)) = (schema_of(g, lid), schema_of(g, rid)) else {
            return Ok(false);
        };
        let Some(choice) = Self::classify(&sq, &sl, &sr, a0, a1) else {
            return Ok(false);
        };
        let el = unbind_slots(g, lid, &sl, a0, a1)?;
        let er = unbind_slots(g, rid, &sr, a0, a1)?;
        let la = match choice {
            0 => g.add(Op::ElemMult([el, er]))?,
            1 => g.add(Op::MMult([el, er]))?,
            _ => g.add(Op::MMult([er, el]))?,
        };
        let merged = connect(g, la, m.root, a0, a1)?;
        Ok(changed_since(g, before, merged))
    }
}

/// A two-way split of a sum over a narrow schema is a pointwise sum.
struct UnionToPlus;

impl Rule for UnionToPlus {
    fn name(&self) -> &'static str {
        "union-to-plus"
    }

    fn search(&self, g: &EGraph) -> Vec<Match> {
        let mut out = Vec::new();
        for q in g.class_ids() {
            let Some(sq) = schema_of(g, q) else { continue };
            if sq.len() > 2 {
                continue;
            }
            let names = sorted_names(&sq);
            for node in &g.class(q).nodes {
                let Op::Union(cs) = node else {
                    continue;
                };
                for mask in partition_masks(cs.len()) {
                    let (l, r) = split(cs, mask);
                    let (Some(sl), Some(sr)) = (schema_union(g, &l), schema_union(g, &r))
                    else {
                        continue;
                    };
                    let el = shape_within(&sl, names.first(), names.get(1));
                    let er = shape_within(&sr, names.first(), names.get(1));
                    let expected = shape_within(&sq, names.first(), names.get(1));
                    if broadcast(el, er) == Some(expected) {
                        out.push(Match {
                            root: q,
                            ids: cs.clone(),
                            attrs: Vec::new(),
                            tag: mask,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError> {
        let Some(sq) = schema_of(g, m.root) else {
            return Ok(false);
        };
        let names = sorted_names(&sq);
        let (a0, a1) = (names.first(), names.get(1));
        let (l, r) = split(&m.ids, m.tag);
        let before = g.n_nodes();
        let lid = unioned(g, &l)?;
        let rid = unioned(g, &r)?;
        let (Some(sl), Some(sr)) = (schema_of(g, lid), schema_of(g, rid)) else {
            return Ok(false);
        };
        let el = shape_within(&sl, a0, a1);
        let er = shape_within(&sr, a0, a1);
        if broadcast(el, er) != Some(shape_within(&sq, a0, a1)) {
            return Ok(false);
        }
        let eli = unbind_slots(g, lid, &sl, a0, a1)?;
        let eri = unbind_slots(g, rid, &sr, a0, a1)?;
        let la = g.add(Op::ElemPlus([eli, eri]))?;
        let merged = connect(g, la, m.root, a0, a1)?;
        Ok(changed_since(g, before, merged))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egraph::EGraph;
    use crate::ir::{parse_la, Catalog, MatrixInfo};
    use crate::rules::{ingest, Lowered};

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("A", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("B", 20, 30)).unwrap();
        c.insert(MatrixInfo::dense("C", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("D", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("E", 30, 5)).unwrap();
        c.insert(MatrixInfo::dense("x", 20, 1)).unwrap();
        c.insert(MatrixInfo::dense("y", 20, 1)).unwrap();
        c.insert(MatrixInfo::sparse("X", 1000, 1000, 100)).unwrap();
        c
    }

    /// Apply every rule exhaustively (no sampling) for up to `passes`
    /// rounds, stopping early once a full round changes nothing.
    fn run(g: &mut EGraph, passes: usize) {
        let rules = all();
        for _ in 0..passes {
            let mut changed = false;
            for r in &rules {
                for m in r.search(g) {
                    changed |= r.apply(g, &m).unwrap();
                }
                g.rebuild().unwrap();
            }
            if !changed {
                break;
            }
        }
    }

    fn ingested(g: &mut EGraph, src: &str) -> Lowered {
        let e = parse_la(src).unwrap();
        let low = ingest(g, &e).unwrap();
        g.rebuild().unwrap();
        low
    }

    #[test]
    fn double_transposes_collapse() {
        let mut g = EGraph::new(cat());
        let a = ingested(&mut g, "A");
        let t = ingested(&mut g, "t(t(A))");
        run(&mut g, 3);
        assert_eq!(g.find(a.la), g.find(t.la));
    }

    #[test]
    fn inner_products_read_back_as_transposed_products() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "sum(x * y)");
        let r = ingested(&mut g, "t(x) %*% y");
        run(&mut g, 6);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn self_subtraction_becomes_empty() {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, "X - X");
        run(&mut g, 5);
        assert_eq!(g.meta(low.la).sparsity, 0.0);
    }

    #[test]
    fn products_distribute_and_refactor() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "A * (C + D)");
        let r = ingested(&mut g, "A * C + A * D");
        run(&mut g, 8);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn transposed_products_reverse_their_operands() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "t(A %*% B)");
        let r = ingested(&mut g, "t(B) %*% t(A)");
        run(&mut g, 10);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn matrix_products_associate() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "A %*% (B %*% E)");
        let r = ingested(&mut g, "(A %*% B) %*% E");
        run(&mut g, 10);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn sums_nest_in_any_order() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "(C + D) + A");
        let r = ingested(&mut g, "C + (D + A)");
        run(&mut g, 8);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn full_sums_collapse_partial_sums() {
        let mut g = EGraph::new(cat());
        let rows = ingested(&mut g, "sum(rowSums(A))");
        let cols = ingested(&mut g, "sum(colSums(A))");
        let full = ingested(&mut g, "sum(A)");
        run(&mut g, 8);
        assert_eq!(g.find(rows.la), g.find(full.la));
        assert_eq!(g.find(cols.la), g.find(full.la));
    }

    #[test]
    fn sums_distribute_over_addition() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "sum(C + D)");
        let r = ingested(&mut g, "sum(C) + sum(D)");
        run(&mut g, 8);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn multiplying_by_one_is_identity() {
        let mut g = EGraph::new(cat());
        let a = ingested(&mut g, "A");
        let m = ingested(&mut g, "A * 1");
        run(&mut g, 4);
        assert_eq!(g.find(a.la), g.find(m.la));
    }

    #[test]
    fn subtraction_is_plus_negated() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "C - D");
        let r = ingested(&mut g, "C + (0 - 1) * D");
        run(&mut g, 6);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn repeated_factors_become_powers() {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, "x * x * x");
        run(&mut g, 4);
        let cube = g
            .class(low.la)
            .nodes
            .iter()
            .any(|n| matches!(n, Op::ElemPow(_, 3)));
        assert!(cube, "x*x*x folds into a cube node");
    }

    #[test]
    fn aggregating_missing_attrs_multiplies_by_their_size() {
        let mut g = EGraph::new(cat());
        ingested(&mut g, "sum(X)"); // declares the X attributes at size 1000
        let three = g.add(Op::lit(3.0)).unwrap();
        let agg = g
            .add(Op::RAgg(["a0".to_string()].into_iter().collect(), three))
            .unwrap();
        g.rebuild().unwrap();
        assert_eq!(g.meta(agg).constant, Some(3000.0));
        run(&mut g, 3);
        let spelled_out = g
            .class(agg)
            .nodes
            .iter()
            .any(|n| matches!(n, Op::Join(_)));
        assert!(spelled_out, "the aggregate factors into size * body");
    }
}
