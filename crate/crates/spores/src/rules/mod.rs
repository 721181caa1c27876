//! Rewrite rules over the e-graph, and the ingestion pass that seeds it.
//!
//! Ingestion lowers a matrix expression into the graph twice over: once as
//! matrix-level nodes, once as their relational form, tying each subterm to
//! its relation with bind/unbind links. Attribute names are allocated fresh
//! top-down, so one expression gets one coherent naming and rules never have
//! to invent names of their own.
//!
//! Each rule is a searcher over a frozen graph plus an applier that adds
//! nodes and merges classes. Appliers rely on a load-bearing property of
//! e-graphs: classes only ever gain nodes, so a match found earlier can at
//! worst become redundant, never wrong.

mod rewrites;

use crate::egraph::{EGraph, Id, Op, RuleError};
use crate::ir::LAExpr;

/// One place a rule fired: the class it anchors to plus whatever ids,
/// attribute names, and discriminant the rule needs to replay the rewrite.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub root: Id,
    pub ids: Vec<Id>,
    pub attrs: Vec<String>,
    pub tag: u16,
}

impl Match {
    fn with_ids(root: Id, ids: Vec<Id>) -> Match {
        Match {
            root,
            ids,
            attrs: Vec::new(),
            tag: 0,
        }
    }
}

pub trait Rule {
    fn name(&self) -> &'static str;
    fn search(&self, g: &EGraph) -> Vec<Match>;
    /// Replay a match; returns whether the graph changed.
    fn apply(&self, g: &mut EGraph, m: &Match) -> Result<bool, RuleError>;
}

pub fn all_rules() -> Vec<Box<dyn Rule>> {
    rewrites::all()
}

// ---- shared construction helpers ----

/// Join of one or more classes (a single class is itself).
pub(crate) fn joined(g: &mut EGraph, ids: &[Id]) -> Result<Id, RuleError> {
    match ids.len() {
        0 => Err(RuleError::Node("empty join".into())),
        1 => Ok(ids[0]),
        _ => g.add(Op::Join(ids.to_vec())),
    }
}

/// Sum of one or more classes (a single class is itself).
pub(crate) fn unioned(g: &mut EGraph, ids: &[Id]) -> Result<Id, RuleError> {
    match ids.len() {
        0 => Err(RuleError::Node("empty union".into())),
        1 => Ok(ids[0]),
        _ => g.add(Op::Union(ids.to_vec())),
    }
}

/// Tie a matrix-level class and its relational form together. With no
/// attributes the two are the same scalar and simply merge; otherwise both
/// conversion links are recorded so either side can reach the other.
pub(crate) fn connect(
    g: &mut EGraph,
    la: Id,
    rel: Id,
    row: Option<&String>,
    col: Option<&String>,
) -> Result<bool, RuleError> {
    if row.is_none() && col.is_none() {
        return g.merge(la, rel);
    }
    let ub = g.add(Op::Unbind {
        e: rel,
        row: row.cloned(),
        col: col.cloned(),
    })?;
    let c1 = g.merge(ub, la)?;
    let b = g.add(Op::Bind {
        m: la,
        row: row.cloned(),
        col: col.cloned(),
    })?;
    let c2 = g.merge(b, rel)?;
    Ok(c1 || c2)
}

/// The relational form of a matrix-level class under the given names:
/// scalar classes are their own relation, anything else gets a bind node
/// (plus the unbind link back).
fn bind_to(
    g: &mut EGraph,
    la: Id,
    row: Option<&String>,
    col: Option<&String>,
) -> Result<Id, RuleError> {
    if row.is_none() && col.is_none() {
        return Ok(la);
    }
    let rel = g.add(Op::Bind {
        m: la,
        row: row.cloned(),
        col: col.cloned(),
    })?;
    let ub = g.add(Op::Unbind {
        e: rel,
        row: row.cloned(),
        col: col.cloned(),
    })?;
    g.merge(ub, la)?;
    Ok(rel)
}

// ---- ingestion ----

pub struct Lowered {
    pub la: Id,
    pub rel: Id,
}

/// Add an expression to the graph in both framings. Returns the matrix-level
/// root and its relational twin. Call [`EGraph::rebuild`] afterwards.
pub fn ingest(g: &mut EGraph, e: &LAExpr) -> Result<Lowered, RuleError> {
    let shape = e
        .shape(&g.cat)
        .map_err(|err| RuleError::Node(err.to_string()))?;
    let row = (shape.rows() > 1).then(|| g.fresh_attr());
    let col = (shape.cols() > 1).then(|| g.fresh_attr());
    lower(g, e, row.as_ref(), col.as_ref())
}

/// Lower a subterm whose row/col axes are named by the caller (`None` for a
/// size-1 axis). Children of broadcasting operators get the parent's name
/// only on axes they actually span.
fn lower(
    g: &mut EGraph,
    e: &LAExpr,
    row: Option<&String>,
    col: Option<&String>,
) -> Result<Lowered, RuleError> {
    match e {
        LAExpr::Mat(name) => {
            let la = g.add(Op::MatRef(name.clone()))?;
            Ok(Lowered {
                la,
                rel: bind_to(g, la, row, col)?,
            })
        }
        LAExpr::Lit(v) => {
            let la = g.add(Op::lit(*v))?;
            Ok(Lowered { la, rel: la })
        }
        LAExpr::Transpose(x) => {
            let inner = lower(g, x, col, row)?;
            let la = g.add(Op::Transpose(inner.la))?;
            connect(g, la, inner.rel, row, col)?;
            Ok(Lowered { la, rel: inner.rel })
        }
        LAExpr::ElemMult(a, b) => {
            let (pa, pb) = (project(g, a, row, col)?, project(g, b, row, col)?);
            let la = g.add(Op::ElemMult([pa.la, pb.la]))?;
            let rel = g.add(Op::Join(vec![pa.rel, pb.rel]))?;
            connect(g, la, rel, row, col)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::ElemPlus(a, b) => {
            let (pa, pb) = (project(g, a, row, col)?, project(g, b, row, col)?);
            let la = g.add(Op::ElemPlus([pa.la, pb.la]))?;
            let rel = g.add(Op::Union(vec![pa.rel, pb.rel]))?;
            connect(g, la, rel, row, col)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::ElemMinus(a, b) => {
            let (pa, pb) = (project(g, a, row, col)?, project(g, b, row, col)?);
            let la = g.add(Op::ElemMinus([pa.la, pb.la]))?;
            let neg1 = g.add(Op::lit(-1.0))?;
            let nb = g.add(Op::Join(vec![neg1, pb.rel]))?;
            let rel = g.add(Op::Union(vec![pa.rel, nb]))?;
            connect(g, la, rel, row, col)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::ElemPow(x, k) => {
            let inner = lower(g, x, row, col)?;
            let la = g.add(Op::ElemPow(inner.la, *k))?;
            let rel = if row.is_none() && col.is_none() {
                la
            } else {
                let r = g.add(Op::Join(vec![inner.rel; *k as usize]))?;
                connect(g, la, r, row, col)?;
                r
            };
            Ok(Lowered { la, rel })
        }
        LAExpr::MMult(a, b) => {
            let (m, l) = dims_of(g, a)?;
            let (_, n) = dims_of(g, b)?;
            let inner_attr = (l > 1).then(|| g.fresh_attr());
            let pa = lower(g, a, (m > 1).then_some(row).flatten(), inner_attr.as_ref())?;
            let pb = lower(g, b, inner_attr.as_ref(), (n > 1).then_some(col).flatten())?;
            let la = g.add(Op::MMult([pa.la, pb.la]))?;
            let body = g.add(Op::Join(vec![pa.rel, pb.rel]))?;
            let rel = match inner_attr {
                Some(k) => g.add(Op::RAgg([k].into_iter().collect(), body))?,
                None => body,
            };
            connect(g, la, rel, row, col)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::RowAgg(x) => {
            let (_, n) = dims_of(g, x)?;
            let dying = (n > 1).then(|| g.fresh_attr());
            let inner = lower(g, x, row, dying.as_ref())?;
            let la = g.add(Op::RowAgg(inner.la))?;
            let rel = match dying {
                Some(c) => g.add(Op::RAgg([c].into_iter().collect(), inner.rel))?,
                None => inner.rel,
            };
            connect(g, la, rel, row, None)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::ColAgg(x) => {
            let (m, _) = dims_of(g, x)?;
            let dying = (m > 1).then(|| g.fresh_attr());
            let inner = lower(g, x, dying.as_ref(), col)?;
            let la = g.add(Op::ColAgg(inner.la))?;
            let rel = match dying {
                Some(r) => g.add(Op::RAgg([r].into_iter().collect(), inner.rel))?,
                None => inner.rel,
            };
            connect(g, la, rel, None, col)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::Agg(x) => {
            let (m, n) = dims_of(g, x)?;
            let ra = (m > 1).then(|| g.fresh_attr());
            let ca = (n > 1).then(|| g.fresh_attr());
            let inner = lower(g, x, ra.as_ref(), ca.as_ref())?;
            let la = g.add(Op::Agg(inner.la))?;
            let attrs: std::collections::BTreeSet<String> =
                ra.into_iter().chain(ca).collect();
            let rel = if attrs.is_empty() {
                inner.rel
            } else {
                g.add(Op::RAgg(attrs, inner.rel))?
            };
            g.merge(la, rel)?;
            Ok(Lowered { la, rel })
        }
        LAExpr::Call(name, args) => {
            // opaque calls act like leaves: their arguments are lowered as
            // independent subplans and the call itself binds like a matrix
            let mut arg_las = Vec::with_capacity(args.len());
            for a in args {
                arg_las.push(ingest(g, a)?.la);
            }
            let la = g.add(Op::Call(name.clone(), arg_las))?;
            Ok(Lowered {
                la,
                rel: bind_to(g, la, row, col)?,
            })
        }
    }
}

fn dims_of(g: &EGraph, e: &LAExpr) -> Result<(u64, u64), RuleError> {
    let s = e
        .shape(&g.cat)
        .map_err(|err| RuleError::Node(err.to_string()))?;
    Ok((s.rows(), s.cols()))
}

/// Lower a broadcasting operand: it carries the parent's attribute only on
/// axes it spans itself.
fn project(
    g: &mut EGraph,
    e: &LAExpr,
    row: Option<&String>,
    col: Option<&String>,
) -> Result<Lowered, RuleError> {
    let (m, n) = dims_of(g, e)?;
    lower(
        g,
        e,
        if m > 1 { row } else { None },
        if n > 1 { col } else { None },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egraph::Kind;
    use crate::ir::{parse_la, Catalog, MatrixInfo};

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("A", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("B", 20, 30)).unwrap();
        c.insert(MatrixInfo::dense("x", 20, 1)).unwrap();
        c.declare_func("relu", 1).unwrap();
        c
    }

    fn ingested(src: &str) -> (EGraph, Lowered) {
        let mut g = EGraph::new(cat());
        let e = parse_la(src).unwrap();
        let low = ingest(&mut g, &e).unwrap();
        g.rebuild().unwrap();
        (g, low)
    }

    #[test]
    fn product_gets_aggregated_join_form() {
        let (g, low) = ingested("A %*% B");
        assert_eq!(g.meta(low.la).kind, Kind::mat(10, 30));
        let rel = g.class(low.rel);
        assert!(
            rel.nodes.iter().any(|n| matches!(n, Op::RAgg(..))),
            "product lowers to a sum over the shared attribute"
        );
        match &g.meta(low.rel).kind {
            Kind::Rel(s) => assert_eq!(s.size(), 300),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn full_sum_merges_scalar_framings() {
        let (g, low) = ingested("sum(A %*% B)");
        assert_eq!(g.find(low.la), g.find(low.rel));
        assert_eq!(g.meta(low.la).kind, Kind::Scalar);
    }

    #[test]
    fn broadcast_operand_only_spans_its_own_axes() {
        // A is 10x20, x is 20x1: A %*% x is a 10-vector, bound on one attr
        let (g, low) = ingested("A %*% x");
        assert_eq!(g.meta(low.la).kind, Kind::mat(10, 1));
        match &g.meta(low.rel).kind {
            Kind::Rel(s) => assert_eq!(s.len(), 1),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn scalar_literals_are_their_own_relation() {
        let (g, low) = ingested("sum(A) * 3");
        assert_eq!(g.meta(low.la).kind, Kind::Scalar);
        assert_eq!(g.find(low.la), g.find(low.rel));
    }

    #[test]
    fn opaque_calls_bind_like_leaves() {
        let (g, low) = ingested("relu(A) * A");
        assert_eq!(g.meta(low.la).kind, Kind::mat(10, 20));
        // the call's class carries a bind node into the join
        let rel = g.class(low.rel);
        assert!(rel.nodes.iter().any(|n| matches!(n, Op::Join(_))));
    }

    #[test]
    fn transpose_reuses_the_operand_relation() {
        let (g, low) = ingested("t(A)");
        assert_eq!(g.meta(low.la).kind, Kind::mat(20, 10));
        // the relation is A's own bind, reoriented rather than renamed
        let rel = g.class(low.rel);
        assert!(rel.nodes.iter().any(|n| matches!(n, Op::Bind { .. })));
        assert_eq!(g.attr_dims().get("a0"), Some(20), "rows of t(A)");
        assert_eq!(g.attr_dims().get("a1"), Some(10));
    }

    #[test]
    fn ingest_twice_dedups_via_hashcons() {
        let mut g = EGraph::new(cat());
        let e = parse_la("sum(A %*% B)").unwrap();
        let l1 = ingest(&mut g, &e).unwrap();
        let n1 = g.n_nodes();
        let l2 = ingest(&mut g, &e).unwrap();
        g.rebuild().unwrap();
        assert_eq!(g.find(l1.la), g.find(l2.la));
        // fresh attr names make fresh binds, but the matrix-level nodes and
        // the overall class structure are shared
        assert!(g.n_nodes() < n1 * 2);
    }
}
