//! Plan extraction: turn a saturated e-graph back into one executable
//! linear-algebra expression, picking the cheapest equivalent the graph holds.
//!
//! Cost is sparsity-aware: a node's cost is the estimated number of nonzero
//! entries it materializes (class sparsity x result size). Matrix references,
//! literals, and transposes cost nothing; relational nodes are never
//! executable, so they price at infinity and can't be chosen.
//!
//! Two extractors share that model. [`extract_greedy`] runs a bottom-up
//! fixpoint where each class's score counts shared children once per
//! occurrence — cheap, but blind to reuse. [`extract_ilp`] (in [`ilp`]) solves
//! the selection exactly, charging every distinct node once, so plans with
//! common subexpressions can beat the greedy answer.

mod ilp;

pub use ilp::{extract_ilp, extract_ilp_with_budget, DEFAULT_ILP_STEPS};

use crate::egraph::{EGraph, Id, Kind, Op};
use crate::ir::LAExpr;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Slack for cost comparisons; differences below this are ties.
pub(crate) const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExtractError {
    /// No member of the root class bottoms out in executable operators.
    #[error("no linear-algebra plan: {0}")]
    NoPlan(String),
}

/// Prices one e-graph node by what executing it would materialize.
pub trait Cost {
    fn node_cost(&self, g: &EGraph, class: Id, op: &Op) -> f64;
}

/// Any closure with the right shape works as a cost model (tests use this to
/// pin exact node prices).
impl<F: Fn(&EGraph, Id, &Op) -> f64> Cost for F {
    fn node_cost(&self, g: &EGraph, class: Id, op: &Op) -> f64 {
        self(g, class, op)
    }
}

/// The default sparsity-aware model: cost = expected nonzeros of the result.
///
/// A multiply whose result class is known sparse is cheap no matter how large
/// its inputs are, which is exactly what lets a factored plan win. Reading a
/// stored matrix and transposing are metadata moves and cost 0. Relational
/// operators and attribute plumbing (`Bind`/`Unbind`/`Rename`/`Join`/`Union`/
/// grouped aggregates/dimension literals) have no executable form, so they
/// cost infinity; saturation always leaves a matrix-level twin in the class
/// when one exists.
pub struct CostModel;

impl Cost for CostModel {
    fn node_cost(&self, g: &EGraph, class: Id, op: &Op) -> f64 {
        use Op::*;
        match op {
            MatRef(_) | Lit(_) | Transpose(_) => 0.0,
            MMult(_) | ElemMult(_) | ElemPlus(_) | ElemMinus(_) | ElemPow(..) | RowAgg(_)
            | ColAgg(_) | Agg(_) | Call(..) => match g.meta(class).kind {
                Kind::Scalar | Kind::Mat { .. } => g.meta(class).nnz(),
                Kind::Rel(_) => f64::INFINITY,
            },
            DimLit(_) | Bind { .. } | Unbind { .. } | Join(_) | Union(_) | RAgg(..)
            | Rename(..) => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Greedy,
    Ilp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Ilp => "ilp",
        }
    }
}

/// One chosen node per participating class, rooted at `root`. Shared classes
/// appear once in `choices` even when several parents reference them; that is
/// where the exact extractor's advantage lives.
#[derive(Clone, Debug)]
pub struct ExtractedPlan {
    pub root: Id,
    /// Canonical class id -> the member node selected for it.
    pub choices: BTreeMap<Id, Op>,
    /// Sum of chosen node costs, each distinct node counted once.
    pub total_cost: f64,
    pub method: Method,
    /// True when the exact solver ran out of budget and the greedy plan was
    /// returned in its place.
    pub fallback: bool,
}

impl ExtractedPlan {
    pub fn node_count(&self) -> usize {
        self.choices.len()
    }

    /// Re-price the plan from scratch: every distinct chosen node once. Tests
    /// use this to confirm the reported total matches the selection.
    pub fn distinct_cost(&self, g: &EGraph, cost: &dyn Cost) -> f64 {
        self.choices
            .iter()
            .map(|(&c, op)| cost.node_cost(g, c, op))
            .sum()
    }

    /// A topological order over the chosen classes, or `None` if the selection
    /// is cyclic or references a class with no choice. Extractors assert this
    /// holds before returning a plan.
    pub fn topo_order(&self) -> Option<Vec<Id>> {
        let mut indeg: BTreeMap<Id, usize> = self.choices.keys().map(|&c| (c, 0)).collect();
        for op in self.choices.values() {
            for kid in op.children() {
                *indeg.get_mut(&kid)? += 1;
            }
        }
        let mut ready: BTreeSet<Id> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&c, _)| c)
            .collect();
        let mut order = Vec::with_capacity(self.choices.len());
        while let Some(&c) = ready.iter().next() {
            ready.remove(&c);
            order.push(c);
            for kid in self.choices[&c].children() {
                let d = indeg.get_mut(&kid).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(kid);
                }
            }
        }
        (order.len() == self.choices.len()).then(|| {
            order.reverse(); // children before parents
            order
        })
    }

    /// Expand the plan DAG into an expression tree. Shared classes print once
    /// per reference; the cost accounting is not affected.
    pub fn to_la(&self) -> LAExpr {
        self.expr_at(self.root)
    }

    fn expr_at(&self, class: Id) -> LAExpr {
        use Op::*;
        let sub = |id: &Id| Box::new(self.expr_at(*id));
        match &self.choices[&class] {
            MatRef(name) => LAExpr::Mat(name.clone()),
            Lit(v) => LAExpr::Lit(v.into_inner()),
            MMult([a, b]) => LAExpr::MMult(sub(a), sub(b)),
            ElemMult([a, b]) => LAExpr::ElemMult(sub(a), sub(b)),
            ElemPlus([a, b]) => LAExpr::ElemPlus(sub(a), sub(b)),
            ElemMinus([a, b]) => LAExpr::ElemMinus(sub(a), sub(b)),
            ElemPow(a, k) => LAExpr::ElemPow(sub(a), *k),
            RowAgg(a) => LAExpr::RowAgg(sub(a)),
            ColAgg(a) => LAExpr::ColAgg(sub(a)),
            Agg(a) => LAExpr::Agg(sub(a)),
            Transpose(a) => LAExpr::Transpose(sub(a)),
            Call(f, args) => LAExpr::Call(f.clone(), args.iter().map(|a| self.expr_at(*a)).collect()),
            other => unreachable!("relational node {} in an extracted plan", other.tag()),
        }
    }
}

/// A selectable node: the member op, its own price, and its child classes
/// (canonical, one entry per occurrence).
pub(crate) struct Cand {
    pub op: Op,
    pub own: f64,
    pub kids: Vec<Id>,
}

/// Finite-cost members of every class reachable from `root` through
/// finite-cost nodes. Classes the search can never use (relational-only
/// regions) stay out, which keeps the exact solver's variable count small.
/// Nodes that list their own class as a child can never sit in an acyclic
/// plan and are dropped here.
pub(crate) fn candidates(g: &EGraph, root: Id, cost: &dyn Cost) -> BTreeMap<Id, Vec<Cand>> {
    let mut out: BTreeMap<Id, Vec<Cand>> = BTreeMap::new();
    let mut queue = vec![g.find(root)];
    while let Some(c) = queue.pop() {
        if out.contains_key(&c) {
            continue;
        }
        let mut list = Vec::new();
        for op in &g.class(c).nodes {
            let own = cost.node_cost(g, c, op);
            if !own.is_finite() {
                continue;
            }
            let kids: Vec<Id> = op.children().iter().map(|&k| g.find(k)).collect();
            if kids.contains(&c) {
                continue;
            }
            for &k in &kids {
                if !out.contains_key(&k) {
                    queue.push(k);
                }
            }
            list.push(Cand {
                op: op.clone(),
                own,
                kids,
            });
        }
        out.insert(c, list);
    }
    out
}

/// Does `target` appear downstream of `from` when following already-chosen
/// edges? Used by both extractors to keep selections acyclic: 0-cost
/// transpose pairs (`X` and `t(t(X))` share structure both ways) otherwise
/// let a plan reference itself.
pub(crate) fn reaches(edges: &BTreeMap<Id, Vec<Id>>, from: Id, target: Id) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(c) = stack.pop() {
        if c == target {
            return true;
        }
        if !seen.insert(c) {
            continue;
        }
        if let Some(kids) = edges.get(&c) {
            stack.extend(kids.iter().copied());
        }
    }
    false
}

/// Greedy bottom-up extraction. Each class's score is the best over its
/// members of `own cost + sum of child scores`, children counted once per
/// occurrence — a shared subexpression is paid for at every use, so this
/// extractor can prefer a plan that recomputes less but costs more overall.
/// Score ties break toward smaller arity, then lexicographic op tag.
pub fn extract_greedy(g: &EGraph, root: Id, cost: &dyn Cost) -> Result<ExtractedPlan, ExtractError> {
    let (plan, _) = greedy_core(g, root, cost)?;
    Ok(plan)
}

/// Greedy extraction plus the per-class score table (the exact solver reuses
/// the scores for feasibility pruning and branch ordering).
pub(crate) fn greedy_core(
    g: &EGraph,
    root: Id,
    cost: &dyn Cost,
) -> Result<(ExtractedPlan, BTreeMap<Id, f64>), ExtractError> {
    let root = g.find(root);
    let cands = candidates(g, root, cost);

    // Score fixpoint. Scores only ever drop, and every value is a finite sum
    // of node costs along some acyclic derivation, so this terminates.
    let mut score: BTreeMap<Id, f64> = BTreeMap::new();
    loop {
        let mut changed = false;
        for (&c, list) in &cands {
            for cand in list {
                let Some(total) = cand_score(cand, &score) else {
                    continue;
                };
                match score.get(&c) {
                    Some(&cur) if total >= cur - EPS => {}
                    _ => {
                        score.insert(c, total);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !score.contains_key(&root) {
        return Err(ExtractError::NoPlan(format!(
            "every member of class {} leads through non-executable operators",
            root.0
        )));
    }

    // Materialize one choice per class in derivation order: a class settles
    // once some member achieving its score has every child already settled.
    // Score ties break by (arity, tag) among the members settleable at that
    // moment. Settling in this order keeps the selection acyclic for free —
    // naive top-down choice does not, because 0-cost transpose twins let
    // `X` and `t(t(X))` each elect the other. The score fixpoint's own update
    // trace is such a derivation, so every scored class settles eventually.
    let mut settled: BTreeMap<Id, Op> = BTreeMap::new();
    let mut kids_of: BTreeMap<Id, Vec<Id>> = BTreeMap::new();
    loop {
        let mut progress = false;
        for (&c, list) in &cands {
            if settled.contains_key(&c) || !score.contains_key(&c) {
                continue;
            }
            let pick = list
                .iter()
                .filter(|cand| {
                    cand.kids.iter().all(|k| settled.contains_key(k))
                        && cand_score(cand, &score).is_some_and(|s| s <= score[&c] + EPS)
                })
                .min_by(|a, b| a.kids.len().cmp(&b.kids.len()).then(a.op.tag().cmp(b.op.tag())));
            if let Some(cand) = pick {
                settled.insert(c, cand.op.clone());
                kids_of.insert(c, cand.kids.clone());
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }

    // The plan is the part of the selection the root actually reaches.
    let mut choices: BTreeMap<Id, Op> = BTreeMap::new();
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        if choices.contains_key(&c) {
            continue;
        }
        choices.insert(c, settled[&c].clone());
        stack.extend(kids_of[&c].iter().copied());
    }

    let total_cost = choices
        .iter()
        .map(|(&c, op)| cost.node_cost(g, c, op))
        .sum();
    let plan = ExtractedPlan {
        root,
        choices,
        total_cost,
        method: Method::Greedy,
        fallback: false,
    };
    assert!(plan.topo_order().is_some(), "greedy plan must be acyclic");
    Ok((plan, score))
}

fn cand_score(cand: &Cand, score: &BTreeMap<Id, f64>) -> Option<f64> {
    let mut total = cand.own;
    for k in &cand.kids {
        total += score.get(k)?;
    }
    Some(total)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::egraph::EGraph;
    use crate::eval::{eval_la, random_inputs};
    use crate::ir::{parse_la, Catalog, MatrixInfo};
    use crate::rules::{all_rules, ingest, Lowered};
    use crate::saturate::{saturate, SaturationConfig, Strategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cat() -> Catalog {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::dense("A", 10, 20)).unwrap();
        cat.insert(MatrixInfo::dense("x", 20, 1)).unwrap();
        cat.insert(MatrixInfo::dense("y", 20, 1)).unwrap();
        cat.insert(MatrixInfo::sparse("S", 10, 20, 10)).unwrap();
        cat.insert(MatrixInfo::sparse("X", 1000, 1000, 100)).unwrap();
        cat
    }

    fn ingested(g: &mut EGraph, src: &str) -> Lowered {
        let e = parse_la(src).unwrap();
        let low = ingest(g, &e).unwrap();
        g.rebuild().unwrap();
        low
    }

    fn saturated(src: &str) -> (EGraph, Lowered) {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, src);
        let cfg = SaturationConfig {
            strategy: Strategy::DepthFirst,
            max_iters: 20,
            ..SaturationConfig::default()
        };
        let report = saturate(&mut g, &all_rules(), &cfg).unwrap();
        assert!(report.converged, "test graphs are expected to converge");
        (g, low)
    }

    #[test]
    fn default_costs_price_output_nonzeros() {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, "sum(A * A)");
        let root = g.find(low.la);
        // The scalar root class holds the matrix-level sum and its relational
        // twin: only the former is executable.
        let by_tag = |tag: &str| {
            g.class(root)
                .nodes
                .iter()
                .find(|op| op.tag() == tag)
                .cloned()
                .unwrap_or_else(|| panic!("no {tag} node in the root class"))
        };
        assert_eq!(CostModel.node_cost(&g, root, &by_tag("agg")), 1.0);
        assert!(CostModel.node_cost(&g, root, &by_tag("ragg")).is_infinite());

        let prod = match by_tag("agg") {
            Op::Agg(inner) => g.find(inner),
            _ => unreachable!(),
        };
        let mult = g.class(prod).nodes.iter().find(|op| op.tag() == "elemmult").cloned().unwrap();
        // Dense 10x20 elementwise product: 200 entries materialized.
        assert_eq!(CostModel.node_cost(&g, prod, &mult), 200.0);

        let a = g.lookup(&Op::MatRef("A".into())).unwrap();
        assert_eq!(CostModel.node_cost(&g, a, &Op::MatRef("A".into())), 0.0);
        assert_eq!(CostModel.node_cost(&g, a, &Op::Transpose(a)), 0.0);
    }

    #[test]
    fn merging_tighter_sparsity_lowers_costs() {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, "A * A");
        let root = g.find(low.la);
        let mult = g.class(root).nodes.iter().find(|op| op.tag() == "elemmult").cloned().unwrap();
        let before = CostModel.node_cost(&g, root, &mult);
        assert_eq!(before, 200.0);

        // Learn that the product equals a 10-nonzero stored matrix; the class
        // sparsity tightens to 0.05 and the same node gets 20x cheaper.
        let s = g.add(Op::MatRef("S".into())).unwrap();
        g.merge(root, s).unwrap();
        g.rebuild().unwrap();
        let root = g.find(root);
        let after = CostModel.node_cost(&g, root, &mult);
        assert_eq!(after, 10.0);
        assert!(after <= before);
    }

    /// Two equivalent one-child nodes sit in a middle class: one costs 1 but
    /// hangs off a private leaf, the other costs 2 and reuses the leaf the
    /// root already needs. Greedy's per-occurrence accounting can't see the
    /// reuse and takes the private-leaf member.
    pub(crate) fn shared_leaf_graph() -> (EGraph, Id, Id, Id, Id) {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::dense("P", 5, 5)).unwrap();
        cat.insert(MatrixInfo::dense("Q", 5, 5)).unwrap();
        let mut g = EGraph::new(cat);
        let a = g.add(Op::MatRef("P".into())).unwrap();
        let b = g.add(Op::MatRef("Q".into())).unwrap();
        let t1 = g.add(Op::Transpose(a)).unwrap();
        let t2 = g.add(Op::Transpose(b)).unwrap();
        g.merge(t1, t2).unwrap();
        g.rebuild().unwrap();
        let mid = g.find(t1);
        let root = g.add(Op::ElemMult([mid, b])).unwrap();
        g.rebuild().unwrap();
        let ids = (g.find(root), g.find(mid), g.find(a), g.find(b));
        (g, ids.0, ids.1, ids.2, ids.3)
    }

    /// Fixed node prices for [`shared_leaf_graph`], keyed off structure.
    pub(crate) fn pinned(a: Id, b: Id) -> impl Fn(&EGraph, Id, &Op) -> f64 {
        move |g: &EGraph, _c: Id, op: &Op| match op {
            Op::MatRef(_) => 4.0,
            Op::Transpose(x) if g.find(*x) == a => 1.0,
            Op::Transpose(x) if g.find(*x) == b => 2.0,
            Op::ElemMult(_) => 0.0,
            _ => f64::INFINITY,
        }
    }

    #[test]
    fn greedy_pays_for_shared_children_per_use() {
        let (g, root, mid, a, b) = shared_leaf_graph();
        let plan = extract_greedy(&g, root, &pinned(a, b)).unwrap();
        assert_eq!(plan.total_cost, 9.0);
        assert_eq!(plan.method, Method::Greedy);
        // It took the locally-cheaper member (cost 1 via the extra leaf)...
        assert_eq!(plan.choices[&mid], Op::Transpose(a));
        // ...and so carries four classes: root, mid, and both leaves.
        assert_eq!(plan.node_count(), 4);
        assert_eq!(plan.distinct_cost(&g, &pinned(a, b)), 9.0);
        assert!(plan.topo_order().is_some());
    }

    #[test]
    fn exact_extraction_reuses_the_shared_leaf() {
        let (g, root, mid, a, b) = shared_leaf_graph();
        let cost = pinned(a, b);
        let greedy = extract_greedy(&g, root, &cost).unwrap();
        let exact = extract_ilp(&g, root, &cost).unwrap();
        // Paying 2 instead of 1 in the middle class drops the private leaf:
        // {root 0, mid 2, shared leaf 4} against greedy's {0, 1, 4, 4}.
        assert_eq!(exact.total_cost, 6.0);
        assert_eq!(exact.choices[&mid], Op::Transpose(b));
        assert_eq!(exact.node_count(), 3);
        assert!(!exact.choices.contains_key(&a));
        assert_eq!(exact.method, Method::Ilp);
        assert!(!exact.fallback);
        assert!(exact.total_cost <= greedy.total_cost);
        assert_eq!(exact.distinct_cost(&g, &cost), 6.0);
        assert!(exact.topo_order().is_some());
    }

    #[test]
    fn inner_products_extract_as_scalar_products() {
        let (g, low) = saturated("sum(x * y)");
        let greedy = extract_greedy(&g, low.la, &CostModel).unwrap();
        let exact = extract_ilp(&g, low.la, &CostModel).unwrap();
        // Materializing x*y costs 20 + 1; t(x) %*% y goes straight to the
        // 1-entry result. Both extractors find it.
        assert_eq!(greedy.total_cost, 1.0);
        assert_eq!(exact.total_cost, 1.0);

        // The plan must still compute the same value as the input.
        let input = parse_la("sum(x * y)").unwrap();
        let optimized = greedy.to_la();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let inputs = random_inputs(&g.cat, &mut rng);
            let want = eval_la(&input, &g.cat, &inputs).unwrap();
            let got = eval_la(&optimized, &g.cat, &inputs).unwrap();
            assert!(want.approx_eq(&got), "plan diverged from input");
        }
    }

    #[test]
    fn known_zero_results_cost_nothing() {
        let (g, low) = saturated("X - X");
        let plan = extract_greedy(&g, low.la, &CostModel).unwrap();
        assert_eq!(plan.total_cost, 0.0);
        let exact = extract_ilp(&g, low.la, &CostModel).unwrap();
        assert_eq!(exact.total_cost, 0.0);
    }

    #[test]
    fn relational_only_roots_are_rejected() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let bound = g
            .add(Op::Bind {
                m: a,
                row: Some("r".into()),
                col: Some("c".into()),
            })
            .unwrap();
        g.rebuild().unwrap();
        let err = extract_greedy(&g, bound, &CostModel).unwrap_err();
        assert!(matches!(err, ExtractError::NoPlan(_)));
    }

    #[test]
    fn plans_from_saturated_graphs_stay_faithful() {
        for src in ["t(A %*% x)", "sum(A)", "A * A + A"] {
            let (g, low) = saturated(src);
            let greedy = extract_greedy(&g, low.la, &CostModel).unwrap();
            let exact = extract_ilp(&g, low.la, &CostModel).unwrap();
            assert!(
                exact.total_cost <= greedy.total_cost + EPS,
                "{src}: exact {} > greedy {}",
                exact.total_cost,
                greedy.total_cost
            );
            assert!(greedy.topo_order().is_some());
            assert!(exact.topo_order().is_some());

            let input = parse_la(src).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for plan in [&greedy, &exact] {
                let optimized = plan.to_la();
                for _ in 0..3 {
                    let inputs = random_inputs(&g.cat, &mut rng);
                    let want = eval_la(&input, &g.cat, &inputs).unwrap();
                    let got = eval_la(&optimized, &g.cat, &inputs).unwrap();
                    assert!(want.approx_eq(&got), "{src}: plan diverged from input");
                }
            }
        }
    }

    #[test]
    fn factored_residuals_avoid_dense_intermediates() {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::sparse("X", 1000, 500, 500)).unwrap();
        cat.insert(MatrixInfo::dense("U", 1000, 1)).unwrap();
        cat.insert(MatrixInfo::dense("V", 500, 1)).unwrap();
        let mut g = EGraph::new(cat);
        let low = ingested(&mut g, "sum((X - U %*% t(V))^2)");

        // The input plan materializes the dense 1000x500 product, the dense
        // residual, and its square: 3 * 500_000 + 1.
        let naive = extract_greedy(&g, low.la, &CostModel).unwrap();
        assert_eq!(naive.total_cost, 1_500_001.0);

        let cfg = SaturationConfig {
            strategy: Strategy::DepthFirst,
            max_iters: 30,
            node_budget: 3_000,
            time_budget_ms: 60_000,
            ..SaturationConfig::default()
        };
        saturate(&mut g, &all_rules(), &cfg).unwrap();

        let greedy = extract_greedy(&g, low.la, &CostModel).unwrap();
        let exact = extract_ilp(&g, low.la, &CostModel).unwrap();
        assert!(exact.total_cost <= greedy.total_cost + EPS);
        // The factored plan is at least an order of magnitude cheaper...
        assert!(
            exact.total_cost * 10.0 <= naive.total_cost,
            "exact cost {} did not beat the naive {} by 10x",
            exact.total_cost,
            naive.total_cost
        );
        // ...because nothing it materializes is anywhere near 1000x500 dense.
        for (&c, op) in &exact.choices {
            assert!(
                CostModel.node_cost(&g, c, op) <= 10_000.0,
                "plan materializes {} nonzeros at class {}",
                g.meta(c).nnz(),
                c.0
            );
        }

        // Faithfulness on the flagship rewrite, at full catalog size.
        let input = parse_la("sum((X - U %*% t(V))^2)").unwrap();
        let optimized = exact.to_la();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let inputs = random_inputs(&g.cat, &mut rng);
            let want = eval_la(&input, &g.cat, &inputs).unwrap();
            let got = eval_la(&optimized, &g.cat, &inputs).unwrap();
            assert!(want.approx_eq(&got), "optimized plan diverged from input");
        }
    }
}
