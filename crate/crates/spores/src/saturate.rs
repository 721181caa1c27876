//! The saturation loop: match every rule against the frozen graph, apply a
//! (possibly sampled) batch of matches, restore congruence, and repeat until
//! the graph stops changing or a budget runs out.

use crate::egraph::{EGraph, RuleError};
use crate::rules::{Match, Rule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Apply every match found, every iteration.
    DepthFirst,
    /// Apply a seeded uniform sample of at most `sample_limit` matches per
    /// rule per iteration. Keeps iteration cost bounded on dense graphs.
    Sample,
}

#[derive(Clone, Debug)]
pub struct SaturationConfig {
    pub strategy: Strategy,
    pub sample_limit: usize,
    pub max_iters: usize,
    pub node_budget: usize,
    /// Saturation work budget in nominal milliseconds. Spent against a
    /// deterministic work meter, not the wall clock: identical runs must
    /// stop at identical points, and a real clock would let scheduler
    /// noise pick the stopping iteration. Wall time stays within the same
    /// order of magnitude on an ordinary desktop.
    pub time_budget_ms: u64,
    pub rng_seed: u64,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig {
            strategy: Strategy::Sample,
            sample_limit: 100,
            max_iters: 30,
            node_budget: 50_000,
            time_budget_ms: 2500,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    IterLimit,
    NodeBudget,
    Timeout,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::IterLimit => "iter_limit",
            StopReason::NodeBudget => "node_budget",
            StopReason::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RuleStats {
    /// Matches found across all search passes.
    pub matched: u64,
    /// Matches actually applied (after sampling).
    pub applied: u64,
}

#[derive(Clone, Debug)]
pub struct SaturationReport {
    pub iterations_run: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub classes_before: usize,
    pub classes_after: usize,
    pub rules: BTreeMap<String, RuleStats>,
    pub wall_ms: u64,
}

/// Work-meter units that count as one nominal millisecond of the time
/// budget. Calibrated against an optimized build on a desktop machine;
/// precision does not matter, determinism does.
const WORK_PER_MS: u64 = 1500;

/// Meter charge for one rule application, on top of the graph mutations the
/// application performs (those are metered by the graph itself).
const APPLY_WORK: u64 = 2;

/// Run the rules over the graph until convergence or a budget stop.
///
/// Convergence means a **full, unsampled** match pass produced zero changes;
/// when sampling, an apparently quiet iteration is certified by one such
/// pass before the loop declares itself done. Application order is fixed
/// (rule order, then sorted match order) and budgets are spent against a
/// deterministic work meter, so a given seed always produces the same
/// graph and the same report counts.
pub fn saturate(
    g: &mut EGraph,
    rules: &[Box<dyn Rule>],
    cfg: &SaturationConfig,
) -> Result<SaturationReport, RuleError> {
    let start = Instant::now();
    let nodes_before = g.n_nodes();
    let classes_before = g.n_classes();
    let mut stats: BTreeMap<String, RuleStats> = rules
        .iter()
        .map(|r| (r.name().to_string(), RuleStats::default()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut iterations_run = 0;
    // the meter: match-scan units accrued here, plus whatever mutation work
    // the graph records on itself (merging two classes can cascade into
    // congruence repairs that dwarf the application that caused them)
    let base = g.work();
    let mut work: u64 = 0;
    let mut stop = None;

    'outer: while iterations_run < cfg.max_iters {
        if let Some(reason) = over_budget(g, cfg, work + g.work() - base) {
            stop = Some(reason);
            break;
        }
        iterations_run += 1;

        let mut changed = false;
        let mut truncated = false;
        for rule in rules {
            let matches = collect(g, rule.as_ref());
            // A search pass scans every class and touches every match.
            work += g.n_classes() as u64 + matches.len() as u64;
            let st = stats.get_mut(rule.name()).expect("stats preseeded");
            st.matched += matches.len() as u64;
            let kept = match cfg.strategy {
                Strategy::Sample if matches.len() > cfg.sample_limit => {
                    truncated = true;
                    sample_sorted(&mut rng, matches, cfg.sample_limit)
                }
                _ => matches,
            };
            let mut tripped = None;
            for (i, m) in kept.iter().enumerate() {
                changed |= rule.apply(g, m)?;
                st.applied += 1;
                work += APPLY_WORK;
                // Big match batches can outgrow every budget between two
                // checks, so look mid-batch as well.
                if i % 64 == 63 {
                    tripped = over_budget(g, cfg, work + g.work() - base);
                    if tripped.is_some() {
                        break;
                    }
                }
            }
            g.rebuild()?;
            if let Some(reason) = tripped.or_else(|| over_budget(g, cfg, work + g.work() - base)) {
                stop = Some(reason);
                break 'outer;
            }
        }

        if !changed {
            if !truncated {
                stop = Some(StopReason::Converged);
                break;
            }
            // The sampled batch was quiet; only a full pass can certify
            // that nothing is left.
            let mut full_changed = false;
            for rule in rules {
                let matches = collect(g, rule.as_ref());
                work += g.n_classes() as u64 + matches.len() as u64;
                let st = stats.get_mut(rule.name()).expect("stats preseeded");
                st.matched += matches.len() as u64;
                let mut tripped = None;
                for (i, m) in matches.iter().enumerate() {
                    full_changed |= rule.apply(g, m)?;
                    st.applied += 1;
                    work += APPLY_WORK;
                    if i % 64 == 63 {
                        tripped = over_budget(g, cfg, work + g.work() - base);
                        if tripped.is_some() {
                            break;
                        }
                    }
                }
                g.rebuild()?;
                if let Some(reason) =
                    tripped.or_else(|| over_budget(g, cfg, work + g.work() - base))
                {
                    stop = Some(reason);
                    break 'outer;
                }
            }
            if !full_changed {
                stop = Some(StopReason::Converged);
                break;
            }
        }
    }

    let stop_reason = stop.unwrap_or(StopReason::IterLimit);
    Ok(SaturationReport {
        iterations_run,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        nodes_before,
        nodes_after: g.n_nodes(),
        classes_before,
        classes_after: g.n_classes(),
        rules: stats,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

fn over_budget(g: &EGraph, cfg: &SaturationConfig, work: u64) -> Option<StopReason> {
    if g.n_nodes() >= cfg.node_budget {
        Some(StopReason::NodeBudget)
    } else if work >= cfg.time_budget_ms.saturating_mul(WORK_PER_MS) {
        Some(StopReason::Timeout)
    } else {
        None
    }
}

fn collect(g: &EGraph, rule: &dyn Rule) -> Vec<Match> {
    let mut ms = rule.search(g);
    ms.sort();
    ms.dedup();
    ms
}

/// Uniform sample of `limit` matches, re-sorted so application order stays
/// canonical regardless of the draw order.
fn sample_sorted(rng: &mut ChaCha8Rng, matches: Vec<Match>, limit: usize) -> Vec<Match> {
    let mut idx = rand::seq::index::sample(rng, matches.len(), limit).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| matches[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_la, Catalog, MatrixInfo};
    use crate::rules::{all_rules, ingest, Lowered};

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("A", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("B", 20, 30)).unwrap();
        c.insert(MatrixInfo::sparse("X", 1000, 1000, 100)).unwrap();
        c
    }

    fn ingested(g: &mut EGraph, src: &str) -> Lowered {
        let e = parse_la(src).unwrap();
        let low = ingest(g, &e).unwrap();
        g.rebuild().unwrap();
        low
    }

    #[test]
    fn zero_iterations_change_nothing() {
        let mut g = EGraph::new(cat());
        ingested(&mut g, "A %*% B");
        let before = g.n_nodes();
        let cfg = SaturationConfig {
            max_iters: 0,
            ..SaturationConfig::default()
        };
        let rep = saturate(&mut g, &all_rules(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.stop_reason, StopReason::IterLimit);
        assert_eq!(rep.iterations_run, 0);
        assert_eq!(g.n_nodes(), before);
        assert_eq!(rep.nodes_after, rep.nodes_before);
    }

    #[test]
    fn small_graphs_converge() {
        let mut g = EGraph::new(cat());
        let low = ingested(&mut g, "X - X");
        let rep = saturate(&mut g, &all_rules(), &SaturationConfig::default()).unwrap();
        assert!(rep.converged, "stopped for {:?}", rep.stop_reason);
        assert_eq!(g.meta(low.la).sparsity, 0.0);
    }

    #[test]
    fn heavy_sampling_still_converges_via_certification() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "t(A %*% B)");
        let r = ingested(&mut g, "t(B) %*% t(A)");
        let cfg = SaturationConfig {
            sample_limit: 1,
            max_iters: 200,
            ..SaturationConfig::default()
        };
        let rep = saturate(&mut g, &all_rules(), &cfg).unwrap();
        assert!(rep.converged, "stopped for {:?}", rep.stop_reason);
        assert_eq!(g.find(l.la), g.find(r.la));
    }

    #[test]
    fn node_budget_is_a_normal_stop() {
        let mut g = EGraph::new(cat());
        ingested(&mut g, "t(A %*% B)");
        let cfg = SaturationConfig {
            node_budget: 10,
            ..SaturationConfig::default()
        };
        let rep = saturate(&mut g, &all_rules(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.stop_reason, StopReason::NodeBudget);
    }

    #[test]
    fn timeout_is_a_normal_stop() {
        let mut g = EGraph::new(cat());
        ingested(&mut g, "t(A %*% B)");
        let cfg = SaturationConfig {
            time_budget_ms: 0,
            ..SaturationConfig::default()
        };
        let rep = saturate(&mut g, &all_rules(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.stop_reason, StopReason::Timeout);
        assert_eq!(rep.iterations_run, 0);
    }

    #[test]
    fn same_seed_means_same_graph() {
        let run = |seed: u64| {
            let mut g = EGraph::new(cat());
            ingested(&mut g, "t(A %*% B)");
            let cfg = SaturationConfig {
                sample_limit: 3,
                max_iters: 5,
                rng_seed: seed,
                ..SaturationConfig::default()
            };
            let rep = saturate(&mut g, &all_rules(), &cfg).unwrap();
            (g.n_nodes(), g.n_classes(), rep.rules)
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn defaults_close_the_textbook_identities() {
        let mut g = EGraph::new(cat());
        let l = ingested(&mut g, "sum(A %*% B)");
        let r = ingested(&mut g, "sum(t(B) %*% t(A))");
        let rep = saturate(&mut g, &all_rules(), &SaturationConfig::default()).unwrap();
        assert!(rep.converged, "stopped for {:?}", rep.stop_reason);
        assert_eq!(g.find(l.la), g.find(r.la));
    }
}
