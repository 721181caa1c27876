//! Command-line driver: optimize expressions against a catalog, decide
//! equivalence, print canonical forms, and run the derivation suite.
//!
//! Exit codes: 0 success (and `equiv` agreement), 1 `equiv` disagreement or
//! failed derivation cases, 2 bad input (syntax, catalog, usage), 3 no
//! matrix-level plan in the graph, 4 a `--verify` mismatch.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon;
use crate::derive::{load_suite, run_suite};
use crate::egraph::{EGraph, Op};
use crate::eval::{eval_la, random_inputs};
use crate::extract::{extract_greedy, extract_ilp, Cost, CostModel, ExtractedPlan};
use crate::ir::{parse_la, Catalog, LAExpr, MatrixInfo};
use crate::rules::{all_rules, ingest};
use crate::saturate::{saturate, SaturationConfig, SaturationReport, Strategy};

const EXIT_INPUT: u8 = 2;
const EXIT_NO_PLAN: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "spores",
    about = "Cost-based optimizer for linear-algebra expressions",
    arg_required_else_help = true
)]
struct Cli {
    /// Print the rewrite rule names and exit.
    #[arg(long = "list-rules", global = true)]
    list_rules: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rewrite an expression to its cheapest derivable form.
    Optimize(OptimizeArgs),
    /// Decide whether two expressions compute the same function.
    Equiv(EquivArgs),
    /// Print an expression's canonical polynomial form.
    Canon(CanonArgs),
    /// Run a suite of expected left-to-right derivations.
    Derive(DeriveArgs),
    /// Print the rewrite rule names.
    ListRules,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Expression to optimize, e.g. "sum((X - U %*% t(V))^2)".
    expr: String,
    /// Matrix declarations, one JSON object per line.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Which extractor picks the plan.
    #[arg(long, value_enum, default_value_t = ExtractArg::Ilp)]
    extract: ExtractArg,
    /// Re-evaluate input and output on random bindings and compare.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    sat: SatFlags,
}

#[derive(Args)]
struct EquivArgs {
    lhs: String,
    rhs: String,
    /// Matrix declarations, one JSON object per line.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct CanonArgs {
    expr: String,
    /// Matrix declarations, one JSON object per line.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    /// Suite file, one JSON case per line; defaults to the bundled suite.
    suite: Option<PathBuf>,
    #[command(flatten)]
    sat: SatFlags,
}

/// Saturation budget flags shared by `optimize` and `derive`.
#[derive(Args, Clone)]
struct SatFlags {
    /// Match scheduling: apply everything or a seeded sample per rule.
    #[arg(long, value_enum, default_value_t = StrategyArg::Sample)]
    strategy: StrategyArg,
    /// Max matches applied per rule per iteration when sampling.
    #[arg(long, default_value_t = SaturationConfig::default().sample_limit)]
    limit: usize,
    /// Iteration cap.
    #[arg(long, default_value_t = SaturationConfig::default().max_iters)]
    iters: usize,
    /// Stop once the graph holds this many nodes.
    #[arg(long, default_value_t = SaturationConfig::default().node_budget)]
    node_budget: usize,
    /// Saturation budget in nominal milliseconds (spent deterministically).
    #[arg(long, default_value_t = SaturationConfig::default().time_budget_ms)]
    timeout_ms: u64,
    /// Sampling seed; defaults to $SPORES_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    DepthFirst,
    Sample,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ExtractArg {
    Greedy,
    Ilp,
    Both,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        msg: msg.into(),
    }
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.list_rules, cli.cmd) {
        (true, _) | (false, Some(Cmd::ListRules)) => cmd_list_rules(),
        (false, Some(Cmd::Optimize(a))) => cmd_optimize(a),
        (false, Some(Cmd::Equiv(a))) => cmd_equiv(a),
        (false, Some(Cmd::Canon(a))) => cmd_canon(a),
        (false, Some(Cmd::Derive(a))) => cmd_derive(a),
        (false, None) => unreachable!("clap shows help"),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

// ---- catalog & config plumbing ----

/// One line of a catalog file: a matrix declaration or an opaque-function
/// arity declaration.
#[derive(Deserialize)]
#[serde(untagged)]
enum CatalogLine {
    Mat {
        name: String,
        rows: u64,
        cols: u64,
        #[serde(default)]
        nnz: Option<u64>,
    },
    Func {
        func: String,
        arity: usize,
    },
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog, Failure> {
    let mut cat = Catalog::new();
    let Some(path) = path else { return Ok(cat) };
    let text = fs::read_to_string(path)
        .map_err(|e| fail(EXIT_INPUT, format!("catalog {}: {e}", path.display())))?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: CatalogLine = serde_json::from_str(line).map_err(|e| {
            fail(
                EXIT_INPUT,
                format!("catalog {}:{}: {e}", path.display(), i + 1),
            )
        })?;
        let res = match entry {
            CatalogLine::Mat {
                name,
                rows,
                cols,
                nnz,
            } => cat.insert(match nnz {
                Some(n) => MatrixInfo::sparse(name, rows, cols, n),
                None => MatrixInfo::dense(name, rows, cols),
            }),
            CatalogLine::Func { func, arity } => cat.declare_func(func, arity),
        };
        res.map_err(|e| {
            fail(
                EXIT_INPUT,
                format!("catalog {}:{}: {e}", path.display(), i + 1),
            )
        })?;
    }
    Ok(cat)
}

impl SatFlags {
    fn config(&self) -> Result<SaturationConfig, Failure> {
        let rng_seed = match self.seed {
            Some(s) => s,
            None => match std::env::var("SPORES_SEED") {
                Ok(v) => v.trim().parse().map_err(|_| {
                    fail(EXIT_INPUT, format!("SPORES_SEED is not an integer: {v:?}"))
                })?,
                Err(_) => 0,
            },
        };
        Ok(SaturationConfig {
            strategy: match self.strategy {
                StrategyArg::DepthFirst => Strategy::DepthFirst,
                StrategyArg::Sample => Strategy::Sample,
            },
            sample_limit: self.limit,
            max_iters: self.iters,
            node_budget: self.node_budget,
            time_budget_ms: self.timeout_ms,
            rng_seed,
        })
    }
}

fn parse_input(text: &str) -> Result<LAExpr, Failure> {
    parse_la(text).map_err(|e| fail(EXIT_INPUT, e.to_string()))
}

// ---- optimize ----

#[derive(Serialize)]
struct OptimizeReport {
    input: String,
    optimized: String,
    cost_before: f64,
    cost_after: f64,
    saturation: SaturationSummary,
    extraction: ExtractionSummary,
    plan: PlanDag,
    #[serde(skip_serializing_if = "Option::is_none")]
    alternatives: Option<Alternatives>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<VerifySummary>,
}

#[derive(Serialize)]
struct SaturationSummary {
    iterations: usize,
    converged: bool,
    stop_reason: String,
    nodes_before: usize,
    nodes_after: usize,
    classes_before: usize,
    classes_after: usize,
    rules: BTreeMap<String, RuleCounts>,
    wall_ms: u64,
}

#[derive(Serialize)]
struct RuleCounts {
    matched: u64,
    applied: u64,
}

impl SaturationSummary {
    fn new(r: &SaturationReport) -> SaturationSummary {
        SaturationSummary {
            iterations: r.iterations_run,
            converged: r.converged,
            stop_reason: r.stop_reason.as_str().to_string(),
            nodes_before: r.nodes_before,
            nodes_after: r.nodes_after,
            classes_before: r.classes_before,
            classes_after: r.classes_after,
            rules: r
                .rules
                .iter()
                .map(|(n, s)| {
                    (
                        n.clone(),
                        RuleCounts {
                            matched: s.matched,
                            applied: s.applied,
                        },
                    )
                })
                .collect(),
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Serialize)]
struct ExtractionSummary {
    method: String,
    fallback: bool,
    wall_ms: u64,
}

/// Both extractors' results, present with `--extract both`.
#[derive(Serialize)]
struct Alternatives {
    greedy_cost: f64,
    ilp_cost: f64,
    greedy_plan: PlanDag,
    ilp_plan: PlanDag,
}

#[derive(Serialize)]
struct VerifySummary {
    bindings: usize,
    passed: bool,
}

/// The chosen plan with every shared node listed once; children refer to
/// node ids. Nodes appear children-first.
#[derive(Serialize)]
struct PlanDag {
    root: u32,
    nodes: Vec<PlanNode>,
}

#[derive(Serialize)]
struct PlanNode {
    id: u32,
    op: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    func: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    children: Vec<u32>,
    cost: f64,
}

fn plan_dag(g: &EGraph, plan: &ExtractedPlan, cost: &dyn Cost) -> PlanDag {
    let order = plan
        .topo_order()
        .expect("extracted plans are acyclic by construction");
    let nodes = order
        .iter()
        .map(|id| {
            let op = &plan.choices[id];
            let (mut matrix, mut value, mut power, mut func) = (None, None, None, None);
            match op {
                Op::MatRef(n) => matrix = Some(n.clone()),
                Op::Lit(v) => value = Some(v.0),
                Op::ElemPow(_, k) => power = Some(*k),
                Op::Call(n, _) => func = Some(n.clone()),
                _ => {}
            }
            PlanNode {
                id: id.0,
                op: op.tag(),
                matrix,
                value,
                power,
                func,
                children: op.children().iter().map(|c| g.find(*c).0).collect(),
                cost: cost.node_cost(g, *id, op),
            }
        })
        .collect();
    PlanDag {
        root: plan.root.0,
        nodes,
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode, Failure> {
    let cat = load_catalog(args.catalog.as_deref())?;
    let cfg = args.sat.config()?;
    let expr = parse_input(&args.expr)?;

    let mut g = EGraph::new(cat.clone());
    let low = ingest(&mut g, &expr).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    g.rebuild().map_err(|e| fail(EXIT_INPUT, e.to_string()))?;

    let cost = CostModel;
    let naive =
        extract_greedy(&g, low.la, &cost).map_err(|e| fail(EXIT_NO_PLAN, e.to_string()))?;
    let cost_before = naive.total_cost;

    let report = saturate(&mut g, &all_rules(), &cfg)
        .map_err(|e| fail(EXIT_INPUT, format!("saturation: {e}")))?;
    let root = g.find(low.la);

    let t_extract = Instant::now();
    let (mut plan, alternatives) = match args.extract {
        ExtractArg::Greedy => (
            extract_greedy(&g, root, &cost).map_err(|e| fail(EXIT_NO_PLAN, e.to_string()))?,
            None,
        ),
        ExtractArg::Ilp => (
            extract_ilp(&g, root, &cost).map_err(|e| fail(EXIT_NO_PLAN, e.to_string()))?,
            None,
        ),
        ExtractArg::Both => {
            let greedy =
                extract_greedy(&g, root, &cost).map_err(|e| fail(EXIT_NO_PLAN, e.to_string()))?;
            let ilp =
                extract_ilp(&g, root, &cost).map_err(|e| fail(EXIT_NO_PLAN, e.to_string()))?;
            let alt = Alternatives {
                greedy_cost: greedy.total_cost,
                ilp_cost: ilp.total_cost,
                greedy_plan: plan_dag(&g, &greedy, &cost),
                ilp_plan: plan_dag(&g, &ilp, &cost),
            };
            (ilp, Some(alt))
        }
    };
    let extract_ms = t_extract.elapsed().as_millis() as u64;

    // The ingested expression is still in the graph, so the optimizer never
    // has to return a plan worse than its input.
    if plan.total_cost > naive.total_cost {
        let method = plan.method;
        plan = naive.clone();
        plan.method = method;
    }

    let optimized_expr = plan.to_la();
    let optimized = optimized_expr.to_string();
    let cost_after = plan.total_cost;

    let verify = if args.verify {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let bindings = 3;
        for i in 0..bindings {
            let inputs = random_inputs(&cat, &mut rng);
            let want = eval_la(&expr, &cat, &inputs)
                .map_err(|e| fail(EXIT_INPUT, format!("verify: input: {e}")))?;
            let got = eval_la(&optimized_expr, &cat, &inputs)
                .map_err(|e| fail(EXIT_INPUT, format!("verify: output: {e}")))?;
            if !want.approx_eq(&got) {
                return Err(fail(
                    EXIT_VERIFY,
                    format!(
                        "verify: optimized plan disagrees with input on binding {} of {}",
                        i + 1,
                        bindings
                    ),
                ));
            }
        }
        Some(VerifySummary {
            bindings,
            passed: true,
        })
    } else {
        None
    };

    let out = OptimizeReport {
        input: expr.to_string(),
        optimized,
        cost_before,
        cost_after,
        saturation: SaturationSummary::new(&report),
        extraction: ExtractionSummary {
            method: plan.method.as_str().to_string(),
            fallback: plan.fallback,
            wall_ms: extract_ms,
        },
        plan: plan_dag(&g, &plan, &cost),
        alternatives,
        verify,
    };

    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("report serializes")
    );
    eprintln!(
        "{} => {}",
        shorten(&out.input, 60),
        shorten(&out.optimized, 60)
    );
    eprintln!(
        "cost {} -> {} ({}), saturation {} after {} iters in {} ms, extraction {} in {} ms{}",
        out.cost_before,
        out.cost_after,
        improvement(out.cost_before, out.cost_after),
        out.saturation.stop_reason,
        out.saturation.iterations,
        out.saturation.wall_ms,
        out.extraction.method,
        out.extraction.wall_ms,
        if out.extraction.fallback {
            " (budget fallback)"
        } else {
            ""
        },
    );
    Ok(ExitCode::SUCCESS)
}

fn shorten(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let cut: String = s.chars().take(max - 1).collect();
        format!("{cut}…")
    }
}

fn improvement(before: f64, after: f64) -> String {
    if after <= 0.0 {
        if before <= 0.0 {
            "unchanged".to_string()
        } else {
            "free".to_string()
        }
    } else if before <= after {
        "unchanged".to_string()
    } else {
        format!("{:.1}x", before / after)
    }
}

// ---- equiv / canon ----

fn cmd_equiv(args: EquivArgs) -> Result<ExitCode, Failure> {
    let cat = load_catalog(args.catalog.as_deref())?;
    let lhs = parse_input(&args.lhs)?;
    let rhs = parse_input(&args.rhs)?;
    let pl = canon::canon_la(&lhs, &cat).map_err(|e| fail(EXIT_INPUT, format!("lhs: {e}")))?;
    let pr = canon::canon_la(&rhs, &cat).map_err(|e| fail(EXIT_INPUT, format!("rhs: {e}")))?;
    let same = canon::equivalent(&pl, &pr);
    println!("{same}");
    println!("lhs: {pl}");
    println!("rhs: {pr}");
    Ok(if same {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_canon(args: CanonArgs) -> Result<ExitCode, Failure> {
    let cat = load_catalog(args.catalog.as_deref())?;
    let expr = parse_input(&args.expr)?;
    let p = canon::canon_la(&expr, &cat).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    println!("{p}");
    Ok(ExitCode::SUCCESS)
}

// ---- derive ----

fn cmd_derive(args: DeriveArgs) -> Result<ExitCode, Failure> {
    let cfg = args.sat.config()?;
    let path = args
        .suite
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data/derive_suite.jsonl"));
    let cases = load_suite(&path).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    let outcomes = run_suite(&cases, &cfg);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{} of {} cases passed{}",
        outcomes.len() - failed,
        outcomes.len(),
        if failed > 0 {
            format!(", {failed} failed")
        } else {
            String::new()
        }
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_list_rules() -> Result<ExitCode, Failure> {
    for rule in all_rules() {
        println!("{}", rule.name());
    }
    Ok(ExitCode::SUCCESS)
}
