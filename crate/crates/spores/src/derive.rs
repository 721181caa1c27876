//! Batch rewrite-derivation harness.
//!
//! Each case names two expression texts and the catalog they parse under.
//! The runner ingests the left side, saturates, then ingests the right side
//! into the same graph and checks that both roots land in one class — i.e.
//! that the rule set *derives* the right side from the left rather than
//! being told about it up front. Cases run in parallel; outcomes keep the
//! input order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::egraph::EGraph;
use crate::ir::{parse_la, Catalog, MatrixInfo};
use crate::rules::{all_rules, ingest};
use crate::saturate::{saturate, SaturationConfig};

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Case {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// One matrix in a case's catalog. Omitting `nnz` declares it dense.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseMatrix {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnz: Option<u64>,
}

/// A pair of expressions expected to be provably interchangeable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeriveCase {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    /// Side conditions the catalog encodes (e.g. "v is a column vector").
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub catalog: Vec<CaseMatrix>,
}

impl DeriveCase {
    pub fn catalog(&self) -> Result<Catalog, crate::ir::IrError> {
        let mut cat = Catalog::new();
        for m in &self.catalog {
            let info = match m.nnz {
                Some(n) => MatrixInfo::sparse(&m.name, m.rows, m.cols, n),
                None => MatrixInfo::dense(&m.name, m.rows, m.cols),
            };
            cat.insert(info)?;
        }
        Ok(cat)
    }
}

/// What happened when one case ran.
#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub passed: bool,
    pub iterations: usize,
    pub stop_reason: String,
    pub nodes: usize,
    pub wall_ms: u64,
    /// Failure explanation (parse error, saturation error, or "not merged").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl fmt::Display for CaseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({} iters, {}, {} nodes, {} ms)",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.iterations,
            self.stop_reason,
            self.nodes,
            self.wall_ms,
        )?;
        if let Some(d) = &self.detail {
            write!(f, ": {}", d)?;
        }
        Ok(())
    }
}

/// Read a suite file: one JSON case per line, blank lines skipped.
pub fn load_suite(path: &Path) -> Result<Vec<DeriveCase>, DeriveError> {
    let text = fs::read_to_string(path).map_err(|source| DeriveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: DeriveCase =
            serde_json::from_str(line).map_err(|source| DeriveError::Case {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
        cases.push(case);
    }
    Ok(cases)
}

/// Run one case. Anything that goes wrong — bad catalog, parse failure,
/// rule application error — folds into a failed outcome rather than
/// aborting the suite.
pub fn run_case(case: &DeriveCase, cfg: &SaturationConfig) -> CaseOutcome {
    let start = Instant::now();
    let fail = |detail: String| CaseOutcome {
        name: case.name.clone(),
        passed: false,
        iterations: 0,
        stop_reason: "error".into(),
        nodes: 0,
        wall_ms: start.elapsed().as_millis() as u64,
        detail: Some(detail),
    };
    let cat = match case.catalog() {
        Ok(c) => c,
        Err(e) => return fail(format!("catalog: {e}")),
    };
    // Both sides must parse before any rewriting happens, so a typo in the
    // right side cannot masquerade as a derivation failure.
    let lhs = match parse_la(&case.lhs) {
        Ok(e) => e,
        Err(e) => return fail(format!("lhs: {e}")),
    };
    let rhs = match parse_la(&case.rhs) {
        Ok(e) => e,
        Err(e) => return fail(format!("rhs: {e}")),
    };

    let mut g = EGraph::new(cat);
    let l = match ingest(&mut g, &lhs) {
        Ok(l) => l,
        Err(e) => return fail(format!("lhs: {e}")),
    };
    if let Err(e) = g.rebuild() {
        return fail(format!("lhs: {e}"));
    }
    let report = match saturate(&mut g, &all_rules(), cfg) {
        Ok(r) => r,
        Err(e) => return fail(format!("saturation: {e}")),
    };
    // The right side goes in only now: it must hit classes the rules built,
    // not seed them.
    let r = match ingest(&mut g, &rhs) {
        Ok(r) => r,
        Err(e) => return fail(format!("rhs: {e}")),
    };
    if let Err(e) = g.rebuild() {
        return fail(format!("rhs: {e}"));
    }

    let passed = g.find(l.la) == g.find(r.la);
    CaseOutcome {
        name: case.name.clone(),
        passed,
        iterations: report.iterations_run,
        stop_reason: report.stop_reason.as_str().to_string(),
        nodes: g.n_nodes(),
        wall_ms: start.elapsed().as_millis() as u64,
        detail: (!passed).then(|| "sides not merged".to_string()),
    }
}

/// Run every case in parallel, preserving input order in the results.
pub fn run_suite(cases: &[DeriveCase], cfg: &SaturationConfig) -> Vec<CaseOutcome> {
    cases.par_iter().map(|c| run_case(c, cfg)).collect()
}
