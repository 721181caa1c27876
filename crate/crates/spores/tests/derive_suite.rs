//! The shipped derivation suite must pass wholesale: every case's right
//! side lands in the left side's class after saturation, under default
//! budgets, quickly.

use std::path::Path;
use std::time::Instant;

use spores::derive::{load_suite, run_suite};
use spores::saturate::SaturationConfig;

fn suite_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/derive_suite.jsonl")
}

#[test]
fn every_shipped_case_derives() {
    let cases = load_suite(&suite_path()).expect("suite loads");
    assert!(cases.len() >= 20, "suite holds {} cases", cases.len());

    let start = Instant::now();
    let outcomes = run_suite(&cases, &SaturationConfig::default());
    let wall = start.elapsed();

    for o in &outcomes {
        eprintln!("{o}");
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).collect();
    assert!(
        failed.is_empty(),
        "{} of {} cases failed: {}",
        failed.len(),
        outcomes.len(),
        failed
            .iter()
            .map(|o| o.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert!(
        wall.as_secs() < 60,
        "suite took {:.1}s, budget is 60s",
        wall.as_secs_f64()
    );
}
