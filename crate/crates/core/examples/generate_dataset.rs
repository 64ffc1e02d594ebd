//! Simulate sessions, generate QA pairs, and replay the oracle over them.
//!
//! cargo run --release --example generate_dataset [sessions]

use std::collections::BTreeMap;

use forge::dataset::{validate_dataset, Dataset};
use forge::generator::generate;
use forge::simulator::simulate_batch;
use forge::{GenerationConfig, Lexicon, SimulatorConfig, TemplatePool};

fn main() -> forge::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let sessions = simulate_batch(&SimulatorConfig::default(), 42, count)?;
    let lexicon = Lexicon::default_mario();
    let pool = TemplatePool::default_pool();
    let config = GenerationConfig {
        max_same_qa: Some(50),
        ..GenerationConfig::default()
    };

    let started = std::time::Instant::now();
    let pairs = generate(&sessions, &pool, &lexicon, &config)?;
    println!(
        "{} QA pairs from {} sessions in {:.2?}",
        pairs.len(),
        sessions.len(),
        started.elapsed()
    );

    let mut table: BTreeMap<(String, String), usize> = BTreeMap::new();
    for qa in &pairs {
        *table
            .entry((qa.subset.to_string(), qa.qtype.as_str().to_owned()))
            .or_default() += 1;
    }
    for ((subset, qtype), n) in &table {
        println!("  {subset} {qtype:<13} {n:>6}");
    }
    for qa in pairs.iter().step_by(pairs.len().max(8) / 8).take(8) {
        println!("  [{}] {}  ->  {}", qa.subset, qa.q, qa.a);
    }

    let report = validate_dataset(&Dataset::new(pairs), &sessions, &lexicon);
    println!(
        "oracle replay: {} checked, {} violations",
        report.checked,
        report.violations.len()
    );
    Ok(())
}
