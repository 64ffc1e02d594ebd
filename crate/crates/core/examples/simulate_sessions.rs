//! Simulate a few sessions and summarise what the simulator produced.
//!
//! cargo run --example simulate_sessions

use std::collections::BTreeMap;

use forge::simulator::{check_rules, simulate_batch};
use forge::{jsonl, SimulatorConfig};

fn main() -> forge::Result<()> {
    let config = SimulatorConfig::default();
    let sessions = simulate_batch(&config, 2024, 5)?;

    let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
    for s in &sessions {
        for e in &s.events {
            *per_type.entry(e.etype.to_string()).or_default() += 1;
        }
        assert!(check_rules(s, &config.rules).is_empty());
        println!(
            "session {}: {} stage, {} events, {} state intervals",
            s.id,
            s.stage_type,
            s.events.len(),
            s.states.len()
        );
    }
    let minutes = sessions.len() as f64 * config.duration_ms as f64 / 60_000.0;
    for (etype, n) in per_type {
        println!("{etype:>7}: {:6.1} per minute", n as f64 / minutes);
    }

    let first = &sessions[0];
    println!("\nfirst events of session {}:", first.id);
    for e in first.events.iter().take(8) {
        println!("  {e}");
    }
    let line = jsonl::to_jsonl_string(std::slice::from_ref(first));
    println!("\nserialized session: {} bytes of JSONL", line.len());
    Ok(())
}
