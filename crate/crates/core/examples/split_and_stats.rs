//! Split arithmetic, a per-subset split of a generated corpus, and its
//! statistics report.
//!
//! cargo run --release --example split_and_stats

use forge::dataset::{cap_duplicates, compute_stats, split, split_counts, Dataset};
use forge::generator::generate;
use forge::simulator::simulate_batch;
use forge::{GenerationConfig, Lexicon, SimulatorConfig, SplitName, TemplatePool};

fn main() -> forge::Result<()> {
    let ratios = (0.6, 0.2, 0.2);
    for n in [78_297, 64_619, 44_841, 5] {
        let (train, valid, test) = split_counts(n, ratios)?;
        println!("N = {n:>6}: train {train:>6}, valid {valid:>6}, test {test:>6}");
    }

    let sessions = simulate_batch(&SimulatorConfig::default(), 7, 10)?;
    let pairs = generate(
        &sessions,
        &TemplatePool::default_pool(),
        &Lexicon::default_mario(),
        &GenerationConfig::default(),
    )?;
    let capped = cap_duplicates(&pairs, 20, 7);
    println!(
        "\n{} pairs, {} after capping identical pairs at 20",
        pairs.len(),
        capped.len()
    );

    let dataset = split(&Dataset::new(capped), ratios, 7)?;
    for s in SplitName::ALL {
        println!("  {:<5} {}", s.as_str(), dataset.in_split(s).count());
    }

    let stats = compute_stats(&dataset, Some(&sessions))?;
    println!("\nunique QA pairs: {} of {}", stats.unique_qa, stats.total);
    println!(
        "mean events per clip: {:.2}",
        stats.mean_events_per_clip.unwrap_or(f64::NAN)
    );
    println!("sessions spread over several splits: {}", stats.sessions_across_splits);
    for (subset, s) in &stats.subsets {
        let top: Vec<String> = {
            let mut answers: Vec<_> = s.by_answer.iter().collect();
            answers.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            answers.iter().take(3).map(|(a, n)| format!("{a} ({n})")).collect()
        };
        println!(
            "  {subset}: {} pairs, vocabulary {}, top answers {}",
            s.total,
            s.question_vocabulary,
            top.join(", ")
        );
    }
    print!("\n{}", stats.to_csv()?.lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
