//! Trivial baselines on a generated, split corpus.
//!
//! cargo run --release --example baselines

use forge::dataset::{split, Dataset};
use forge::eval::{accuracy, modal_train_answers, most_frequent_baseline, random_guess_expectation};
use forge::generator::generate;
use forge::simulator::simulate_batch;
use forge::{GenerationConfig, Lexicon, SimulatorConfig, TemplatePool};

fn main() -> forge::Result<()> {
    let sessions = simulate_batch(&SimulatorConfig::default(), 11, 30)?;
    let pairs = generate(
        &sessions,
        &TemplatePool::default_pool(),
        &Lexicon::default_mario(),
        &GenerationConfig::default(),
    )?;
    let dataset = split(&Dataset::new(pairs), (0.6, 0.2, 0.2), 11)?;

    let modal = modal_train_answers(&dataset)?;
    let report = accuracy(&most_frequent_baseline(&dataset)?, &dataset)?;
    let random = random_guess_expectation(&dataset)?;
    println!("subset  modal answer   most-frequent   random guess");
    for (subset, answer) in &modal {
        let cell = &report.overall[subset.as_str()];
        println!(
            "{subset:<7} {answer:<14} {:>13.2}%  {:>12.2}%",
            100.0 * cell.accuracy.unwrap_or(f64::NAN),
            100.0 * random.get(subset).copied().unwrap_or(f64::NAN)
        );
    }
    let all = &report.overall["ALL"];
    println!(
        "ALL     {:>29.2}%  ({} of {})",
        100.0 * all.accuracy.unwrap_or(f64::NAN),
        all.correct,
        all.total
    );
    for (qtype, row) in &report.by_qtype {
        println!("  {qtype:<13} {:.2}%", 100.0 * row["ALL"].accuracy.unwrap_or(f64::NAN));
    }
    Ok(())
}
