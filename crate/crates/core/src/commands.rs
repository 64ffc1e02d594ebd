//! The `forge` command line. Exit codes: 0 success, 1 validation failure or
//! data error, 2 usage error (bad flags, unreadable inputs, bad config).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attention::{check_invariants, Fixture, InvariantReport};
use crate::dataset::{self, Dataset};
use crate::error::{ForgeError, Result};
use crate::eval::{self, Prediction};
use crate::generator::{self, GenerationConfig};
use crate::jsonl;
use crate::lexicon::Lexicon;
use crate::rng::mix_seed;
use crate::simulator::{self, SimulatorConfig};
use crate::template::TemplatePool;

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Generate, check and score gameplay QA datasets")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Simulator config for `simulate`, generation config for `generate`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate gameplay sessions, or normalise an ingested log.
    Simulate {
        #[arg(long, default_value_t = 100)]
        sessions: usize,
        /// Override the configured session length.
        #[arg(long)]
        duration_ms: Option<u64>,
        /// Read sessions from this JSONL log instead of simulating.
        #[arg(long, conflicts_with_all = ["sessions", "duration_ms"])]
        ingest: Option<PathBuf>,
    },
    /// Generate QA pairs from sessions.
    Generate {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Keep at most this many copies of each (question, answer) pair.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Replay the oracle over a dataset.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Distribution statistics of a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// Also write the long-format CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Assign train/valid/test splits per subset.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "0.6,0.2,0.2")]
        ratios: String,
    },
    /// Score predictions or a baseline on the test split.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, required_unless_present = "baseline")]
        predictions: Option<PathBuf>,
        #[arg(long, conflicts_with = "predictions")]
        baseline: Option<Baseline>,
    },
    /// Check attention invariants on a fixture or on random fixtures.
    AttnCheck {
        #[arg(long, required_unless_present = "random")]
        fixture: Option<PathBuf>,
        /// Number of random fixtures to check.
        #[arg(long, conflicts_with = "fixture")]
        random: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    MostFrequent,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ForgeError::Io { .. } | ForgeError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| ForgeError::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| ForgeError::io("<stdout>", e)),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    emit(out, &text)
}

fn lexicon(path: Option<&PathBuf>) -> Result<Lexicon> {
    path.map_or_else(|| Ok(Lexicon::default_mario()), Lexicon::load)
}

fn parse_ratios(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ForgeError::Config(format!("ratios `{text}`: {e}")))?;
    match parts.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(ForgeError::Config(format!("ratios `{text}` must have three parts"))),
    }
}

#[derive(Serialize)]
struct EvalOutput {
    source: String,
    accuracy: eval::AccuracyReport,
    random_guess: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct AttnSummary {
    fixtures: usize,
    failed_fixtures: Vec<u64>,
    max_deviation: BTreeMap<String, f64>,
}

fn execute(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate {
            sessions,
            duration_ms,
            ingest,
        } => {
            let sessions = match ingest {
                Some(path) => simulator::ingest_log(path)?,
                None => {
                    let mut config = match &cli.config {
                        Some(p) => SimulatorConfig::load(p)?,
                        None => SimulatorConfig::default(),
                    };
                    if let Some(d) = duration_ms {
                        config.duration_ms = *d;
                    }
                    let seed = cli.seed.unwrap_or(config.seed);
                    simulator::simulate_batch(&config, seed, *sessions)?
                }
            };
            emit(out, &jsonl::to_jsonl_string(&sessions))?;
            eprintln!("{} sessions", sessions.len());
            Ok(0)
        }
        Command::Generate {
            sessions,
            templates,
            lexicon: lex,
            cap,
        } => {
            let mut config = match &cli.config {
                Some(p) => GenerationConfig::load(p)?,
                None => GenerationConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if cap.is_some() {
                config.max_same_qa = *cap;
            }
            let sessions = simulator::ingest_log(sessions)?;
            let pool = templates
                .as_ref()
                .map_or_else(|| Ok(TemplatePool::default_pool()), TemplatePool::load)?;
            let lexicon = lexicon(lex.as_ref())?;
            let pairs = generator::generate(&sessions, &pool, &lexicon, &config)?;
            emit(out, &jsonl::to_jsonl_string(&pairs))?;
            eprintln!("{} QA pairs from {} sessions", pairs.len(), sessions.len());
            Ok(0)
        }
        Command::Validate {
            dataset,
            sessions,
            lexicon: lex,
        } => {
            let data = Dataset::load(dataset)?;
            let sessions = simulator::ingest_log(sessions)?;
            let report = dataset::validate_dataset(&data, &sessions, &lexicon(lex.as_ref())?);
            emit_json(out, &report)?;
            eprintln!("{} checked, {} violations", report.checked, report.violations.len());
            Ok(if report.ok() { 0 } else { 1 })
        }
        Command::Stats { dataset, sessions, csv } => {
            let data = Dataset::load(dataset)?;
            let sessions = sessions.as_ref().map(simulator::ingest_log).transpose()?;
            let report = dataset::compute_stats(&data, sessions.as_deref())?;
            emit_json(out, &report)?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv()?).map_err(|e| ForgeError::io(path, e))?;
            }
            Ok(0)
        }
        Command::Split { dataset, ratios } => {
            let ratios = parse_ratios(ratios)?;
            dataset::split_counts(0, ratios)?;
            let data = Dataset::load(dataset)?;
            let split = dataset::split(&data, ratios, cli.seed.unwrap_or(0))?;
            emit(out, &split.to_jsonl())?;
            Ok(0)
        }
        Command::Eval {
            dataset,
            predictions,
            baseline,
        } => {
            let data = Dataset::load(dataset)?;
            let (source, preds): (String, Vec<Prediction>) = match (predictions, baseline) {
                (Some(path), _) => (path.display().to_string(), jsonl::read_jsonl_file(path)?),
                (None, _) => ("most-frequent".into(), eval::most_frequent_baseline(&data)?),
            };
            let accuracy = eval::accuracy(&preds, &data)?;
            let random_guess = eval::random_guess_expectation(&data)
                .map(|m| m.into_iter().map(|(s, v)| (s.to_string(), v)).collect())
                .unwrap_or_default();
            let defined = accuracy.is_defined();
            if !accuracy.missing.is_empty() {
                eprintln!("{} test examples have no prediction", accuracy.missing.len());
            }
            emit_json(
                out,
                &EvalOutput {
                    source,
                    accuracy,
                    random_guess,
                },
            )?;
            if !defined {
                eprintln!("error: the test split is empty; accuracies are undefined");
                return Ok(1);
            }
            Ok(0)
        }
        Command::AttnCheck { fixture, random } => {
            if let Some(path) = fixture {
                let report: InvariantReport = check_invariants(&Fixture::load(path)?)?;
                emit_json(out, &report)?;
                return Ok(if report.ok() { 0 } else { 1 });
            }
            let count = random.expect("clap requires --fixture or --random");
            let base = cli.seed.unwrap_or(0);
            let mut summary = AttnSummary {
                fixtures: count,
                failed_fixtures: Vec::new(),
                max_deviation: BTreeMap::new(),
            };
            for i in 0..count as u64 {
                let seed = mix_seed(base, i);
                let report = check_invariants(&Fixture::random_bounded(seed))?;
                if !report.ok() {
                    summary.failed_fixtures.push(seed);
                }
                for check in report.checks {
                    let worst = summary.max_deviation.entry(check.name).or_insert(0.0);
                    *worst = worst.max(check.deviation);
                }
            }
            emit_json(out, &summary)?;
            Ok(if summary.failed_fixtures.is_empty() { 0 } else { 1 })
        }
    }
}
