use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use chowliu_core::chowliu::{chow_liu_structure, learn_tree_distribution};
use chowliu_core::citest::{calibrate, test_conditional_independence, test_independence, TesterConfig};
use chowliu_core::estimation::{calibrate_add_one_constant, learn_parameters, SampleSet};
use chowliu_core::experiment::{run_experiment, write_report, ExperimentConfig, SEED_ENV};
use chowliu_core::hardinstances::{verify_nonrealizable_facts, verify_realizable_facts, Regime};
use chowliu_core::io;
use chowliu_core::{Error, Result};

#[derive(Parser)]
#[command(name = "chowliu", version, about = "Tree-structured distribution learning and testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a tree model or a dense joint.
    Sample {
        #[arg(long, conflicts_with = "joint", required_unless_present = "joint")]
        model: Option<PathBuf>,
        #[arg(long)]
        joint: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write the CLS1 binary layout instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Learn a structure, parameters for a given tree, or both.
    Learn {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum)]
        mode: LearnMode,
        /// Tree JSON, required in params mode.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test (conditional) independence of sample columns; prints a JSON verdict.
    Citest {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        c_sample: f64,
        #[arg(long, default_value_t = 0.5)]
        c_decision: f64,
        /// Alphabet size; defaults to the one of the sample file.
        #[arg(long)]
        k: Option<usize>,
        /// Columns `x,y` or `x,y,z` (the last one is conditioned on).
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the numeric facts about the three-bit hard instances.
    VerifyFacts {
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        epsilon: f64,
    },
    /// Fit the tester's sample constant or the add-1 KL constant.
    Calibrate {
        #[arg(long, value_enum)]
        target: CalibrationTarget,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample sizes for the add-1 target.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnMode {
    Structure,
    Params,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationTarget {
    Tester,
    Add1,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Domain(_) | Error::InvalidAlphabet(..))
}

fn seed_or_env(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(seed),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn report_samples(s: &SampleSet, start: Instant) {
    eprintln!(
        "N={} n={} k={} elapsed={:.3}s",
        s.len(),
        s.n(),
        s.k(),
        start.elapsed().as_secs_f64()
    );
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Sample {
            model,
            joint,
            count,
            seed,
            out,
            binary,
        } => {
            let start = Instant::now();
            let seed = seed_or_env(seed)?;
            let s = match (model, joint) {
                (Some(m), _) => io::tree_model_from_json(&io::read_to_string(&m)?)?.sample(count, seed),
                (None, Some(j)) => io::dense_from_json(&io::read_to_string(&j)?)?.sample(count, seed),
                (None, None) => return Err(Error::Config("--model or --joint is required".into())),
            };
            io::write_samples(&out, &s, binary)?;
            report_samples(&s, start);
        }
        Command::Learn {
            samples,
            mode,
            tree,
            root,
            k,
            out,
        } => {
            let start = Instant::now();
            let s = io::read_samples(&samples, k)?;
            let json = match mode {
                LearnMode::Structure => io::tree_to_json(&chow_liu_structure(&s)?)?,
                LearnMode::Params => {
                    let path = tree.ok_or_else(|| Error::Config("params mode needs --tree".into()))?;
                    let t = io::tree_from_json(&io::read_to_string(&path)?)?;
                    if t.n() != s.n() {
                        return Err(Error::ShapeMismatch(format!(
                            "tree has {} nodes, samples have {} columns",
                            t.n(),
                            s.n()
                        )));
                    }
                    io::tree_model_to_json(&learn_parameters(&s, &t.rooted_at(root)?)?)?
                }
                LearnMode::Full => io::tree_model_to_json(&learn_tree_distribution(&s)?)?,
            };
            std::fs::write(&out, json)?;
            report_samples(&s, start);
        }
        Command::Citest {
            samples,
            epsilon,
            delta,
            c_sample,
            c_decision,
            k,
            columns,
            out,
        } => {
            let start = Instant::now();
            let s = io::read_samples(&samples, None)?;
            let cfg = TesterConfig {
                epsilon,
                delta,
                k: k.unwrap_or(s.k()),
                c_sample,
                c_decision,
            };
            cfg.validate()?;
            let s = match columns {
                Some(cols) => s.select_columns(&cols)?,
                None => s,
            };
            let verdict = match s.n() {
                2 => test_independence(&s, &cfg)?,
                3 => test_conditional_independence(&s, &cfg)?,
                n => {
                    return Err(Error::Config(format!(
                        "the tester needs 2 or 3 columns, got {n}; use --columns"
                    )))
                }
            };
            emit(out.as_deref(), &serde_json::to_string_pretty(&verdict)?)?;
            report_samples(&s, start);
        }
        Command::Experiment { config, output } => {
            let start = Instant::now();
            let mut cfg = ExperimentConfig::from_json(&io::read_to_string(&config)?)?;
            cfg.apply_env_seed()?;
            if output.is_some() {
                cfg.output = output;
            }
            let target = cfg.output.take();
            let report = run_experiment(&cfg)?;
            match &target {
                Some(p) => write_report(p, &report)?,
                None => print!("{}", report.to_csv_string()),
            }
            if let Some(sep) = &report.separation {
                eprintln!("{}", serde_json::to_string(sep)?);
            }
            eprintln!("cells={} elapsed={:.3}s", report.rows.len(), start.elapsed().as_secs_f64());
        }
        Command::VerifyFacts { regime, epsilon } => {
            let (json, passed) = match regime {
                Regime::NonRealizable => {
                    let f = verify_nonrealizable_facts(epsilon)?;
                    (serde_json::to_string_pretty(&f)?, f.passed)
                }
                Regime::Realizable => {
                    let f = verify_realizable_facts(epsilon)?;
                    (serde_json::to_string_pretty(&f)?, f.passed)
                }
            };
            println!("{json}");
            if !passed {
                eprintln!("facts failed; see \"failures\"");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Calibrate {
            target,
            epsilon,
            delta,
            k,
            trials,
            seed,
            sizes,
            out,
        } => {
            let seed = seed_or_env(seed)?;
            let json = match target {
                CalibrationTarget::Tester => {
                    let cfg = calibrate(&TesterConfig::new(epsilon, delta, k)?, trials, seed)?;
                    serde_json::to_string_pretty(&cfg)?
                }
                CalibrationTarget::Add1 => {
                    let c = calibrate_add_one_constant(k, delta, &sizes, trials, seed)?;
                    serde_json::to_string_pretty(&serde_json::json!({
                        "k": k,
                        "delta": delta,
                        "sizes": sizes,
                        "trials": trials,
                        "c": c,
                    }))?
                }
            };
            emit(out.as_deref(), &json)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
