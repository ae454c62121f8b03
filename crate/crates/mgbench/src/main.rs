//! `mgbench`: command-line front end for the markov-games toolkit.
//!
//! Subcommands: `validate`, `grade`, `pmf`, `simulate`, `oracle`,
//! `compare`, `scenario`, `gen`, `witness`. Reports are JSON (simulate
//! emits line-delimited records plus an aggregate footer). Exit code 0 on
//! success, nonzero on validation or usage errors.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use markov_games::bench::{self, ExperimentConfig, Profile, StrategyId};
use markov_games::grade::{compute_grade_table, never_quit_cost, selection_cost_pmf};
use markov_games::oracle::{self, OracleStart};
use markov_games::scenario;
use markov_games::system::MetricInstance;
use markov_games::{generate, io, RandomSource};

#[derive(Parser)]
#[command(name = "mgbench", version, about = "Markov games with metric switching costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against every structural invariant.
    Validate { file: PathBuf },
    /// Grades and dummy grades for every chain state.
    Grade {
        file: PathBuf,
        /// Switching cost folded into the dummy grades.
        #[arg(long, default_value_t = 1.0)]
        switch_cost: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Exact selection-cost distribution of every chain.
    Pmf {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run seeded trials of one strategy and write a JSONL report.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        knobs: Knobs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the joint process exactly and optionally roll out its policy.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        k: usize,
        /// `root` or `active:<chain>`.
        #[arg(long, default_value = "root")]
        start: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also roll out the optimal policy this many times.
        #[arg(long)]
        simulate_trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run several strategies on one instance and tabulate them.
    Compare {
        file: PathBuf,
        /// Comma-separated strategy ids.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in scenario instance.
    Scenario {
        #[command(subcommand)]
        which: ScenarioCommand,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long, default_value_t = 3)]
        chains: usize,
        #[arg(long, default_value_t = 4)]
        max_states: usize,
        #[arg(long, default_value_t = 0.05)]
        cost_min: f64,
        #[arg(long, default_value_t = 2.0)]
        cost_max: f64,
        /// `unit` or `random-embedded`.
        #[arg(long, default_value = "unit")]
        metric: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Banks–Sundaram impossibility witness report.
    Witness {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        c: f64,
    },
}

#[derive(Args)]
struct Knobs {
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Budget B of the one-shot budgeted strategies.
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    #[arg(long, default_value_t = 1e9)]
    safety_cap: f64,
    #[arg(long, default_value_t = 64)]
    max_phases: usize,
    /// `paper` or `experiment`.
    #[arg(long, default_value = "experiment")]
    profile: String,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// δ_a versus the [xδ1+(1−x)δ0] mixture at switch cost c.
    BanksSundaram {
        #[arg(long, default_value_t = 0.8)]
        x: f64,
        #[arg(long, default_value_t = 0.01)]
        c: f64,
        /// Deterministic chain cost; defaults to the indifference value μ(x,c).
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The metric on which the unit index strategy is arbitrarily bad.
    DtwCounterexample {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1e6)]
        blocking_cost: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two deterministic chains on the unit metric.
    PaperMicro {
        #[arg(long, default_value_t = 1.0)]
        a1: f64,
        #[arg(long, default_value_t = 5.0)]
        a2: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn knobs_to_config(strategy: StrategyId, trials: usize, seed: u64, knobs: &Knobs) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(strategy);
    config.trials = trials;
    config.seed = seed;
    config.beta = knobs.beta;
    config.c = knobs.c;
    config.alpha = knobs.alpha;
    config.tol = knobs.tol;
    config.budget = knobs.budget;
    config.safety_cap = knobs.safety_cap;
    config.max_phases = knobs.max_phases;
    config.profile = knobs.profile.parse::<Profile>()?;
    Ok(config)
}

fn emit(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(file: &PathBuf) -> anyhow::Result<MetricInstance> {
    io::parse_instance(file).with_context(|| format!("loading {}", file.display()))
}

fn parse_start(text: &str) -> anyhow::Result<OracleStart> {
    if text == "root" {
        return Ok(OracleStart::Root);
    }
    if let Some(id) = text.strip_prefix("active:") {
        return Ok(OracleStart::ActiveOn(id.parse()?));
    }
    bail!("start must be `root` or `active:<chain>`, got `{text}`");
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            match io::from_json(&text) {
                Ok(instance) => {
                    let summary = serde_json::json!({
                        "ok": true,
                        "chains": instance.num_chains(),
                        "reward_target": instance.reward_target(),
                    });
                    println!("{summary}");
                }
                Err(err) => {
                    println!("{}", serde_json::json!({ "ok": false, "error": err.to_string() }));
                    std::process::exit(1);
                }
            }
        }
        Command::Grade { file, switch_cost, tol } => {
            let instance = load(&file)?;
            let mut chains = Vec::new();
            for (i, chain) in instance.chains().iter().enumerate() {
                let table = compute_grade_table(chain, switch_cost, tol)?;
                let states: Vec<_> = (0..chain.num_states())
                    .map(|v| {
                        serde_json::json!({
                            "state": chain.label(v),
                            "grade": table.grade[v],
                            "dummy_grade": if v == chain.target() {
                                serde_json::Value::Null
                            } else {
                                table.dummy_grade[v].into()
                            },
                        })
                    })
                    .collect();
                chains.push(serde_json::json!({
                    "chain": i,
                    "switch_cost": switch_cost,
                    "states": states,
                }));
            }
            println!("{}", serde_json::json!({ "chains": chains }));
        }
        Command::Pmf { file, tol } => {
            let instance = load(&file)?;
            let mut chains = Vec::new();
            for (i, chain) in instance.chains().iter().enumerate() {
                let pmf = selection_cost_pmf(chain, tol)?;
                chains.push(serde_json::json!({
                    "chain": i,
                    "support": pmf.support(),
                    "mass": pmf.mass(),
                    "mean": pmf.mean(),
                    "never_quit_cost": never_quit_cost(chain, chain.start())?,
                }));
            }
            println!("{}", serde_json::json!({ "chains": chains }));
        }
        Command::Simulate { file, strategy, trials, seed, knobs, out } => {
            let instance = load(&file)?;
            let config = knobs_to_config(strategy.parse()?, trials, seed, &knobs)?;
            let report = bench::run_experiment(&config, &instance)?;
            emit(out.as_ref(), &report.to_jsonl())?;
        }
        Command::Oracle { file, k, start, tol, simulate_trials, seed } => {
            let instance = load(&file)?;
            let start = parse_start(&start)?;
            let result = oracle::solve_optimal(&instance, k, start, tol)?;
            let mut doc = serde_json::json!({
                "optimal_expected_cost": result.optimal_expected_cost,
                "state_count": result.state_count,
                "residual": result.residual,
                "sweeps": result.sweeps,
            });
            if let Some(trials) = simulate_trials {
                let mut rng = RandomSource::new(seed, 0);
                let (mean, stderr) = oracle::simulate_policy(&result, &instance, &mut rng, trials)?;
                doc["simulated_mean"] = mean.into();
                doc["simulated_stderr"] = stderr.into();
            }
            println!("{doc}");
        }
        Command::Compare { file, strategies, trials, seed, knobs, out } => {
            if strategies.is_empty() {
                bail!("usage: --strategies takes at least two comma-separated ids");
            }
            let instance = load(&file)?;
            let configs = strategies
                .iter()
                .map(|s| knobs_to_config(s.parse()?, trials, seed, &knobs))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let comparison = bench::compare_strategies(&configs, &instance)?;
            let mut text = serde_json::to_string_pretty(&comparison)?;
            text.push('\n');
            emit(out.as_ref(), &text)?;
        }
        Command::Scenario { which } => {
            let (instance, out) = match which {
                ScenarioCommand::BanksSundaram { x, c, a, out } => {
                    (scenario::banks_sundaram(x, c, a)?, out)
                }
                ScenarioCommand::DtwCounterexample { epsilon, n, blocking_cost, out } => {
                    (scenario::dtw_counterexample(epsilon, n, blocking_cost)?, out)
                }
                ScenarioCommand::PaperMicro { a1, a2, out } => {
                    (scenario::paper_micro(a1, a2)?, out)
                }
            };
            instance.validate().into_result()?;
            io::write_instance(&out, &instance)?;
            println!(
                "{}",
                serde_json::json!({ "written": out.display().to_string(), "chains": instance.num_chains() })
            );
        }
        Command::Gen { chains, max_states, cost_min, cost_max, metric, k, seed, out } => {
            let metric = match metric.as_str() {
                "unit" => generate::MetricKind::Unit,
                "random-embedded" => generate::MetricKind::RandomEmbedded,
                other => bail!("metric must be `unit` or `random-embedded`, got `{other}`"),
            };
            let params = generate::GenParams {
                chains,
                max_states,
                cost_range: (cost_min, cost_max),
                metric,
                reward_target: k,
            };
            let instance = generate::gen_random_instance(&params, seed)?;
            io::write_instance(&out, &instance)?;
            println!(
                "{}",
                serde_json::json!({ "written": out.display().to_string(), "chains": chains, "seed": seed })
            );
        }
        Command::Witness { x, y, c } => {
            let report = oracle::banks_sundaram_witness(x, y, c)?;
            println!("{}", serde_json::to_string(&report)?);
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
