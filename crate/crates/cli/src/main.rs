use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use tppd::harness::{self, Algorithm, RunResult};
use tppd::nn::gradcheck::{grad_check_lstm_seeds, GradCheckSpec, DEFAULT_FD_STEP};
use tppd::policies::{train_agent, Variant};
use tppd::predictor::{self, EvalReport, TrainedPredictor};
use tppd::{Config, Error, Result};

/// Gradient checks above this relative error fail.
const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "tppd",
    version,
    about = "Trajectory-prediction pre-offloading simulator for vehicular edge computing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, overriding `experiment.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the trajectory predictor and report test metrics.
    TrainPredictor {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a predictor checkpoint on the held-out split.
    EvalPredictor {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/predictor.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train a DDQN or DQN agent on the configured scenario.
    TrainAgent {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ddqn")]
        variant: Variant,
    },
    /// Run one algorithm and write its per-slot trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algorithm: Algorithm,
    },
    /// Run every configured algorithm over every seed.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of the LSTM regressor's gradients.
    GradCheck {
        #[command(flatten)]
        common: Common,
        /// Number of random networks to check.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

struct Ctx {
    cfg: Config,
    root: u64,
    out: PathBuf,
}

impl Ctx {
    fn new(c: &Common) -> Result<Self> {
        let cfg = match &c.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        }
        .seeded(c.seed);
        let out = c
            .out
            .clone()
            .unwrap_or_else(|| cfg.experiment.output_dir.clone());
        Ok(Ctx {
            cfg,
            root: c.seed,
            out,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.clone(),
            source: e,
        })
    }

    fn scenario(&self) -> Result<Arc<tppd::simenv::Scenario>> {
        Ok(Arc::new(harness::build_scenario(&self.cfg, self.root)?))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn report_csv(r: &EvalReport) -> String {
    format!("{}\n{}\n", EvalReport::csv_header(), r.csv_row())
}

fn result_line(r: &RunResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.algorithm, r.seed, r.completion_s, r.decision_s, r.psi, r.penalized_s, r.power, r.misses
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainPredictor { common } => {
            let ctx = Ctx::new(&common)?;
            let (train, test) = harness::setup::predictor_split(&ctx.cfg, ctx.root)?;
            let p = predictor::train(&train, &ctx.cfg.predictor.model)?;
            let report = p.evaluate(&test)?;
            ctx.create_out()?;
            p.save(&ctx.path("predictor.json"))?;
            write(&ctx.path("predictor_eval.csv"), &report_csv(&report))?;
            print!("{}", report_csv(&report));
        }
        Command::EvalPredictor { common, checkpoint } => {
            let ctx = Ctx::new(&common)?;
            let p =
                TrainedPredictor::load(&checkpoint.unwrap_or_else(|| ctx.path("predictor.json")))?;
            let (_, test) = harness::setup::predictor_split(&ctx.cfg, ctx.root)?;
            print!("{}", report_csv(&p.evaluate(&test)?));
        }
        Command::TrainAgent { common, variant } => {
            let ctx = Ctx::new(&common)?;
            let (agent, curve) = train_agent(ctx.scenario()?, &ctx.cfg.agent, variant)?;
            let name = format!("{variant:?}").to_lowercase();
            ctx.create_out()?;
            agent.save(&ctx.path(&format!("agent_{name}.json")))?;
            harness::write_learning_curve(
                &ctx.path(&format!("learning_curve_{name}.csv")),
                &curve,
            )?;
            if let Some(last) = curve.last() {
                println!(
                    "{}\n{}",
                    tppd::policies::CurvePoint::csv_header(),
                    last.csv_row()
                );
            }
        }
        Command::Simulate { common, algorithm } => {
            let ctx = Ctx::new(&common)?;
            let scenario = ctx.scenario()?;
            let artifacts = harness::prepare_artifacts(&ctx.cfg, &scenario, &[algorithm])?;
            let exp = &ctx.cfg.experiment;
            let seed = exp.seeds[0];
            let mut trace = Vec::new();
            let stats = harness::run_algorithm(
                algorithm,
                &scenario,
                &artifacts,
                harness::eval_env_seed(ctx.root, seed),
                tppd::rng::derive_seed(ctx.root, "policy", &[seed]),
                exp,
                Some(&mut trace),
            )?;
            harness::write_trace(&ctx.path(&format!("trace_{algorithm}.csv")), &trace)?;
            let r = RunResult::new(
                algorithm,
                seed,
                &stats,
                algorithm.psi(exp),
                exp.station_power_w,
            );
            println!(
                "{}\n{}",
                harness::output::COMPARISON_HEADER.join(","),
                result_line(&r)
            );
        }
        Command::Compare { common } => {
            let ctx = Ctx::new(&common)?;
            let scenario = ctx.scenario()?;
            let algorithms = harness::parse_algorithms(&ctx.cfg.experiment.algorithms)?;
            let artifacts = harness::prepare_artifacts(&ctx.cfg, &scenario, &algorithms)?;
            let results = harness::run_comparison(&ctx.cfg, ctx.root, &scenario, &artifacts)?;
            harness::write_comparison(&ctx.path("comparison.csv"), &results)?;
            harness::write_summary(&ctx.path("summary.csv"), &harness::summarize(&results))?;
            for s in harness::summarize(&results) {
                println!(
                    "{:<14} penalized {:.4} s (± {:.4})  power {:.4}  misses {:.1}",
                    s.algorithm, s.penalized_mean, s.penalized_std, s.power_mean, s.misses_mean
                );
            }
        }
        Command::GradCheck { common, seeds } => {
            let spec = GradCheckSpec::default();
            let max = grad_check_lstm_seeds(
                spec,
                (0..seeds).map(|s| common.seed.wrapping_add(s)),
                DEFAULT_FD_STEP,
            )?;
            println!("max_rel_error={max:e} seeds={seeds}");
            if !(max < GRAD_CHECK_TOLERANCE) {
                return Err(Error::Invariant(format!(
                    "max relative gradient error {max:e} exceeds {GRAD_CHECK_TOLERANCE:e}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
