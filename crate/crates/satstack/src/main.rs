use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satstack::commands::{
    self, CounterexampleArgs, Scenario, SimulateArgs, SweepArgs, SynthesizeArgs, VerifyArgs, DEFAULT_SEED,
};
use satstack::schema::PolicySpec;
use satstack::{parse_list, CliError, Outcome};

/// Nested-saturation feedback synthesis for integrator chains.
///
/// Exit codes: 0 pass, 2 budget violation, 3 validation error, 4 I/O error.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a law from a config; writes law.json and bounds.json.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicySpec>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Simulate a law; writes trajectory.csv and report.json (or battery.csv/json).
    Simulate {
        #[arg(long)]
        law: PathBuf,
        /// Initial state "v1,v2,…".
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Run this many random initial states instead of --x0.
        #[arg(long)]
        battery: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Radius of the ball the battery samples from.
        #[arg(long, default_value_t = 1000.0)]
        radius: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one simulation and emit the verification report with bound tables.
    Verify {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Write report.json here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-order derivative bounds over a grid of lambda values; writes sweep.csv.
    SweepLambda {
        #[arg(long)]
        config: PathBuf,
        /// Grid "l1,l2,…", every value >= 1.
        #[arg(long, default_value = "1,2,4,6.5,10")]
        lambdas: String,
        #[arg(long, value_enum)]
        policy: Option<PolicySpec>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Growth ladder of a feedback that is not p-bounded; writes growth.csv.
    DemoCounterexample {
        #[arg(long, value_enum, default_value = "linear-combination")]
        scenario: Scenario,
        #[arg(long, default_value = "0,10,100,1000")]
        scales: String,
        /// Gains "a,b,c,d" of the linear combination.
        #[arg(long, default_value = "1,1,0.5,1")]
        gains: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Nested law for the contrast column.
        #[arg(long)]
        law: Option<PathBuf>,
        #[arg(long, default_value_t = 4000.0)]
        contrast_horizon: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Synthesize { config, policy, out } => {
            commands::synthesize(&SynthesizeArgs { config, policy, out }, &mut stdout)
        }
        Command::Simulate {
            law,
            x0,
            step,
            horizon,
            battery,
            seed,
            radius,
            out,
        } => {
            let x0 = x0.as_deref().map(parse_list).transpose()?;
            commands::simulate(
                &SimulateArgs {
                    law,
                    x0,
                    step,
                    horizon,
                    out,
                    battery,
                    seed,
                    radius,
                },
                &mut stdout,
            )
        }
        Command::Verify {
            law,
            x0,
            step,
            horizon,
            out,
        } => {
            let x0 = parse_list(&x0)?;
            commands::verify(
                &VerifyArgs {
                    law,
                    x0,
                    step,
                    horizon,
                    out,
                },
                &mut stdout,
            )
        }
        Command::SweepLambda {
            config,
            lambdas,
            policy,
            out,
        } => {
            let lambdas = parse_list(&lambdas)?;
            commands::sweep_lambda(
                &SweepArgs {
                    config,
                    lambdas,
                    policy,
                    out,
                },
                &mut stdout,
            )
        }
        Command::DemoCounterexample {
            scenario,
            scales,
            gains,
            step,
            horizon,
            law,
            contrast_horizon,
            out,
        } => {
            let scales = parse_list(&scales)?;
            let gains: [f64; 4] = parse_list(&gains)?
                .try_into()
                .map_err(|_| CliError::Validation(String::from("--gains needs four values")))?;
            let args = CounterexampleArgs {
                scenario,
                scales,
                gains,
                step,
                horizon,
                law,
                contrast_horizon,
                out,
            };
            commands::demo_counterexample(&args, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SATSTACK_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("satstack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
