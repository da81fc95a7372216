//! `kickback`: training runs, gradient and factorization checks, online
//! regret experiments and data generation for rectifier regression networks.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kickback::experiments::{GradcheckConfig, OracleConfig, DEFAULT_SIZES};
use kickback::regret::{Adversary, RegretScenario};
use kickback::{InitScheme, RectifierSign};

use crate::commands::RegretArgs;
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "kickback", version, about = "Kickback and Backprop training for rectifier regression networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-driven commands share these.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; every key is optional.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Positive,
    Negative,
}

impl From<SignArg> for RectifierSign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Positive => RectifierSign::Positive,
            SignArg::Negative => RectifierSign::Negative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Uniform,
    Signed,
}

impl From<InitArg> for InitScheme {
    fn from(s: InitArg) -> Self {
        match s {
            InitArg::Uniform => InitScheme::Uniform,
            InitArg::Signed => InitScheme::Signed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a network; writes metrics.csv, network.txt, summary.json.
    Train(ConfigArgs),
    /// Compare Backprop gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
        layer_sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        n_inputs: usize,
        #[arg(long, default_value_t = 1e-6)]
        fd_step: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        init_scheme: InitArg,
        #[arg(long)]
        no_bias: bool,
        /// Flip one analytic gradient to exercise the failure path.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Factorization, sign-agreement and small-step descent checks.
    Oracles {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
        layer_sizes: Vec<usize>,
        #[arg(long, default_value_t = 1e-4)]
        learning_rate: f64,
        #[arg(long)]
        no_bias: bool,
    },
    /// Online regret of a single projected rectifier node; one JSON line per run.
    Regret {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// gaussian, random-sign, linear, sign, anti-sign or never-fire.
        #[arg(long, default_value = "gaussian", value_parser = commands::parse_adversary)]
        adversary: Adversary,
        #[arg(long, value_enum, default_value = "positive")]
        sign: SignArg,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// ||w_1|| / R.
        #[arg(long, default_value_t = 0.25)]
        init_fraction: f64,
        /// Constant step size instead of the c/sqrt(t) schedule.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of runs; run r uses seed + r.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// CSV of `x_1..x_d, phi` rows to replay instead of a generated sequence.
        #[arg(long)]
        sequence: Option<PathBuf>,
        #[arg(long, requires = "sequence")]
        header: bool,
        /// Also compare against the grid rectilinear optimum (dim <= 4).
        #[arg(long)]
        grid_resolution: Option<usize>,
    },
    /// Write synthetic teacher data: train.csv, test.csv, teacher.txt.
    Datagen(ConfigArgs),
    /// k-fold cross-validation over the learning-rate (and kappa) grid.
    Gridsearch(ConfigArgs),
    /// Per-layer coherence of a saved network on the test split.
    CoherenceReport {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        network: PathBuf,
    },
    /// Propose rescale factors from mean |delta| / mean |epsilon| per layer.
    CalibrateRescale {
        #[command(flatten)]
        config: ConfigArgs,
        /// Saved network; a fresh initialization from the config otherwise.
        #[arg(short, long)]
        network: Option<PathBuf>,
    },
    /// Dump delta, epsilon, tau and pi for every node on one example.
    Inspect {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Take the example from the test split.
        #[arg(long)]
        test: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => commands::cmd_train(&commands::load_config(a.config.as_deref(), a.output_dir)?),
        Command::Gradcheck {
            seed,
            layer_sizes,
            n_inputs,
            fd_step,
            tolerance,
            init_scheme,
            no_bias,
            corrupt_gradient,
        } => commands::cmd_gradcheck(&GradcheckConfig {
            seed,
            layer_sizes,
            n_inputs,
            fd_step,
            tolerance,
            init_scheme: init_scheme.into(),
            bias: !no_bias,
            corrupt: corrupt_gradient,
            ..GradcheckConfig::default()
        }),
        Command::Oracles {
            seed,
            trials,
            layer_sizes,
            learning_rate,
            no_bias,
        } => commands::cmd_oracles(&OracleConfig {
            seed,
            trials,
            layer_sizes,
            learning_rate,
            bias: !no_bias,
            ..OracleConfig::default()
        }),
        Command::Regret {
            dim,
            steps,
            adversary,
            sign,
            radius,
            init_fraction,
            eta,
            seed,
            runs,
            sequence,
            header,
            grid_resolution,
        } => commands::cmd_regret(&RegretArgs {
            scenario: RegretScenario {
                dim,
                steps,
                radius,
                init_fraction,
                sign: sign.into(),
                adversary,
                constant_eta: eta,
                seed,
            },
            runs,
            sequence,
            header,
            grid_resolution,
        }),
        Command::Datagen(a) => commands::cmd_datagen(&commands::load_config(a.config.as_deref(), a.output_dir)?),
        Command::Gridsearch(a) => commands::cmd_gridsearch(&commands::load_config(a.config.as_deref(), a.output_dir)?),
        Command::CoherenceReport { config, network } => commands::cmd_coherence_report(
            &commands::load_config(config.config.as_deref(), config.output_dir)?,
            &network,
        ),
        Command::CalibrateRescale { config, network } => commands::cmd_calibrate(
            &commands::load_config(config.config.as_deref(), config.output_dir)?,
            network.as_deref(),
        ),
        Command::Inspect {
            config,
            network,
            index,
            test,
        } => commands::cmd_inspect(
            &commands::load_config(config.config.as_deref(), config.output_dir)?,
            network.as_deref(),
            index,
            test,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kickback: {e}");
            e.into()
        }
    }
}
