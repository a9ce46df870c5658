//! `quasiwall`: runs one experiment per invocation and writes a JSON
//! manifest plus CSV data into the output directory.
//!
//! Exit codes: 0 on success, 2 for bad configuration or input, 3 when a
//! numerical procedure fails to reach its target.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(quasiwall_core::Error),
    /// A check or target that was computed but not met.
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<quasiwall_core::Error> for CliError {
    fn from(e: quasiwall_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "quasiwall", version, about = "Moving-wall control experiments for a particle in a box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ideal and discrete eigenvalue curves over a range of wall positions.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a_min: Option<f64>,
        #[arg(long)]
        a_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Single-wall path permuting the lowest modes, checked by propagation.
    Theorem1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a_i: Option<f64>,
        #[arg(long)]
        a_f: Option<f64>,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Multi-wall path realizing an arbitrary permutation.
    Permutation {
        #[command(flatten)]
        common: Common,
        /// Images of ranks 1..n, e.g. `2,3,1`.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<u64>>,
    },
    /// Transfer between two states given by real sine coefficients.
    Theorem3 {
        #[command(flatten)]
        common: Common,
        /// Initial sine coefficients, e.g. `1`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        initial: Option<Vec<f64>>,
        /// Target sine coefficients, e.g. `0.6,0.8`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Option<Vec<f64>>,
    },
    /// Stochastic energy growth model and an exact permutation orbit.
    Growth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k0: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        a_i: Option<f64>,
        #[arg(long)]
        a_f: Option<f64>,
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Quick numerical self-checks.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config (or an earlier manifest) to start from.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectory_every: Option<usize>,
}

impl Common {
    fn resolve(&self, kind: CommandKind) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path, kind)?,
            None => ExperimentConfig::defaults(kind),
        };
        if c.command != kind {
            return Err(CliError::Config(format!(
                "config is for {:?} but the {:?} command was run",
                c.command, kind
            )));
        }
        set(&mut c.grid_points, self.grid_points.map(Some));
        set(&mut c.dt_target, self.dt);
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.kappa, self.kappa);
        set(&mut c.eta_star, self.eta);
        set(&mut c.i_star, self.height);
        set(&mut c.seed, self.seed);
        set(&mut c.output_dir, self.out.clone().map(Some));
        set(&mut c.trajectory_every, self.trajectory_every.map(Some));
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn coefficients(values: Vec<f64>) -> Vec<[f64; 2]> {
    values.into_iter().map(|v| [v, 0.0]).collect()
}

fn resolve(command: Command) -> Result<ExperimentConfig, CliError> {
    let config = match command {
        Command::Spectrum { common, a_min, a_max, samples, modes } => {
            let mut c = common.resolve(CommandKind::Spectrum)?;
            set(&mut c.spectrum.a_min, a_min);
            set(&mut c.spectrum.a_max, a_max);
            set(&mut c.spectrum.samples, samples);
            set(&mut c.spectrum.modes, modes);
            c
        }
        Command::Theorem1 { common, a_i, a_f, modes } => {
            let mut c = common.resolve(CommandKind::Theorem1)?;
            set(&mut c.theorem1.a_i, a_i);
            set(&mut c.theorem1.a_f, a_f);
            set(&mut c.theorem1.modes, modes);
            c
        }
        Command::Permutation { common, sigma } => {
            let mut c = common.resolve(CommandKind::Permutation)?;
            set(&mut c.permutation.sigma, sigma);
            c
        }
        Command::Theorem3 { common, initial, target } => {
            let mut c = common.resolve(CommandKind::Theorem3)?;
            set(&mut c.theorem3.initial, initial.map(coefficients));
            set(&mut c.theorem3.target, target.map(coefficients));
            c
        }
        Command::Growth { common, beta, gamma, k0, steps, a_i, a_f, cycles } => {
            let mut c = common.resolve(CommandKind::Growth)?;
            let g = &mut c.growth;
            set(&mut g.beta, beta);
            set(&mut g.gamma, gamma);
            set(&mut g.k0, k0);
            set(&mut g.steps, steps);
            set(&mut g.a_i, a_i);
            set(&mut g.a_f, a_f);
            set(&mut g.cycles, cycles);
            c
        }
        Command::Selftest { common } => common.resolve(CommandKind::Selftest)?,
    };
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match resolve(cli.command).and_then(|c| commands::run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
