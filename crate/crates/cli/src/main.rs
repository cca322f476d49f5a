mod certificate;
mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use error::CliError;

/// Data-driven min-max MPC from noisy input-state data.
#[derive(Debug, Parser)]
#[command(name = "ddmpc", version)]
struct Cli {
    /// TOML config (sections plant, data, weights, constraints, controller,
    /// synthesis, verify). Without one the cstr preset is used.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set data.seed=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the offline experiment and write the data CSV plus metadata.
    GenerateData {
        #[arg(long, default_value = "data.csv")]
        out: PathBuf,
        /// data.seed
        #[arg(long)]
        seed: Option<u64>,
        /// data.length
        #[arg(long)]
        length: Option<usize>,
        /// data.eps
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Solve the min-max problem at one state and print gamma, F, P.
    Synthesize {
        /// Data CSV; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Queried state as comma-separated values (controller.x0).
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Write a certificate file for `verify`.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Run the receding-horizon closed loop and write run CSVs and a plot script.
    Simulate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        /// Input weight R = r·I; repeat for one run directory per value.
        #[arg(long = "r", value_name = "R")]
        r: Vec<f64>,
        /// controller.steps
        #[arg(long)]
        steps: Option<usize>,
        /// controller.online_noise_eps
        #[arg(long)]
        online_noise_eps: Option<f64>,
        /// controller.x0
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
    /// Re-check a certificate against sampled consistent systems.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// verify.samples
        #[arg(long)]
        samples: Option<usize>,
        /// verify.boundary_states
        #[arg(long)]
        boundary_states: Option<usize>,
        /// verify.seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the stirred-tank benchmark and compare total costs with the reported values.
    ReproduceCstr {
        /// First data seed (default data.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// controller.steps
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn push<T: std::fmt::Display>(overrides: &mut Vec<String>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        overrides.push(format!("{key}={v}"));
    }
}

fn push_vector(overrides: &mut Vec<String>, key: &str, value: Option<&String>) {
    if let Some(v) = value {
        overrides.push(format!("{key}=[{v}]"));
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let command_line = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let mut overrides = cli.overrides.clone();
    match &cli.command {
        Command::GenerateData { seed, length, eps, .. } => {
            push(&mut overrides, "data.seed", *seed);
            push(&mut overrides, "data.length", *length);
            push(&mut overrides, "data.eps", *eps);
        }
        Command::Synthesize { x0, .. } => push_vector(&mut overrides, "controller.x0", x0.as_ref()),
        Command::Simulate {
            steps,
            online_noise_eps,
            x0,
            ..
        } => {
            push(&mut overrides, "controller.steps", *steps);
            push(&mut overrides, "controller.online_noise_eps", *online_noise_eps);
            push_vector(&mut overrides, "controller.x0", x0.as_ref());
        }
        Command::Verify {
            samples,
            boundary_states,
            seed,
            ..
        } => {
            push(&mut overrides, "verify.samples", *samples);
            push(&mut overrides, "verify.boundary_states", *boundary_states);
            push(&mut overrides, "verify.seed", *seed);
        }
        Command::ReproduceCstr { steps, .. } => push(&mut overrides, "controller.steps", *steps),
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;

    match &cli.command {
        Command::GenerateData { out, .. } => commands::generate_data(&cfg, out, &command_line),
        Command::Synthesize { data, certificate, .. } => {
            let data = commands::load_data(&cfg, data.as_deref())?;
            commands::synthesize(&cfg, &data, certificate.as_deref())
        }
        Command::Simulate { data, out_dir, r, .. } => {
            let data = commands::load_data(&cfg, data.as_deref())?;
            commands::simulate(&cfg, &data, out_dir, r, &command_line)
        }
        Command::Verify { certificate, data, .. } => commands::verify(&cfg.verify, certificate, data),
        Command::ReproduceCstr {
            seed, seeds, out_dir, ..
        } => commands::reproduce_cstr(
            &cfg,
            seed.unwrap_or(cfg.data.seed),
            *seeds,
            out_dir.as_deref(),
            &command_line,
        ),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors count as config errors; help and version are not errors.
            std::process::exit(if e.use_stderr() { 4 } else { 0 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
