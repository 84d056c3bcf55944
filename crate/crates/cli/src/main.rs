//! `vskimg`: simulate, reconstruct, chain and diagnose spectral image data.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use vskimg_cli::commands;
use vskimg_cli::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "vskimg",
    version,
    about = "Image reconstruction from scattered Fourier samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Landweber relaxation parameter.
    #[arg(long)]
    tau: Option<f64>,
    /// Kernel shape parameter.
    #[arg(long)]
    gamma: Option<f64>,
    /// Absolute stopping tolerance.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic visibilities and truth images for every channel.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct one channel from a visibility CSV.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Visibility CSV.
        #[arg(long)]
        vis: PathBuf,
        /// Image CSV whose transform sets the kernel scaling; plain kernel if absent.
        #[arg(long)]
        scaling_image: Option<PathBuf>,
    },
    /// Reconstruct all channels, each scaled by the previous image.
    Chain {
        #[command(flatten)]
        common: Common,
        /// Directory of vis_ch*.csv files; simulated in memory if absent.
        #[arg(long)]
        vis_dir: Option<PathBuf>,
        /// `truth` or an image CSV for the first channel.
        #[arg(long)]
        trigger: Option<String>,
        /// Use a constant scaling in every channel.
        #[arg(long)]
        plain_kernel: bool,
    },
    /// Evaluate the interpolation, stability and continuity bounds on seeded instances.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
}

fn prepare(common: &Common, extra: Overrides) -> Result<RunConfig> {
    let overrides = Overrides {
        seed: common.seed,
        tau: common.tau,
        gamma: common.gamma,
        delta: common.delta,
        ..extra
    };
    let cfg = RunConfig::load(common.config.as_deref(), &overrides)?;
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common } => commands::simulate(&prepare(&common, Overrides::default())?, &common.out),
        Command::Reconstruct {
            common,
            vis,
            scaling_image,
        } => {
            let cfg = prepare(&common, Overrides::default())?;
            commands::reconstruct(&cfg, &vis, scaling_image.as_deref(), &common.out)
        }
        Command::Chain {
            common,
            vis_dir,
            trigger,
            plain_kernel,
        } => {
            let cfg = prepare(
                &common,
                Overrides {
                    trigger,
                    plain_kernel,
                    ..Default::default()
                },
            )?;
            commands::chain(&cfg, vis_dir.as_deref(), &common.out)
        }
        Command::Diagnose { common } => commands::diagnose(&prepare(&common, Overrides::default())?, &common.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checked inequalities failed; see the reports in the output directory");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
