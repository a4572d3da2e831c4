use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nce_cli::config::{ExperimentConfig, ExperimentKind};
use nce_cli::{run, Overrides};

#[derive(Parser)]
#[command(name = "nce", version, about = "Noise-contrastive estimation experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit one estimator and write result.json and trace.csv.
    Fit(Common),
    /// CondNCE derivative curves on the Gaussian-mean model.
    CondnceSweep(Common),
    /// Error-versus-sample-size sweep.
    RateSweep(Common),
    /// Run the gradient, identity and convexity suites.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        inject_zeta_sign_fault: bool,
    },
    /// Asymptotic covariance and sample-complexity reports.
    Analyze(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, fault) = match cli.cmd {
        Cmd::Fit(c) => (ExperimentKind::Fit, c, false),
        Cmd::CondnceSweep(c) => (ExperimentKind::CondnceSweep, c, false),
        Cmd::RateSweep(c) => (ExperimentKind::RateSweep, c, false),
        Cmd::Check { common, inject_zeta_sign_fault } => (ExperimentKind::Check, common, inject_zeta_sign_fault),
        Cmd::Analyze(c) => (ExperimentKind::Analyze, c, false),
    };
    let ov = Overrides { seed: common.seed, out: common.out, inject_zeta_sign_fault: fault };
    let result = ExperimentConfig::load(&common.config).and_then(|cfg| run(kind, cfg, &ov));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nce: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
