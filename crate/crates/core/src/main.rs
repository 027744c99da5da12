use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relsgd::cli::{
    apply_overrides, audit_command, audit_exit_status, exit_code_for, load_config, run, Overrides,
};
use relsgd::schedule::Regime;

#[derive(Parser)]
#[command(name = "relsgd", version, about = "Byzantine-resilient two-time-scale local SGD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file (key=value text; a run manifest also works).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Metric regime override.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Regime>,
    /// Byzantine count override.
    #[arg(long)]
    f: Option<usize>,
    /// Global round count override.
    #[arg(long)]
    rounds: Option<u64>,
    /// Replication count override.
    #[arg(long)]
    replications: Option<usize>,
}

fn parse_mode(s: &str) -> Result<Regime, String> {
    match s {
        "sc" => Ok(Regime::Sc),
        "pl" => Ok(Regime::Pl),
        other => Err(format!("invalid mode '{other}' (sc or pl)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write the metric CSV, manifest, and rate fit.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Fail instead of running when the theorem validators are violated.
        #[arg(long)]
        strict: bool,
        /// Also record per-round traces and write audit slack tables.
        #[arg(long)]
        audit: bool,
    },
    /// Run the per-round inequality audits and write slack tables.
    Audit {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn overrides_from(common: &CommonArgs, audit: bool) -> Overrides {
    Overrides {
        seed: common.seed,
        mode: common.mode,
        f: common.f,
        rounds: common.rounds,
        replications: common.replications,
        audit,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run {
            common,
            strict,
            audit,
        } => {
            let ov = overrides_from(&common, audit);
            match load_config(&common.config).and_then(|c| apply_overrides(c, &ov)) {
                Ok(config) => match run(&config, &common.out, strict) {
                    Ok(artifacts) => {
                        println!("wrote {}", artifacts.csv_path.display());
                        println!("wrote {}", artifacts.manifest_path.display());
                        println!("wrote {}", artifacts.rate_fit_path.display());
                        if let Some(p) = &artifacts.audit_path {
                            println!("wrote {}", p.display());
                        }
                        if let Some(fit) = &artifacts.output.summary.rate_fit {
                            println!(
                                "rate fit: slope={} over rounds [{}, {}]",
                                fit.slope, fit.window.0, fit.window.1
                            );
                        }
                        0
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_code_for(&e)
                    }
                },
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::Audit { common } => {
            let ov = overrides_from(&common, true);
            match load_config(&common.config).and_then(|c| apply_overrides(c, &ov)) {
                Ok(config) => match audit_command(&config, &common.out) {
                    Ok(artifacts) => {
                        println!("wrote {}", artifacts.audit_path.display());
                        println!("worst slack: {}", artifacts.worst_slack);
                        if !artifacts.passed {
                            eprintln!("audit FAILED: slack below -1e-9");
                        }
                        audit_exit_status(artifacts.worst_slack)
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_code_for(&e)
                    }
                },
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
    };
    ExitCode::from(status as u8)
}
