use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use v2xsim_cli::{
    cmd_derive_threshold, cmd_fit_alpha, cmd_select_beta, cmd_simulate, cmd_validate, default_betas, exit_code,
    format_beta_report, format_fit_report, format_threshold, write_bundled_curves, SimConfig, DEFAULT_CONFIG_TOML,
};

#[derive(Parser)]
#[command(name = "v2xsim", version, about = "PHY abstraction and network simulation for V2X broadcast")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration or run manifest (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one value, e.g. `--set road.density_vpk=400`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig> {
        Ok(SimConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the implementation loss to a directory of PER curves.
    FitAlpha {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(short, long, default_value = "model.toml")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the SINR threshold of the configured settings under a model.
    DeriveThreshold {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare step-mode PRR for several target PERs with curve mode.
    SelectBeta {
        /// Comma-separated candidates.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the configured scenario and write metric CSVs and a manifest.
    Simulate {
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the annotated defaults, or the resolved configuration when a
    /// file or overrides are given.
    PrintConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the bundled synthetic curve set.
    ExportCurves {
        #[arg(short, long, default_value = "curves")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitAlpha { curves, scenario, beta, out, cfg } => {
            let r = cmd_fit_alpha(&cfg.load()?, &curves, &scenario, beta, &out)?;
            print!("{}", format_fit_report(&r));
        }
        Command::DeriveThreshold { model, cfg } => {
            print!("{}", format_threshold(&cmd_derive_threshold(&cfg.load()?, &model)?));
        }
        Command::SelectBeta { betas, out, cfg } => {
            let betas = betas.unwrap_or_else(default_betas);
            print!("{}", format_beta_report(&cmd_select_beta(&cfg.load()?, &betas, &out)?));
        }
        Command::Simulate { out, cfg } => {
            let m = cmd_simulate(&cfg.load()?, &out)?;
            let o = m.outcomes;
            println!(
                "{} opportunities, {} received, {} lost to SINR, {} to half duplex; results in {}",
                o.opportunities,
                o.received,
                o.lost_sinr,
                o.lost_half_duplex,
                out.display()
            );
        }
        Command::Validate { cfg } => print!("{}", cmd_validate(&cfg.load()?)?),
        Command::PrintConfig { cfg } => {
            if cfg.config.is_none() && cfg.overrides.is_empty() {
                print!("{DEFAULT_CONFIG_TOML}");
            } else {
                print!("{}", cfg.load()?.to_toml()?);
            }
        }
        Command::ExportCurves { out } => {
            for p in write_bundled_curves(&SimConfig::default(), &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
