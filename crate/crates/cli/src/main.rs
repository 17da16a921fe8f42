use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtsim_cli::commands::{self, Output};
use dtsim_cli::{exit_code, router, Overrides};
use dtsim_core::catalog::Catalog;
use dtsim_core::report::{TableFormat, TablePreset};
use dtsim_core::scenario::Scenario;
use dtsim_core::{Result, ScenarioMode};

#[derive(Parser)]
#[command(
    name = "dtsim",
    version,
    about = "Distributed low-communication training: feasibility, cost and compliance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// text, csv, json or markdown.
    #[arg(long, global = true, default_value = "text")]
    format: TableFormat,

    /// optimistic, expected or conservative.
    #[arg(long, global = true, value_parser = parse_mode)]
    scenario_mode: Option<ScenarioMode>,

    #[arg(long, global = true)]
    duration_days: Option<f64>,

    /// Built-in regime name, or `none`.
    #[arg(long, global = true)]
    regime: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one configuration.
    Simulate { scenario: PathBuf },
    /// Find the cheapest configuration reaching `optimize.target_flop`.
    Optimize { scenario: PathBuf },
    /// Regenerate a minimum-cost table: table1 or table2.
    Table {
        #[arg(value_parser = parse_preset)]
        preset: TablePreset,
        /// Scenario whose keys apply to every row.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Serve the JSON API on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn parse_mode(s: &str) -> std::result::Result<ScenarioMode, String> {
    ScenarioMode::parse(s).ok_or_else(|| format!("unknown scenario mode `{s}` (optimistic, expected, conservative)"))
}

fn parse_preset(s: &str) -> std::result::Result<TablePreset, String> {
    s.parse().map_err(|e: dtsim_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<Option<Output>> {
    let catalog = Catalog::load()?;
    let overrides = Overrides {
        scenario_mode: cli.scenario_mode,
        duration_days: cli.duration_days,
        regime: cli.regime,
    };
    let out = match cli.command {
        Command::Simulate { scenario } => {
            commands::simulate_scenario(&commands::load_scenario(&scenario, &overrides)?, &catalog, cli.format)?
        }
        Command::Optimize { scenario } => {
            commands::optimize_scenario(&commands::load_scenario(&scenario, &overrides)?, &catalog, cli.format)?
        }
        Command::Table { preset, scenario } => {
            let mut sc = match scenario {
                Some(path) => commands::load_scenario(&path, &overrides)?,
                None => Scenario::default(),
            };
            overrides.apply(&mut sc);
            commands::table(preset, &sc, &catalog, cli.format)?
        }
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
                eprintln!("listening on http://127.0.0.1:{port}");
                axum::serve(listener, router(catalog)).await
            })?;
            return Ok(None);
        }
    };
    Ok(Some(out))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            if let Some(out) = out {
                print!("{}", out.stdout);
                for n in out.notes {
                    eprintln!("note: {n}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
