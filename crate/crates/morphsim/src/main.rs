use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morphsim::scenario::Check;
use morphsim::{parse_config, run_scenario, Error, RunMode, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "morphsim",
    version,
    about = "Morphogen transport on a 1D/2D grid: eigenvalue, steady state, \
             time integration, and decay-rate verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (flat `key = value`); built-in default scenario
    /// when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding the config's `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print nothing on success; errors still go to stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute the smallest Laplacian eigenvalue and the decay constant chi.
    Eig,
    /// Compute the steady state.
    Steady,
    /// Integrate the system in time and emit the diagnostics series.
    Evolve,
    /// Run the full pipeline and check decay rates, energy identity, and
    /// bounds; exit 1 if any check fails.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> morphsim::Result<bool> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.clone(), source: e })?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let mode = match cli.command {
        Command::Eig => RunMode::Eig,
        Command::Steady => RunMode::Steady,
        Command::Evolve => RunMode::Evolve,
        Command::Verify => RunMode::Verify,
    };
    let report = run_scenario(&cfg, mode, &out_dir)?;
    if !cli.quiet {
        println!("lambda1 = {:.15}", report.lambda1);
        println!("chi     = {:.15}", report.chi);
        if let Some(st) = &report.steady {
            println!(
                "steady state: {} sweeps, final update {:.3e}",
                st.picard_iterations, st.final_update_norm
            );
        }
        if let Some(stats) = &report.stats {
            println!(
                "integration: {} steps ({} rejected), min l {:.3e}, max s {:.6}",
                stats.steps, stats.rejected, stats.min_l_seen, stats.max_s_seen
            );
        }
        for Check { name, pass, detail } in &report.checks {
            println!("check {name}: {} ({detail})", if *pass { "PASS" } else { "FAIL" });
        }
        for f in &report.files {
            println!("wrote {}", f.display());
        }
        if !report.checks.is_empty() {
            println!("overall: {}", if report.all_pass() { "PASS" } else { "FAIL" });
        }
    }
    Ok(report.all_pass())
}
