use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use distchaos_cli::presets::Preset;
use distchaos_cli::{DensityArgs, Failure};

#[derive(Parser)]
#[command(name = "distchaos", version, about = "Density-based chaos diagnostics for linear relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Density profile of a set spec as JSON.
    Density {
        spec: String,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 1_000)]
        window: u64,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
        /// Use the closed form when one is known.
        #[arg(long)]
        exact: bool,
        /// Write the prefix ratio series `n,ratio` here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Classify the vectors of a scenario file.
    Classify {
        scenario: PathBuf,
        #[arg(long)]
        verdict: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Run a built-in example and compare with its expected flags.
    Examples {
        #[arg(value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        /// Also write the preset's scenario JSON here.
        #[arg(long)]
        scenario_out: Option<PathBuf>,
    },
    /// Check the implication lattice on random scenarios.
    Lattice {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the first verdict to exercise the checker.
        #[arg(long)]
        inject: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Orbit seminorms and distances as CSV.
    Orbit {
        scenario: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Number of seminorm columns.
        #[arg(long)]
        seminorms: Option<u32>,
    },
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Density { spec, horizon, window, tail, exact, csv, stride } => {
            let (out, notes) = distchaos_cli::density(&DensityArgs {
                spec: &spec,
                horizon,
                window,
                tail,
                exact,
                csv: csv.as_deref(),
                stride,
            })?;
            for n in notes {
                eprintln!("note: {n}");
            }
            Ok(out)
        }
        Command::Classify { scenario, verdict, stats } => {
            distchaos_cli::classify(&scenario, verdict.as_deref(), stats.as_deref())
        }
        Command::Examples { preset, horizon, scenario_out } => {
            distchaos_cli::examples(preset, horizon, scenario_out.as_deref())
        }
        Command::Lattice { samples, seed, inject, report } => {
            distchaos_cli::lattice(samples, seed, inject, report.as_deref())
        }
        Command::Orbit { scenario, csv, seminorms } => distchaos_cli::orbit(&scenario, csv.as_deref(), seminorms),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            let _ = stdout.write_all(f.stdout.as_bytes());
            let _ = stdout.flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
