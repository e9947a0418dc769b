use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chanlaw_core::harness::{
    override_seed, parse_config, read_csv_rows, run_sweep, ExperimentConfig, ReportFormat,
    SlopeSummary,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "chanlaw",
    version,
    about = "Purity and fidelity sweeps for noisy parameterized channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write the report.
    Run {
        config: PathBuf,
        /// Output file; defaults to output.path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Worker threads (results do not depend on this).
        #[arg(long)]
        threads: Option<usize>,
        /// Replace the Monte Carlo seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Refit slopes from a CSV report.
    Slopes { report: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_ERROR: u8 = 2;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })
}

fn run(
    config: &Path,
    out: Option<PathBuf>,
    format: Option<Format>,
    threads: Option<usize>,
    seed: Option<u64>,
) -> Result<(), ExitCode> {
    let mut cfg = load(config)?;
    if let Some(seed) = seed {
        override_seed(&mut cfg, seed);
    }
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return Err(ExitCode::from(CONFIG_ERROR));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| {
                eprintln!("error: thread pool: {e}");
                ExitCode::from(CONFIG_ERROR)
            })?;
    }
    let format = match format {
        Some(Format::Csv) => ReportFormat::Csv,
        Some(Format::Json) => ReportFormat::Json,
        None => cfg.format,
    };
    let report = run_sweep(&cfg).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(NUMERICAL_ERROR)
    })?;
    let text = report.render(format);
    match out.or(cfg.output_path) {
        Some(path) => fs::write(&path, text).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(CONFIG_ERROR)
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn slopes(path: &Path) -> Result<(), ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })?;
    let rows = read_csv_rows(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })?;
    let summary = SlopeSummary::from_rows(&rows);
    for (name, fit) in summary.entries() {
        match fit {
            Ok(fit) => println!(
                "{name:<14} slope {:>8.4}  r2 {:.6}  points {}",
                fit.slope, fit.r2, fit.used
            ),
            Err(e) => println!("{name:<14} NA ({e})"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            threads,
            seed_override,
        } => run(&config, out, format, threads, seed_override),
        Command::Validate { config } => load(&config).map(|cfg| {
            println!(
                "ok: {} channel, {} noise, {} averaging, {} sweep points",
                cfg.channel.kind().name(),
                cfg.noise.kind().name(),
                cfg.averaging.name(),
                cfg.sweep.len()
            );
        }),
        Command::Slopes { report } => slopes(&report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
