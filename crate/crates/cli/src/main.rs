use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chaoslab::harness::{
    check_suite, render_report, run_study, simulate, write_simulation, write_study, StudyConfig, Suite,
};
use chaoslab::Error;
use clap::{Parser, Subcommand};

/// Propagation-of-chaos laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One coupled run per N; writes particle states at the checkpoints.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full convergence study; writes study.csv and study.json.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a check suite and prints its JSON report.
    Check {
        /// lemma21, lemma22, girsanov, harnack, pinsker or spde_oracles.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Renders a markdown summary of a study directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Exit code for a failed check suite.
const CHECK_FAILED: u8 = 2;

fn out_dir(out: Option<PathBuf>, cfg: &StudyConfig) -> Result<PathBuf, Error> {
    out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_path".into()))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = StudyConfig::from_file(&config)?;
            let dir = out_dir(out, &cfg)?;
            let start = Instant::now();
            let (records, flow) = simulate(&cfg)?;
            write_simulation(&records, &flow, &cfg, &dir, start.elapsed().as_secs_f64())?;
            log::info!("wrote {} states to {}", records.len(), dir.display());
        }
        Command::Study { config, out } => {
            let cfg = StudyConfig::from_file(&config)?;
            let dir = out_dir(out, &cfg)?;
            let start = Instant::now();
            let result = run_study(&cfg)?;
            write_study(&result, &cfg, &dir, start.elapsed().as_secs_f64())?;
            log::info!("wrote {} rows to {}", result.rows.len(), dir.display());
        }
        Command::Check { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let report = check_suite(suite, seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if !report.passed {
                return Ok(CHECK_FAILED);
            }
        }
        Command::Report { input } => print!("{}", render_report(&input)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
