use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qfock::job::{self, Overrides};

/// Run a quadratic Fock space job file and write its reports.
#[derive(Parser, Debug)]
#[command(name = "qfock", version)]
struct Args {
    /// Job description (JSON).
    job: PathBuf,
    /// Output directory; overrides `output.dir` in the job.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the pass tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(threads) = std::env::var("QFOCK_THREADS").ok().and_then(|v| v.parse().ok()) {
        qfock::par::limit_threads(threads);
    }
    let outcome = job::load_job(&args.job).and_then(|spec| {
        let report = job::run(&spec, Overrides { seed: args.seed, tol: args.tol })?;
        let dir = args
            .out
            .clone()
            .or_else(|| spec.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        report.write_to(&dir)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            println!("{}", report.summary);
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("qfock: {e}");
            ExitCode::from(2)
        }
    }
}
