use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clustersend_cli::analyze::analyze;
use clustersend_cli::stats::decimal;
use clustersend_cli::sweep::{sweep, sweep_result, write_sweep_csv, SweepOptions};
use clustersend_cli::verify::{verify, Suite, VerifyOptions};
use clustersend_cli::{simulate, write_csv, CliError, SpecArgs, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "clustersend",
    version,
    about = "Cluster-sending analysis and simulation"
)]
struct Cli {
    /// Worker threads for trial fan-out (0 picks one per core).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Print the exact expectations and reference curves for a cluster pair.
    Analyze {
        #[arg(long)]
        n1: Option<u32>,
        #[arg(long)]
        f1: Option<u32>,
        #[arg(long)]
        n2: Option<u32>,
        #[arg(long)]
        f2: Option<u32>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        f: Option<u32>,
    },
    /// Run Monte Carlo trials and emit one CSV row per trial.
    Simulate {
        /// TOML file with run parameters; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
        /// CSV destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where traces of failing trials are written.
        #[arg(long, default_value = ".")]
        trace_dir: PathBuf,
    },
    /// Run the verification suites.
    Verify {
        /// Suite to run; repeat for several (default: all).
        #[arg(long = "suite")]
        suites: Vec<Suite>,
        #[arg(long)]
        max_n: Option<u32>,
        /// Fuzzed traces for the safety suite.
        #[arg(long, default_value_t = 10_000)]
        traces: u64,
        /// Monte Carlo trials per shape for the sfmax suite.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit the expected-case curves for n = 2f+1 and n = 3f+1 as CSV.
    Sweep {
        #[arg(long, default_value_t = 20)]
        f_max: u32,
        /// Monte Carlo trials per point; adds empirical columns when positive.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Analyze {
            n1,
            f1,
            n2,
            f2,
            n,
            f,
        } => {
            let missing = || CliError::Usage("analyze needs --n (or --n1 and --n2)".into());
            let n1 = n1.or(n).ok_or_else(missing)?;
            let n2 = n2.or(n).ok_or_else(missing)?;
            let f1 = f1.or(f).unwrap_or(0);
            let f2 = f2.or(f).unwrap_or(0);
            print!("{}", analyze(n1, f1, n2, f2)?);
        }
        Command::Simulate {
            config,
            spec,
            out,
            trace_dir,
        } => {
            let base = match &config {
                Some(path) => SpecArgs::from_file(path)?,
                None => SpecArgs::default(),
            };
            let spec = base.overlay(spec).resolve()?;
            for warning in spec.warnings() {
                eprintln!("warning: {warning}");
            }
            let report = simulate(&spec, threads)?;
            let mut w = output(out.as_deref())?;
            write_csv(&report.rows, &mut w)?;
            w.flush()?;
            if !report.notes.is_empty() {
                eprintln!(
                    "warning: {} of {} trials refused by the robustness check (rows have steps = 0)",
                    report.notes.len(),
                    spec.trials
                );
            }
            let steps = report.steps();
            eprintln!(
                "{} trials, {} confirmed, mean steps {} (ci95 {}), max {}",
                spec.trials,
                report.confirmed(),
                decimal(steps.mean),
                decimal(steps.ci95()),
                steps.max
            );
            if !report.failures.is_empty() {
                std::fs::create_dir_all(&trace_dir)?;
                for failure in &report.failures {
                    let path = trace_dir.join(format!("trace-trial-{}.jsonl", failure.trial));
                    failure
                        .trace
                        .write_jsonl(BufWriter::new(File::create(&path)?))?;
                    eprintln!(
                        "invariant violated in trial {}: {} (trace: {})",
                        failure.trial,
                        failure.problems.join("; "),
                        path.display()
                    );
                }
                return Err(CliError::Invariant(format!(
                    "{} trials violated an invariant",
                    report.failures.len()
                )));
            }
        }
        Command::Verify {
            suites,
            max_n,
            traces,
            trials,
            seed,
        } => {
            let suites = if suites.is_empty() {
                Suite::ALL.to_vec()
            } else {
                suites
            };
            let opts = VerifyOptions {
                max_n,
                traces,
                trials,
                seed,
                threads,
            };
            let reports = verify(&suites, &opts);
            for r in &reports {
                print!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            println!(
                "{} of {} suites passed",
                reports.len() - failed,
                reports.len()
            );
            if failed > 0 {
                return Err(CliError::Invariant(format!("{failed} suites failed")));
            }
        }
        Command::Sweep {
            f_max,
            trials,
            seed,
            out,
        } => {
            let rows = sweep(SweepOptions {
                f_max,
                trials,
                seed,
                threads,
            })?;
            let mut w = output(out.as_deref())?;
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            let result = sweep_result(&rows);
            if !result.all_ok() {
                for row in result.rows.iter().filter(|r| !r.ok) {
                    eprintln!("outside band: {row:?}");
                }
                return Err(CliError::Invariant(
                    "empirical means outside the band".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
