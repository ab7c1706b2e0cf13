use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deft_cli::bench::{self, BenchSpec};
use deft_cli::config::{resolve_output, RankValue, RunConfig, OUTPUT_DIR_ENV};
use deft_cli::verify::{run_verify, run_verify_with, SignFlippingQr};
use deft_cli::{sweep, CliError, CliResult};
use deft_core::Method;

/// Gradient low-rank projection: training runs, projector benchmarks and
/// invariant checks.
///
/// Exit status: 0 success, 1 configuration or I/O error, 2 divergence,
/// 3 verification failure.
#[derive(Parser)]
#[command(name = "deft", version)]
struct Cli {
    /// Directory that receives every output file (file names are kept).
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the problem described by a TOML config and write per-step metrics.
    Train {
        config: PathBuf,
        /// Overrides `[run].output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time projector builds on a seeded synthetic gradient.
    Bench {
        #[arg(long, value_delimiter = ',', required = true, value_parser = bench::parse_shape)]
        shapes: Vec<(usize, usize)>,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "deft,svd,rsvd,dct")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the invariant suite and write a JSON report.
    Verify {
        #[arg(long, default_value = "verify-report.json")]
        report: PathBuf,
        /// Replace the QR kernel with one that flips signs between calls.
        #[arg(long, hide = true)]
        perturb_qr_signs: bool,
    },
    /// Train a config at several ranks plus a dense reference.
    RankSweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<RankValue>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(dir) = &cli.output_dir {
        std::env::set_var(OUTPUT_DIR_ENV, dir);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train { config, output } => {
            let cfg = RunConfig::load(&config)?;
            let output = output.map(|p| resolve_output(&p));
            let (s, path) = deft_cli::run::train_to_file(&cfg, output.as_deref())?;
            eprintln!(
                "{} steps, final loss {:.6e}, {} state elements -> {}",
                s.steps,
                s.final_loss,
                s.state_elements,
                path.display()
            );
            Ok(())
        }
        Command::Bench {
            shapes,
            ranks,
            reps,
            methods,
            seed,
            output,
        } => {
            let spec = BenchSpec {
                shapes,
                ranks,
                reps,
                methods,
                seed,
            };
            let rows = bench::run_bench(&spec, |note| eprintln!("note: {note}"))?;
            emit(output.as_deref(), |w| bench::write_csv(&rows, w))
        }
        Command::Verify {
            report,
            perturb_qr_signs,
        } => {
            let result = if perturb_qr_signs {
                let fixture = SignFlippingQr::default();
                run_verify_with(&|a| fixture.qr(a))
            } else {
                run_verify()
            };
            print!("{}", result.render());
            let path = resolve_output(&report);
            let json = serde_json::to_string_pretty(&result).expect("report serializes");
            write_file(&path, json.as_bytes())?;
            if result.passed {
                Ok(())
            } else {
                Err(CliError::Verification(format!(
                    "verification failed: {}",
                    result.failures().join(", ")
                )))
            }
        }
        Command::RankSweep { config, ranks, output } => {
            let cfg = RunConfig::load(&config)?;
            let rows = sweep::rank_sweep(&cfg, &ranks, |note| eprintln!("note: {note}"))?;
            emit(output.as_deref(), |w| sweep::write_csv(&rows, w))
        }
    }
}

fn emit(output: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    match output {
        Some(p) => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            write_file(&resolve_output(p), &buf)
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
