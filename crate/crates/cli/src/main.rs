use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use locg_cli::manifest::{ensure_dir, ManifestArgs, UsageError};
use locg_cli::{plot, run, sigma_table, verify};

#[derive(Parser)]
#[command(name = "locg", version, about = "Locally optimal block Krylov eigensolver harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every (triple, trial) and write traces, rate reports and summaries
    Run(ManifestArgs),
    /// Tabulate sigma - 1 over the second half of each run
    SigmaTable {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Read existing runs from this directory instead of solving
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Draw three-panel SVGs from trace files or directories
    Plot {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "locg-plots")]
        out: PathBuf,
    },
    /// Check line-search identities, Galerkin orthogonality and monotonicity
    Verify {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Check an existing trace file instead of solving
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run(args) => {
            let m = args.resolve()?;
            let out = run::cmd_run(&m)?;
            for t in &out.trials {
                let s = &t.summary;
                println!(
                    "{} {} seed {}: {} after {} iterations, final error {}",
                    s.problem,
                    t.triple,
                    s.seed,
                    s.outcome,
                    s.iters,
                    s.final_err_rel.map_or("n/a".into(), |e| format!("{e:.3e}"))
                );
            }
            Ok(out.exit_code() as u8)
        }
        Command::SigmaTable { manifest, traces } => {
            let dir = match traces {
                Some(d) => d,
                None => {
                    let m = manifest.resolve()?;
                    run::cmd_run(&m)?;
                    m.out
                }
            };
            let rows = sigma_table::sigma_rows(&dir)?;
            let table = sigma_table::render_table(&rows);
            print!("{table}");
            ensure_dir(&dir)?;
            std::fs::write(dir.join("sigma_table.txt"), &table)?;
            std::fs::write(dir.join("sigma_table.csv"), sigma_table::render_csv(&rows))?;
            Ok(0)
        }
        Command::Plot { inputs, out } => {
            if inputs.is_empty() {
                return Err(UsageError("plot needs at least one trace file or directory".into()).into());
            }
            for p in plot::cmd_plot(&inputs, &out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Verify { manifest, trace } => {
            if let Some(path) = trace {
                let issues = verify::verify_trace_file(&path)?;
                for i in &issues {
                    println!("FAIL iteration {}: {}", i.iter, i.what);
                }
                if issues.is_empty() {
                    println!("PASS {}", path.display());
                }
                return Ok(u8::from(!issues.is_empty()));
            }
            let m = manifest.resolve()?;
            let rep = verify::cmd_verify(&m)?;
            for r in rep.failures() {
                println!(
                    "FAIL {} seed {} iteration {}: identities {:?}, galerkin {:.2e}, monotone {}",
                    r.triple,
                    r.seed,
                    r.iter,
                    r.identities.as_ref().map(|i| i.worst()),
                    r.galerkin,
                    r.monotone
                );
            }
            for (t, s, msg) in &rep.breakdowns {
                println!("FAIL {t} seed {s}: breakdown: {msg}");
            }
            println!("{} iterations checked, {}", rep.rows.len(), if rep.pass() { "all pass" } else { "failures found" });
            Ok(u8::from(!rep.pass()))
        }
    }
}
