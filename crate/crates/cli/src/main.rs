use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wgqed::presets::{preset_text, PRESETS};
use wgqed::run::{emit_table, run_scenario, RunError};
use wgqed::scenario::{parse_scenario, Diagnostic};

#[derive(Parser)]
#[command(name = "wgqed", version, about = "Photon scattering off emitters in a waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario file or a built-in preset and write CSV.
    Run {
        /// Scenario file (TOML).
        scenario: Option<PathBuf>,
        /// Write the table here instead of the scenario's output path or stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Run a built-in preset instead of a file.
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Omit the `#` provenance lines before the header.
        #[arg(long)]
        no_provenance: bool,
    },
    /// List the built-in presets.
    Presets,
}

fn report(diags: &[Diagnostic]) {
    let stderr = io::stderr();
    let mut e = stderr.lock();
    for d in diags {
        let _ = writeln!(e, "{d}");
    }
}

fn fail(code: u8, d: Diagnostic) -> ExitCode {
    report(&[d]);
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, output, threads, preset, no_provenance } => {
            let text = match (&scenario, &preset) {
                (Some(path), None) => match fs::read_to_string(path) {
                    Ok(t) => t,
                    Err(e) => return fail(1, Diagnostic::error("io", None, format!("{}: {e}", path.display()))),
                },
                (None, Some(name)) => match preset_text(name) {
                    Some(t) => t.to_string(),
                    None => {
                        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                        let msg = format!("no preset '{name}' (available: {})", names.join(", "));
                        return fail(1, Diagnostic::error("unknown_preset", None, msg));
                    }
                },
                _ => return fail(1, Diagnostic::error("usage", None, "give a scenario file or --preset <name>")),
            };
            let sc = match parse_scenario(&text) {
                Ok(sc) => sc,
                Err(e) => {
                    report(&e.diagnostics);
                    return ExitCode::from(1);
                }
            };

            let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
                Ok(p) => p,
                Err(e) => return fail(1, Diagnostic::error("threads", None, e.to_string())),
            };
            let table = match pool.install(|| run_scenario(&sc)) {
                Ok(t) => t,
                Err(RunError::Invalid(e)) => {
                    report(&e.diagnostics);
                    return ExitCode::from(1);
                }
                Err(RunError::Numerical(d)) => return fail(2, d),
            };
            report(&table.warnings);

            let target = output.or_else(|| sc.output.path.as_ref().map(PathBuf::from));
            let written = match &target {
                Some(path) => fs::File::create(path)
                    .map(io::BufWriter::new)
                    .and_then(|mut w| emit_table(&table, &mut w, !no_provenance).and_then(|_| w.flush())),
                None => {
                    let stdout = io::stdout();
                    let mut w = io::BufWriter::new(stdout.lock());
                    emit_table(&table, &mut w, !no_provenance).and_then(|_| w.flush())
                }
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(2, Diagnostic::error("io", None, e.to_string())),
            }
        }
    }
}
