use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use swarmfield_cli::catalog::list_catalog;
use swarmfield_cli::{load_scenario, run_scenario, CliError, Scenario};

/// Closed-loop swarm density experiments from JSON scenario files.
#[derive(Parser)]
#[command(name = "swarmfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory; with several scenarios each gets `DIR/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List initializers, controllers, vector fields, metrics and analyses.
    Catalog,
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn load(path: &PathBuf) -> Result<Scenario, CliError> {
    let mut s = load_scenario(path)?;
    s.apply_seed_override()?;
    Ok(s)
}

fn run(paths: &[PathBuf], out: Option<PathBuf>, jobs: usize) -> u8 {
    let mut jobs_list = Vec::with_capacity(paths.len());
    for p in paths {
        match load(p) {
            Ok(s) => {
                let dir = match &out {
                    Some(d) if paths.len() == 1 => d.clone(),
                    Some(d) => d.join(&s.name),
                    None => s.output_dir(),
                };
                jobs_list.push((s, dir));
            }
            Err(e) => {
                eprintln!("{}: {e}", p.display());
                return e.exit_code();
            }
        }
    }
    let mut dirs: Vec<&PathBuf> = jobs_list.iter().map(|(_, d)| d).collect();
    dirs.sort();
    if let Some(w) = dirs.windows(2).find(|w| w[0] == w[1]) {
        eprintln!("two scenarios write to {}", w[0].display());
        return 2;
    }

    let next = AtomicUsize::new(0);
    let worst = Mutex::new(0u8);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, jobs_list.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((s, dir)) = jobs_list.get(k) else { break };
                let code = match run_scenario(s, dir) {
                    Ok(report) => {
                        if report.passed {
                            println!("{}: pass ({})", report.name, dir.display());
                        } else {
                            println!("{}: FAIL ({})", report.name, dir.display());
                            for f in &report.failures {
                                println!("  {f}");
                            }
                        }
                        report.exit_code()
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", s.name);
                        e.exit_code()
                    }
                };
                let mut w = worst.lock().unwrap();
                *w = (*w).max(code);
            });
        }
    });
    worst.into_inner().unwrap()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenarios, out, jobs } => run(&scenarios, out, jobs),
        Command::Catalog => {
            print!("{}", list_catalog());
            0
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("{}: ok", s.name);
                0
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                e.exit_code()
            }
        },
    };
    ExitCode::from(code)
}
