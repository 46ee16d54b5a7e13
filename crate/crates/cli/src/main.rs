use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kernelcast::runner::{self, RunReport};
use kernelcast::Error;

/// Thread-count override for the kernel-column pool.
const THREADS_VAR: &str = "KERNELCAST_THREADS";

#[derive(Parser)]
#[command(name = "kernelcast", version, about = "Memory-kernel extraction and DMD extrapolation for driven two-level electron transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Compare two CSV series column by column; `a` is the reference.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(vec![format!("{THREADS_VAR}: expected a positive integer, got {raw:?}")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(vec![format!("{THREADS_VAR}: {e}")]))
}

fn summary(report: &RunReport) {
    let dir = report.config.output.dir.display();
    if let Some(h) = &report.hierarchy {
        println!("hierarchy: depth {} with {} ADOs", h.depth, h.n_ado);
        if let Some(c) = &h.depth_check {
            println!("depth check: L+2 deviation {:.3e}", c.deviation);
        }
    }
    for (name, d) in &report.dmd {
        println!("dmd {name}: rank {}", d.rank);
    }
    for (name, m) in &report.metrics {
        match m.rel_l2 {
            Some(r) => println!("{name}: rel_l2 {r:.3e} max_abs {:.3e}", m.max_abs),
            None => println!("{name}: max_abs {:.3e}", m.max_abs),
        }
    }
    println!("report: {dir}/report.json");
}

fn execute(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let report = runner::run(&config)?;
            summary(&report);
        }
        Command::Compare { a, b, out } => {
            let cmp = runner::compare_files(&a, &b)?;
            let json = serde_json::to_string_pretty(&cmp)?;
            match out {
                Some(path) => std::fs::write(&path, json).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
