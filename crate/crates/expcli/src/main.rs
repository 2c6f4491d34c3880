use std::path::PathBuf;
use std::process::ExitCode;

use carnot_exp::{describe, ExperimentConfig, EXPERIMENTS};
use clap::{Parser, Subcommand};

/// Thread count override for the internal rayon pool.
const THREADS_ENV: &str = "CARNOT_EXP_THREADS";

#[derive(Parser)]
#[command(name = "carnot-exp", version, about = "Nonlocal horizontal gradient experiments on Carnot groups")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiments listed in a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment ids.
    ListExperiments,
    /// Describe an experiment and its CSV columns.
    Describe { experiment: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the thread pool: {e}");
                }
            }
            _ => eprintln!("warning: ignoring {THREADS_ENV}={v}"),
        }
    }
    match cli.cmd {
        Cmd::ListExperiments => {
            for (id, _) in EXPERIMENTS {
                println!("{id}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Describe { experiment } => match describe(&experiment) {
            Some(d) => {
                println!("{d}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown experiment `{experiment}`");
                ExitCode::from(2)
            }
        },
        Cmd::Run { config, out } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let reports = match carnot_exp::run(&cfg, &out) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut ok = true;
            for r in &reports {
                if let Some(e) = &r.error {
                    println!("FAIL {} (aborted: {e})", r.experiment);
                    ok = false;
                    continue;
                }
                for c in &r.criteria {
                    println!(
                        "{} {}::{} measured={:.6e} bound={:.6e}",
                        if c.pass { "PASS" } else { "FAIL" },
                        r.experiment,
                        c.name,
                        c.measured,
                        c.bound
                    );
                    ok &= c.pass;
                }
            }
            println!("outputs written to {}", out.display());
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
