use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scarmet::{load, run, Experiment};

#[derive(Parser)]
#[command(name = "scarmet", version, about = "Run scar-metrology experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set N=[4,6]` or `--set eta='"pi/2"'`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Recompute everything and leave the cache untouched.
        #[arg(long)]
        no_cache: bool,
    },
    /// Print the resolved configuration and the cache key of every job.
    Plan {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn resolve(path: &PathBuf, mut overrides: Vec<String>, extra: Vec<(&str, toml::Value)>) -> anyhow::Result<scarmet::RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    overrides.extend(extra.into_iter().map(|(k, v)| format!("{k}={v}")));
    load(&text, &overrides)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            overrides,
            output_dir,
            threads,
            no_cache,
        } => {
            let mut extra = Vec::new();
            if let Some(d) = output_dir {
                extra.push(("output_dir", toml::Value::String(d.display().to_string())));
            }
            if let Some(t) = threads {
                extra.push(("threads", toml::Value::Integer(t as i64)));
            }
            let cfg = match resolve(&config, overrides, extra) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let report = match run(&cfg, !no_cache) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(3);
                }
            };
            for f in &report.files {
                println!("{}", f.display());
            }
            if cfg.experiment == Experiment::Verify {
                for r in &report.verification {
                    println!("N = {}", r.n_sites);
                    for c in &r.checks {
                        let mark = if c.passed { "ok  " } else { "FAIL" };
                        println!("  {mark} {:<28} {:>10.3e} (tol {:.0e})", c.name, c.value, c.tolerance);
                    }
                }
                if !report.verification_passed() {
                    return ExitCode::from(1);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Plan { config, overrides } => {
            let cfg = match resolve(&config, overrides, Vec::new()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let jobs = match scarmet::plan(&cfg) {
                Ok(j) => j,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            println!("{}", serde_json::to_string_pretty(&cfg).unwrap_or_default());
            for j in &jobs {
                let key = scarmet::cache_key(j).unwrap_or_default();
                println!("{key}  {}", j.label());
            }
            ExitCode::SUCCESS
        }
    }
}
