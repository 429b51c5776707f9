//! Command-line driver: runs TOML scenarios and writes CSV tables plus a manifest.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{Report, Scenario, Tolerances};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "qthermo", version, about = "Geometric thermodynamics of a driven qubit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its outputs.
    Run {
        file: PathBuf,
        /// Output directory; overrides [output].directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Random seed; overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to QTHERMO_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// Tolerance override as key=value, repeatable.
        #[arg(long = "tolerance-override", value_name = "KEY=VALUE")]
        tolerance_override: Vec<String>,
    },
    /// Check a scenario without running it.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Validate { file } => validate(&file),
        Cmd::Run {
            file,
            out_dir,
            seed,
            threads,
            tolerance_override,
        } => match run(&file, out_dir, seed, threads, &tolerance_override) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_IO)
            }
        },
    }
}

fn print_report(file: &Path, report: &Report) {
    eprintln!("{}: {} problem(s)", file.display(), report.issues.len());
    for issue in &report.issues {
        eprintln!("  {issue}");
    }
}

fn read(file: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(file).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn validate(file: &Path) -> ExitCode {
    let text = match read(file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match config::load(&text) {
        (Some(_), _) => {
            println!("{}: ok", file.display());
            ExitCode::SUCCESS
        }
        (None, report) => {
            print_report(file, &report);
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn apply_overrides(tol: &mut Tolerances, overrides: &[String]) -> Report {
    let mut report = Report::default();
    for o in overrides {
        let issue = match o.split_once('=') {
            None => Some(format!("expected KEY=VALUE, got \"{o}\"")),
            Some((k, v)) => match v.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => tol.set(k.trim(), x).err(),
                _ => Some(format!("{k}: expected a positive number, got \"{v}\"")),
            },
        };
        if let Some(message) = issue {
            report.issues.push(config::Issue {
                path: "--tolerance-override".into(),
                message,
            });
        }
    }
    report
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("QTHERMO_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("QTHERMO_THREADS must be a thread count, got \"{v}\"")),
        Err(_) => Ok(None),
    }
}

fn run(
    file: &Path,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    thread_flag: Option<usize>,
    overrides: &[String],
) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let text = match read(file) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let (scenario, report) = config::load(&text);
    let Some(mut scenario): Option<Scenario> = scenario else {
        print_report(file, &report);
        return Ok(ExitCode::from(EXIT_CONFIG));
    };
    let report = apply_overrides(&mut scenario.tolerances, overrides);
    if !report.is_empty() {
        print_report(file, &report);
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    let threads = match threads(thread_flag) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = seed.or(scenario.seed).unwrap_or(0);
    let dir = out_dir
        .or_else(|| scenario.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let result = run::execute(&scenario, seed);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let (status, error, outcome) = match result {
        Ok(o) => ("ok", serde_json::Value::Null, o),
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            (
                "failed",
                json!({"name": e.name(), "message": e.to_string()}),
                run::Outcome::default(),
            )
        }
    };
    let mut outputs = Vec::new();
    for (name, content) in &outcome.files {
        let path = dir.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(json!({"file": name, "sha256": hex::encode(Sha256::digest(content.as_bytes()))}));
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let t = &scenario.tolerances;
    let manifest = json!({
        "command": scenario.command.name(),
        "config": file.display().to_string(),
        "config_sha256": hex::encode(Sha256::digest(text.as_bytes())),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": rayon::current_num_threads(),
        "tolerances": {
            "floquet_drift": t.floquet_drift,
            "stokes_residual": t.stokes_residual,
            "chern_integer": t.chern_integer,
        },
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "timestamp_unix": timestamp,
        "status": status,
        "error": error,
        "outputs": outputs,
        "summary": outcome.summary,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(if status == "ok" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    })
}
