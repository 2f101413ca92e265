use clap::{Args, Parser, Subcommand};
use lowrank_core::optim::Termination;
use lowrank_experiments::config::{ConfigError, DiagnosticsMode, SeedSpec};
use lowrank_experiments::{exit, output, presets, theory, ExperimentConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lowrank", version, about = "Run, verify and predict low-rank factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Use seeds 0..N instead of the configured list.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,
    #[arg(long, value_name = "K")]
    max_iters: Option<usize>,
    /// Relative residual at which runs stop.
    #[arg(long, value_name = "E")]
    eps: Option<f64>,
    /// Output directory (default: the config's, else out/<name>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "MODE")]
    diagnostics: Option<DiagnosticsMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (sweep value, method, seed) and write trace, mean and summary CSVs.
    Run {
        /// Config file, or the name of a built-in preset.
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check dynamics invariants and write verify.csv.
    Verify {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write predicted curves, scale thresholds and iteration counts.
    Theory {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Last iteration of the emitted curves.
        #[arg(long, default_value_t = 1000)]
        t_max: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Write a built-in configuration to <out>/<name>.toml.
    Preset {
        name: Option<String>,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// List the available presets.
        #[arg(long)]
        list: bool,
    },
}

enum Failure {
    Config(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => exit::CONFIG,
            Failure::Other(_) => exit::OTHER,
        }
    }
}

fn load(source: &str, overrides: &Overrides) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let path = Path::new(source);
    let mut cfg = if path.exists() {
        ExperimentConfig::load(path).map_err(|e| match e {
            ConfigError::Io { .. } => Failure::Other(e.to_string()),
            ConfigError::Invalid { .. } => Failure::Config(format!("{source}: {e}")),
        })?
    } else if presets::text(source).is_some() {
        presets::load(source).map_err(|e| Failure::Config(format!("preset {source}: {e}")))?
    } else {
        return Err(Failure::Other(format!(
            "{source}: no such file or preset (presets: {})",
            presets::names().collect::<Vec<_>>().join(", ")
        )));
    };
    if let Some(n) = overrides.seeds {
        cfg.seeds = SeedSpec::count(n);
    }
    if let Some(k) = overrides.max_iters {
        cfg.stop.max_iters = k;
    }
    if let Some(e) = overrides.eps {
        cfg.stop.eps = e;
    }
    if let Some(mode) = overrides.diagnostics {
        cfg.diagnostics.mode = mode;
    }
    cfg.validate().map_err(|e| Failure::Config(format!("{source} (after overrides): {e}")))?;
    let dir = overrides.out.clone().unwrap_or_else(|| cfg.output_dir());
    Ok((cfg, dir))
}

fn other<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Other(e.to_string())
}

fn run(source: &str, overrides: &Overrides) -> Result<i32, Failure> {
    let (cfg, dir) = load(source, overrides)?;
    let result = lowrank_experiments::run_experiment(&cfg).map_err(other)?;
    let written = output::write_outputs(&result, &dir).map_err(other)?;
    println!("{:<16} {:<9} {:>6} {:>10} {:>14}", "cell", "method", "runs", "converged", "mean iters");
    for cell in &result.cells {
        for &method in &cfg.methods {
            let runs = cell.runs_for(method);
            let converged = runs.iter().filter(|r| r.termination == Termination::Converged).count();
            let mean = runs.iter().map(|r| r.iterations as f64).sum::<f64>() / runs.len() as f64;
            println!("{:<16} {:<9} {:>6} {:>10} {:>14.1}", cell.cell.label, method, runs.len(), converged, mean);
        }
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    let diverged = result.diverged();
    if diverged > 0 {
        eprintln!("{diverged} run(s) diverged; see summary.csv");
        return Ok(exit::DIVERGED);
    }
    Ok(exit::OK)
}

fn verify(source: &str, overrides: &Overrides) -> Result<i32, Failure> {
    let (cfg, dir) = load(source, overrides)?;
    let (report, _) = lowrank_experiments::verify(&cfg).map_err(other)?;
    std::fs::create_dir_all(&dir).map_err(other)?;
    let path = dir.join("verify.csv");
    report
        .write_csv(std::io::BufWriter::new(std::fs::File::create(&path).map_err(other)?))
        .map_err(other)?;
    let failed: Vec<_> = report.failures().collect();
    for c in &failed {
        eprintln!("FAIL {} [{}]: measured {:e} > {:e}", c.name, c.scope, c.measured, c.threshold);
    }
    println!("{} checks, {} failed; report in {}", report.checks.len(), failed.len(), path.display());
    Ok(if failed.is_empty() { exit::OK } else { exit::VERIFY_FAILED })
}

fn predict(source: &str, overrides: &Overrides, t_max: usize, stride: usize) -> Result<i32, Failure> {
    let (cfg, dir) = load(source, overrides)?;
    let rows = theory::theory_rows(&cfg).map_err(other)?;
    let written = theory::write_theory(&rows, &dir, t_max, stride).map_err(other)?;
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(exit::OK)
}

fn preset(name: Option<&str>, out: &Path, list: bool) -> Result<i32, Failure> {
    if list || name.is_none() {
        for n in presets::names() {
            println!("{n}");
        }
        return Ok(exit::OK);
    }
    let name = name.unwrap();
    let text = presets::text(name).ok_or_else(|| {
        Failure::Config(format!(
            "unknown preset '{name}' (available: {})",
            presets::names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    std::fs::create_dir_all(out).map_err(other)?;
    let path = out.join(format!("{name}.toml"));
    std::fs::write(&path, text).map_err(other)?;
    println!("{}", path.display());
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, overrides } => run(config, overrides),
        Command::Verify { config, overrides } => verify(config, overrides),
        Command::Theory { config, overrides, t_max, stride } => predict(config, overrides, *t_max, *stride),
        Command::Preset { name, out, list } => preset(name.as_deref(), out, *list),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            let (Failure::Config(msg) | Failure::Other(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code() as u8)
        }
    }
}
