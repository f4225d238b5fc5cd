//! `ssep-lab`: runs one experiment family from a TOML configuration and
//! writes CSV tables, `report.json` and `manifest.json` into `--out`.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use experiments::Artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Simulate,
    Pde,
    Rate,
    Dv,
    Entropy,
    Measure,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Pde => "pde",
            Kind::Rate => "rate",
            Kind::Dv => "dv",
            Kind::Entropy => "entropy",
            Kind::Measure => "measure",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssep-lab", version, about = "Open exclusion process experiments")]
struct Cli {
    /// Experiment family.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent trajectories.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    cfg.validate(cli.kind.name())?;

    let start = Instant::now();
    let artifacts = match cli.kind {
        Kind::Simulate => experiments::simulate(&cfg, cfg.seed, cli.threads.max(1)),
        Kind::Pde => experiments::pde(&cfg),
        Kind::Rate => experiments::rate(&cfg),
        Kind::Dv => experiments::dv(&cfg, cfg.seed),
        Kind::Entropy => experiments::entropy(&cfg),
        Kind::Measure => experiments::measure(&cfg, cfg.seed),
    }
    .with_context(|| format!("{} experiment failed", cli.kind.name()))?;
    let wall = start.elapsed().as_secs_f64();

    write_outputs(&cli, &cfg, &artifacts, wall)?;
    println!("{}", serde_json::to_string_pretty(&artifacts.report)?);
    Ok(())
}

fn write_outputs(cli: &Cli, cfg: &ExperimentConfig, artifacts: &Artifacts, wall: f64) -> Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut files = Vec::new();
    for table in &artifacts.tables {
        let path = cli.out.join(table.name);
        write_csv(&path, &table.header, &table.rows)?;
        files.push(table.name);
    }
    let report = json!({ "kind": cli.kind.name(), "seed": cfg.seed, "results": artifacts.report });
    write_json(&cli.out.join("report.json"), &report)?;
    files.push("report.json");

    let canonical = serde_json::to_vec(cfg)?;
    let manifest = json!({
        "kind": cli.kind.name(),
        "config_path": cli.config.as_ref().map(|p| p.display().to_string()),
        "config_sha256": Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect::<String>(),
        "config": cfg,
        "seed": cfg.seed,
        "threads": cli.threads,
        "versions": {
            "ssep-lab": env!("CARGO_PKG_VERSION"),
            "target": format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        },
        "wall_time_s": wall,
        "files": files,
    });
    write_json(&cli.out.join("manifest.json"), &manifest)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
