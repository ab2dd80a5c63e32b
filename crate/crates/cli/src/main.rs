use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use phntrack::detector::{complexity_at, complexity_counts};
use phntrack::harness::{export_results, Campaign, CampaignConfig, Format, Metadata};
use phntrack::video::{fit_rd, read_rd_points};

#[derive(Parser)]
#[command(
    name = "phntrack",
    version,
    about = "MIMO-OFDM phase-noise tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and export one record per grid point.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output format; inferred from the extension of --out when omitted.
        #[arg(long)]
        format: Option<Format>,
        /// Worker threads (default: all available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit D(R) = b / (R + z) + a to a CSV with columns rate_bps, mse.
    FitRd {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Operation counts of the iterative detector.
    Complexity {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        nt: u64,
        #[arg(long)]
        nr: u64,
        /// Iteration count; fractional values give averaged counts.
        #[arg(long)]
        t: f64,
    },
}

/// Failures that map to a dedicated exit status.
#[derive(Debug)]
enum Fatal {
    Config(anyhow::Error),
    Threshold(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Fatal {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<phntrack::Error>() {
            Some(phntrack::Error::Config(_)) => Fatal::Config(e),
            Some(phntrack::Error::FailureThreshold { .. }) => Fatal::Threshold(e),
            _ => Fatal::Other(e),
        }
    }
}

fn infer_format(out: &Path) -> Format {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn simulate(
    config: &Path,
    out: &Path,
    format: Option<Format>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Fatal> {
    let mut cfg = CampaignConfig::load(config)
        .with_context(|| format!("loading {}", config.display()))
        .map_err(Fatal::Config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let workers = workers
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    let campaign = Campaign::new(cfg.clone()).context("setting up campaign")?;
    let output = campaign.run(workers).context("running campaign")?;
    let meta = Metadata::for_config(&cfg);
    export_results(
        &output.records,
        &meta,
        out,
        format.unwrap_or_else(|| infer_format(out)),
    )
    .with_context(|| format!("writing {}", out.display()))?;
    // Results are on disk before a failure-threshold exit.
    output.check_failures().context("numerical failures")?;
    let failures: u64 = output.counts.iter().map(|c| c.failures).sum();
    eprintln!(
        "wrote {} records to {} ({failures} failed trials)",
        output.records.len(),
        out.display()
    );
    Ok(())
}

fn fit(input: &Path, out: &Path) -> Result<(), Fatal> {
    let points = read_rd_points(input).with_context(|| format!("reading {}", input.display()))?;
    let fit = fit_rd(&points).context("fitting rate-distortion curve")?;
    let text = serde_json::to_string_pretty(&fit).context("serializing fit")?;
    std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!(
        "a = {:.6}, b = {:.6}, z = {:.6}, rss = {:.3e}",
        fit.a, fit.b, fit.z, fit.rss
    );
    Ok(())
}

fn complexity(n: u64, nt: u64, nr: u64, t: f64) -> Result<(), Fatal> {
    if t.fract() == 0.0 && t >= 0.0 {
        let c = complexity_counts(n, nt, nr, t as u64).context("complexity")?;
        println!("mult {}\nadd {}", c.mult, c.add);
    } else {
        let (m, a) = complexity_at(n, nt, nr, t).context("complexity")?;
        println!("mult {m:.1}\nadd {a:.1}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            format,
            workers,
            seed,
        } => simulate(&config, &out, format, workers, seed),
        Command::FitRd { input, out } => fit(&input, &out),
        Command::Complexity { n, nt, nr, t } => complexity(n, nt, nr, t),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fatal::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Fatal::Threshold(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Fatal::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
