//! Experiment plumbing behind the `hgg` binary: settings, per-run output
//! files, multi-seed aggregation and the command-line front end.
//!
//! A run directory holds
//!
//! - `config_resolved.txt`: every setting after defaulting, reloadable with
//!   `--config`;
//! - `curve.csv`: one row per iteration;
//! - `goals_iter<k>.csv`: the exploration goals of snapshot iteration `k`;
//! - `timing.csv`: wall-clock seconds per iteration (kept apart so that
//!   `curve.csv` is byte-identical across reruns);
//! - `agent.ckpt`: the final agent.

mod cli;
mod config;
mod csv;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub use cli::run_cli;
pub use config::{parse_config_text, read_config_file, Settings};
pub use csv::{aggregate_runs, nearest_rank, read_curve, Band, Curve, CurveRow, Summary, CURVE_HEADER};

use crate::error::Result;
use crate::hgg::{IterationReport, Trainer};

/// Trains one configuration and writes its run directory.
pub fn run_to_dir(settings: &Settings, outdir: &Path) -> Result<Vec<IterationReport>> {
    settings.validate()?;
    fs::create_dir_all(outdir)?;
    fs::write(outdir.join("config_resolved.txt"), settings.to_config_text())?;

    let mut trainer = Trainer::with_env(settings.run.clone(), settings.env()?)?;
    let mut curve = fs::File::create(outdir.join("curve.csv"))?;
    writeln!(curve, "{CURVE_HEADER}")?;
    let mut timing = fs::File::create(outdir.join("timing.csv"))?;
    writeln!(timing, "iteration,seconds")?;

    let iterations = settings.run.iterations;
    let start = Instant::now();
    let mut reports = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let report = trainer.run_iteration()?;
        writeln!(curve, "{}", CurveRow::from(&report).to_csv())?;
        writeln!(timing, "{},{:.3}", report.iteration, start.elapsed().as_secs_f64())?;
        if is_snapshot(report.iteration, iterations, settings.snapshot_every) {
            write_goals(&outdir.join(format!("goals_iter{}.csv", report.iteration)), &report)?;
        }
        reports.push(report);
    }
    curve.flush()?;
    trainer.agent().save(outdir.join("agent.ckpt"))?;
    Ok(reports)
}

fn is_snapshot(iteration: usize, last: usize, every: usize) -> bool {
    iteration == 1 || iteration == last || (every > 0 && iteration % every == 0)
}

fn write_goals(path: &Path, report: &IterationReport) -> Result<()> {
    let mut out = String::from("index,x,y,source_trajectory\n");
    for (i, g) in report.exploration_goals.iter().enumerate() {
        let c = g.coords();
        let src = report
            .source_trajectories
            .as_ref()
            .map(|s| s[i].to_string())
            .unwrap_or_default();
        out.push_str(&format!("{i},{},{},{src}\n", c[0], c[1]));
    }
    fs::write(path, out)?;
    Ok(())
}
