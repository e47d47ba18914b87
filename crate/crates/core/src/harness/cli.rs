use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{read_config_file, Settings};
use super::csv::{aggregate_runs, read_curve, Summary};
use super::run_to_dir;
use crate::agent::{AgentConfig, DdpgAgent};
use crate::env::DeskEnv;
use crate::error::{Error, Result};
use crate::hgg::evaluate;

#[derive(Debug, Parser)]
#[command(name = "hgg", about = "Hindsight goal generation on kinematic desk tasks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one configuration.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Train several modes over several seeds and summarise success rates.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated modes.
        #[arg(long, default_value = "her,hgg")]
        modes: String,
        /// Seed list (`1,2,5`) or inclusive range (`1..10`).
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
    /// Sweep one setting over several values.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Greedy success rate of a saved agent.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Median and 20/80 percentile band of existing curve files.
    Aggregate {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    outdir: PathBuf,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    goal_noise: Option<f64>,
    #[arg(long)]
    pool_size: Option<usize>,
    /// Any other setting, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Vec::new(),
        };
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        push("env", self.env.clone());
        push("mode", self.mode.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("iters", self.iters.map(|v| v.to_string()));
        push("K", self.k.map(|v| v.to_string()));
        push("L", self.l.map(|v| v.to_string()));
        push("c", self.c.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("goal_noise", self.goal_noise.map(|v| v.to_string()));
        push("pool_size", self.pool_size.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid("set", format!("expected KEY=VALUE, got {kv:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    fn settings(&self) -> Result<Settings> {
        Settings::from_pairs(&self.pairs()?)
    }
}

/// Parses `args` (program name first) and executes the subcommand. Returns
/// the process exit code: 0 on success, 1 on runtime errors, 2 on usage
/// errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { common } => {
            let settings = common.settings()?;
            let reports = run_to_dir(&settings, &common.outdir)?;
            let last = reports.last().expect("at least one iteration");
            println!(
                "{}: {} iterations, {} episodes, final success {:.3}",
                common.outdir.display(),
                last.iteration,
                last.episodes,
                last.success_rate
            );
        }
        Command::Compare { common, modes, seeds } => {
            let seeds = parse_seeds(&seeds)?;
            let mut columns = Vec::new();
            for mode in modes.split(',').map(str::trim) {
                let mut pairs = common.pairs()?;
                pairs.push(("mode".into(), mode.into()));
                let summary = run_seeds(&pairs, &seeds, &common.outdir.join(mode))?;
                println!("{mode}: final median success {:.3}", summary.success.last().unwrap().median);
                columns.push((mode.to_string(), summary));
            }
            write_summary(&common.outdir.join("compare.csv"), &columns)?;
        }
        Command::Ablate {
            common,
            param,
            values,
            seeds,
        } => {
            let base = common.settings()?;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => vec![base.run.seed],
            };
            let mut columns = Vec::new();
            for value in values.split(',').map(str::trim) {
                let mut pairs = common.pairs()?;
                pairs.push((param.clone(), value.to_string()));
                let label = format!("{param}_{value}");
                let summary = run_seeds(&pairs, &seeds, &common.outdir.join(&label))?;
                println!("{param} = {value}: final median success {:.3}", summary.success.last().unwrap().median);
                columns.push((label, summary));
            }
            write_summary(&common.outdir.join("ablate.csv"), &columns)?;
        }
        Command::Eval {
            common,
            checkpoint,
            episodes,
        } => {
            let settings = common.settings()?;
            let agent = DdpgAgent::load(&checkpoint, AgentConfig::default())?;
            let mut env: DeskEnv = settings.env()?;
            let mut rng = ChaCha8Rng::seed_from_u64(settings.run.seed);
            let rate = evaluate(&agent, &mut env, episodes, &mut rng)?;
            println!("{}: success {rate:.3} over {episodes} episodes", env.kind());
        }
        Command::Aggregate { curves, out } => {
            let runs = curves.iter().map(|p| read_curve(p)).collect::<Result<Vec<_>>>()?;
            let text = summary_text(&[("success".to_string(), aggregate_runs(&runs)?)])?;
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

/// Runs every seed into `dir/seed<s>` and aggregates them. With one seed the
/// run goes straight into `dir`.
fn run_seeds(pairs: &[(String, String)], seeds: &[u64], dir: &Path) -> Result<Summary> {
    let mut curves = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut pairs = pairs.to_vec();
        pairs.push(("seed".into(), seed.to_string()));
        let settings = Settings::from_pairs(&pairs)?;
        let run_dir = if seeds.len() == 1 { dir.to_path_buf() } else { dir.join(format!("seed{seed}")) };
        run_to_dir(&settings, &run_dir)?;
        curves.push(read_curve(&run_dir.join("curve.csv"))?);
    }
    let summary = aggregate_runs(&curves)?;
    fs::write(dir.join("summary.csv"), summary_text(&[("success".to_string(), summary.clone())])?)?;
    Ok(summary)
}

fn summary_text(columns: &[(String, Summary)]) -> Result<String> {
    let first = &columns[0].1;
    if columns.iter().any(|(_, s)| s.iterations != first.iterations) {
        return Err(Error::Csv("summaries have different iteration grids".into()));
    }
    let mut out = String::from("iteration,episodes");
    for (label, _) in columns {
        out.push_str(&format!(",{label}_median,{label}_p20,{label}_p80"));
    }
    out.push('\n');
    for i in 0..first.iterations.len() {
        out.push_str(&format!("{},{}", first.iterations[i], first.episodes[i]));
        for (_, s) in columns {
            let b = s.success[i];
            out.push_str(&format!(",{},{},{}", b.median, b.p20, b.p80));
        }
        out.push('\n');
    }
    Ok(out)
}

fn write_summary(path: &Path, columns: &[(String, Summary)]) -> Result<()> {
    fs::write(path, summary_text(columns)?)?;
    Ok(())
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::invalid("seeds", format!("expected `a..b` or a comma list, got {text:?}"));
    let seeds: Vec<u64> = match text.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => text
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}
