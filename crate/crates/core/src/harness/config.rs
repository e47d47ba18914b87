//! Flat `key = value` run settings.
//!
//! Settings start from the defaults of the chosen environment, are updated
//! from an optional config file, then from command-line flags. Keys may use
//! `-` or `_` interchangeably.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::env::{DeskEnv, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::hgg::{Mode, RunConfig};
use crate::metric::{GoalMetric, Polyline};

/// Everything needed to launch one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub env_spec: EnvSpec,
    /// Export exploration goals every this many iterations (plus the first
    /// and last). `0` exports only the first and last.
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetricName {
    Euclidean,
    Polyline,
}

impl Settings {
    pub fn for_env(kind: EnvKind) -> Self {
        let env = DeskEnv::new(kind);
        let mut run = RunConfig {
            env: kind,
            ..RunConfig::default()
        };
        if let Some(line) = env.detour_polyline() {
            run.matching.metric.goal_metric = GoalMetric::Polyline(line);
        }
        Self {
            run,
            env_spec: env.spec().clone(),
            snapshot_every: 10,
        }
    }

    /// Settings from `(key, value)` pairs, applied in order after the
    /// defaults of the environment named by the last `env` pair (default
    /// `desk-push`).
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let kind = pairs
            .iter()
            .rev()
            .find(|(k, _)| normalize_key(k.as_ref()) == "env")
            .map(|(_, v)| v.as_ref().trim().parse())
            .transpose()?
            .unwrap_or(EnvKind::Push);
        let mut settings = Self::for_env(kind);
        for (k, v) in pairs {
            settings.set(k.as_ref(), v.as_ref())?;
        }
        settings.validate()?;
        Ok(settings)
    }

    pub fn env(&self) -> Result<DeskEnv> {
        DeskEnv::new(self.run.env).with_spec(self.env_spec.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.env_spec.validate()?;
        self.run.validate()
    }

    fn metric_name(&self) -> MetricName {
        match self.run.matching.metric.goal_metric {
            GoalMetric::Euclidean => MetricName::Euclidean,
            GoalMetric::Polyline(_) => MetricName::Polyline,
        }
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let value = value.trim();
        let run = &mut self.run;
        match key.as_str() {
            "env" => {
                let kind: EnvKind = value.parse()?;
                if kind != run.env {
                    return Err(Error::invalid("env", "set the environment before other keys"));
                }
            }
            "mode" => run.mode = value.parse::<Mode>()?,
            "seed" => run.seed = parse(&key, value)?,
            "iters" => run.iterations = parse(&key, value)?,
            "K" => run.matching.k = parse(&key, value)?,
            "L" => run.matching.lipschitz = parse(&key, value)?,
            "c" => run.matching.metric.c = parse(&key, value)?,
            "gamma" => {
                let gamma = parse(&key, value)?;
                run.matching.gamma = gamma;
                run.agent.gamma = gamma;
            }
            "goal_noise" => run.matching.goal_noise_sigma = parse(&key, value)?,
            "pool_size" => run.pool_size = parse(&key, value)?,
            "M" => run.batches_per_episode = parse(&key, value)?,
            "buffer_capacity" => run.buffer_capacity = parse(&key, value)?,
            "her_prob" => run.her_prob = parse(&key, value)?,
            "eval_episodes" => run.eval_episodes = parse(&key, value)?,
            "hidden" => run.agent.hidden = parse_list(&key, value)?,
            "batch_size" => run.agent.batch_size = parse(&key, value)?,
            "actor_lr" => run.agent.actor_lr = parse(&key, value)?,
            "critic_lr" => run.agent.critic_lr = parse(&key, value)?,
            "polyak" => run.agent.polyak = parse(&key, value)?,
            "random_eps" => run.agent.random_eps = parse(&key, value)?,
            "noise_eps" => run.agent.noise_eps = parse(&key, value)?,
            "action_l2" => run.agent.action_l2 = parse(&key, value)?,
            "clip_obs" => run.agent.clip_obs = parse(&key, value)?,
            "norm_eps" => run.agent.norm_eps = parse(&key, value)?,
            "goal_metric" => {
                run.matching.metric.goal_metric = match value {
                    "euclidean" | "l2" => GoalMetric::Euclidean,
                    "polyline" => {
                        let line = DeskEnv::new(run.env).detour_polyline().ok_or_else(|| {
                            Error::invalid("goal_metric", "no default polyline for this environment; set `polyline`")
                        })?;
                        GoalMetric::Polyline(line)
                    }
                    other => return Err(Error::invalid("goal_metric", format!("unknown metric {other:?}"))),
                }
            }
            "polyline" => {
                let coords: Vec<f64> = value
                    .split(';')
                    .flat_map(|p| p.split(','))
                    .map(|v| parse::<f64>("polyline", v))
                    .collect::<Result<_>>()?;
                run.matching.metric.goal_metric = GoalMetric::Polyline(Polyline::from_flat(&coords, 2)?);
            }
            "horizon" => self.env_spec.horizon = parse(&key, value)?,
            "delta" => self.env_spec.success_threshold = parse(&key, value)?,
            "step_scale" => self.env_spec.step_scale = parse(&key, value)?,
            "contact_radius" => self.env_spec.contact_radius = parse(&key, value)?,
            "substeps" => self.env_spec.substeps = parse(&key, value)?,
            "snapshot_every" => self.snapshot_every = parse(&key, value)?,
            _ => return Err(Error::invalid("config", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every setting after defaulting, in a stable order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let run = &self.run;
        let agent = &run.agent;
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("env", run.env.name().to_string()),
            ("mode", run.mode.name().to_string()),
            ("seed", run.seed.to_string()),
            ("iters", run.iterations.to_string()),
            ("K", run.matching.k.to_string()),
            ("L", run.matching.lipschitz.to_string()),
            ("c", run.matching.metric.c.to_string()),
            ("gamma", run.matching.gamma.to_string()),
            ("goal_noise", run.matching.goal_noise_sigma.to_string()),
            ("pool_size", run.pool_size.to_string()),
            ("M", run.batches_per_episode.to_string()),
            ("buffer_capacity", run.buffer_capacity.to_string()),
            ("her_prob", run.her_prob.to_string()),
            ("eval_episodes", run.eval_episodes.to_string()),
            ("hidden", join(&agent.hidden)),
            ("batch_size", agent.batch_size.to_string()),
            ("actor_lr", agent.actor_lr.to_string()),
            ("critic_lr", agent.critic_lr.to_string()),
            ("polyak", agent.polyak.to_string()),
            ("random_eps", agent.random_eps.to_string()),
            ("noise_eps", agent.noise_eps.to_string()),
            ("action_l2", agent.action_l2.to_string()),
            ("clip_obs", agent.clip_obs.to_string()),
            ("norm_eps", agent.norm_eps.to_string()),
            (
                "goal_metric",
                match self.metric_name() {
                    MetricName::Euclidean => "euclidean".into(),
                    MetricName::Polyline => "polyline".into(),
                },
            ),
        ];
        if let GoalMetric::Polyline(line) = &run.matching.metric.goal_metric {
            let pts: Vec<String> = line
                .waypoints()
                .iter()
                .map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                .collect();
            out.push(("polyline", pts.join(";")));
        }
        out.extend([
            ("horizon", self.env_spec.horizon.to_string()),
            ("delta", self.env_spec.success_threshold.to_string()),
            ("step_scale", self.env_spec.step_scale.to_string()),
            ("contact_radius", self.env_spec.contact_radius.to_string()),
            ("substeps", self.env_spec.substeps.to_string()),
            ("snapshot_every", self.snapshot_every.to_string()),
        ]);
        out
    }

    /// The resolved settings as a config file that reproduces them.
    pub fn to_config_text(&self) -> String {
        self.resolved().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses a `key = value` file. `#` starts a comment; blank lines are
/// ignored.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid("config", format!("line {}: expected `key = value`", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn normalize_key(key: &str) -> String {
    let key = key.trim().trim_start_matches("--").replace('-', "_");
    match key.as_str() {
        "k" => "K".into(),
        "l" => "L".into(),
        "m" => "M".into(),
        "iterations" => "iters".into(),
        _ => key,
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::invalid("config", format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value.split(',').map(|v| parse(key, v)).collect()
}
