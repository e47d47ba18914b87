//! The outer training loop.
//!
//! Each iteration samples `K` target tasks, turns them into `K` exploration
//! tasks (hindsight goals in HGG mode, the targets themselves in the HER
//! baseline or while the pool is still smaller than `K`), rolls one episode
//! per task, and after every episode runs `M` DDPG updates on HER minibatches.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{AgentConfig, DdpgAgent};
use crate::domain::{GoalVector, ReplayBuffer, TaskInstance};
use crate::env::{DeskEnv, EnvKind};
use crate::error::{Error, Result};
use crate::matching::{select_hindsight_goals, MatchingConfig};
use crate::metric::wasserstein_discrete;
use crate::replay::{sample_minibatch, DEFAULT_HER_PROB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Hgg,
    HerBaseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Hgg => "hgg",
            Mode::HerBaseline => "her",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hgg" => Ok(Mode::Hgg),
            "her" | "her-baseline" => Ok(Mode::HerBaseline),
            other => Err(Error::invalid("mode", format!("unknown mode {other:?} (hgg, her)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub mode: Mode,
    pub iterations: usize,
    /// Optimisation batches after each collected episode.
    pub batches_per_episode: usize,
    /// Matching parameters; `matching.k` is also the number of episodes per
    /// iteration.
    pub matching: MatchingConfig,
    pub agent: AgentConfig,
    /// Number of most recent trajectories offered to the matcher.
    pub pool_size: usize,
    pub buffer_capacity: usize,
    pub her_prob: f64,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Push,
            mode: Mode::Hgg,
            iterations: 100,
            batches_per_episode: 20,
            matching: MatchingConfig::default(),
            agent: AgentConfig::default(),
            pool_size: 1000,
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            her_prob: DEFAULT_HER_PROB,
            eval_episodes: 50,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn episodes_per_iteration(&self) -> usize {
        self.matching.k
    }

    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        self.agent.validate()?;
        if self.matching.gamma != self.agent.gamma {
            return Err(Error::invalid("gamma", "matching and agent discount differ"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be positive"));
        }
        if self.pool_size < self.matching.k {
            return Err(Error::invalid("pool_size", "must be at least K"));
        }
        if self.buffer_capacity < self.pool_size {
            return Err(Error::invalid("buffer_capacity", "must be at least pool_size"));
        }
        if !(0.0..=1.0).contains(&self.her_prob) {
            return Err(Error::invalid("her_prob", "must lie in [0, 1]"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::invalid("eval_episodes", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// 1-based.
    pub iteration: usize,
    /// Episodes collected so far, this iteration included.
    pub episodes: usize,
    /// Greedy success rate on fresh target tasks after this iteration.
    pub success_rate: f64,
    /// Whether exploration goals came from the matcher.
    pub matched: bool,
    /// Matching cost per target, when matched.
    pub mean_matching_cost: Option<f64>,
    /// Wasserstein distance from the exploration tasks to the sampled targets.
    pub goal_wasserstein: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub train_steps: usize,
    pub exploration_goals: Vec<GoalVector>,
    /// Pool index of the trajectory behind each exploration goal, when matched.
    pub source_trajectories: Option<Vec<usize>>,
}

impl IterationReport {
    /// At most one goal per source trajectory.
    pub fn is_diverse(&self) -> bool {
        match &self.source_trajectories {
            None => true,
            Some(src) => {
                let mut seen = src.clone();
                seen.sort_unstable();
                seen.windows(2).all(|w| w[0] != w[1])
            }
        }
    }
}

/// Running totals kept for auditing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub matching_calls: usize,
    pub train_steps: usize,
    pub episodes: usize,
}

pub struct Trainer {
    cfg: RunConfig,
    env: DeskEnv,
    eval_env: DeskEnv,
    agent: DdpgAgent,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    counters: Counters,
    iteration: usize,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        Self::with_env(cfg.clone(), DeskEnv::new(cfg.env))
    }

    /// Trains on a custom environment instance (e.g. a modified target
    /// distribution) of kind `cfg.env`.
    pub fn with_env(cfg: RunConfig, env: DeskEnv) -> Result<Self> {
        cfg.validate()?;
        if env.kind() != cfg.env {
            return Err(Error::invalid("env", "environment kind differs from the config"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e7a1_0000_0000);
        let agent = DdpgAgent::for_env(cfg.agent.clone(), env.spec(), &mut rng)?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
        Ok(Self {
            eval_env: env.clone(),
            env,
            agent,
            buffer,
            rng,
            eval_rng,
            counters: Counters::default(),
            iteration: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &DdpgAgent {
        &self.agent
    }

    pub fn env(&self) -> &DeskEnv {
        &self.env
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn run_iteration(&mut self) -> Result<IterationReport> {
        let k = self.cfg.episodes_per_iteration();
        let kind = self.env.kind();
        let targets: Vec<TaskInstance> = (0..k).map(|_| self.env.sample_target_task(&mut self.rng)).collect();

        let mut matched = false;
        let mut mean_cost = None;
        let mut sources = None;
        let tasks = if self.cfg.mode == Mode::Hgg && self.buffer.len() >= k {
            let pool = self.buffer.matching_pool(self.cfg.pool_size);
            let hindsight = select_hindsight_goals(
                &targets,
                &pool,
                &self.agent,
                &self.cfg.matching,
                self.env.goal_space_diameter(),
                kind,
                &mut self.rng,
            )?;
            self.counters.matching_calls += 1;
            matched = true;
            mean_cost = Some(hindsight.assignment.total_cost / k as f64);
            sources = Some(hindsight.assignment.pairs.iter().map(|p| p.trajectory).collect());
            hindsight.tasks
        } else {
            targets.clone()
        };
        let goal_wasserstein = wasserstein_discrete(&tasks, &targets, &self.cfg.matching.metric, kind)?;

        let threshold = self.env.spec().success_threshold;
        let (mut critic_sum, mut actor_sum, mut steps) = (0.0, 0.0, 0);
        for task in &tasks {
            let agent = &self.agent;
            let rng = &mut self.rng;
            let traj = self.env.rollout(task, |s, g| agent.act(s, g, true, rng))?;
            self.agent.observe(&traj);
            self.buffer.push(traj)?;
            self.counters.episodes += 1;
            for _ in 0..self.cfg.batches_per_episode {
                let batch = sample_minibatch(
                    &self.buffer,
                    self.cfg.agent.batch_size,
                    self.cfg.her_prob,
                    threshold,
                    &mut self.rng,
                )?;
                let stats = self.agent.train_step(&batch)?;
                self.agent.polyak_update();
                critic_sum += stats.critic_loss;
                actor_sum += stats.actor_loss;
                steps += 1;
            }
        }
        self.counters.train_steps += steps;
        self.iteration += 1;

        let success_rate = evaluate(&self.agent, &mut self.eval_env, self.cfg.eval_episodes, &mut self.eval_rng)?;
        let per_step = |sum: f64| if steps == 0 { 0.0 } else { sum / steps as f64 };
        Ok(IterationReport {
            iteration: self.iteration,
            episodes: self.counters.episodes,
            success_rate,
            matched,
            mean_matching_cost: mean_cost,
            goal_wasserstein,
            critic_loss: per_step(critic_sum),
            actor_loss: per_step(actor_sum),
            train_steps: steps,
            exploration_goals: tasks.into_iter().map(|t| t.goal).collect(),
            source_trajectories: sources,
        })
    }

    /// Runs the configured number of iterations, handing each report to
    /// `on_report` as it is produced.
    pub fn run(&mut self, mut on_report: impl FnMut(&IterationReport)) -> Result<Vec<IterationReport>> {
        let mut reports = Vec::with_capacity(self.cfg.iterations);
        for _ in 0..self.cfg.iterations {
            let report = self.run_iteration()?;
            on_report(&report);
            reports.push(report);
        }
        Ok(reports)
    }

    /// Greedy success rate of the current agent on `n` fresh target tasks.
    pub fn evaluate(&mut self, n: usize) -> Result<f64> {
        evaluate(&self.agent, &mut self.eval_env, n, &mut self.eval_rng)
    }
}

/// Fraction of `n` fresh target tasks that the greedy agent solves.
pub fn evaluate(agent: &DdpgAgent, env: &mut DeskEnv, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    evaluate_policy(env, n, rng, |s, g, r| agent.act(s, g, false, r))
}

/// Fraction of `n` fresh target tasks on which `policy` ends within the
/// success radius. The policy receives the state, the goal and the shared
/// RNG.
pub fn evaluate_policy<F>(env: &mut DeskEnv, n: usize, rng: &mut ChaCha8Rng, mut policy: F) -> Result<f64>
where
    F: FnMut(&crate::domain::SystemState, &GoalVector, &mut ChaCha8Rng) -> Vec<f64>,
{
    if n == 0 {
        return Err(Error::invalid("n_episodes", "must be at least 1"));
    }
    let mut wins = 0;
    for _ in 0..n {
        let task = env.sample_target_task(rng);
        let traj = env.rollout(&task, |s, g| policy(s, g, &mut *rng))?;
        wins += env.is_success(&traj)? as usize;
    }
    Ok(wins as f64 / n as f64)
}
