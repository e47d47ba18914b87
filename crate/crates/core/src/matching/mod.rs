//! The hindsight goal generator.
//!
//! Every target task `(ŝ₀, ĝ)` is scored against every pool trajectory `τ`:
//!
//! ```text
//! w((ŝ₀, ĝ), τ) = c·‖φ(ŝ₀) − φ(s₀)‖ + min_t ( dist(φ(s_t), ĝ) − V(s₀, φ(s_t)) / L* )
//! ```
//!
//! and the resulting `K × N` cost matrix is solved as a min-cost max-flow so
//! that each trajectory contributes at most one goal. The matched states,
//! with Gaussian noise, become the next batch of exploration goals.

mod mcmf;

pub use mcmf::{mcmf_assign, FlowResult, Matching, MinCostFlow};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{GoalVector, SystemState, TaskInstance, Trajectory};
use crate::env::{phi, EnvKind, TABLE_HALF_EXTENT};
use crate::error::{Error, Result};
use crate::metric::MetricConfig;

/// Goal-conditioned value estimate `V(s₀, g)` queried by the matcher.
pub trait ValueFunction {
    /// Values for one initial state and a batch of goals.
    fn values(&self, s0: &SystemState, goals: &[GoalVector]) -> Vec<f64>;
}

impl<F> ValueFunction for F
where
    F: Fn(&SystemState, &GoalVector) -> f64,
{
    fn values(&self, s0: &SystemState, goals: &[GoalVector]) -> Vec<f64> {
        goals.iter().map(|g| self(s0, g)).collect()
    }
}

/// The constant-zero value function: pure distance matching.
pub fn zero_value(_: &SystemState, _: &GoalVector) -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingConfig {
    /// Lipschitz constant before normalisation. `0` disables the value bias.
    pub lipschitz: f64,
    pub metric: MetricConfig,
    /// Number of hindsight goals per iteration.
    pub k: usize,
    pub gamma: f64,
    pub goal_noise_sigma: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self {
            lipschitz: 5.0,
            metric: MetricConfig::default(),
            k: 50,
            gamma: 0.98,
            goal_noise_sigma: 0.05,
        }
    }
}

impl MatchingConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        if !(self.lipschitz >= 0.0) {
            return Err(Error::invalid("L", "must be nonnegative"));
        }
        if self.k == 0 {
            return Err(Error::invalid("K", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if !(self.goal_noise_sigma >= 0.0) || !self.goal_noise_sigma.is_finite() {
            return Err(Error::invalid("goal_noise_sigma", "must be a finite nonnegative real"));
        }
        Ok(())
    }
}

/// `L* = L / ((1 − γ)·d_max)`.
pub fn normalize_lipschitz(lipschitz: f64, gamma: f64, d_max: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} outside (0, 1)")));
    }
    if !(d_max > 0.0) {
        return Err(Error::invalid("d_max", format!("{d_max} must be positive")));
    }
    Ok(lipschitz / ((1.0 - gamma) * d_max))
}

/// `V / L*`; a zero `L*` switches the bias off.
fn value_bias(value: f64, l_star: f64) -> f64 {
    if l_star == 0.0 {
        0.0
    } else {
        value / l_star
    }
}

/// A pool trajectory reduced to what scoring needs: φ of its initial state,
/// φ of every visited state (t = 0..=H), and the value of each.
#[derive(Debug, Clone)]
pub struct ScoredCandidate {
    pub init: GoalVector,
    pub achieved: Vec<GoalVector>,
    pub values: Vec<f64>,
}

impl ScoredCandidate {
    pub fn new<V: ValueFunction + ?Sized>(traj: &Trajectory, value_fn: &V, kind: EnvKind) -> Self {
        let s0 = traj.initial_state();
        let init = phi(kind, s0);
        let mut achieved = Vec::with_capacity(traj.len() + 1);
        achieved.push(init.clone());
        achieved.extend(traj.transitions.iter().map(|t| t.achieved_goal.clone()));
        let values = value_fn.values(s0, &achieved);
        debug_assert_eq!(values.len(), achieved.len());
        Self {
            init,
            achieved,
            values,
        }
    }

    /// `(w, t*)` against one target; `t*` indexes visited states, with 0 the
    /// initial state.
    pub fn score(&self, target_init: &GoalVector, target_goal: &GoalVector, cfg: &MetricConfig, l_star: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (t, (g, v)) in self.achieved.iter().zip(&self.values).enumerate() {
            let w = cfg.goal_distance(g, target_goal) - value_bias(*v, l_star);
            if w < best.0 {
                best = (w, t);
            }
        }
        (cfg.c * target_init.distance(&self.init) + best.0, best.1)
    }
}

/// Matching score of `traj` for `target` and the minimising step.
pub fn trajectory_score<V: ValueFunction + ?Sized>(
    target: &TaskInstance,
    traj: &Trajectory,
    value_fn: &V,
    cfg: &MetricConfig,
    l_star: f64,
    kind: EnvKind,
) -> (f64, usize) {
    let candidate = ScoredCandidate::new(traj, value_fn, kind);
    candidate.score(&phi(kind, &target.initial_state), &target.goal, cfg, l_star)
}

/// One matched `(target, trajectory, step)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignedPair {
    pub target: usize,
    pub trajectory: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<AssignedPair>,
    pub total_cost: f64,
}

impl Assignment {
    /// Every trajectory is used at most once.
    pub fn is_diverse(&self) -> bool {
        let mut seen: Vec<usize> = self.pairs.iter().map(|p| p.trajectory).collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

/// Output of one matching solve.
#[derive(Debug, Clone)]
pub struct HindsightGoals {
    /// `(ŝ₀ⁱ, φ(s_{t*}) + ε)`, in target order.
    pub tasks: Vec<TaskInstance>,
    /// The matched goals before noise.
    pub clean_goals: Vec<GoalVector>,
    pub assignment: Assignment,
}

/// Builds the full cost matrix and the per-entry argmin steps.
pub fn cost_matrix<V: ValueFunction + ?Sized>(
    targets: &[TaskInstance],
    pool: &[&Trajectory],
    value_fn: &V,
    cfg: &MetricConfig,
    l_star: f64,
    kind: EnvKind,
) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let candidates: Vec<ScoredCandidate> = pool
        .iter()
        .map(|t| ScoredCandidate::new(t, value_fn, kind))
        .collect();
    targets
        .iter()
        .map(|target| {
            let init = phi(kind, &target.initial_state);
            candidates
                .iter()
                .map(|c| c.score(&init, &target.goal, cfg, l_star))
                .unzip()
        })
        .unzip()
}

/// Picks `K = targets.len()` exploration tasks from `pool`, one per distinct
/// trajectory, minimising the summed score.
///
/// `d_max` is the goal-space diameter used to normalise `L`.
#[allow(clippy::too_many_arguments)]
pub fn select_hindsight_goals<V, R>(
    targets: &[TaskInstance],
    pool: &[&Trajectory],
    value_fn: &V,
    cfg: &MatchingConfig,
    d_max: f64,
    kind: EnvKind,
    rng: &mut R,
) -> Result<HindsightGoals>
where
    V: ValueFunction + ?Sized,
    R: Rng + ?Sized,
{
    if pool.len() < targets.len() {
        return Err(Error::Infeasible {
            targets: targets.len(),
            candidates: pool.len(),
        });
    }
    let l_star = normalize_lipschitz(cfg.lipschitz, cfg.gamma, d_max)?;
    let (cost, steps) = cost_matrix(targets, pool, value_fn, &cfg.metric, l_star, kind);
    let matching = mcmf_assign(&cost)?;

    let pairs: Vec<AssignedPair> = matching
        .row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| AssignedPair {
            target: i,
            trajectory: j,
            step: steps[i][j],
        })
        .collect();
    let clean_goals: Vec<GoalVector> = pairs
        .iter()
        .map(|p| visited_goal(pool[p.trajectory], p.step, kind))
        .collect();

    let noise = (cfg.goal_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.goal_noise_sigma).expect("sigma validated"));
    let tasks = targets
        .iter()
        .zip(&clean_goals)
        .map(|(target, goal)| {
            let mut goal = goal.clone();
            if let Some(noise) = &noise {
                for x in goal.coords_mut() {
                    *x = (*x + noise.sample(rng)).clamp(-TABLE_HALF_EXTENT, TABLE_HALF_EXTENT);
                }
            }
            TaskInstance::new(target.initial_state.clone(), goal)
        })
        .collect();

    Ok(HindsightGoals {
        tasks,
        clean_goals,
        assignment: Assignment {
            pairs,
            total_cost: matching.total_cost,
        },
    })
}

/// φ of the `step`-th visited state (0 = initial).
pub fn visited_goal(traj: &Trajectory, step: usize, kind: EnvKind) -> GoalVector {
    match step {
        0 => phi(kind, traj.initial_state()),
        t => traj.transitions[t - 1].achieved_goal.clone(),
    }
}
