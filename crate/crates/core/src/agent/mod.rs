//! Goal-conditioned DDPG.
//!
//! The actor maps normalised `(state, goal)` to `bound·tanh(z)`; the critic
//! scores normalised `(state, goal, action / bound)`. Target copies of both
//! trail the online networks by Polyak averaging.

mod checkpoint;
mod net;
mod normalizer;

pub use net::{Adam, DenseNet, Tape};
pub use normalizer::Normalizer;

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{GoalVector, SystemState, Trajectory};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::matching::ValueFunction;
use crate::replay::RelabeledSample;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Weight kept by the target networks at each update.
    pub polyak: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub random_eps: f64,
    pub noise_eps: f64,
    pub action_l2: f64,
    pub clip_obs: f64,
    pub norm_eps: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 256],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            polyak: 0.95,
            gamma: 0.98,
            batch_size: 256,
            random_eps: 0.3,
            noise_eps: 0.2,
            action_l2: 1.0,
            clip_obs: 5.0,
            norm_eps: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "need at least one non-empty hidden layer"));
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [("polyak", self.polyak), ("random_eps", self.random_eps)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 1]"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !(self.noise_eps >= 0.0 && self.action_l2 >= 0.0 && self.clip_obs > 0.0 && self.norm_eps > 0.0) {
            return Err(Error::invalid("noise", "noise, penalty, clip and eps must be non-negative"));
        }
        Ok(())
    }

    /// The analytic lower bound of the discounted return, `−1/(1−γ)`.
    pub fn value_floor(&self) -> f64 {
        -1.0 / (1.0 - self.gamma)
    }
}

/// Input and output sizes of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentDims {
    pub state: usize,
    pub goal: usize,
    pub action: usize,
}

impl From<&EnvSpec> for AgentDims {
    fn from(spec: &EnvSpec) -> Self {
        Self {
            state: spec.state_dim,
            goal: spec.goal_dim,
            action: spec.action_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    cfg: AgentConfig,
    dims: AgentDims,
    action_bound: f64,
    actor: DenseNet,
    critic: DenseNet,
    actor_target: DenseNet,
    critic_target: DenseNet,
    actor_opt: Adam,
    critic_opt: Adam,
    state_norm: Normalizer,
    goal_norm: Normalizer,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(cfg: AgentConfig, dims: AgentDims, action_bound: f64, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if !(action_bound.is_finite() && action_bound > 0.0) {
            return Err(Error::invalid("action_bound", "must be positive"));
        }
        let obs = dims.state + dims.goal;
        let mut actor_sizes = vec![obs];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(dims.action);
        let mut critic_sizes = vec![obs + dims.action];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = DenseNet::new(&actor_sizes, rng);
        let critic = DenseNet::new(&critic_sizes, rng);
        Ok(Self::assemble(cfg, dims, action_bound, actor, critic))
    }

    pub fn for_env<R: Rng + ?Sized>(cfg: AgentConfig, spec: &EnvSpec, rng: &mut R) -> Result<Self> {
        Self::new(cfg, AgentDims::from(spec), spec.action_bound, rng)
    }

    fn assemble(cfg: AgentConfig, dims: AgentDims, action_bound: f64, actor: DenseNet, critic: DenseNet) -> Self {
        let state_norm = Normalizer::new(dims.state, cfg.norm_eps, cfg.clip_obs);
        let goal_norm = Normalizer::new(dims.goal, cfg.norm_eps, cfg.clip_obs);
        Self {
            actor_opt: Adam::new(actor.param_count(), cfg.actor_lr),
            critic_opt: Adam::new(critic.param_count(), cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            state_norm,
            goal_norm,
            cfg,
            dims,
            action_bound,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn dims(&self) -> AgentDims {
        self.dims
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNet {
        &self.critic
    }

    pub fn actor_target(&self) -> &DenseNet {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &DenseNet {
        &self.critic_target
    }

    pub fn actor_mut(&mut self) -> &mut DenseNet {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut DenseNet {
        &mut self.critic
    }

    pub fn state_normalizer(&self) -> &Normalizer {
        &self.state_norm
    }

    pub fn goal_normalizer(&self) -> &Normalizer {
        &self.goal_norm
    }

    /// Updates the observation statistics from one collected episode: its
    /// visited states, its goal and its achieved goals.
    pub fn observe(&mut self, traj: &Trajectory) {
        let states = std::iter::once(traj.initial_state())
            .chain(traj.transitions.iter().map(|t| &t.next_state))
            .map(|s| s.coords());
        self.state_norm.update(states);
        let goals = std::iter::once(&traj.task.goal)
            .chain(traj.transitions.iter().map(|t| &t.achieved_goal))
            .map(|g| g.coords());
        self.goal_norm.update(goals);
    }

    /// Normalised `[state ‖ goal]` rows, with `extra` trailing zero columns.
    fn observation_matrix<'a, I>(&self, rows: I, n: usize, extra: usize) -> Array2<f64>
    where
        I: Iterator<Item = (&'a [f64], &'a [f64])>,
    {
        let (ds, dg) = (self.dims.state, self.dims.goal);
        let mut x = Array2::zeros((n, ds + dg + extra));
        for (i, (s, g)) in rows.enumerate() {
            let row = x.row_mut(i).into_slice().expect("row-major");
            self.state_norm.apply(s, &mut row[..ds]);
            self.goal_norm.apply(g, &mut row[ds..ds + dg]);
        }
        x
    }

    fn actor_input(&self, x_full: &Array2<f64>) -> Array2<f64> {
        x_full.slice(s![.., ..self.dims.state + self.dims.goal]).to_owned()
    }

    /// Fills the action columns of `x_full` with `tanh` of the given
    /// pre-activations (i.e. actions divided by the bound).
    fn write_actions(&self, x_full: &mut Array2<f64>, unit_actions: &Array2<f64>) {
        let off = self.dims.state + self.dims.goal;
        x_full.slice_mut(s![.., off..]).assign(unit_actions);
    }

    /// Greedy action, optionally perturbed for exploration: with probability
    /// `random_eps` a uniform action, otherwise Gaussian noise of scale
    /// `noise_eps·bound`, clamped to the bound.
    pub fn act<R: Rng + ?Sized>(&self, state: &SystemState, goal: &GoalVector, explore: bool, rng: &mut R) -> Vec<f64> {
        let x = self.observation_matrix(std::iter::once((state.coords(), goal.coords())), 1, 0);
        let z = self.actor.forward(x.view());
        let bound = self.action_bound;
        let mut a: Vec<f64> = z.row(0).iter().map(|v| bound * v.tanh()).collect();
        if explore {
            if rng.random_bool(self.cfg.random_eps) {
                for v in &mut a {
                    *v = rng.random_range(-bound..=bound);
                }
            } else if self.cfg.noise_eps > 0.0 {
                let noise = Normal::new(0.0, self.cfg.noise_eps * bound).expect("validated");
                for v in &mut a {
                    *v = (*v + noise.sample(rng)).clamp(-bound, bound);
                }
            }
        }
        a
    }

    /// `Q(s, π(s, g), g)` for one state and many goals, clipped to the
    /// value range.
    pub fn value_batch(&self, s0: &SystemState, goals: &[GoalVector]) -> Vec<f64> {
        if goals.is_empty() {
            return Vec::new();
        }
        let rows = goals.iter().map(|g| (s0.coords(), g.coords()));
        let mut x = self.observation_matrix(rows, goals.len(), self.dims.action);
        let z = self.actor.forward(self.actor_input(&x).view());
        self.write_actions(&mut x, &z.mapv(f64::tanh));
        let q = self.critic.forward(x.view());
        let floor = self.cfg.value_floor();
        q.column(0).iter().map(|v| v.clamp(floor, 0.0)).collect()
    }

    pub fn value_estimate(&self, s0: &SystemState, goal: &GoalVector) -> f64 {
        self.value_batch(s0, std::slice::from_ref(goal))[0]
    }

    fn check_batch(&self, batch: &[RelabeledSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        for s in batch {
            if s.state.dim() != self.dims.state || s.next_state.dim() != self.dims.state {
                return Err(Error::Dimension {
                    what: "state",
                    expected: self.dims.state,
                    actual: s.state.dim(),
                });
            }
            if s.goal.dim() != self.dims.goal {
                return Err(Error::Dimension {
                    what: "goal",
                    expected: self.dims.goal,
                    actual: s.goal.dim(),
                });
            }
            if s.action.len() != self.dims.action {
                return Err(Error::Dimension {
                    what: "action",
                    expected: self.dims.action,
                    actual: s.action.len(),
                });
            }
        }
        Ok(())
    }

    /// Clipped Bellman targets `r + γ·Q′(s′, π′(s′, g), g)`.
    pub fn bellman_targets(&self, batch: &[RelabeledSample]) -> Vec<f64> {
        let n = batch.len();
        let rows = batch.iter().map(|b| (b.next_state.coords(), b.goal.coords()));
        let mut x = self.observation_matrix(rows, n, self.dims.action);
        let z = self.actor_target.forward(self.actor_input(&x).view());
        self.write_actions(&mut x, &z.mapv(f64::tanh));
        let q = self.critic_target.forward(x.view());
        let floor = self.cfg.value_floor();
        batch
            .iter()
            .zip(q.column(0))
            .map(|(b, &q)| (b.reward + self.cfg.gamma * q).clamp(floor, 0.0))
            .collect()
    }

    fn critic_input(&self, batch: &[RelabeledSample]) -> Array2<f64> {
        let rows = batch.iter().map(|b| (b.state.coords(), b.goal.coords()));
        let mut x = self.observation_matrix(rows, batch.len(), self.dims.action);
        let unit = Array2::from_shape_fn((batch.len(), self.dims.action), |(i, j)| {
            batch[i].action[j] / self.action_bound
        });
        self.write_actions(&mut x, &unit);
        x
    }

    /// Mean squared Bellman error against `targets` and its gradient with
    /// respect to the critic parameters.
    pub fn critic_loss_grad(&self, batch: &[RelabeledSample], targets: &[f64]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let x = self.critic_input(batch);
        let tape = self.critic.forward_tape(x.view());
        let q = tape.output();
        let mut loss = 0.0;
        let mut d_out = Array2::zeros((batch.len(), 1));
        for i in 0..batch.len() {
            let e = q[[i, 0]] - targets[i];
            loss += e * e / n;
            d_out[[i, 0]] = 2.0 * e / n;
        }
        let mut grad = vec![0.0; self.critic.param_count()];
        self.critic.backward(&tape, d_out, &mut grad, false);
        (loss, grad)
    }

    /// `−mean Q(s, π(s, g), g) + action_l2·mean ‖z‖²` and its gradient with
    /// respect to the actor parameters, `z` being the actor pre-activation.
    pub fn actor_loss_grad(&self, batch: &[RelabeledSample]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let rows = batch.iter().map(|b| (b.state.coords(), b.goal.coords()));
        let mut x = self.observation_matrix(rows, batch.len(), self.dims.action);
        let actor_tape = self.actor.forward_tape(self.actor_input(&x).view());
        let z = actor_tape.output();
        let unit = z.mapv(f64::tanh);
        self.write_actions(&mut x, &unit);
        let critic_tape = self.critic.forward_tape(x.view());
        let q = critic_tape.output();

        let l2 = self.cfg.action_l2;
        let loss = -q.sum() / n + l2 * z.iter().map(|v| v * v).sum::<f64>() / n;
        let d_q = Array2::from_elem((batch.len(), 1), -1.0 / n);
        let d_x = self.critic.input_gradient(&critic_tape, d_q);
        let off = self.dims.state + self.dims.goal;
        let d_unit = d_x.slice(s![.., off..]);
        let mut d_z = Array2::zeros(z.raw_dim());
        ndarray::Zip::from(&mut d_z)
            .and(&d_unit)
            .and(&unit)
            .and(z)
            .for_each(|dz, &du, &u, &zv| *dz = du * (1.0 - u * u) + 2.0 * l2 * zv / n);
        let mut grad = vec![0.0; self.actor.param_count()];
        self.actor.backward(&actor_tape, d_z, &mut grad, false);
        (loss, grad)
    }

    /// One DDPG update: a critic step towards the clipped Bellman targets,
    /// then an actor step through the updated critic.
    pub fn train_step(&mut self, batch: &[RelabeledSample]) -> Result<TrainStats> {
        self.check_batch(batch)?;
        let targets = self.bellman_targets(batch);
        let (critic_loss, critic_grad) = self.critic_loss_grad(batch, &targets);
        if !critic_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "critic loss {critic_loss} on a batch of {} (target range {:?})",
                batch.len(),
                min_max(&targets)
            )));
        }
        self.critic_opt.step(self.critic.params_mut(), &critic_grad);

        let (actor_loss, actor_grad) = self.actor_loss_grad(batch);
        if !actor_loss.is_finite() {
            return Err(Error::Diverged(format!("actor loss {actor_loss} after critic loss {critic_loss}")));
        }
        self.actor_opt.step(self.actor.params_mut(), &actor_grad);
        if !(self.actor.is_finite() && self.critic.is_finite()) {
            return Err(Error::Diverged("non-finite parameters after update".into()));
        }
        Ok(TrainStats {
            critic_loss,
            actor_loss,
        })
    }

    /// `target ← polyak·target + (1 − polyak)·online` for actor and critic.
    pub fn polyak_update(&mut self) {
        self.actor_target.polyak_from(&self.actor, self.cfg.polyak);
        self.critic_target.polyak_from(&self.critic, self.cfg.polyak);
    }

    /// Raw critic output for explicit `(state, goal, action)` rows; no clipping.
    pub fn q_values(&self, batch: &[RelabeledSample]) -> Vec<f64> {
        let x = self.critic_input(batch);
        self.critic.forward(x.view()).index_axis(Axis(1), 0).to_vec()
    }
}

impl ValueFunction for DdpgAgent {
    fn values(&self, s0: &SystemState, goals: &[GoalVector]) -> Vec<f64> {
        self.value_batch(s0, goals)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
