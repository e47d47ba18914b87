//! Goal-oriented MDP interface and the three kinematic desk environments.
//!
//! All environments live on the table square `[-0.25, 0.25]²` with the agent
//! starting at the origin. Dynamics are deterministic and kinematic: the
//! action is a per-coordinate velocity command in `[-1, 1]` scaled by
//! `step_scale`, integrated in `substeps` equal parts so that contact is
//! resolved at a resolution finer than the contact radius.
//!
//! - `desk-reach`: state is the agent position; φ is the identity.
//! - `desk-push`: state is `(agent, object, object - agent)`; φ is the object
//!   position. The agent pushes the object when their centres come closer
//!   than the contact radius.
//! - `desk-push-wall`: as `desk-push`, plus a rigid wall along
//!   `(-0.3, 0)–(0, 0)` that blocks the object. The agent, like a gripper
//!   moving above the table, passes over it.

mod geometry;
mod scripted;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use geometry::{segments_intersect, Wall};
pub use scripted::scripted_action;

use crate::domain::{GoalVector, SystemState, TaskInstance, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::metric::Polyline;

pub const TABLE_HALF_EXTENT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Reach,
    Push,
    PushWall,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Reach, EnvKind::Push, EnvKind::PushWall];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Reach => "desk-reach",
            EnvKind::Push => "desk-push",
            EnvKind::PushWall => "desk-push-wall",
        }
    }

    pub fn has_object(self) -> bool {
        !matches!(self, EnvKind::Reach)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    /// δ_g: success radius in goal space.
    pub success_threshold: f64,
    pub action_bound: f64,
    /// Table displacement produced by a unit action.
    pub step_scale: f64,
    /// Agent/object centre distance below which the object is pushed.
    pub contact_radius: f64,
    pub substeps: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.success_threshold > 0.0) {
            return Err(Error::invalid("success_threshold", "must be > 0"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        if !(self.action_bound > 0.0) || !(self.step_scale > 0.0) {
            return Err(Error::invalid("action_bound", "bound and step scale must be > 0"));
        }
        if !(self.contact_radius > 0.0) {
            return Err(Error::invalid("contact_radius", "must be > 0"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps", "must be >= 1"));
        }
        Ok(())
    }
}

/// Uniform segments for the initial object (or agent) position and the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    pub initial_segment: (GoalVector, GoalVector),
    pub goal_segment: (GoalVector, GoalVector),
}

impl TargetDistribution {
    pub fn new(initial: ([f64; 2], [f64; 2]), goal: ([f64; 2], [f64; 2])) -> Self {
        let gv = |p: [f64; 2]| GoalVector::from_raw(p.to_vec());
        Self {
            initial_segment: (gv(initial.0), gv(initial.1)),
            goal_segment: (gv(goal.0), gv(goal.1)),
        }
    }

    /// Independent uniform draws on the two segments: `(initial, goal)`.
    pub fn sample_points<R: Rng + ?Sized>(&self, rng: &mut R) -> (GoalVector, GoalVector) {
        let initial = lerp(&self.initial_segment, rng.random::<f64>());
        let goal = lerp(&self.goal_segment, rng.random::<f64>());
        (initial, goal)
    }
}

fn lerp(seg: &(GoalVector, GoalVector), u: f64) -> GoalVector {
    let coords = seg
        .0
        .coords()
        .iter()
        .zip(seg.1.coords())
        .map(|(a, b)| a + u * (b - a))
        .collect();
    GoalVector::from_raw(coords)
}

/// Sparse reward on already-projected goals.
pub fn sparse_reward(achieved: &GoalVector, goal: &GoalVector, threshold: f64) -> f64 {
    if achieved.distance(goal) <= threshold {
        0.0
    } else {
        -1.0
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: f64,
    pub achieved: GoalVector,
}

/// A deterministic desk environment instance.
#[derive(Debug, Clone)]
pub struct DeskEnv {
    kind: EnvKind,
    spec: EnvSpec,
    target: TargetDistribution,
    wall: Option<Wall>,
    current: Option<Episode>,
}

#[derive(Debug, Clone)]
struct Episode {
    state: SystemState,
    goal: GoalVector,
    t: usize,
}

impl DeskEnv {
    pub fn new(kind: EnvKind) -> Self {
        let state_dim = match kind {
            EnvKind::Reach => 2,
            EnvKind::Push | EnvKind::PushWall => 6,
        };
        let spec = EnvSpec {
            state_dim,
            goal_dim: 2,
            action_dim: 2,
            horizon: 50,
            success_threshold: 0.02,
            action_bound: 1.0,
            step_scale: 0.05,
            contact_radius: 0.03,
            substeps: 5,
        };
        let target = match kind {
            EnvKind::Reach => {
                TargetDistribution::new(([0.0, 0.0], [0.0, 0.0]), ([-0.15, 0.15], [0.15, 0.15]))
            }
            EnvKind::Push => TargetDistribution::new(
                ([-0.15, -0.15], [0.15, -0.15]),
                ([-0.15, 0.15], [0.15, 0.15]),
            ),
            EnvKind::PushWall => TargetDistribution::new(
                ([-0.15, -0.15], [-0.045, -0.15]),
                ([-0.15, 0.15], [-0.045, 0.15]),
            ),
        };
        let wall = (kind == EnvKind::PushWall).then(Wall::desk_default);
        Self {
            kind,
            spec,
            target,
            wall,
            current: None,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    /// Replaces the spec, e.g. to change the horizon.
    pub fn with_spec(mut self, spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        if spec.state_dim != self.spec.state_dim
            || spec.goal_dim != self.spec.goal_dim
            || spec.action_dim != self.spec.action_dim
        {
            return Err(Error::invalid("spec", "dimensions are fixed by the environment kind"));
        }
        self.spec = spec;
        Ok(self)
    }

    pub fn with_target(mut self, target: TargetDistribution) -> Self {
        self.target = target;
        self
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn target(&self) -> &TargetDistribution {
        &self.target
    }

    pub fn wall(&self) -> Option<&Wall> {
        self.wall.as_ref()
    }

    /// ℓ₂ diameter of the goal space (the table diagonal).
    pub fn goal_space_diameter(&self) -> f64 {
        2.0 * TABLE_HALF_EXTENT * std::f64::consts::SQRT_2
    }

    /// Hand-crafted path from the initial region round the free end of the
    /// wall to the goal region, for the polyline goal metric. `None` without
    /// a wall.
    pub fn detour_polyline(&self) -> Option<Polyline> {
        self.wall.as_ref().map(|wall| {
            let x = wall.to[0] + 0.05;
            let waypoints = vec![vec![-0.15, -0.15], vec![x, -0.15], vec![x, 0.15], vec![-0.15, 0.15]];
            Polyline::new(waypoints).expect("fixed waypoints are distinct")
        })
    }

    pub fn current_state(&self) -> Option<&SystemState> {
        self.current.as_ref().map(|e| &e.state)
    }

    pub fn elapsed(&self) -> usize {
        self.current.as_ref().map_or(0, |e| e.t)
    }

    /// Projects a state onto goal space: the agent position for reach, the
    /// object position otherwise.
    pub fn phi(&self, state: &SystemState) -> GoalVector {
        phi(self.kind, state)
    }

    pub fn reward(&self, next_state: &SystemState, goal: &GoalVector) -> f64 {
        sparse_reward(&self.phi(next_state), goal, self.spec.success_threshold)
    }

    /// Builds a consistent state vector from body positions.
    pub fn compose_state(&self, agent: [f64; 2], object: Option<[f64; 2]>) -> SystemState {
        match (self.kind.has_object(), object) {
            (true, Some(o)) => SystemState::from_raw(vec![
                agent[0],
                agent[1],
                o[0],
                o[1],
                o[0] - agent[0],
                o[1] - agent[1],
            ]),
            _ => SystemState::from_raw(agent.to_vec()),
        }
    }

    pub fn sample_target_task<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskInstance {
        let (initial, goal) = self.target.sample_points(rng);
        let p = [initial[0], initial[1]];
        let state = if self.kind.has_object() {
            self.compose_state([0.0, 0.0], Some(p))
        } else {
            self.compose_state(p, None)
        };
        TaskInstance::new(state, goal)
    }

    /// Checks that `state` is a legal initial state for this environment.
    pub fn check_initial_state(&self, state: &SystemState) -> Result<()> {
        if state.dim() != self.spec.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.spec.state_dim,
                actual: state.dim(),
            });
        }
        let c = state.coords();
        let inside = |x: f64| x.abs() <= TABLE_HALF_EXTENT;
        if !c[..2].iter().all(|&x| inside(x)) {
            return Err(Error::IllegalState("agent outside the table".into()));
        }
        if self.kind.has_object() {
            if !c[2..4].iter().all(|&x| inside(x)) {
                return Err(Error::IllegalState("object outside the table".into()));
            }
            if (c[4] - (c[2] - c[0])).abs() > 1e-12 || (c[5] - (c[3] - c[1])).abs() > 1e-12 {
                return Err(Error::IllegalState("relative position inconsistent".into()));
            }
            if let Some(wall) = &self.wall {
                if wall.contains([c[2], c[3]]) {
                    return Err(Error::IllegalState("object inside the wall".into()));
                }
            }
            if (c[4] * c[4] + c[5] * c[5]).sqrt() < self.spec.contact_radius {
                return Err(Error::IllegalState("agent overlaps the object".into()));
            }
        }
        Ok(())
    }

    /// Starts an episode at `task.initial_state`.
    pub fn reset(&mut self, task: &TaskInstance) -> Result<SystemState> {
        self.check_initial_state(&task.initial_state)?;
        if task.goal.dim() != self.spec.goal_dim {
            return Err(Error::Dimension {
                what: "goal",
                expected: self.spec.goal_dim,
                actual: task.goal.dim(),
            });
        }
        self.current = Some(Episode {
            state: task.initial_state.clone(),
            goal: task.goal.clone(),
            t: 0,
        });
        Ok(task.initial_state.clone())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != self.spec.action_dim {
            return Err(Error::Dimension {
                what: "action",
                expected: self.spec.action_dim,
                actual: action.len(),
            });
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let horizon = self.spec.horizon;
        let episode = self.current.as_ref().ok_or(Error::NotReset)?;
        if episode.t >= horizon {
            return Err(Error::EpisodeOver {
                step: episode.t,
                horizon,
            });
        }
        let next_state = self.transition(&episode.state, action);
        let achieved = self.phi(&next_state);
        let reward = sparse_reward(&achieved, &episode.goal, self.spec.success_threshold);
        let episode = self.current.as_mut().expect("checked above");
        episode.state = next_state.clone();
        episode.t += 1;
        Ok(StepOutcome {
            next_state,
            reward,
            achieved,
        })
    }

    /// Pure dynamics: the state reached from `state` under `action`.
    pub fn transition(&self, state: &SystemState, action: &[f64]) -> SystemState {
        let bound = self.spec.action_bound;
        let scale = self.spec.step_scale / bound / self.spec.substeps as f64;
        let delta = [
            action[0].clamp(-bound, bound) * scale,
            action[1].clamp(-bound, bound) * scale,
        ];
        let c = state.coords();
        let mut agent = [c[0], c[1]];
        if !self.kind.has_object() {
            for _ in 0..self.spec.substeps {
                agent = clip_to_table([agent[0] + delta[0], agent[1] + delta[1]]);
            }
            return self.compose_state(agent, None);
        }
        let mut object = [c[2], c[3]];
        for _ in 0..self.spec.substeps {
            (agent, object) = self.substep(agent, object, delta);
        }
        self.compose_state(agent, Some(object))
    }

    fn substep(&self, agent: [f64; 2], object: [f64; 2], delta: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let agent_next = clip_to_table([agent[0] + delta[0], agent[1] + delta[1]]);
        let gap = [object[0] - agent_next[0], object[1] - agent_next[1]];
        let dist = (gap[0] * gap[0] + gap[1] * gap[1]).sqrt();
        let r = self.spec.contact_radius;
        if dist >= r {
            return (agent_next, object);
        }
        let dir = if dist > 1e-12 {
            [gap[0] / dist, gap[1] / dist]
        } else {
            let norm = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
            if norm > 0.0 {
                [delta[0] / norm, delta[1] / norm]
            } else {
                [0.0, 1.0]
            }
        };
        let overlap = r - dist;
        let object_next =
            self.move_object(object, [object[0] + dir[0] * overlap, object[1] + dir[1] * overlap]);
        // A blocked object stops the agent at contact distance.
        let gap = [object_next[0] - agent_next[0], object_next[1] - agent_next[1]];
        let agent_next = if (gap[0] * gap[0] + gap[1] * gap[1]).sqrt() < r {
            clip_to_table([object_next[0] - dir[0] * r, object_next[1] - dir[1] * r])
        } else {
            agent_next
        };
        (agent_next, object_next)
    }

    /// Moves the object, stopping at the wall and clipping to the table.
    fn move_object(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        clip_to_table(match &self.wall {
            Some(wall) => wall.block(from, to),
            None => to,
        })
    }

    /// Runs one full-horizon episode with `policy` and records it.
    pub fn rollout<F>(&mut self, task: &TaskInstance, mut policy: F) -> Result<Trajectory>
    where
        F: FnMut(&SystemState, &GoalVector) -> Vec<f64>,
    {
        let mut state = self.reset(task)?;
        let mut transitions = Vec::with_capacity(self.spec.horizon);
        for _ in 0..self.spec.horizon {
            let action = policy(&state, &task.goal);
            let out = self.step(&action)?;
            transitions.push(Transition {
                state: std::mem::replace(&mut state, out.next_state.clone()),
                action,
                reward: out.reward,
                next_state: out.next_state,
                achieved_goal: out.achieved,
            });
        }
        Ok(Trajectory::new(task.clone(), transitions))
    }

    /// Success is judged on the final state only.
    pub fn is_success(&self, traj: &Trajectory) -> Result<bool> {
        is_success(&self.spec, traj)
    }
}

fn clip_to_table(p: [f64; 2]) -> [f64; 2] {
    [
        p[0].clamp(-TABLE_HALF_EXTENT, TABLE_HALF_EXTENT),
        p[1].clamp(-TABLE_HALF_EXTENT, TABLE_HALF_EXTENT),
    ]
}

pub fn phi(kind: EnvKind, state: &SystemState) -> GoalVector {
    let c = state.coords();
    match kind {
        EnvKind::Reach => GoalVector::from_raw(c[..2].to_vec()),
        EnvKind::Push | EnvKind::PushWall => GoalVector::from_raw(c[2..4].to_vec()),
    }
}

pub fn is_success(spec: &EnvSpec, traj: &Trajectory) -> Result<bool> {
    if traj.len() != spec.horizon {
        return Err(Error::IncompleteTrajectory {
            actual: traj.len(),
            horizon: spec.horizon,
        });
    }
    let last = traj.final_achieved().expect("horizon >= 1");
    Ok(last.distance(&traj.task.goal) <= spec.success_threshold)
}

#[cfg(test)]
mod tests;
