//! Domain types shared by every module: states, goals, tasks, transitions,
//! trajectories, and the trajectory replay buffer.

mod buffer;

pub use buffer::ReplayBuffer;

use crate::error::{Error, Result};

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Fails if any coordinate is NaN or infinite.
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                if coords.iter().all(|x| x.is_finite()) {
                    Ok(Self(coords))
                } else {
                    Err(Error::NonFinite($what))
                }
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
                debug_assert!(coords.iter().all(|x| x.is_finite()), "non-finite {}", $what);
                Self(coords)
            }

            #[allow(dead_code)]
            pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;

            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl TryFrom<&[f64]> for $name {
            type Error = Error;

            fn try_from(coords: &[f64]) -> Result<Self> {
                Self::new(coords.to_vec())
            }
        }
    };
}

real_vector!(
    /// A point in goal space.
    GoalVector,
    "goal"
);

real_vector!(
    /// A full environment state.
    SystemState,
    "state"
);

impl GoalVector {
    pub fn distance(&self, other: &GoalVector) -> f64 {
        euclidean(self.coords(), other.coords())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// An initial state paired with a desired goal.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub initial_state: SystemState,
    pub goal: GoalVector,
}

impl TaskInstance {
    pub fn new(initial_state: SystemState, goal: GoalVector) -> Self {
        Self {
            initial_state,
            goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SystemState,
    pub action: Vec<f64>,
    /// Sparse reward, always exactly `0.0` or `-1.0`.
    pub reward: f64,
    pub next_state: SystemState,
    /// Goal-space projection of `next_state`, cached at collection time.
    pub achieved_goal: GoalVector,
}

/// One fixed-horizon rollout together with the task it was collected for.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: TaskInstance,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(task: TaskInstance, transitions: Vec<Transition>) -> Self {
        Self { task, transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// The state the rollout started from.
    pub fn initial_state(&self) -> &SystemState {
        self.transitions
            .first()
            .map(|t| &t.state)
            .unwrap_or(&self.task.initial_state)
    }

    /// Achieved goal after the last step.
    pub fn final_achieved(&self) -> Option<&GoalVector> {
        self.transitions.last().map(|t| &t.achieved_goal)
    }

    /// Checks the state chain and the reward support.
    pub fn validate(&self) -> Result<()> {
        for (step, pair) in self.transitions.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(Error::BrokenChain { step });
            }
        }
        for tr in &self.transitions {
            if tr.reward != 0.0 && tr.reward != -1.0 {
                return Err(Error::invalid(
                    "reward",
                    format!("{} is not in {{-1, 0}}", tr.reward),
                ));
            }
        }
        Ok(())
    }
}
