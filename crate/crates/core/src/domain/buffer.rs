use std::collections::VecDeque;

use super::Trajectory;
use crate::error::{Error, Result};

/// Bounded FIFO store of whole trajectories.
///
/// Serves both hindsight minibatch sampling and the candidate pool of the goal
/// matcher. Once full, every push evicts exactly the oldest trajectory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    trajectories: VecDeque<Trajectory>,
    capacity: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("capacity", "must be positive"));
        }
        Ok(Self {
            trajectories: VecDeque::with_capacity(capacity.min(1024)),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Trajectory> {
        self.trajectories.get(index)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Trajectory> + DoubleEndedIterator {
        self.trajectories.iter()
    }

    pub fn transition_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Appends `traj`, evicting the oldest trajectory if the buffer is full.
    pub fn push(&mut self, traj: Trajectory) -> Result<()> {
        traj.validate()?;
        if self.trajectories.len() == self.capacity {
            self.trajectories.pop_front();
        }
        self.trajectories.push_back(traj);
        Ok(())
    }

    /// The `min(pool_size, len)` most recent trajectories, newest last.
    pub fn matching_pool(&self, pool_size: usize) -> Vec<&Trajectory> {
        let skip = self.trajectories.len().saturating_sub(pool_size);
        self.trajectories.iter().skip(skip).collect()
    }
}
