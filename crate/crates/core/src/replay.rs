//! Hindsight relabelling with the "future" strategy.
//!
//! Transitions are drawn uniformly over everything stored in the buffer. With
//! probability `her_prob` the goal is swapped for an achieved goal from a
//! strictly later step of the same trajectory and the reward is recomputed.

use rand::Rng;

use crate::domain::{GoalVector, ReplayBuffer, SystemState};
use crate::env::sparse_reward;
use crate::error::{Error, Result};

pub const DEFAULT_HER_PROB: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct RelabeledSample {
    pub state: SystemState,
    pub action: Vec<f64>,
    pub next_state: SystemState,
    pub achieved_goal: GoalVector,
    pub goal: GoalVector,
    pub reward: f64,
    /// Index of the visited state whose φ replaced the goal, if relabelled.
    pub source_step: Option<usize>,
    /// Index of the transition within its trajectory.
    pub step: usize,
}

impl RelabeledSample {
    pub fn is_relabeled(&self) -> bool {
        self.source_step.is_some()
    }
}

/// Draws `batch` samples from `buffer`.
///
/// `threshold` is the success radius used to recompute rewards.
pub fn sample_minibatch<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    batch: usize,
    her_prob: f64,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<RelabeledSample>> {
    if !(0.0..=1.0).contains(&her_prob) {
        return Err(Error::invalid("her_prob", "must lie in [0, 1]"));
    }
    if buffer.transition_count() == 0 {
        return Err(Error::EmptyBuffer);
    }
    let mut ends = Vec::with_capacity(buffer.len());
    let mut total = 0;
    for traj in buffer.iter() {
        total += traj.len();
        ends.push(total);
    }

    let mut out = Vec::with_capacity(batch);
    for _ in 0..batch {
        let flat = rng.random_range(0..total);
        let which = ends.partition_point(|&e| e <= flat);
        let traj = buffer.get(which).expect("index from prefix sums");
        let t = flat - (ends[which] - traj.len());
        let tr = &traj.transitions[t];

        let (goal, reward, source_step) = if rng.random_bool(her_prob) {
            // Visited state k > t; state k is the result of transition k - 1.
            let k = rng.random_range(t + 1..=traj.len());
            let goal = traj.transitions[k - 1].achieved_goal.clone();
            let reward = sparse_reward(&tr.achieved_goal, &goal, threshold);
            (goal, reward, Some(k))
        } else {
            (traj.task.goal.clone(), tr.reward, None)
        };
        out.push(RelabeledSample {
            state: tr.state.clone(),
            action: tr.action.clone(),
            next_state: tr.next_state.clone(),
            achieved_goal: tr.achieved_goal.clone(),
            goal,
            reward,
            source_step,
            step: t,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::test_util::path;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DELTA: f64 = 0.02;

    fn moving_buffer() -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(10).unwrap();
        let pts: Vec<[f64; 2]> = (0..=5).map(|i| [0.05 * i as f64, 0.0]).collect();
        buf.push(path([1.0, 1.0], &pts)).unwrap();
        let pts: Vec<[f64; 2]> = (0..=3).map(|i| [0.0, -0.05 - 0.1 * i as f64]).collect();
        buf.push(path([0.0, -0.35], &pts)).unwrap();
        buf
    }

    #[test]
    fn no_relabel_keeps_stored_goal_and_reward() {
        let buf = moving_buffer();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_minibatch(&buf, 500, 0.0, DELTA, &mut rng).unwrap();
        for s in &batch {
            assert!(!s.is_relabeled());
            let owner = buf.iter().find(|t| t.transitions[s.step].state == s.state).unwrap();
            assert_eq!(s.goal, owner.task.goal);
            assert_eq!(s.reward, owner.transitions[s.step].reward);
        }
        assert!(batch.iter().any(|s| s.reward == 0.0));
    }

    #[test]
    fn last_step_relabels_to_its_own_outcome() {
        let mut buf = ReplayBuffer::new(1).unwrap();
        buf.push(path([1.0, 1.0], &[[0.0, 0.0], [0.3, 0.0]])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in sample_minibatch(&buf, 50, 1.0, DELTA, &mut rng).unwrap() {
            assert_eq!(s.source_step, Some(1));
            assert_eq!(s.goal.coords(), &[0.3, 0.0]);
            assert_eq!(s.reward, 0.0);
        }
    }

    #[test]
    fn empty_buffer_is_an_error() {
        let buf = ReplayBuffer::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_minibatch(&buf, 4, 0.8, DELTA, &mut rng),
            Err(Error::EmptyBuffer)
        ));
        assert!(sample_minibatch(&moving_buffer(), 4, 1.5, DELTA, &mut rng).is_err());
    }

    #[test]
    fn relabel_fraction_matches_probability() {
        let buf = moving_buffer();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let batch = sample_minibatch(&buf, n, DEFAULT_HER_PROB, DELTA, &mut rng).unwrap();
        let frac = batch.iter().filter(|s| s.is_relabeled()).count() as f64 / n as f64;
        assert!((frac - 0.8).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn transitions_are_drawn_uniformly() {
        // 5 + 3 transitions: the longer path should get 5/8 of the draws.
        let buf = moving_buffer();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let batch = sample_minibatch(&buf, n, 0.0, DELTA, &mut rng).unwrap();
        let first = batch.iter().filter(|s| s.goal.coords() == [1.0, 1.0]).count();
        let frac = first as f64 / n as f64;
        let sd = (0.625f64 * 0.375 / n as f64).sqrt();
        assert!((frac - 0.625).abs() < 4.0 * sd, "{frac}");
    }

    proptest! {
        #[test]
        fn relabels_are_future_and_rewards_exact(
            seed in any::<u64>(),
            lens in proptest::collection::vec(1usize..8, 1..5),
            her in 0.0f64..=1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut buf = ReplayBuffer::new(8).unwrap();
            for len in lens {
                let pts: Vec<[f64; 2]> = (0..=len)
                    .map(|_| [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)])
                    .collect();
                buf.push(path([0.05, 0.05], &pts)).unwrap();
            }
            for s in sample_minibatch(&buf, 64, her, DELTA, &mut rng).unwrap() {
                if let Some(k) = s.source_step {
                    prop_assert!(k > s.step);
                }
                prop_assert_eq!(s.reward, sparse_reward(&s.achieved_goal, &s.goal, DELTA));
            }
        }
    }
}
