use super::*;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn g(x: f64, y: f64) -> GoalVector {
    GoalVector::new(vec![x, y]).unwrap()
}

#[test]
fn env_names_round_trip() {
    for kind in EnvKind::ALL {
        assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
    }
    assert!(matches!("desk-slide".parse::<EnvKind>(), Err(Error::UnknownEnv(_))));
}

#[test]
fn phi_reach_is_identity() {
    let env = DeskEnv::new(EnvKind::Reach);
    let s = env.compose_state([0.3, 0.4], None);
    assert_eq!(env.phi(&s), g(0.3, 0.4));
}

#[test]
fn phi_push_is_object_position() {
    let env = DeskEnv::new(EnvKind::Push);
    let s = env.compose_state([0.0, 0.0], Some([0.1, -0.15]));
    assert_eq!(env.phi(&s), g(0.1, -0.15));
}

#[test]
fn phi_of_reset_matches_sampled_object() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in [EnvKind::Push, EnvKind::PushWall] {
        let mut env = DeskEnv::new(kind);
        for _ in 0..1000 {
            let task = env.sample_target_task(&mut rng);
            let s0 = env.reset(&task).unwrap();
            let c = task.initial_state.coords();
            assert_eq!(env.phi(&s0).coords(), &c[2..4]);
        }
    }
}

#[test]
fn reward_exact_match_and_boundary() {
    let env = DeskEnv::new(EnvKind::Reach);
    let delta = env.spec().success_threshold;
    let s = env.compose_state([0.1, 0.1], None);
    assert_eq!(env.reward(&s, &g(0.1, 0.1)), 0.0);
    // sqrt(fl(x²)) == |x|, so this distance is exactly δ.
    assert_eq!(sparse_reward(&g(0.0, 0.0), &g(delta, 0.0), delta), 0.0);
    assert_eq!(sparse_reward(&g(0.0, 0.0), &g(1.001 * delta, 0.0), delta), -1.0);
}

#[test]
fn reset_is_exact_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut env = DeskEnv::new(EnvKind::Push);
    for _ in 0..100 {
        let task = env.sample_target_task(&mut rng);
        let a = env.reset(&task).unwrap();
        let b = env.reset(&task).unwrap();
        assert_eq!(a, task.initial_state);
        assert_eq!(
            a.coords().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.coords().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn reset_rejects_object_inside_wall() {
    let mut env = DeskEnv::new(EnvKind::PushWall);
    let s = env.compose_state([0.0, -0.1], Some([-0.1, 0.0]));
    let task = TaskInstance::new(s, g(-0.1, 0.15));
    assert!(matches!(env.reset(&task), Err(Error::IllegalState(_))));
}

#[test]
fn reset_rejects_wrong_dimension_and_overlap() {
    let mut env = DeskEnv::new(EnvKind::Push);
    let task = TaskInstance::new(SystemState::new(vec![0.0, 0.0]).unwrap(), g(0.0, 0.1));
    assert!(matches!(env.reset(&task), Err(Error::Dimension { .. })));
    let s = env.compose_state([0.0, 0.0], Some([0.01, 0.0]));
    assert!(env.reset(&TaskInstance::new(s, g(0.0, 0.1))).is_err());
}

#[test]
fn zero_action_leaves_state_unchanged() {
    for kind in EnvKind::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut env = DeskEnv::new(kind);
        let task = env.sample_target_task(&mut rng);
        let s0 = env.reset(&task).unwrap();
        let out = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(out.next_state, s0);
        assert_eq!(out.reward, env.reward(&s0, &task.goal));
    }
}

#[test]
fn actions_are_clamped() {
    let mut env = DeskEnv::new(EnvKind::Reach);
    let task = TaskInstance::new(env.compose_state([0.0, 0.0], None), g(0.1, 0.1));
    env.reset(&task).unwrap();
    let out = env.step(&[100.0, -100.0]).unwrap();
    let step = env.spec().step_scale;
    assert_eq!(out.next_state.coords(), &[step, -step]);
}

#[test]
fn object_pushed_into_wall_stops_at_face() {
    let mut env = DeskEnv::new(EnvKind::PushWall);
    let s = env.compose_state([-0.1, -0.1], Some([-0.1, -0.07]));
    let task = TaskInstance::new(s, g(-0.1, 0.15));
    env.reset(&task).unwrap();
    let wall = env.wall().unwrap().clone();
    let mut prev = [-0.1, -0.07];
    for _ in 0..20 {
        let out = env.step(&[0.0, 1.0]).unwrap();
        let o = [out.achieved[0], out.achieved[1]];
        assert!(o[1] <= -wall.half_thickness);
        assert!(!segments_intersect(prev, o, wall.from, wall.to));
        prev = o;
    }
    assert_eq!(prev[1], -wall.half_thickness);
}

#[test]
fn step_after_horizon_fails() {
    let mut env = DeskEnv::new(EnvKind::Reach);
    let task = TaskInstance::new(env.compose_state([0.0, 0.0], None), g(0.1, 0.1));
    env.reset(&task).unwrap();
    for _ in 0..env.spec().horizon {
        env.step(&[0.0, 0.0]).unwrap();
    }
    assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::EpisodeOver { .. })));
    assert!(matches!(
        DeskEnv::new(EnvKind::Reach).step(&[0.0, 0.0]),
        Err(Error::NotReset)
    ));
}

#[test]
fn scripted_pusher_solves_near_goals() {
    let mut env = DeskEnv::new(EnvKind::Push);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let task = env.sample_target_task(&mut rng);
        let c = task.initial_state.coords();
        let dx: f64 = rng.random_range(-0.08..0.08);
        let dy: f64 = rng.random_range(-0.02..0.1);
        let near = TaskInstance::new(task.initial_state.clone(), g(c[2] + dx, c[3] + dy));
        let env2 = env.clone();
        let traj = env
            .rollout(&near, |s, goal| scripted_action(&env2, s, goal))
            .unwrap();
        assert!(traj.transitions.iter().any(|t| t.reward == 0.0));
    }
}

#[test]
fn scripted_pusher_solves_far_targets() {
    let mut env = DeskEnv::new(EnvKind::Push);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut successes = 0;
    for _ in 0..50 {
        let task = env.sample_target_task(&mut rng);
        let env2 = env.clone();
        let traj = env
            .rollout(&task, |s, goal| scripted_action(&env2, s, goal))
            .unwrap();
        successes += env.is_success(&traj).unwrap() as usize;
    }
    assert_eq!(successes, 50);
}

#[test]
fn degenerate_segment_always_returns_endpoint() {
    let dist = TargetDistribution::new(([0.1, 0.2], [0.1, 0.2]), ([0.0, 0.0], [0.0, 0.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let (a, b) = dist.sample_points(&mut rng);
        assert_eq!(a, g(0.1, 0.2));
        assert_eq!(b, g(0.0, 0.0));
    }
}

#[test]
fn initial_segment_mean_is_centred() {
    let env = DeskEnv::new(EnvKind::Push);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let mean = (0..n)
        .map(|_| env.sample_target_task(&mut rng).initial_state[2])
        .sum::<f64>()
        / n as f64;
    // Three standard errors of the mean of U(-0.15, 0.15), whose standard
    // deviation is 0.3/√12.
    let tol = 0.3 * 3.0 / ((n as f64) * 12.0).sqrt();
    assert!(mean.abs() < tol, "mean {mean} tol {tol}");
}

#[test]
fn sampled_goals_lie_on_goal_segment() {
    let env = DeskEnv::new(EnvKind::Push);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let task = env.sample_target_task(&mut rng);
        assert_eq!(task.goal[1], 0.15);
        assert!(task.goal[0] >= -0.15 && task.goal[0] <= 0.15);
        assert_eq!(task.initial_state[1], 0.0);
        assert_eq!(task.initial_state[3], -0.15);
    }
}

#[test]
fn success_uses_final_state_only() {
    let mut env = DeskEnv::new(EnvKind::Reach);
    let step = env.spec().step_scale;
    let task = TaskInstance::new(env.compose_state([0.0, 0.0], None), g(2.0 * step, 0.0));
    let h = env.spec().horizon;
    let mut t = 0;
    let traj = env
        .rollout(&task, |_, _| {
            t += 1;
            if t <= 2 {
                vec![1.0, 0.0]
            } else if t > h / 2 {
                vec![-1.0, 0.0]
            } else {
                vec![0.0, 0.0]
            }
        })
        .unwrap();
    assert_eq!(traj.transitions[h / 2 - 1].reward, 0.0);
    assert!(!env.is_success(&traj).unwrap());

    let hit = env.rollout(&task, |s, goal| {
        vec![((goal[0] - s[0]) / step).clamp(-1.0, 1.0), 0.0]
    });
    assert!(env.is_success(&hit.unwrap()).unwrap());
}

#[test]
fn idle_rollout_on_far_goal_fails() {
    let mut env = DeskEnv::new(EnvKind::Push);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let task = env.sample_target_task(&mut rng);
    let traj = env.rollout(&task, |_, _| vec![0.0, 0.0]).unwrap();
    assert!(!env.is_success(&traj).unwrap());
}

#[test]
fn incomplete_trajectory_is_an_error() {
    let mut env = DeskEnv::new(EnvKind::Reach);
    let task = TaskInstance::new(env.compose_state([0.0, 0.0], None), g(0.1, 0.0));
    let mut traj = env.rollout(&task, |_, _| vec![0.0, 0.0]).unwrap();
    traj.transitions.pop();
    assert!(matches!(
        env.is_success(&traj),
        Err(Error::IncompleteTrajectory { .. })
    ));
}

fn actions(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dynamics_invariants(kind_ix in 0usize..3, seed in 0u64..1000, acts in actions(100)) {
        let kind = EnvKind::ALL[kind_ix];
        let mut env = DeskEnv::new(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = env.sample_target_task(&mut rng);
        let h = env.spec().horizon;
        let mut i = 0;
        let traj = env.rollout(&task, |_, _| { let a = acts[i % acts.len()]; i += 1; vec![a.0, a.1] }).unwrap();
        let mut j = 0;
        let again = env.rollout(&task, |_, _| { let a = acts[j % acts.len()]; j += 1; vec![a.0, a.1] }).unwrap();
        prop_assert_eq!(&traj, &again);
        prop_assert_eq!(traj.len(), h);
        prop_assert!(traj.validate().is_ok());
        for tr in &traj.transitions {
            prop_assert!(tr.next_state.coords()[..4.min(tr.next_state.dim())]
                .iter().all(|x| x.abs() <= TABLE_HALF_EXTENT));
            prop_assert_eq!(&tr.achieved_goal, &env.phi(&tr.next_state));
        }
        let last_reward = traj.transitions.last().unwrap().reward;
        prop_assert_eq!(env.is_success(&traj).unwrap(), last_reward == 0.0);
        if let Some(wall) = env.wall() {
            let mut prev = [task.initial_state[2], task.initial_state[3]];
            for tr in &traj.transitions {
                let o = [tr.achieved_goal[0], tr.achieved_goal[1]];
                prop_assert!(!segments_intersect(prev, o, wall.from, wall.to));
                prop_assert!(!wall.contains(o));
                prev = o;
            }
        }
    }
}
