//! Hand-written reference controllers, used to establish that the desk tasks
//! are solvable and as an evaluation oracle.

use super::{DeskEnv, EnvKind};
use crate::domain::{GoalVector, SystemState};

/// Greedy scripted action for `state` towards `goal`.
///
/// Reach: move straight at the goal. Push: walk round to the far side of the
/// object (as seen from the goal), then push along the object-goal line. The
/// pusher ignores the wall.
pub fn scripted_action(env: &DeskEnv, state: &SystemState, goal: &GoalVector) -> Vec<f64> {
    let spec = env.spec();
    let c = state.coords();
    let agent = [c[0], c[1]];
    let to_unit = |target: [f64; 2]| {
        let d = [target[0] - agent[0], target[1] - agent[1]];
        let scale = spec.action_bound / spec.step_scale;
        let a = [d[0] * scale, d[1] * scale];
        // Shrink uniformly so clamping does not bend the direction.
        let shrink = (a[0].abs().max(a[1].abs()) / spec.action_bound).max(1.0);
        vec![a[0] / shrink, a[1] / shrink]
    };
    if env.kind() == EnvKind::Reach {
        return to_unit([goal[0], goal[1]]);
    }

    let obj = [c[2], c[3]];
    let r = spec.contact_radius;
    let to_goal = [goal[0] - obj[0], goal[1] - obj[1]];
    let remaining = norm(to_goal);
    if remaining < 0.25 * spec.success_threshold {
        return vec![0.0; spec.action_dim];
    }
    let u = [to_goal[0] / remaining, to_goal[1] / remaining];
    let rel = [agent[0] - obj[0], agent[1] - obj[1]];
    let contact = [obj[0] - u[0] * r, obj[1] - u[1] * r];

    // Within one step of the contact point: step to where the object ends up
    // displaced exactly along u.
    let to_contact = norm([contact[0] - agent[0], contact[1] - agent[1]]);
    if to_contact < 0.5 * spec.step_scale {
        let depth = remaining.min(spec.step_scale - to_contact);
        return to_unit([contact[0] + u[0] * depth, contact[1] + u[1] * depth]);
    }

    let staging = [contact[0] - u[0] * 0.01, contact[1] - u[1] * 0.01];
    if point_segment_distance(obj, agent, staging) < r + 0.003 {
        // Circle round the object towards the back side.
        let clearance = r + 0.012;
        let here = rel[1].atan2(rel[0]);
        let there = (-u[1]).atan2(-u[0]);
        let mut diff = there - here;
        while diff > std::f64::consts::PI {
            diff -= 2.0 * std::f64::consts::PI;
        }
        while diff < -std::f64::consts::PI {
            diff += 2.0 * std::f64::consts::PI;
        }
        let max_turn = 0.5 * spec.step_scale / clearance;
        let turn = diff.clamp(-max_turn, max_turn);
        let angle = here + turn;
        return to_unit([
            obj[0] + clearance * angle.cos(),
            obj[1] + clearance * angle.sin(),
        ]);
    }
    to_unit(staging)
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm([p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1]])
}
