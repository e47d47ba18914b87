//! Task-space distances.
//!
//! `d((s,g),(s',g')) = c·‖φ(s) − φ(s')‖₂ + goal_dist(g, g')`, where the goal
//! term is either Euclidean or the crafted polyline distance used around
//! obstacles. [`wasserstein_discrete`] lifts `d` to equal-size uniform
//! particle sets.

use crate::domain::{euclidean, GoalVector, SystemState, TaskInstance};
use crate::env::{phi, EnvKind};
use crate::error::{Error, Result};
use crate::matching::mcmf_assign;

/// Ordered waypoints with precomputed cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    waypoints: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

/// Closest point on a polyline and its arc-length coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub arclength: f64,
    pub segment: usize,
}

impl Polyline {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::DegeneratePolyline("needs at least two waypoints"));
        }
        let dim = waypoints[0].len();
        if dim == 0 || waypoints.iter().any(|w| w.len() != dim) {
            return Err(Error::DegeneratePolyline("waypoints differ in dimension"));
        }
        if waypoints.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("polyline"));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for pair in waypoints.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + euclidean(&pair[0], &pair[1]));
        }
        if *cumulative.last().unwrap() <= 0.0 {
            return Err(Error::DegeneratePolyline("zero total length"));
        }
        Ok(Self {
            waypoints,
            cumulative,
        })
    }

    /// Parses a flat coordinate list `x0,y0,x1,y1,...` in goal dimension `dim`.
    pub fn from_flat(coords: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::DegeneratePolyline("coordinate count not a multiple of the dimension"));
        }
        Self::new(coords.chunks(dim).map(<[f64]>::to_vec).collect())
    }

    pub fn waypoints(&self) -> &[Vec<f64>] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Closest point. Ties go to the earliest segment.
    pub fn project(&self, p: &[f64]) -> Projection {
        let mut best: Option<(f64, Projection)> = None;
        for (seg, pair) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            let ab: Vec<f64> = b.iter().zip(a).map(|(bi, ai)| bi - ai).collect();
            let len2: f64 = ab.iter().map(|x| x * x).sum();
            let t = if len2 > 0.0 {
                let dot: f64 = p.iter().zip(a).zip(&ab).map(|((pi, ai), d)| (pi - ai) * d).sum();
                (dot / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let point: Vec<f64> = a.iter().zip(&ab).map(|(ai, d)| ai + t * d).collect();
            let dist = euclidean(p, &point);
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                let arclength = self.cumulative[seg] + t * len2.sqrt();
                best = Some((
                    dist,
                    Projection {
                        point,
                        arclength,
                        segment: seg,
                    },
                ));
            }
        }
        best.expect("at least one segment").1
    }
}

/// `‖g − proj(g)‖₂ + |s(proj(g)) − s(proj(g*))|`: off-line distance plus arc
/// separation along the polyline. Both goals are projected.
pub fn polyline_goal_distance(g: &GoalVector, g_star: &GoalVector, polyline: &Polyline) -> f64 {
    let pg = polyline.project(g.coords());
    let ps = polyline.project(g_star.coords());
    euclidean(g.coords(), &pg.point) + (pg.arclength - ps.arclength).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GoalMetric {
    Euclidean,
    Polyline(Polyline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    /// Weight on the initial-state term.
    pub c: f64,
    pub goal_metric: GoalMetric,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            c: 3.0,
            goal_metric: GoalMetric::Euclidean,
        }
    }
}

impl MetricConfig {
    pub fn euclidean(c: f64) -> Self {
        Self {
            c,
            goal_metric: GoalMetric::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid("c", format!("{} must be a positive real", self.c)));
        }
        Ok(())
    }

    /// Goal term of the task distance; `g` is the candidate, `g_star` the
    /// reference goal.
    pub fn goal_distance(&self, g: &GoalVector, g_star: &GoalVector) -> f64 {
        match &self.goal_metric {
            GoalMetric::Euclidean => g.distance(g_star),
            GoalMetric::Polyline(line) => polyline_goal_distance(g, g_star, line),
        }
    }

    /// Distance between tasks whose initial states are already projected.
    pub fn projected_distance(
        &self,
        a_init: &GoalVector,
        a_goal: &GoalVector,
        b_init: &GoalVector,
        b_goal: &GoalVector,
    ) -> f64 {
        self.c * a_init.distance(b_init) + self.goal_distance(a_goal, b_goal)
    }
}

fn check_dims(a: &TaskInstance, b: &TaskInstance) -> Result<()> {
    for (what, x, y) in [
        ("state", a.initial_state.dim(), b.initial_state.dim()),
        ("goal", a.goal.dim(), b.goal.dim()),
    ] {
        if x != y {
            return Err(Error::Dimension {
                what,
                expected: x,
                actual: y,
            });
        }
    }
    Ok(())
}

/// `c·‖φ(s_a) − φ(s_b)‖₂ + goal_dist(g_a, g_b)` with φ taken from `kind`.
pub fn task_distance(
    a: &TaskInstance,
    b: &TaskInstance,
    cfg: &MetricConfig,
    kind: EnvKind,
) -> Result<f64> {
    check_dims(a, b)?;
    Ok(cfg.projected_distance(
        &phi(kind, &a.initial_state),
        &a.goal,
        &phi(kind, &b.initial_state),
        &b.goal,
    ))
}

/// Pairwise task distances, `rows[i][j] = d(a[i], b[j])`.
pub fn distance_matrix(
    a: &[TaskInstance],
    b: &[TaskInstance],
    cfg: &MetricConfig,
    kind: EnvKind,
) -> Result<Vec<Vec<f64>>> {
    let project = |set: &[TaskInstance]| -> Vec<GoalVector> {
        set.iter().map(|t| phi(kind, &t.initial_state)).collect()
    };
    let (pa, pb) = (project(a), project(b));
    a.iter()
        .zip(&pa)
        .map(|(ta, ia)| {
            b.iter()
                .zip(&pb)
                .map(|(tb, ib)| {
                    check_dims(ta, tb)?;
                    Ok(cfg.projected_distance(ia, &ta.goal, ib, &tb.goal))
                })
                .collect()
        })
        .collect()
}

/// Wasserstein distance between two uniform particle sets of equal size:
/// the minimum-cost perfect matching divided by `K`.
pub fn wasserstein_discrete(
    a: &[TaskInstance],
    b: &[TaskInstance],
    cfg: &MetricConfig,
    kind: EnvKind,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::invalid("K", "particle sets must be nonempty"));
    }
    let cost = distance_matrix(a, b, cfg, kind)?;
    let assignment = mcmf_assign(&cost)?;
    Ok(assignment.total_cost / a.len() as f64)
}

/// Convenience for building a 2D task from plain coordinates, with φ the
/// identity (as in `desk-reach`).
pub fn planar_task(init: [f64; 2], goal: [f64; 2]) -> TaskInstance {
    TaskInstance::new(
        SystemState::from_raw(init.to_vec()),
        GoalVector::from_raw(goal.to_vec()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gv(x: f64, y: f64) -> GoalVector {
        GoalVector::new(vec![x, y]).unwrap()
    }

    fn brute_force_w(a: &[TaskInstance], b: &[TaskInstance], cfg: &MetricConfig) -> f64 {
        fn permute(k: usize, rest: &mut Vec<usize>, acc: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
            if acc.len() == k {
                f(acc);
                return;
            }
            for i in 0..rest.len() {
                let x = rest.remove(i);
                acc.push(x);
                permute(k, rest, acc, f);
                acc.pop();
                rest.insert(i, x);
            }
        }
        let k = a.len();
        let mut best = f64::INFINITY;
        permute(k, &mut (0..k).collect(), &mut vec![], &mut |perm| {
            let total: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| task_distance(&a[i], &b[j], cfg, EnvKind::Reach).unwrap())
                .sum();
            best = best.min(total);
        });
        best / k as f64
    }

    #[test]
    fn identical_tasks_have_zero_distance() {
        let a = planar_task([0.1, -0.1], [0.2, 0.3]);
        assert_eq!(task_distance(&a, &a, &MetricConfig::default(), EnvKind::Reach).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_distance() {
        let a = planar_task([0.0, 0.0], [0.0, 0.0]);
        let b = planar_task([1.0, 0.0], [0.0, 2.0]);
        let d = task_distance(&a, &b, &MetricConfig::euclidean(3.0), EnvKind::Reach).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = planar_task([0.0, 0.0], [0.0, 0.0]);
        let b = TaskInstance::new(SystemState::zeros(3), gv(0.0, 0.0));
        assert!(task_distance(&a, &b, &MetricConfig::default(), EnvKind::Reach).is_err());
    }

    #[test]
    fn polyline_zero_on_line() {
        let line = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(polyline_goal_distance(&gv(0.4, 0.0), &gv(0.4, 0.0), &line), 0.0);
    }

    #[test]
    fn straight_polyline_matches_euclidean() {
        let line = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let (g, s) = (gv(0.2, 0.0), gv(0.9, 0.0));
        assert!((polyline_goal_distance(&g, &s, &line) - g.distance(&s)).abs() < 1e-15);
    }

    #[test]
    fn l_shaped_polyline() {
        let line =
            Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let p = line.project(&[0.0, 0.1]);
        assert_eq!(p.point, vec![0.0, 0.0]);
        let d = polyline_goal_distance(&gv(0.0, 0.1), &gv(1.0, 1.0), &line);
        assert!((d - 2.1).abs() < 1e-12);
    }

    #[test]
    fn projection_ties_break_to_earliest_segment() {
        // (0.5, 0.5) is equidistant from the corner's two legs... and from the
        // corner itself; the first segment wins.
        let line =
            Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let p = line.project(&[2.0, -1.0]);
        assert_eq!(p.segment, 0);
        assert_eq!(p.point, vec![1.0, 0.0]);
        assert_eq!(p.arclength, 1.0);
    }

    #[test]
    fn degenerate_polylines_rejected() {
        assert!(Polyline::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(Polyline::new(vec![vec![0.3, 0.3], vec![0.3, 0.3]]).is_err());
        assert!(Polyline::from_flat(&[0.0, 0.0, 1.0], 2).is_err());
        assert!(Polyline::from_flat(&[0.0, 0.0, 1.0, 0.0], 2).is_ok());
    }

    #[test]
    fn wasserstein_identical_sets_any_order() {
        let a = vec![
            planar_task([0.0, 0.0], [0.1, 0.1]),
            planar_task([0.2, 0.0], [0.1, -0.1]),
            planar_task([0.0, 0.3], [0.0, 0.0]),
        ];
        let mut b = a.clone();
        b.reverse();
        let w = wasserstein_discrete(&a, &b, &MetricConfig::default(), EnvKind::Reach).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn wasserstein_single_particle() {
        let a = [planar_task([0.0, 0.0], [0.1, 0.1])];
        let b = [planar_task([0.2, 0.0], [0.3, -0.1])];
        let cfg = MetricConfig::default();
        let w = wasserstein_discrete(&a, &b, &cfg, EnvKind::Reach).unwrap();
        assert_eq!(w, task_distance(&a[0], &b[0], &cfg, EnvKind::Reach).unwrap());
    }

    #[test]
    fn wasserstein_size_mismatch() {
        let a = [planar_task([0.0, 0.0], [0.1, 0.1])];
        assert!(matches!(
            wasserstein_discrete(&a, &[], &MetricConfig::default(), EnvKind::Reach),
            Err(Error::SizeMismatch(1, 0))
        ));
    }

    fn task() -> impl Strategy<Value = TaskInstance> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_map(|(a, b, c, d)| planar_task([a, b], [c, d]))
    }

    proptest! {
        #[test]
        fn task_distance_is_a_metric(a in task(), b in task(), c in task(), w in 0.1f64..10.0) {
            let cfg = MetricConfig::euclidean(w);
            let d = |x: &TaskInstance, y: &TaskInstance| task_distance(x, y, &cfg, EnvKind::Reach).unwrap();
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }

        #[test]
        fn wasserstein_matches_permutations(
            sets in (1usize..=6).prop_flat_map(|k| (prop::collection::vec(task(), k), prop::collection::vec(task(), k)))
        ) {
            let cfg = MetricConfig::default();
            let w = wasserstein_discrete(&sets.0, &sets.1, &cfg, EnvKind::Reach).unwrap();
            prop_assert!((w - brute_force_w(&sets.0, &sets.1, &cfg)).abs() <= 1e-9);
        }

        #[test]
        fn wasserstein_triangle(
            sets in (1usize..=6).prop_flat_map(|k| (
                prop::collection::vec(task(), k),
                prop::collection::vec(task(), k),
                prop::collection::vec(task(), k),
            ))
        ) {
            let cfg = MetricConfig::default();
            let w = |x: &[TaskInstance], y: &[TaskInstance]| wasserstein_discrete(x, y, &cfg, EnvKind::Reach).unwrap();
            prop_assert!(w(&sets.0, &sets.2) <= w(&sets.0, &sets.1) + w(&sets.1, &sets.2) + 1e-9);
        }

        #[test]
        fn polyline_distance_nonnegative(x in -1.0f64..2.0, y in -1.0f64..2.0, sx in -1.0f64..2.0, sy in -1.0f64..2.0) {
            let line = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
            let d = polyline_goal_distance(&gv(x, y), &gv(sx, sy), &line);
            prop_assert!(d >= 0.0);
            let self_d = polyline_goal_distance(&gv(x, y), &gv(x, y), &line);
            let off = euclidean(&[x, y], &line.project(&[x, y]).point);
            prop_assert!((self_d - off).abs() < 1e-12);
        }
    }
}
