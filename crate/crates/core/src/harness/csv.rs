//! The `curve.csv` schema and percentile aggregation across runs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hgg::IterationReport;

pub const CURVE_HEADER: &str = "iteration,episodes,success_rate,mean_matching_cost,goal_wasserstein,critic_loss";

/// One row of `curve.csv`. A missing matching cost (warm-up or baseline) is
/// written as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_matching_cost: Option<f64>,
    pub goal_wasserstein: f64,
    pub critic_loss: f64,
}

impl From<&IterationReport> for CurveRow {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration,
            episodes: r.episodes,
            success_rate: r.success_rate,
            mean_matching_cost: r.mean_matching_cost,
            goal_wasserstein: r.goal_wasserstein,
            critic_loss: r.critic_loss,
        }
    }
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.episodes,
            self.success_rate,
            self.mean_matching_cost.map(|c| c.to_string()).unwrap_or_default(),
            self.goal_wasserstein,
            self.critic_loss
        )
    }

    fn parse(line: &str, n: usize) -> Result<Self> {
        let bad = |what: &str| Error::Csv(format!("line {n}: {what}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(&format!("bad integer {s:?}")));
        Ok(Self {
            iteration: int(f[0])?,
            episodes: int(f[1])?,
            success_rate: num(f[2])?,
            mean_matching_cost: if f[3].trim().is_empty() { None } else { Some(num(f[3])?) },
            goal_wasserstein: num(f[4])?,
            critic_loss: num(f[5])?,
        })
    }
}

pub type Curve = Vec<CurveRow>;

pub fn read_curve(path: &Path) -> Result<Curve> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Csv(format!("{}: missing or unexpected header", path.display())));
    }
    let rows: Curve = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| CurveRow::parse(l, i + 2))
        .collect::<Result<_>>()?;
    if rows.windows(2).any(|w| w[1].iteration <= w[0].iteration) {
        return Err(Error::Csv(format!("{}: iterations not strictly increasing", path.display())));
    }
    Ok(rows)
}

/// Nearest-rank percentile: the `⌈p/100 · n⌉`-th smallest value (at least the
/// first). `p` lies in `[0, 100]`.
pub fn nearest_rank(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    assert!((0.0..=100.0).contains(&p), "percentile out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p * sorted.len() as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Median with its 20th/80th percentile band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub p20: f64,
    pub median: f64,
    pub p80: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Self {
        Self {
            p20: nearest_rank(values, 20.0),
            median: nearest_rank(values, 50.0),
            p80: nearest_rank(values, 80.0),
        }
    }
}

/// Per-iteration success-rate bands across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub iterations: Vec<usize>,
    pub episodes: Vec<usize>,
    pub success: Vec<Band>,
}

/// Aggregates runs that share an iteration grid.
pub fn aggregate_runs(curves: &[Curve]) -> Result<Summary> {
    let first = curves.first().ok_or_else(|| Error::Csv("no runs to aggregate".into()))?;
    let grid: Vec<usize> = first.iter().map(|r| r.iteration).collect();
    for c in curves {
        if c.iter().map(|r| r.iteration).ne(grid.iter().copied()) {
            return Err(Error::Csv("runs have different iteration grids".into()));
        }
    }
    let success = (0..grid.len())
        .map(|i| Band::of(&curves.iter().map(|c| c[i].success_rate).collect::<Vec<_>>()))
        .collect();
    Ok(Summary {
        episodes: first.iter().map(|r| r.episodes).collect(),
        iterations: grid,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> Curve {
        values
            .iter()
            .enumerate()
            .map(|(i, &s)| CurveRow {
                iteration: i + 1,
                episodes: 10 * (i + 1),
                success_rate: s,
                mean_matching_cost: (i > 0).then_some(0.5),
                goal_wasserstein: 0.1,
                critic_loss: 0.01,
            })
            .collect()
    }

    #[test]
    fn nearest_rank_hand_values() {
        let v = [15.0, 20.0, 35.0, 40.0, 50.0];
        assert_eq!(nearest_rank(&v, 5.0), 15.0);
        assert_eq!(nearest_rank(&v, 30.0), 20.0);
        assert_eq!(nearest_rank(&v, 40.0), 20.0);
        assert_eq!(nearest_rank(&v, 50.0), 35.0);
        assert_eq!(nearest_rank(&v, 100.0), 50.0);
        assert_eq!(nearest_rank(&v, 0.0), 15.0);
    }

    #[test]
    fn single_run_band_collapses() {
        let s = aggregate_runs(&[curve(&[0.1, 0.5, 0.9])]).unwrap();
        for (b, v) in s.success.iter().zip([0.1, 0.5, 0.9]) {
            assert_eq!((b.p20, b.median, b.p80), (v, v, v));
        }
    }

    #[test]
    fn half_zero_half_one() {
        let runs: Vec<_> = (0..10).map(|i| curve(&[if i < 5 { 0.0 } else { 1.0 }])).collect();
        let b = aggregate_runs(&runs).unwrap().success[0];
        // Ranks 2, 5 and 8 of ten.
        assert_eq!((b.p20, b.median, b.p80), (0.0, 0.0, 1.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        assert!(aggregate_runs(&[curve(&[0.0, 1.0]), curve(&[0.0])]).is_err());
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn curve_files_round_trip() {
        let c = curve(&[0.0, 0.25, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let body: String = c.iter().map(|r| r.to_csv() + "\n").collect();
        fs::write(&path, format!("{CURVE_HEADER}\n{body}")).unwrap();
        assert_eq!(read_curve(&path).unwrap(), c);
        fs::write(&path, format!("{CURVE_HEADER}\n2,1,0,,0,0\n1,1,0,,0,0\n")).unwrap();
        assert!(read_curve(&path).is_err());
        fs::write(&path, "a,b\n").unwrap();
        assert!(read_curve(&path).is_err());
    }

    proptest! {
        #[test]
        fn band_matches_sorting_oracle(values in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            // Smallest index i with (i + 1) / n >= p, computed in integers.
            let oracle = |p: usize| sorted[(0..n).find(|&i| (i + 1) * 100 >= p * n).unwrap()];
            let b = Band::of(&values);
            prop_assert_eq!(b.p20, oracle(20));
            prop_assert_eq!(b.median, oracle(50));
            prop_assert_eq!(b.p80, oracle(80));
        }
    }
}
