//! Post-hoc coordination analysis.
//!
//! Instantaneous coordination between agents `i` and `j` is the mutual
//! information between `i`'s heading at step `t` and `j`'s heading at `t+1`,
//! estimated with the plug-in estimator on a uniform heading histogram and
//! reported in bits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{displacement, normalize_angle, Point2};

pub const DEFAULT_HEADING_BINS: usize = 16;

/// Pointwise values within this margin of the mean count as equal to it.
const PMI_EQUALITY_MARGIN: f64 = 1e-12;

/// Bin of a heading among `bins` uniform bins over `[-π, π)`.
pub fn discretize_heading(theta: f64, bins: usize) -> Result<usize> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite heading {theta}")));
    }
    let width = 2.0 * PI / bins as f64;
    let b = ((normalize_angle(theta) + PI) / width).floor();
    Ok((b.max(0.0) as usize).min(bins - 1))
}

/// Joint counts of `(bin(a_i^t), bin(a_j^{t+1}))`; rows index `a_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHistogram {
    pub bins: usize,
    pub joint_counts: Vec<u64>,
    pub total: u64,
}

impl ActionHistogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Self {
            bins,
            joint_counts: vec![0; bins * bins],
            total: 0,
        })
    }

    /// Builds a histogram directly from a `bins × bins` count table.
    pub fn from_counts(bins: usize, counts: Vec<u64>) -> Result<Self> {
        let mut h = Self::new(bins)?;
        if counts.len() != bins * bins {
            return Err(Error::DimensionMismatch {
                expected: bins * bins,
                got: counts.len(),
            });
        }
        h.total = counts.iter().sum();
        h.joint_counts = counts;
        Ok(h)
    }

    pub fn add(&mut self, row: usize, col: usize) {
        self.joint_counts[row * self.bins + col] += 1;
        self.total += 1;
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.joint_counts[row * self.bins + col]
    }

    pub fn row_marginals(&self) -> Vec<u64> {
        self.joint_counts
            .chunks_exact(self.bins)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginals(&self) -> Vec<u64> {
        let mut m = vec![0; self.bins];
        for r in self.joint_counts.chunks_exact(self.bins) {
            for (acc, c) in m.iter_mut().zip(r) {
                *acc += c;
            }
        }
        m
    }

    pub fn transposed(&self) -> Self {
        let b = self.bins;
        let mut t = vec![0; b * b];
        for r in 0..b {
            for c in 0..b {
                t[c * b + r] = self.joint_counts[r * b + c];
            }
        }
        Self {
            bins: b,
            joint_counts: t,
            total: self.total,
        }
    }

    /// `log2(p(a, b) / (p(a) p(b)))` for an observed cell.
    pub fn pointwise(&self, row: usize, col: usize) -> Option<f64> {
        let joint = self.count(row, col);
        if joint == 0 {
            return None;
        }
        let rm = self.row_marginals()[row] as f64;
        let cm = self.col_marginals()[col] as f64;
        Some(pmi(joint as f64, rm, cm, self.total as f64))
    }

    /// Plug-in mutual information in bits, with `0·log 0 = 0`.
    pub fn mutual_information(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyInput("histogram has no samples".into()));
        }
        let n = self.total as f64;
        let rows = self.row_marginals();
        let cols = self.col_marginals();
        let mut mi = 0.0;
        for (r, &rm) in rows.iter().enumerate() {
            for (c, &cm) in cols.iter().enumerate() {
                let joint = self.count(r, c);
                if joint > 0 {
                    mi += joint as f64 / n * pmi(joint as f64, rm as f64, cm as f64, n);
                }
            }
        }
        // Rounding can leave a tiny negative value for independent tables.
        Ok(mi.max(0.0))
    }
}

fn pmi(joint: f64, row: f64, col: f64, n: f64) -> f64 {
    (joint * n / (row * col)).log2()
}

/// Headings chosen by every agent over one trajectory: `headings[t][agent]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionLog {
    pub headings: Vec<Vec<f64>>,
}

fn pair_bins(logs: &[ActionLog], i: usize, j: usize, bins: usize) -> Result<Vec<(usize, usize)>> {
    if i == j {
        return Err(Error::InvalidArgument("coordination needs two distinct agents".into()));
    }
    let mut pairs = Vec::new();
    for log in logs {
        for w in log.headings.windows(2) {
            let a = *w[0].get(i).ok_or(Error::IndexOutOfRange { index: i, len: w[0].len() })?;
            let b = *w[1].get(j).ok_or(Error::IndexOutOfRange { index: j, len: w[1].len() })?;
            pairs.push((discretize_heading(a, bins)?, discretize_heading(b, bins)?));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no (t, t+1) step pairs in the logs".into()));
    }
    Ok(pairs)
}

/// Pooled histogram of `(a_i^t, a_j^{t+1})` over all trajectories.
pub fn coordination_histogram(
    logs: &[ActionLog],
    i: usize,
    j: usize,
    bins: usize,
) -> Result<ActionHistogram> {
    let mut h = ActionHistogram::new(bins)?;
    for (a, b) in pair_bins(logs, i, j, bins)? {
        h.add(a, b);
    }
    Ok(h)
}

/// Instantaneous coordination `I(a_i^t; a_j^{t+1})` in bits.
pub fn instantaneous_coordination(logs: &[ActionLog], i: usize, j: usize, bins: usize) -> Result<f64> {
    coordination_histogram(logs, i, j, bins)?.mutual_information()
}

/// Pointwise mutual information of every step pair, in log order.
pub fn pointwise_coordination(logs: &[ActionLog], i: usize, j: usize, bins: usize) -> Result<Vec<f64>> {
    let pairs = pair_bins(logs, i, j, bins)?;
    let mut h = ActionHistogram::new(bins)?;
    for &(a, b) in &pairs {
        h.add(a, b);
    }
    let rows = h.row_marginals();
    let cols = h.col_marginals();
    let n = h.total as f64;
    Ok(pairs
        .into_iter()
        .map(|(a, b)| pmi(h.count(a, b) as f64, rows[a] as f64, cols[b] as f64, n))
        .collect())
}

/// Fraction of step pairs whose pointwise influence exceeds the mean.
pub fn high_influence_fraction_of(pointwise: &[f64], mean: f64) -> Result<f64> {
    if pointwise.is_empty() {
        return Err(Error::EmptyInput("no pointwise values".into()));
    }
    let above = pointwise
        .iter()
        .filter(|&&v| v - mean > PMI_EQUALITY_MARGIN)
        .count();
    Ok(above as f64 / pointwise.len() as f64)
}

pub fn high_influence_fraction(logs: &[ActionLog], i: usize, j: usize, bins: usize) -> Result<f64> {
    let pw = pointwise_coordination(logs, i, j, bins)?;
    let mi = instantaneous_coordination(logs, i, j, bins)?;
    high_influence_fraction_of(&pw, mi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoordination {
    pub from: usize,
    pub to: usize,
    pub mi_bits: f64,
    pub high_influence_fraction: f64,
    pub samples: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pointwise_bits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub bins: usize,
    /// Ordered pairs `(i → j)` for every `i ≠ j`.
    pub pairs: Vec<PairCoordination>,
    /// Average over ordered pairs.
    pub mean_mi_bits: f64,
    pub mean_high_influence_fraction: f64,
    /// How per-step influence is defined; pointwise mutual information
    /// against the pooled histogram.
    pub pointwise_measure: String,
}

/// Coordination for every ordered agent pair.
pub fn ic_report(logs: &[ActionLog], n_agents: usize, bins: usize, keep_pointwise: bool) -> Result<IcReport> {
    if n_agents < 2 {
        return Err(Error::InvalidArgument("coordination needs at least two agents".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..n_agents {
        for j in 0..n_agents {
            if i == j {
                continue;
            }
            let h = coordination_histogram(logs, i, j, bins)?;
            let mi = h.mutual_information()?;
            let pw = pointwise_coordination(logs, i, j, bins)?;
            pairs.push(PairCoordination {
                from: i,
                to: j,
                mi_bits: mi,
                high_influence_fraction: high_influence_fraction_of(&pw, mi)?,
                samples: h.total,
                pointwise_bits: if keep_pointwise { pw } else { Vec::new() },
            });
        }
    }
    let k = pairs.len() as f64;
    Ok(IcReport {
        bins,
        mean_mi_bits: pairs.iter().map(|p| p.mi_bits).sum::<f64>() / k,
        mean_high_influence_fraction: pairs.iter().map(|p| p.high_influence_fraction).sum::<f64>()
            / k,
        pairs,
        pointwise_measure: "pmi_vs_pooled_histogram".into(),
    })
}

/// Agent positions at the capture step of one successful trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSnapshot {
    pub pursuers: Vec<Point2>,
    pub evader: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureAngleHistogram {
    pub bins: usize,
    /// `counts[pursuer][bin]` over `[0, 2π)`.
    pub counts: Vec<Vec<u64>>,
    pub circular_mean: Vec<f64>,
    pub circular_variance: Vec<f64>,
    pub captures: usize,
}

/// Bearing from evader to pursuer in `[0, 2π)`.
pub fn capture_bearing(evader: Point2, pursuer: Point2) -> f64 {
    let b = displacement(evader, pursuer).bearing();
    let t = b.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Per-pursuer distribution of bearings at capture. Returns `None` when there
/// are no captures to analyze.
pub fn capture_angle_histogram(
    captures: &[CaptureSnapshot],
    bins: usize,
) -> Result<Option<CaptureAngleHistogram>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one angle bin".into()));
    }
    let Some(first) = captures.first() else {
        return Ok(None);
    };
    let n = first.pursuers.len();
    let width = 2.0 * PI / bins as f64;
    let mut counts = vec![vec![0u64; bins]; n];
    let mut sums = vec![(0.0f64, 0.0f64); n];
    for snap in captures {
        if snap.pursuers.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: snap.pursuers.len(),
            });
        }
        for (k, &p) in snap.pursuers.iter().enumerate() {
            let angle = capture_bearing(snap.evader, p);
            let b = ((angle / width).floor() as usize).min(bins - 1);
            counts[k][b] += 1;
            sums[k].0 += angle.cos();
            sums[k].1 += angle.sin();
        }
    }
    let m = captures.len() as f64;
    let circular_mean = sums
        .iter()
        .map(|&(c, s)| s.atan2(c).rem_euclid(2.0 * PI))
        .collect();
    let circular_variance = sums
        .iter()
        .map(|&(c, s)| (1.0 - (c / m).hypot(s / m)).max(0.0))
        .collect();
    Ok(Some(CaptureAngleHistogram {
        bins,
        counts,
        circular_mean,
        circular_variance,
        captures: captures.len(),
    }))
}

/// Fraction of episodes that ended in capture.
pub fn capture_success_rate(captured: &[bool]) -> Result<f64> {
    if captured.is_empty() {
        return Err(Error::EmptyInput("no episodes".into()));
    }
    Ok(captured.iter().filter(|&&c| c).count() as f64 / captured.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin_center(b: usize, bins: usize) -> f64 {
        -PI + (b as f64 + 0.5) * 2.0 * PI / bins as f64
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize_heading(-PI, 16).unwrap(), 0);
        assert_eq!(discretize_heading(0.0, 16).unwrap(), 8);
        assert_eq!(discretize_heading(PI - 1e-12, 16).unwrap(), 15);
        assert_eq!(discretize_heading(f64::from_bits(PI.to_bits() - 1), 16).unwrap(), 15);
        assert!(discretize_heading(0.0, 1).is_err());
        assert!(discretize_heading(f64::NAN, 16).is_err());
    }

    #[test]
    fn copycat_gives_log2_bins() {
        // Agent 1 repeats agent 0's previous heading; agent 0 cycles bins.
        let bins = 16;
        let steps = 16 * 100 + 1;
        let headings: Vec<Vec<f64>> = (0..steps)
            .map(|t| {
                let own = bin_center(t % bins, bins);
                let copy = if t == 0 { 0.0 } else { bin_center((t - 1) % bins, bins) };
                vec![own, copy]
            })
            .collect();
        let logs = [ActionLog { headings }];
        let mi = instantaneous_coordination(&logs, 0, 1, bins).unwrap();
        assert!((mi - 4.0).abs() < 1e-12, "{mi}");
        assert_eq!(high_influence_fraction(&logs, 0, 1, bins).unwrap(), 0.0);
    }

    #[test]
    fn independent_table_gives_zero() {
        // Product of marginals (0.25, 0.75) × (0.5, 0.5).
        let h = ActionHistogram::from_counts(2, vec![10, 10, 30, 30]).unwrap();
        assert!(h.mutual_information().unwrap().abs() < 1e-15);
    }

    #[test]
    fn hand_table_matches_direct_summation() {
        let h = ActionHistogram::from_counts(2, vec![40, 10, 10, 40]).unwrap();
        // p(a,b) ∈ {0.4, 0.1}, all marginals 0.5.
        let direct = 2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2();
        assert!((h.mutual_information().unwrap() - direct).abs() < 1e-12);
        assert_eq!(h.row_marginals(), vec![50, 50]);
        assert_eq!(h.col_marginals(), vec![50, 50]);
    }

    #[test]
    fn hand_table_high_influence_by_enumeration() {
        // Log realizing counts {(0,0):40, (0,1):10, (1,0):10, (1,1):40} with
        // bins 0 and 1 of a 2-bin histogram.
        let lo = -PI / 2.0;
        let hi = PI / 2.0;
        let mut headings = vec![vec![lo, lo]];
        let mut seq = Vec::new();
        seq.extend(std::iter::repeat_n((lo, lo), 40));
        seq.extend(std::iter::repeat_n((lo, hi), 10));
        seq.extend(std::iter::repeat_n((hi, lo), 10));
        seq.extend(std::iter::repeat_n((hi, hi), 40));
        // Step t carries a_0 = seq[t].0; step t+1 carries a_1 = seq[t].1.
        headings[0][0] = seq[0].0;
        for (k, &(a0_now, a1_next)) in seq.iter().enumerate() {
            headings[k][0] = a0_now;
            headings.push(vec![0.0, a1_next]);
        }
        let logs = [ActionLog { headings }];
        let h = coordination_histogram(&logs, 0, 1, 2).unwrap();
        assert_eq!(h.joint_counts, vec![40, 10, 10, 40]);
        // Diagonal cells have PMI log2(1.6) > MI, off-diagonal log2(0.4) < MI.
        assert!((high_influence_fraction(&logs, 0, 1, 2).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn transpose_symmetry() {
        let h = ActionHistogram::from_counts(3, vec![5, 1, 0, 2, 9, 3, 0, 4, 7]).unwrap();
        let a = h.mutual_information().unwrap();
        let b = h.transposed().mutual_information().unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a >= 0.0 && a <= 3f64.log2());
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            instantaneous_coordination(&[], 0, 1, 16),
            Err(Error::EmptyInput(_))
        ));
        let one = [ActionLog { headings: vec![vec![0.0, 0.0]] }];
        assert!(instantaneous_coordination(&one, 0, 1, 16).is_err());
        assert!(instantaneous_coordination(&one, 0, 0, 16).is_err());
        assert!(ActionHistogram::new(4).unwrap().mutual_information().is_err());
        assert!(capture_success_rate(&[]).is_err());
    }

    #[test]
    fn success_rate() {
        assert_eq!(capture_success_rate(&[true; 5]).unwrap(), 1.0);
        assert_eq!(capture_success_rate(&[false; 5]).unwrap(), 0.0);
        let v: Vec<bool> = (0..100).map(|i| i < 73).collect();
        assert_eq!(capture_success_rate(&v).unwrap(), 0.73);
    }

    fn snap(evader: (f64, f64), ps: &[(f64, f64)]) -> CaptureSnapshot {
        CaptureSnapshot {
            pursuers: ps.iter().map(|&(x, y)| Point2::new(x, y).unwrap()).collect(),
            evader: Point2::new(evader.0, evader.1).unwrap(),
        }
    }

    #[test]
    fn capture_angles_due_east() {
        let caps: Vec<_> = (0..10).map(|_| snap((0.5, 0.5), &[(0.53, 0.5)])).collect();
        let h = capture_angle_histogram(&caps, 16).unwrap().unwrap();
        assert_eq!(h.counts[0][0], 10);
        assert_eq!(h.counts[0].iter().sum::<u64>(), 10);
        assert!(h.circular_variance[0].abs() < 1e-12);
        assert!(h.circular_mean[0].abs() < 1e-12);
        assert!(capture_angle_histogram(&[], 16).unwrap().is_none());
    }

    #[test]
    fn capture_angle_accounting() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let caps: Vec<_> = (0..100)
            .map(|_| {
                let ps: Vec<(f64, f64)> = (0..3).map(|_| (rng.random(), rng.random())).collect();
                snap((rng.random(), rng.random()), &ps)
            })
            .collect();
        let h = capture_angle_histogram(&caps, 12).unwrap().unwrap();
        assert_eq!(h.captures, 100);
        for c in &h.counts {
            assert_eq!(c.iter().sum::<u64>(), 100);
        }
    }

    #[test]
    fn capture_angles_wrap_across_boundary() {
        // Pursuer across the left edge is west of the evader: bearing π.
        let h = capture_angle_histogram(&[snap((0.01, 0.5), &[(0.98, 0.5)])], 4)
            .unwrap()
            .unwrap();
        assert_eq!(h.counts[0], vec![0, 0, 1, 0]);
    }
}
