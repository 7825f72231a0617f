//! Channel processes.
//!
//! Rounds are 1-based throughout (`1..=horizon`). Channel and client indices
//! are 0-based.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Stationary,
    PiecewiseStationary,
    Adversarial,
}

/// A stationary stretch of rounds starting at `start_round`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_round: usize,
    pub means: Vec<f64>,
}

/// Channel states for one round; `true` is Good.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRealization {
    pub round: usize,
    pub states: Vec<bool>,
}

/// Anything that can produce per-round channel states.
///
/// Learning policies never hold one of these; only the simulation driver and
/// the oracle policy do.
pub trait ChannelProcess: Sync {
    fn n_channels(&self) -> usize;
    fn horizon(&self) -> usize;
    fn sample_round(&self, t: usize, rng: &mut dyn RngCore) -> Result<ChannelRealization>;
    fn true_means(&self, t: usize) -> Result<Vec<f64>>;
}

/// Immutable channel environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnvironment {
    n_channels: usize,
    kind: ChannelKind,
    segments: Vec<Segment>,
    /// Row per channel, column per round.
    adversarial_states: Option<Vec<Vec<u8>>>,
    horizon: usize,
}

fn check_means(means: &[f64], n_channels: usize, what: &str) -> Result<()> {
    if means.len() != n_channels {
        return Err(Error::Dimension(format!(
            "{what}: expected {n_channels} means, got {}",
            means.len()
        )));
    }
    if let Some(bad) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::OutOfRange(format!("{what}: mean {bad} not in [0, 1]")));
    }
    Ok(())
}

impl ChannelEnvironment {
    pub fn stationary(means: Vec<f64>, horizon: usize) -> Result<Self> {
        let n = means.len();
        Self::piecewise(n, horizon, &[], vec![means])
    }

    /// Piecewise-constant means switching at each breakpoint round.
    ///
    /// With no breakpoints this is a stationary environment.
    pub fn piecewise(
        n_channels: usize,
        horizon: usize,
        breakpoints: &[usize],
        per_segment_means: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::OutOfRange("need at least one channel".into()));
        }
        if horizon == 0 {
            return Err(Error::OutOfRange("horizon must be at least 1".into()));
        }
        let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
        let in_range = breakpoints.iter().all(|&b| b > 1 && b <= horizon);
        if !increasing || !in_range {
            return Err(Error::Breakpoints(breakpoints.to_vec()));
        }
        if per_segment_means.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} breakpoints need {} mean vectors, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                per_segment_means.len()
            )));
        }
        let starts = std::iter::once(1).chain(breakpoints.iter().copied());
        let mut segments = Vec::with_capacity(per_segment_means.len());
        for (i, (start_round, means)) in starts.zip(per_segment_means).enumerate() {
            check_means(&means, n_channels, &format!("segment {i}"))?;
            segments.push(Segment { start_round, means });
        }
        let kind = if breakpoints.is_empty() {
            ChannelKind::Stationary
        } else {
            ChannelKind::PiecewiseStationary
        };
        Ok(Self {
            n_channels,
            kind,
            segments,
            adversarial_states: None,
            horizon,
        })
    }

    /// Replays a fixed state matrix (rows = channels, columns = rounds).
    pub fn adversarial(state_matrix: Vec<Vec<u8>>) -> Result<Self> {
        let n_channels = state_matrix.len();
        if n_channels == 0 {
            return Err(Error::OutOfRange("state matrix has no rows".into()));
        }
        let horizon = state_matrix[0].len();
        if horizon == 0 {
            return Err(Error::OutOfRange("state matrix has no columns".into()));
        }
        for (k, row) in state_matrix.iter().enumerate() {
            if row.len() != horizon {
                return Err(Error::Dimension(format!(
                    "row {k} has {} columns, expected {horizon}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v > 1) {
                return Err(Error::OutOfRange(format!("row {k}: non-binary entry {v}")));
            }
        }
        Ok(Self {
            n_channels,
            kind: ChannelKind::Adversarial,
            segments: Vec::new(),
            adversarial_states: Some(state_matrix),
            horizon,
        })
    }

    /// Loads an adversarial matrix from a CSV of 0/1 rows, one row per channel.
    pub fn load_state_matrix_csv(path: &Path) -> Result<Vec<Vec<u8>>> {
        let csv_err = |reason: String| Error::Csv {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => csv_err(format!("{other:?}")),
            })?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|cell| match cell {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(csv_err(format!("line {line}: non-binary cell {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Number of breakpoints (segments minus one); zero for adversarial kinds.
    pub fn breakpoint_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn adversarial_states(&self) -> Option<&[Vec<u8>]> {
        self.adversarial_states.as_deref()
    }

    fn check_round(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::RoundOutOfRange {
                round: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn active_segment(&self, t: usize) -> &Segment {
        let idx = self.segments.partition_point(|s| s.start_round <= t);
        &self.segments[idx - 1]
    }
}

impl ChannelProcess for ChannelEnvironment {
    fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    /// Draws one Bernoulli state per channel, channels in index order.
    /// Adversarial environments consume no randomness.
    fn sample_round(&self, t: usize, rng: &mut dyn RngCore) -> Result<ChannelRealization> {
        self.check_round(t)?;
        let states = match &self.adversarial_states {
            Some(matrix) => matrix.iter().map(|row| row[t - 1] == 1).collect(),
            None => self
                .active_segment(t)
                .means
                .iter()
                .map(|&mu| rng.random::<f64>() < mu)
                .collect(),
        };
        Ok(ChannelRealization { round: t, states })
    }

    fn true_means(&self, t: usize) -> Result<Vec<f64>> {
        self.check_round(t)?;
        Ok(match &self.adversarial_states {
            Some(matrix) => matrix.iter().map(|row| row[t - 1] as f64).collect(),
            None => self.active_segment(t).means.clone(),
        })
    }
}

/// Reproducible adversarial state sequence: each channel starts Good or Bad
/// uniformly at random and flips each round with `flip_probability`.
pub fn gen_adversarial_flips(
    n_channels: usize,
    horizon: usize,
    flip_probability: f64,
    seed: u64,
) -> Result<Vec<Vec<u8>>> {
    if !(0.0..=1.0).contains(&flip_probability) {
        return Err(Error::OutOfRange(format!(
            "flip probability {flip_probability} not in [0, 1]"
        )));
    }
    if n_channels == 0 || horizon == 0 {
        return Err(Error::OutOfRange("need at least one channel and one round".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = (0..n_channels)
        .map(|_| {
            let mut state = rng.random_bool(0.5) as u8;
            let mut row = Vec::with_capacity(horizon);
            row.push(state);
            for _ in 1..horizon {
                if rng.random_bool(flip_probability) {
                    state ^= 1;
                }
                row.push(state);
            }
            row
        })
        .collect();
    Ok(matrix)
}

/// Pre-draws all realizations `1..=horizon` from one stream, so that a policy
/// run and its oracle run see identical channel states.
pub fn realize_all<E: ChannelProcess + ?Sized>(
    env: &E,
    rng: &mut dyn RngCore,
) -> Result<Vec<ChannelRealization>> {
    (1..=env.horizon()).map(|t| env.sample_round(t, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn two_segment() -> ChannelEnvironment {
        ChannelEnvironment::piecewise(2, 200_000, &[100_001], vec![vec![0.2, 0.9], vec![0.8, 0.1]])
            .unwrap()
    }

    #[test]
    fn zero_breakpoints_is_stationary() {
        let env = ChannelEnvironment::piecewise(2, 100, &[], vec![vec![0.9, 0.1]]).unwrap();
        assert_eq!(env.kind(), ChannelKind::Stationary);
        assert_eq!(env.breakpoint_count(), 0);
        assert_eq!(env.true_means(1).unwrap(), env.true_means(100).unwrap());
    }

    #[test]
    fn five_breakpoints_over_twenty_thousand_rounds() {
        let bps = [3334, 6668, 10001, 13334, 16668];
        let means = vec![vec![0.5; 5]; 6];
        let env = ChannelEnvironment::piecewise(5, 20_000, &bps, means).unwrap();
        assert_eq!(env.breakpoint_count(), 5);
        assert_eq!(env.kind(), ChannelKind::PiecewiseStationary);
    }

    #[test]
    fn rejects_bad_breakpoints_and_means() {
        let r = ChannelEnvironment::piecewise(1, 20, &[10, 5], vec![vec![0.1]; 3]);
        assert!(matches!(r, Err(Error::Breakpoints(_))));
        let r = ChannelEnvironment::piecewise(1, 20, &[1], vec![vec![0.1]; 2]);
        assert!(matches!(r, Err(Error::Breakpoints(_))));
        let r = ChannelEnvironment::piecewise(1, 20, &[21], vec![vec![0.1]; 2]);
        assert!(matches!(r, Err(Error::Breakpoints(_))));
        let r = ChannelEnvironment::piecewise(2, 20, &[], vec![vec![0.1]]);
        assert!(matches!(r, Err(Error::Dimension(_))));
        let r = ChannelEnvironment::piecewise(1, 20, &[], vec![vec![1.5]]);
        assert!(matches!(r, Err(Error::OutOfRange(_))));
        let r = ChannelEnvironment::piecewise(1, 20, &[5], vec![vec![0.5]]);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn true_means_switch_at_breakpoint() {
        let env = two_segment();
        assert_eq!(env.true_means(100_000).unwrap(), vec![0.2, 0.9]);
        assert_eq!(env.true_means(100_001).unwrap(), vec![0.8, 0.1]);
        assert!(matches!(env.true_means(0), Err(Error::RoundOutOfRange { .. })));
        assert!(env.true_means(200_001).is_err());
    }

    #[test]
    fn saturated_channels() {
        let env = ChannelEnvironment::stationary(vec![1.0, 0.0], 50).unwrap();
        let mut rng = stream(3, Stream::Channel);
        for t in 1..=50 {
            let r = env.sample_round(t, &mut rng).unwrap();
            assert_eq!(r.states, vec![true, false]);
            assert_eq!(r.round, t);
        }
    }

    #[test]
    fn half_mean_frequency() {
        let env = ChannelEnvironment::stationary(vec![0.5], 100_000).unwrap();
        let mut rng = stream(11, Stream::Channel);
        let hits = (1..=100_000)
            .filter(|&t| env.sample_round(t, &mut rng).unwrap().states[0])
            .count();
        assert!((hits as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn frequency_on_each_side_of_breakpoint() {
        let env = two_segment();
        let mut rng = stream(5, Stream::Channel);
        let trace = realize_all(&env, &mut rng).unwrap();
        let freq = |range: std::ops::Range<usize>, k: usize| {
            let w = range.len() as f64;
            trace[range].iter().filter(|r| r.states[k]).count() as f64 / w
        };
        let w = 100_000.0f64;
        for (k, (before, after)) in [(0, (0.2, 0.8)), (1, (0.9, 0.1))] {
            let tol = |mu: f64| 3.0 * (mu * (1.0 - mu) / w).sqrt();
            assert!((freq(0..100_000, k) - before).abs() <= tol(before));
            assert!((freq(100_000..200_000, k) - after).abs() <= tol(after));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let env = two_segment();
        let a = realize_all(&env, &mut stream(9, Stream::Channel)).unwrap();
        let b = realize_all(&env, &mut stream(9, Stream::Channel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adversarial_replay() {
        let ones = ChannelEnvironment::adversarial(vec![vec![1; 30]; 3]).unwrap();
        let zeros = ChannelEnvironment::adversarial(vec![vec![0; 30]; 3]).unwrap();
        let mut rng = stream(0, Stream::Channel);
        for t in 1..=30 {
            assert!(ones.sample_round(t, &mut rng).unwrap().states.iter().all(|&s| s));
            assert!(zeros.sample_round(t, &mut rng).unwrap().states.iter().all(|&s| !s));
        }
        let m = gen_adversarial_flips(4, 200, 0.1, 7).unwrap();
        let a = ChannelEnvironment::adversarial(m.clone()).unwrap();
        let b = ChannelEnvironment::adversarial(gen_adversarial_flips(4, 200, 0.1, 7).unwrap())
            .unwrap();
        assert_eq!(a, b);
        for t in [1, 57, 200] {
            let col: Vec<f64> = m.iter().map(|row| row[t - 1] as f64).collect();
            assert_eq!(a.true_means(t).unwrap(), col);
        }
        assert!(ChannelEnvironment::adversarial(vec![vec![0, 2]]).is_err());
        assert!(ChannelEnvironment::adversarial(vec![vec![0, 1], vec![1]]).is_err());
    }

    #[test]
    fn flip_generator_extremes() {
        for row in gen_adversarial_flips(3, 100, 0.0, 1).unwrap() {
            assert!(row.iter().all(|&v| v == row[0]));
        }
        for row in gen_adversarial_flips(3, 100, 1.0, 1).unwrap() {
            assert!(row.windows(2).all(|w| w[0] != w[1]));
        }
        assert!(gen_adversarial_flips(3, 100, 1.5, 1).is_err());
    }

    #[test]
    fn flip_rate_matches_probability() {
        let m = gen_adversarial_flips(3, 1000, 0.01, 42).unwrap();
        for row in m {
            let flips = row.windows(2).filter(|w| w[0] != w[1]).count();
            let rate = flips as f64 / 999.0;
            assert!((0.005..=0.02).contains(&rate), "rate {rate}");
        }
    }

    #[test]
    fn csv_matrix_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "# states\n1,0,1\n0,0,1\n").unwrap();
        let m = ChannelEnvironment::load_state_matrix_csv(&path).unwrap();
        assert_eq!(m, vec![vec![1, 0, 1], vec![0, 0, 1]]);
        std::fs::write(&path, "1,0,x\n").unwrap();
        assert!(ChannelEnvironment::load_state_matrix_csv(&path).is_err());
    }
}
