//! Channel-scheduling policies.
//!
//! Every policy picks `M` distinct channels out of `N` each round and assigns
//! them one-to-one to the `M` clients. Policies only ever see the realized
//! states of the channels they scheduled.

mod aware;
mod baseline;
mod cucb;
mod glr;
mod mexp3;

pub use aware::{AaConfig, AoiAware};
pub use baseline::{oracle_select, random_select, OracleScheduler, RandomScheduler};
pub use cucb::GlrCucb;
pub use glr::{glr_threshold, kl_bernoulli, GlrDetector, XLogX, KL_CLAMP};
pub use mexp3::{binomial, enumerate_combinations, MExp3, MAX_SUPER_ARMS};

use rand::RngCore;

use crate::error::{Error, Result};

/// Injective client-to-channel map: `channel_of[j]` is the channel of client `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    channel_of: Vec<usize>,
}

impl Assignment {
    pub fn new(channel_of: Vec<usize>, n_channels: usize) -> Result<Self> {
        let mut seen = vec![false; n_channels];
        for &k in &channel_of {
            if k >= n_channels {
                return Err(Error::OutOfRange(format!("channel {k} of {n_channels}")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Dimension(format!("channel {k} assigned twice")));
            }
        }
        Ok(Self { channel_of })
    }

    /// Client `j` receives the `((j + t) mod M)`-th entry of `ranked` (best first).
    pub fn rotation(ranked: &[usize], t: usize) -> Self {
        let m = ranked.len();
        Self {
            channel_of: (0..m).map(|j| ranked[(j + t) % m]).collect(),
        }
    }

    pub fn channel_of(&self) -> &[usize] {
        &self.channel_of
    }

    pub fn clients(&self) -> usize {
        self.channel_of.len()
    }

    /// The `beta_{i,k}` indicator matrix (clients x channels).
    pub fn indicator(&self, n_channels: usize) -> Vec<Vec<u8>> {
        self.channel_of
            .iter()
            .map(|&k| {
                let mut row = vec![0u8; n_channels];
                row[k] = 1;
                row
            })
            .collect()
    }

    /// Checks that every client has exactly one channel and every channel at
    /// most one client.
    pub fn is_valid(&self, n_channels: usize) -> bool {
        let beta = self.indicator(n_channels);
        let rows_ok = beta.iter().all(|row| row.iter().map(|&b| b as u32).sum::<u32>() == 1);
        let cols_ok = (0..n_channels)
            .all(|k| beta.iter().map(|row| row[k] as u32).sum::<u32>() <= 1);
        rows_ok && cols_ok
    }
}

/// One round's scheduling decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Scheduled channels, best-ranked first.
    pub selected: Vec<usize>,
    pub assignment: Assignment,
    /// Index of the drawn super-arm (M-Exp3 only).
    pub super_arm: Option<usize>,
    /// Set when the AoI-aware wrapper bypassed the base policy.
    pub exploited: bool,
    /// Set when GLR-CUCB took its forced-exploration branch.
    pub forced: bool,
}

impl Decision {
    pub(crate) fn ranked(selected: Vec<usize>, t: usize) -> Self {
        let assignment = Assignment::rotation(&selected, t);
        Self {
            selected,
            assignment,
            super_arm: None,
            exploited: false,
            forced: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Feedback {
    /// The change detector fired and the learner restarted.
    pub restart: bool,
}

pub trait Scheduler: Send {
    fn name(&self) -> String;

    fn n_channels(&self) -> usize;

    fn clients(&self) -> usize;

    /// Chooses channels for round `t` given the clients' current ages.
    fn select(&mut self, t: usize, ages: &[u64], rng: &mut dyn RngCore) -> Decision;

    /// Feeds back the realized states of `decision.selected`, in that order.
    fn observe(&mut self, t: usize, decision: &Decision, rewards: &[bool]) -> Feedback;

    /// Per-channel success-rate estimates; `None` for channels without data.
    fn empirical_means(&self) -> Vec<Option<f64>>;

    /// UCB indices at round `t`, for policies that maintain them.
    fn ucb_values(&self, _t: usize) -> Option<Vec<f64>> {
        None
    }
}

/// All-time per-channel success counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelHistory {
    successes: Vec<u64>,
    pulls: Vec<u64>,
}

impl ChannelHistory {
    pub fn new(n_channels: usize) -> Self {
        Self {
            successes: vec![0; n_channels],
            pulls: vec![0; n_channels],
        }
    }

    pub fn observe(&mut self, channel: usize, reward: bool) {
        self.pulls[channel] += 1;
        self.successes[channel] += reward as u64;
    }

    pub fn pulls(&self, channel: usize) -> u64 {
        self.pulls[channel]
    }

    pub fn mean(&self, channel: usize) -> Option<f64> {
        match self.pulls[channel] {
            0 => None,
            d => Some(self.successes[channel] as f64 / d as f64),
        }
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        (0..self.pulls.len()).map(|k| self.mean(k)).collect()
    }
}

/// Orders `candidates` by descending score, lower index first on ties.
/// `None` scores rank after every scored channel.
pub fn rank_by_score(candidates: &[usize], score: impl Fn(usize) -> Option<f64>) -> Vec<usize> {
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|&a, &b| match (score(a), score(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    ranked
}

/// The `m` best channels by score, best first.
pub fn top_m(scores: &[Option<f64>], m: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..scores.len()).collect();
    let mut ranked = rank_by_score(&all, |k| scores[k]);
    ranked.truncate(m);
    ranked
}

pub(crate) fn check_sizes(n_channels: usize, clients: usize) -> Result<()> {
    if clients == 0 || n_channels < clients {
        return Err(Error::TooFewChannels {
            channels: n_channels,
            clients,
        });
    }
    Ok(())
}
