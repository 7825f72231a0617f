//! Fairness-aware matching of clients to the scheduled channels.
//!
//! After the scheduler picks `M` channels, they are ranked (by UCB index or by
//! historical mean) and handed out in priority order: the client with the
//! `i`-th largest priority gets the `i`-th ranked channel. Priorities blend a
//! client's estimated marginal contribution with its normalised age, with the
//! blend weight growing with the spread of ages across clients.

mod contribution;
mod fairness;

pub use contribution::{
    cosine_similarity, leave_one_out, marginal_contribution, normalize_contributions,
    BufferedUpdate, ContributionState, ContributionTerms,
};
pub use fairness::{FairnessBlend, FairnessState};

use serde::{Deserialize, Serialize};

use crate::policy::{rank_by_score, Assignment, ChannelHistory, GlrCucb};

/// How scheduled channels are ordered before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// UCB index for GLR-CUCB, historical mean otherwise.
    Auto,
    Ucb,
    Mean,
}

/// Matching settings of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingParams {
    /// When false, clients keep the scheduler's own assignment and
    /// aggregation weights are uniform over successful clients.
    pub enabled: bool,
    /// Base fairness coefficient.
    pub beta: f64,
    pub mode: RankingMode,
}

impl Default for MatchingParams {
    fn default() -> Self {
        Self {
            enabled: true,
            beta: 0.5,
            mode: RankingMode::Auto,
        }
    }
}

/// Scheduled channels, best first, with the score each was ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRanking {
    pub order: Vec<usize>,
    pub scores: Vec<Option<f64>>,
}

impl ChannelRanking {
    pub fn from_scores(selected: &[usize], score: impl Fn(usize) -> Option<f64>) -> Self {
        let order = rank_by_score(selected, &score);
        let scores = order.iter().map(|&k| score(k)).collect();
        Self { order, scores }
    }
}

/// Orders `selected` by UCB index at round `t`.
pub fn rank_channels_ucb(state: &GlrCucb, selected: &[usize], t: usize) -> ChannelRanking {
    ChannelRanking::from_scores(selected, |k| Some(state.ucb(k, t)))
}

/// Orders `selected` by historical success rate; unobserved channels last.
pub fn rank_channels_mean(history: &ChannelHistory, selected: &[usize]) -> ChannelRanking {
    ChannelRanking::from_scores(selected, |k| history.mean(k))
}

/// `lambda_i = (1 - beta_t) C_i + beta_t a_i`.
pub fn priority(contributions: &[f64], normalized_ages: &[f64], beta_t: f64) -> Vec<f64> {
    assert_eq!(contributions.len(), normalized_ages.len());
    contributions
        .iter()
        .zip(normalized_ages)
        .map(|(c, a)| (1.0 - beta_t) * c + beta_t * a)
        .collect()
}

/// The client with the `i`-th highest priority receives `ranking.order[i]`.
/// Ties go to the lower client index.
pub fn match_clients(ranking: &ChannelRanking, priorities: &[f64]) -> Assignment {
    let m = priorities.len();
    assert_eq!(ranking.order.len(), m, "one channel per client");
    let mut clients: Vec<usize> = (0..m).collect();
    clients.sort_by(|&a, &b| priorities[b].total_cmp(&priorities[a]).then(a.cmp(&b)));
    let mut channel_of = vec![0; m];
    for (rank, &client) in clients.iter().enumerate() {
        channel_of[client] = ranking.order[rank];
    }
    let n = ranking.order.iter().max().map_or(0, |&k| k + 1);
    Assignment::new(channel_of, n).expect("ranking holds distinct channels")
}

/// Aggregation weights proportional to contribution, normalised over the
/// clients that succeeded this round. `None` when nobody succeeded.
pub fn aggregation_weights(contributions: &[f64], success: &[bool]) -> Option<Vec<f64>> {
    assert_eq!(contributions.len(), success.len());
    let count = success.iter().filter(|&&s| s).count();
    if count == 0 {
        return None;
    }
    let total: f64 = contributions
        .iter()
        .zip(success)
        .filter(|(_, &s)| s)
        .map(|(c, _)| c.max(0.0))
        .sum();
    Some(
        contributions
            .iter()
            .zip(success)
            .map(|(&c, &s)| match (s, total > 0.0) {
                (false, _) => 0.0,
                (true, true) => c.max(0.0) / total,
                (true, false) => 1.0 / count as f64,
            })
            .collect(),
    )
}
