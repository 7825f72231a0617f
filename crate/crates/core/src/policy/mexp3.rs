//! Exponential weights over super-arms (all `M`-subsets of the channels).

use rand::{Rng, RngCore};

use super::{check_sizes, rank_by_score, ChannelHistory, Decision, Feedback, Scheduler};
use crate::error::{Error, Result};

/// Largest super-arm set M-Exp3 will enumerate.
pub const MAX_SUPER_ARMS: u128 = 100_000;

/// Weights are kept in log space, shifted so the largest is 0. Entries are
/// floored here so every weight stays strictly positive.
const LOG_WEIGHT_FLOOR: f64 = -700.0;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn enumerate_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct MExp3 {
    n: usize,
    m: usize,
    gamma: f64,
    combos: Vec<Vec<usize>>,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    history: ChannelHistory,
}

impl MExp3 {
    pub fn new(n: usize, m: usize, gamma: f64) -> Result<Self> {
        check_sizes(n, m)?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::OutOfRange(format!("gamma {gamma} not in (0, 1]")));
        }
        let count = binomial(n, m);
        if count > MAX_SUPER_ARMS {
            return Err(Error::TooManyCombinations(count));
        }
        let combos = enumerate_combinations(n, m);
        let c = combos.len();
        Ok(Self {
            n,
            m,
            gamma,
            log_weights: vec![0.0; c],
            probs: vec![1.0 / c as f64; c],
            combos,
            history: ChannelHistory::new(n),
        })
    }

    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Weights normalised so the largest equals 1.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Probabilities computed at the last draw.
    pub fn last_probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn history(&self) -> &ChannelHistory {
        &self.history
    }

    /// `p_I = (1 - gamma) w_I / sum_J w_J + gamma / C`.
    pub fn probabilities(&self) -> Vec<f64> {
        let c = self.combos.len() as f64;
        let weights = self.weights();
        let total: f64 = weights.iter().sum();
        weights
            .iter()
            .map(|w| (1.0 - self.gamma) * w / total + self.gamma / c)
            .collect()
    }

    pub fn combo_index(&self, channels: &[usize]) -> Option<usize> {
        let mut key = channels.to_vec();
        key.sort_unstable();
        self.combos.binary_search(&key).ok()
    }

    /// Draws a super-arm; its channels are ranked by historical mean and
    /// rotated across clients.
    pub fn draw(&mut self, t: usize, rng: &mut dyn RngCore) -> Decision {
        self.probs = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut drawn = self.probs.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                drawn = i;
                break;
            }
        }
        let ranked = rank_by_score(&self.combos[drawn], |k| self.history.mean(k));
        let mut decision = Decision::ranked(ranked, t);
        decision.super_arm = Some(drawn);
        decision
    }

    /// Importance-weighted update of the super-arm that was scheduled.
    ///
    /// `rewards[i]` is the realized state of `channels[i]`.
    pub fn update(&mut self, super_arm: usize, channels: &[usize], rewards: &[bool]) {
        let probs = self.probabilities();
        let c = self.combos.len() as f64;
        let reward: f64 = rewards.iter().map(|&r| r as u8 as f64).sum();
        let estimate = reward / probs[super_arm];
        self.log_weights[super_arm] += self.gamma * estimate / c;
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        for lw in &mut self.log_weights {
            *lw = (*lw - max).max(LOG_WEIGHT_FLOOR);
        }
        for (&k, &r) in channels.iter().zip(rewards) {
            self.history.observe(k, r);
        }
        self.probs = probs;
    }
}

impl Scheduler for MExp3 {
    fn name(&self) -> String {
        "mexp3".into()
    }

    fn n_channels(&self) -> usize {
        self.n
    }

    fn clients(&self) -> usize {
        self.m
    }

    fn select(&mut self, t: usize, _ages: &[u64], rng: &mut dyn RngCore) -> Decision {
        self.draw(t, rng)
    }

    fn observe(&mut self, _t: usize, decision: &Decision, rewards: &[bool]) -> Feedback {
        let arm = decision
            .super_arm
            .or_else(|| self.combo_index(&decision.selected))
            .expect("scheduled channels form a super-arm");
        self.update(arm, &decision.selected, rewards);
        Feedback::default()
    }

    fn empirical_means(&self) -> Vec<Option<f64>> {
        self.history.means()
    }
}
