//! Age of information bookkeeping.
//!
//! Ages follow the reset-to-one convention: a client whose update reaches the
//! server in round `t` has age 1, otherwise its age grows by one. All clients
//! start at age 1 in round 0.

use crate::error::{Error, Result};

/// Sum of squared deviations of the ages from their mean.
pub fn age_variance(ages: &[u64]) -> f64 {
    if ages.is_empty() {
        return 0.0;
    }
    let mean = ages.iter().sum::<u64>() as f64 / ages.len() as f64;
    ages.iter().map(|&a| (a as f64 - mean).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoiLedger {
    ages: Vec<u64>,
    round: usize,
    cumulative_age_sum: u64,
    variance_trace: Vec<f64>,
}

impl AoiLedger {
    pub fn new(clients: usize) -> Self {
        Self {
            ages: vec![1; clients],
            round: 0,
            cumulative_age_sum: 0,
            variance_trace: Vec::new(),
        }
    }

    /// Advances one round. `success[i]` marks client `i` as a member of `S_t`.
    pub fn update(&mut self, success: &[bool]) {
        assert_eq!(success.len(), self.ages.len(), "success mask width");
        for (age, &ok) in self.ages.iter_mut().zip(success) {
            *age = if ok { 1 } else { *age + 1 };
        }
        self.round += 1;
        self.cumulative_age_sum += self.total_age();
        self.variance_trace.push(age_variance(&self.ages));
    }

    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn total_age(&self) -> u64 {
        self.ages.iter().sum()
    }

    /// Sum of all ages over all completed rounds.
    pub fn cumulative_age_sum(&self) -> u64 {
        self.cumulative_age_sum
    }

    /// `V_t` for every completed round.
    pub fn variance_trace(&self) -> &[f64] {
        &self.variance_trace
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.variance_trace.iter().sum()
    }
}

/// Running AoI regret against an oracle run on the same realizations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretAccumulator {
    policy_age_sums: Vec<u64>,
    oracle_age_sums: Vec<u64>,
    regret_curve: Vec<i64>,
}

impl RegretAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, policy_total: u64, oracle_total: u64) {
        let prev = self.regret_curve.last().copied().unwrap_or(0);
        self.policy_age_sums.push(policy_total);
        self.oracle_age_sums.push(oracle_total);
        self.regret_curve
            .push(prev + policy_total as i64 - oracle_total as i64);
    }

    pub fn from_totals(policy: &[u64], oracle: &[u64]) -> Result<Self> {
        if policy.len() != oracle.len() {
            return Err(Error::Dimension(format!(
                "policy trace has {} rounds, oracle trace {}",
                policy.len(),
                oracle.len()
            )));
        }
        let mut acc = Self::new();
        for (&p, &o) in policy.iter().zip(oracle) {
            acc.push(p, o);
        }
        Ok(acc)
    }

    pub fn regret_curve(&self) -> &[i64] {
        &self.regret_curve
    }

    pub fn policy_age_sums(&self) -> &[u64] {
        &self.policy_age_sums
    }

    pub fn oracle_age_sums(&self) -> &[u64] {
        &self.oracle_age_sums
    }

    pub fn final_regret(&self) -> i64 {
        self.regret_curve.last().copied().unwrap_or(0)
    }
}

/// Regret curve `R(t) = sum_{tau <= t} sum_i (a_i^pi(tau) - a_i^*(tau))` from
/// two age traces of shape rounds x clients.
pub fn aoi_regret(policy_trace: &[Vec<u64>], oracle_trace: &[Vec<u64>]) -> Result<Vec<i64>> {
    if policy_trace.len() != oracle_trace.len() {
        return Err(Error::Dimension(format!(
            "traces have {} and {} rounds",
            policy_trace.len(),
            oracle_trace.len()
        )));
    }
    let mut acc = RegretAccumulator::new();
    for (t, (p, o)) in policy_trace.iter().zip(oracle_trace).enumerate() {
        if p.len() != o.len() {
            return Err(Error::Dimension(format!(
                "round {}: {} vs {} clients",
                t + 1,
                p.len(),
                o.len()
            )));
        }
        acc.push(p.iter().sum(), o.iter().sum());
    }
    Ok(acc.regret_curve)
}

/// Long-run expected age on a channel with constant success probability `mu`,
/// counting ages from zero at a success: `(1 - mu) / mu`.
pub fn expected_aoi_stationary(mu: f64) -> Result<f64> {
    if mu == 0.0 {
        return Err(Error::DivisionByZero(
            "age diverges on a channel that never succeeds".into(),
        ));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::OutOfRange(format!("success probability {mu}")));
    }
    Ok((1.0 - mu) / mu)
}

/// Expected ages when `s` of `m` clients succeed uniformly at random each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformAoi {
    /// `m / s`
    pub per_client: f64,
    /// `m^2 / s`
    pub total: f64,
}

pub fn mean_aoi_uniform(m: usize, s: usize) -> Result<UniformAoi> {
    if s == 0 {
        return Err(Error::DivisionByZero("no client succeeds".into()));
    }
    if s > m {
        return Err(Error::OutOfRange(format!("{s} successes among {m} clients")));
    }
    let (m, s) = (m as f64, s as f64);
    Ok(UniformAoi {
        per_client: m / s,
        total: m * m / s,
    })
}
