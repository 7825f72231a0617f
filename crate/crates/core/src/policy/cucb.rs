//! Combinatorial UCB with GLR change detection and full restarts.

use rand::{seq::index, RngCore};

use super::{check_sizes, glr::XLogX, rank_by_score, Decision, Feedback, GlrDetector, Scheduler};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GlrCucb {
    n: usize,
    m: usize,
    alpha: f64,
    delta: f64,
    detectors: Vec<GlrDetector>,
    last_restart: usize,
    restarts: Vec<usize>,
    table: XLogX,
}

impl GlrCucb {
    pub fn new(n: usize, m: usize, alpha: f64, delta: f64) -> Result<Self> {
        check_sizes(n, m)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::OutOfRange(format!("alpha {alpha} must be >= 0")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::OutOfRange(format!("delta {delta} not in (0, 1)")));
        }
        Ok(Self {
            n,
            m,
            alpha,
            delta,
            detectors: vec![GlrDetector::new(); n],
            last_restart: 0,
            restarts: Vec::new(),
            table: XLogX::new(),
        })
    }

    /// `alpha = 0.05 sqrt(ln T / T)`.
    pub fn default_alpha(horizon: usize) -> f64 {
        let t = horizon.max(2) as f64;
        0.05 * (t.ln() / t).sqrt()
    }

    pub fn last_restart(&self) -> usize {
        self.last_restart
    }

    /// Rounds at which the detector fired.
    pub fn restarts(&self) -> &[usize] {
        &self.restarts
    }

    pub fn pulls(&self, channel: usize) -> usize {
        self.detectors[channel].len()
    }

    pub fn detector(&self, channel: usize) -> &GlrDetector {
        &self.detectors[channel]
    }

    /// Length of the forced-exploration cycle, `max(floor(N / alpha), N + 1)`.
    pub fn exploration_cycle(&self) -> Option<usize> {
        if self.alpha <= 0.0 {
            return None;
        }
        let raw = (self.n as f64 / self.alpha).floor();
        let cycle = if raw >= usize::MAX as f64 {
            usize::MAX
        } else {
            raw as usize
        };
        Some(cycle.max(self.n + 1))
    }

    /// Channel forced into the selection at round `t`, if any.
    pub fn forced_channel(&self, t: usize) -> Option<usize> {
        let cycle = self.exploration_cycle()?;
        let i = t.saturating_sub(self.last_restart) % cycle;
        (1..=self.n).contains(&i).then(|| i - 1)
    }

    /// `mu_i + sqrt(3 ln(t - tau) / (2 D_i))`, infinite for unpulled channels.
    pub fn ucb(&self, channel: usize, t: usize) -> f64 {
        let det = &self.detectors[channel];
        match det.mean() {
            None => f64::INFINITY,
            Some(mean) => {
                let elapsed = t.saturating_sub(self.last_restart).max(1) as f64;
                mean + (3.0 * elapsed.ln() / (2.0 * det.len() as f64)).sqrt()
            }
        }
    }

    fn restart(&mut self, t: usize) {
        for det in &mut self.detectors {
            det.clear();
        }
        self.last_restart = t;
        self.restarts.push(t);
    }
}

impl Scheduler for GlrCucb {
    fn name(&self) -> String {
        "glr-cucb".into()
    }

    fn n_channels(&self) -> usize {
        self.n
    }

    fn clients(&self) -> usize {
        self.m
    }

    fn select(&mut self, t: usize, _ages: &[u64], rng: &mut dyn RngCore) -> Decision {
        let ucb: Vec<f64> = (0..self.n).map(|k| self.ucb(k, t)).collect();
        let forced = self.forced_channel(t);
        let chosen = match forced {
            Some(k) => {
                let others: Vec<usize> = (0..self.n).filter(|&c| c != k).collect();
                let mut set = vec![k];
                set.extend(index::sample(rng, others.len(), self.m - 1).iter().map(|i| others[i]));
                set
            }
            None => {
                let all: Vec<usize> = (0..self.n).collect();
                let mut ranked = rank_by_score(&all, |k| Some(ucb[k]));
                ranked.truncate(self.m);
                ranked
            }
        };
        let ranked = rank_by_score(&chosen, |k| Some(ucb[k]));
        let mut decision = Decision::ranked(ranked, t);
        decision.forced = forced.is_some();
        decision
    }

    fn observe(&mut self, t: usize, decision: &Decision, rewards: &[bool]) -> Feedback {
        for (&k, &x) in decision.selected.iter().zip(rewards) {
            self.detectors[k].push(x);
        }
        for &k in &decision.selected {
            if self.detectors[k].detects(self.delta, &mut self.table) {
                self.restart(t);
                return Feedback { restart: true };
            }
        }
        Feedback::default()
    }

    fn empirical_means(&self) -> Vec<Option<f64>> {
        self.detectors.iter().map(GlrDetector::mean).collect()
    }

    fn ucb_values(&self, t: usize) -> Option<Vec<f64>> {
        Some((0..self.n).map(|k| self.ucb(k, t)).collect())
    }
}
