use rand::RngCore;

use super::{check_sizes, top_m, Assignment, Decision, Feedback, Scheduler};
use crate::env::ChannelProcess;
use crate::error::Result;

/// Top-`m` channels by true mean, rotated across clients with `t`.
pub fn oracle_select(true_means: &[f64], m: usize, t: usize) -> Result<Decision> {
    check_sizes(true_means.len(), m)?;
    let scores: Vec<Option<f64>> = true_means.iter().copied().map(Some).collect();
    Ok(Decision::ranked(top_m(&scores, m), t))
}

/// Uniform `m`-subset with a uniform bijection onto the clients.
pub fn random_select(n: usize, m: usize, rng: &mut dyn RngCore) -> Result<Decision> {
    check_sizes(n, m)?;
    let order = rand::seq::index::sample(rng, n, m).into_vec();
    let mut selected = order.clone();
    selected.sort_unstable();
    Ok(Decision {
        selected,
        assignment: Assignment::new(order, n)?,
        super_arm: None,
        exploited: false,
        forced: false,
    })
}

/// Knows the true means; the regret baseline.
pub struct OracleScheduler<'a> {
    env: &'a dyn ChannelProcess,
    clients: usize,
}

impl<'a> OracleScheduler<'a> {
    pub fn new(env: &'a dyn ChannelProcess, clients: usize) -> Result<Self> {
        check_sizes(env.n_channels(), clients)?;
        Ok(Self { env, clients })
    }
}

impl Scheduler for OracleScheduler<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn n_channels(&self) -> usize {
        self.env.n_channels()
    }

    fn clients(&self) -> usize {
        self.clients
    }

    fn select(&mut self, t: usize, _ages: &[u64], _rng: &mut dyn RngCore) -> Decision {
        let means = self
            .env
            .true_means(t)
            .expect("oracle asked for a round outside the horizon");
        oracle_select(&means, self.clients, t).expect("sizes checked at construction")
    }

    fn observe(&mut self, _t: usize, _decision: &Decision, _rewards: &[bool]) -> Feedback {
        Feedback::default()
    }

    fn empirical_means(&self) -> Vec<Option<f64>> {
        vec![None; self.env.n_channels()]
    }
}

pub struct RandomScheduler {
    n: usize,
    m: usize,
}

impl RandomScheduler {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        check_sizes(n, m)?;
        Ok(Self { n, m })
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> String {
        "random".into()
    }

    fn n_channels(&self) -> usize {
        self.n
    }

    fn clients(&self) -> usize {
        self.m
    }

    fn select(&mut self, _t: usize, _ages: &[u64], rng: &mut dyn RngCore) -> Decision {
        random_select(self.n, self.m, rng).expect("sizes checked at construction")
    }

    fn observe(&mut self, _t: usize, _decision: &Decision, _rewards: &[bool]) -> Feedback {
        Feedback::default()
    }

    fn empirical_means(&self) -> Vec<Option<f64>> {
        vec![None; self.n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn oracle_rotates_over_best_pair() {
        let means = [0.9, 0.5, 0.1];
        let even = oracle_select(&means, 2, 4).unwrap();
        let odd = oracle_select(&means, 2, 5).unwrap();
        assert_eq!(even.assignment.channel_of(), &[0, 1]);
        assert_eq!(odd.assignment.channel_of(), &[1, 0]);
        assert_eq!(even.selected, vec![0, 1]);
    }

    #[test]
    fn oracle_ties_prefer_low_index() {
        let d = oracle_select(&[0.4; 6], 3, 0).unwrap();
        assert_eq!(d.selected, vec![0, 1, 2]);
    }

    #[test]
    fn oracle_picks_good_channels() {
        let d = oracle_select(&[0.0, 1.0, 0.0, 1.0], 2, 1).unwrap();
        let mut chosen = d.selected.clone();
        chosen.sort();
        assert_eq!(chosen, vec![1, 3]);
        assert!(oracle_select(&[1.0], 2, 1).is_err());
    }

    #[test]
    fn random_forced_subset_when_square() {
        let mut rng = stream(0, Stream::Policy);
        let mut perms = std::collections::HashSet::new();
        for _ in 0..200 {
            let d = random_select(3, 3, &mut rng).unwrap();
            assert_eq!(d.selected, vec![0, 1, 2]);
            perms.insert(d.assignment.channel_of().to_vec());
        }
        assert_eq!(perms.len(), 6);
    }

    #[test]
    fn random_subset_frequency() {
        let mut rng = stream(1, Stream::Policy);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            for k in random_select(5, 2, &mut rng).unwrap().selected {
                counts[k] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.4).abs() < 0.01);
        }
    }

    #[test]
    fn random_is_reproducible() {
        let run = |seed| {
            let mut rng = stream(seed, Stream::Policy);
            (0..50)
                .map(|_| random_select(6, 3, &mut rng).unwrap().assignment)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }
}
