//! AoI-aware wrapper: exploit the historically best channels whenever the
//! clients' total age exceeds `M * h(t)`, with `h(t) = 1 / max_k mu_k(t)`.

use rand::RngCore;

use super::{top_m, Decision, Feedback, Scheduler};

/// Threshold rule for the AoI-aware wrapper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaConfig {
    pub enabled: bool,
}

impl AaConfig {
    /// `h(t) = 1 / max_k mu_k`. `None` while some channel has no estimate
    /// or none is positive, in which case the wrapper defers to its base
    /// policy.
    pub fn threshold(means: &[Option<f64>]) -> Option<f64> {
        let means: Option<Vec<f64>> = means.iter().copied().collect();
        let best = means?.into_iter().fold(0.0, f64::max);
        (best > 0.0).then(|| 1.0 / best)
    }

    /// Whether the exploit branch fires for these ages.
    pub fn fires(ages: &[u64], means: &[Option<f64>]) -> bool {
        match Self::threshold(means) {
            Some(h) => ages.iter().sum::<u64>() as f64 > ages.len() as f64 * h,
            None => false,
        }
    }
}

pub struct AoiAware<'a> {
    inner: Box<dyn Scheduler + 'a>,
}

impl<'a> AoiAware<'a> {
    pub fn new(inner: Box<dyn Scheduler + 'a>) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &dyn Scheduler {
        self.inner.as_ref()
    }
}

impl Scheduler for AoiAware<'_> {
    fn name(&self) -> String {
        format!("aa-{}", self.inner.name())
    }

    fn n_channels(&self) -> usize {
        self.inner.n_channels()
    }

    fn clients(&self) -> usize {
        self.inner.clients()
    }

    fn select(&mut self, t: usize, ages: &[u64], rng: &mut dyn RngCore) -> Decision {
        let means = self.inner.empirical_means();
        if AaConfig::fires(ages, &means) {
            let mut d = Decision::ranked(top_m(&means, self.inner.clients()), t);
            d.exploited = true;
            d
        } else {
            self.inner.select(t, ages, rng)
        }
    }

    fn observe(&mut self, t: usize, decision: &Decision, rewards: &[bool]) -> Feedback {
        self.inner.observe(t, decision, rewards)
    }

    fn empirical_means(&self) -> Vec<Option<f64>> {
        self.inner.empirical_means()
    }

    fn ucb_values(&self, t: usize) -> Option<Vec<f64>> {
        self.inner.ucb_values(t)
    }
}
