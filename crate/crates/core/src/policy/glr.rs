//! Bernoulli generalized-likelihood-ratio change detector.

/// Clamp applied to the reference probability in [`kl_bernoulli`].
pub const KL_CLAMP: f64 = 1e-9;

/// `kl(p, q) = p ln(p/q) + (1-p) ln((1-p)/(1-q))`, with `0 ln 0 = 0` and `q`
/// clamped to `[KL_CLAMP, 1 - KL_CLAMP]`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let q = q.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Detection threshold `(1 + 1/D) ln(3 D sqrt(D) / delta)`.
pub fn glr_threshold(samples: usize, delta: f64) -> f64 {
    let d = samples as f64;
    (1.0 + 1.0 / d) * (3.0 * d * d.sqrt() / delta).ln()
}

/// Lazily grown table of `n ln n`.
#[derive(Debug, Clone, Default)]
pub struct XLogX {
    table: Vec<f64>,
}

impl XLogX {
    pub fn new() -> Self {
        Self { table: vec![0.0] }
    }

    fn reserve(&mut self, n: usize) {
        if self.table.len() <= n {
            let start = self.table.len().max(1);
            self.table.resize(start, 0.0);
            self.table
                .extend((start..=n.max(2 * start)).map(|k| k as f64 * (k as f64).ln()));
        }
    }

    #[inline]
    fn get(&self, n: u32) -> f64 {
        self.table[n as usize]
    }
}

/// Binary observation stream since the last restart, stored as prefix counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlrDetector {
    prefix: Vec<u32>,
}

impl Default for GlrDetector {
    fn default() -> Self {
        Self::new()
    }
}

impl GlrDetector {
    pub fn new() -> Self {
        Self { prefix: vec![0] }
    }

    pub fn push(&mut self, x: bool) {
        let last = *self.prefix.last().expect("prefix starts at zero");
        self.prefix.push(last + x as u32);
    }

    pub fn clear(&mut self) {
        self.prefix.truncate(1);
    }

    /// Number of samples `D`.
    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn successes(&self) -> u32 {
        self.prefix[self.len()]
    }

    /// Sample mean, `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        match self.len() {
            0 => None,
            d => Some(self.successes() as f64 / d as f64),
        }
    }

    pub fn samples(&self) -> Vec<bool> {
        self.prefix.windows(2).map(|w| w[1] > w[0]).collect()
    }

    /// `sup_s [ s kl(mu_{1:s}, mu_{1:D}) + (D - s) kl(mu_{s+1:D}, mu_{1:D}) ]`.
    ///
    /// For binary samples each bracket equals a difference of binary
    /// log-likelihoods, `H(k1, s) + H(k2, D - s) - H(K, D)` with
    /// `H(k, n) = k ln k + (n - k) ln(n - k) - n ln n`, so each split is a few
    /// table lookups.
    pub fn statistic(&self, table: &mut XLogX) -> f64 {
        let d = self.len();
        if d < 2 {
            return 0.0;
        }
        table.reserve(d);
        let total = self.successes();
        let dd = d as u32;
        let h = |k: u32, n: u32| table.get(k) + table.get(n - k) - table.get(n);
        let whole = h(total, dd);
        let mut best = f64::NEG_INFINITY;
        for s in 1..dd {
            let k1 = self.prefix[s as usize];
            let v = h(k1, s) + h(total - k1, dd - s);
            if v > best {
                best = v;
            }
        }
        (best - whole).max(0.0)
    }

    /// Whether the statistic reaches the threshold at the current length.
    pub fn detects(&self, delta: f64, table: &mut XLogX) -> bool {
        self.len() >= 2 && self.statistic(table) >= glr_threshold(self.len(), delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Direct evaluation of the split statistic through `kl_bernoulli`.
    fn statistic_by_kl(samples: &[bool]) -> f64 {
        let d = samples.len();
        let x: Vec<f64> = samples.iter().map(|&b| b as u8 as f64).collect();
        let all = x.iter().sum::<f64>() / d as f64;
        (1..d)
            .map(|s| {
                let left = x[..s].iter().sum::<f64>() / s as f64;
                let right = x[s..].iter().sum::<f64>() / (d - s) as f64;
                s as f64 * kl_bernoulli(left, all) + (d - s) as f64 * kl_bernoulli(right, all)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_bernoulli(0.5, 0.5), 0.0);
        assert_relative_eq!(kl_bernoulli(0.0, 0.5), std::f64::consts::LN_2, epsilon = 1e-12);
        assert!(kl_bernoulli(0.0, 0.0).abs() < 1e-8);
        assert!(kl_bernoulli(1.0, 0.0).is_finite());
    }

    #[test]
    fn threshold_value() {
        // 1.01 * ln(3e6)
        assert_relative_eq!(glr_threshold(100, 0.001), 15.0630, epsilon = 1e-3);
        assert_relative_eq!(
            glr_threshold(100, 0.001),
            1.01 * (3.0e6f64).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_stream_never_fires() {
        let mut det = GlrDetector::new();
        let mut table = XLogX::new();
        for _ in 0..500 {
            det.push(true);
            assert_eq!(det.statistic(&mut table), 0.0);
            assert!(!det.detects(0.001, &mut table));
        }
    }

    #[test]
    fn fast_statistic_matches_kl_route() {
        let mut rng = stream(17, Stream::Policy);
        let mut table = XLogX::new();
        for len in [2usize, 3, 10, 57, 300] {
            for _ in 0..20 {
                let p: f64 = rng.random();
                let mut det = GlrDetector::new();
                let samples: Vec<bool> = (0..len).map(|_| rng.random_bool(p)).collect();
                samples.iter().for_each(|&x| det.push(x));
                assert_eq!(det.samples(), samples);
                let fast = det.statistic(&mut table);
                let slow = statistic_by_kl(&samples);
                // the clamped reference probability adds at most ~D * 1e-9
                assert!((fast - slow).abs() <= 2e-9 * len as f64 + 1e-9 * slow, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn detects_upward_shift_quickly() {
        let mut rng = stream(3, Stream::Channel);
        let mut det = GlrDetector::new();
        let mut table = XLogX::new();
        for _ in 0..200 {
            det.push(rng.random_bool(0.2));
            assert!(!det.detects(0.001, &mut table));
        }
        let delay = (1..=100).find(|_| {
            det.push(rng.random_bool(0.8));
            det.detects(0.001, &mut table)
        });
        assert!(delay.is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn kl_is_non_negative(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            prop_assert!(kl_bernoulli(p, q) >= -1e-15);
        }
    }
}
