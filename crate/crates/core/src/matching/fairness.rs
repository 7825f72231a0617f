use crate::aoi::age_variance;

/// Output of one fairness update.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessBlend {
    pub beta_t: f64,
    pub normalized_ages: Vec<f64>,
    pub normalized_variance: f64,
    pub variance: f64,
}

/// Running maxima needed to normalise the age variance and the ages.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessState {
    beta: f64,
    max_variance: f64,
    max_age: u64,
}

impl FairnessState {
    pub fn new(beta: f64) -> Self {
        assert!((0.0..=1.0).contains(&beta), "beta {beta} not in [0, 1]");
        Self {
            beta,
            max_variance: 0.0,
            max_age: 0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Folds in the current ages and returns `beta_t = beta * V_t / max V`
    /// together with `a_i / max_{tau, j} a_j(tau)`.
    pub fn blend(&mut self, ages: &[u64]) -> FairnessBlend {
        let variance = age_variance(ages);
        self.max_variance = self.max_variance.max(variance);
        self.max_age = self.max_age.max(ages.iter().copied().max().unwrap_or(0));
        let normalized_variance = if self.max_variance > 0.0 {
            variance / self.max_variance
        } else {
            0.0
        };
        let normalized_ages = ages
            .iter()
            .map(|&a| {
                if self.max_age == 0 {
                    0.0
                } else {
                    a as f64 / self.max_age as f64
                }
            })
            .collect();
        FairnessBlend {
            beta_t: self.beta * normalized_variance,
            normalized_ages,
            normalized_variance,
            variance,
        }
    }
}
