use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub classes: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Gaussian-mixture classification task: one centre per class, isotropic noise.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub centers: Vec<Vec<f64>>,
    pub noise: f64,
    pub train: Dataset,
    pub validation: Dataset,
}

impl SyntheticTask {
    /// Centres are drawn as `separation * N(0, I)`; samples as
    /// `centre[y] + noise * N(0, I)` with `y` uniform. Training and
    /// validation samples are independent draws.
    pub fn generate(
        dim: usize,
        classes: usize,
        train_size: usize,
        validation_size: usize,
        separation: f64,
        noise: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dim == 0 || classes < 2 {
            return Err(Error::config("fl.dim/classes", "need dim >= 1 and at least 2 classes"));
        }
        if train_size == 0 || validation_size == 0 {
            return Err(Error::EmptyData("training and validation sets must be non-empty".into()));
        }
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| {
                (0..dim)
                    .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let mut draw = |n: usize| {
            let mut features = Vec::with_capacity(n * dim);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let y = rng.random_range(0..classes);
                features.extend(
                    centers[y]
                        .iter()
                        .map(|c| c + noise * rng.sample::<f64, _>(StandardNormal)),
                );
                labels.push(y);
            }
            Dataset {
                dim,
                classes,
                features,
                labels,
            }
        };
        let train = draw(train_size);
        let validation = draw(validation_size);
        Ok(Self {
            centers,
            noise,
            train,
            validation,
        })
    }

    /// Per-feature scales log-spaced from `1 / kappa` (first feature) to 1
    /// (last feature).
    pub fn feature_scales(dim: usize, kappa: f64) -> Vec<f64> {
        if dim < 2 {
            return vec![1.0; dim];
        }
        (0..dim)
            .map(|d| kappa.powf(d as f64 / (dim - 1) as f64 - 1.0))
            .collect()
    }

    /// Rescales every feature of centres and samples by
    /// [`feature_scales`](Self::feature_scales). `kappa = 1` is a no-op.
    pub fn with_conditioning(mut self, kappa: f64) -> Self {
        let dim = self.train.dim;
        let scales = Self::feature_scales(dim, kappa);
        for c in &mut self.centers {
            c.iter_mut().zip(&scales).for_each(|(x, s)| *x *= s);
        }
        for data in [&mut self.train, &mut self.validation] {
            for row in data.features.chunks_mut(dim) {
                row.iter_mut().zip(&scales).for_each(|(x, s)| *x *= s);
            }
        }
        self
    }
}

/// Multinomial logistic regression. Parameters are `classes` rows of
/// `dim` weights followed by one bias each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Softmax {
    pub dim: usize,
    pub classes: usize,
}

/// Mean cross-entropy and top-1 accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

impl Softmax {
    pub fn for_data(data: &Dataset) -> Self {
        Self {
            dim: data.dim,
            classes: data.classes,
        }
    }

    pub fn param_len(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.param_len()]
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.dim + 1;
        for (k, o) in out.iter_mut().enumerate() {
            let row = &w[k * stride..(k + 1) * stride];
            *o = row[self.dim] + row[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Class probabilities for one sample, written into `out`; returns log-sum-exp.
    fn probabilities(&self, w: &[f64], x: &[f64], out: &mut [f64]) -> f64 {
        self.logits(w, x, out);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
        max + sum.ln()
    }

    /// Mean cross-entropy gradient over the given rows.
    pub fn gradient(&self, w: &[f64], data: &Dataset, rows: &[usize]) -> Vec<f64> {
        let stride = self.dim + 1;
        let mut g = vec![0.0; self.param_len()];
        let mut p = vec![0.0; self.classes];
        for &i in rows {
            let x = data.row(i);
            self.probabilities(w, x, &mut p);
            p[data.labels[i]] -= 1.0;
            for (k, &pk) in p.iter().enumerate() {
                let gk = &mut g[k * stride..(k + 1) * stride];
                for (gj, xj) in gk[..self.dim].iter_mut().zip(x) {
                    *gj += pk * xj;
                }
                gk[self.dim] += pk;
            }
        }
        let scale = 1.0 / rows.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    pub fn evaluate(&self, w: &[f64], data: &Dataset) -> Evaluation {
        let mut z = vec![0.0; self.classes];
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..data.len() {
            self.logits(w, data.row(i), &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let y = data.labels[i];
            loss += lse - z[y];
            // argmax, lowest class on ties
            let pred = (0..self.classes).fold(0, |b, k| if z[k] > z[b] { k } else { b });
            correct += (pred == y) as usize;
        }
        let n = data.len().max(1) as f64;
        Evaluation {
            loss: loss / n,
            accuracy: correct as f64 / n,
        }
    }

    pub fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        self.evaluate(w, data).loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_relative_eq;

    fn toy() -> Dataset {
        Dataset {
            dim: 2,
            classes: 2,
            features: vec![1.0, 0.0, -1.0, 0.5, 0.2, -2.0],
            labels: vec![0, 1, 1],
        }
    }

    #[test]
    fn uniform_model_on_balanced_set() {
        let data = Dataset {
            dim: 1,
            classes: 4,
            features: vec![0.3; 8],
            labels: vec![0, 1, 2, 3, 0, 1, 2, 3],
        };
        let m = Softmax::for_data(&data);
        let e = m.evaluate(&m.zeros(), &data);
        assert_relative_eq!(e.loss, 4f64.ln(), epsilon = 1e-12);
        // ties predict class 0, which is a quarter of the labels
        assert_relative_eq!(e.accuracy, 0.25);
    }

    #[test]
    fn separable_fit_is_perfect() {
        let data = Dataset {
            dim: 1,
            classes: 2,
            features: vec![-2.0, -1.0, 1.0, 3.0],
            labels: vec![0, 0, 1, 1],
        };
        let m = Softmax::for_data(&data);
        let w = vec![-5.0, 0.0, 5.0, 0.0];
        assert_eq!(m.evaluate(&w, &data).accuracy, 1.0);
    }

    #[test]
    fn loss_matches_recount() {
        let mut rng = stream(9, Stream::Data);
        let task = SyntheticTask::generate(5, 3, 10, 100, 1.0, 1.0, &mut rng).unwrap();
        let m = Softmax::for_data(&task.validation);
        let w: Vec<f64> = (0..m.param_len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let mut total = 0.0;
        for i in 0..100 {
            let x = task.validation.row(i);
            let z: Vec<f64> = (0..3)
                .map(|k| (0..5).map(|j| w[k * 6 + j] * x[j]).sum::<f64>() + w[k * 6 + 5])
                .collect();
            let norm: f64 = z.iter().map(|v| v.exp()).sum();
            total -= (z[task.validation.labels[i]].exp() / norm).ln();
        }
        assert!((m.loss(&w, &task.validation) - total / 100.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy();
        let m = Softmax::for_data(&data);
        let w = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1];
        let rows = [0, 1, 2];
        let g = m.gradient(&w, &data, &rows);
        let h = 1e-6;
        for j in 0..w.len() {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (m.loss(&up, &data) - m.loss(&down, &data)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "coordinate {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn generated_sets_have_requested_shape() {
        let mut rng = stream(1, Stream::Data);
        let task = SyntheticTask::generate(20, 10, 400, 50, 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(task.train.len(), 400);
        assert_eq!(task.train.features.len(), 400 * 20);
        assert_eq!(task.validation.len(), 50);
        assert!(task.train.labels.iter().all(|&y| y < 10));
        assert!(SyntheticTask::generate(20, 1, 4, 4, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn conditioning_rescales_features() {
        let scales = SyntheticTask::feature_scales(3, 100.0);
        assert!((scales[0] - 0.01).abs() < 1e-15);
        assert!((scales[1] - 0.1).abs() < 1e-15);
        assert_eq!(scales[2], 1.0);
        let plain = SyntheticTask::generate(3, 2, 10, 10, 1.0, 1.0, &mut stream(2, Stream::Data)).unwrap();
        let same = plain.clone().with_conditioning(1.0);
        assert_eq!(same.train, plain.train);
        let scaled = plain.clone().with_conditioning(100.0);
        for i in 0..10 {
            for d in 0..3 {
                let want = plain.train.row(i)[d] * scales[d];
                assert!((scaled.train.row(i)[d] - want).abs() < 1e-15);
            }
        }
        assert_eq!(scaled.train.labels, plain.train.labels);
    }
}
