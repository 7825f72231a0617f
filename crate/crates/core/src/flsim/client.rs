use rand::seq::SliceRandom;

use rand_chacha::ChaCha8Rng;

use super::task::{Dataset, Softmax};
use crate::error::{Error, Result};

/// Local optimiser settings shared by all clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub eta: f64,
    pub steps: usize,
    pub batch: usize,
}

/// One client's shard, sampler and cached cumulative update.
#[derive(Debug, Clone)]
pub struct ClientState {
    shard: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
    snapshot: Vec<f64>,
    local: Vec<f64>,
    cumulative: Vec<f64>,
    fresh: bool,
    rng: ChaCha8Rng,
}

impl ClientState {
    pub fn new(shard: Vec<usize>, params: usize, rng: ChaCha8Rng) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::EmptyData("client shard is empty".into()));
        }
        Ok(Self {
            order: shard.clone(),
            cursor: shard.len(),
            shard,
            snapshot: vec![0.0; params],
            local: vec![0.0; params],
            cumulative: vec![0.0; params],
            fresh: false,
            rng,
        })
    }

    pub fn shard(&self) -> &[usize] {
        &self.shard
    }

    /// Next mini-batch, drawn without replacement until the shard is used up.
    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let size = size.clamp(1, self.order.len());
        if self.cursor + size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let batch = self.order[self.cursor..self.cursor + size].to_vec();
        self.cursor += size;
        batch
    }

    /// Starts from `global` and takes `steps` mini-batch gradient steps.
    pub fn local_sgd(
        &mut self,
        model: &Softmax,
        data: &Dataset,
        global: &[f64],
        cfg: &LocalTraining,
    ) -> &[f64] {
        self.snapshot.copy_from_slice(global);
        self.local.copy_from_slice(global);
        for _ in 0..cfg.steps {
            let batch = self.next_batch(cfg.batch);
            let g = model.gradient(&self.local, data, &batch);
            for (w, gi) in self.local.iter_mut().zip(&g) {
                *w -= cfg.eta * gi;
            }
        }
        self.fresh = true;
        &self.local
    }

    /// `(w0 - wE) / eta` after fresh local training, otherwise the cached value.
    pub fn cumulative_update(&mut self, eta: f64) -> Result<&[f64]> {
        if self.fresh {
            if eta == 0.0 {
                return Err(Error::DivisionByZero("cumulative update with eta = 0".into()));
            }
            for ((c, w0), we) in self.cumulative.iter_mut().zip(&self.snapshot).zip(&self.local) {
                *c = (w0 - we) / eta;
            }
            self.fresh = false;
        }
        Ok(&self.cumulative)
    }

    pub fn cached_update(&self) -> &[f64] {
        &self.cumulative
    }

    #[cfg(test)]
    fn peek_rng(&self) -> u64 {
        rand::Rng::random(&mut self.rng.clone())
    }
}

/// `w -= eta * sum_{i in S} zeta_i G_i`. Clients outside `S` carry zero
/// weight; an empty `S` leaves `w` unchanged.
pub fn global_update(
    model: &mut [f64],
    success: &[bool],
    updates: &[&[f64]],
    zeta: &[f64],
    eta: f64,
) -> Result<()> {
    if success.len() != updates.len() || zeta.len() != updates.len() {
        return Err(Error::Dimension(format!(
            "{} success flags, {} updates, {} weights",
            success.len(),
            updates.len(),
            zeta.len()
        )));
    }
    if let Some(bad) = updates.iter().find(|u| u.len() != model.len()) {
        return Err(Error::Dimension(format!(
            "update of length {} for a model of length {}",
            bad.len(),
            model.len()
        )));
    }
    for ((&s, u), &z) in success.iter().zip(updates).zip(zeta) {
        if s && z != 0.0 {
            for (w, g) in model.iter_mut().zip(u.iter()) {
                *w -= eta * z * g;
            }
        }
    }
    Ok(())
}
