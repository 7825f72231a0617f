use crate::error::{Error, Result};

/// Last successful upload of one client.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferedUpdate {
    pub gradient: Vec<f64>,
    pub model: Vec<f64>,
    pub round: usize,
}

/// Pieces of one contribution estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContributionTerms {
    /// `1 - cos(g_m, g_{-m})`, in `[0, 2]`.
    pub cos_term: f64,
    /// Validation loss of the leave-one-out model.
    pub err_term: f64,
    pub score: f64,
}

/// `None` when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some((dot / (na * nb)).clamp(-1.0, 1.0))
    }
}

/// Removes one member from a weighted average: `(total - zeta * own) / (1 - zeta)`.
pub fn leave_one_out(total: &[f64], own: &[f64], zeta: f64) -> Result<Vec<f64>> {
    if total.len() != own.len() {
        return Err(Error::Dimension(format!(
            "aggregate has {} entries, client vector {}",
            total.len(),
            own.len()
        )));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::OutOfRange(format!("aggregation weight {zeta} not in [0, 1]")));
    }
    if zeta >= 1.0 {
        return Err(Error::DivisionByZero(
            "aggregation weight 1 leaves nothing to remove the client from".into(),
        ));
    }
    Ok(total
        .iter()
        .zip(own)
        .map(|(g, x)| (g - zeta * x) / (1.0 - zeta))
        .collect())
}

/// `C_m = (1 - cos(g_m, g_{-m})) * E(w_{-m})` from the client's buffered upload,
/// the aggregated gradient and model of the round, and the client's weight in
/// that aggregate. A zero gradient on either side counts as orthogonal.
pub fn marginal_contribution(
    buffer: &BufferedUpdate,
    global_gradient: &[f64],
    global_model: &[f64],
    zeta: f64,
    loss: impl Fn(&[f64]) -> f64,
) -> Result<ContributionTerms> {
    let g_rest = leave_one_out(global_gradient, &buffer.gradient, zeta)?;
    let w_rest = leave_one_out(global_model, &buffer.model, zeta)?;
    let cos_term = 1.0 - cosine_similarity(&buffer.gradient, &g_rest).unwrap_or(0.0);
    let err_term = loss(&w_rest);
    Ok(ContributionTerms {
        cos_term,
        err_term,
        score: cos_term * err_term,
    })
}

/// Min-max scaling to `[0, 1]`. A constant vector maps to all ones.
pub fn normalize_contributions(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|c| (c - lo) / (hi - lo)).collect()
}

/// Server-side buffers and contribution scores for all clients.
#[derive(Debug, Clone)]
pub struct ContributionState {
    buffers: Vec<Option<BufferedUpdate>>,
    scores: Vec<f64>,
    terms: Vec<Option<ContributionTerms>>,
}

impl ContributionState {
    /// Every client starts at the neutral score `1 / M`.
    pub fn new(clients: usize) -> Self {
        Self {
            buffers: vec![None; clients],
            scores: vec![1.0 / clients.max(1) as f64; clients],
            terms: vec![None; clients],
        }
    }

    pub fn clients(&self) -> usize {
        self.scores.len()
    }

    pub fn update_buffers(&mut self, client: usize, gradient: Vec<f64>, model: Vec<f64>, round: usize) {
        self.buffers[client] = Some(BufferedUpdate {
            gradient,
            model,
            round,
        });
    }

    pub fn buffer(&self, client: usize) -> Option<&BufferedUpdate> {
        self.buffers[client].as_ref()
    }

    /// Raw, non-negative scores.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn terms(&self, client: usize) -> Option<ContributionTerms> {
        self.terms[client]
    }

    pub fn normalized(&self) -> Vec<f64> {
        normalize_contributions(&self.scores)
    }

    /// Recomputes one client's score. On error (no buffer, or weight 1) the
    /// previous score is kept and the error returned.
    pub fn refresh(
        &mut self,
        client: usize,
        global_gradient: &[f64],
        global_model: &[f64],
        zeta: f64,
        loss: impl Fn(&[f64]) -> f64,
    ) -> Result<ContributionTerms> {
        let buffer = self.buffers[client]
            .as_ref()
            .ok_or_else(|| Error::EmptyData(format!("client {client} has not uploaded yet")))?;
        let terms = marginal_contribution(buffer, global_gradient, global_model, zeta, loss)?;
        self.scores[client] = terms.score.max(0.0);
        self.terms[client] = Some(terms);
        Ok(terms)
    }
}
