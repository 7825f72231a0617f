//! Asynchronous federated learning over scheduled channels.
//!
//! Each round: clients that reached the server last round retrain from the
//! current global model, the scheduler picks channels, clients are matched to
//! them, channel states decide which uploads arrive, and the server
//! aggregates the cumulative updates that arrived. Clients that miss a round
//! keep their last cumulative update and upload it when they next succeed.

mod client;
mod partition;
mod task;

pub use client::{global_update, ClientState, LocalTraining};
pub use partition::{dirichlet_partition, largest_remainder, PARTITION_RETRIES};
pub use task::{Dataset, Evaluation, Softmax, SyntheticTask};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{AoiLedger, RegretAccumulator};
use crate::env::{realize_all, ChannelProcess, ChannelRealization};
use crate::error::{Error, Result};
use crate::matching::{
    aggregation_weights, match_clients, priority, ChannelRanking, ContributionState,
    FairnessState, MatchingParams, RankingMode,
};
use crate::policy::{oracle_select, Scheduler};
use crate::rng::{client_stream, stream, Stream};

/// Task and training settings of a federated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlParams {
    pub rounds: usize,
    pub eta: f64,
    pub local_steps: usize,
    pub batch: usize,
    pub dirichlet_alpha: f64,
    pub samples_per_client: usize,
    pub validation_size: usize,
    pub dim: usize,
    pub classes: usize,
    /// Scale of the class centres.
    pub separation: f64,
    /// Standard deviation of the per-sample noise.
    pub noise: f64,
    /// Ratio of the largest to the smallest feature scale.
    #[serde(default = "unit")]
    pub conditioning: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for FlParams {
    fn default() -> Self {
        Self {
            rounds: 250,
            eta: 0.1,
            local_steps: 2,
            batch: 32,
            dirichlet_alpha: 0.5,
            samples_per_client: 200,
            validation_size: 1000,
            dim: 20,
            classes: 10,
            separation: 0.5,
            noise: 1.0,
            conditioning: 1.0,
        }
    }
}

impl FlParams {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("fl.rounds", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("fl.eta", format!("{} must be positive", self.eta)));
        }
        if self.batch == 0 {
            return Err(Error::config("fl.batch", "must be at least 1"));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(Error::config("fl.dirichlet_alpha", "must be positive"));
        }
        if self.samples_per_client == 0 || self.validation_size == 0 {
            return Err(Error::config("fl.samples_per_client", "data sizes must be positive"));
        }
        if !(self.conditioning >= 1.0 && self.conditioning.is_finite()) {
            return Err(Error::config("fl.conditioning", format!("{} must be >= 1", self.conditioning)));
        }
        if !(self.noise >= 0.0 && self.separation >= 0.0) {
            return Err(Error::config("fl.noise", "noise and separation must be non-negative"));
        }
        Ok(())
    }

    pub fn training(&self) -> LocalTraining {
        LocalTraining {
            eta: self.eta,
            steps: self.local_steps,
            batch: self.batch,
        }
    }
}

/// Everything recorded about one federated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub success: Vec<bool>,
    /// Ages after this round's update.
    pub ages: Vec<u64>,
    pub normalized_ages: Vec<f64>,
    pub age_variance: f64,
    pub regret: i64,
    pub selected: Vec<usize>,
    pub assignment: Vec<usize>,
    /// Normalised contributions used for matching.
    pub contributions: Vec<f64>,
    pub priorities: Option<Vec<f64>>,
    pub beta_t: f64,
    pub zeta: Vec<f64>,
    pub restart: bool,
    pub exploited: bool,
    pub forced: bool,
}

impl RoundRecord {
    pub fn participants(&self) -> usize {
        self.success.iter().filter(|&&s| s).count()
    }
}

/// Full state of one federated run.
pub struct FlWorld<'a> {
    params: FlParams,
    matching: MatchingParams,
    model: Softmax,
    task: SyntheticTask,
    clients: Vec<ClientState>,
    global: Vec<f64>,
    scheduler: Box<dyn Scheduler + 'a>,
    realizations: Vec<ChannelRealization>,
    oracle_means: Vec<Vec<f64>>,
    ledger: AoiLedger,
    oracle_ledger: AoiLedger,
    regret: RegretAccumulator,
    contributions: ContributionState,
    fairness: FairnessState,
    previous_success: Vec<bool>,
    policy_rng: ChaCha8Rng,
    round: usize,
    initial: Evaluation,
}

impl<'a> FlWorld<'a> {
    /// Builds the task, partitions it over the scheduler's clients and
    /// pre-draws the channel states for every round.
    pub fn new(
        params: FlParams,
        matching: MatchingParams,
        env: &dyn ChannelProcess,
        scheduler: Box<dyn Scheduler + 'a>,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let m = scheduler.clients();
        if scheduler.n_channels() != env.n_channels() {
            return Err(Error::Dimension(format!(
                "scheduler expects {} channels, environment has {}",
                scheduler.n_channels(),
                env.n_channels()
            )));
        }
        if env.horizon() < params.rounds {
            return Err(Error::config(
                "fl.rounds",
                format!("{} rounds exceed the channel horizon {}", params.rounds, env.horizon()),
            ));
        }
        if !(0.0..=1.0).contains(&matching.beta) {
            return Err(Error::config("matching.beta", format!("{} not in [0, 1]", matching.beta)));
        }
        let task = SyntheticTask::generate(
            params.dim,
            params.classes,
            params.samples_per_client * m,
            params.validation_size,
            params.separation,
            params.noise,
            &mut stream(seed, Stream::Data),
        )?
        .with_conditioning(params.conditioning);
        let model = Softmax::for_data(&task.train);
        let shards = dirichlet_partition(
            &task.train.labels,
            params.classes,
            params.dirichlet_alpha,
            m,
            &mut stream(seed, Stream::Partition),
        )?;
        let clients = shards
            .into_iter()
            .enumerate()
            .map(|(i, shard)| ClientState::new(shard, model.param_len(), client_stream(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        let mut channel_rng = stream(seed, Stream::Channel);
        let mut realizations = realize_all(env, &mut channel_rng)?;
        realizations.truncate(params.rounds);
        let oracle_means = (1..=params.rounds)
            .map(|t| env.true_means(t))
            .collect::<Result<Vec<_>>>()?;
        let global = model.zeros();
        let initial = model.evaluate(&global, &task.validation);
        Ok(Self {
            params,
            matching,
            model,
            task,
            clients,
            global,
            scheduler,
            realizations,
            oracle_means,
            ledger: AoiLedger::new(m),
            oracle_ledger: AoiLedger::new(m),
            regret: RegretAccumulator::new(),
            contributions: ContributionState::new(m),
            fairness: FairnessState::new(matching.beta),
            // everyone holds the initial model
            previous_success: vec![true; m],
            policy_rng: stream(seed, Stream::Policy),
            round: 0,
            initial,
        })
    }

    pub fn initial_evaluation(&self) -> Evaluation {
        self.initial
    }

    pub fn global_model(&self) -> &[f64] {
        &self.global
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn task(&self) -> &SyntheticTask {
        &self.task
    }

    pub fn ledger(&self) -> &AoiLedger {
        &self.ledger
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn scheduler(&self) -> &dyn Scheduler {
        self.scheduler.as_ref()
    }

    fn rank(&self, selected: &[usize], t: usize) -> ChannelRanking {
        let ucb = match self.matching.mode {
            RankingMode::Mean => None,
            RankingMode::Auto | RankingMode::Ucb => self.scheduler.ucb_values(t),
        };
        match ucb {
            Some(u) => ChannelRanking::from_scores(selected, |k| Some(u[k])),
            None => {
                let means = self.scheduler.empirical_means();
                ChannelRanking::from_scores(selected, |k| means[k])
            }
        }
    }

    /// Runs the next round.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let t = self.round + 1;
        if t > self.params.rounds {
            return Err(Error::RoundOutOfRange {
                round: t,
                horizon: self.params.rounds,
            });
        }
        let training = self.params.training();

        // clients that reached the server last round start from the new model
        for (client, &fresh) in self.clients.iter_mut().zip(&self.previous_success) {
            if fresh {
                client.local_sgd(&self.model, &self.task.train, &self.global, &training);
                client.cumulative_update(training.eta)?;
            }
        }

        let ages = self.ledger.ages().to_vec();
        let decision = self.scheduler.select(t, &ages, &mut self.policy_rng);
        let contributions = self.contributions.normalized();
        let (assignment, priorities, normalized_ages, beta_t) = if self.matching.enabled {
            let blend = self.fairness.blend(&ages);
            let lambda = priority(&contributions, &blend.normalized_ages, blend.beta_t);
            let ranking = self.rank(&decision.selected, t);
            let assignment = match_clients(&ranking, &lambda);
            (assignment.channel_of().to_vec(), Some(lambda), blend.normalized_ages, blend.beta_t)
        } else {
            let max = ages.iter().copied().max().unwrap_or(1).max(1) as f64;
            let normalized = ages.iter().map(|&a| a as f64 / max).collect();
            (decision.assignment.channel_of().to_vec(), None, normalized, 0.0)
        };

        let states = &self.realizations[t - 1].states;
        let success: Vec<bool> = assignment.iter().map(|&k| states[k]).collect();
        let rewards: Vec<bool> = decision.selected.iter().map(|&k| states[k]).collect();
        let feedback = self.scheduler.observe(t, &decision, &rewards);

        let m = self.clients.len();
        let zeta = if self.matching.enabled {
            aggregation_weights(self.contributions.scores(), &success)
        } else {
            aggregation_weights(&vec![1.0; m], &success)
        }
        .unwrap_or_else(|| vec![0.0; m]);

        let eta = training.eta;
        let updates: Vec<&[f64]> = self.clients.iter().map(|c| c.cached_update()).collect();
        if self.matching.enabled {
            for (i, (&ok, u)) in success.iter().zip(&updates).enumerate() {
                if ok {
                    let model: Vec<f64> =
                        self.global.iter().zip(u.iter()).map(|(w, g)| w - eta * g).collect();
                    self.contributions.update_buffers(i, u.to_vec(), model, t);
                }
            }
        }
        let mut aggregate = vec![0.0; self.global.len()];
        for ((&ok, u), &z) in success.iter().zip(&updates).zip(&zeta) {
            if ok {
                aggregate.iter_mut().zip(u.iter()).for_each(|(a, g)| *a += z * g);
            }
        }
        global_update(&mut self.global, &success, &updates, &zeta, eta)?;

        if self.matching.enabled {
            let (model, validation) = (&self.model, &self.task.validation);
            for i in (0..m).filter(|&i| success[i]) {
                // a lone participant has weight 1 and keeps its previous score
                let _ = self.contributions.refresh(i, &aggregate, &self.global, zeta[i], |w| {
                    model.loss(w, validation)
                });
            }
        }

        self.ledger.update(&success);
        let oracle = oracle_select(&self.oracle_means[t - 1], m, t)?;
        let oracle_success: Vec<bool> = oracle
            .assignment
            .channel_of()
            .iter()
            .map(|&k| states[k])
            .collect();
        self.oracle_ledger.update(&oracle_success);
        self.regret
            .push(self.ledger.total_age(), self.oracle_ledger.total_age());

        let eval = self.model.evaluate(&self.global, &self.task.validation);
        self.previous_success = success.clone();
        self.round = t;
        Ok(RoundRecord {
            round: t,
            loss: eval.loss,
            accuracy: eval.accuracy,
            success,
            ages: self.ledger.ages().to_vec(),
            normalized_ages,
            age_variance: *self.ledger.variance_trace().last().expect("one round done"),
            regret: self.regret.final_regret(),
            selected: decision.selected,
            assignment,
            contributions,
            priorities,
            beta_t,
            zeta,
            restart: feedback.restart,
            exploited: decision.exploited,
            forced: decision.forced,
        })
    }

    /// Runs all remaining rounds.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        (self.round..self.params.rounds).map(|_| self.run_round()).collect()
    }
}

/// First round whose accuracy reaches `target`, if any.
pub fn rounds_to_accuracy(records: &[RoundRecord], target: f64) -> Option<usize> {
    records.iter().find(|r| r.accuracy >= target).map(|r| r.round)
}
