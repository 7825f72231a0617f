//! Bandit-only simulation with common random numbers.
//!
//! Channel states are drawn once per seed; the oracle and every policy are
//! replayed on the same states, so regret differences come from the
//! decisions alone.

use crate::aoi::{AoiLedger, RegretAccumulator};
use crate::env::{realize_all, ChannelProcess, ChannelRealization};
use crate::error::{Error, Result};
use crate::policy::{oracle_select, Decision, Scheduler};
use crate::rng::{stream, Stream};

/// Age totals of one scheduler over a set of realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeTrace {
    /// Per-client ages after each round.
    pub ages: Vec<Vec<u64>>,
    pub totals: Vec<u64>,
    pub variances: Vec<f64>,
    pub restarts: Vec<usize>,
    pub exploited_rounds: usize,
}

/// One policy's run against the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    pub policy: String,
    pub trace: AgeTrace,
    pub regret: RegretAccumulator,
}

impl BanditRun {
    pub fn final_regret(&self) -> i64 {
        self.regret.final_regret()
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.trace.variances.iter().sum()
    }
}

fn replay(
    realizations: &[ChannelRealization],
    clients: usize,
    mut decide: impl FnMut(usize, &[u64]) -> Result<Decision>,
    mut learn: impl FnMut(usize, &Decision, &[bool]) -> bool,
) -> Result<AgeTrace> {
    let mut ledger = AoiLedger::new(clients);
    let mut trace = AgeTrace {
        ages: Vec::with_capacity(realizations.len()),
        totals: Vec::with_capacity(realizations.len()),
        variances: Vec::with_capacity(realizations.len()),
        restarts: Vec::new(),
        exploited_rounds: 0,
    };
    let mut success = vec![false; clients];
    let mut rewards = Vec::with_capacity(clients);
    for r in realizations {
        let t = r.round;
        let d = decide(t, ledger.ages())?;
        for (s, &k) in success.iter_mut().zip(d.assignment.channel_of()) {
            *s = r.states[k];
        }
        rewards.clear();
        rewards.extend(d.selected.iter().map(|&k| r.states[k]));
        if learn(t, &d, &rewards) {
            trace.restarts.push(t);
        }
        trace.exploited_rounds += d.exploited as usize;
        ledger.update(&success);
        trace.ages.push(ledger.ages().to_vec());
        trace.totals.push(ledger.total_age());
        trace.variances.push(*ledger.variance_trace().last().expect("round recorded"));
    }
    Ok(trace)
}

/// Ages under the oracle that knows each round's true means.
pub fn oracle_trace(
    env: &dyn ChannelProcess,
    realizations: &[ChannelRealization],
    clients: usize,
) -> Result<AgeTrace> {
    replay(
        realizations,
        clients,
        |t, _| oracle_select(&env.true_means(t)?, clients, t),
        |_, _, _| false,
    )
}

/// Ages under a learning policy. The policy only sees the states of the
/// channels it scheduled.
pub fn policy_trace(
    scheduler: &mut dyn Scheduler,
    realizations: &[ChannelRealization],
    seed: u64,
) -> Result<AgeTrace> {
    let clients = scheduler.clients();
    let n = scheduler.n_channels();
    if let Some(r) = realizations.iter().find(|r| r.states.len() != n) {
        return Err(Error::Dimension(format!(
            "round {} has {} channel states, policy expects {n}",
            r.round,
            r.states.len()
        )));
    }
    let mut rng = stream(seed, Stream::Policy);
    let sched = std::cell::RefCell::new(scheduler);
    replay(
        realizations,
        clients,
        |t, ages| Ok(sched.borrow_mut().select(t, ages, &mut rng)),
        |t, d, rewards| sched.borrow_mut().observe(t, d, rewards).restart,
    )
}

/// Runs every scheduler on the same realizations of `env` for one seed.
pub fn simulate<'a>(
    env: &dyn ChannelProcess,
    schedulers: Vec<Box<dyn Scheduler + 'a>>,
    seed: u64,
) -> Result<Vec<BanditRun>> {
    let Some(first) = schedulers.first() else {
        return Ok(Vec::new());
    };
    let clients = first.clients();
    let realizations = realize_all(env, &mut stream(seed, Stream::Channel))?;
    let oracle = oracle_trace(env, &realizations, clients)?;
    schedulers
        .into_iter()
        .map(|mut s| {
            if s.clients() != clients {
                return Err(Error::Dimension("schedulers disagree on client count".into()));
            }
            let trace = policy_trace(s.as_mut(), &realizations, seed)?;
            let regret = RegretAccumulator::from_totals(&trace.totals, &oracle.totals)?;
            Ok(BanditRun {
                policy: s.name(),
                trace,
                regret,
            })
        })
        .collect()
}

/// Least-squares slope of `ln R(t)` against `ln t` over `points` log-spaced
/// rounds in `[from, to]` (1-based). NaN if the curve is not positive there.
pub fn loglog_slope(curve: &[i64], from: usize, to: usize, points: usize) -> f64 {
    let to = to.min(curve.len());
    if from == 0 || from >= to || points < 2 {
        return f64::NAN;
    }
    let (lf, lt) = ((from as f64).ln(), (to as f64).ln());
    let mut ts: Vec<usize> = (0..points)
        .map(|k| (lf + (lt - lf) * k as f64 / (points - 1) as f64).exp().round() as usize)
        .map(|t| t.clamp(from, to))
        .collect();
    ts.dedup();
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for t in ts {
        let r = curve[t - 1];
        if r <= 0 {
            return f64::NAN;
        }
        xs.push((t as f64).ln());
        ys.push((r as f64).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ChannelEnvironment;
    use crate::policy::{GlrCucb, MExp3, OracleScheduler, RandomScheduler};
    use approx::assert_relative_eq;

    /// Environment whose true means are off limits.
    struct Sealed(ChannelEnvironment);

    impl ChannelProcess for Sealed {
        fn n_channels(&self) -> usize {
            self.0.n_channels()
        }
        fn horizon(&self) -> usize {
            self.0.horizon()
        }
        fn sample_round(&self, t: usize, rng: &mut dyn rand::RngCore) -> Result<ChannelRealization> {
            self.0.sample_round(t, rng)
        }
        fn true_means(&self, _t: usize) -> Result<Vec<f64>> {
            panic!("a learning policy read the true means")
        }
    }

    fn env() -> ChannelEnvironment {
        ChannelEnvironment::piecewise(
            4,
            600,
            &[301],
            vec![vec![0.9, 0.2, 0.7, 0.1], vec![0.1, 0.8, 0.2, 0.9]],
        )
        .unwrap()
    }

    #[test]
    fn learners_never_read_true_means() {
        let sealed = Sealed(env());
        let realizations = realize_all(&sealed, &mut stream(0, Stream::Channel)).unwrap();
        let mut policies: Vec<Box<dyn Scheduler>> = vec![
            Box::new(RandomScheduler::new(4, 2).unwrap()),
            Box::new(MExp3::new(4, 2, 0.5).unwrap()),
            Box::new(GlrCucb::new(4, 2, 0.05, 0.001).unwrap()),
        ];
        for p in &mut policies {
            policy_trace(p.as_mut(), &realizations, 0).unwrap();
        }
    }

    #[test]
    fn oracle_has_zero_regret() {
        let e = env();
        let oracle = OracleScheduler::new(&e, 2).unwrap();
        // the oracle scheduler borrows the environment, so replay it directly
        let realizations = realize_all(&e, &mut stream(4, Stream::Channel)).unwrap();
        let mut boxed: Box<dyn Scheduler + '_> = Box::new(oracle);
        let a = policy_trace(boxed.as_mut(), &realizations, 4).unwrap();
        let b = oracle_trace(&e, &realizations, 2).unwrap();
        assert_eq!(a.totals, b.totals);
    }

    #[test]
    fn regret_curve_is_cumulative_difference() {
        let e = env();
        let runs = simulate(&e, vec![Box::new(RandomScheduler::new(4, 2).unwrap())], 9).unwrap();
        let run = &runs[0];
        let mut acc = 0i64;
        for (t, r) in run.regret.regret_curve().iter().enumerate() {
            acc += run.regret.policy_age_sums()[t] as i64 - run.regret.oracle_age_sums()[t] as i64;
            assert_eq!(*r, acc);
        }
        assert_eq!(run.policy, "random");
        assert_eq!(run.trace.totals.len(), 600);
    }

    #[test]
    fn simulation_is_deterministic() {
        let e = env();
        let make = || -> Vec<Box<dyn Scheduler>> {
            vec![
                Box::new(MExp3::new(4, 2, 0.5).unwrap()),
                Box::new(GlrCucb::new(4, 2, 0.05, 0.001).unwrap()),
            ]
        };
        assert_eq!(simulate(&e, make(), 3).unwrap(), simulate(&e, make(), 3).unwrap());
        assert_ne!(
            simulate(&e, make(), 3).unwrap()[0].trace.totals,
            simulate(&e, make(), 4).unwrap()[0].trace.totals
        );
    }

    #[test]
    fn slope_of_power_laws() {
        let linear: Vec<i64> = (1..=20_000).map(|t| 3 * t).collect();
        assert_relative_eq!(loglog_slope(&linear, 2000, 20_000, 100), 1.0, epsilon = 1e-3);
        let root: Vec<i64> = (1..=20_000).map(|t| (1000.0 * (t as f64).sqrt()) as i64).collect();
        assert_relative_eq!(loglog_slope(&root, 2000, 20_000, 100), 0.5, epsilon = 1e-3);
        let mut bad = linear.clone();
        bad[5000] = 0;
        assert!(loglog_slope(&bad, 2000, 20_000, 20_000).is_nan());
    }
}
