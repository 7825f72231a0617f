use std::path::PathBuf;

use rand::Rng;

use super::config::{EnvKind, EnvSpec, ExperimentConfig, PolicyName, PolicySpec};
use crate::flsim::FlParams;
use crate::matching::MatchingParams;
use crate::rng::{stream, Stream};

pub const PRESETS: [&str; 5] = ["fig2a", "fig2b", "fig2c", "fl-piecewise", "fl-adversarial"];

/// Horizon of the bandit presets.
pub const BANDIT_HORIZON: usize = 20_000;

/// Segment means drawn once from `U[0, 1]` and rounded to two decimals;
/// row `i` is the mean vector of segment `i`.
pub fn drawn_means(seed: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Stream::Channel);
    (0..rows)
        .map(|_| (0..cols).map(|_| (rng.random::<f64>() * 100.0).round() / 100.0).collect())
        .collect()
}

/// Good/bad segment means drawn once: in every segment a fresh random set of
/// `bad` channels gets a mean from `U[0, 0.2]`, the others from `U[0.8, 1]`,
/// rounded to two decimals.
pub fn good_bad_means(seed: u64, rows: usize, cols: usize, bad: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Stream::Channel);
    (0..rows)
        .map(|_| {
            let bad_set = rand::seq::index::sample(&mut rng, cols, bad).into_vec();
            (0..cols)
                .map(|k| {
                    let base = if bad_set.contains(&k) { 0.0 } else { 0.8 };
                    ((base + 0.2 * rng.random::<f64>()) * 100.0).round() / 100.0
                })
                .collect()
        })
        .collect()
}

/// Table shared by the bandit presets: 13 segments x 6 channels.
pub fn bandit_means() -> Vec<Vec<f64>> {
    drawn_means(0, 13, 6)
}

/// Start rounds of `segments` equal-length segments over `horizon` rounds.
pub fn equal_breakpoints(horizon: usize, segments: usize) -> Vec<usize> {
    (1..segments).map(|i| i * horizon / segments + 1).collect()
}

fn piecewise(label: &str, means: Vec<Vec<f64>>, horizon: usize) -> EnvSpec {
    EnvSpec {
        label: label.into(),
        kind: EnvKind::Piecewise,
        channels: means[0].len(),
        horizon,
        breakpoints: equal_breakpoints(horizon, means.len()),
        means,
        flip_probability: None,
        csv: None,
    }
}

fn first(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    bandit_means()[..rows].iter().map(|r| r[..cols].to_vec()).collect()
}

fn bandit(name: &str, environments: Vec<EnvSpec>, policies: Vec<PolicySpec>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seeds: (0..10).collect(),
        output: PathBuf::from("results").join(name),
        bandit_only: true,
        clients: 2,
        environments,
        policies,
        matching: MatchingParams::default(),
        fl: FlParams::default(),
    }
}

fn fig2a() -> ExperimentConfig {
    bandit(
        "fig2a",
        vec![piecewise("ct5", first(6, 5), BANDIT_HORIZON)],
        vec![
            PolicySpec::new(PolicyName::Random),
            PolicySpec::new(PolicyName::Mexp3),
            PolicySpec::new(PolicyName::GlrCucb),
            PolicySpec::new(PolicyName::Mexp3).aware(),
            PolicySpec::new(PolicyName::GlrCucb).aware(),
        ],
    )
}

fn fig2b() -> ExperimentConfig {
    bandit(
        "fig2b",
        [0usize, 4, 8, 12]
            .iter()
            .map(|&ct| piecewise(&format!("ct{ct}"), first(ct + 1, 5), BANDIT_HORIZON))
            .collect(),
        vec![PolicySpec::new(PolicyName::GlrCucb)],
    )
}

/// Four drawn channels plus `n - 4` channels fixed at 0.05, so the best pair
/// is the same for every `n` and only the number of super-arms grows.
fn fig2c() -> ExperimentConfig {
    bandit(
        "fig2c",
        [4usize, 5, 6]
            .iter()
            .map(|&n| {
                let means = first(6, 4)
                    .into_iter()
                    .map(|mut row| {
                        row.resize(n, 0.05);
                        row
                    })
                    .collect();
                piecewise(&format!("n{n}"), means, BANDIT_HORIZON)
            })
            .collect(),
        vec![PolicySpec::new(PolicyName::Mexp3)],
    )
}

/// Matching used by the federated presets: full fairness weight.
fn fair() -> MatchingParams {
    MatchingParams {
        beta: 1.0,
        ..MatchingParams::default()
    }
}

fn unmatched() -> MatchingParams {
    MatchingParams {
        enabled: false,
        ..MatchingParams::default()
    }
}

fn fl_piecewise() -> ExperimentConfig {
    let fl = FlParams {
        conditioning: 30.0,
        ..FlParams::default()
    };
    ExperimentConfig {
        name: "fl-piecewise".into(),
        seeds: (0..5).collect(),
        output: PathBuf::from("results/fl-piecewise"),
        bandit_only: false,
        clients: 20,
        environments: vec![piecewise("n30", good_bad_means(1, 3, 30, 10), fl.rounds)],
        policies: vec![
            PolicySpec::new(PolicyName::GlrCucb),
            PolicySpec::new(PolicyName::Random).with_matching(unmatched()),
        ],
        matching: fair(),
        fl,
    }
}

fn fl_adversarial() -> ExperimentConfig {
    let fl = FlParams::default();
    ExperimentConfig {
        name: "fl-adversarial".into(),
        seeds: (0..5).collect(),
        output: PathBuf::from("results/fl-adversarial"),
        bandit_only: false,
        clients: 4,
        environments: vec![EnvSpec {
            label: "flip5".into(),
            kind: EnvKind::Adversarial,
            channels: 6,
            horizon: fl.rounds,
            breakpoints: vec![],
            means: vec![],
            flip_probability: Some(0.05),
            csv: None,
        }],
        policies: vec![
            PolicySpec::new(PolicyName::Mexp3),
            PolicySpec::new(PolicyName::Random).with_matching(unmatched()),
        ],
        matching: fair(),
        fl,
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "fig2a" => Some(fig2a()),
        "fig2b" => Some(fig2b()),
        "fig2c" => Some(fig2c()),
        "fl-piecewise" => Some(fl_piecewise()),
        "fl-adversarial" => Some(fl_adversarial()),
        _ => None,
    }
}

/// One-line description for listings.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2a" => "regret of random, M-Exp3, GLR-CUCB and AA variants; N=5, M=2, T=20000, 5 breakpoints",
        "fig2b" => "GLR-CUCB regret for 0, 4, 8 and 12 breakpoints; N=5, M=2, T=20000",
        "fig2c" => "M-Exp3 regret for N = 4, 5, 6; M=2, T=20000, 5 breakpoints",
        "fl-piecewise" => "federated run, N=30, M=20, 250 rounds, GLR-CUCB + matching vs random",
        "fl-adversarial" => "federated run, N=6, M=4, flipping channels, M-Exp3 + matching vs random",
        _ => return None,
    })
}
