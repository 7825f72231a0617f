use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{EnvSpec, ExperimentConfig, PolicySpec};
use crate::env::ChannelEnvironment;
use crate::error::{Error, Result};
use crate::flsim::{Evaluation, FlWorld, RoundRecord};
use crate::matching::MatchingParams;
use crate::policy::RandomScheduler;
use crate::sim::{simulate, BanditRun};

pub const CSV_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CEILING: &str = "ceiling";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Regret,
    Federated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub kind: RunKind,
    pub env: String,
    pub policy: String,
    pub seed: u64,
    /// Path relative to the manifest.
    pub file: String,
}

/// Index of an output directory. Together with the embedded config it is
/// enough to regenerate every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub csv_version: u32,
    pub crate_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunEntry>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(toml::from_str(&text)?)
    }
}

/// SHA-256 of the fully expanded config.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(config.to_toml()?.as_bytes())))
}

/// One row of a regret file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub round: usize,
    pub policy_age_sum: u64,
    pub oracle_age_sum: u64,
    pub regret: i64,
    pub age_variance: f64,
    pub restart: u8,
    /// Age of each client, `;`-separated.
    pub ages: String,
}

/// One row of a federated-run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedRow {
    pub round: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub participants: usize,
    pub age_sum: u64,
    pub age_variance: f64,
    pub regret: i64,
    pub beta_t: f64,
    pub restart: u8,
    /// Channel of each client, `;`-separated.
    pub assignment: String,
    /// Age of each client, `;`-separated.
    pub ages: String,
}

fn joined<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

impl FederatedRow {
    fn from_record(r: &RoundRecord) -> Self {
        Self {
            round: r.round,
            accuracy: r.accuracy,
            loss: r.loss,
            participants: r.participants(),
            age_sum: r.ages.iter().sum(),
            age_variance: r.age_variance,
            regret: r.regret,
            beta_t: r.beta_t,
            restart: r.restart as u8,
            assignment: joined(&r.assignment),
            ages: joined(&r.ages),
        }
    }
}

pub fn regret_rows(run: &BanditRun) -> Vec<RegretRow> {
    let restarts: HashSet<usize> = run.trace.restarts.iter().copied().collect();
    let curve = run.regret.regret_curve();
    (0..curve.len())
        .map(|i| RegretRow {
            round: i + 1,
            policy_age_sum: run.regret.policy_age_sums()[i],
            oracle_age_sum: run.regret.oracle_age_sums()[i],
            regret: curve[i],
            age_variance: run.trace.variances[i],
            restart: restarts.contains(&(i + 1)) as u8,
            ages: joined(&run.trace.ages[i]),
        })
        .collect()
}

fn header(kind: RunKind) -> String {
    let what = match kind {
        RunKind::Regret => "regret",
        RunKind::Federated => "federated",
    };
    format!("# aoisched {what} csv v{CSV_VERSION}\n")
}

pub fn write_csv<T: Serialize>(path: &Path, kind: RunKind, rows: &[T]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut file = BufWriter::new(File::create(path).map_err(io)?);
    file.write_all(header(kind).as_bytes()).map_err(io)?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    writer.flush().map_err(io)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Every policy of `config` on one environment and seed, channel level only.
pub fn bandit_runs(
    config: &ExperimentConfig,
    spec: &EnvSpec,
    seed: u64,
    base_dir: &Path,
) -> Result<Vec<BanditRun>> {
    let env = spec.build(seed, base_dir)?;
    let schedulers = config
        .policies
        .iter()
        .map(|p| p.build(&env, spec.horizon, config.clients))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = simulate(&env, schedulers, seed)?;
    for (run, p) in runs.iter_mut().zip(&config.policies) {
        run.policy = p.display_name();
    }
    Ok(runs)
}

/// Outcome of one federated run.
#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub policy: String,
    pub initial: Evaluation,
    pub records: Vec<RoundRecord>,
}

impl FederatedRun {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(self.initial.accuracy, |r| r.accuracy)
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.records.iter().map(|r| r.age_variance).sum()
    }
}

pub fn federated_run(
    config: &ExperimentConfig,
    spec: &EnvSpec,
    policy: &PolicySpec,
    seed: u64,
    base_dir: &Path,
) -> Result<FederatedRun> {
    let env = spec.build(seed, base_dir)?;
    let scheduler = policy.build(&env, config.fl.rounds, config.clients)?;
    let matching = policy.matching.unwrap_or(config.matching);
    let mut world = FlWorld::new(config.fl, matching, &env, scheduler, seed)?;
    Ok(FederatedRun {
        policy: policy.display_name(),
        initial: world.initial_evaluation(),
        records: world.run()?,
    })
}

/// The same task trained with every channel always Good and plain
/// averaging; the accuracy reference for convergence targets.
pub fn ceiling_run(config: &ExperimentConfig, spec: &EnvSpec, seed: u64) -> Result<FederatedRun> {
    let env = ChannelEnvironment::stationary(vec![1.0; spec.channels], config.fl.rounds)?;
    let scheduler = Box::new(RandomScheduler::new(spec.channels, config.clients)?);
    let matching = MatchingParams {
        enabled: false,
        ..config.matching
    };
    let mut world = FlWorld::new(config.fl, matching, &env, scheduler, seed)?;
    Ok(FederatedRun {
        policy: CEILING.into(),
        initial: world.initial_evaluation(),
        records: world.run()?,
    })
}

fn file_name(kind: RunKind, env: &str, policy: &str, seed: u64) -> String {
    let prefix = match kind {
        RunKind::Regret => "regret",
        RunKind::Federated => "fl",
    };
    format!("{prefix}_{env}_{policy}_seed{seed}.csv")
}

enum Job<'a> {
    Bandit(&'a EnvSpec, u64),
    Federated(&'a EnvSpec, Option<&'a PolicySpec>, u64),
}

enum Output {
    Bandit(Vec<BanditRun>),
    Federated(FederatedRun),
}

/// Runs every environment, policy and seed of `config`, writing CSVs and a
/// manifest into `config.output`. Relative file references inside the config
/// resolve against `base_dir`.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    let out = &config.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut jobs = Vec::new();
    for env in &config.environments {
        for &seed in &config.seeds {
            if config.bandit_only {
                jobs.push(Job::Bandit(env, seed));
            } else {
                jobs.push(Job::Federated(env, None, seed));
                for p in &config.policies {
                    jobs.push(Job::Federated(env, Some(p), seed));
                }
            }
        }
    }
    let outputs = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Bandit(env, seed) => bandit_runs(config, env, seed, base_dir).map(Output::Bandit),
            Job::Federated(env, None, seed) => ceiling_run(config, env, seed).map(Output::Federated),
            Job::Federated(env, Some(p), seed) => {
                federated_run(config, env, p, seed, base_dir).map(Output::Federated)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::new();
    for (job, output) in jobs.iter().zip(outputs) {
        match (job, output) {
            (Job::Bandit(env, seed), Output::Bandit(bandit)) => {
                for run in bandit {
                    let file = file_name(RunKind::Regret, &env.label, &run.policy, *seed);
                    write_csv(&out.join(&file), RunKind::Regret, &regret_rows(&run))?;
                    runs.push(RunEntry {
                        kind: RunKind::Regret,
                        env: env.label.clone(),
                        policy: run.policy,
                        seed: *seed,
                        file,
                    });
                }
            }
            (Job::Federated(env, _, seed), Output::Federated(run)) => {
                let file = file_name(RunKind::Federated, &env.label, &run.policy, *seed);
                let rows: Vec<FederatedRow> = run.records.iter().map(FederatedRow::from_record).collect();
                write_csv(&out.join(&file), RunKind::Federated, &rows)?;
                runs.push(RunEntry {
                    kind: RunKind::Federated,
                    env: env.label.clone(),
                    policy: run.policy,
                    seed: *seed,
                    file,
                });
            }
            _ => unreachable!("outputs follow their jobs"),
        }
    }

    let manifest = Manifest {
        csv_version: CSV_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config_hash(config)?,
        seeds: config.seeds.clone(),
        runs,
        config: config.clone(),
    };
    let path = out.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{EnvKind, PolicyName};
    use crate::flsim::FlParams;
    use std::path::PathBuf;

    fn small(output: PathBuf, bandit_only: bool) -> ExperimentConfig {
        ExperimentConfig {
            name: "small".into(),
            seeds: vec![3, 4],
            output,
            bandit_only,
            clients: 2,
            environments: vec![EnvSpec {
                label: "pw".into(),
                kind: EnvKind::Piecewise,
                channels: 4,
                horizon: 400,
                breakpoints: vec![201],
                means: vec![vec![0.9, 0.7, 0.2, 0.1], vec![0.1, 0.2, 0.8, 0.9]],
                flip_probability: None,
                csv: None,
            }],
            policies: vec![
                PolicySpec::new(PolicyName::Oracle),
                PolicySpec::new(PolicyName::Random),
                PolicySpec::new(PolicyName::GlrCucb).aware(),
            ],
            matching: MatchingParams::default(),
            fl: FlParams {
                rounds: 30,
                samples_per_client: 40,
                validation_size: 100,
                dim: 5,
                classes: 3,
                ..FlParams::default()
            },
        }
    }

    fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        files
    }

    #[test]
    fn bandit_outputs_are_reproducible() {
        let tmp = tempfile::tempdir().unwrap();
        let a = small(tmp.path().join("a"), true);
        let b = small(tmp.path().join("b"), true);
        let ma = run_experiment(&a, Path::new(".")).unwrap();
        run_experiment(&b, Path::new(".")).unwrap();
        assert_eq!(ma.runs.len(), 6);
        let fa = read_dir_bytes(&a.output);
        let fb = read_dir_bytes(&b.output);
        let csvs = |f: &Vec<(String, Vec<u8>)>| f.iter().filter(|x| x.0.ends_with(".csv")).cloned().collect::<Vec<_>>();
        assert_eq!(csvs(&fa), csvs(&fb));
        let first = String::from_utf8(csvs(&fa)[0].1.clone()).unwrap();
        assert!(first.starts_with("# aoisched regret csv v1\nround,policy_age_sum"));

        let oracle: Vec<RegretRow> =
            read_csv(&a.output.join("regret_pw_oracle_seed3.csv")).unwrap();
        assert_eq!(oracle.len(), 400);
        assert!(oracle.iter().all(|r| r.regret == 0));
        for r in &oracle {
            let ages: Vec<u64> = r.ages.split(';').map(|a| a.parse().unwrap()).collect();
            assert_eq!(ages.iter().sum::<u64>(), r.policy_age_sum);
        }
        let loaded = Manifest::load(&a.output).unwrap();
        assert_eq!(loaded, ma);
        assert_eq!(loaded.config_sha256, config_hash(&a).unwrap());
    }

    #[test]
    fn manifest_reproduces_files() {
        let tmp = tempfile::tempdir().unwrap();
        let a = small(tmp.path().join("a"), true);
        run_experiment(&a, Path::new(".")).unwrap();
        let mut replay = Manifest::load(&a.output).unwrap().config;
        replay.output = tmp.path().join("replay");
        run_experiment(&replay, Path::new(".")).unwrap();
        for entry in Manifest::load(&a.output).unwrap().runs {
            assert_eq!(
                std::fs::read(a.output.join(&entry.file)).unwrap(),
                std::fs::read(replay.output.join(&entry.file)).unwrap()
            );
        }
    }

    #[test]
    fn federated_outputs_include_ceiling() {
        let tmp = tempfile::tempdir().unwrap();
        let mut c = small(tmp.path().join("fl"), false);
        c.seeds = vec![1];
        let m = run_experiment(&c, Path::new(".")).unwrap();
        let policies: Vec<&str> = m.runs.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(policies, vec![CEILING, "oracle", "random", "aa-glr-cucb"]);
        let rows: Vec<FederatedRow> = read_csv(&c.output.join(&m.runs[0].file)).unwrap();
        assert_eq!(rows.len(), 30);
        assert!(rows.iter().all(|r| r.participants == 2));
        assert_eq!(rows[0].assignment.split(';').count(), 2);
        assert!(rows.iter().all(|r| r.ages == "1;1"));
    }

    #[test]
    fn unwritable_output_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let c = small(blocker.join("sub"), true);
        assert!(matches!(run_experiment(&c, Path::new(".")), Err(Error::Io { .. })));
    }

    #[test]
    fn missing_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(Manifest::load(tmp.path()), Err(Error::MissingFile(_))));
    }
}
