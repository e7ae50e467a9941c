//! Executes experiments and renders their CSV output.
//!
//! Every sweep cell is an independent job keyed by its position in the
//! nested sweep; jobs run in parallel and the rows are sorted back into
//! sweep order, so a given (config, seed) pair always produces byte-
//! identical output. Each row carries its derived seed and the model hash —
//! enough, together with the config, to re-run that one cell alone.
//!
//! Within a replication the evidence is shared by every estimator (matched
//! pairs), while each estimator draws from its own seed stream.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use decfilt_core::diagnostics::{
    adversarial_starts, estimate_mixing_time, tv_distance, MixingConfig,
};
use decfilt_core::dmcmc::{Chain, ChainConfig};
use decfilt_core::exact::{brute_force_posterior, forward_filter, smooth};
use decfilt_core::models::{simulate, Belief, DiscreteHMM};
use decfilt_core::pfilter::{pf_init, pf_step};
use decfilt_core::rng::{mix_seed, seeded};
use decfilt_core::skf::{skf_simulate, SkfChain, SkfChainConfig, SwitchingKF};
use decfilt_core::Error as CoreError;

use crate::config::{ExperimentConfig, Scenario};
use crate::HarnessError;

/// Seed-derivation namespaces, so evidence, estimators, and diagnostics
/// never share a stream.
const TAG_EVIDENCE: u64 = 1;
const TAG_ESTIMATOR: u64 = 2;
const TAG_PARTICLE: u64 = 3;
const TAG_MIXING: u64 = 4;

/// Estimator label used in the `decay` column for particle-filter rows.
pub const PF_LABEL: &str = "pf";

/// CSV header, fixed column order.
pub const CSV_HEADER: &str = "scenario,model_id,T,decay,budget,replication,seed,value";

/// One output cell. `value` is the scenario's error metric (or τ_m for the
/// mixing scenario); NaN records an estimator fault such as particle
/// collapse.
#[derive(Debug, Clone)]
pub struct Row {
    pub scenario: &'static str,
    pub model_id: String,
    pub t: usize,
    pub decay: String,
    pub budget: u64,
    pub replication: usize,
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
struct KeyedRow {
    key: (usize, usize, usize, usize),
    row: Row,
}

/// Summary returned by [`run_experiment`].
#[derive(Debug)]
pub struct RunSummary {
    pub rows: usize,
    pub output: PathBuf,
    pub model_id: String,
}

/// Short content hash identifying the model tables.
pub fn model_id(model: &DiscreteHMM) -> String {
    let p = model.params();
    let mut h = Sha256::new();
    h.update((p.n_states as u64).to_le_bytes());
    h.update((p.n_obs as u64).to_le_bytes());
    for v in p.prior.iter().chain(&p.transition).chain(&p.observation) {
        h.update(v.to_bits().to_le_bytes());
    }
    hex_prefix(&h.finalize())
}

/// Short content hash identifying a switching-KF model.
pub fn skf_model_id(model: &SwitchingKF) -> String {
    let mut h = Sha256::new();
    h.update((model.n_switches() as u64).to_le_bytes());
    for v in model.switch_values().iter().chain(model.switch_prior()) {
        h.update(v.to_bits().to_le_bytes());
    }
    if let Some(markov) = model.switch_markov() {
        for v in markov {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    for v in [
        model.sigma_v(),
        model.sigma_w(),
        model.x1_mean(),
        model.x1_std(),
    ] {
        h.update(v.to_bits().to_le_bytes());
    }
    hex_prefix(&h.finalize())
}

fn hex_prefix(digest: &[u8]) -> String {
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Stable value tag for a decay variant, so per-cell seeds depend on sweep
/// values rather than sweep positions: dropping one sweep entry must not
/// change any other cell's seed.
fn decay_tag(decay: decfilt_core::decay::DecayVariant) -> u64 {
    let bytes: Vec<u64> = decay.to_string().bytes().map(u64::from).collect();
    mix_seed(0, &bytes)
}

/// Renders the full CSV (header plus rows in sweep order) for a config.
pub fn render_csv(config: &ExperimentConfig) -> Result<String, HarnessError> {
    let rows = render_rows(config)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.scenario,
            row.model_id,
            row.t,
            row.decay,
            row.budget,
            row.replication,
            row.seed,
            row.value
        )
        .expect("writing to String cannot fail");
    }
    Ok(out)
}

/// Runs the experiment and writes its CSV file.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let csv = render_csv(config)?;
    let rows = csv.lines().count() - 1;
    if let Some(parent) = config.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&config.output, csv)?;
    let model_id = match (&config.model, &config.skf) {
        (Some(m), _) => model_id(m),
        (None, Some(s)) => skf_model_id(s),
        (None, None) => String::new(),
    };
    Ok(RunSummary {
        rows,
        output: config.output.clone(),
        model_id,
    })
}

/// Computes every row of the experiment, in sweep order.
pub fn render_rows(config: &ExperimentConfig) -> Result<Vec<Row>, HarnessError> {
    let mut keyed = match config.scenario {
        Scenario::Stationarity | Scenario::ErrorVsSamples => run_offline(config)?,
        Scenario::ErrorVsHistory | Scenario::PfCompare => run_online_discrete(config)?,
        Scenario::MixingVsHistory => run_mixing(config)?,
        Scenario::SkfTrack => run_skf_track(config)?,
    };
    keyed.sort_by_key(|k| k.key);
    Ok(keyed.into_iter().map(|k| k.row).collect())
}

// ---------------------------------------------------------------------------
// Offline discrete scenarios
// ---------------------------------------------------------------------------

fn run_offline(config: &ExperimentConfig) -> Result<Vec<KeyedRow>, HarnessError> {
    let model = config.model.as_ref().expect("validated");
    let id = model_id(model);
    let root = config.seed;

    // (t, decay, budget, rep) cells; evidence depends on (t, rep) only.
    let mut cells = Vec::new();
    for (ti, &t) in config.t_values.iter().enumerate() {
        for (di, &decay) in config.decays.iter().enumerate() {
            for (bi, &budget) in config.budgets.iter().enumerate() {
                for rep in 0..config.replications {
                    cells.push((ti, t, di, decay, bi, budget, rep));
                }
            }
        }
    }

    let rows = cells
        .par_iter()
        .map(|&(ti, t, di, decay, bi, budget, rep)| {
            let evidence_seed = mix_seed(root, &[TAG_EVIDENCE, t as u64, rep as u64]);
            let (_, evidence) = simulate(model, t, evidence_seed);
            let estimator_seed = mix_seed(
                root,
                &[
                    TAG_ESTIMATOR,
                    t as u64,
                    decay_tag(decay),
                    budget,
                    rep as u64,
                ],
            );

            let target = smooth(model, &evidence)?;
            let target = target.last().expect("t >= 1");

            let chain_cfg = ChainConfig::new(
                budget,
                config.burn_in,
                config.schedule(decay),
                estimator_seed,
            )
            .map_err(HarnessError::from)?;

            let mut chain = match config.scenario {
                Scenario::Stationarity => {
                    let posterior = brute_force_posterior(model, &evidence)?;
                    let mut init_rng = seeded(mix_seed(estimator_seed, &[1]));
                    let start = posterior.sample(&mut init_rng);
                    Chain::with_trajectory(model, &evidence, start, chain_cfg)?
                }
                _ => Chain::with_evidence(model, &evidence, chain_cfg)?,
            };
            for _ in 0..budget {
                chain.step(model)?;
            }
            let value = tv_distance(&chain.estimate()?, target)?;

            Ok(KeyedRow {
                key: (ti, di, bi, rep),
                row: Row {
                    scenario: config.scenario.name(),
                    model_id: id.clone(),
                    t,
                    decay: decay.to_string(),
                    budget,
                    replication: rep,
                    seed: estimator_seed,
                    value,
                },
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Online discrete scenarios
// ---------------------------------------------------------------------------

/// Runs one online MCMC pass, reporting the error at each checkpoint.
fn online_mcmc_errors(
    model: &DiscreteHMM,
    evidence: &[usize],
    filter: &[Belief],
    checkpoints: &[usize],
    chain_cfg: ChainConfig,
) -> Result<Vec<f64>, CoreError> {
    let mut chain = Chain::new(model, chain_cfg);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for (i, &y) in evidence.iter().enumerate() {
        chain.observe(model, y)?;
        if next < checkpoints.len() && i + 1 == checkpoints[next] {
            out.push(tv_distance(&chain.estimate()?, &filter[i])?);
            next += 1;
        }
    }
    Ok(out)
}

/// Runs one bootstrap-filter pass. A particle collapse marks the remaining
/// checkpoints NaN instead of aborting the sweep.
fn online_pf_errors(
    model: &DiscreteHMM,
    evidence: &[usize],
    filter: &[Belief],
    checkpoints: &[usize],
    n_particles: usize,
    seed: u64,
) -> Result<Vec<f64>, CoreError> {
    let mut ps = pf_init(model, n_particles, seed)?;
    let mut rng = seeded(mix_seed(seed, &[1]));
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for (i, &y) in evidence.iter().enumerate() {
        match pf_step(&mut ps, model, &y, &mut rng) {
            Ok(()) => {
                if next < checkpoints.len() && i + 1 == checkpoints[next] {
                    out.push(tv_distance(&ps.belief(model.n_states())?, &filter[i])?);
                    next += 1;
                }
            }
            Err(CoreError::ParticleCollapse { .. }) => {
                while next < checkpoints.len() {
                    out.push(f64::NAN);
                    next += 1;
                }
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn run_online_discrete(config: &ExperimentConfig) -> Result<Vec<KeyedRow>, HarnessError> {
    let model = config.model.as_ref().expect("validated");
    let id = model_id(model);
    let root = config.seed;
    let t_max = *config.t_values.last().expect("non-empty");

    enum Job {
        Mcmc { di: usize, bi: usize, rep: usize },
        Pf { ni: usize, rep: usize },
    }
    let mut jobs = Vec::new();
    for di in 0..config.decays.len() {
        for bi in 0..config.budgets.len() {
            for rep in 0..config.replications {
                jobs.push(Job::Mcmc { di, bi, rep });
            }
        }
    }
    for ni in 0..config.particles.len() {
        for rep in 0..config.replications {
            jobs.push(Job::Pf { ni, rep });
        }
    }

    let rows = jobs
        .par_iter()
        .map(|job| {
            let rep = match job {
                Job::Mcmc { rep, .. } | Job::Pf { rep, .. } => *rep,
            };
            let evidence_seed = mix_seed(root, &[TAG_EVIDENCE, rep as u64]);
            let (_, evidence) = simulate(model, t_max, evidence_seed);
            let filter = forward_filter(model, &evidence)?.beliefs;

            let mut out = Vec::with_capacity(config.t_values.len());
            match *job {
                Job::Mcmc { di, bi, rep } => {
                    let decay = config.decays[di];
                    let budget = config.budgets[bi];
                    let seed =
                        mix_seed(root, &[TAG_ESTIMATOR, decay_tag(decay), budget, rep as u64]);
                    let cfg =
                        ChainConfig::new(budget, config.burn_in, config.schedule(decay), seed)
                            .map_err(HarnessError::from)?;
                    let errs =
                        online_mcmc_errors(model, &evidence, &filter, &config.t_values, cfg)?;
                    for (ti, err) in errs.into_iter().enumerate() {
                        out.push(KeyedRow {
                            key: (0, di * config.budgets.len() + bi, ti, rep),
                            row: Row {
                                scenario: config.scenario.name(),
                                model_id: id.clone(),
                                t: config.t_values[ti],
                                decay: decay.to_string(),
                                budget,
                                replication: rep,
                                seed,
                                value: err,
                            },
                        });
                    }
                }
                Job::Pf { ni, rep } => {
                    let n = config.particles[ni];
                    let seed = mix_seed(root, &[TAG_PARTICLE, n as u64, rep as u64]);
                    let errs =
                        online_pf_errors(model, &evidence, &filter, &config.t_values, n, seed)?;
                    for (ti, err) in errs.into_iter().enumerate() {
                        out.push(KeyedRow {
                            key: (1, ni, ti, rep),
                            row: Row {
                                scenario: config.scenario.name(),
                                model_id: id.clone(),
                                t: config.t_values[ti],
                                decay: PF_LABEL.to_string(),
                                budget: n as u64,
                                replication: rep,
                                seed,
                                value: err,
                            },
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<_>>, HarnessError>>()?;
    Ok(rows.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Mixing scenario
// ---------------------------------------------------------------------------

fn run_mixing(config: &ExperimentConfig) -> Result<Vec<KeyedRow>, HarnessError> {
    let model = config.model.as_ref().expect("validated");
    let id = model_id(model);
    let root = config.seed;

    let mut cells = Vec::new();
    for (ti, &t) in config.t_values.iter().enumerate() {
        for (di, &decay) in config.decays.iter().enumerate() {
            for rep in 0..config.replications {
                cells.push((ti, t, di, decay, rep));
            }
        }
    }

    // The measurement parallelizes internally over chains.
    let mut rows = Vec::with_capacity(cells.len());
    for (ti, t, di, decay, rep) in cells {
        let evidence_seed = mix_seed(root, &[TAG_EVIDENCE, t as u64, rep as u64]);
        let (_, evidence) = simulate(model, t, evidence_seed);
        let seed = mix_seed(root, &[TAG_MIXING, t as u64, decay_tag(decay), rep as u64]);
        let mixing = MixingConfig {
            epsilon: config.mixing.epsilon,
            n_chains: config.mixing.chains,
            max_steps: config.mixing.max_steps,
            seed,
        };
        let report = estimate_mixing_time(
            model,
            &evidence,
            &config.schedule(decay),
            &mixing,
            &adversarial_starts(model.n_states()),
        )?;
        rows.push(KeyedRow {
            key: (ti, di, rep, 0),
            row: Row {
                scenario: config.scenario.name(),
                model_id: id.clone(),
                t,
                decay: decay.to_string(),
                budget: config.mixing.max_steps,
                replication: rep,
                seed,
                value: report.tau_m.map_or(f64::NAN, |tau| tau as f64),
            },
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Switching-KF tracking
// ---------------------------------------------------------------------------

fn run_skf_track(config: &ExperimentConfig) -> Result<Vec<KeyedRow>, HarnessError> {
    let model = config.skf.as_ref().expect("validated");
    let id = skf_model_id(model);
    let root = config.seed;
    let t_max = *config.t_values.last().expect("non-empty");

    enum Job {
        Mcmc { di: usize, bi: usize, rep: usize },
        Pf { ni: usize, rep: usize },
    }
    let mut jobs = Vec::new();
    for di in 0..config.decays.len() {
        for bi in 0..config.budgets.len() {
            for rep in 0..config.replications {
                jobs.push(Job::Mcmc { di, bi, rep });
            }
        }
    }
    for ni in 0..config.particles.len() {
        for rep in 0..config.replications {
            jobs.push(Job::Pf { ni, rep });
        }
    }

    let rows = jobs
        .par_iter()
        .map(|job| {
            let rep = match job {
                Job::Mcmc { rep, .. } | Job::Pf { rep, .. } => *rep,
            };
            let evidence_seed = mix_seed(root, &[TAG_EVIDENCE, rep as u64]);
            let (truth, ys) = skf_simulate(model, t_max, evidence_seed);

            let mut out = Vec::with_capacity(config.t_values.len());
            match *job {
                Job::Mcmc { di, bi, rep } => {
                    let decay = config.decays[di];
                    let budget = config.budgets[bi];
                    let seed =
                        mix_seed(root, &[TAG_ESTIMATOR, decay_tag(decay), budget, rep as u64]);
                    let cfg = SkfChainConfig::new(
                        budget,
                        config.burn_in,
                        config.gap,
                        config.schedule(decay),
                        seed,
                    )
                    .map_err(HarnessError::from)?;
                    let mut chain = SkfChain::new(cfg);
                    let mut next = 0;
                    for (i, &y) in ys.iter().enumerate() {
                        chain.observe(model, y)?;
                        if next < config.t_values.len() && i + 1 == config.t_values[next] {
                            let (mean, _) = chain.estimate()?;
                            out.push(KeyedRow {
                                key: (0, di * config.budgets.len() + bi, next, rep),
                                row: Row {
                                    scenario: config.scenario.name(),
                                    model_id: id.clone(),
                                    t: i + 1,
                                    decay: decay.to_string(),
                                    budget,
                                    replication: rep,
                                    seed,
                                    value: (mean - truth.xs[i]).abs(),
                                },
                            });
                            next += 1;
                        }
                    }
                }
                Job::Pf { ni, rep } => {
                    let n = config.particles[ni];
                    let seed = mix_seed(root, &[TAG_PARTICLE, n as u64, rep as u64]);
                    let mut ps = pf_init(model, n, seed)?;
                    let mut rng = seeded(mix_seed(seed, &[1]));
                    let mut next = 0;
                    let mut collapsed = false;
                    for (i, &y) in ys.iter().enumerate() {
                        if !collapsed {
                            match pf_step(&mut ps, model, &y, &mut rng) {
                                Ok(()) => {}
                                Err(CoreError::ParticleCollapse { .. }) => collapsed = true,
                                Err(e) => return Err(e.into()),
                            }
                        }
                        if next < config.t_values.len() && i + 1 == config.t_values[next] {
                            let value = if collapsed {
                                f64::NAN
                            } else {
                                let (mean, _) = ps.weighted_moments(|s| s.x);
                                (mean - truth.xs[i]).abs()
                            };
                            out.push(KeyedRow {
                                key: (1, ni, next, rep),
                                row: Row {
                                    scenario: config.scenario.name(),
                                    model_id: id.clone(),
                                    t: i + 1,
                                    decay: PF_LABEL.to_string(),
                                    budget: n as u64,
                                    replication: rep,
                                    seed,
                                    value,
                                },
                            });
                            next += 1;
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<_>>, HarnessError>>()?;
    Ok(rows.into_iter().flatten().collect())
}
