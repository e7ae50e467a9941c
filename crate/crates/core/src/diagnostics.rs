//! Mixing diagnostics: total variation distance, the blanket-conditional
//! mixing parameter η, and empirical estimation of the marginal mixing time
//! τ_m — the first sampling step at which the worst-case-over-starts
//! distribution of the last slice is within ε of its true posterior.
//!
//! τ_m is measured, not bounded analytically: R independent chains per start
//! trajectory are stepped in lockstep, and at geometric checkpoints the
//! empirical distribution of X_T across chains is compared against the
//! forward-backward marginal. The geometric grid resolves τ_m up to a factor
//! of 2, which is all the boundedness claims need.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::decay::DecaySchedule;
use crate::dmcmc::{gibbs_conditional, Chain, ChainConfig};
use crate::error::{Error, Result};
use crate::exact::{brute_force_posterior, smooth};
use crate::models::{Belief, DiscreteHMM, Trajectory};
use crate::rng::seeded_stream;

/// Total variation distance ½ Σ |p(x) − q(x)|.
pub fn tv_distance(p: &Belief, q: &Belief) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(tv_slices(p.probs(), q.probs()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Mixing parameter
// ---------------------------------------------------------------------------

/// The mixing parameter η: the largest total variation distance between two
/// interior Gibbs conditionals that share the observation symbol but differ
/// in their blanket states. η = 0 means neighbours carry no information;
/// η = 1 means opposing blankets force disjoint conditionals.
///
/// Blanket combinations with zero total weight (impossible under the model's
/// dynamics) cannot occur in a valid chain and are skipped.
pub fn mixing_parameter(model: &DiscreteHMM) -> f64 {
    let symbols: Vec<usize> = (0..model.n_obs()).collect();
    mixing_parameter_over(model, &symbols)
}

/// The data-dependent variant of η, maximizing only over symbols that occur
/// in the given evidence.
pub fn mixing_parameter_data_dependent(model: &DiscreteHMM, evidence: &[usize]) -> Result<f64> {
    model.check_evidence(evidence)?;
    let mut symbols: Vec<usize> = evidence.to_vec();
    symbols.sort_unstable();
    symbols.dedup();
    Ok(mixing_parameter_over(model, &symbols))
}

fn mixing_parameter_over(model: &DiscreteHMM, symbols: &[usize]) -> f64 {
    let n = model.n_states();
    let mut eta: f64 = 0.0;
    for &y in symbols {
        let mut conditionals = Vec::with_capacity(n * n);
        for xp in 0..n {
            for xn in 0..n {
                if let Ok(b) = gibbs_conditional(model, 2, Some(xp), Some(xn), y) {
                    conditionals.push(b);
                }
            }
        }
        for i in 0..conditionals.len() {
            for j in i + 1..conditionals.len() {
                eta = eta.max(tv_slices(conditionals[i].probs(), conditionals[j].probs()));
            }
        }
    }
    eta
}

// ---------------------------------------------------------------------------
// Marginal mixing time
// ---------------------------------------------------------------------------

/// Where the chains of one mixing run begin.
///
/// The true worst case ranges over all `n_states^T` trajectories; constant
/// trajectories approximate it because they maximize disagreement with the
/// smoothed posterior in the models generated here. `ExactPosterior` starts
/// every chain at an independent draw from the brute-force posterior and
/// serves as a stationarity control: its TV curve must start below ε.
#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    /// Every chain starts at the constant trajectory (k, k, …, k).
    Constant(usize),
    /// Every chain starts at this explicit trajectory.
    Trajectory(Trajectory),
    /// Every chain starts at one shared uniformly random trajectory.
    RandomUniform,
    /// Each chain starts at its own exact-posterior draw.
    ExactPosterior,
}

impl StartSpec {
    pub fn label(&self) -> String {
        match self {
            StartSpec::Constant(k) => format!("const-{k}"),
            StartSpec::Trajectory(_) => "fixed".to_string(),
            StartSpec::RandomUniform => "random".to_string(),
            StartSpec::ExactPosterior => "posterior".to_string(),
        }
    }
}

/// The adversarial start set: one constant trajectory per state plus one
/// shared random trajectory.
pub fn adversarial_starts(n_states: usize) -> Vec<StartSpec> {
    let mut starts: Vec<StartSpec> = (0..n_states).map(StartSpec::Constant).collect();
    starts.push(StartSpec::RandomUniform);
    starts
}

/// Parameters of a mixing-time measurement.
#[derive(Debug, Clone, Copy)]
pub struct MixingConfig {
    /// Target accuracy ε ∈ (0, 1).
    pub epsilon: f64,
    /// Independent chains per start; 200+ recommended, 1000 typical.
    pub n_chains: usize,
    /// Step budget per chain; checkpoints are powers of two up to here.
    pub max_steps: u64,
    /// Root seed; chains get split streams, so results do not depend on
    /// execution interleaving.
    pub seed: u64,
}

/// TV trajectory of one start.
#[derive(Debug, Clone)]
pub struct StartCurve {
    pub label: String,
    pub tv: Vec<(u64, f64)>,
}

/// Result of a mixing-time measurement.
#[derive(Debug, Clone)]
pub struct MixingReport {
    pub epsilon: f64,
    /// Estimation bias floor √(n_states / R): the expected TV between an
    /// empirical distribution over R chains and its own target. ε should sit
    /// above it.
    pub bias_floor: f64,
    pub n_chains: usize,
    /// First checkpoint with worst-case TV below ε, confirmed below ε at the
    /// following checkpoint to damp estimation noise. `None` = not mixed
    /// within budget (a value, not a fault).
    pub tau_m: Option<u64>,
    /// Worst-case TV across starts at each checkpoint.
    pub per_step_tv: Vec<(u64, f64)>,
    /// Per-start TV curves, labelled by start descriptor.
    pub per_start: Vec<StartCurve>,
}

impl MixingReport {
    /// CSV rendering: `start_label,step,tv_estimate` rows for every start and
    /// checkpoint, then a summary row `tau_m,<steps or empty>,<epsilon>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("start_label,step,tv_estimate\n");
        for curve in &self.per_start {
            for &(step, tv) in &curve.tv {
                writeln!(out, "{},{},{}", curve.label, step, tv).unwrap();
            }
        }
        match self.tau_m {
            Some(tau) => writeln!(out, "tau_m,{},{}", tau, self.epsilon).unwrap(),
            None => writeln!(out, "tau_m,,{}", self.epsilon).unwrap(),
        }
        out
    }
}

/// Measures the marginal mixing time of a schedule on one model/evidence
/// pair. For each start, `n_chains` chains run in lockstep (concurrently;
/// per-chain RNG streams are pre-split so the result is a pure function of
/// the seed), and the empirical last-slice distribution is checked against
/// the smoothed marginal at checkpoints 1, 2, 4, ….
pub fn estimate_mixing_time(
    model: &DiscreteHMM,
    evidence: &[usize],
    schedule: &DecaySchedule,
    config: &MixingConfig,
    starts: &[StartSpec],
) -> Result<MixingReport> {
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {}",
            config.epsilon
        )));
    }
    if config.n_chains == 0 || starts.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one chain and one start".into(),
        ));
    }
    if evidence.is_empty() {
        return Err(Error::InvalidParameter(
            "mixing time needs a non-empty evidence sequence".into(),
        ));
    }

    let target = smooth(model, evidence)?;
    let target_last = target.last().expect("non-empty evidence").clone();
    let t_len = evidence.len();
    let n = model.n_states();

    let mut checkpoints = Vec::new();
    let mut s = 1u64;
    while s <= config.max_steps {
        checkpoints.push(s);
        s *= 2;
    }

    // Starts draw their trajectories from streams far above the per-chain
    // range so the two never collide.
    let start_stream = |i: usize| u64::MAX - i as u64;

    let mut per_start = Vec::with_capacity(starts.len());
    for (si, start) in starts.iter().enumerate() {
        let mut inits: Vec<Trajectory> = Vec::with_capacity(config.n_chains);
        match start {
            StartSpec::Constant(k) => {
                if *k >= n {
                    return Err(Error::InvalidParameter(format!(
                        "constant start state {k} out of range for {n} states"
                    )));
                }
                inits.resize(config.n_chains, vec![*k; t_len]);
            }
            StartSpec::Trajectory(traj) => {
                inits.resize(config.n_chains, traj.clone());
            }
            StartSpec::RandomUniform => {
                let mut rng = seeded_stream(config.seed, start_stream(si));
                let traj: Trajectory = (0..t_len)
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..n))
                    .collect();
                inits.resize(config.n_chains, traj);
            }
            StartSpec::ExactPosterior => {
                let posterior = brute_force_posterior(model, evidence)?;
                let mut rng = seeded_stream(config.seed, start_stream(si));
                for _ in 0..config.n_chains {
                    inits.push(posterior.sample(&mut rng));
                }
            }
        }

        let mut chains = inits
            .into_iter()
            .enumerate()
            .map(|(c, traj)| {
                let cfg =
                    ChainConfig::new(1, 0, schedule.clone(), config.seed)?.with_stream(c as u64);
                Chain::with_trajectory(model, evidence, traj, cfg)
            })
            .collect::<Result<Vec<Chain>>>()?;

        let mut curve = Vec::with_capacity(checkpoints.len());
        let mut done = 0u64;
        for &cp in &checkpoints {
            let delta = cp - done;
            chains.par_iter_mut().try_for_each(|chain| {
                for _ in 0..delta {
                    chain.step(model)?;
                }
                Ok::<(), Error>(())
            })?;
            done = cp;

            let mut histogram = vec![0.0f64; n];
            for chain in &chains {
                histogram[chain.last_state().expect("non-empty chain")] += 1.0;
            }
            let empirical = Belief::from_weights(&histogram)?;
            curve.push((cp, tv_slices(empirical.probs(), target_last.probs())));
        }
        per_start.push(StartCurve {
            label: start.label(),
            tv: curve,
        });
    }

    let per_step_tv: Vec<(u64, f64)> = checkpoints
        .iter()
        .enumerate()
        .map(|(i, &cp)| {
            let worst = per_start.iter().map(|c| c.tv[i].1).fold(0.0f64, f64::max);
            (cp, worst)
        })
        .collect();

    let tau_m = per_step_tv
        .windows(2)
        .find(|w| w[0].1 < config.epsilon && w[1].1 < config.epsilon)
        .map(|w| w[0].0);

    Ok(MixingReport {
        epsilon: config.epsilon,
        bias_floor: (n as f64 / config.n_chains as f64).sqrt(),
        n_chains: config.n_chains,
        tau_m,
        per_step_tv,
        per_start,
    })
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::DecayVariant;
    use crate::models::{make_random_hmm, simulate, DiscreteHMM};

    fn coin_hmm() -> DiscreteHMM {
        DiscreteHMM::from_tables(
            2,
            2,
            vec![0.5, 0.5],
            vec![0.7, 0.3, 0.3, 0.7],
            vec![0.8, 0.2, 0.2, 0.8],
        )
        .unwrap()
    }

    #[test]
    fn tv_basics() {
        let p = Belief::new(vec![0.5, 0.5]).unwrap();
        let q = Belief::new(vec![0.9, 0.1]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.4).abs() < 1e-15);
        let a = Belief::point_mass(3, 0);
        let b = Belief::point_mass(3, 2);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let c = Belief::uniform(2);
        assert!(matches!(
            tv_distance(&a, &c),
            Err(Error::LengthMismatch { left: 3, right: 2 })
        ));
    }

    #[test]
    fn tv_is_a_metric_on_random_triples() {
        let mut rng = crate::rng::seeded(17);
        for _ in 0..200 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                let w: Vec<f64> = (0..4).map(|_| rand::Rng::gen::<f64>(rng) + 1e-3).collect();
                Belief::from_weights(&w).unwrap()
            };
            let p = draw(&mut rng);
            let q = draw(&mut rng);
            let r = draw(&mut rng);
            let pq = tv_distance(&p, &q).unwrap();
            let qp = tv_distance(&q, &p).unwrap();
            let pr = tv_distance(&p, &r).unwrap();
            let rq = tv_distance(&r, &q).unwrap();
            assert!((pq - qp).abs() < 1e-15);
            assert!(pq <= pr + rq + 1e-12);
            assert!((0.0..=1.0).contains(&pq));
            assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn eta_zero_for_uniform_transitions() {
        let m = make_random_hmm(3, 3, 0.0, 0.7, 5).unwrap();
        assert!(mixing_parameter(&m) < 1e-12);
    }

    #[test]
    fn eta_one_for_deterministic_permutation() {
        let m = make_random_hmm(2, 2, 1.0, 0.5, 8).unwrap();
        assert!((mixing_parameter(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_of_coin_model() {
        // Enumerating the 2·2·2 blanket configurations per symbol puts the
        // extremes at (0.956…, 0.044…) and (0.424…, 0.576…).
        let eta = mixing_parameter(&coin_hmm());
        assert!((eta - 0.533).abs() < 1e-3, "eta {eta}");
    }

    #[test]
    fn eta_invariant_under_state_relabeling() {
        let m = make_random_hmm(3, 4, 0.6, 0.4, 23).unwrap();
        let p = m.params();
        // Swap states 0 and 2 everywhere.
        let perm = [2usize, 1, 0];
        let mut prior = vec![0.0; 3];
        let mut transition = vec![0.0; 9];
        let mut observation = vec![0.0; 12];
        for i in 0..3 {
            prior[perm[i]] = p.prior[i];
            for j in 0..3 {
                transition[perm[i] * 3 + perm[j]] = p.transition[i * 3 + j];
            }
            for y in 0..4 {
                observation[perm[i] * 4 + y] = p.observation[i * 4 + y];
            }
        }
        let relabeled = DiscreteHMM::from_tables(3, 4, prior, transition, observation).unwrap();
        assert!((mixing_parameter(&m) - mixing_parameter(&relabeled)).abs() < 1e-12);
    }

    #[test]
    fn data_dependent_eta_is_no_larger() {
        let m = coin_hmm();
        let full = mixing_parameter(&m);
        let restricted = mixing_parameter_data_dependent(&m, &[0, 0, 0]).unwrap();
        assert!(restricted <= full + 1e-15);
    }

    #[test]
    fn zero_budget_reports_not_mixed() {
        let m = coin_hmm();
        let cfg = MixingConfig {
            epsilon: 0.05,
            n_chains: 10,
            max_steps: 0,
            seed: 1,
        };
        let report = estimate_mixing_time(
            &m,
            &[0, 1, 0],
            &DecaySchedule::quadratic(),
            &cfg,
            &adversarial_starts(2),
        )
        .unwrap();
        assert_eq!(report.tau_m, None);
        assert!(report.per_step_tv.is_empty());
    }

    #[test]
    fn uninformative_model_mixes_within_ten_steps() {
        // All rows uniform: the first resample of the last slice draws
        // exactly from its true conditional, independent of the blanket.
        let m = DiscreteHMM::from_tables(
            2,
            2,
            vec![0.5, 0.5],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        for t_len in [10usize, 100, 1000] {
            let evidence = vec![0; t_len];
            let cfg = MixingConfig {
                epsilon: 0.05,
                n_chains: 500,
                max_steps: 16,
                seed: 42,
            };
            let report = estimate_mixing_time(
                &m,
                &evidence,
                &DecaySchedule::quadratic(),
                &cfg,
                &adversarial_starts(2),
            )
            .unwrap();
            let tau = report.tau_m.expect("should mix");
            assert!(tau <= 10, "T={t_len}: tau {tau}");
        }
    }

    #[test]
    fn posterior_initialized_chains_start_mixed() {
        let m = coin_hmm();
        let (_, evidence) = simulate(&m, 6, 3);
        let cfg = MixingConfig {
            epsilon: 0.05,
            n_chains: 1000,
            max_steps: 4,
            seed: 7,
        };
        let report = estimate_mixing_time(
            &m,
            &evidence,
            &DecaySchedule::quadratic(),
            &cfg,
            &[StartSpec::ExactPosterior],
        )
        .unwrap();
        assert_eq!(report.tau_m, Some(1), "curve {:?}", report.per_step_tv);
        assert!(report.per_step_tv[0].1 < 0.05);
    }

    #[test]
    fn mixing_determinism_and_csv_shape() {
        let m = coin_hmm();
        let (_, evidence) = simulate(&m, 8, 5);
        let cfg = MixingConfig {
            epsilon: 0.1,
            n_chains: 50,
            max_steps: 32,
            seed: 9,
        };
        let sched = DecaySchedule::new(DecayVariant::Uniform, None).unwrap();
        let a = estimate_mixing_time(&m, &evidence, &sched, &cfg, &adversarial_starts(2)).unwrap();
        let b = estimate_mixing_time(&m, &evidence, &sched, &cfg, &adversarial_starts(2)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());

        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("start_label,step,tv_estimate"));
        // 3 starts × 6 checkpoints + summary row.
        assert_eq!(csv.lines().count(), 1 + 3 * 6 + 1);
        assert!(csv.lines().last().unwrap().starts_with("tau_m,"));
        assert!((a.bias_floor - (2.0f64 / 50.0).sqrt()).abs() < 1e-12);
    }
}
