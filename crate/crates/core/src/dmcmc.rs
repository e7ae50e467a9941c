//! The decayed MCMC filtering engine: a Gibbs sampler over complete state
//! trajectories whose slice-selection distribution is a decay schedule, with
//! online evidence ingestion and count-based belief extraction.
//!
//! One sampling step picks a timeslice t from the schedule, resamples X_t
//! from its Markov-blanket conditional
//!
//! ```text
//! P(X_t | x_{t-1}, x_{t+1}, y_t) ∝ P(X_t | x_{t-1}) · P(y_t | X_t) · P(x_{t+1} | X_t)
//! ```
//!
//! and then tallies the current value of the *last* slice, whatever t was.
//! The belief estimate is the normalized tally. Storage is O(T + n_states)
//! regardless of how many steps are taken.
//!
//! A chain is an isolated value: many chains may run concurrently against
//! one shared (immutable) model, each with its own RNG stream.

use rand_chacha::ChaCha8Rng;

use crate::decay::DecaySchedule;
use crate::error::{Error, Result};
use crate::models::{Belief, DiscreteHMM, EvidenceSequence, Trajectory};
use crate::rng::{sample_weighted, seeded_stream};

/// The single-slice Gibbs conditional.
///
/// `t` is 1-based; `x_prev` must be absent exactly when t = 1 (the prior
/// replaces the incoming transition factor) and `x_next` absent exactly when
/// t = T. With both absent this is the T = 1 conditional ∝ prior · obs.
pub fn gibbs_conditional(
    model: &DiscreteHMM,
    t: usize,
    x_prev: Option<usize>,
    x_next: Option<usize>,
    y: usize,
) -> Result<Belief> {
    model.check_symbol(t, y)?;
    let mut weights = vec![0.0; model.n_states()];
    let total = conditional_weights(model, x_prev, x_next, y, &mut weights);
    if total <= 0.0 {
        return Err(Error::InconsistentBlanket { t });
    }
    Belief::from_weights(&weights)
}

/// Fills `weights` with the unnormalized conditional and returns their sum.
#[inline]
fn conditional_weights(
    model: &DiscreteHMM,
    x_prev: Option<usize>,
    x_next: Option<usize>,
    y: usize,
    weights: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for (x, weight) in weights.iter_mut().enumerate() {
        let incoming = match x_prev {
            Some(xp) => model.transition(xp, x),
            None => model.prior()[x],
        };
        let outgoing = match x_next {
            Some(xn) => model.transition(x, xn),
            None => 1.0,
        };
        *weight = incoming * model.observation(x, y) * outgoing;
        total += *weight;
    }
    total
}

/// Sampler configuration: the per-update step budget S, burn-in B < S, the
/// decay schedule, and the RNG seed/stream.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub steps_per_update: u64,
    pub burn_in: u64,
    pub schedule: DecaySchedule,
    pub seed: u64,
    pub stream: u64,
}

impl ChainConfig {
    pub fn new(
        steps_per_update: u64,
        burn_in: u64,
        schedule: DecaySchedule,
        seed: u64,
    ) -> Result<Self> {
        if steps_per_update == 0 {
            return Err(Error::InvalidParameter(
                "steps_per_update must be positive".into(),
            ));
        }
        if burn_in >= steps_per_update {
            return Err(Error::InvalidParameter(format!(
                "burn_in ({burn_in}) must be smaller than steps_per_update ({steps_per_update})"
            )));
        }
        Ok(Self {
            steps_per_update,
            burn_in,
            schedule,
            seed,
            stream: 0,
        })
    }

    /// Selects an independent RNG stream, for running many chains off one
    /// root seed.
    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// A decayed-MCMC chain: the current trajectory, the evidence it conditions
/// on, and the tally of last-slice values accumulated since the most recent
/// evidence arrival.
#[derive(Debug, Clone)]
pub struct Chain {
    trajectory: Trajectory,
    evidence: EvidenceSequence,
    counts: Vec<u64>,
    steps_taken: u64,
    steps_per_update: u64,
    burn_in: u64,
    schedule: DecaySchedule,
    rng: ChaCha8Rng,
    scratch: Vec<f64>,
}

impl Chain {
    /// An empty chain (T = 0) ready to `observe` evidence.
    pub fn new(model: &DiscreteHMM, config: ChainConfig) -> Self {
        let n = model.n_states();
        Self {
            trajectory: Vec::new(),
            evidence: Vec::new(),
            counts: vec![0; n],
            steps_taken: 0,
            steps_per_update: config.steps_per_update,
            burn_in: config.burn_in,
            schedule: config.schedule,
            rng: seeded_stream(config.seed, config.stream),
            scratch: vec![0.0; n],
        }
    }

    /// A chain loaded with evidence, its trajectory initialized by sampling
    /// each slice in order from the local conditional
    /// normalize(P(x | x_{t-1}) · P(y_t | x)). No sampling steps are taken
    /// and no counts accumulate; callers drive `step` themselves.
    pub fn with_evidence(
        model: &DiscreteHMM,
        evidence: &[usize],
        config: ChainConfig,
    ) -> Result<Self> {
        model.check_evidence(evidence)?;
        let mut chain = Self::new(model, config);
        for &y in evidence {
            let x = chain.init_slice(model, y)?;
            chain.trajectory.push(x);
            chain.evidence.push(y);
        }
        Ok(chain)
    }

    /// A chain starting from an explicit trajectory, e.g. an adversarial or
    /// exact-posterior start for mixing diagnostics.
    pub fn with_trajectory(
        model: &DiscreteHMM,
        evidence: &[usize],
        trajectory: Trajectory,
        config: ChainConfig,
    ) -> Result<Self> {
        model.check_evidence(evidence)?;
        if trajectory.len() != evidence.len() {
            return Err(Error::LengthMismatch {
                left: trajectory.len(),
                right: evidence.len(),
            });
        }
        if let Some(&x) = trajectory.iter().find(|&&x| x >= model.n_states()) {
            return Err(Error::InvalidParameter(format!(
                "trajectory value {x} out of range for {} states",
                model.n_states()
            )));
        }
        let mut chain = Self::new(model, config);
        chain.trajectory = trajectory;
        chain.evidence = evidence.to_vec();
        Ok(chain)
    }

    /// Draws an initial value for a freshly appended slice from
    /// normalize(P(x | x_T) · P(y | x)) — or prior · obs when the chain is
    /// empty. Including the likelihood cuts the transient compared to the
    /// bare transition; any initialization is asymptotically correct.
    fn init_slice(&mut self, model: &DiscreteHMM, y: usize) -> Result<usize> {
        let x_prev = self.trajectory.last().copied();
        let total = conditional_weights(model, x_prev, None, y, &mut self.scratch);
        if total <= 0.0 {
            return Err(Error::InconsistentBlanket {
                t: self.trajectory.len() + 1,
            });
        }
        Ok(sample_weighted(&mut self.rng, &self.scratch, total))
    }

    /// One Gibbs update: draw t from the decay schedule, resample X_t from
    /// its blanket conditional, and tally the current last-slice value.
    pub fn step(&mut self, model: &DiscreteHMM) -> Result<()> {
        let t_len = self.trajectory.len();
        if t_len == 0 {
            return Err(Error::EmptyChain);
        }
        let t = self.schedule.sample_timeslice(t_len, &mut self.rng);
        let idx = t - 1;
        let x_prev = if idx > 0 {
            Some(self.trajectory[idx - 1])
        } else {
            None
        };
        let x_next = if idx + 1 < t_len {
            Some(self.trajectory[idx + 1])
        } else {
            None
        };
        let total =
            conditional_weights(model, x_prev, x_next, self.evidence[idx], &mut self.scratch);
        if total <= 0.0 {
            return Err(Error::InconsistentBlanket { t });
        }
        self.trajectory[idx] = sample_weighted(&mut self.rng, &self.scratch, total);

        self.steps_taken += 1;
        if self.steps_taken > self.burn_in {
            self.counts[self.trajectory[t_len - 1]] += 1;
        }
        Ok(())
    }

    /// Online update for one new observation: appends the slice, resets the
    /// tally and burn-in window, and runs exactly `steps_per_update` sampling
    /// steps. Cost is O(steps_per_update), independent of T apart from the
    /// amortized schedule rebuild.
    ///
    /// Counts reset because the old tally estimates the belief for the
    /// previous history length, not the new one.
    pub fn observe(&mut self, model: &DiscreteHMM, y: usize) -> Result<()> {
        model.check_symbol(self.trajectory.len() + 1, y)?;
        let x = self.init_slice(model, y)?;
        self.trajectory.push(x);
        self.evidence.push(y);
        self.reset_counts();
        for _ in 0..self.steps_per_update {
            self.step(model)?;
        }
        Ok(())
    }

    /// The belief estimate: post-burn-in tallies of X_T, normalized.
    pub fn estimate(&self) -> Result<Belief> {
        if self.counts.iter().all(|&c| c == 0) {
            return Err(Error::NoSamples);
        }
        let weights: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        Belief::from_weights(&weights)
    }

    /// Clears the tally and restarts the burn-in window.
    pub fn reset_counts(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.steps_taken = 0;
    }

    pub fn t_len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn trajectory(&self) -> &[usize] {
        &self.trajectory
    }

    pub fn evidence(&self) -> &[usize] {
        &self.evidence
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sampling steps since the last evidence arrival (or counts reset).
    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// The current value of the last slice, if any.
    pub fn last_state(&self) -> Option<usize> {
        self.trajectory.last().copied()
    }
}

// ===========================================================================
// Tests
// ===========================================================================
