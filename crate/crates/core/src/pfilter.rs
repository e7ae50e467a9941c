//! Bootstrap particle filter baseline.
//!
//! Works against any model exposing the simulable contract — initial-state
//! sampling, transition sampling, and an observation likelihood — which both
//! the discrete HMM and the switching Kalman filter implement. Every step
//! propagates, reweights, and systematic-resamples back to N equally
//! weighted particles. Systematic resampling is used because it has the
//! lowest resampling variance of the O(N) schemes.
//!
//! A total weight of zero is reported as a particle-collapse error with the
//! offending timestep rather than papered over; divergence is a real failure
//! mode of the bootstrap filter and the harness wants to exhibit it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{Belief, DiscreteHMM};
use crate::rng::{sample_categorical, seeded};

/// The generative contract a model must expose for bootstrap filtering.
pub trait Simulable {
    type State: Clone;
    type Obs: ?Sized;

    /// Draw from the initial-state distribution.
    fn sample_initial<R: Rng>(&self, rng: &mut R) -> Self::State;

    /// Draw a successor state from the transition model.
    fn sample_transition<R: Rng>(&self, state: &Self::State, rng: &mut R) -> Self::State;

    /// The observation likelihood p(obs | state).
    fn observation_likelihood(&self, state: &Self::State, obs: &Self::Obs) -> f64;
}

impl Simulable for DiscreteHMM {
    type State = usize;
    type Obs = usize;

    fn sample_initial<R: Rng>(&self, rng: &mut R) -> usize {
        sample_categorical(rng, self.prior())
    }

    fn sample_transition<R: Rng>(&self, state: &usize, rng: &mut R) -> usize {
        sample_categorical(rng, self.transition_row(*state))
    }

    fn observation_likelihood(&self, state: &usize, obs: &usize) -> f64 {
        self.observation(*state, *obs)
    }
}

/// A weighted particle population. `N` stays constant across steps and the
/// weights sum to 1 after every update.
#[derive(Debug, Clone)]
pub struct ParticleSet<S> {
    particles: Vec<S>,
    weights: Vec<f64>,
    t: usize,
}

impl<S> ParticleSet<S> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Observations absorbed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Weighted mean and variance of a scalar function of the state.
    pub fn weighted_moments(&self, f: impl Fn(&S) -> f64) -> (f64, f64) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            let v = f(p);
            mean += w * v;
            second += w * v * v;
        }
        (mean, (second - mean * mean).max(0.0))
    }
}

impl ParticleSet<usize> {
    /// The weighted empirical distribution over discrete states.
    pub fn belief(&self, n_states: usize) -> Result<Belief> {
        let mut weights = vec![0.0; n_states];
        for (&p, &w) in self.particles.iter().zip(&self.weights) {
            weights[p] += w;
        }
        Belief::from_weights(&weights)
    }
}

/// N i.i.d. draws from the model prior with uniform weights.
pub fn pf_init<M: Simulable>(model: &M, n: usize, seed: u64) -> Result<ParticleSet<M::State>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "particle count must be positive".into(),
        ));
    }
    let mut rng = seeded(seed);
    let particles = (0..n).map(|_| model.sample_initial(&mut rng)).collect();
    Ok(ParticleSet {
        particles,
        weights: vec![1.0 / n as f64; n],
        t: 0,
    })
}

/// One bootstrap step: propagate every particle through the transition,
/// weight by the observation likelihood, normalize, and systematic-resample
/// back to equal weights.
pub fn pf_step<M: Simulable, R: Rng>(
    ps: &mut ParticleSet<M::State>,
    model: &M,
    obs: &M::Obs,
    rng: &mut R,
) -> Result<()> {
    let mut total = 0.0;
    for (p, w) in ps.particles.iter_mut().zip(ps.weights.iter_mut()) {
        *p = model.sample_transition(p, rng);
        *w = model.observation_likelihood(p, obs);
        total += *w;
    }
    if total <= 0.0 {
        return Err(Error::ParticleCollapse { t: ps.t + 1 });
    }
    for w in ps.weights.iter_mut() {
        *w /= total;
    }
    ps.particles = systematic_resample(&ps.particles, &ps.weights, rng);
    let n = ps.particles.len();
    ps.weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
    ps.t += 1;
    Ok(())
}

/// Systematic resampling: one uniform offset, N evenly spaced pointers.
/// E[copies of particle i] = N · w_i.
fn systematic_resample<S: Clone, R: Rng>(particles: &[S], weights: &[f64], rng: &mut R) -> Vec<S> {
    let n = particles.len();
    let step = 1.0 / n as f64;
    let mut pointer = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut j = 0;
    for _ in 0..n {
        while pointer > acc && j + 1 < n {
            j += 1;
            acc += weights[j];
        }
        out.push(particles[j].clone());
        pointer += step;
    }
    out
}

// ===========================================================================
// Tests
// ===========================================================================
