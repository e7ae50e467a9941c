//! Switching Kalman filter: a scalar random walk whose increment is chosen
//! by a discrete switch variable, observed through Gaussian noise, plus its
//! decayed-MCMC treatment.
//!
//! ```text
//! X_t = X_{t-1} + S_t + v_t,   v_t ~ N(0, σ_v²)
//! Y_t = X_t + w_t,             w_t ~ N(0, σ_w²)
//! ```
//!
//! The Gibbs conditionals are closed-form: X_t given its blanket is the
//! precision-weighted product of up to three Gaussian factors, and S_t is a
//! small categorical. Switches are i.i.d. by default; an optional row-
//! stochastic matrix gives them Markov dynamics.
//!
//! Conventions at the boundary: the X_1 prior is N(x1_mean, x1_std²) with no
//! dependence on S_1, so S_1 carries only its prior weight in its
//! conditional. The generative simulation applies the first switch to an
//! unobserved anchor drawn from the X_1 prior, so increments act from the
//! first slice onward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::decay::DecaySchedule;
use crate::error::{Error, Result};
use crate::models::Belief;
use crate::pfilter::Simulable;
use crate::rng::{sample_categorical, sample_weighted, seeded, seeded_stream};

/// Model parameters. Noise standard deviations may be zero only for
/// degenerate simulation; the Gibbs conditionals require them positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingKF {
    switch_values: Vec<f64>,
    switch_prior: Vec<f64>,
    switch_markov: Option<Vec<f64>>,
    sigma_v: f64,
    sigma_w: f64,
    x1_mean: f64,
    x1_std: f64,
}

impl SwitchingKF {
    pub fn new(
        switch_values: Vec<f64>,
        switch_prior: Vec<f64>,
        switch_markov: Option<Vec<f64>>,
        sigma_v: f64,
        sigma_w: f64,
        x1_mean: f64,
        x1_std: f64,
    ) -> Result<Self> {
        let k = switch_values.len();
        if k == 0 {
            return Err(Error::InvalidParameter("no switch values".into()));
        }
        if switch_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "switch values must be finite".into(),
            ));
        }
        check_categorical("switch_prior", &switch_prior, k)?;
        if let Some(markov) = &switch_markov {
            if markov.len() != k * k {
                return Err(Error::InvalidParameter(format!(
                    "switch_markov has {} entries, expected {}",
                    markov.len(),
                    k * k
                )));
            }
            for r in 0..k {
                check_categorical("switch_markov row", &markov[r * k..(r + 1) * k], k)?;
            }
        }
        for (name, s) in [
            ("sigma_v", sigma_v),
            ("sigma_w", sigma_w),
            ("x1_std", x1_std),
        ] {
            if s < 0.0 || !s.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative and finite (got {s})"
                )));
            }
        }
        Ok(Self {
            switch_values,
            switch_prior,
            switch_markov,
            sigma_v,
            sigma_w,
            x1_mean,
            x1_std,
        })
    }

    pub fn n_switches(&self) -> usize {
        self.switch_values.len()
    }

    pub fn switch_values(&self) -> &[f64] {
        &self.switch_values
    }

    pub fn switch_prior(&self) -> &[f64] {
        &self.switch_prior
    }

    pub fn switch_markov(&self) -> Option<&[f64]> {
        self.switch_markov.as_deref()
    }

    pub fn sigma_v(&self) -> f64 {
        self.sigma_v
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn x1_mean(&self) -> f64 {
        self.x1_mean
    }

    pub fn x1_std(&self) -> f64 {
        self.x1_std
    }

    fn value(&self, s: usize) -> f64 {
        self.switch_values[s]
    }

    /// P(s_next = · | s_prev): the Markov row if configured, else the prior.
    fn switch_step_probs(&self, s_prev: usize) -> &[f64] {
        match &self.switch_markov {
            Some(m) => {
                let k = self.n_switches();
                &m[s_prev * k..(s_prev + 1) * k]
            }
            None => &self.switch_prior,
        }
    }
}

fn check_categorical(name: &str, probs: &[f64], expected_len: usize) -> Result<()> {
    if probs.len() != expected_len {
        return Err(Error::InvalidParameter(format!(
            "{name} has {} entries, expected {expected_len}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidParameter(format!("{name} has a bad entry")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > crate::models::PROB_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{name} sums to {sum}")));
    }
    Ok(())
}

/// A sampled hybrid path: continuous positions and switch indices of equal
/// length.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub xs: Vec<f64>,
    pub ss: Vec<usize>,
}

impl HybridTrajectory {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn gauss<R: Rng>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        mean
    } else {
        Normal::new(mean, std)
            .expect("std is non-negative")
            .sample(rng)
    }
}

/// Draws a hybrid trajectory and its observations. The first switch acts on
/// an anchor drawn from the X_1 prior, so with zero noise, a point-mass
/// anchor at 0, and a single switch value of 1 the positions are 1, 2, …, T.
pub fn skf_simulate(model: &SwitchingKF, t_len: usize, seed: u64) -> (HybridTrajectory, Vec<f64>) {
    let mut rng = seeded(seed);
    let mut xs = Vec::with_capacity(t_len);
    let mut ss = Vec::with_capacity(t_len);
    let mut ys = Vec::with_capacity(t_len);
    let mut x_prev = gauss(&mut rng, model.x1_mean, model.x1_std);
    for t in 0..t_len {
        let s = if t == 0 {
            sample_categorical(&mut rng, &model.switch_prior)
        } else {
            sample_categorical(&mut rng, model.switch_step_probs(ss[t - 1]))
        };
        let x = gauss(&mut rng, x_prev + model.value(s), model.sigma_v);
        ys.push(gauss(&mut rng, x, model.sigma_w));
        xs.push(x);
        ss.push(s);
        x_prev = x;
    }
    (HybridTrajectory { xs, ss }, ys)
}

/// The Gaussian conditional for X_t given its blanket, as (mean, std).
///
/// Interior slices combine three unit factors at precisions 1/σ_v², 1/σ_v²,
/// 1/σ_w²; the final slice drops the outgoing factor; the first slice swaps
/// the incoming transition factor for the X_1 prior. Arguments mirror the
/// blanket: `x_prev`/`s_t` describe the incoming edge, `x_next`/`s_next` the
/// outgoing one, and both optional pairs must be present or absent together.
pub fn skf_cond_x(
    model: &SwitchingKF,
    t: usize,
    x_prev: Option<f64>,
    x_next: Option<f64>,
    s_t: usize,
    s_next: Option<usize>,
    y_t: f64,
) -> (f64, f64) {
    debug_assert_eq!(x_prev.is_none(), t == 1);
    debug_assert_eq!(x_next.is_some(), s_next.is_some());
    let var_v = model.sigma_v * model.sigma_v;
    let var_w = model.sigma_w * model.sigma_w;

    let (mut precision, mut weighted) = match x_prev {
        Some(xp) => (1.0 / var_v, (xp + model.value(s_t)) / var_v),
        None => {
            let var1 = model.x1_std * model.x1_std;
            (1.0 / var1, model.x1_mean / var1)
        }
    };
    precision += 1.0 / var_w;
    weighted += y_t / var_w;
    if let (Some(xn), Some(sn)) = (x_next, s_next) {
        precision += 1.0 / var_v;
        weighted += (xn - model.value(sn)) / var_v;
    }
    (weighted / precision, (1.0 / precision).sqrt())
}

/// The categorical conditional for S_t given its blanket.
///
/// Weight ∝ P(s | s_prev or prior) · N(x_t − x_prev; value(s), σ_v²)
/// [· P(s_next | s) under Markov switches]. At t = 1 there is no x factor:
/// the first switch carries only its prior weight.
pub fn skf_cond_s(
    model: &SwitchingKF,
    t: usize,
    s_prev: Option<usize>,
    s_next: Option<usize>,
    x_t: f64,
    x_prev: Option<f64>,
) -> Result<Belief> {
    debug_assert_eq!(x_prev.is_none(), t == 1);
    let k = model.n_switches();
    let var_v = model.sigma_v * model.sigma_v;
    let base: &[f64] = match s_prev {
        Some(sp) => model.switch_step_probs(sp),
        None => &model.switch_prior,
    };
    let mut weights = vec![0.0; k];
    for s in 0..k {
        let mut w = base[s];
        if let Some(xp) = x_prev {
            let d = x_t - xp - model.value(s);
            w *= (-d * d / (2.0 * var_v)).exp();
        }
        if model.switch_markov.is_some() {
            if let Some(sn) = s_next {
                w *= model.switch_step_probs(s)[sn];
            }
        }
        weights[s] = w;
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InconsistentBlanket { t });
    }
    Belief::from_weights(&weights)
}

/// Sampler configuration for the hybrid chain. `gap` records the running
/// tally only every `gap`-th post-burn-in step.
#[derive(Debug, Clone)]
pub struct SkfChainConfig {
    pub steps_per_update: u64,
    pub burn_in: u64,
    pub gap: u64,
    pub schedule: DecaySchedule,
    pub seed: u64,
    pub stream: u64,
}

impl SkfChainConfig {
    pub fn new(
        steps_per_update: u64,
        burn_in: u64,
        gap: u64,
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
        if gap == 0 {
            return Err(Error::InvalidParameter("gap must be at least 1".into()));
        }
        Ok(Self {
            steps_per_update,
            burn_in,
            gap,
            schedule,
            seed,
            stream: 0,
        })
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Running tally of last-slice positions; the state is continuous, so sums
/// replace histograms.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

/// Decayed-MCMC chain over hybrid trajectories. Each step resamples the
/// switch first and then the position of the chosen slice — both stages are
/// valid Gibbs updates, and refreshing the regime first lets the position
/// adapt to it immediately.
#[derive(Debug, Clone)]
pub struct SkfChain {
    xs: Vec<f64>,
    ss: Vec<usize>,
    ys: Vec<f64>,
    tally: Tally,
    steps_taken: u64,
    steps_per_update: u64,
    burn_in: u64,
    gap: u64,
    schedule: DecaySchedule,
    rng: ChaCha8Rng,
}

impl SkfChain {
    pub fn new(config: SkfChainConfig) -> Self {
        Self {
            xs: Vec::new(),
            ss: Vec::new(),
            ys: Vec::new(),
            tally: Tally::default(),
            steps_taken: 0,
            steps_per_update: config.steps_per_update,
            burn_in: config.burn_in,
            gap: config.gap,
            schedule: config.schedule,
            rng: seeded_stream(config.seed, config.stream),
        }
    }

    pub fn t_len(&self) -> usize {
        self.xs.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.xs
    }

    pub fn switches(&self) -> &[usize] {
        &self.ss
    }

    pub fn observations(&self) -> &[f64] {
        &self.ys
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// One two-stage Gibbs update at a schedule-chosen slice, then a tally
    /// of the current last-slice position every `gap`-th post-burn-in step.
    pub fn step(&mut self, model: &SwitchingKF) -> Result<()> {
        let t_len = self.xs.len();
        if t_len == 0 {
            return Err(Error::EmptyChain);
        }
        let t = self.schedule.sample_timeslice(t_len, &mut self.rng);
        let idx = t - 1;
        let x_prev = (idx > 0).then(|| self.xs[idx - 1]);
        let s_prev = (idx > 0).then(|| self.ss[idx - 1]);
        let x_next = (idx + 1 < t_len).then(|| self.xs[idx + 1]);
        let s_next = (idx + 1 < t_len).then(|| self.ss[idx + 1]);

        let s_cond = skf_cond_s(model, t, s_prev, s_next, self.xs[idx], x_prev)?;
        self.ss[idx] = sample_weighted(&mut self.rng, s_cond.probs(), 1.0);

        let (mean, std) = skf_cond_x(model, t, x_prev, x_next, self.ss[idx], s_next, self.ys[idx]);
        self.xs[idx] = gauss(&mut self.rng, mean, std);

        self.steps_taken += 1;
        if self.steps_taken > self.burn_in
            && (self.steps_taken - self.burn_in).is_multiple_of(self.gap)
        {
            let x_last = self.xs[t_len - 1];
            self.tally.n += 1;
            self.tally.sum += x_last;
            self.tally.sum_sq += x_last * x_last;
        }
        Ok(())
    }

    /// A chain loaded with a whole observation sequence at once, each slice
    /// initialized from its local conditional as in [`SkfChain::observe`],
    /// with no sampling steps taken. Callers drive `step` themselves.
    pub fn with_observations(model: &SwitchingKF, ys: &[f64], config: SkfChainConfig) -> Self {
        let mut chain = Self::new(config);
        for &y in ys {
            chain.append_slice(model, y);
        }
        chain
    }

    fn append_slice(&mut self, model: &SwitchingKF, y: f64) {
        let s = match self.ss.last() {
            Some(&sp) => sample_categorical(&mut self.rng, model.switch_step_probs(sp)),
            None => sample_categorical(&mut self.rng, model.switch_prior()),
        };
        // Product of the incoming transition (or prior) factor with the
        // observation factor.
        let var_w = model.sigma_w * model.sigma_w;
        let (prior_mean, prior_var) = match self.xs.last() {
            Some(&xp) => (xp + model.value(s), model.sigma_v * model.sigma_v),
            None => (model.x1_mean, model.x1_std * model.x1_std),
        };
        let precision = 1.0 / prior_var + 1.0 / var_w;
        let mean = (prior_mean / prior_var + y / var_w) / precision;
        let x = gauss(&mut self.rng, mean, (1.0 / precision).sqrt());
        self.ss.push(s);
        self.xs.push(x);
        self.ys.push(y);
    }

    /// Online update: appends the observation, initializes the new slice
    /// from its local conditional, resets the tally, and runs exactly
    /// `steps_per_update` sampling steps.
    pub fn observe(&mut self, model: &SwitchingKF, y: f64) -> Result<()> {
        self.append_slice(model, y);
        self.reset_tally();
        for _ in 0..self.steps_per_update {
            self.step(model)?;
        }
        Ok(())
    }

    pub fn reset_tally(&mut self) {
        self.tally = Tally::default();
        self.steps_taken = 0;
    }

    /// Mean and population variance of the tallied last-slice positions.
    pub fn estimate(&self) -> Result<(f64, f64)> {
        if self.tally.n == 0 {
            return Err(Error::NoSamples);
        }
        let n = self.tally.n as f64;
        let mean = self.tally.sum / n;
        let var = (self.tally.sum_sq / n - mean * mean).max(0.0);
        Ok((mean, var))
    }

    /// Number of tallied samples.
    pub fn tally_len(&self) -> u64 {
        self.tally.n
    }
}

/// State of the switching model as seen by the particle filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub x: f64,
    pub s: usize,
}

impl Simulable for SwitchingKF {
    type State = HybridState;
    type Obs = f64;

    fn sample_initial<R: Rng>(&self, rng: &mut R) -> HybridState {
        let s = sample_categorical(rng, &self.switch_prior);
        let x = gauss(rng, self.x1_mean, self.x1_std);
        HybridState { x, s }
    }

    fn sample_transition<R: Rng>(&self, state: &HybridState, rng: &mut R) -> HybridState {
        let s = sample_categorical(rng, self.switch_step_probs(state.s));
        let x = gauss(rng, state.x + self.value(s), self.sigma_v);
        HybridState { x, s }
    }

    fn observation_likelihood(&self, state: &HybridState, obs: &f64) -> f64 {
        let d = obs - state.x;
        let var_w = self.sigma_w * self.sigma_w;
        (-d * d / (2.0 * var_w)).exp() / (self.sigma_w * (2.0 * std::f64::consts::PI).sqrt())
    }
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::DecayVariant;

    fn unit_model(switch_values: Vec<f64>) -> SwitchingKF {
        let k = switch_values.len();
        SwitchingKF::new(
            switch_values,
            vec![1.0 / k as f64; k],
            None,
            1.0,
            1.0,
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_single_switch_walks_the_integers() {
        let m = SwitchingKF::new(vec![1.0], vec![1.0], None, 0.0, 0.0, 0.0, 0.0).unwrap();
        let (traj, ys) = skf_simulate(&m, 5, 3);
        assert_eq!(traj.xs, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ys, traj.xs);
        assert!(traj.ss.iter().all(|&s| s == 0));
    }

    #[test]
    fn simulate_empty_and_replayable() {
        let m = unit_model(vec![-1.0, 1.0]);
        let (traj, ys) = skf_simulate(&m, 0, 1);
        assert!(traj.is_empty() && ys.is_empty());
        assert_eq!(skf_simulate(&m, 64, 9), skf_simulate(&m, 64, 9));
    }

    #[test]
    fn symmetric_switches_have_zero_mean_increment() {
        let m =
            SwitchingKF::new(vec![-1.0, 1.0], vec![0.5, 0.5], None, 0.0, 0.0, 0.0, 0.0).unwrap();
        let t = 10_000;
        let (traj, _) = skf_simulate(&m, t, 17);
        let mean_inc = traj.xs.last().unwrap() / t as f64;
        // Increments are ±1 with equal probability; 3-sigma CLT bound.
        let sigma = 1.0 / (t as f64).sqrt();
        assert!(mean_inc.abs() < 3.0 * sigma, "mean increment {mean_inc}");
    }

    #[test]
    fn cond_x_interior_three_unit_factors() {
        let m = unit_model(vec![0.0]);
        let (mean, std) = skf_cond_x(&m, 2, Some(0.0), Some(2.0), 0, Some(0), 1.0);
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((std * std - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cond_x_last_slice_two_factors() {
        let m = unit_model(vec![0.0]);
        let (mean, std) = skf_cond_x(&m, 2, Some(0.0), None, 0, None, 2.0);
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((std * std - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cond_x_sharp_observation_dominates() {
        let m = SwitchingKF::new(vec![0.0], vec![1.0], None, 1.0, 1e-9, 0.0, 1.0).unwrap();
        let (mean, _) = skf_cond_x(&m, 2, Some(5.0), Some(7.0), 0, Some(0), -3.0);
        assert!((mean - -3.0).abs() < 1e-6);
    }

    #[test]
    fn cond_x_translation_equivariance() {
        let m = unit_model(vec![-0.5, 0.5]);
        let c = 13.25;
        let (m0, s0) = skf_cond_x(&m, 2, Some(0.3), Some(1.1), 1, Some(0), 0.7);
        let (m1, s1) = skf_cond_x(&m, 2, Some(0.3 + c), Some(1.1 + c), 1, Some(0), 0.7 + c);
        assert!((m1 - (m0 + c)).abs() < 1e-9);
        assert!((s1 - s0).abs() < 1e-12);
    }

    #[test]
    fn cond_s_density_ratio() {
        let m = unit_model(vec![-1.0, 1.0]);
        // x_t - x_prev = 1: weights ∝ e^0 vs e^{-2}.
        let b = skf_cond_s(&m, 2, None, None, 1.0, Some(0.0)).unwrap();
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((b[1] - expected).abs() < 1e-9, "{:?}", b.probs());
    }

    #[test]
    fn cond_s_symmetry_and_point_mass() {
        let m = unit_model(vec![-1.0, 1.0]);
        let b = skf_cond_s(&m, 2, None, None, 0.0, Some(0.0)).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-12);

        let single = unit_model(vec![0.7]);
        let b = skf_cond_s(&single, 2, None, None, 3.0, Some(0.0)).unwrap();
        assert_eq!(b.probs(), &[1.0]);
    }

    #[test]
    fn cond_s_first_slice_is_prior_only() {
        let m =
            SwitchingKF::new(vec![-1.0, 1.0], vec![0.25, 0.75], None, 1.0, 1.0, 0.0, 1.0).unwrap();
        let b = skf_cond_s(&m, 1, None, None, 100.0, None).unwrap();
        assert!((b[0] - 0.25).abs() < 1e-12);
        assert!((b[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cond_s_markov_uses_neighbour_switches() {
        let m = SwitchingKF::new(
            vec![-1.0, 1.0],
            vec![0.5, 0.5],
            Some(vec![0.9, 0.1, 0.1, 0.9]),
            10.0, // wide process noise: x factor nearly flat
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let b = skf_cond_s(&m, 3, Some(0), Some(0), 0.0, Some(0.0)).unwrap();
        // Weights ≈ P(s|0)·P(0|s) = (0.81, 0.01) before the x factor.
        assert!(b[0] > 0.95, "{:?}", b.probs());
    }

    #[test]
    fn chain_pins_to_observation_when_sensor_is_sharp() {
        let m =
            SwitchingKF::new(vec![-1.0, 1.0], vec![0.5, 0.5], None, 1.0, 1e-6, 0.0, 1.0).unwrap();
        let cfg = SkfChainConfig::new(2000, 100, 1, DecaySchedule::quadratic(), 5).unwrap();
        let mut chain = SkfChain::new(cfg);
        for &y in &[0.8, 1.9, 3.1] {
            chain.observe(&m, y).unwrap();
        }
        let (mean, _) = chain.estimate().unwrap();
        assert!((mean - 3.1).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn window_one_schedule_moves_only_the_last_slice() {
        let m = unit_model(vec![1.0]);
        let sched = DecaySchedule::new(DecayVariant::FixedWindow { window: 1 }, None).unwrap();
        let cfg = SkfChainConfig::new(1, 0, 1, sched, 2).unwrap();
        let mut chain = SkfChain::new(cfg);
        for &y in &[1.0, 2.0, 3.0] {
            chain.observe(&m, y).unwrap();
        }
        let frozen_xs = chain.positions()[..2].to_vec();
        let frozen_ss = chain.switches()[..2].to_vec();
        for _ in 0..500 {
            chain.step(&m).unwrap();
        }
        assert_eq!(&chain.positions()[..2], &frozen_xs[..]);
        assert_eq!(&chain.switches()[..2], &frozen_ss[..]);
    }

    #[test]
    fn tally_respects_gap_and_burn_in() {
        let m = unit_model(vec![1.0]);
        let cfg = SkfChainConfig::new(100, 10, 3, DecaySchedule::quadratic(), 7).unwrap();
        let mut chain = SkfChain::new(cfg);
        chain.observe(&m, 0.5).unwrap();
        // 100 steps, 10 burned, one tally per 3 post-burn-in steps.
        assert_eq!(chain.tally_len(), 30);
    }

    #[test]
    fn cond_x_matches_quadrature_normalization() {
        // Compare the closed-form Gaussian against trapezoid quadrature of
        // the three-factor product on a wide grid.
        let mut rng = seeded(31);
        for _ in 0..100 {
            let sv = 0.3 + 1.7 * rng.gen::<f64>();
            let sw = 0.3 + 1.7 * rng.gen::<f64>();
            let m =
                SwitchingKF::new(vec![-1.0, 1.0], vec![0.5, 0.5], None, sv, sw, 0.0, 1.0).unwrap();
            let x_prev = 4.0 * rng.gen::<f64>() - 2.0;
            let x_next = 4.0 * rng.gen::<f64>() - 2.0;
            let y = 4.0 * rng.gen::<f64>() - 2.0;
            let s_t = (rng.gen::<f64>() < 0.5) as usize;
            let s_next = (rng.gen::<f64>() < 0.5) as usize;

            let (mean, std) = skf_cond_x(&m, 2, Some(x_prev), Some(x_next), s_t, Some(s_next), y);

            let lo = mean - 10.0 * std;
            let hi = mean + 10.0 * std;
            let n = 40_001;
            let h = (hi - lo) / (n - 1) as f64;
            let mut z0 = 0.0;
            let mut z1 = 0.0;
            let mut z2 = 0.0;
            for i in 0..n {
                let x = lo + i as f64 * h;
                let f = density(x - x_prev - m.value(s_t), sv)
                    * density(y - x, sw)
                    * density(x_next - x - m.value(s_next), sv);
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                z0 += w * f;
                z1 += w * f * x;
                z2 += w * f * x * x;
            }
            let qmean = z1 / z0;
            let qstd = (z2 / z0 - qmean * qmean).sqrt();
            let scale = std.max(1.0);
            assert!(
                (qmean - mean).abs() / scale < 1e-6,
                "mean {qmean} vs {mean}"
            );
            assert!((qstd - std).abs() / scale < 1e-6, "std {qstd} vs {std}");
        }
    }

    fn density(d: f64, sigma: f64) -> f64 {
        (-d * d / (2.0 * sigma * sigma)).exp() / sigma
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(SwitchingKF::new(vec![], vec![], None, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(SwitchingKF::new(vec![1.0], vec![0.9], None, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(SwitchingKF::new(vec![1.0], vec![1.0], None, -1.0, 1.0, 0.0, 1.0).is_err());
        assert!(SwitchingKF::new(
            vec![1.0, -1.0],
            vec![0.5, 0.5],
            Some(vec![0.5, 0.5, 0.9, 0.2]),
            1.0,
            1.0,
            0.0,
            1.0
        )
        .is_err());
    }
}
