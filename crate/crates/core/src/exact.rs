//! Exact inference oracles: forward filtering, forward-backward smoothing,
//! and brute-force trajectory enumeration.
//!
//! These are the ground truth every approximate estimator in this crate is
//! measured against. The forward recursion rescales at every step (storing
//! per-step normalizers) instead of working in log space; state spaces are
//! small, and linear space keeps the oracle directly comparable to the
//! sampler's linear-space conditionals.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{Belief, DiscreteHMM, Trajectory};

/// Largest trajectory count `brute_force_posterior` will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Output of [`forward_filter`]: one belief per timeslice plus the evidence
/// log-likelihood.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// P(X_t | y_1:t) for t = 1..T.
    pub beliefs: Vec<Belief>,
    /// log P(y_1:T).
    pub log_likelihood: f64,
}

/// Smoothed single-slice marginals P(X_t | y_1:T) for t = 1..T.
#[derive(Debug, Clone)]
pub struct SmoothedMarginals {
    pub per_t: Vec<Belief>,
}

impl SmoothedMarginals {
    /// The final-slice marginal P(X_T | y_1:T), if T ≥ 1.
    pub fn last(&self) -> Option<&Belief> {
        self.per_t.last()
    }
}

/// Runs the forward recursion and returns the filtering distributions and
/// log-likelihood. Errors with the offending timeslice if some observation
/// has zero likelihood under every reachable state.
pub fn forward_filter(model: &DiscreteHMM, evidence: &[usize]) -> Result<ForwardResult> {
    model.check_evidence(evidence)?;
    let n = model.n_states();
    let mut beliefs = Vec::with_capacity(evidence.len());
    let mut log_likelihood = 0.0;
    let mut alpha = vec![0.0; n];

    for (i, &y) in evidence.iter().enumerate() {
        let mut next = vec![0.0; n];
        if i == 0 {
            for (x, v) in next.iter_mut().enumerate() {
                *v = model.prior()[x] * model.observation(x, y);
            }
        } else {
            for (x, v) in next.iter_mut().enumerate() {
                let mut pred = 0.0;
                for (xp, a) in alpha.iter().enumerate() {
                    pred += a * model.transition(xp, x);
                }
                *v = pred * model.observation(x, y);
            }
        }
        let norm: f64 = next.iter().sum();
        if norm <= 0.0 {
            return Err(Error::ImpossibleEvidence { t: i + 1 });
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        log_likelihood += norm.ln();
        beliefs.push(Belief::new(next.clone())?);
        alpha = next;
    }

    Ok(ForwardResult {
        beliefs,
        log_likelihood,
    })
}

/// Forward-backward smoothing. The last marginal coincides with the last
/// filtering belief.
pub fn smooth(model: &DiscreteHMM, evidence: &[usize]) -> Result<SmoothedMarginals> {
    let forward = forward_filter(model, evidence)?;
    let n = model.n_states();
    let t_len = evidence.len();
    if t_len == 0 {
        return Ok(SmoothedMarginals { per_t: Vec::new() });
    }

    // beta[t][x] up to a per-slice constant; renormalized each step to avoid
    // underflow, which is harmless because each smoothed slice is
    // renormalized anyway.
    let mut per_t = vec![forward.beliefs[t_len - 1].clone()];
    let mut beta = vec![1.0; n];
    for t in (0..t_len - 1).rev() {
        let y_next = evidence[t + 1];
        let mut new_beta = vec![0.0; n];
        for (x, nb) in new_beta.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (xn, b) in beta.iter().enumerate() {
                acc += model.transition(x, xn) * model.observation(xn, y_next) * b;
            }
            *nb = acc;
        }
        let scale: f64 = new_beta.iter().sum();
        if scale <= 0.0 {
            return Err(Error::ImpossibleEvidence { t: t + 2 });
        }
        for v in new_beta.iter_mut() {
            *v /= scale;
        }
        let weights: Vec<f64> = (0..n)
            .map(|x| forward.beliefs[t].probs()[x] * new_beta[x])
            .collect();
        per_t.push(Belief::from_weights(&weights)?);
        beta = new_beta;
    }
    per_t.reverse();
    Ok(SmoothedMarginals { per_t })
}

// ---------------------------------------------------------------------------
// Brute force
// ---------------------------------------------------------------------------

/// The exhaustive posterior P(x_1:T | y_1:T) over all `n_states^T`
/// trajectories, in lexicographic order with x_1 as the most significant
/// digit.
#[derive(Debug, Clone)]
pub struct BruteForcePosterior {
    n_states: usize,
    t_len: usize,
    probs: Vec<f64>,
    log_norm: f64,
}

impl BruteForcePosterior {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// Normalized probabilities in trajectory-index order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// log P(y_1:T) — the log of the enumeration's normalizing constant.
    pub fn log_likelihood(&self) -> f64 {
        self.log_norm
    }

    /// The lexicographic index of a trajectory.
    pub fn index_of(&self, trajectory: &[usize]) -> usize {
        debug_assert_eq!(trajectory.len(), self.t_len);
        trajectory.iter().fold(0, |acc, &x| acc * self.n_states + x)
    }

    /// Posterior probability of one trajectory.
    pub fn prob(&self, trajectory: &[usize]) -> f64 {
        self.probs[self.index_of(trajectory)]
    }

    fn decode(&self, mut index: usize) -> Trajectory {
        let mut xs = vec![0; self.t_len];
        for t in (0..self.t_len).rev() {
            xs[t] = index % self.n_states;
            index /= self.n_states;
        }
        xs
    }

    /// Iterates `(trajectory, probability)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (Trajectory, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.decode(i), p))
    }

    /// Marginalizes onto timeslice `t` (1-based).
    pub fn marginal(&self, t: usize) -> Belief {
        assert!(t >= 1 && t <= self.t_len, "slice {t} out of range");
        let mut weights = vec![0.0; self.n_states];
        let tail = self.n_states.pow((self.t_len - t) as u32);
        let block = tail * self.n_states;
        for (i, &p) in self.probs.iter().enumerate() {
            weights[(i % block) / tail] += p;
        }
        Belief::from_weights(&weights).expect("posterior mass is positive")
    }

    /// Draws a trajectory exactly from the posterior.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Trajectory {
        let u = rng.gen::<f64>();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.decode(i);
            }
        }
        self.decode(self.probs.len() - 1)
    }
}

/// Enumerates every trajectory and returns the exact posterior. Errors if
/// `n_states^T` exceeds [`BRUTE_FORCE_LIMIT`] or the evidence is impossible.
pub fn brute_force_posterior(
    model: &DiscreteHMM,
    evidence: &[usize],
) -> Result<BruteForcePosterior> {
    model.check_evidence(evidence)?;
    let n = model.n_states();
    let t_len = evidence.len();

    let mut total: u64 = 1;
    for _ in 0..t_len {
        total = total
            .checked_mul(n as u64)
            .filter(|&v| v <= BRUTE_FORCE_LIMIT)
            .ok_or(Error::InstanceTooLarge {
                n_states: n,
                t_len,
                limit: BRUTE_FORCE_LIMIT,
            })?;
    }

    let mut weights = vec![0.0; total as usize];
    let mut xs = vec![0usize; t_len];
    for (index, w) in weights.iter_mut().enumerate() {
        let mut rem = index;
        for t in (0..t_len).rev() {
            xs[t] = rem % n;
            rem /= n;
        }
        let mut weight = 1.0;
        for t in 0..t_len {
            let trans = if t == 0 {
                model.prior()[xs[t]]
            } else {
                model.transition(xs[t - 1], xs[t])
            };
            weight *= trans * model.observation(xs[t], evidence[t]);
        }
        *w = weight;
    }

    let norm: f64 = weights.iter().sum();
    if t_len > 0 && norm <= 0.0 {
        // Pinpoint the first impossible slice via the forward pass.
        forward_filter(model, evidence)?;
        return Err(Error::ImpossibleEvidence { t: 1 });
    }
    let log_norm = if t_len == 0 { 0.0 } else { norm.ln() };
    if t_len > 0 {
        for w in weights.iter_mut() {
            *w /= norm;
        }
    }

    Ok(BruteForcePosterior {
        n_states: n,
        t_len,
        probs: weights,
        log_norm,
    })
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DiscreteHMM;

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

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn filter_single_observation() {
        let m = coin_hmm();
        let r = forward_filter(&m, &[0]).unwrap();
        assert_close(r.beliefs[0].probs(), &[0.8, 0.2], 1e-12);
    }

    #[test]
    fn filter_two_observations_matches_enumeration() {
        let m = coin_hmm();
        let r = forward_filter(&m, &[0, 0]).unwrap();
        // Enumerating the 4 trajectories gives 0.496/0.572 for state 0.
        assert_close(r.beliefs[1].probs(), &[0.8671, 0.1329], 1e-3);
        let bf = brute_force_posterior(&m, &[0, 0]).unwrap();
        assert_close(r.beliefs[1].probs(), bf.marginal(2).probs(), 1e-12);
    }

    #[test]
    fn uniform_rows_give_uniform_beliefs() {
        let m =
            DiscreteHMM::from_tables(3, 2, vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 9], vec![0.5; 6])
                .unwrap();
        let r = forward_filter(&m, &[0, 1, 0, 0]).unwrap();
        for b in &r.beliefs {
            assert_close(b.probs(), &[1.0 / 3.0; 3], 1e-12);
        }
        let s = smooth(&m, &[0, 1, 0, 0]).unwrap();
        for b in &s.per_t {
            assert_close(b.probs(), &[1.0 / 3.0; 3], 1e-12);
        }
    }

    #[test]
    fn impossible_evidence_reports_slice() {
        // State 0 always emits symbol 0 and the chain can never leave it.
        let m = DiscreteHMM::from_tables(
            2,
            2,
            vec![1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        match forward_filter(&m, &[0, 0, 1]) {
            Err(Error::ImpossibleEvidence { t }) => assert_eq!(t, 3),
            other => panic!("expected impossible evidence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_symbol_is_rejected() {
        let m = coin_hmm();
        assert!(matches!(
            forward_filter(&m, &[0, 5]),
            Err(Error::SymbolOutOfRange { t: 2, .. })
        ));
    }

    #[test]
    fn empty_evidence() {
        let m = coin_hmm();
        let r = forward_filter(&m, &[]).unwrap();
        assert!(r.beliefs.is_empty());
        assert_eq!(r.log_likelihood, 0.0);
        assert!(smooth(&m, &[]).unwrap().per_t.is_empty());
    }

    #[test]
    fn smooth_length_one_equals_filter() {
        let m = coin_hmm();
        let s = smooth(&m, &[1]).unwrap();
        let f = forward_filter(&m, &[1]).unwrap();
        assert_close(s.per_t[0].probs(), f.beliefs[0].probs(), 1e-15);
    }

    #[test]
    fn smooth_last_slice_equals_filter_last() {
        let m = coin_hmm();
        let ev = vec![0, 1, 1, 0, 0, 1, 0];
        let s = smooth(&m, &ev).unwrap();
        let f = forward_filter(&m, &ev).unwrap();
        assert_close(
            s.last().unwrap().probs(),
            f.beliefs.last().unwrap().probs(),
            1e-9,
        );
    }

    #[test]
    fn smooth_first_slice_matches_enumeration() {
        let m = coin_hmm();
        let s = smooth(&m, &[0, 1]).unwrap();
        let bf = brute_force_posterior(&m, &[0, 1]).unwrap();
        assert_close(s.per_t[0].probs(), bf.marginal(1).probs(), 1e-9);
        // Hand-derived: (0.152 / 0.214, 0.062 / 0.214).
        assert_close(s.per_t[0].probs(), &[0.710280, 0.289719], 1e-5);
    }

    #[test]
    fn brute_force_single_slice_values() {
        let m = coin_hmm();
        let bf = brute_force_posterior(&m, &[0]).unwrap();
        assert!((bf.prob(&[0]) - 0.8).abs() < 1e-12);
        assert!((bf.prob(&[1]) - 0.2).abs() < 1e-12);
        assert!((bf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_point_mass_dynamics() {
        let m = DiscreteHMM::from_tables(
            2,
            2,
            vec![1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let bf = brute_force_posterior(&m, &[0, 1, 0]).unwrap();
        assert!((bf.prob(&[0, 0, 0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let m = coin_hmm();
        let ev = vec![0; 40]; // 2^40 trajectories
        assert!(matches!(
            brute_force_posterior(&m, &ev),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn log_likelihood_matches_brute_force_normalizer() {
        let m = coin_hmm();
        let ev = vec![0, 1, 1, 0, 1];
        let f = forward_filter(&m, &ev).unwrap();
        let bf = brute_force_posterior(&m, &ev).unwrap();
        assert!((f.log_likelihood - bf.log_likelihood()).abs() < 1e-9);
    }

    #[test]
    fn posterior_sampling_matches_probabilities() {
        let m = coin_hmm();
        let bf = brute_force_posterior(&m, &[0, 1]).unwrap();
        let mut rng = crate::rng::seeded(5);
        let draws = 200_000;
        let mut counts = vec![0usize; bf.probs().len()];
        for _ in 0..draws {
            counts[bf.index_of(&bf.sample(&mut rng))] += 1;
        }
        for (i, &p) in bf.probs().iter().enumerate() {
            let freq = counts[i] as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * sigma + 1e-9, "atom {i}");
        }
    }
}
