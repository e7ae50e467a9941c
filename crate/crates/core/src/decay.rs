//! Decay functions over timeslices and a seedable sampler of t from g(t).
//!
//! A decay function assigns each timeslice t ∈ [1..T] an unnormalized weight
//! that (except for the uniform case) favours recent slices. Four families
//! are supported:
//!
//! * `Uniform` — weight 1 everywhere.
//! * `FixedWindow { window: W }` — weight 1 on the last W slices, 0 before.
//! * `Exponential { beta }` — weight e^(−β(T−t)).
//! * `InversePolynomial { delta }` — weight (T−t+1)^(−(1+δ)); δ = 1 is the
//!   quadratic decay used as the default elsewhere in this crate.
//!
//! An optional evidence limit L zeroes the weight of every slice more than L
//! steps in the past; slices outside the support are simply never selected.
//! Weights are normalized over the finite support within [1..T].
//!
//! Sampling uses a cumulative-weight array with binary search, rebuilt lazily
//! whenever T changes. A schedule is mutable only during that rebuild; the
//! contract is single-writer, and independent chains own independent clones.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// One of the four decay families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayVariant {
    Uniform,
    FixedWindow { window: usize },
    Exponential { beta: f64 },
    InversePolynomial { delta: f64 },
}

impl DecayVariant {
    fn check(&self) -> Result<()> {
        match *self {
            DecayVariant::Uniform => Ok(()),
            DecayVariant::FixedWindow { window } if window >= 1 => Ok(()),
            DecayVariant::FixedWindow { window } => Err(Error::InvalidParameter(format!(
                "window must be at least 1 (got {window})"
            ))),
            DecayVariant::Exponential { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            DecayVariant::Exponential { beta } => Err(Error::InvalidParameter(format!(
                "beta must be positive and finite (got {beta})"
            ))),
            DecayVariant::InversePolynomial { delta } if delta > 0.0 && delta.is_finite() => Ok(()),
            DecayVariant::InversePolynomial { delta } => Err(Error::InvalidParameter(format!(
                "delta must be positive and finite (got {delta})"
            ))),
        }
    }
}

impl fmt::Display for DecayVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayVariant::Uniform => write!(f, "uniform"),
            DecayVariant::FixedWindow { window } => write!(f, "window:{window}"),
            DecayVariant::Exponential { beta } => write!(f, "exp:{beta}"),
            DecayVariant::InversePolynomial { delta } => write!(f, "poly:{delta}"),
        }
    }
}

impl FromStr for DecayVariant {
    type Err = Error;

    /// Parses the flag grammar `uniform | window:W | exp:BETA | poly:DELTA`.
    fn from_str(s: &str) -> Result<Self> {
        let variant = match s.split_once(':') {
            None if s == "uniform" => DecayVariant::Uniform,
            Some(("window", w)) => DecayVariant::FixedWindow {
                window: w.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad window size {w:?} in decay spec {s:?}"))
                })?,
            },
            Some(("exp", b)) => DecayVariant::Exponential {
                beta: b.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad beta {b:?} in decay spec {s:?}"))
                })?,
            },
            Some(("poly", d)) => DecayVariant::InversePolynomial {
                delta: d.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad delta {d:?} in decay spec {s:?}"))
                })?,
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown decay spec {s:?}; expected uniform | window:W | exp:BETA | poly:DELTA"
                )))
            }
        };
        variant.check()?;
        Ok(variant)
    }
}

/// Kahan-compensated sum; normalizer sums must stay accurate over 1e4 terms.
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
        }
    }

    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum
    }
}

/// A decay family plus evidence limit, with a cached cumulative-weight array
/// for fast timeslice sampling.
#[derive(Debug, Clone)]
pub struct DecaySchedule {
    variant: DecayVariant,
    limit: Option<usize>,
    // Cumulative weights over [support_start ..= cached_len]; empty = stale.
    cum: Vec<f64>,
    cached_len: usize,
    support_start: usize,
}

impl DecaySchedule {
    /// Builds a schedule. `limit` of `None` means unbounded (the default
    /// elsewhere: convergence does not depend on the limit, so a pessimistic
    /// value is safe). A limit of 0 would zero every weight and is rejected.
    pub fn new(variant: DecayVariant, limit: Option<usize>) -> Result<Self> {
        variant.check()?;
        if limit == Some(0) {
            return Err(Error::InvalidParameter(
                "evidence limit must be at least 1".into(),
            ));
        }
        Ok(Self {
            variant,
            limit,
            cum: Vec::new(),
            cached_len: 0,
            support_start: 1,
        })
    }

    /// The quadratic decay (inverse polynomial, δ = 1) with no limit.
    pub fn quadratic() -> Self {
        Self::new(DecayVariant::InversePolynomial { delta: 1.0 }, None)
            .expect("parameters are valid")
    }

    pub fn variant(&self) -> DecayVariant {
        self.variant
    }

    pub fn limit(&self) -> Option<usize> {
        self.limit
    }

    fn weight_at(&self, t: usize, t_len: usize) -> f64 {
        if let Some(limit) = self.limit {
            if t + limit <= t_len {
                return 0.0;
            }
        }
        match self.variant {
            DecayVariant::Uniform => 1.0,
            DecayVariant::FixedWindow { window } => {
                if t + window > t_len {
                    1.0
                } else {
                    0.0
                }
            }
            DecayVariant::Exponential { beta } => (-beta * (t_len - t) as f64).exp(),
            DecayVariant::InversePolynomial { delta } => {
                ((t_len - t + 1) as f64).powf(-(1.0 + delta))
            }
        }
    }

    /// The unnormalized weight g(t) for history length `t_len`.
    pub fn raw_weight(&self, t: usize, t_len: usize) -> Result<f64> {
        if t < 1 || t > t_len {
            return Err(Error::TimesliceOutOfRange { t, t_len });
        }
        Ok(self.weight_at(t, t_len))
    }

    /// The sum of raw weights over t = 1..T; the probability of slice t is
    /// `raw_weight(t, T) / normalizer(T)`.
    pub fn normalizer(&self, t_len: usize) -> f64 {
        assert!(t_len >= 1, "normalizer requires T >= 1");
        let mut sum = KahanSum::new();
        for t in self.first_supported(t_len)..=t_len {
            sum.add(self.weight_at(t, t_len));
        }
        sum.total()
    }

    /// First slice with possibly-positive weight (all families weight a
    /// suffix of [1..T]).
    fn first_supported(&self, t_len: usize) -> usize {
        let mut start = 1;
        if let DecayVariant::FixedWindow { window } = self.variant {
            start = start.max(t_len.saturating_sub(window) + 1);
        }
        if let Some(limit) = self.limit {
            start = start.max(t_len.saturating_sub(limit) + 1);
        }
        start
    }

    fn rebuild(&mut self, t_len: usize) {
        let start = self.first_supported(t_len);
        self.cum.clear();
        self.cum.reserve(t_len - start + 1);
        let mut sum = KahanSum::new();
        for t in start..=t_len {
            sum.add(self.weight_at(t, t_len));
            self.cum.push(sum.total());
        }
        self.cached_len = t_len;
        self.support_start = start;
    }

    /// Normalized slice probabilities over [1..=t_len], mostly for tests and
    /// introspection.
    pub fn probabilities(&mut self, t_len: usize) -> Vec<f64> {
        assert!(t_len >= 1);
        if self.cached_len != t_len || self.cum.is_empty() {
            self.rebuild(t_len);
        }
        let total = *self.cum.last().expect("support is non-empty");
        let mut probs = vec![0.0; t_len];
        let mut prev = 0.0;
        for (i, &c) in self.cum.iter().enumerate() {
            probs[self.support_start - 1 + i] = (c - prev) / total;
            prev = c;
        }
        probs
    }

    /// Draws a timeslice t ∈ [1..=t_len] with probability proportional to
    /// its raw weight. Deterministic given the RNG state.
    pub fn sample_timeslice<R: Rng>(&mut self, t_len: usize, rng: &mut R) -> usize {
        assert!(t_len >= 1, "sample_timeslice requires T >= 1");
        if self.cached_len != t_len || self.cum.is_empty() {
            self.rebuild(t_len);
        }
        let total = *self.cum.last().expect("support is non-empty");
        let u = rng.gen::<f64>() * total;
        let idx = self.cum.partition_point(|&c| c <= u);
        self.support_start + idx.min(self.cum.len() - 1)
    }
}

// ===========================================================================
// Tests
// ===========================================================================
