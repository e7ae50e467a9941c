//! Discrete partially observable Markov process: model tables, validation,
//! synthetic generation with a controllable determinism knob, simulation,
//! and the on-disk model format.
//!
//! The model is stationary — the same transition and observation tables apply
//! at every timeslice — with time starting at t = 1 and `prior` playing the
//! role of P(X_1). All tables live in linear (not log) space: state spaces
//! here are small and every consumer renormalizes locally.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_categorical, seeded};

/// Hidden-state values x_1..x_T.
pub type Trajectory = Vec<usize>;

/// Observation symbols y_1..y_T.
pub type EvidenceSequence = Vec<usize>;

/// Tolerance for probability-sum checks.
pub const PROB_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Belief
// ---------------------------------------------------------------------------

/// A normalized categorical distribution over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Wraps a probability vector, checking non-negativity and that it sums
    /// to 1 within [`PROB_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("belief must be non-empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "belief entry {p} is negative or not finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "belief sums to {sum}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Normalizes a non-negative weight vector. Errors if every weight is 0.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}; cannot normalize"
            )));
        }
        Ok(Self(weights.iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the most probable state (ties break low).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl AsRef<[f64]> for Belief {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

// ---------------------------------------------------------------------------
// Model tables and validation
// ---------------------------------------------------------------------------

/// Raw model tables, as read from or written to a model file.
///
/// `transition` is row-major `n_states × n_states` (row = source state);
/// `observation` is row-major `n_states × n_obs` (row = hidden state).
/// This is the serialization schema; [`DiscreteHMM::new`] turns it into a
/// validated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_states: usize,
    pub n_obs: usize,
    pub prior: Vec<f64>,
    pub transition: Vec<f64>,
    pub observation: Vec<f64>,
}

/// One validation finding. Violations are data, not faults: `validate`
/// reports all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A table has the wrong number of entries.
    Dimension {
        table: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A row does not sum to 1 within [`PROB_TOLERANCE`].
    RowSum {
        table: &'static str,
        row: usize,
        sum: f64,
    },
    /// An entry below 0.
    NegativeEntry {
        table: &'static str,
        row: usize,
        index: usize,
        value: f64,
    },
    /// An entry above 1.
    EntryAboveOne {
        table: &'static str,
        row: usize,
        index: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension {
                table,
                expected,
                actual,
            } => write!(f, "{table} has {actual} entries, expected {expected}"),
            Violation::RowSum { table, row, sum } => {
                write!(
                    f,
                    "{table} row {row} sums to {sum} (residual {:e})",
                    sum - 1.0
                )
            }
            Violation::NegativeEntry {
                table,
                row,
                index,
                value,
            } => write!(f, "{table} row {row} entry {index} is negative ({value})"),
            Violation::EntryAboveOne {
                table,
                row,
                index,
                value,
            } => write!(f, "{table} row {row} entry {index} exceeds 1 ({value})"),
        }
    }
}

fn check_rows(table: &'static str, rows: &[f64], row_len: usize, out: &mut Vec<Violation>) {
    for (r, row) in rows.chunks(row_len).enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if v < 0.0 || v.is_nan() {
                out.push(Violation::NegativeEntry {
                    table,
                    row: r,
                    index: i,
                    value: v,
                });
            } else if v > 1.0 + PROB_TOLERANCE {
                out.push(Violation::EntryAboveOne {
                    table,
                    row: r,
                    index: i,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            out.push(Violation::RowSum { table, row: r, sum });
        }
    }
}

/// Checks every probability invariant of a raw model and returns all
/// violations found (empty = valid).
pub fn validate(params: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = params.n_states;
    let m = params.n_obs;

    let dims = [
        ("prior", params.prior.len(), n),
        ("transition", params.transition.len(), n * n),
        ("observation", params.observation.len(), n * m),
    ];
    for (table, actual, expected) in dims {
        if actual != expected {
            out.push(Violation::Dimension {
                table,
                expected,
                actual,
            });
        }
    }
    // Row checks only make sense on correctly sized tables.
    if params.prior.len() == n {
        check_rows("prior", &params.prior, n, &mut out);
    }
    if params.transition.len() == n * n && n > 0 {
        check_rows("transition", &params.transition, n, &mut out);
    }
    if params.observation.len() == n * m && m > 0 {
        check_rows("observation", &params.observation, m, &mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// DiscreteHMM
// ---------------------------------------------------------------------------

/// A validated discrete hidden Markov model.
///
/// Immutable after construction; a single model may be shared across any
/// number of concurrent readers (chains, filters, diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHMM {
    n_states: usize,
    n_obs: usize,
    prior: Vec<f64>,
    transition: Vec<f64>,
    observation: Vec<f64>,
}

impl DiscreteHMM {
    /// Validates raw tables and builds a model.
    pub fn new(params: ModelParams) -> Result<Self> {
        if params.n_states == 0 || params.n_obs == 0 {
            return Err(Error::InvalidModel(
                "n_states and n_obs must be positive".into(),
            ));
        }
        let violations = validate(&params);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidModel(msgs.join("; ")));
        }
        Ok(Self {
            n_states: params.n_states,
            n_obs: params.n_obs,
            prior: params.prior,
            transition: params.transition,
            observation: params.observation,
        })
    }

    /// Convenience constructor from loose tables.
    pub fn from_tables(
        n_states: usize,
        n_obs: usize,
        prior: Vec<f64>,
        transition: Vec<f64>,
        observation: Vec<f64>,
    ) -> Result<Self> {
        Self::new(ModelParams {
            n_states,
            n_obs,
            prior,
            transition,
            observation,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// P(X_{t+1} | X_t = from), as a row of length `n_states`.
    pub fn transition_row(&self, from: usize) -> &[f64] {
        &self.transition[from * self.n_states..(from + 1) * self.n_states]
    }

    /// P(X_{t+1} = to | X_t = from).
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.n_states + to]
    }

    /// P(Y_t | X_t = state), as a row of length `n_obs`.
    pub fn observation_row(&self, state: usize) -> &[f64] {
        &self.observation[state * self.n_obs..(state + 1) * self.n_obs]
    }

    /// P(Y_t = symbol | X_t = state).
    pub fn observation(&self, state: usize, symbol: usize) -> f64 {
        self.observation[state * self.n_obs + symbol]
    }

    /// The raw tables, e.g. for writing a model file.
    pub fn params(&self) -> ModelParams {
        ModelParams {
            n_states: self.n_states,
            n_obs: self.n_obs,
            prior: self.prior.clone(),
            transition: self.transition.clone(),
            observation: self.observation.clone(),
        }
    }

    pub(crate) fn check_symbol(&self, t: usize, symbol: usize) -> Result<()> {
        if symbol >= self.n_obs {
            return Err(Error::SymbolOutOfRange {
                t,
                symbol,
                n_obs: self.n_obs,
            });
        }
        Ok(())
    }

    pub(crate) fn check_evidence(&self, evidence: &[usize]) -> Result<()> {
        for (i, &y) in evidence.iter().enumerate() {
            self.check_symbol(i + 1, y)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Synthetic models
// ---------------------------------------------------------------------------

/// Generates a synthetic model whose rows are a convex mix of a one-hot
/// target and the uniform distribution.
///
/// Each transition row is `sharpness · one_hot(target) + (1 − sharpness) ·
/// uniform`, with the one-hot targets taken from a seeded permutation of the
/// states (and likewise for observation rows over symbols). Sharpness 0
/// yields all-uniform rows; sharpness 1 yields a deterministic permutation.
/// The prior is uniform. Deterministic per seed.
pub fn make_random_hmm(
    n_states: usize,
    n_obs: usize,
    transition_sharpness: f64,
    observation_sharpness: f64,
    seed: u64,
) -> Result<DiscreteHMM> {
    if n_states < 2 || n_obs < 2 {
        return Err(Error::InvalidParameter(format!(
            "sizes must be at least 2 (got {n_states} states, {n_obs} symbols)"
        )));
    }
    for (name, s) in [
        ("transition_sharpness", transition_sharpness),
        ("observation_sharpness", observation_sharpness),
    ] {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in [0, 1] (got {s})"
            )));
        }
    }

    let mut rng = seeded(seed);
    let mut state_perm: Vec<usize> = (0..n_states).collect();
    state_perm.shuffle(&mut rng);
    let mut obs_perm: Vec<usize> = (0..n_obs).collect();
    obs_perm.shuffle(&mut rng);

    let mix_row = |len: usize, target: usize, sharpness: f64| -> Vec<f64> {
        let base = (1.0 - sharpness) / len as f64;
        (0..len)
            .map(|j| if j == target { base + sharpness } else { base })
            .collect()
    };

    let mut transition = Vec::with_capacity(n_states * n_states);
    let mut observation = Vec::with_capacity(n_states * n_obs);
    for i in 0..n_states {
        transition.extend(mix_row(n_states, state_perm[i], transition_sharpness));
        observation.extend(mix_row(n_obs, obs_perm[i % n_obs], observation_sharpness));
    }

    DiscreteHMM::from_tables(
        n_states,
        n_obs,
        vec![1.0 / n_states as f64; n_states],
        transition,
        observation,
    )
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Draws a hidden trajectory and its observations from the generative model.
///
/// x_1 ~ prior, x_{t+1} ~ transition row of x_t, y_t ~ observation row of
/// x_t. Deterministic per seed; `t_len = 0` yields an empty pair.
pub fn simulate(model: &DiscreteHMM, t_len: usize, seed: u64) -> (Trajectory, EvidenceSequence) {
    let mut rng = seeded(seed);
    let mut xs = Vec::with_capacity(t_len);
    let mut ys = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let x = if t == 0 {
            sample_categorical(&mut rng, model.prior())
        } else {
            sample_categorical(&mut rng, model.transition_row(xs[t - 1]))
        };
        let y = sample_categorical(&mut rng, model.observation_row(x));
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// Writes a model as structured key/value text (TOML).
///
/// Floats are printed in shortest round-trip form, so write-then-read
/// reproduces the tables value-exactly.
pub fn write_model(path: &Path, model: &DiscreteHMM) -> Result<()> {
    let text = toml::to_string(&model.params()).map_err(|e| Error::ModelFile(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads and validates a model file written by [`write_model`].
pub fn read_model(path: &Path) -> Result<DiscreteHMM> {
    let text = std::fs::read_to_string(path)?;
    let params: ModelParams = toml::from_str(&text).map_err(|e| Error::ModelFile(e.to_string()))?;
    DiscreteHMM::new(params)
}

// ===========================================================================
// Tests
// ===========================================================================
