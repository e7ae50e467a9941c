//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model's tables failed validation. The message lists the violations.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A constructor argument was out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An observation symbol outside `[0, n_obs)`.
    #[error("observation symbol {symbol} at t={t} out of range (n_obs = {n_obs})")]
    SymbolOutOfRange {
        t: usize,
        symbol: usize,
        n_obs: usize,
    },

    /// Evidence with zero likelihood under every reachable state. This cannot
    /// occur for ergodic models with positive tables, so it usually signals a
    /// bad fixture rather than a numerical accident.
    #[error("evidence at t={t} has zero likelihood under every reachable state")]
    ImpossibleEvidence { t: usize },

    /// Timeslice index outside `[1, T]`.
    #[error("timeslice t={t} out of range [1, {t_len}]")]
    TimesliceOutOfRange { t: usize, t_len: usize },

    /// Every state had zero weight in a Gibbs conditional; the chain or the
    /// model is corrupted.
    #[error("inconsistent blanket at t={t}: every state has zero conditional weight")]
    InconsistentBlanket { t: usize },

    /// An operation that requires a non-empty chain was called on one.
    #[error("chain has no timeslices")]
    EmptyChain,

    /// `estimate` was called before any post-burn-in step accumulated counts.
    #[error("no post-burn-in samples accumulated")]
    NoSamples,

    /// Every particle weight vanished at the given timestep.
    #[error("particle collapse at t={t}: all importance weights are zero")]
    ParticleCollapse { t: usize },

    /// Brute-force enumeration would exceed the configured trajectory limit.
    #[error("instance too large: {n_states}^{t_len} trajectories exceed limit {limit}")]
    InstanceTooLarge {
        n_states: usize,
        t_len: usize,
        limit: u64,
    },

    /// Two distributions of different lengths were compared.
    #[error("distribution lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A model file could not be parsed.
    #[error("model file: {0}")]
    ModelFile(String),
}
