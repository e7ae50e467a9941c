//! Experiment configuration: the TOML schema, parsing, and validation.
//!
//! A config file is structured key/value text with these sections:
//!
//! ```toml
//! scenario = "error_vs_samples"  # stationarity | error_vs_samples | error_vs_history
//!                                # | mixing_vs_history | pf_compare | skf_track
//! output = "results.csv"
//! seed = 42                      # root seed; every cell derives its own from it
//! replications = 20
//! burn_in = 0                    # optional: per-run MCMC burn-in steps (default 0)
//! limit = 200                    # optional: evidence limit L (default unbounded)
//! gap = 3                        # optional, skf_track: tally every gap-th step (default 1)
//!
//! [model]                        # discrete scenarios: a file ...
//! file = "model.toml"
//! # ... or generator parameters:
//! # states = 8
//! # obs = 8
//! # tsharp = 0.9
//! # osharp = 0.5
//! # seed = 7
//!
//! [skf]                          # skf_track only
//! switch_values = [-1.0, 1.0]
//! switch_prior = [0.5, 0.5]
//! # switch_markov = [0.9, 0.1, 0.1, 0.9]  # optional, row-major
//! sigma_v = 1.0
//! sigma_w = 1.0
//! x1_mean = 0.0
//! x1_std = 1.0
//!
//! [sweep]
//! t = [50, 100, 200]             # history lengths / online checkpoints
//! budgets = [10000]              # MCMC steps (per update when online, total when offline)
//! decays = ["poly:1", "uniform"] # uniform | window:W | exp:BETA | poly:DELTA
//! particles = [10000]            # bootstrap-filter sizes, where the scenario supports PF
//!
//! [mixing]                       # mixing_vs_history only (all optional)
//! epsilon = 0.05
//! chains = 1000
//! max_steps = 8192
//! ```
//!
//! Scenario semantics:
//!
//! * `stationarity` — offline control: the chain starts at an exact-posterior
//!   draw and runs `budget` steps; the error should stay at the Monte Carlo
//!   floor. Requires instances small enough for brute-force enumeration.
//! * `error_vs_samples` — offline: fixed history (default T = 1000), chain
//!   runs `budget` steps from a greedy initialization; error is the total
//!   variation distance to the exact filter at the last slice.
//! * `error_vs_history` — online: one pass over the evidence with `budget`
//!   steps per new observation, recording the error at each history length
//!   in `sweep.t`; particle-filter rows are added when `particles` is set.
//! * `mixing_vs_history` — runs the marginal mixing-time measurement per
//!   history length; the value column holds τ_m in steps (NaN = not mixed).
//! * `pf_compare` — `error_vs_history` with both estimator families
//!   mandatory. Budget matching: an MCMC pass costs budget·T sampling steps
//!   and a filter pass costs N·T particle updates, so `budgets = particles`
//!   equalizes total work.
//! * `skf_track` — online switching-KF tracking; error is |estimated mean −
//!   true position| at each checkpoint.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use decfilt_core::decay::{DecaySchedule, DecayVariant};
use decfilt_core::exact::BRUTE_FORCE_LIMIT;
use decfilt_core::models::{make_random_hmm, read_model, DiscreteHMM};
use decfilt_core::skf::SwitchingKF;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Stationarity,
    ErrorVsSamples,
    ErrorVsHistory,
    MixingVsHistory,
    PfCompare,
    SkfTrack,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Stationarity => "stationarity",
            Scenario::ErrorVsSamples => "error_vs_samples",
            Scenario::ErrorVsHistory => "error_vs_history",
            Scenario::MixingVsHistory => "mixing_vs_history",
            Scenario::PfCompare => "pf_compare",
            Scenario::SkfTrack => "skf_track",
        }
    }

    fn is_online(&self) -> bool {
        matches!(
            self,
            Scenario::ErrorVsHistory | Scenario::PfCompare | Scenario::SkfTrack
        )
    }

    fn supports_particles(&self) -> bool {
        matches!(
            self,
            Scenario::ErrorVsHistory | Scenario::PfCompare | Scenario::SkfTrack
        )
    }
}

// ---------------------------------------------------------------------------
// Raw file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Scenario,
    output: PathBuf,
    seed: u64,
    replications: usize,
    #[serde(default)]
    burn_in: u64,
    limit: Option<usize>,
    #[serde(default = "default_gap")]
    gap: u64,
    model: Option<ModelSection>,
    skf: Option<SkfSection>,
    sweep: SweepSection,
    mixing: Option<MixingSection>,
}

fn default_gap() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    file: Option<PathBuf>,
    states: Option<usize>,
    obs: Option<usize>,
    tsharp: Option<f64>,
    osharp: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkfSection {
    switch_values: Vec<f64>,
    switch_prior: Vec<f64>,
    switch_markov: Option<Vec<f64>>,
    sigma_v: f64,
    sigma_w: f64,
    x1_mean: f64,
    x1_std: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(default)]
    t: Vec<usize>,
    #[serde(default)]
    budgets: Vec<u64>,
    #[serde(default)]
    decays: Vec<String>,
    #[serde(default)]
    particles: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixingSection {
    epsilon: Option<f64>,
    chains: Option<usize>,
    max_steps: Option<u64>,
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

/// Mixing-measurement knobs with defaults applied.
#[derive(Debug, Clone, Copy)]
pub struct MixingParams {
    pub epsilon: f64,
    pub chains: usize,
    pub max_steps: u64,
}

impl Default for MixingParams {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            chains: 1000,
            max_steps: 8192,
        }
    }
}

/// A fully validated experiment: every sweep value parsed and checked, the
/// model already loaded or generated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub output: PathBuf,
    pub seed: u64,
    pub replications: usize,
    pub burn_in: u64,
    pub limit: Option<usize>,
    pub gap: u64,
    pub model: Option<DiscreteHMM>,
    pub skf: Option<SwitchingKF>,
    pub t_values: Vec<usize>,
    pub budgets: Vec<u64>,
    pub decays: Vec<DecayVariant>,
    pub particles: Vec<usize>,
    pub mixing: MixingParams,
}

impl ExperimentConfig {
    /// Parses and validates config text. Model files referenced by relative
    /// path resolve against `base_dir`.
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: "<root>".into(),
            message: e.message().to_string(),
        })?;
        validate(raw, base_dir)
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str(&text, base)
    }

    /// A decay schedule for this experiment's evidence limit.
    pub fn schedule(&self, variant: DecayVariant) -> DecaySchedule {
        DecaySchedule::new(variant, self.limit).expect("validated at construction")
    }
}

fn err(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn validate(raw: ConfigFile, base_dir: &Path) -> Result<ExperimentConfig, HarnessError> {
    let scenario = raw.scenario;

    if raw.replications == 0 {
        return Err(err("replications", "must be at least 1"));
    }
    if raw.output.as_os_str().is_empty() {
        return Err(err("output", "must be a non-empty path"));
    }
    if raw.gap == 0 {
        return Err(err("gap", "must be at least 1"));
    }
    if raw.limit == Some(0) {
        return Err(err("limit", "must be at least 1 (omit for unbounded)"));
    }

    // Decays parse for every scenario; all of them run the sampler.
    if raw.sweep.decays.is_empty() {
        return Err(err("sweep.decays", "must list at least one decay spec"));
    }
    let mut decays = Vec::with_capacity(raw.sweep.decays.len());
    for (i, spec) in raw.sweep.decays.iter().enumerate() {
        let variant: DecayVariant = spec
            .parse()
            .map_err(|e| err(&format!("sweep.decays[{i}]"), format!("{e}")))?;
        decays.push(variant);
    }

    let needs_budgets = !matches!(scenario, Scenario::MixingVsHistory);
    if needs_budgets && raw.sweep.budgets.is_empty() {
        return Err(err("sweep.budgets", "must list at least one step budget"));
    }
    if let Some(&bad) = raw.sweep.budgets.iter().find(|&&b| b == 0) {
        return Err(err(
            "sweep.budgets",
            format!("budget {bad} must be positive"),
        ));
    }
    if needs_budgets {
        if let Some(&min) = raw.sweep.budgets.iter().min() {
            if raw.burn_in >= min {
                return Err(err(
                    "burn_in",
                    format!("must be below the smallest budget ({min})"),
                ));
            }
        }
    }

    let mut t_values = raw.sweep.t.clone();
    if t_values.is_empty() {
        if scenario == Scenario::ErrorVsSamples {
            t_values.push(1000); // conventional fixed history length
        } else {
            return Err(err("sweep.t", "must list at least one history length"));
        }
    }
    if t_values.contains(&0) {
        return Err(err("sweep.t", "history lengths must be at least 1"));
    }
    if scenario.is_online() {
        let sorted = t_values.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            return Err(err(
                "sweep.t",
                "online scenarios need strictly increasing history checkpoints",
            ));
        }
    }

    if !raw.sweep.particles.is_empty() && !scenario.supports_particles() {
        return Err(err(
            "sweep.particles",
            format!("not used by scenario {}", scenario.name()),
        ));
    }
    if scenario == Scenario::PfCompare && raw.sweep.particles.is_empty() {
        return Err(err(
            "sweep.particles",
            "pf_compare needs at least one particle count",
        ));
    }
    if raw.sweep.particles.contains(&0) {
        return Err(err("sweep.particles", "particle counts must be positive"));
    }

    let model = match (scenario, &raw.model) {
        (Scenario::SkfTrack, Some(_)) => {
            return Err(err("model", "skf_track uses the [skf] section instead"))
        }
        (Scenario::SkfTrack, None) => None,
        (_, None) => return Err(err("model", "missing [model] section")),
        (_, Some(section)) => Some(load_model(section, base_dir)?),
    };

    let skf = match (scenario, raw.skf) {
        (Scenario::SkfTrack, Some(section)) => Some(
            SwitchingKF::new(
                section.switch_values,
                section.switch_prior,
                section.switch_markov,
                section.sigma_v,
                section.sigma_w,
                section.x1_mean,
                section.x1_std,
            )
            .map_err(|e| err("skf", e.to_string()))?,
        ),
        (Scenario::SkfTrack, None) => return Err(err("skf", "missing [skf] section")),
        (_, Some(_)) => {
            return Err(err(
                "skf",
                format!("not used by scenario {}", scenario.name()),
            ))
        }
        (_, None) => None,
    };

    if scenario == Scenario::Stationarity {
        let model = model.as_ref().expect("checked above");
        for &t in &t_values {
            let mut total: u64 = 1;
            for _ in 0..t {
                total = total
                    .checked_mul(model.n_states() as u64)
                    .filter(|&v| v <= BRUTE_FORCE_LIMIT)
                    .ok_or_else(|| {
                        err(
                            "sweep.t",
                            format!(
                                "stationarity needs {}^{t} <= {BRUTE_FORCE_LIMIT} trajectories",
                                model.n_states()
                            ),
                        )
                    })?;
            }
        }
    }

    let mixing = match (scenario, raw.mixing) {
        (Scenario::MixingVsHistory, section) => {
            let defaults = MixingParams::default();
            let m = section.map_or(defaults, |s| MixingParams {
                epsilon: s.epsilon.unwrap_or(defaults.epsilon),
                chains: s.chains.unwrap_or(defaults.chains),
                max_steps: s.max_steps.unwrap_or(defaults.max_steps),
            });
            if !(m.epsilon > 0.0 && m.epsilon < 1.0) {
                return Err(err("mixing.epsilon", "must lie in (0, 1)"));
            }
            if m.chains == 0 {
                return Err(err("mixing.chains", "must be at least 1"));
            }
            m
        }
        (_, Some(_)) => {
            return Err(err(
                "mixing",
                format!("not used by scenario {}", scenario.name()),
            ))
        }
        (_, None) => MixingParams::default(),
    };

    Ok(ExperimentConfig {
        scenario,
        output: raw.output,
        seed: raw.seed,
        replications: raw.replications,
        burn_in: raw.burn_in,
        limit: raw.limit,
        gap: raw.gap,
        model,
        skf,
        t_values,
        budgets: raw.sweep.budgets,
        decays,
        particles: raw.sweep.particles,
        mixing,
    })
}

fn load_model(section: &ModelSection, base_dir: &Path) -> Result<DiscreteHMM, HarnessError> {
    match section {
        ModelSection {
            file: Some(path),
            states: None,
            obs: None,
            tsharp: None,
            osharp: None,
            seed: None,
        } => {
            let resolved = if path.is_relative() {
                base_dir.join(path)
            } else {
                path.clone()
            };
            read_model(&resolved).map_err(|e| err("model.file", e.to_string()))
        }
        ModelSection {
            file: None,
            states: Some(states),
            obs: Some(obs),
            tsharp: Some(tsharp),
            osharp: Some(osharp),
            seed: Some(seed),
        } => make_random_hmm(*states, *obs, *tsharp, *osharp, *seed)
            .map_err(|e| err("model", e.to_string())),
        _ => Err(err(
            "model",
            "set either `file` alone or all of `states`, `obs`, `tsharp`, `osharp`, `seed`",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
scenario = "error_vs_samples"
output = "out.csv"
seed = 1
replications = 2

[model]
states = 2
obs = 2
tsharp = 0.5
osharp = 0.5
seed = 3

[sweep]
budgets = [100]
decays = ["poly:1"]
"#;

    fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
        ExperimentConfig::from_str(text, Path::new("."))
    }

    #[test]
    fn minimal_config_parses_with_default_history() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.t_values, vec![1000]);
        assert_eq!(
            cfg.decays,
            vec![DecayVariant::InversePolynomial { delta: 1.0 }]
        );
        assert!(cfg.model.is_some());
    }

    #[test]
    fn empty_sweep_is_an_error_with_field_path() {
        let text = BASE.replace("budgets = [100]", "budgets = []");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.budgets"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = BASE.replace("decays = [\"poly:1\"]", "decays = []");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.decays"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_decay_spec_points_at_the_entry() {
        let text = BASE.replace("[\"poly:1\"]", "[\"poly:1\", \"warp:3\"]");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.decays[1]"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn online_scenarios_require_sorted_checkpoints() {
        let text = BASE
            .replace("error_vs_samples", "error_vs_history")
            .replace("[sweep]", "[sweep]\nt = [100, 50]");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.t"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn pf_compare_requires_particles() {
        let text = BASE
            .replace("error_vs_samples", "pf_compare")
            .replace("[sweep]", "[sweep]\nt = [10, 20]");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.particles"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn skf_track_needs_skf_section_and_no_model() {
        let text = r#"
scenario = "skf_track"
output = "out.csv"
seed = 1
replications = 1

[sweep]
t = [10]
budgets = [100]
decays = ["poly:1"]
"#;
        match parse(text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "skf"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn model_section_is_all_or_nothing() {
        let text = BASE.replace("seed = 3\n", "");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "model"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("seed = 1", "seed = 1\ntypo_key = 5");
        assert!(matches!(parse(&text), Err(HarnessError::Config { .. })));
    }

    #[test]
    fn stationarity_rejects_huge_instances() {
        let text = BASE
            .replace("error_vs_samples", "stationarity")
            .replace("[sweep]", "[sweep]\nt = [100]");
        match parse(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "sweep.t"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
