//! Order-asymmetry experiments and the two-pulse worked example.
//!
//! Ordering convention: `concatenate(p, q)` runs `p` first, so the two
//! orderings compared are `concatenate(P, Q)` and `concatenate(Q, P)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{norm_inf, row_major_list};
use crate::envmyc::{
    apply_env_morphism, compose_env_morphisms, env_distance, myc_distance, Constraints, DistanceWeights,
    EnvDistanceWeights, EnvError, EnvMorphism, EnvObject,
};
use crate::graphcat::AttributedGraph;
use crate::laws::{
    check_causality, check_compatibility, check_functor_laws, check_naturality, check_pushouts, random_program,
    random_state_values, DirectEmbedding, FieldEvolution, LawError, LawReport, NaturalTransformationData,
    SpeciesFunctor,
};
use crate::lie::{commutator, estimate_generator, LieError};
use crate::progsem::{
    concatenate, evolve, ExtractError, Extractor, InternalState, Program, ProgramError, ReferenceDynamics, StateLayout,
    TransitionSystem,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("insufficient data: {positive} positive rows, need at least 3")]
    InsufficientData { positive: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Law(#[from] LawError),
}

fn config_error(path: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, ExperimentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })
}

/// How a pulse scales with ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Control amplitude `ε·a`, duration fixed.
    #[default]
    Amplitude,
    /// Duration `ε·d`, amplitude fixed.
    Duration,
}

impl std::str::FromStr for ScalingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "amplitude" => Ok(ScalingMode::Amplitude),
            "duration" => Ok(ScalingMode::Duration),
            other => Err(format!(
                "unknown scaling mode {other:?}, expected amplitude or duration"
            )),
        }
    }
}

impl ScalingMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingMode::Amplitude => "amplitude",
            ScalingMode::Duration => "duration",
        }
    }
}

/// Single-channel pulse at base scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    pub channel: usize,
    pub amplitude: f64,
    pub duration: f64,
}

impl PulseTemplate {
    pub fn program(&self, eps: f64, mode: ScalingMode, controls: usize) -> Result<Program, ProgramError> {
        let (amplitude, length) = match mode {
            ScalingMode::Amplitude => (eps * self.amplitude, self.duration),
            ScalingMode::Duration => (self.amplitude, eps * self.duration),
        };
        let mut u = vec![0.0; controls];
        u[self.channel] = amplitude;
        Program::pulse(length, u)
    }
}

fn default_perturbation() -> f64 {
    0.05
}

fn default_threshold() -> f64 {
    1e-9
}

/// Everything needed for one ε-scan of the order asymmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureExperiment {
    pub dynamics: ReferenceDynamics,
    pub layout: Arc<StateLayout>,
    #[serde(default)]
    pub extractor: Extractor,
    pub p: PulseTemplate,
    pub q: PulseTemplate,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub scaling: ScalingMode,
    #[serde(default)]
    pub weights: DistanceWeights,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the uniform perturbation added to the all-ones initial state.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Explicit initial state in layout slot order; overrides the seeded one.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    /// Commutator norms above this count as nonzero.
    #[serde(default = "default_threshold")]
    pub commutator_threshold: f64,
}

impl ExposureExperiment {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.eps.len() < 4 {
            return Err(config_error("eps", "need at least 4 grid points"));
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(config_error("eps", "grid values must be positive and finite"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error("eps", "grid must be strictly decreasing"));
        }
        if self.eps[0] / self.eps[self.eps.len() - 1] < 10.0 {
            return Err(config_error("eps", "grid must span at least one decade"));
        }
        if self.layout.dim() != self.dynamics.dim() {
            return Err(config_error(
                "layout",
                "layout size differs from the dynamics dimension",
            ));
        }
        for (name, t) in [("p", &self.p), ("q", &self.q)] {
            if t.channel >= self.dynamics.controls().len() {
                return Err(config_error(&format!("{name}.channel"), "no such control channel"));
            }
            if !(t.duration > 0.0 && t.duration.is_finite() && t.amplitude.is_finite()) {
                return Err(config_error(
                    name,
                    "pulse needs a positive duration and finite amplitude",
                ));
            }
        }
        if let Some(s) = &self.initial_state {
            if s.len() != self.layout.dim() {
                return Err(config_error("initial_state", "length differs from the layout size"));
            }
        }
        if self.perturbation.is_nan() || self.perturbation < 0.0 {
            return Err(config_error("perturbation", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<InternalState, ExperimentError> {
        let values = match &self.initial_state {
            Some(v) => DVector::from_vec(v.clone()),
            None => seeded_initial_state(self.seed, self.layout.dim(), self.perturbation),
        };
        Ok(InternalState::new(values, Arc::clone(&self.layout))?)
    }
}

/// All-ones state plus a seeded uniform perturbation in `[-h, h]`.
pub fn seeded_initial_state(seed: u64, n: usize, h: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| 1.0 + if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 })
}

/// Least-squares line through `(log ε, log Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on the log-log rows with positive Δ.
pub fn fit_loglog_slope(rows: &[(f64, f64)]) -> Result<SlopeFit, ExperimentError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(e, d)| *e > 0.0 && *d > 0.0)
        .map(|(e, d)| (e.ln(), d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(ExperimentError::InsufficientData { positive: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::InsufficientData { positive: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

pub const QUADRATIC: &str = "quadratic";
pub const CUBIC_OR_BELOW: &str = "cubic-or-below";
pub const INCONCLUSIVE: &str = "inconclusive";

/// Δ values below this are treated as exact commutation.
pub const NEGLIGIBLE_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryRow {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub scaling: ScalingMode,
    pub seed: u64,
    pub weights: DistanceWeights,
    pub rows: Vec<AsymmetryRow>,
    /// Grid points with Δ = 0, left out of the fit.
    pub zero_rows: Vec<f64>,
    pub fit: Option<SlopeFit>,
    pub fit_skipped: bool,
    /// ∞-norm of `[X_P, X_Q]` for generators estimated at the smallest ε.
    pub commutator_norm: f64,
    pub commutator_nonzero: bool,
    pub verdict: String,
}

impl AsymmetryReport {
    pub fn rows_as_pairs(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.eps, r.delta)).collect()
    }

    /// Diagnostics agree: nonzero commutator exactly when the verdict is quadratic.
    pub fn is_consistent(&self) -> bool {
        self.commutator_nonzero == (self.verdict == QUADRATIC)
    }
}

pub fn classify(rows: &[AsymmetryRow], fit: Option<&SlopeFit>) -> &'static str {
    if rows.iter().all(|r| r.delta < NEGLIGIBLE_DELTA) {
        return CUBIC_OR_BELOW;
    }
    match fit {
        Some(f) if (f.slope - 2.0).abs() <= 0.1 => QUADRATIC,
        Some(f) if f.slope >= 2.8 => CUBIC_OR_BELOW,
        _ => INCONCLUSIVE,
    }
}

/// `Δ(ε)` for each grid point, the log-log fit, and the commutator of the
/// estimated pulse generators.
pub fn run_order_asymmetry_scan(exp: &ExposureExperiment) -> Result<AsymmetryReport, ExperimentError> {
    exp.validate()?;
    let s = exp.initial_state()?;
    let controls = exp.dynamics.controls().len();
    let mut rows = Vec::with_capacity(exp.eps.len());
    for &eps in &exp.eps {
        let p = exp.p.program(eps, exp.scaling, controls)?;
        let q = exp.q.program(eps, exp.scaling, controls)?;
        let p_then_q = exp
            .extractor
            .extract(&evolve(&s, &concatenate(&p, &q), &exp.dynamics)?)?;
        let q_then_p = exp
            .extractor
            .extract(&evolve(&s, &concatenate(&q, &p), &exp.dynamics)?)?;
        rows.push(AsymmetryRow {
            eps,
            delta: myc_distance(&p_then_q, &q_then_p, &exp.weights)?,
        });
    }
    let zero_rows: Vec<f64> = rows.iter().filter(|r| r.delta == 0.0).map(|r| r.eps).collect();
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.delta)).collect();
    let fit = fit_loglog_slope(&pairs).ok();

    let eps_min = *exp.eps.last().expect("validated grid");
    let xp = estimate_generator(
        |e| exp.p.program(e, exp.scaling, controls).expect("valid pulse"),
        &exp.dynamics,
        eps_min,
    )?;
    let xq = estimate_generator(
        |e| exp.q.program(e, exp.scaling, controls).expect("valid pulse"),
        &exp.dynamics,
        eps_min,
    )?;
    let commutator_norm = norm_inf(commutator(&xp, &xq)?.matrix());
    let verdict = classify(&rows, fit.as_ref()).to_string();
    Ok(AsymmetryReport {
        scaling: exp.scaling,
        seed: exp.seed,
        weights: exp.weights,
        fit_skipped: fit.is_none(),
        rows,
        zero_rows,
        fit,
        commutator_norm,
        commutator_nonzero: commutator_norm > exp.commutator_threshold,
        verdict,
    })
}

/// Scan rows as RFC 4180 CSV with header `eps,delta`.
pub fn rows_to_csv(rows: &[AsymmetryRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "delta"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.eps.to_string(), r.delta.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable report");
    out.push(b'\n');
    out
}

/// Environment part of the worked example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    /// Resource per node, held constant over the protocol.
    pub rho: f64,
    /// Baseline concentration per channel.
    pub phi: Vec<f64>,
    pub chi: Constraints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawConfig {
    pub samples: usize,
    pub tolerance: f64,
    pub compat_pulses: usize,
    pub compat_tolerance: f64,
}

/// Two pulses on a linear array of recording sites.
///
/// The state of each node is `m` features; control channel `c` acts as
/// `diag(profiles[c]) ⊗ blocks[c]` and the drift is `-decay · I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExampleConfig {
    pub nodes: usize,
    pub features: usize,
    pub channels: usize,
    pub decay: f64,
    #[serde(with = "row_major_list")]
    pub blocks: Vec<DMatrix<f64>>,
    pub profiles: Vec<Vec<f64>>,
    pub step: f64,
    pub sigma: f64,
    pub p: PulseTemplate,
    pub q: PulseTemplate,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub perturbation: f64,
    #[serde(default)]
    pub weights: DistanceWeights,
    pub environment: EnvironmentConfig,
    pub laws: LawConfig,
    /// Verdict the scans must produce.
    pub expect: String,
}

pub const DEFAULT_CONFIG: &str = include_str!("../configs/worked_example.json");
pub const COMMUTING_CONFIG: &str = include_str!("../configs/worked_example_commuting.json");

impl WorkedExampleConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let c: Self = parse_json(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn shipped_default() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    pub fn shipped_commuting() -> Self {
        Self::from_json(COMMUTING_CONFIG).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.nodes < 2 {
            return Err(config_error("nodes", "need at least two nodes"));
        }
        if self.blocks.len() != self.channels {
            return Err(config_error("blocks", format!("expected {} blocks", self.channels)));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.shape() != (self.features, self.features) {
                return Err(config_error(
                    &format!("blocks[{i}]"),
                    format!("must be {0}x{0}", self.features),
                ));
            }
        }
        if self.profiles.len() != self.channels {
            return Err(config_error("profiles", format!("expected {} profiles", self.channels)));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            if p.len() != self.nodes {
                return Err(config_error(
                    &format!("profiles[{i}]"),
                    format!("expected {} entries", self.nodes),
                ));
            }
        }
        if self.features != self.channels + 1 {
            return Err(config_error(
                "features",
                "must equal channels + 1 (resource plus one feature per channel)",
            ));
        }
        if self.environment.phi.len() != self.channels {
            return Err(config_error(
                "environment.phi",
                format!("expected {} channels", self.channels),
            ));
        }
        if !["quadratic", "cubic-or-below"].contains(&self.expect.as_str()) {
            return Err(config_error("expect", "must be \"quadratic\" or \"cubic-or-below\""));
        }
        if self.step.is_nan() || self.step <= 0.0 {
            return Err(config_error("step", "must be positive"));
        }
        if self.laws.samples == 0 {
            return Err(config_error("laws.samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn graph(&self) -> AttributedGraph {
        AttributedGraph::path(self.nodes)
    }

    pub fn layout(&self) -> Arc<StateLayout> {
        Arc::new(StateLayout::node_major(self.graph(), self.features))
    }

    pub fn dynamics(&self) -> Result<ReferenceDynamics, ExperimentError> {
        let n = self.nodes * self.features;
        let controls = self
            .blocks
            .iter()
            .zip(&self.profiles)
            .map(|(block, profile)| DMatrix::from_diagonal(&DVector::from_column_slice(profile)).kronecker(block))
            .collect();
        Ok(ReferenceDynamics::new(
            DMatrix::identity(n, n) * -self.decay,
            controls,
            self.step,
        )?)
    }

    pub fn species(&self) -> Result<SpeciesFunctor, ExperimentError> {
        Ok(SpeciesFunctor::new(
            "reference",
            self.dynamics()?,
            self.layout(),
            Extractor::constant(self.sigma),
        )?)
    }

    pub fn experiment(&self, scaling: ScalingMode) -> Result<ExposureExperiment, ExperimentError> {
        Ok(ExposureExperiment {
            dynamics: self.dynamics()?,
            layout: self.layout(),
            extractor: Extractor::constant(self.sigma),
            p: self.p,
            q: self.q,
            eps: self.eps.clone(),
            scaling,
            weights: self.weights,
            seed: self.seed,
            perturbation: self.perturbation,
            initial_state: None,
            commutator_threshold: default_threshold(),
        })
    }

    pub fn base_environment(&self) -> Result<EnvObject, ExperimentError> {
        let g = self.graph();
        let rho = g.nodes().map(|n| (n, self.environment.rho)).collect();
        let phi = g.nodes().map(|n| (n, self.environment.phi.clone())).collect();
        Ok(EnvObject::new(g, rho, phi, self.environment.chi.clone())?)
    }

    /// Exposure morphism for a pulse: adds `amplitude · profile` on its channel.
    pub fn exposure(&self, e: &EnvObject, pulse: &PulseTemplate) -> Result<EnvMorphism, ExperimentError> {
        let profile = &self.profiles[pulse.channel];
        let offsets = e
            .graph()
            .nodes()
            .zip(profile)
            .map(|(n, w)| (n, pulse.amplitude * w))
            .collect();
        Ok(EnvMorphism::channel_pulse(e, pulse.channel, offsets)?)
    }
}

/// Environment-level summary of the two exposures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub base: EnvObject,
    pub after_a: EnvObject,
    pub after_b: EnvObject,
    pub a_then_b: EnvObject,
    /// `d_Env(f_B ∘ f_A (E), f_A ∘ f_B (E))`.
    pub order_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExampleReport {
    pub seed: u64,
    pub expect: String,
    pub environment: EnvironmentSummary,
    pub scans: Vec<AsymmetryReport>,
    pub laws: Vec<LawReport>,
    pub passed: bool,
}

/// Seeded single-channel pulses with nonnegative amplitude.
pub fn random_pulses(seed: u64, count: usize, controls: usize) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut u = vec![0.0; controls];
            u[rng.random_range(0..controls)] = rng.random_range(0.0..=1.0);
            Program::pulse(rng.random_range(0.1..=1.0), u).expect("positive length")
        })
        .collect()
}

/// Runs the full protocol: environment exposures, ε-scans in the requested
/// scaling modes, and the functor-law and compatibility checks.
pub fn run_worked_example(
    config: &WorkedExampleConfig,
    modes: &[ScalingMode],
) -> Result<WorkedExampleReport, ExperimentError> {
    config.validate()?;
    let e = config.base_environment()?;
    let f_a = config.exposure(&e, &config.p)?;
    let f_b = config.exposure(&e, &config.q)?;
    let after_a = apply_env_morphism(&e, &f_a)?;
    let after_b = apply_env_morphism(&e, &f_b)?;
    let a_then_b = apply_env_morphism(&e, &compose_env_morphisms(&f_a, &f_b)?)?;
    let b_then_a = apply_env_morphism(&e, &compose_env_morphisms(&f_b, &f_a)?)?;
    let order_gap = env_distance(&a_then_b, &b_then_a, &EnvDistanceWeights::default())?;

    let scans = modes
        .iter()
        .map(|m| run_order_asymmetry_scan(&config.experiment(*m)?))
        .collect::<Result<Vec<_>, _>>()?;

    let species = config.species()?;
    let functor = check_functor_laws(
        &species,
        config.laws.samples,
        config.laws.tolerance,
        config.seed,
        &config.weights,
    )?;
    let iota = DirectEmbedding::new(config.layout());
    let psi = FieldEvolution::matched(config.dynamics()?);
    let pulses = random_pulses(config.seed, config.laws.compat_pulses, config.channels);
    let mut compat = check_compatibility(
        &iota,
        &psi,
        &species,
        &[e.clone(), after_a.clone(), after_b.clone()],
        &pulses,
        config.laws.compat_tolerance,
        &config.weights,
    )?;
    compat.seed = Some(config.seed);
    let laws = vec![functor, compat];

    let passed =
        scans.iter().all(|s| s.verdict == config.expect && s.is_consistent()) && laws.iter().all(LawReport::passed);
    Ok(WorkedExampleReport {
        seed: config.seed,
        expect: config.expect.clone(),
        environment: EnvironmentSummary {
            base: e,
            after_a,
            after_b,
            a_then_b,
            order_gap,
        },
        scans,
        laws,
        passed,
    })
}

/// Writes `scan_<mode>.csv` per scan and `report.json` into `dir`; returns the paths.
pub fn write_worked_example(report: &WorkedExampleReport, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut written = Vec::new();
    for scan in &report.scans {
        let path = dir.join(format!("scan_{}.csv", scan.scaling.name()));
        write_atomic(&path, &rows_to_csv(&scan.rows))?;
        written.push(path);
    }
    let path = dir.join("report.json");
    write_atomic(&path, &to_pretty_json(report))?;
    written.push(path);
    Ok(written)
}

fn default_suite_samples() -> usize {
    100
}

fn default_natural_states() -> usize {
    4
}

fn default_natural_programs() -> usize {
    5
}

fn default_transform_scale() -> f64 {
    0.05
}

fn default_probe_bound() -> usize {
    4
}

/// One entry of a law suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawCheck {
    FunctorLaws {
        #[serde(default = "default_suite_samples")]
        samples: usize,
        tolerance: f64,
    },
    Causality {
        #[serde(default = "default_suite_samples")]
        samples: usize,
        tolerance: f64,
    },
    /// The species against its conjugate by `T = I + scale·U`, `U` seeded uniform in `[-1, 1]`.
    Naturality {
        #[serde(default = "default_transform_scale")]
        scale: f64,
        #[serde(default = "default_natural_states")]
        states: usize,
        #[serde(default = "default_natural_programs")]
        programs: usize,
        tolerance: f64,
    },
    Compatibility {
        pulses: usize,
        tolerance: f64,
    },
    Pushout {
        count: usize,
        max_nodes: usize,
        #[serde(default = "default_probe_bound")]
        probe_bound: usize,
    },
}

/// A list of law checks run against one worked-example system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSuite {
    /// Defaults to the shipped worked example.
    #[serde(default)]
    pub system: Option<WorkedExampleConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub checks: Vec<LawCheck>,
}

impl LawSuite {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let suite: LawSuite = parse_json(text)?;
        if let Some(c) = &suite.system {
            c.validate()?;
        }
        Ok(suite)
    }
}

/// Runs every check in order. `seed` and `tol` override the suite's seed and
/// every tolerance.
pub fn run_law_suite(suite: &LawSuite, seed: Option<u64>, tol: Option<f64>) -> Result<Vec<LawReport>, ExperimentError> {
    let config = suite
        .system
        .clone()
        .unwrap_or_else(WorkedExampleConfig::shipped_default);
    let seed = seed.or(suite.seed).unwrap_or(config.seed);
    let species = config.species()?;
    let mut reports = Vec::with_capacity(suite.checks.len());
    for check in &suite.checks {
        let report = match check {
            LawCheck::FunctorLaws { samples, tolerance } => {
                check_functor_laws(&species, *samples, tol.unwrap_or(*tolerance), seed, &config.weights)?
            }
            LawCheck::Causality { samples, tolerance } => {
                check_causality(&species, *samples, tol.unwrap_or(*tolerance), seed)?
            }
            LawCheck::Naturality {
                scale,
                states,
                programs,
                tolerance,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = species.layout.dim();
                let t = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)) * *scale;
                let other = SpeciesFunctor::new(
                    "conjugate",
                    species.dynamics.conjugated(&t)?,
                    Arc::clone(&species.layout),
                    species.extractor.clone(),
                )?;
                let base: Vec<InternalState> = (0..*states)
                    .map(|_| species.state(random_state_values(&mut rng, n)))
                    .collect::<Result<_, _>>()?;
                let progs: Vec<Program> = (0..*programs)
                    .map(|_| random_program(&mut rng, config.channels))
                    .collect();
                let eta = NaturalTransformationData::linear_closed(&species, &other, &t, &base, &progs)?;
                let mut r = check_naturality(
                    &species,
                    &other,
                    &eta,
                    &base,
                    &progs,
                    tol.unwrap_or(*tolerance),
                    &config.weights,
                )?;
                r.seed = Some(seed);
                r
            }
            LawCheck::Compatibility { pulses, tolerance } => {
                let iota = DirectEmbedding::new(config.layout());
                let psi = FieldEvolution::matched(config.dynamics()?);
                let e = config.base_environment()?;
                let mut r = check_compatibility(
                    &iota,
                    &psi,
                    &species,
                    &[e],
                    &random_pulses(seed, *pulses, config.channels),
                    tol.unwrap_or(*tolerance),
                    &config.weights,
                )?;
                r.seed = Some(seed);
                r
            }
            LawCheck::Pushout {
                count,
                max_nodes,
                probe_bound,
            } => check_pushouts(*count, *max_nodes, *probe_bound, seed)?,
        };
        reports.push(report);
    }
    Ok(reports)
}
