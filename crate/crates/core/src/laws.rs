//! Falsification harness for the categorical laws of the model.
//!
//! Every checker returns a [`LawReport`] carrying the largest residual seen,
//! the tolerance, and a serialized witness for the worst case. Failures are
//! reported, not thrown; errors are reserved for malformed inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::envmyc::{
    compose_myc_morphisms, env_distance, myc_distance, DistanceWeights, EnvDistanceWeights, EnvError, EnvObject,
    MergeRule, MycMorphism, MycObject, OmegaUpdate,
};
use crate::graphcat::{
    compose_graph_morphisms, enumerate_morphisms, pushout_along_monos, verify_pushout_universal_property,
    AttributedGraph, Cospan, EdgeId, GraphError, GraphMorphism, NodeId,
};
use crate::progsem::{
    concatenate, evolve, induced_morphism, ExtractError, Extractor, InternalState, Piece, Program, ProgramError,
    ReferenceDynamics, StateLayout, TransitionSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one law check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: String,
    pub seed: Option<u64>,
    pub samples: usize,
    #[serde(with = "extended_f64")]
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub witness: Value,
}

impl LawReport {
    fn new(law: &str, seed: Option<u64>, samples: usize, worst: Worst, tolerance: f64) -> Self {
        let verdict = if worst.residual <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        LawReport {
            law: law.to_string(),
            seed,
            samples,
            max_residual: worst.residual,
            tolerance,
            verdict,
            witness: worst.witness,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// JSON numbers cannot hold infinities; these are written as strings.
mod extended_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// Running maximum with its witness. NaN residuals count as the worst case.
struct Worst {
    residual: f64,
    witness: Value,
}

impl Worst {
    fn new() -> Self {
        Worst {
            residual: 0.0,
            witness: Value::Null,
        }
    }

    fn offer(&mut self, residual: f64, witness: impl FnOnce() -> Value) {
        let worse = residual.is_nan() && !self.residual.is_nan() || residual > self.residual;
        if worse || self.witness.is_null() {
            self.residual = if worse { residual } else { self.residual.max(residual) };
            self.witness = witness();
        }
    }
}

/// Distance between two networks that is infinite when the graphs differ.
pub fn network_residual(a: &MycObject, b: &MycObject, w: &DistanceWeights) -> Result<f64, LawError> {
    if a.graph() != b.graph() {
        return Ok(f64::INFINITY);
    }
    Ok(myc_distance(a, b, w)?)
}

/// A fungal functor realized by a transition system, a state layout on the
/// observation graph, and an extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesFunctor<D = ReferenceDynamics> {
    pub label: String,
    pub dynamics: D,
    pub layout: Arc<StateLayout>,
    #[serde(default)]
    pub extractor: Extractor,
}

impl<D: TransitionSystem> SpeciesFunctor<D> {
    pub fn new(
        label: impl Into<String>,
        dynamics: D,
        layout: Arc<StateLayout>,
        extractor: Extractor,
    ) -> Result<Self, LawError> {
        if dynamics.dim() != layout.dim() {
            return Err(LawError::Input(format!(
                "dynamics has dimension {}, layout has {} slots",
                dynamics.dim(),
                layout.dim()
            )));
        }
        Ok(SpeciesFunctor {
            label: label.into(),
            dynamics,
            layout,
            extractor,
        })
    }

    pub fn state(&self, values: DVector<f64>) -> Result<InternalState, LawError> {
        Ok(InternalState::new(values, Arc::clone(&self.layout))?)
    }

    pub fn observe(&self, s: &InternalState) -> Result<MycObject, LawError> {
        Ok(self.extractor.extract(s)?)
    }

    /// The network morphism induced by running `p` from `s`.
    pub fn apply(&self, s: &InternalState, p: &Program) -> Result<MycMorphism, LawError> {
        Ok(induced_morphism(s, p, &self.dynamics, &self.extractor)?)
    }

    pub fn run(&self, s: &InternalState, p: &Program) -> Result<InternalState, LawError> {
        Ok(evolve(s, p, &self.dynamics)?)
    }
}

/// Random program with 1 to 3 pieces, lengths in [0.05, 0.5] and controls in [-1, 1].
pub fn random_program(rng: &mut impl Rng, controls: usize) -> Program {
    let pieces = (0..rng.random_range(1..=3))
        .map(|_| Piece {
            length: rng.random_range(0.05..=0.5),
            control: (0..controls).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        })
        .collect();
    Program::new(pieces).expect("valid pieces")
}

pub fn random_state_values(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

/// Composition residual for one sample: distance between the targets of
/// `F(p then q)` and `F(q) ∘ F(p)`, plus the largest deviation of their state
/// updates. A failed identity law yields an infinite residual.
pub fn functor_residual<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    s: &InternalState,
    p: &Program,
    q: &Program,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    if !f.apply(s, &Program::null())?.is_identity() {
        return Ok(f64::INFINITY);
    }
    let whole = f.apply(s, &concatenate(p, q))?;
    let first = f.apply(s, p)?;
    let second = f.apply(&f.run(s, p)?, q)?;
    let composite = compose_myc_morphisms(&first, &second)?;
    let target_gap = network_residual(whole.target(), composite.target(), w)?;
    let update_gap = match (whole.omega_update(), composite.omega_update()) {
        (OmegaUpdate::Linear(a), OmegaUpdate::Linear(b)) => (a - b).amax(),
        _ => f64::INFINITY,
    };
    Ok(target_gap.max(update_gap))
}

#[derive(Serialize, Deserialize)]
struct FunctorWitness {
    state: Vec<f64>,
    p: Program,
    q: Program,
}

/// Functor laws on `sample_count` seeded random `(S, p, q)` triples.
///
/// The identity law is checked at every sampled state and must hold exactly.
pub fn check_functor_laws<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    sample_count: usize,
    tol: f64,
    seed: u64,
    w: &DistanceWeights,
) -> Result<LawReport, LawError> {
    if sample_count == 0 {
        return Err(LawError::Input("sample_count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    for _ in 0..sample_count {
        let s = f.state(random_state_values(&mut rng, f.layout.dim()))?;
        let p = random_program(&mut rng, f.dynamics.control_dim());
        let q = random_program(&mut rng, f.dynamics.control_dim());
        let r = functor_residual(f, &s, &p, &q, w)?;
        worst.offer(r, || {
            serde_json::to_value(FunctorWitness {
                state: s.values().iter().copied().collect(),
                p: p.clone(),
                q: q.clone(),
            })
            .expect("serializable")
        });
    }
    Ok(LawReport::new("functor_laws", Some(seed), sample_count, worst, tol))
}

/// Recomputes the residual recorded in a functor-law witness.
pub fn replay_functor_laws<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    witness: &Value,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    let wit: FunctorWitness = serde_json::from_value(witness.clone()).map_err(|e| LawError::Input(e.to_string()))?;
    let s = f.state(DVector::from_vec(wit.state))?;
    functor_residual(f, &s, &wit.p, &wit.q, w)
}

/// Largest entry of `evolve(S, p then q) - evolve(evolve(S, p), q)`.
pub fn causality_residual<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    s: &InternalState,
    p: &Program,
    q: &Program,
) -> Result<f64, LawError> {
    let whole = f.run(s, &concatenate(p, q))?;
    let stepwise = f.run(&f.run(s, p)?, q)?;
    Ok((whole.values() - stepwise.values()).amax())
}

/// Causality of the transition system on seeded random `(S, p, q)` triples.
pub fn check_causality<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    sample_count: usize,
    tol: f64,
    seed: u64,
) -> Result<LawReport, LawError> {
    if sample_count == 0 {
        return Err(LawError::Input("sample_count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    for _ in 0..sample_count {
        let s = f.state(random_state_values(&mut rng, f.layout.dim()))?;
        let p = random_program(&mut rng, f.dynamics.control_dim());
        let q = random_program(&mut rng, f.dynamics.control_dim());
        let r = causality_residual(f, &s, &p, &q)?;
        worst.offer(r, || {
            serde_json::to_value(FunctorWitness {
                state: s.values().iter().copied().collect(),
                p: p.clone(),
                q: q.clone(),
            })
            .expect("serializable")
        });
    }
    Ok(LawReport::new("causality", Some(seed), sample_count, worst, tol))
}

/// Components `η_M : F1(M) → F2(M)` looked up by exact source equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalTransformationData {
    pub components: Vec<MycMorphism>,
}

impl NaturalTransformationData {
    pub fn component(&self, source: &MycObject) -> Option<&MycMorphism> {
        self.components.iter().find(|c| c.source() == source)
    }

    /// Components induced by a fixed linear state map `t` (slot order of
    /// `from`'s layout) at each of `states`: the target is the observation of
    /// `t·S` through `to`.
    pub fn linear<D1: TransitionSystem, D2: TransitionSystem>(
        from: &SpeciesFunctor<D1>,
        to: &SpeciesFunctor<D2>,
        t: &DMatrix<f64>,
        states: &[InternalState],
    ) -> Result<Self, LawError> {
        if from.layout.graph() != to.layout.graph() || t.shape() != (to.layout.dim(), from.layout.dim()) {
            return Err(LawError::Input("state map does not fit the two layouts".into()));
        }
        let mut components: Vec<MycMorphism> = Vec::new();
        for s in states {
            let source = from.observe(s)?;
            if components.iter().any(|c| c.source() == &source) {
                continue;
            }
            let target = to.observe(&to.state(t * s.values())?)?;
            let update = if from.layout == to.layout {
                from.layout.to_node_major(t)
            } else {
                return Err(LawError::Input("linear components require a shared layout".into()));
            };
            components.push(MycMorphism::new(
                source,
                target,
                GraphMorphism::identity(from.layout.graph()),
                MergeRule::Sum,
                OmegaUpdate::Linear(update),
            )?);
        }
        Ok(NaturalTransformationData { components })
    }

    /// Components for `states` and every state reached from them by `programs`
    /// under `from`.
    pub fn linear_closed<D1: TransitionSystem, D2: TransitionSystem>(
        from: &SpeciesFunctor<D1>,
        to: &SpeciesFunctor<D2>,
        t: &DMatrix<f64>,
        states: &[InternalState],
        programs: &[Program],
    ) -> Result<Self, LawError> {
        let mut all = states.to_vec();
        for s in states {
            for p in programs {
                all.push(from.run(s, p)?);
            }
        }
        Self::linear(from, to, t, &all)
    }
}

/// Residual of the naturality square at `s` for program `p`.
pub fn naturality_residual<D1: TransitionSystem, D2: TransitionSystem>(
    f1: &SpeciesFunctor<D1>,
    f2: &SpeciesFunctor<D2>,
    eta: &NaturalTransformationData,
    s: &InternalState,
    p: &Program,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    let missing =
        |m: &MycObject| LawError::Input(format!("no component for the network with omega {:?}", m.omega_map()));
    let top = f1.apply(s, p)?;
    let eta_source = eta.component(top.source()).ok_or_else(|| missing(top.source()))?;
    let eta_target = eta.component(top.target()).ok_or_else(|| missing(top.target()))?;
    let s2 = f2.layout.read(eta_source.target())?;
    let bottom = f2.apply(&s2, p)?;
    // η ∘ F1(p) against F2(p) ∘ η.
    let via_top = match (top.omega_update(), eta_target.omega_update()) {
        (OmegaUpdate::Linear(a), OmegaUpdate::Linear(b)) => Some(b * a),
        _ => None,
    };
    let via_bottom = match (eta_source.omega_update(), bottom.omega_update()) {
        (OmegaUpdate::Linear(a), OmegaUpdate::Linear(b)) => Some(b * a),
        _ => None,
    };
    let update_gap = match (via_top, via_bottom) {
        (Some(a), Some(b)) => (a - b).amax(),
        _ => 0.0,
    };
    let target_gap = network_residual(eta_target.target(), bottom.target(), w)?;
    Ok(target_gap.max(update_gap))
}

#[derive(Serialize, Deserialize)]
struct NaturalityWitness {
    state: Vec<f64>,
    program: Program,
}

/// Naturality of `eta` between two species over every base state and program.
pub fn check_naturality<D1: TransitionSystem, D2: TransitionSystem>(
    f1: &SpeciesFunctor<D1>,
    f2: &SpeciesFunctor<D2>,
    eta: &NaturalTransformationData,
    states: &[InternalState],
    programs: &[Program],
    tol: f64,
    w: &DistanceWeights,
) -> Result<LawReport, LawError> {
    let mut worst = Worst::new();
    let mut samples = 0;
    for s in states {
        for p in programs {
            let r = naturality_residual(f1, f2, eta, s, p, w)?;
            samples += 1;
            worst.offer(r, || {
                serde_json::to_value(NaturalityWitness {
                    state: s.values().iter().copied().collect(),
                    program: p.clone(),
                })
                .expect("serializable")
            });
        }
    }
    let law = format!("naturality:{}->{}", f1.label, f2.label);
    Ok(LawReport::new(&law, None, samples, worst, tol))
}

pub fn replay_naturality<D1: TransitionSystem, D2: TransitionSystem>(
    f1: &SpeciesFunctor<D1>,
    f2: &SpeciesFunctor<D2>,
    eta: &NaturalTransformationData,
    witness: &Value,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    let wit: NaturalityWitness = serde_json::from_value(witness.clone()).map_err(|e| LawError::Input(e.to_string()))?;
    let s = f1.state(DVector::from_vec(wit.state))?;
    naturality_residual(f1, f2, eta, &s, &wit.program, w)
}

/// Embedding `ι` of environments into internal states: node `v` carries the
/// features `(ρ(v), φ₁(v), …, φ_k(v))` in the layout's slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectEmbedding {
    pub layout: Arc<StateLayout>,
}

impl DirectEmbedding {
    pub fn new(layout: Arc<StateLayout>) -> Self {
        DirectEmbedding { layout }
    }

    fn check(&self, e: &EnvObject) -> Result<(), LawError> {
        if e.graph() != self.layout.graph() {
            return Err(LawError::Input(
                "environment graph differs from the observation graph".into(),
            ));
        }
        if e.channels() + 1 != self.layout.features() {
            return Err(LawError::Input(format!(
                "environment has {} fields per node, layout expects {}",
                e.channels() + 1,
                self.layout.features()
            )));
        }
        Ok(())
    }

    pub fn embed(&self, e: &EnvObject) -> Result<InternalState, LawError> {
        self.check(e)?;
        let values = DVector::from_iterator(
            self.layout.dim(),
            self.layout.slots().iter().map(|(n, f)| match f {
                0 => e.rho(*n).expect("checked node"),
                c => e.phi(*n).expect("checked node")[c - 1],
            }),
        );
        Ok(InternalState::new(values, Arc::clone(&self.layout))?)
    }

    /// Environment with the fields of `values` and the graph and constraints of `template`.
    pub fn restore(&self, template: &EnvObject, values: &DVector<f64>) -> Result<EnvObject, LawError> {
        self.check(template)?;
        let mut rho = BTreeMap::new();
        let mut phi: BTreeMap<_, _> = template
            .graph()
            .nodes()
            .map(|n| (n, vec![0.0; template.channels()]))
            .collect();
        for ((n, f), v) in self.layout.slots().iter().zip(values.iter()) {
            match f {
                0 => {
                    rho.insert(*n, *v);
                }
                c => phi.get_mut(n).expect("layout node")[c - 1] = *v,
            }
        }
        Ok(EnvObject::new(
            template.graph().clone(),
            rho,
            phi,
            template.chi().clone(),
        )?)
    }
}

/// Environment evolution `Ψ`: the field ODE of the reference dynamics
/// integrated with classical RK4 at the dynamics step. `amplitude_gain`
/// scales every control and is 1 for the matched construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEvolution {
    pub dynamics: ReferenceDynamics,
    pub amplitude_gain: f64,
}

impl FieldEvolution {
    pub fn matched(dynamics: ReferenceDynamics) -> Self {
        FieldEvolution {
            dynamics,
            amplitude_gain: 1.0,
        }
    }

    pub fn apply(&self, e: &EnvObject, p: &Program, iota: &DirectEmbedding) -> Result<EnvObject, LawError> {
        let scaled = Program::new(
            p.pieces()
                .iter()
                .map(|piece| Piece {
                    length: piece.length,
                    control: piece.control.iter().map(|u| u * self.amplitude_gain).collect(),
                })
                .collect(),
        )?;
        let s = iota.embed(e)?;
        let out = self.dynamics.integrate_rk4(s.values(), &scaled)?;
        iota.restore(e, &out)
    }
}

/// Residual of the static/operational square at `e` for program `p`:
/// `F(Ψ_p(E))` against `Π(Φ_p(ι(E)))`, with `F = Π ∘ ι` on objects.
pub fn compatibility_residual(
    iota: &DirectEmbedding,
    psi: &FieldEvolution,
    f: &SpeciesFunctor,
    e: &EnvObject,
    p: &Program,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    let evolved_env = match psi.apply(e, p, iota) {
        Ok(x) => x,
        Err(LawError::Env(_)) => return Ok(f64::INFINITY),
        Err(other) => return Err(other),
    };
    let left = f.observe(&iota.embed(&evolved_env)?)?;
    let right = f.observe(&f.run(&iota.embed(e)?, p)?)?;
    network_residual(&left, &right, w)
}

#[derive(Serialize, Deserialize)]
struct CompatibilityWitness {
    env: EnvObject,
    program: Program,
}

pub fn check_compatibility(
    iota: &DirectEmbedding,
    psi: &FieldEvolution,
    f: &SpeciesFunctor,
    envs: &[EnvObject],
    programs: &[Program],
    tol: f64,
    w: &DistanceWeights,
) -> Result<LawReport, LawError> {
    let mut worst = Worst::new();
    let mut samples = 0;
    for e in envs {
        for p in programs {
            let r = compatibility_residual(iota, psi, f, e, p, w)?;
            samples += 1;
            worst.offer(r, || {
                serde_json::to_value(CompatibilityWitness {
                    env: e.clone(),
                    program: p.clone(),
                })
                .expect("serializable")
            });
        }
    }
    Ok(LawReport::new("compatibility", None, samples, worst, tol))
}

pub fn replay_compatibility(
    iota: &DirectEmbedding,
    psi: &FieldEvolution,
    f: &SpeciesFunctor,
    witness: &Value,
    w: &DistanceWeights,
) -> Result<f64, LawError> {
    let wit: CompatibilityWitness =
        serde_json::from_value(witness.clone()).map_err(|e| LawError::Input(e.to_string()))?;
    compatibility_residual(iota, psi, f, &wit.env, &wit.program, w)
}

/// Ratio `d_Myc(F(E1), F(E2)) / d_Env(E1, E2)` for one pair, where
/// `F(E) = Π(Φ_window(ι(E)))`. `None` when both distances vanish.
pub fn lipschitz_ratio<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    iota: &DirectEmbedding,
    window: &Program,
    e1: &EnvObject,
    e2: &EnvObject,
    env_w: &EnvDistanceWeights,
    myc_w: &DistanceWeights,
) -> Result<Option<f64>, LawError> {
    let d_env = env_distance(e1, e2, env_w)?;
    let image = |e: &EnvObject| -> Result<MycObject, LawError> { f.observe(&f.run(&iota.embed(e)?, window)?) };
    let d_myc = network_residual(&image(e1)?, &image(e2)?, myc_w)?;
    Ok(match (d_env == 0.0, d_myc == 0.0) {
        (true, true) => None,
        (true, false) => Some(f64::INFINITY),
        (false, _) => Some(d_myc / d_env),
    })
}

/// Empirical Lipschitz constant over `pairs`; passes iff it is at most `bound`.
#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz<D: TransitionSystem>(
    f: &SpeciesFunctor<D>,
    iota: &DirectEmbedding,
    window: &Program,
    pairs: &[(EnvObject, EnvObject)],
    env_w: &EnvDistanceWeights,
    myc_w: &DistanceWeights,
    bound: f64,
) -> Result<LawReport, LawError> {
    let mut worst = Worst::new();
    let mut samples = 0;
    for (i, (e1, e2)) in pairs.iter().enumerate() {
        if let Some(r) = lipschitz_ratio(f, iota, window, e1, e2, env_w, myc_w)? {
            samples += 1;
            worst.offer(r, || json!({ "pair": i, "first": e1, "second": e2 }));
        }
    }
    Ok(LawReport::new("lipschitz", None, samples, worst, bound))
}

/// Finite category given by explicit arrows and a composition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteCategory {
    pub objects: usize,
    /// `(source, target)` of each arrow.
    pub arrows: Vec<(usize, usize)>,
    pub identities: Vec<usize>,
    /// `(f, g) ↦ g ∘ f` for every composable pair.
    pub compose: BTreeMap<(usize, usize), usize>,
}

impl FiniteCategory {
    /// Full subcategory of graphs on `graphs`, with every morphism enumerated.
    pub fn from_graphs(graphs: &[AttributedGraph], max_arrows: usize) -> Result<Self, LawError> {
        let mut arrows = Vec::new();
        let mut maps: Vec<GraphMorphism> = Vec::new();
        for (i, a) in graphs.iter().enumerate() {
            for (j, b) in graphs.iter().enumerate() {
                for m in enumerate_morphisms(a, b)? {
                    if maps.len() >= max_arrows {
                        return Err(LawError::Resource(format!("more than {max_arrows} arrows")));
                    }
                    arrows.push((i, j));
                    maps.push(m);
                }
            }
        }
        let index = |m: &GraphMorphism, s: usize, t: usize| {
            (0..maps.len())
                .find(|k| arrows[*k] == (s, t) && &maps[*k] == m)
                .expect("closed under composition")
        };
        let identities = graphs
            .iter()
            .enumerate()
            .map(|(i, g)| index(&GraphMorphism::identity(g), i, i))
            .collect();
        let mut compose = BTreeMap::new();
        for f in 0..maps.len() {
            for g in 0..maps.len() {
                if arrows[f].1 == arrows[g].0 {
                    let gf = compose_graph_morphisms(&maps[f], &maps[g])?;
                    compose.insert((f, g), index(&gf, arrows[f].0, arrows[g].1));
                }
            }
        }
        Ok(FiniteCategory {
            objects: graphs.len(),
            arrows,
            identities,
            compose,
        })
    }

    pub fn hom(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.arrows.len()).filter(move |k| self.arrows[*k] == (a, b))
    }

    fn then(&self, f: usize, g: usize) -> usize {
        self.compose[&(f, g)]
    }
}

/// Functor between finite categories given on objects and arrows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteFunctor {
    pub objects: Vec<usize>,
    pub arrows: Vec<usize>,
}

impl FiniteFunctor {
    pub fn identity(c: &FiniteCategory) -> Self {
        FiniteFunctor {
            objects: (0..c.objects).collect(),
            arrows: (0..c.arrows.len()).collect(),
        }
    }
}

/// Candidate bijection `Hom(F(e), m) → Hom(e, G(m))`, keyed by
/// `(e, m, arrow of the second category)`.
pub type HomBijection = BTreeMap<(usize, usize, usize), usize>;

/// `φ = id` for `F = G = id`.
pub fn identity_bijection(c: &FiniteCategory) -> HomBijection {
    let mut phi = BTreeMap::new();
    for e in 0..c.objects {
        for m in 0..c.objects {
            for h in c.hom(e, m) {
                phi.insert((e, m, h), h);
            }
        }
    }
    phi
}

/// Checks that `phi` is a bijection `Hom_D(F e, m) ≅ Hom_C(e, G m)` natural in
/// both arguments. The residual counts failed conditions; tolerance is zero.
pub fn check_adjunction(
    env: &FiniteCategory,
    myc: &FiniteCategory,
    f: &FiniteFunctor,
    g: &FiniteFunctor,
    phi: &HomBijection,
) -> Result<LawReport, LawError> {
    if f.objects.len() != env.objects
        || f.arrows.len() != env.arrows.len()
        || g.objects.len() != myc.objects
        || g.arrows.len() != myc.arrows.len()
    {
        return Err(LawError::Input("functor data does not cover its domain".into()));
    }
    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut first_failure: Option<Value> = None;
    let mut fail = |what: Value, failures: &mut usize| {
        *failures += 1;
        first_failure.get_or_insert(what);
    };
    for e in 0..env.objects {
        for m in 0..myc.objects {
            let left: Vec<usize> = myc.hom(f.objects[e], m).collect();
            let right: BTreeSet<usize> = env.hom(e, g.objects[m]).collect();
            let mut image = BTreeSet::new();
            for h in &left {
                checks += 1;
                match phi.get(&(e, m, *h)) {
                    Some(k) if right.contains(k) => {
                        if !image.insert(*k) {
                            fail(
                                json!({"condition": "injective", "env": e, "myc": m, "arrow": h}),
                                &mut failures,
                            );
                        }
                    }
                    _ => fail(
                        json!({"condition": "well_defined", "env": e, "myc": m, "arrow": h}),
                        &mut failures,
                    ),
                }
            }
            checks += 1;
            if image.len() != right.len() {
                fail(
                    json!({"condition": "surjective", "env": e, "myc": m,
                           "left_size": left.len(), "right_size": right.len()}),
                    &mut failures,
                );
            }
        }
    }
    // Naturality: φ(h ∘ F x) = φ(h) ∘ x and φ(y ∘ h) = G y ∘ φ(h).
    for (h_key, k) in phi.iter() {
        let (e, m, h) = *h_key;
        for x in 0..env.arrows.len() {
            if env.arrows[x].1 != e {
                continue;
            }
            let e0 = env.arrows[x].0;
            checks += 1;
            let lhs = phi.get(&(e0, m, myc.then(f.arrows[x], h)));
            if lhs != Some(&env.then(x, *k)) {
                fail(
                    json!({"condition": "natural_in_env", "env": e, "myc": m, "arrow": h, "along": x}),
                    &mut failures,
                );
            }
        }
        for y in 0..myc.arrows.len() {
            if myc.arrows[y].0 != m {
                continue;
            }
            let m1 = myc.arrows[y].1;
            checks += 1;
            let lhs = phi.get(&(e, m1, myc.then(h, y)));
            if lhs != Some(&env.then(*k, g.arrows[y])) {
                fail(
                    json!({"condition": "natural_in_myc", "env": e, "myc": m, "arrow": h, "along": y}),
                    &mut failures,
                );
            }
        }
    }
    let worst = Worst {
        residual: failures as f64,
        witness: first_failure.unwrap_or(Value::Null),
    };
    Ok(LawReport::new("adjunction", None, checks, worst, 0.0))
}

/// Random cospan of monomorphisms whose three graphs have at most `max_nodes`
/// nodes; the apex has at most two.
pub fn random_mono_cospan(rng: &mut impl Rng, max_nodes: usize) -> Cospan {
    let apex_nodes = rng.random_range(0..=max_nodes.min(2));
    let nodes: Vec<NodeId> = (0..apex_nodes as u64).map(NodeId).collect();
    let mut edges = Vec::new();
    if apex_nodes > 0 {
        for k in 0..rng.random_range(0..=apex_nodes) {
            let u = nodes[rng.random_range(0..apex_nodes)];
            let v = nodes[rng.random_range(0..apex_nodes)];
            edges.push((EdgeId(k as u64), (u, v)));
        }
    }
    let apex = AttributedGraph::new(nodes, edges).expect("valid apex");
    let left = random_extension(rng, &apex, max_nodes, 100);
    let right = random_extension(rng, &apex, max_nodes, 200);
    Cospan::new(left, right).expect("legs share the apex")
}

/// Injects `apex` into a larger graph with ids starting at `base`.
fn random_extension(rng: &mut impl Rng, apex: &AttributedGraph, max_nodes: usize, base: u64) -> GraphMorphism {
    let n = rng.random_range(apex.node_count()..=max_nodes.max(apex.node_count()));
    let nodes: Vec<NodeId> = (0..n as u64).map(|i| NodeId(base + i)).collect();
    let node_map: BTreeMap<NodeId, NodeId> = apex.nodes().zip(nodes.iter().copied()).collect();
    let mut edges = Vec::new();
    let mut edge_map = BTreeMap::new();
    for (e, (u, v)) in apex.edges() {
        let id = EdgeId(base + edges.len() as u64);
        edge_map.insert(e, id);
        edges.push((id, (node_map[&u], node_map[&v])));
    }
    if n > 0 {
        for _ in 0..rng.random_range(0..=2) {
            let u = nodes[rng.random_range(0..n)];
            let v = nodes[rng.random_range(0..n)];
            edges.push((EdgeId(base + edges.len() as u64), (u, v)));
        }
    }
    let target = AttributedGraph::new(nodes, edges).expect("valid extension");
    GraphMorphism::new(apex.clone(), target, node_map, edge_map).expect("incidence preserved")
}

/// Builds pushouts of `count` seeded random mono cospans and verifies each
/// against every probe graph up to `probe_bound` nodes. The residual counts
/// the failures.
pub fn check_pushouts(count: usize, max_nodes: usize, probe_bound: usize, seed: u64) -> Result<LawReport, LawError> {
    if count == 0 {
        return Err(LawError::Input("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    let mut failures = 0.0;
    for i in 0..count {
        let c = random_mono_cospan(&mut rng, max_nodes);
        let po = pushout_along_monos(&c)?;
        if !verify_pushout_universal_property(&c, &po, probe_bound)? {
            failures += 1.0;
            worst.offer(failures, || json!({ "sample": i, "cospan": c }));
        }
    }
    if failures == 0.0 {
        worst.witness = json!({ "max_nodes": max_nodes, "probe_bound": probe_bound });
    }
    Ok(LawReport::new("pushout", Some(seed), count, worst, 0.0))
}
