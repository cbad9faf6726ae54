//! Environmental and mycelial objects over attributed graphs.
//!
//! An environment carries a resource density `rho`, a chemical field `phi`
//! with `k` channels, and a constraint record `chi`. A mycelial state carries
//! edge conductivities `sigma` and per-node state features `omega` on a
//! connected graph.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::row_major;
use crate::graphcat::{
    compose_graph_morphisms, is_monomorphism, pushout_along_monos, AttributedGraph, Cospan, EdgeId, GraphError,
    GraphMorphism, NodeId,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("cannot compose: {0}")]
    Composition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("network graph is not connected")]
    NotConnected,
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Closed real interval, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for (f64, f64) {
    fn from(i: Interval) -> Self {
        (i.lo, i.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn is_valid(&self) -> bool {
        !self.lo.is_nan() && !self.hi.is_nan() && self.lo <= self.hi
    }
}

/// Constraint record `chi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub humidity: Interval,
    pub temperature: Interval,
    /// One admissible interval per chemical channel.
    pub phi_bounds: Vec<Interval>,
    /// Upper bound on total resource.
    pub budget: f64,
}

impl Constraints {
    pub fn intersect(&self, other: &Constraints) -> Result<Constraints, EnvError> {
        if self.phi_bounds.len() != other.phi_bounds.len() {
            return Err(EnvError::Shape(
                "constraint records have different channel counts".into(),
            ));
        }
        Ok(Constraints {
            humidity: self.humidity.intersect(&other.humidity),
            temperature: self.temperature.intersect(&other.temperature),
            phi_bounds: self
                .phi_bounds
                .iter()
                .zip(&other.phi_bounds)
                .map(|(a, b)| a.intersect(b))
                .collect(),
            budget: self.budget.min(other.budget),
        })
    }
}

/// Environmental object `(G, rho, phi, chi)`. Construction enforces admissibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvRepr", into = "EnvRepr")]
pub struct EnvObject {
    graph: AttributedGraph,
    rho: BTreeMap<NodeId, f64>,
    phi: BTreeMap<NodeId, Vec<f64>>,
    chi: Constraints,
}

#[derive(Serialize, Deserialize)]
struct EnvRepr {
    #[serde(flatten)]
    graph: AttributedGraph,
    rho: BTreeMap<NodeId, f64>,
    phi: BTreeMap<NodeId, Vec<f64>>,
    chi: Constraints,
}

impl TryFrom<EnvRepr> for EnvObject {
    type Error = EnvError;
    fn try_from(r: EnvRepr) -> Result<Self, EnvError> {
        EnvObject::new(r.graph, r.rho, r.phi, r.chi)
    }
}

impl From<EnvObject> for EnvRepr {
    fn from(e: EnvObject) -> Self {
        EnvRepr {
            graph: e.graph,
            rho: e.rho,
            phi: e.phi,
            chi: e.chi,
        }
    }
}

impl EnvObject {
    pub fn new(
        graph: AttributedGraph,
        rho: BTreeMap<NodeId, f64>,
        phi: BTreeMap<NodeId, Vec<f64>>,
        chi: Constraints,
    ) -> Result<Self, EnvError> {
        if !rho.keys().copied().eq(graph.nodes()) {
            return Err(EnvError::Shape("rho must be defined on exactly the graph nodes".into()));
        }
        if !phi.keys().copied().eq(graph.nodes()) {
            return Err(EnvError::Shape("phi must be defined on exactly the graph nodes".into()));
        }
        for (name, iv) in [("humidity", &chi.humidity), ("temperature", &chi.temperature)] {
            if !iv.is_valid() {
                return Err(EnvError::Constraint(format!("{name} interval is empty")));
            }
        }
        if chi.budget.is_nan() || chi.budget < 0.0 {
            return Err(EnvError::Constraint(format!("budget {} is negative", chi.budget)));
        }
        let k = chi.phi_bounds.len();
        for (n, r) in &rho {
            if !r.is_finite() || *r < 0.0 {
                return Err(EnvError::Constraint(format!("rho at {n} is {r}, must be nonnegative")));
            }
        }
        for (n, values) in &phi {
            if values.len() != k {
                return Err(EnvError::Shape(format!(
                    "phi at {n} has {} channels, chi declares {k}",
                    values.len()
                )));
            }
            for (c, (v, bound)) in values.iter().zip(&chi.phi_bounds).enumerate() {
                if !bound.contains(*v) {
                    return Err(EnvError::Constraint(format!(
                        "phi channel {c} at {n} is {v}, outside [{}, {}]",
                        bound.lo, bound.hi
                    )));
                }
            }
        }
        let total: f64 = rho.values().sum();
        if total > chi.budget {
            return Err(EnvError::Constraint(format!(
                "total resource {total} exceeds budget {}",
                chi.budget
            )));
        }
        Ok(EnvObject { graph, rho, phi, chi })
    }

    pub fn graph(&self) -> &AttributedGraph {
        &self.graph
    }

    pub fn rho(&self, n: NodeId) -> Option<f64> {
        self.rho.get(&n).copied()
    }

    pub fn phi(&self, n: NodeId) -> Option<&[f64]> {
        self.phi.get(&n).map(Vec::as_slice)
    }

    pub fn rho_map(&self) -> &BTreeMap<NodeId, f64> {
        &self.rho
    }

    pub fn phi_map(&self) -> &BTreeMap<NodeId, Vec<f64>> {
        &self.phi
    }

    pub fn chi(&self) -> &Constraints {
        &self.chi
    }

    pub fn channels(&self) -> usize {
        self.chi.phi_bounds.len()
    }

    pub fn total_resource(&self) -> f64 {
        self.rho.values().sum()
    }
}

/// Field transport rule. Every rule first pushes the field forward along the
/// graph map (summing over preimages, zero where there is none) and then
/// applies its own adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FieldRule {
    Pushforward,
    /// Adds offsets at target nodes; unlisted nodes get zero.
    Add {
        offsets: BTreeMap<NodeId, f64>,
    },
    Rescale {
        factor: f64,
    },
}

impl FieldRule {
    fn adjust(&self, n: NodeId, x: f64) -> f64 {
        match self {
            FieldRule::Pushforward => x,
            FieldRule::Add { offsets } => x + offsets.get(&n).copied().unwrap_or(0.0),
            FieldRule::Rescale { factor } => x * factor,
        }
    }

    fn validate(&self, target: &AttributedGraph) -> Result<(), EnvError> {
        match self {
            FieldRule::Pushforward => Ok(()),
            FieldRule::Add { offsets } => {
                for (n, v) in offsets {
                    if !target.contains_node(*n) {
                        return Err(EnvError::Parameter(format!("offset at {n} outside target graph")));
                    }
                    if !v.is_finite() {
                        return Err(EnvError::Parameter(format!("non-finite offset at {n}")));
                    }
                }
                Ok(())
            }
            FieldRule::Rescale { factor } if factor.is_finite() => Ok(()),
            FieldRule::Rescale { factor } => Err(EnvError::Parameter(format!("non-finite rescale factor {factor}"))),
        }
    }

    /// Rule equivalent to `self` along `f` followed by `next` along `g`.
    fn then(&self, next: &FieldRule, g: &GraphMorphism) -> Result<FieldRule, EnvError> {
        let push = |offsets: &BTreeMap<NodeId, f64>| {
            let mut out: BTreeMap<NodeId, f64> = BTreeMap::new();
            for (n, v) in offsets {
                *out.entry(g.node_image(*n).expect("total map")).or_default() += v;
            }
            out
        };
        use FieldRule::*;
        Ok(match (self, next) {
            (Pushforward, r) => r.clone(),
            (Add { offsets }, Pushforward) => Add { offsets: push(offsets) },
            (Add { offsets: a }, Add { offsets: b }) => {
                let mut sum = push(a);
                for (n, v) in b {
                    *sum.entry(*n).or_default() += v;
                }
                Add { offsets: sum }
            }
            (Rescale { factor }, Pushforward) => Rescale { factor: *factor },
            (Rescale { factor: a }, Rescale { factor: b }) => Rescale { factor: a * b },
            (a, b) => {
                return Err(EnvError::Composition(format!(
                    "{} followed by {} is not a single rule",
                    a.name(),
                    b.name()
                )))
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            FieldRule::Pushforward => "pushforward",
            FieldRule::Add { .. } => "add",
            FieldRule::Rescale { .. } => "rescale",
        }
    }
}

/// Constraint map: identity, or intersection with a tighter record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiMap {
    Identity,
    Tighten(Constraints),
}

/// Admissible environment transformation `(f_G, f_rho, f_phi, f_chi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvMorphism {
    pub graph_map: GraphMorphism,
    pub rho: FieldRule,
    /// One rule per chemical channel.
    pub phi: Vec<FieldRule>,
    pub chi: ChiMap,
}

impl EnvMorphism {
    pub fn new(graph_map: GraphMorphism, rho: FieldRule, phi: Vec<FieldRule>, chi: ChiMap) -> Result<Self, EnvError> {
        for r in std::iter::once(&rho).chain(&phi) {
            r.validate(graph_map.target())?;
        }
        if let ChiMap::Tighten(c) = &chi {
            if c.phi_bounds.len() != phi.len() {
                return Err(EnvError::Shape(
                    "tightened constraints disagree on channel count".into(),
                ));
            }
        }
        Ok(EnvMorphism {
            graph_map,
            rho,
            phi,
            chi,
        })
    }

    pub fn identity(e: &EnvObject) -> Self {
        EnvMorphism {
            graph_map: GraphMorphism::identity(e.graph()),
            rho: FieldRule::Pushforward,
            phi: vec![FieldRule::Pushforward; e.channels()],
            chi: ChiMap::Identity,
        }
    }

    /// Short pulse on one chemical channel at the given nodes; graph, resource
    /// and constraints are unchanged.
    pub fn channel_pulse(e: &EnvObject, channel: usize, offsets: BTreeMap<NodeId, f64>) -> Result<Self, EnvError> {
        if channel >= e.channels() {
            return Err(EnvError::Parameter(format!("no chemical channel {channel}")));
        }
        let mut phi = vec![FieldRule::Pushforward; e.channels()];
        phi[channel] = FieldRule::Add { offsets };
        Self::new(
            GraphMorphism::identity(e.graph()),
            FieldRule::Pushforward,
            phi,
            ChiMap::Identity,
        )
    }
}

fn pushforward<T: Copy>(
    f: &GraphMorphism,
    values: impl Iterator<Item = (NodeId, T)>,
    zero: T,
    add: impl Fn(T, T) -> T,
) -> BTreeMap<NodeId, T> {
    let mut out: BTreeMap<NodeId, T> = f.target().nodes().map(|n| (n, zero)).collect();
    for (n, v) in values {
        let slot = out.get_mut(&f.node_image(n).expect("total map")).expect("target node");
        *slot = add(*slot, v);
    }
    out
}

/// Transports `e` along `f`. The result is validated against the mapped
/// constraints, so admissibility failures surface as constraint errors.
pub fn apply_env_morphism(e: &EnvObject, f: &EnvMorphism) -> Result<EnvObject, EnvError> {
    if f.graph_map.source() != e.graph() {
        return Err(EnvError::Precondition(
            "morphism source graph differs from the object graph".into(),
        ));
    }
    if f.phi.len() != e.channels() {
        return Err(EnvError::Shape(format!(
            "morphism has {} channel rules, object has {} channels",
            f.phi.len(),
            e.channels()
        )));
    }
    let g = &f.graph_map;
    let rho: BTreeMap<NodeId, f64> = pushforward(g, e.rho.iter().map(|(n, v)| (*n, *v)), 0.0, |a, b| a + b)
        .into_iter()
        .map(|(n, v)| (n, f.rho.adjust(n, v)))
        .collect();
    let mut phi: BTreeMap<NodeId, Vec<f64>> = g.target().nodes().map(|n| (n, vec![0.0; e.channels()])).collect();
    for (c, rule) in f.phi.iter().enumerate() {
        let channel = pushforward(g, e.phi.iter().map(|(n, v)| (*n, v[c])), 0.0, |a, b| a + b);
        for (n, v) in channel {
            phi.get_mut(&n).expect("target node")[c] = rule.adjust(n, v);
        }
    }
    let chi = match &f.chi {
        ChiMap::Identity => e.chi.clone(),
        ChiMap::Tighten(c) => e.chi.intersect(c)?,
    };
    EnvObject::new(g.target().clone(), rho, phi, chi)
}

/// `g ∘ f` as a single morphism: additive offsets sum (after transport),
/// rescalings multiply, and constraint tightenings intersect.
pub fn compose_env_morphisms(f: &EnvMorphism, g: &EnvMorphism) -> Result<EnvMorphism, EnvError> {
    if f.phi.len() != g.phi.len() {
        return Err(EnvError::Composition("channel counts differ".into()));
    }
    let graph_map = compose_graph_morphisms(&f.graph_map, &g.graph_map)
        .map_err(|_| EnvError::Composition("target of the first morphism is not the source of the second".into()))?;
    let rho = f.rho.then(&g.rho, &g.graph_map)?;
    let phi = f
        .phi
        .iter()
        .zip(&g.phi)
        .map(|(a, b)| a.then(b, &g.graph_map))
        .collect::<Result<Vec<_>, _>>()?;
    let chi = match (&f.chi, &g.chi) {
        (ChiMap::Identity, c) | (c, ChiMap::Identity) => c.clone(),
        (ChiMap::Tighten(a), ChiMap::Tighten(b)) => ChiMap::Tighten(a.intersect(b)?),
    };
    EnvMorphism::new(graph_map, rho, phi, chi)
}

/// Weights of the three parts of the environment distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvDistanceWeights {
    pub rho: f64,
    pub phi: f64,
    pub structure: f64,
}

impl Default for EnvDistanceWeights {
    fn default() -> Self {
        EnvDistanceWeights {
            rho: 1.0,
            phi: 1.0,
            structure: 1.0,
        }
    }
}

/// L1 distance between environments over a shared id universe: field
/// differences on matched nodes, full field norms on unmatched ones, and the
/// symmetric difference of node and edge sets.
pub fn env_distance(e1: &EnvObject, e2: &EnvObject, w: &EnvDistanceWeights) -> Result<f64, EnvError> {
    check_weights(&[w.rho, w.phi, w.structure])?;
    let rho = keyed_l1(&e1.rho, &e2.rho, |a, b| (a - b).abs(), |a| a.abs());
    let phi = keyed_l1(&e1.phi, &e2.phi, |a, b| l1_padded(a, b), |a| l1_padded(a, &[]));
    let structure = structural_difference(e1.graph(), e2.graph());
    Ok(w.rho * rho + w.phi * phi + w.structure * structure)
}

/// Mycelial network state `(T, sigma, omega)` on a connected graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MycRepr", into = "MycRepr")]
pub struct MycObject {
    graph: AttributedGraph,
    sigma: BTreeMap<EdgeId, f64>,
    omega: BTreeMap<NodeId, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MycRepr {
    #[serde(flatten)]
    graph: AttributedGraph,
    sigma: BTreeMap<EdgeId, f64>,
    omega: BTreeMap<NodeId, Vec<f64>>,
}

impl TryFrom<MycRepr> for MycObject {
    type Error = EnvError;
    fn try_from(r: MycRepr) -> Result<Self, EnvError> {
        MycObject::new(r.graph, r.sigma, r.omega)
    }
}

impl From<MycObject> for MycRepr {
    fn from(m: MycObject) -> Self {
        MycRepr {
            graph: m.graph,
            sigma: m.sigma,
            omega: m.omega,
        }
    }
}

impl MycObject {
    pub fn new(
        graph: AttributedGraph,
        sigma: BTreeMap<EdgeId, f64>,
        omega: BTreeMap<NodeId, Vec<f64>>,
    ) -> Result<Self, EnvError> {
        if !graph.is_connected() {
            return Err(EnvError::NotConnected);
        }
        if !sigma.keys().copied().eq(graph.edges().map(|(e, _)| e)) {
            return Err(EnvError::Shape(
                "sigma must be defined on exactly the graph edges".into(),
            ));
        }
        if let Some((e, s)) = sigma.iter().find(|(_, s)| !s.is_finite() || **s < 0.0) {
            return Err(EnvError::Constraint(format!(
                "sigma at {e} is {s}, must be nonnegative"
            )));
        }
        if !omega.keys().copied().eq(graph.nodes()) {
            return Err(EnvError::Shape(
                "omega must be defined on exactly the graph nodes".into(),
            ));
        }
        let mut lengths = omega.values().map(Vec::len);
        if let Some(m) = lengths.next() {
            if lengths.any(|l| l != m) {
                return Err(EnvError::Shape("omega vectors have different lengths".into()));
            }
        }
        if omega.values().flatten().any(|v| !v.is_finite()) {
            return Err(EnvError::Numeric("non-finite omega feature".into()));
        }
        Ok(MycObject { graph, sigma, omega })
    }

    pub fn graph(&self) -> &AttributedGraph {
        &self.graph
    }

    pub fn sigma(&self, e: EdgeId) -> Option<f64> {
        self.sigma.get(&e).copied()
    }

    pub fn omega(&self, n: NodeId) -> Option<&[f64]> {
        self.omega.get(&n).map(Vec::as_slice)
    }

    pub fn sigma_map(&self) -> &BTreeMap<EdgeId, f64> {
        &self.sigma
    }

    pub fn omega_map(&self) -> &BTreeMap<NodeId, Vec<f64>> {
        &self.omega
    }

    /// Feature dimension `m` (zero for the empty network).
    pub fn features(&self) -> usize {
        self.omega.values().next().map_or(0, Vec::len)
    }

    /// Omega vectors stacked in sorted node order.
    pub fn stacked_omega(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.omega.len() * self.features(),
            self.omega.values().flatten().copied(),
        )
    }

    /// Total conductivity of edges incident to `n` (a loop counts once).
    pub fn incident_weight(&self, n: NodeId) -> f64 {
        self.graph.incident_edges(n).map(|e| self.sigma[&e]).sum()
    }
}

/// How values identified onto one element are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    Sum,
    Max,
    Mean,
    /// Mean weighted by per-contribution weights; falls back to the plain mean
    /// when all weights vanish. On conductivities it is the plain mean.
    WeightedMean,
}

impl std::str::FromStr for MergeRule {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s {
            "sum" => Ok(MergeRule::Sum),
            "max" => Ok(MergeRule::Max),
            "mean" => Ok(MergeRule::Mean),
            "weighted_mean" => Ok(MergeRule::WeightedMean),
            other => Err(EnvError::Parameter(format!("unknown merge rule {other:?}"))),
        }
    }
}

impl MergeRule {
    /// Merges feature vectors component-wise; `weights` is used only by
    /// [`MergeRule::WeightedMean`].
    pub fn merge(&self, values: &[&[f64]], weights: &[f64]) -> Vec<f64> {
        let m = values.first().map_or(0, |v| v.len());
        let count = values.len() as f64;
        let total_w: f64 = weights.iter().sum();
        (0..m)
            .map(|c| {
                let col = values.iter().map(|v| v[c]);
                match self {
                    MergeRule::Sum => col.sum(),
                    MergeRule::Max => col.fold(f64::NEG_INFINITY, f64::max),
                    MergeRule::Mean => col.sum::<f64>() / count,
                    MergeRule::WeightedMean if total_w > 0.0 => {
                        col.zip(weights).map(|(v, w)| v * w).sum::<f64>() / total_w
                    }
                    MergeRule::WeightedMean => col.sum::<f64>() / count,
                }
            })
            .collect()
    }

    pub fn merge_scalar(&self, values: &[f64]) -> f64 {
        let rows: Vec<[f64; 1]> = values.iter().map(|v| [*v]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        self.merge(&refs, &[])[0]
    }
}

/// State-feature part of a network morphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaUpdate {
    /// Features of identified nodes are merged by the rule.
    Merge(MergeRule),
    /// Linear map on [`MycObject::stacked_omega`]; requires an identity graph map.
    Linear(#[serde(with = "row_major")] DMatrix<f64>),
}

/// Structure-compatible network update `(g_T, g_sigma, g_omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MycMorphism {
    source: MycObject,
    target: MycObject,
    graph_map: GraphMorphism,
    sigma: MergeRule,
    omega: OmegaUpdate,
}

impl MycMorphism {
    pub fn new(
        source: MycObject,
        target: MycObject,
        graph_map: GraphMorphism,
        sigma: MergeRule,
        omega: OmegaUpdate,
    ) -> Result<Self, EnvError> {
        if graph_map.source() != source.graph() || graph_map.target() != target.graph() {
            return Err(EnvError::Shape("graph map does not connect the given networks".into()));
        }
        if let OmegaUpdate::Linear(m) = &omega {
            if !graph_map.is_identity() {
                return Err(EnvError::Shape(
                    "linear state update requires an identity graph map".into(),
                ));
            }
            let n = source.omega.len() * source.features();
            if m.shape() != (n, n) || target.features() != source.features() {
                return Err(EnvError::Shape(format!("state update must be {n}x{n}")));
            }
        }
        Ok(MycMorphism {
            source,
            target,
            graph_map,
            sigma,
            omega,
        })
    }

    /// Inclusion-style morphism whose target fields are the merged transport of
    /// the source fields along `graph_map`.
    pub fn transported(
        source: MycObject,
        graph_map: GraphMorphism,
        sigma: MergeRule,
        omega: MergeRule,
    ) -> Result<Self, EnvError> {
        let target = transport(&source, &graph_map, sigma, omega)?;
        Self::new(source, target, graph_map, sigma, OmegaUpdate::Merge(omega))
    }

    pub fn identity(m: &MycObject) -> Self {
        MycMorphism {
            source: m.clone(),
            target: m.clone(),
            graph_map: GraphMorphism::identity(m.graph()),
            sigma: MergeRule::Sum,
            omega: OmegaUpdate::Linear(DMatrix::identity(m.stacked_omega().len(), m.stacked_omega().len())),
        }
    }

    pub fn source(&self) -> &MycObject {
        &self.source
    }

    pub fn target(&self) -> &MycObject {
        &self.target
    }

    pub fn graph_map(&self) -> &GraphMorphism {
        &self.graph_map
    }

    pub fn sigma_rule(&self) -> MergeRule {
        self.sigma
    }

    pub fn omega_update(&self) -> &OmegaUpdate {
        &self.omega
    }

    /// Identity graph map, identical endpoints, and a unit state update.
    pub fn is_identity(&self) -> bool {
        self.graph_map.is_identity()
            && self.source == self.target
            && match &self.omega {
                OmegaUpdate::Linear(m) => m.is_identity(0.0),
                OmegaUpdate::Merge(_) => true,
            }
    }

    /// Largest absolute deviation between the stored target fields and the
    /// fields recomputed from the source by the morphism's rules.
    ///
    /// For merge updates only elements in the image are compared.
    pub fn transport_residual(&self) -> f64 {
        match &self.omega {
            OmegaUpdate::Linear(m) => {
                let predicted = m * self.source.stacked_omega();
                let sigma_gap = self
                    .source
                    .sigma
                    .iter()
                    .map(|(e, s)| (s - self.target.sigma[e]).abs())
                    .fold(0.0, f64::max);
                (predicted - self.target.stacked_omega()).amax().max(sigma_gap)
            }
            OmegaUpdate::Merge(rule) => match transport(&self.source, &self.graph_map, self.sigma, *rule) {
                Ok(t) => {
                    let image_nodes: Vec<NodeId> = self.graph_map.node_map().values().copied().collect();
                    let image_edges: Vec<EdgeId> = self.graph_map.edge_map().values().copied().collect();
                    let w = image_nodes
                        .iter()
                        .map(|n| l1_padded(&t.omega[n], &self.target.omega[n]))
                        .fold(0.0, f64::max);
                    let s = image_edges
                        .iter()
                        .map(|e| (t.sigma[e] - self.target.sigma[e]).abs())
                        .fold(0.0, f64::max);
                    w.max(s)
                }
                Err(_) => f64::INFINITY,
            },
        }
    }
}

/// Pushes `source`'s fields along `g`: identified elements merge by the rules,
/// elements outside the image get zero.
fn transport(source: &MycObject, g: &GraphMorphism, sigma: MergeRule, omega: MergeRule) -> Result<MycObject, EnvError> {
    let mut edge_pre: BTreeMap<EdgeId, Vec<f64>> = BTreeMap::new();
    for (e, s) in &source.sigma {
        edge_pre
            .entry(g.edge_image(*e).expect("total map"))
            .or_default()
            .push(*s);
    }
    let new_sigma = g
        .target()
        .edges()
        .map(|(e, _)| (e, edge_pre.get(&e).map_or(0.0, |v| sigma.merge_scalar(v))))
        .collect();
    let mut node_pre: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for n in source.graph.nodes() {
        node_pre.entry(g.node_image(n).expect("total map")).or_default().push(n);
    }
    let m = source.features();
    let new_omega = g
        .target()
        .nodes()
        .map(|n| {
            let v = match node_pre.get(&n) {
                Some(pre) => {
                    let vals: Vec<&[f64]> = pre.iter().map(|p| source.omega[p].as_slice()).collect();
                    let ws: Vec<f64> = pre.iter().map(|p| source.incident_weight(*p)).collect();
                    omega.merge(&vals, &ws)
                }
                None => vec![0.0; m],
            };
            (n, v)
        })
        .collect();
    MycObject::new(g.target().clone(), new_sigma, new_omega)
}

/// `g ∘ f` for network morphisms. Merge rules must agree; linear updates multiply.
pub fn compose_myc_morphisms(f: &MycMorphism, g: &MycMorphism) -> Result<MycMorphism, EnvError> {
    if f.target != g.source {
        return Err(EnvError::Composition(
            "target of the first morphism is not the source of the second".into(),
        ));
    }
    if f.sigma != g.sigma {
        return Err(EnvError::Composition("conductivity merge rules differ".into()));
    }
    let omega = match (&f.omega, &g.omega) {
        (OmegaUpdate::Linear(a), OmegaUpdate::Linear(b)) => OmegaUpdate::Linear(b * a),
        (OmegaUpdate::Merge(a), OmegaUpdate::Merge(b)) if a == b => OmegaUpdate::Merge(*a),
        _ => return Err(EnvError::Composition("state updates are of different kinds".into())),
    };
    let graph_map = compose_graph_morphisms(&f.graph_map, &g.graph_map)?;
    MycMorphism::new(f.source.clone(), g.target.clone(), graph_map, f.sigma, omega)
}

/// Weights of the three parts of the network distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub omega: f64,
    pub sigma: f64,
    pub structure: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights {
            omega: 1.0,
            sigma: 1.0,
            structure: 1.0,
        }
    }
}

fn check_weights(ws: &[f64]) -> Result<(), EnvError> {
    if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(EnvError::Parameter(format!(
            "distance weights must be nonnegative, got {ws:?}"
        )));
    }
    Ok(())
}

fn l1_padded(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .sum()
}

fn keyed_l1<K: Ord, V>(
    a: &BTreeMap<K, V>,
    b: &BTreeMap<K, V>,
    both: impl Fn(&V, &V) -> f64,
    one: impl Fn(&V) -> f64,
) -> f64 {
    let mut total = 0.0;
    for (k, v) in a {
        total += match b.get(k) {
            Some(w) => both(v, w),
            None => one(v),
        };
    }
    for (k, w) in b {
        if !a.contains_key(k) {
            total += one(w);
        }
    }
    total
}

/// Size of the symmetric difference of node sets plus edge sets, where an edge
/// is identified by its id together with its endpoints.
fn structural_difference(g1: &AttributedGraph, g2: &AttributedGraph) -> f64 {
    let nodes =
        g1.nodes().filter(|n| !g2.contains_node(*n)).count() + g2.nodes().filter(|n| !g1.contains_node(*n)).count();
    let edges = g1.edges().filter(|(e, ends)| g2.endpoints(*e) != Some(*ends)).count()
        + g2.edges().filter(|(e, ends)| g1.endpoints(*e) != Some(*ends)).count();
    (nodes + edges) as f64
}

/// Weighted L1 network distance over a shared id universe.
///
/// Parts: omega differences on matched nodes (unmatched nodes contribute their
/// full feature norm), sigma differences on matched edges (likewise), and the
/// symmetric difference of node and edge sets.
pub fn myc_distance(m1: &MycObject, m2: &MycObject, w: &DistanceWeights) -> Result<f64, EnvError> {
    check_weights(&[w.omega, w.sigma, w.structure])?;
    let omega = keyed_l1(&m1.omega, &m2.omega, |a, b| l1_padded(a, b), |a| l1_padded(a, &[]));
    let matched = |m: &MycObject, other: &MycObject, e: &EdgeId| m.graph.endpoints(*e) == other.graph.endpoints(*e);
    let mut sigma = 0.0;
    for (e, s) in &m1.sigma {
        sigma += if matched(m1, m2, e) {
            (s - m2.sigma[e]).abs()
        } else {
            s.abs()
        };
    }
    for (e, s) in &m2.sigma {
        if !matched(m2, m1, e) {
            sigma += s.abs();
        }
    }
    let structure = structural_difference(&m1.graph, &m2.graph);
    Ok(w.omega * omega + w.sigma * sigma + w.structure * structure)
}

/// Merge rules used when fusing two networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub sigma: MergeRule,
    pub omega: MergeRule,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            sigma: MergeRule::Sum,
            omega: MergeRule::WeightedMean,
        }
    }
}

/// Fuses `B = m1.target` and `C = m2.target` along the shared network `a`.
///
/// The graph is the pushout of the two inclusions. Identified edges merge
/// their conductivities and identified nodes their features according to
/// `merge`; for the weighted mean each contribution is weighted by the total
/// conductivity incident to that node in its own network.
pub fn anastomosis(
    a: &MycObject,
    m1: &MycMorphism,
    m2: &MycMorphism,
    merge: &MergeConfig,
) -> Result<MycObject, EnvError> {
    if m1.source() != a || m2.source() != a {
        return Err(EnvError::Precondition(
            "both legs must start at the shared network".into(),
        ));
    }
    for (leg, name) in [(m1, "first"), (m2, "second")] {
        if !is_monomorphism(leg.graph_map()) {
            return Err(EnvError::Precondition(format!("{name} leg is not a monomorphism")));
        }
    }
    let cospan = Cospan::new(m1.graph_map().clone(), m2.graph_map().clone())?;
    let po = pushout_along_monos(&cospan)?;
    let (b, c) = (m1.target(), m2.target());

    let mut edge_vals: BTreeMap<EdgeId, Vec<f64>> = BTreeMap::new();
    for (side, inj) in [(b, &po.from_left), (c, &po.from_right)] {
        for (e, s) in side.sigma_map() {
            edge_vals
                .entry(inj.edge_image(*e).expect("total"))
                .or_default()
                .push(*s);
        }
    }
    let sigma: BTreeMap<EdgeId, f64> = edge_vals
        .into_iter()
        .map(|(e, v)| {
            (
                e,
                if v.len() == 1 {
                    v[0]
                } else {
                    merge.sigma.merge_scalar(&v)
                },
            )
        })
        .collect();

    let mut node_vals: BTreeMap<NodeId, Vec<(&[f64], f64)>> = BTreeMap::new();
    for (side, inj) in [(b, &po.from_left), (c, &po.from_right)] {
        for (n, w) in side.omega_map() {
            node_vals
                .entry(inj.node_image(*n).expect("total"))
                .or_default()
                .push((w.as_slice(), side.incident_weight(*n)));
        }
    }
    let omega: BTreeMap<NodeId, Vec<f64>> = node_vals
        .into_iter()
        .map(|(n, v)| {
            let merged = if v.len() == 1 {
                v[0].0.to_vec()
            } else {
                let vals: Vec<&[f64]> = v.iter().map(|(x, _)| *x).collect();
                let ws: Vec<f64> = v.iter().map(|(_, w)| *w).collect();
                merge.omega.merge(&vals, &ws)
            };
            (n, merged)
        })
        .collect();

    if sigma.values().any(|s| s.is_nan()) || omega.values().flatten().any(|x| x.is_nan()) {
        return Err(EnvError::Numeric("merge produced NaN".into()));
    }
    MycObject::new(po.object, sigma, omega)
}
