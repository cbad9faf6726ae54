//! Programs as piecewise-constant control signals and their semantics.
//!
//! The reference transition system is the bilinear control system
//! `dS/dt = (A0 + Σᵢ uᵢ·Aᵢ)·S`, integrated exactly piece by piece with the
//! matrix exponential, so the generators of every pulse are known in closed
//! form.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{all_finite, row_major, row_major_list, vec_norm_inf};
use crate::envmyc::{EnvError, MergeRule, MycMorphism, MycObject, OmegaUpdate};
use crate::graphcat::{AttributedGraph, EdgeId, GraphMorphism, NodeId};
use crate::lie::{expm, LieError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("piece {index} has invalid length {length}; lengths must be positive and finite")]
    BadPieceLength { index: usize, length: f64 },
    #[error("piece {0} has a non-finite control value")]
    NonFiniteControl(usize),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid dynamics: {0}")]
    Dynamics(String),
}

impl From<LieError> for ProgramError {
    fn from(e: LieError) -> Self {
        match e {
            LieError::NonFinite => ProgramError::Numeric("non-finite matrix entry".into()),
            other => ProgramError::Numeric(other.to_string()),
        }
    }
}

/// One constant-control segment of a program. Serialized as `[length, [u...]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, Vec<f64>)", into = "(f64, Vec<f64>)")]
pub struct Piece {
    pub length: f64,
    pub control: Vec<f64>,
}

impl From<(f64, Vec<f64>)> for Piece {
    fn from((length, control): (f64, Vec<f64>)) -> Self {
        Piece { length, control }
    }
}

impl From<Piece> for (f64, Vec<f64>) {
    fn from(p: Piece) -> Self {
        (p.length, p.control)
    }
}

/// Piecewise-constant control signal. The empty program is the identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ProgramRepr", into = "ProgramRepr")]
pub struct Program {
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct ProgramRepr {
    pieces: Vec<Piece>,
}

impl TryFrom<ProgramRepr> for Program {
    type Error = ProgramError;
    fn try_from(r: ProgramRepr) -> Result<Self, ProgramError> {
        Program::new(r.pieces)
    }
}

impl From<Program> for ProgramRepr {
    fn from(p: Program) -> Self {
        ProgramRepr { pieces: p.pieces }
    }
}

impl Program {
    pub fn new(pieces: Vec<Piece>) -> Result<Self, ProgramError> {
        for (index, p) in pieces.iter().enumerate() {
            if !(p.length > 0.0 && p.length.is_finite()) {
                return Err(ProgramError::BadPieceLength {
                    index,
                    length: p.length,
                });
            }
            if p.control.iter().any(|u| !u.is_finite()) {
                return Err(ProgramError::NonFiniteControl(index));
            }
        }
        Ok(Program { pieces })
    }

    pub fn null() -> Self {
        Program { pieces: Vec::new() }
    }

    /// Single constant piece.
    pub fn pulse(length: f64, control: Vec<f64>) -> Result<Self, ProgramError> {
        Self::new(vec![Piece { length, control }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_null(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }

    /// Control value at time `tau`. Pieces cover half-open intervals
    /// `(start, end]`; `tau = 0` reads the first piece.
    pub fn control_at(&self, tau: f64) -> Option<&[f64]> {
        if tau < 0.0 {
            return None;
        }
        let mut end = 0.0;
        for p in &self.pieces {
            end += p.length;
            if tau <= end {
                return Some(&p.control);
            }
        }
        None
    }
}

/// `first` followed by `second`.
pub fn concatenate(first: &Program, second: &Program) -> Program {
    Program {
        pieces: first.pieces.iter().chain(&second.pieces).cloned().collect(),
    }
}

/// Deterministic evolution of state vectors under programs.
pub trait TransitionSystem {
    fn dim(&self) -> usize;

    /// Length of the control vectors accepted by the system.
    fn control_dim(&self) -> usize;

    /// Linear map taking the initial state to the final state.
    fn flow_matrix(&self, p: &Program) -> Result<DMatrix<f64>, ProgramError>;

    fn evolve_vector(&self, s: &DVector<f64>, p: &Program) -> Result<DVector<f64>, ProgramError> {
        check_len(self.dim(), s.len())?;
        Ok(self.flow_matrix(p)? * s)
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), ProgramError> {
    if expected != got {
        return Err(ProgramError::Shape(format!(
            "state has length {got}, dynamics expects {expected}"
        )));
    }
    Ok(())
}

/// Bilinear reference dynamics `dS/dt = (A0 + Σᵢ uᵢ·Aᵢ)·S`.
///
/// `step` is the fixed step used by the stepped integrator
/// [`ReferenceDynamics::integrate_rk4`]; exact evolution does not use it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DynamicsRepr", into = "DynamicsRepr")]
pub struct ReferenceDynamics {
    drift: DMatrix<f64>,
    controls: Vec<DMatrix<f64>>,
    step: f64,
}

#[derive(Serialize, Deserialize)]
struct DynamicsRepr {
    #[serde(with = "row_major")]
    drift: DMatrix<f64>,
    #[serde(with = "row_major_list", default)]
    controls: Vec<DMatrix<f64>>,
    #[serde(default = "default_step")]
    step: f64,
}

fn default_step() -> f64 {
    1e-3
}

impl TryFrom<DynamicsRepr> for ReferenceDynamics {
    type Error = ProgramError;
    fn try_from(r: DynamicsRepr) -> Result<Self, ProgramError> {
        ReferenceDynamics::new(r.drift, r.controls, r.step)
    }
}

impl From<ReferenceDynamics> for DynamicsRepr {
    fn from(d: ReferenceDynamics) -> Self {
        DynamicsRepr {
            drift: d.drift,
            controls: d.controls,
            step: d.step,
        }
    }
}

impl ReferenceDynamics {
    pub fn new(drift: DMatrix<f64>, controls: Vec<DMatrix<f64>>, step: f64) -> Result<Self, ProgramError> {
        let n = drift.nrows();
        if drift.ncols() != n {
            return Err(ProgramError::Dynamics(format!(
                "drift must be square, got {}x{}",
                n,
                drift.ncols()
            )));
        }
        for (i, a) in controls.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(ProgramError::Dynamics(format!(
                    "control matrix {i} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        if !all_finite(&drift) || !controls.iter().all(all_finite) {
            return Err(ProgramError::Numeric("non-finite dynamics matrix entry".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(ProgramError::Dynamics(format!(
                "integrator step must be positive, got {step}"
            )));
        }
        Ok(ReferenceDynamics { drift, controls, step })
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn controls(&self) -> &[DMatrix<f64>] {
        &self.controls
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `A0 + Σᵢ uᵢ·Aᵢ`.
    pub fn generator(&self, control: &[f64]) -> Result<DMatrix<f64>, ProgramError> {
        if control.len() != self.controls.len() {
            return Err(ProgramError::Shape(format!(
                "control has {} channels, dynamics has {}",
                control.len(),
                self.controls.len()
            )));
        }
        let mut g = self.drift.clone();
        for (u, a) in control.iter().zip(&self.controls) {
            g += a * *u;
        }
        Ok(g)
    }

    pub fn piece_flow(&self, piece: &Piece) -> Result<DMatrix<f64>, ProgramError> {
        Ok(expm(&(self.generator(&piece.control)? * piece.length))?)
    }

    /// Applies `M ↦ P·M·P⁻¹` to every matrix.
    pub fn conjugated(&self, p: &DMatrix<f64>) -> Result<Self, ProgramError> {
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| ProgramError::Dynamics("similarity transform is singular".into()))?;
        let conj = |m: &DMatrix<f64>| p * m * &p_inv;
        Self::new(conj(&self.drift), self.controls.iter().map(conj).collect(), self.step)
    }

    /// Copy with control matrix `channel` replaced.
    pub fn with_control(&self, channel: usize, matrix: DMatrix<f64>) -> Result<Self, ProgramError> {
        let mut controls = self.controls.clone();
        *controls
            .get_mut(channel)
            .ok_or_else(|| ProgramError::Shape(format!("no control channel {channel}")))? = matrix;
        Self::new(self.drift.clone(), controls, self.step)
    }

    /// Fixed-step classical Runge–Kutta integration with step at most `step`.
    pub fn integrate_rk4(&self, s: &DVector<f64>, p: &Program) -> Result<DVector<f64>, ProgramError> {
        check_len(self.dim(), s.len())?;
        let mut x = s.clone();
        for piece in p.pieces() {
            let g = self.generator(&piece.control)?;
            let steps = (piece.length / self.step).ceil().max(1.0) as usize;
            let h = piece.length / steps as f64;
            for _ in 0..steps {
                let k1 = &g * &x;
                let k2 = &g * (&x + &k1 * (h / 2.0));
                let k3 = &g * (&x + &k2 * (h / 2.0));
                let k4 = &g * (&x + &k3 * h);
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        Ok(x)
    }
}

impl TransitionSystem for ReferenceDynamics {
    fn dim(&self) -> usize {
        self.drift.nrows()
    }

    fn control_dim(&self) -> usize {
        self.controls.len()
    }

    fn flow_matrix(&self, p: &Program) -> Result<DMatrix<f64>, ProgramError> {
        let n = self.dim();
        let mut flow = DMatrix::identity(n, n);
        for piece in p.pieces() {
            flow = self.piece_flow(piece)? * flow;
        }
        Ok(flow)
    }

    fn evolve_vector(&self, s: &DVector<f64>, p: &Program) -> Result<DVector<f64>, ProgramError> {
        check_len(self.dim(), s.len())?;
        let mut x = s.clone();
        for piece in p.pieces() {
            x = self.piece_flow(piece)? * x;
        }
        Ok(x)
    }
}

/// Deliberately non-causal system: at every piece boundary the state is reset
/// to the program's input, so only the last piece has any effect. Used to
/// check that the law harness catches broken semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResetDynamics(pub ReferenceDynamics);

impl TransitionSystem for BoundaryResetDynamics {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn control_dim(&self) -> usize {
        self.0.control_dim()
    }

    fn flow_matrix(&self, p: &Program) -> Result<DMatrix<f64>, ProgramError> {
        match p.pieces().last() {
            Some(last) => self.0.piece_flow(last),
            None => Ok(DMatrix::identity(self.dim(), self.dim())),
        }
    }
}

/// Assignment of state-vector slots to `(node, feature)` pairs of a fixed
/// observation graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct StateLayout {
    graph: AttributedGraph,
    features: usize,
    slots: Vec<(NodeId, usize)>,
    /// Inverse of `slots`, indexed by node-major position.
    node_major_to_slot: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    graph: AttributedGraph,
    features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slots: Option<Vec<(NodeId, usize)>>,
}

impl TryFrom<LayoutRepr> for StateLayout {
    type Error = ProgramError;
    fn try_from(r: LayoutRepr) -> Result<Self, ProgramError> {
        match r.slots {
            Some(slots) => StateLayout::new(r.graph, r.features, slots),
            None => Ok(StateLayout::node_major(r.graph, r.features)),
        }
    }
}

impl From<StateLayout> for LayoutRepr {
    fn from(l: StateLayout) -> Self {
        let slots = (!l.is_node_major()).then_some(l.slots);
        LayoutRepr {
            graph: l.graph,
            features: l.features,
            slots,
        }
    }
}

impl StateLayout {
    /// Slots ordered by node (sorted id), then feature.
    pub fn node_major(graph: AttributedGraph, features: usize) -> Self {
        let slots: Vec<(NodeId, usize)> = graph.nodes().flat_map(|n| (0..features).map(move |f| (n, f))).collect();
        let node_major_to_slot = (0..slots.len()).collect();
        StateLayout {
            graph,
            features,
            slots,
            node_major_to_slot,
        }
    }

    pub fn new(graph: AttributedGraph, features: usize, slots: Vec<(NodeId, usize)>) -> Result<Self, ProgramError> {
        let n = graph.node_count() * features;
        if slots.len() != n {
            return Err(ProgramError::Shape(format!(
                "layout has {} slots, expected {} nodes x {} features",
                slots.len(),
                graph.node_count(),
                features
            )));
        }
        let mut node_major_to_slot = vec![usize::MAX; n];
        for (i, (node, f)) in slots.iter().enumerate() {
            let pos = graph
                .node_index(*node)
                .filter(|_| *f < features)
                .ok_or_else(|| ProgramError::Shape(format!("slot {i} refers to ({node}, {f}) outside the graph")))?;
            let nm = pos * features + f;
            if node_major_to_slot[nm] != usize::MAX {
                return Err(ProgramError::Shape(format!("({node}, {f}) assigned twice")));
            }
            node_major_to_slot[nm] = i;
        }
        Ok(StateLayout {
            graph,
            features,
            slots,
            node_major_to_slot,
        })
    }

    pub fn graph(&self) -> &AttributedGraph {
        &self.graph
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[(NodeId, usize)] {
        &self.slots
    }

    pub fn is_node_major(&self) -> bool {
        self.node_major_to_slot.iter().enumerate().all(|(i, s)| i == *s)
    }

    /// Re-expresses a matrix acting on slot order as one acting on node-major order.
    pub fn to_node_major(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.node_major_to_slot;
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(p[i], p[j])])
    }

    /// Reads a state back from an observed network on this layout's graph.
    pub fn read(self: &Arc<Self>, m: &MycObject) -> Result<InternalState, ProgramError> {
        if m.graph() != &self.graph {
            return Err(ProgramError::Shape(
                "network graph differs from the layout graph".into(),
            ));
        }
        let mut values = DVector::zeros(self.dim());
        for (i, (node, f)) in self.slots.iter().enumerate() {
            values[i] = *m
                .omega(*node)
                .and_then(|w| w.get(*f))
                .ok_or_else(|| ProgramError::Shape(format!("missing feature {f} at {node}")))?;
        }
        InternalState::new(values, Arc::clone(self))
    }
}

/// Internal state vector together with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct InternalState {
    values: DVector<f64>,
    layout: Arc<StateLayout>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    #[serde(flatten)]
    layout: StateLayout,
    values: Vec<f64>,
}

impl TryFrom<StateRepr> for InternalState {
    type Error = ProgramError;
    fn try_from(r: StateRepr) -> Result<Self, ProgramError> {
        InternalState::new(DVector::from_vec(r.values), Arc::new(r.layout))
    }
}

impl From<InternalState> for StateRepr {
    fn from(s: InternalState) -> Self {
        StateRepr {
            layout: (*s.layout).clone(),
            values: s.values.iter().copied().collect(),
        }
    }
}

impl InternalState {
    pub fn new(values: DVector<f64>, layout: Arc<StateLayout>) -> Result<Self, ProgramError> {
        check_len(layout.dim(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProgramError::Numeric("non-finite state entry".into()));
        }
        Ok(InternalState { values, layout })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    fn with_values(&self, values: DVector<f64>) -> Result<Self, ProgramError> {
        Self::new(values, Arc::clone(&self.layout))
    }
}

/// `Φ(S, p)`: final state after running `p` from `s`.
pub fn evolve<T: TransitionSystem + ?Sized>(
    s: &InternalState,
    p: &Program,
    dynamics: &T,
) -> Result<InternalState, ProgramError> {
    s.with_values(dynamics.evolve_vector(&s.values, p)?)
}

/// Tolerance-based equivalence of two programs at a given state.
pub fn programs_equivalent_at<T: TransitionSystem + ?Sized>(
    s: &InternalState,
    p: &Program,
    q: &Program,
    dynamics: &T,
    tol: f64,
) -> Result<bool, ProgramError> {
    let a = dynamics.evolve_vector(&s.values, p)?;
    let b = dynamics.evolve_vector(&s.values, q)?;
    Ok(vec_norm_inf(&(a - b)) <= tol)
}

/// Conductivities assigned to the observation graph by the extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConfig {
    Constant(f64),
    PerEdge(BTreeMap<EdgeId, f64>),
}

/// Measurement pipeline `Π`: reads node features from the state and attaches
/// fixed conductivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extractor {
    pub sigma: SigmaConfig,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor {
            sigma: SigmaConfig::Constant(1.0),
        }
    }
}

impl Extractor {
    pub fn constant(weight: f64) -> Self {
        Extractor {
            sigma: SigmaConfig::Constant(weight),
        }
    }

    pub fn extract(&self, s: &InternalState) -> Result<MycObject, ExtractError> {
        let layout = s.layout();
        let graph = layout.graph();
        let sigma = match &self.sigma {
            SigmaConfig::Constant(w) => graph.edges().map(|(e, _)| (e, *w)).collect(),
            SigmaConfig::PerEdge(map) => graph
                .edges()
                .map(|(e, _)| {
                    map.get(&e)
                        .map(|w| (e, *w))
                        .ok_or_else(|| ProgramError::Shape(format!("no conductivity configured for {e}")))
                })
                .collect::<Result<BTreeMap<_, _>, _>>()?,
        };
        let mut omega: BTreeMap<NodeId, Vec<f64>> = graph.nodes().map(|n| (n, vec![0.0; layout.features()])).collect();
        for (i, (node, f)) in layout.slots().iter().enumerate() {
            omega.get_mut(node).expect("layout node")[*f] = s.values()[i];
        }
        Ok(MycObject::new(graph.clone(), sigma, omega)?)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Network(#[from] EnvError),
}

/// `F_prog(p)` at `s`: the network morphism from `Π(s)` to `Π(Φ(s, p))`.
///
/// Nodes are tracked by identity on the observation graph; the state update is
/// the flow matrix re-expressed on node-major feature order.
pub fn induced_morphism<T: TransitionSystem + ?Sized>(
    s: &InternalState,
    p: &Program,
    dynamics: &T,
    extractor: &Extractor,
) -> Result<MycMorphism, ExtractError> {
    let source = extractor.extract(s)?;
    let target = extractor.extract(&evolve(s, p, dynamics)?)?;
    let flow = dynamics.flow_matrix(p)?;
    let update = OmegaUpdate::Linear(s.layout().to_node_major(&flow));
    let graph_map = GraphMorphism::identity(s.layout().graph());
    Ok(MycMorphism::new(source, target, graph_map, MergeRule::Sum, update)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(n: usize, m: usize) -> Arc<StateLayout> {
        Arc::new(StateLayout::node_major(AttributedGraph::path(n), m))
    }

    fn state(values: &[f64], n: usize, m: usize) -> InternalState {
        InternalState::new(DVector::from_row_slice(values), layout(n, m)).unwrap()
    }

    #[test]
    fn null_program_is_unit_for_concatenation() {
        let p = Program::new(vec![Piece::from((0.5, vec![1.0])), Piece::from((1.0, vec![-2.0]))]).unwrap();
        assert_eq!(concatenate(&Program::null(), &p), p);
        assert_eq!(concatenate(&p, &Program::null()), p);
    }

    #[test]
    fn concatenation_durations_and_lookup() {
        let p = Program::pulse(2.0, vec![1.0, 0.0]).unwrap();
        let q = Program::new(vec![
            Piece::from((1.0, vec![0.0, 1.0])),
            Piece::from((2.0, vec![0.0, 3.0])),
        ])
        .unwrap();
        let pq = concatenate(&p, &q);
        assert_eq!(pq.duration(), 5.0);
        assert_eq!(pq.control_at(2.5), Some(&[0.0, 1.0][..]));
        assert_eq!(pq.control_at(2.0), Some(&[1.0, 0.0][..]));
        assert_eq!(pq.control_at(0.0), Some(&[1.0, 0.0][..]));
        assert_eq!(pq.control_at(4.5), Some(&[0.0, 3.0][..]));
        assert_eq!(pq.control_at(5.1), None);
    }

    #[test]
    fn rejects_bad_pieces() {
        assert_eq!(
            Program::pulse(0.0, vec![]),
            Err(ProgramError::BadPieceLength { index: 0, length: 0.0 })
        );
        assert_eq!(
            Program::pulse(1.0, vec![f64::NAN]),
            Err(ProgramError::NonFiniteControl(0))
        );
        assert!(serde_json::from_str::<Program>(r#"{"pieces":[[-1.0,[0.0]]]}"#).is_err());
    }

    #[test]
    fn program_json_schema() {
        let p: Program = serde_json::from_str(r#"{"pieces":[[0.5,[1.0,0.0]],[1.5,[0.0,2.0]]]}"#).unwrap();
        assert_eq!(p.pieces().len(), 2);
        assert_eq!(p.duration(), 2.0);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"pieces":[[0.5,[1.0,0.0]],[1.5,[0.0,2.0]]]}"#);
    }

    #[test]
    fn zero_dynamics_leaves_state_unchanged() {
        let dynamics = ReferenceDynamics::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(2, 2)], 1e-3).unwrap();
        let s = state(&[0.3, 0.7], 2, 1);
        for t in [0.1, 1.0, 7.5] {
            let out = evolve(&s, &Program::pulse(t, vec![0.0]).unwrap(), &dynamics).unwrap();
            assert_eq!(out, s);
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let dynamics = ReferenceDynamics::new(DMatrix::zeros(3, 3), vec![], 1e-3).unwrap();
        let s = state(&[0.3, 0.7], 2, 1);
        assert!(matches!(
            evolve(&s, &Program::null(), &dynamics),
            Err(ProgramError::Shape(_))
        ));
        let dynamics = ReferenceDynamics::new(DMatrix::zeros(2, 2), vec![], 1e-3).unwrap();
        let p = Program::pulse(1.0, vec![1.0]).unwrap();
        assert!(matches!(evolve(&s, &p, &dynamics), Err(ProgramError::Shape(_))));
    }

    #[test]
    fn dynamics_validation() {
        assert!(ReferenceDynamics::new(DMatrix::zeros(2, 3), vec![], 1e-3).is_err());
        assert!(ReferenceDynamics::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(3, 3)], 1e-3).is_err());
        assert!(ReferenceDynamics::new(DMatrix::zeros(2, 2), vec![], 0.0).is_err());
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(
            ReferenceDynamics::new(bad, vec![], 1e-3),
            Err(ProgramError::Numeric(_))
        ));
    }

    #[test]
    fn dynamics_json_is_row_major() {
        let json = r#"{"drift":[[0.0,1.0],[2.0,3.0]],"controls":[[[1.0,0.0],[0.0,1.0]]],"step":0.01}"#;
        let d: ReferenceDynamics = serde_json::from_str(json).unwrap();
        assert_eq!(d.drift()[(1, 0)], 2.0);
        assert_eq!(d.control_count(), 1);
        assert_eq!(serde_json::to_string(&d).unwrap(), json);
    }

    #[test]
    fn extraction_reads_state_directly() {
        let s = state(&[0.3, 0.7], 2, 1);
        let m = Extractor::constant(2.0).extract(&s).unwrap();
        assert_eq!(m.omega(NodeId(0)), Some(&[0.3][..]));
        assert_eq!(m.omega(NodeId(1)), Some(&[0.7][..]));
        assert_eq!(m.sigma(EdgeId(0)), Some(2.0));
    }

    #[test]
    fn extraction_follows_custom_layout() {
        let graph = AttributedGraph::path(2);
        let slots = vec![(NodeId(1), 1), (NodeId(0), 0), (NodeId(1), 0), (NodeId(0), 1)];
        let lay = Arc::new(StateLayout::new(graph, 2, slots).unwrap());
        let s = InternalState::new(DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0]), Arc::clone(&lay)).unwrap();
        let m = Extractor::default().extract(&s).unwrap();
        assert_eq!(m.omega(NodeId(0)), Some(&[2.0, 4.0][..]));
        assert_eq!(m.omega(NodeId(1)), Some(&[3.0, 1.0][..]));
        assert_eq!(lay.read(&m).unwrap(), s);
    }

    #[test]
    fn layout_rejects_bad_slots() {
        let graph = AttributedGraph::path(2);
        assert!(StateLayout::new(graph.clone(), 1, vec![(NodeId(0), 0)]).is_err());
        assert!(StateLayout::new(graph.clone(), 1, vec![(NodeId(0), 0), (NodeId(0), 0)]).is_err());
        assert!(StateLayout::new(graph, 1, vec![(NodeId(0), 0), (NodeId(5), 0)]).is_err());
    }

    #[test]
    fn per_edge_sigma_must_cover_graph() {
        let s = state(&[0.3, 0.7, 0.1], 3, 1);
        let partial = Extractor {
            sigma: SigmaConfig::PerEdge([(EdgeId(0), 1.0)].into()),
        };
        assert!(matches!(
            partial.extract(&s),
            Err(ExtractError::Program(ProgramError::Shape(_)))
        ));
    }

    #[test]
    fn null_program_induces_identity() {
        let dynamics = ReferenceDynamics::new(
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.0]),
            vec![DMatrix::identity(2, 2)],
            1e-3,
        )
        .unwrap();
        let s = state(&[0.3, 0.7], 2, 1);
        let m = induced_morphism(&s, &Program::null(), &dynamics, &Extractor::default()).unwrap();
        assert!(m.is_identity());
        let before = Extractor::default().extract(&s).unwrap();
        let after = Extractor::default()
            .extract(&evolve(&s, &Program::null(), &dynamics).unwrap())
            .unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn boundary_reset_forgets_earlier_pieces() {
        let dynamics = ReferenceDynamics::new(DMatrix::zeros(1, 1), vec![DMatrix::identity(1, 1)], 1e-3).unwrap();
        let mutant = BoundaryResetDynamics(dynamics);
        let p = Program::new(vec![Piece::from((1.0, vec![1.0])), Piece::from((1.0, vec![0.0]))]).unwrap();
        let flow = mutant.flow_matrix(&p).unwrap();
        assert_eq!(flow[(0, 0)], 1.0);
    }
}
