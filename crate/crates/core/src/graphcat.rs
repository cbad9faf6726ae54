//! Finite attributed graphs and the graph category they live in.
//!
//! Objects are finite multigraphs (loops and parallel edges allowed), undirected
//! unless flagged otherwise. Morphisms are total maps on nodes and edges that
//! preserve incidence. In this category a morphism is a monomorphism exactly when
//! both component maps are injective, and pushouts along monomorphisms are
//! computed as a quotient of the disjoint union.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest probe size accepted by [`verify_pushout_universal_property`].
pub const MAX_PROBE_BOUND: usize = 6;

/// Upper bound on node assignments tried by the exhaustive enumerators.
const ENUMERATION_LIMIT: u128 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge} has undeclared endpoint {node}")]
    UnknownEndpoint { edge: EdgeId, node: NodeId },
    #[error("morphism is not total: {0} has no image")]
    NodeNotMapped(NodeId),
    #[error("morphism is not total: {0} has no image")]
    EdgeNotMapped(EdgeId),
    #[error("morphism maps {from} to {to}, which is not a target node")]
    UnknownNodeImage { from: NodeId, to: NodeId },
    #[error("morphism maps {from} to {to}, which is not a target edge")]
    UnknownEdgeImage { from: EdgeId, to: EdgeId },
    #[error("morphism maps {0} outside the source graph")]
    ExtraNode(NodeId),
    #[error("morphism maps {0} outside the source graph")]
    ExtraEdge(EdgeId),
    #[error("edge {0} is not mapped compatibly with its endpoints")]
    IncidenceViolation(EdgeId),
    #[error("cannot compose: target of the first morphism differs from source of the second")]
    CompositionMismatch,
    #[error("cospan legs do not share the apex as source")]
    ApexMismatch,
    #[error("directed and undirected graphs cannot be mixed")]
    DirectednessMismatch,
    #[error("{0} leg of the cospan is not a monomorphism")]
    NotMonomorphism(&'static str),
    #[error("probe bound {bound} outside 1..={max}")]
    ProbeBound { bound: usize, max: usize },
    #[error("enumeration over {0} node assignments exceeds the resource limit")]
    ResourceLimit(u128),
}

/// A finite graph with stable node and edge identifiers.
///
/// Undirected edges store their endpoints in sorted order so that equality is
/// structural.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct AttributedGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeMap<EdgeId, (NodeId, NodeId)>,
    directed: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<NodeId>,
    #[serde(default)]
    edges: Vec<(EdgeId, (NodeId, NodeId))>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    directed: bool,
}

impl TryFrom<GraphRepr> for AttributedGraph {
    type Error = GraphError;

    fn try_from(r: GraphRepr) -> Result<Self, GraphError> {
        if r.directed {
            AttributedGraph::directed(r.nodes, r.edges)
        } else {
            AttributedGraph::new(r.nodes, r.edges)
        }
    }
}

impl From<AttributedGraph> for GraphRepr {
    fn from(g: AttributedGraph) -> Self {
        GraphRepr {
            nodes: g.nodes.into_iter().collect(),
            edges: g.edges.into_iter().collect(),
            directed: g.directed,
        }
    }
}

impl AttributedGraph {
    /// Builds an undirected graph.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (EdgeId, (NodeId, NodeId))>,
    ) -> Result<Self, GraphError> {
        Self::build(nodes, edges, false)
    }

    pub fn directed(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (EdgeId, (NodeId, NodeId))>,
    ) -> Result<Self, GraphError> {
        Self::build(nodes, edges, true)
    }

    fn build(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (EdgeId, (NodeId, NodeId))>,
        directed: bool,
    ) -> Result<Self, GraphError> {
        let mut node_set = BTreeSet::new();
        for n in nodes {
            if !node_set.insert(n) {
                return Err(GraphError::DuplicateNode(n));
            }
        }
        let mut edge_map = BTreeMap::new();
        for (e, (u, v)) in edges {
            for x in [u, v] {
                if !node_set.contains(&x) {
                    return Err(GraphError::UnknownEndpoint { edge: e, node: x });
                }
            }
            let ends = if directed { (u, v) } else { ordered(u, v) };
            if edge_map.insert(e, ends).is_some() {
                return Err(GraphError::DuplicateEdge(e));
            }
        }
        Ok(AttributedGraph {
            nodes: node_set,
            edges: edge_map,
            directed,
        })
    }

    pub fn empty() -> Self {
        AttributedGraph {
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            directed: false,
        }
    }

    /// Path graph on nodes `0..n` with edges `i = (i, i+1)`.
    pub fn path(n: usize) -> Self {
        let nodes = (0..n as u64).map(NodeId);
        let edges = (0..n.saturating_sub(1) as u64).map(|i| (EdgeId(i), (NodeId(i), NodeId(i + 1))));
        Self::new(nodes, edges).expect("path graph is well formed")
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (EdgeId, (NodeId, NodeId))> + '_ {
        self.edges.iter().map(|(e, ends)| (*e, *ends))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }

    pub fn endpoints(&self, e: EdgeId) -> Option<(NodeId, NodeId)> {
        self.edges.get(&e).copied()
    }

    /// Position of `n` in the sorted node order.
    pub fn node_index(&self, n: NodeId) -> Option<usize> {
        self.nodes.iter().position(|m| *m == n)
    }

    /// Edges incident to `n`; a loop is reported once.
    pub fn incident_edges(&self, n: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges
            .iter()
            .filter(move |(_, (u, v))| *u == n || *v == n)
            .map(|(e, _)| *e)
    }

    /// Connectivity ignoring edge direction. The empty graph counts as connected.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.nodes.iter().next().copied() else {
            return true;
        };
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (u, v) in self.edges.values() {
            adjacency.entry(*u).or_default().push(*v);
            adjacency.entry(*v).or_default().push(*u);
        }
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for m in adjacency.get(&n).into_iter().flatten() {
                if seen.insert(*m) {
                    stack.push(*m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    fn normalize(&self, u: NodeId, v: NodeId) -> (NodeId, NodeId) {
        if self.directed {
            (u, v)
        } else {
            ordered(u, v)
        }
    }
}

fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Total incidence-preserving map between two graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MorphismRepr", into = "MorphismRepr")]
pub struct GraphMorphism {
    source: AttributedGraph,
    target: AttributedGraph,
    node_map: BTreeMap<NodeId, NodeId>,
    edge_map: BTreeMap<EdgeId, EdgeId>,
}

#[derive(Serialize, Deserialize)]
struct MorphismRepr {
    source: AttributedGraph,
    target: AttributedGraph,
    nodes: BTreeMap<NodeId, NodeId>,
    #[serde(default)]
    edges: BTreeMap<EdgeId, EdgeId>,
}

impl TryFrom<MorphismRepr> for GraphMorphism {
    type Error = GraphError;

    fn try_from(r: MorphismRepr) -> Result<Self, GraphError> {
        GraphMorphism::new(r.source, r.target, r.nodes, r.edges)
    }
}

impl From<GraphMorphism> for MorphismRepr {
    fn from(m: GraphMorphism) -> Self {
        MorphismRepr {
            source: m.source,
            target: m.target,
            nodes: m.node_map,
            edges: m.edge_map,
        }
    }
}

impl GraphMorphism {
    pub fn new(
        source: AttributedGraph,
        target: AttributedGraph,
        node_map: BTreeMap<NodeId, NodeId>,
        edge_map: BTreeMap<EdgeId, EdgeId>,
    ) -> Result<Self, GraphError> {
        if source.directed != target.directed {
            return Err(GraphError::DirectednessMismatch);
        }
        for n in source.nodes() {
            let image = *node_map.get(&n).ok_or(GraphError::NodeNotMapped(n))?;
            if !target.contains_node(image) {
                return Err(GraphError::UnknownNodeImage { from: n, to: image });
            }
        }
        if let Some(extra) = node_map.keys().find(|n| !source.contains_node(**n)) {
            return Err(GraphError::ExtraNode(*extra));
        }
        for (e, (u, v)) in source.edges() {
            let image = *edge_map.get(&e).ok_or(GraphError::EdgeNotMapped(e))?;
            let ends = target
                .endpoints(image)
                .ok_or(GraphError::UnknownEdgeImage { from: e, to: image })?;
            if target.normalize(node_map[&u], node_map[&v]) != ends {
                return Err(GraphError::IncidenceViolation(e));
            }
        }
        if let Some(extra) = edge_map.keys().find(|e| source.endpoints(**e).is_none()) {
            return Err(GraphError::ExtraEdge(*extra));
        }
        Ok(GraphMorphism {
            source,
            target,
            node_map,
            edge_map,
        })
    }

    pub fn identity(g: &AttributedGraph) -> Self {
        GraphMorphism {
            source: g.clone(),
            target: g.clone(),
            node_map: g.nodes().map(|n| (n, n)).collect(),
            edge_map: g.edges().map(|(e, _)| (e, e)).collect(),
        }
    }

    pub fn source(&self) -> &AttributedGraph {
        &self.source
    }

    pub fn target(&self) -> &AttributedGraph {
        &self.target
    }

    pub fn node_image(&self, n: NodeId) -> Option<NodeId> {
        self.node_map.get(&n).copied()
    }

    pub fn edge_image(&self, e: EdgeId) -> Option<EdgeId> {
        self.edge_map.get(&e).copied()
    }

    pub fn node_map(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.node_map
    }

    pub fn edge_map(&self) -> &BTreeMap<EdgeId, EdgeId> {
        &self.edge_map
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
            && self.node_map.iter().all(|(a, b)| a == b)
            && self.edge_map.iter().all(|(a, b)| a == b)
    }
}

/// Returns `g ∘ f`: apply `f` first, then `g`.
pub fn compose_graph_morphisms(f: &GraphMorphism, g: &GraphMorphism) -> Result<GraphMorphism, GraphError> {
    if f.target != g.source {
        return Err(GraphError::CompositionMismatch);
    }
    Ok(GraphMorphism {
        source: f.source.clone(),
        target: g.target.clone(),
        node_map: f.node_map.iter().map(|(a, b)| (*a, g.node_map[b])).collect(),
        edge_map: f.edge_map.iter().map(|(a, b)| (*a, g.edge_map[b])).collect(),
    })
}

/// Injective on nodes and on edges. For total incidence-preserving maps of
/// multigraphs this coincides with left-cancellability.
pub fn is_monomorphism(f: &GraphMorphism) -> bool {
    let nodes: BTreeSet<_> = f.node_map.values().collect();
    let edges: BTreeSet<_> = f.edge_map.values().collect();
    nodes.len() == f.node_map.len() && edges.len() == f.edge_map.len()
}

/// Two morphisms out of a common apex: `apex → left.target` and `apex → right.target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CospanRepr", into = "CospanRepr")]
pub struct Cospan {
    apex: AttributedGraph,
    left: GraphMorphism,
    right: GraphMorphism,
}

#[derive(Serialize, Deserialize)]
struct LegRepr {
    target: AttributedGraph,
    nodes: BTreeMap<NodeId, NodeId>,
    #[serde(default)]
    edges: BTreeMap<EdgeId, EdgeId>,
}

#[derive(Serialize, Deserialize)]
struct CospanRepr {
    apex: AttributedGraph,
    left: LegRepr,
    right: LegRepr,
}

impl TryFrom<CospanRepr> for Cospan {
    type Error = GraphError;

    fn try_from(r: CospanRepr) -> Result<Self, GraphError> {
        let left = GraphMorphism::new(r.apex.clone(), r.left.target, r.left.nodes, r.left.edges)?;
        let right = GraphMorphism::new(r.apex, r.right.target, r.right.nodes, r.right.edges)?;
        Cospan::new(left, right)
    }
}

impl From<Cospan> for CospanRepr {
    fn from(c: Cospan) -> Self {
        let leg = |m: GraphMorphism| LegRepr {
            target: m.target,
            nodes: m.node_map,
            edges: m.edge_map,
        };
        CospanRepr {
            apex: c.apex,
            left: leg(c.left),
            right: leg(c.right),
        }
    }
}

impl Cospan {
    pub fn new(left: GraphMorphism, right: GraphMorphism) -> Result<Self, GraphError> {
        if left.source != right.source {
            return Err(GraphError::ApexMismatch);
        }
        Ok(Cospan {
            apex: left.source.clone(),
            left,
            right,
        })
    }

    pub fn apex(&self) -> &AttributedGraph {
        &self.apex
    }

    pub fn left(&self) -> &GraphMorphism {
        &self.left
    }

    pub fn right(&self) -> &GraphMorphism {
        &self.right
    }

    pub fn swapped(&self) -> Cospan {
        Cospan {
            apex: self.apex.clone(),
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

/// Pushout object together with the two coprojections into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushoutSquare {
    pub object: AttributedGraph,
    pub from_left: GraphMorphism,
    pub from_right: GraphMorphism,
}

/// Glues `left.target` and `right.target` along the apex.
///
/// Node ids of the result are assigned deterministically: the left graph's
/// nodes in sorted order, then the right graph's nodes outside the apex image
/// in sorted order. Edges are numbered the same way.
pub fn pushout_along_monos(c: &Cospan) -> Result<PushoutSquare, GraphError> {
    if !is_monomorphism(&c.left) {
        return Err(GraphError::NotMonomorphism("left"));
    }
    if !is_monomorphism(&c.right) {
        return Err(GraphError::NotMonomorphism("right"));
    }
    let b = c.left.target();
    let cg = c.right.target();
    if b.directed != cg.directed {
        return Err(GraphError::DirectednessMismatch);
    }

    let right_node_pre: BTreeMap<NodeId, NodeId> = c.right.node_map.iter().map(|(a, x)| (*x, *a)).collect();
    let right_edge_pre: BTreeMap<EdgeId, EdgeId> = c.right.edge_map.iter().map(|(a, x)| (*x, *a)).collect();

    let mut from_b_nodes = BTreeMap::new();
    let mut next = 0u64;
    for n in b.nodes() {
        from_b_nodes.insert(n, NodeId(next));
        next += 1;
    }
    let mut from_c_nodes = BTreeMap::new();
    for n in cg.nodes() {
        let image = match right_node_pre.get(&n) {
            Some(a) => from_b_nodes[&c.left.node_map[a]],
            None => {
                let id = NodeId(next);
                next += 1;
                id
            }
        };
        from_c_nodes.insert(n, image);
    }

    let mut edges = Vec::with_capacity(b.edge_count() + cg.edge_count());
    let mut from_b_edges = BTreeMap::new();
    let mut next = 0u64;
    for (e, (u, v)) in b.edges() {
        let id = EdgeId(next);
        next += 1;
        from_b_edges.insert(e, id);
        edges.push((id, (from_b_nodes[&u], from_b_nodes[&v])));
    }
    let mut from_c_edges = BTreeMap::new();
    for (e, (u, v)) in cg.edges() {
        let image = match right_edge_pre.get(&e) {
            Some(a) => from_b_edges[&c.left.edge_map[a]],
            None => {
                let id = EdgeId(next);
                next += 1;
                edges.push((id, (from_c_nodes[&u], from_c_nodes[&v])));
                id
            }
        };
        from_c_edges.insert(e, image);
    }

    let node_ids = from_b_nodes
        .values()
        .chain(from_c_nodes.values())
        .copied()
        .collect::<BTreeSet<_>>();
    let object = AttributedGraph::build(node_ids, edges, b.directed)?;
    let from_left = GraphMorphism::new(b.clone(), object.clone(), from_b_nodes, from_b_edges)?;
    let from_right = GraphMorphism::new(cg.clone(), object.clone(), from_c_nodes, from_c_edges)?;
    Ok(PushoutSquare {
        object,
        from_left,
        from_right,
    })
}

/// Exhaustive check of the pushout universal property against a fixed probe
/// family (see [`probe_family`]).
///
/// Returns `Ok(false)` if the candidate square does not commute, or if some
/// cocone into a probe graph has zero or several mediating morphisms.
pub fn verify_pushout_universal_property(
    c: &Cospan,
    candidate: &PushoutSquare,
    probe_bound: usize,
) -> Result<bool, GraphError> {
    let max = if c.apex.directed { 4 } else { MAX_PROBE_BOUND };
    if probe_bound == 0 || probe_bound > max {
        return Err(GraphError::ProbeBound {
            bound: probe_bound,
            max,
        });
    }
    let (b, cg) = (c.left.target(), c.right.target());
    if candidate.from_left.source() != b
        || candidate.from_right.source() != cg
        || candidate.from_left.target() != &candidate.object
        || candidate.from_right.target() != &candidate.object
    {
        return Ok(false);
    }
    let via_left = compose_graph_morphisms(&c.left, &candidate.from_left)?;
    let via_right = compose_graph_morphisms(&c.right, &candidate.from_right)?;
    if via_left != via_right {
        return Ok(false);
    }

    let mediator = MediatorProblem::new(candidate, b, cg);
    for z in probe_family(probe_bound, c.apex.directed) {
        let zi = Indexed::new(&z);
        let homs_b = raw_homs(&Indexed::new(b), &zi)?;
        let homs_c = raw_homs(&Indexed::new(cg), &zi)?;
        let bi = Indexed::new(b);
        let ci = Indexed::new(cg);
        // Group cocone legs from C by their restriction to the apex.
        let mut by_restriction: BTreeMap<(Vec<usize>, Vec<usize>), Vec<&RawHom>> = BTreeMap::new();
        for k in &homs_c {
            by_restriction.entry(restrict(&c.right, &ci, k)).or_default().push(k);
        }
        for h in &homs_b {
            let key = restrict(&c.left, &bi, h);
            for k in by_restriction.get(&key).into_iter().flatten() {
                if mediator.count(&zi, h, k, 2) != 1 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// All morphisms `source → target`, by exhaustive enumeration.
pub fn enumerate_morphisms(
    source: &AttributedGraph,
    target: &AttributedGraph,
) -> Result<Vec<GraphMorphism>, GraphError> {
    if source.directed != target.directed {
        return Err(GraphError::DirectednessMismatch);
    }
    let si = Indexed::new(source);
    let ti = Indexed::new(target);
    Ok(raw_homs(&si, &ti)?
        .into_iter()
        .map(|h| GraphMorphism {
            source: source.clone(),
            target: target.clone(),
            node_map: si.nodes.iter().zip(&h.nodes).map(|(n, i)| (*n, ti.nodes[*i])).collect(),
            edge_map: si
                .edges
                .iter()
                .zip(&h.edges)
                .map(|(e, i)| (e.0, ti.edges[*i].0))
                .collect(),
        })
        .collect())
}

/// Small-instance isomorphism test by enumeration.
pub fn is_isomorphic(g: &AttributedGraph, h: &AttributedGraph) -> bool {
    if g.directed != h.directed || g.node_count() != h.node_count() || g.edge_count() != h.edge_count() {
        return false;
    }
    let (gi, hi) = (Indexed::new(g), Indexed::new(h));
    match raw_homs(&gi, &hi) {
        Ok(homs) => homs.iter().any(|m| {
            let ns: BTreeSet<_> = m.nodes.iter().collect();
            let es: BTreeSet<_> = m.edges.iter().collect();
            ns.len() == m.nodes.len() && es.len() == m.edges.len()
        }),
        Err(_) => false,
    }
}

/// Probe graphs used by the universal-property verifier, one per isomorphism
/// class.
///
/// For `n` nodes the family contains every graph in which each unordered node
/// pair carries at most one edge, except that graphs on at most two nodes may
/// carry up to two parallel edges per pair. Loops are included for `n ≤ 4`.
pub fn probe_family(bound: usize, directed: bool) -> Vec<AttributedGraph> {
    let mut out = Vec::new();
    for n in 0..=bound {
        let cap: u8 = if n <= 2 { 2 } else { 1 };
        let loops = n <= 4;
        let slots: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| if directed { true } else { i <= j })
            .filter(|(i, j)| loops || i != j)
            .collect();
        let perms = permutations(n);
        let slot_index: BTreeMap<(usize, usize), usize> = slots.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let mut seen = BTreeSet::new();
        let mut counts = vec![0u8; slots.len()];
        loop {
            let canon = perms
                .iter()
                .map(|p| {
                    let mut v = vec![0u8; slots.len()];
                    for (k, (i, j)) in slots.iter().enumerate() {
                        let (a, b) = (p[*i], p[*j]);
                        let key = if directed || a <= b { (a, b) } else { (b, a) };
                        v[slot_index[&key]] = counts[k];
                    }
                    v
                })
                .min()
                .unwrap_or_default();
            if seen.insert(canon.clone()) {
                let mut edges = Vec::new();
                for (k, (i, j)) in slots.iter().enumerate() {
                    for _ in 0..canon[k] {
                        let id = EdgeId(edges.len() as u64);
                        edges.push((id, (NodeId(*i as u64), NodeId(*j as u64))));
                    }
                }
                let nodes = (0..n as u64).map(NodeId);
                out.push(AttributedGraph::build(nodes, edges, directed).expect("probe graph"));
            }
            // Odometer over multiplicities.
            let mut k = 0;
            while k < counts.len() {
                if counts[k] < cap {
                    counts[k] += 1;
                    break;
                }
                counts[k] = 0;
                k += 1;
            }
            if k == counts.len() {
                break;
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Graph with nodes and edges addressed by position in sorted order.
struct Indexed {
    nodes: Vec<NodeId>,
    edges: Vec<(EdgeId, (usize, usize))>,
    directed: bool,
    /// Edge positions keyed by normalized endpoint positions.
    by_ends: BTreeMap<(usize, usize), Vec<usize>>,
}

impl Indexed {
    fn new(g: &AttributedGraph) -> Self {
        let nodes: Vec<NodeId> = g.nodes().collect();
        let pos: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let edges: Vec<(EdgeId, (usize, usize))> = g.edges().map(|(e, (u, v))| (e, (pos[&u], pos[&v]))).collect();
        let mut by_ends: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (k, (_, ends)) in edges.iter().enumerate() {
            by_ends.entry(*ends).or_default().push(k);
        }
        Indexed {
            nodes,
            edges,
            directed: g.directed,
            by_ends,
        }
    }

    fn key(&self, u: usize, v: usize) -> (usize, usize) {
        if self.directed || u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    fn node_pos(&self, n: NodeId) -> usize {
        self.nodes.binary_search(&n).expect("node present")
    }

    fn edge_pos(&self, e: EdgeId) -> usize {
        self.edges.binary_search_by(|(x, _)| x.cmp(&e)).expect("edge present")
    }
}

/// Morphism as positional images.
struct RawHom {
    nodes: Vec<usize>,
    edges: Vec<usize>,
}

fn raw_homs(src: &Indexed, tgt: &Indexed) -> Result<Vec<RawHom>, GraphError> {
    let (ns, nt) = (src.nodes.len(), tgt.nodes.len());
    let assignments = (nt as u128).checked_pow(ns as u32).unwrap_or(u128::MAX);
    if assignments > ENUMERATION_LIMIT {
        return Err(GraphError::ResourceLimit(assignments));
    }
    let mut out = Vec::new();
    if ns > 0 && nt == 0 {
        return Ok(out);
    }
    let mut assign = vec![0usize; ns];
    loop {
        let mut options: Vec<&[usize]> = Vec::with_capacity(src.edges.len());
        let mut feasible = true;
        for (_, (u, v)) in &src.edges {
            match tgt.by_ends.get(&tgt.key(assign[*u], assign[*v])) {
                Some(c) => options.push(c),
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            let mut choice = vec![0usize; options.len()];
            loop {
                out.push(RawHom {
                    nodes: assign.clone(),
                    edges: choice.iter().zip(&options).map(|(i, o)| o[*i]).collect(),
                });
                let mut k = 0;
                while k < choice.len() {
                    choice[k] += 1;
                    if choice[k] < options[k].len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
        }
        let mut k = 0;
        while k < ns {
            assign[k] += 1;
            if assign[k] < nt {
                break;
            }
            assign[k] = 0;
            k += 1;
        }
        if k == ns {
            break;
        }
    }
    Ok(out)
}

/// Positional restriction of `h: leg.target → Z` along `leg: apex → leg.target`.
fn restrict(leg: &GraphMorphism, target: &Indexed, h: &RawHom) -> (Vec<usize>, Vec<usize>) {
    let nodes = leg.node_map.values().map(|x| h.nodes[target.node_pos(*x)]).collect();
    let edges = leg.edge_map.values().map(|x| h.edges[target.edge_pos(*x)]).collect();
    (nodes, edges)
}

/// Preimage structure of the candidate's coprojections, used to count
/// mediating morphisms for a given cocone.
struct MediatorProblem {
    object: Indexed,
    /// For each object node: positions in B and in C mapping onto it.
    node_pre: Vec<(Vec<usize>, Vec<usize>)>,
    edge_pre: Vec<(Vec<usize>, Vec<usize>)>,
}

impl MediatorProblem {
    fn new(candidate: &PushoutSquare, b: &AttributedGraph, c: &AttributedGraph) -> Self {
        let object = Indexed::new(&candidate.object);
        let (bi, ci) = (Indexed::new(b), Indexed::new(c));
        let mut node_pre = vec![(Vec::new(), Vec::new()); object.nodes.len()];
        let mut edge_pre = vec![(Vec::new(), Vec::new()); object.edges.len()];
        for (x, y) in &candidate.from_left.node_map {
            node_pre[object.node_pos(*y)].0.push(bi.node_pos(*x));
        }
        for (x, y) in &candidate.from_right.node_map {
            node_pre[object.node_pos(*y)].1.push(ci.node_pos(*x));
        }
        for (x, y) in &candidate.from_left.edge_map {
            edge_pre[object.edge_pos(*y)].0.push(bi.edge_pos(*x));
        }
        for (x, y) in &candidate.from_right.edge_map {
            edge_pre[object.edge_pos(*y)].1.push(ci.edge_pos(*x));
        }
        MediatorProblem {
            object,
            node_pre,
            edge_pre,
        }
    }

    /// Number of morphisms `u: object → z` with `u∘from_left = h` and
    /// `u∘from_right = k`, counted up to `stop`.
    fn count(&self, z: &Indexed, h: &RawHom, k: &RawHom, stop: usize) -> usize {
        let forced = |pre: &(Vec<usize>, Vec<usize>), hv: &[usize], kv: &[usize]| {
            let mut vals = pre.0.iter().map(|i| hv[*i]).chain(pre.1.iter().map(|i| kv[*i]));
            match vals.next() {
                None => Ok(None),
                Some(first) if vals.all(|v| v == first) => Ok(Some(first)),
                Some(_) => Err(()),
            }
        };
        let mut node_fixed = Vec::with_capacity(self.node_pre.len());
        for pre in &self.node_pre {
            match forced(pre, &h.nodes, &k.nodes) {
                Ok(v) => node_fixed.push(v),
                Err(()) => return 0,
            }
        }
        let mut edge_fixed = Vec::with_capacity(self.edge_pre.len());
        for pre in &self.edge_pre {
            match forced(pre, &h.edges, &k.edges) {
                Ok(v) => edge_fixed.push(v),
                Err(()) => return 0,
            }
        }
        let free: Vec<usize> = (0..node_fixed.len()).filter(|i| node_fixed[*i].is_none()).collect();
        if !free.is_empty() && z.nodes.is_empty() {
            return 0;
        }
        let mut assign: Vec<usize> = node_fixed.iter().map(|v| v.unwrap_or(0)).collect();
        let mut total = 0usize;
        loop {
            let mut ways = 1usize;
            for (k_e, (_, (u, v))) in self.object.edges.iter().enumerate() {
                let key = z.key(assign[*u], assign[*v]);
                match edge_fixed[k_e] {
                    Some(img) => {
                        if z.key(z.edges[img].1 .0, z.edges[img].1 .1) != key {
                            ways = 0;
                        }
                    }
                    None => ways *= z.by_ends.get(&key).map_or(0, Vec::len),
                }
                if ways == 0 {
                    break;
                }
            }
            total += ways;
            if total >= stop {
                return total;
            }
            let mut idx = 0;
            while idx < free.len() {
                assign[free[idx]] += 1;
                if assign[free[idx]] < z.nodes.len() {
                    break;
                }
                assign[free[idx]] = 0;
                idx += 1;
            }
            if idx == free.len() {
                return total;
            }
        }
    }
}
