#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mycocat::graphcat::{AttributedGraph, Cospan, EdgeId, GraphMorphism, NodeId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random undirected multigraph with ids drawn from a sparse range.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> AttributedGraph {
    let n = rng.random_range(0..=max_nodes);
    let mut ids: Vec<u64> = (0..20).collect();
    ids.shuffle(rng);
    let nodes: Vec<NodeId> = ids[..n].iter().map(|i| NodeId(*i)).collect();
    let mut edges = Vec::new();
    if n > 0 {
        let m = rng.random_range(0..=n + 1);
        for k in 0..m {
            let u = nodes[rng.random_range(0..n)];
            let v = nodes[rng.random_range(0..n)];
            edges.push((EdgeId(100 + k as u64), (u, v)));
        }
    }
    AttributedGraph::new(nodes, edges).unwrap()
}

/// Extends `apex` injectively into a graph of at most `max_nodes` nodes with
/// fresh ids and some extra structure.
pub fn random_extension(rng: &mut ChaCha8Rng, apex: &AttributedGraph, max_nodes: usize) -> GraphMorphism {
    let n_apex = apex.node_count();
    let n = rng.random_range(n_apex..=max_nodes.max(n_apex));
    let mut ids: Vec<u64> = (0..30).collect();
    ids.shuffle(rng);
    let nodes: Vec<NodeId> = ids[..n].iter().map(|i| NodeId(*i)).collect();
    let node_map: BTreeMap<NodeId, NodeId> = apex.nodes().zip(nodes.iter().copied()).collect();
    let mut edge_ids: Vec<u64> = (200..240).collect();
    edge_ids.shuffle(rng);
    let mut edge_ids = edge_ids.into_iter();
    let mut edges = Vec::new();
    let mut edge_map = BTreeMap::new();
    for (e, (u, v)) in apex.edges() {
        let id = EdgeId(edge_ids.next().unwrap());
        edge_map.insert(e, id);
        edges.push((id, (node_map[&u], node_map[&v])));
    }
    if n > 0 {
        for _ in 0..rng.random_range(0..=2) {
            let u = nodes[rng.random_range(0..n)];
            let v = nodes[rng.random_range(0..n)];
            edges.push((EdgeId(edge_ids.next().unwrap()), (u, v)));
        }
    }
    let target = AttributedGraph::new(nodes, edges).unwrap();
    GraphMorphism::new(apex.clone(), target, node_map, edge_map).unwrap()
}

/// Random cospan of monomorphisms with legs into graphs of at most `max_nodes` nodes.
pub fn random_mono_cospan(rng: &mut ChaCha8Rng, max_nodes: usize) -> Cospan {
    let apex = random_graph(rng, max_nodes.min(2));
    let left = random_extension(rng, &apex, max_nodes);
    let right = random_extension(rng, &apex, max_nodes);
    Cospan::new(left, right).unwrap()
}

/// Connected random graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> AttributedGraph {
    let nodes: Vec<NodeId> = (0..n as u64).map(NodeId).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((EdgeId(edges.len() as u64), (nodes[j], nodes[i])));
    }
    for _ in 0..rng.random_range(0..=1) {
        if n > 1 {
            let u = nodes[rng.random_range(0..n)];
            let v = nodes[rng.random_range(0..n)];
            edges.push((EdgeId(edges.len() as u64), (u, v)));
        }
    }
    AttributedGraph::new(nodes, edges).unwrap()
}

/// Classic disjoint-set forest over dense indices.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Element of the disjoint union `B ⊔ C`: side (0 = B, 1 = C) and id.
pub type Tagged = (u8, u64);

/// Quotient of `B ⊔ C` by the apex identifications, computed with union-find.
///
/// Returns the class of every tagged node and edge, and the class-level
/// endpoint pairs of each edge class.
pub struct QuotientOracle {
    pub node_class: BTreeMap<Tagged, usize>,
    pub edge_class: BTreeMap<Tagged, usize>,
    pub node_classes: usize,
    pub edge_ends: BTreeMap<usize, BTreeSet<(usize, usize)>>,
}

pub fn quotient_oracle(c: &Cospan) -> QuotientOracle {
    let b = c.left().target();
    let cg = c.right().target();
    let node_elems: Vec<Tagged> = b
        .nodes()
        .map(|n| (0, n.0))
        .chain(cg.nodes().map(|n| (1, n.0)))
        .collect();
    let edge_elems: Vec<Tagged> = b
        .edges()
        .map(|(e, _)| (0, e.0))
        .chain(cg.edges().map(|(e, _)| (1, e.0)))
        .collect();
    let npos: BTreeMap<Tagged, usize> = node_elems.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let epos: BTreeMap<Tagged, usize> = edge_elems.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut nuf = UnionFind::new(node_elems.len());
    let mut euf = UnionFind::new(edge_elems.len());
    for a in c.apex().nodes() {
        let x = npos[&(0, c.left().node_image(a).unwrap().0)];
        let y = npos[&(1, c.right().node_image(a).unwrap().0)];
        nuf.union(x, y);
    }
    for (a, _) in c.apex().edges() {
        let x = epos[&(0, c.left().edge_image(a).unwrap().0)];
        let y = epos[&(1, c.right().edge_image(a).unwrap().0)];
        euf.union(x, y);
    }
    let mut roots = BTreeMap::new();
    let mut node_class = BTreeMap::new();
    for (i, t) in node_elems.iter().enumerate() {
        let r = nuf.find(i);
        let next = roots.len();
        let cls = *roots.entry(r).or_insert(next);
        node_class.insert(*t, cls);
    }
    let node_classes = roots.len();
    let mut roots = BTreeMap::new();
    let mut edge_class = BTreeMap::new();
    let mut edge_ends: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for (i, t) in edge_elems.iter().enumerate() {
        let r = euf.find(i);
        let next = roots.len();
        let cls = *roots.entry(r).or_insert(next);
        edge_class.insert(*t, cls);
        let g = if t.0 == 0 { b } else { cg };
        let (u, v) = g.endpoints(EdgeId(t.1)).unwrap();
        let (cu, cv) = (node_class[&(t.0, u.0)], node_class[&(t.0, v.0)]);
        edge_ends.entry(cls).or_default().insert((cu.min(cv), cu.max(cv)));
    }
    QuotientOracle {
        node_class,
        edge_class,
        node_classes,
        edge_ends,
    }
}
