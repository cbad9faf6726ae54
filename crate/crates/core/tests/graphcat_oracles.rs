mod common;

use std::collections::BTreeMap;

use common::{quotient_oracle, random_graph, random_mono_cospan, rng};
use mycocat::graphcat::{
    compose_graph_morphisms, enumerate_morphisms, is_isomorphic, is_monomorphism, probe_family, pushout_along_monos,
    verify_pushout_universal_property, AttributedGraph, EdgeId, GraphMorphism, NodeId,
};
use rand::Rng;

/// Left-cancellation oracle: `f` is mono iff no two distinct morphisms from a
/// probe graph agree after composing with `f`.
fn left_cancellable(f: &GraphMorphism) -> bool {
    for w in probe_family(2, false) {
        let homs = enumerate_morphisms(&w, f.source()).unwrap();
        let images: Vec<GraphMorphism> = homs.iter().map(|g| compose_graph_morphisms(g, f).unwrap()).collect();
        for i in 0..homs.len() {
            for j in (i + 1)..homs.len() {
                if images[i] == images[j] {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn mono_matches_left_cancellation() {
    let mut rng = rng(11);
    let (mut monos, mut others, mut checked) = (0, 0, 0);
    while checked < 50 {
        let s = random_graph(&mut rng, 4);
        let t = random_graph(&mut rng, 5);
        let homs = enumerate_morphisms(&s, &t).unwrap();
        if homs.is_empty() {
            continue;
        }
        let f = &homs[rng.random_range(0..homs.len())];
        let verdict = is_monomorphism(f);
        assert_eq!(verdict, left_cancellable(f), "disagreement on {f:?}");
        if verdict {
            monos += 1;
        } else {
            others += 1;
        }
        checked += 1;
    }
    assert!(
        monos > 5 && others > 5,
        "sample too lopsided: {monos} monos, {others} non-monos"
    );
}

#[test]
fn pushout_matches_union_find_quotient() {
    let mut rng = rng(23);
    for _ in 0..20 {
        let c = random_mono_cospan(&mut rng, 4);
        let po = pushout_along_monos(&c).unwrap();
        let oracle = quotient_oracle(&c);
        assert_eq!(po.object.node_count(), oracle.node_classes);
        assert_eq!(po.object.edge_count(), oracle.edge_ends.len());

        // Identification pattern of the coprojections equals the oracle classes.
        let mut impl_nodes: BTreeMap<(u8, u64), NodeId> = BTreeMap::new();
        for (x, y) in po.from_left.node_map() {
            impl_nodes.insert((0, x.0), *y);
        }
        for (x, y) in po.from_right.node_map() {
            impl_nodes.insert((1, x.0), *y);
        }
        for (s, si) in &impl_nodes {
            for (t, ti) in &impl_nodes {
                assert_eq!(si == ti, oracle.node_class[s] == oracle.node_class[t]);
            }
        }
        let mut impl_edges: BTreeMap<(u8, u64), EdgeId> = BTreeMap::new();
        for (x, y) in po.from_left.edge_map() {
            impl_edges.insert((0, x.0), *y);
        }
        for (x, y) in po.from_right.edge_map() {
            impl_edges.insert((1, x.0), *y);
        }
        for (s, si) in &impl_edges {
            for (t, ti) in &impl_edges {
                assert_eq!(si == ti, oracle.edge_class[s] == oracle.edge_class[t]);
            }
        }
        // Endpoints of each edge class agree.
        let class_of_node: BTreeMap<NodeId, usize> =
            impl_nodes.iter().map(|(t, n)| (*n, oracle.node_class[t])).collect();
        for (t, e) in &impl_edges {
            let (u, v) = po.object.endpoints(*e).unwrap();
            let (cu, cv) = (class_of_node[&u], class_of_node[&v]);
            let ends = &oracle.edge_ends[&oracle.edge_class[t]];
            assert_eq!(ends.len(), 1);
            assert!(ends.contains(&(cu.min(cv), cu.max(cv))));
        }
    }
}

#[test]
fn pushout_passes_universal_property() {
    let mut rng = rng(5);
    for _ in 0..30 {
        let c = random_mono_cospan(&mut rng, 4);
        let po = pushout_along_monos(&c).unwrap();
        assert!(verify_pushout_universal_property(&c, &po, 4).unwrap());
    }
}

#[test]
fn pushout_is_symmetric() {
    let mut rng = rng(9);
    for _ in 0..30 {
        let c = random_mono_cospan(&mut rng, 4);
        let a = pushout_along_monos(&c).unwrap();
        let b = pushout_along_monos(&c.swapped()).unwrap();
        assert!(is_isomorphic(&a.object, &b.object));
    }
}

#[test]
fn pushout_ids_are_deterministic() {
    let mut rng = rng(31);
    for _ in 0..10 {
        let c = random_mono_cospan(&mut rng, 4);
        assert_eq!(pushout_along_monos(&c).unwrap(), pushout_along_monos(&c).unwrap());
    }
}

#[test]
fn composition_associative_and_unital_exhaustively() {
    let g = |nodes: &[u64], edges: &[(u64, u64, u64)]| {
        AttributedGraph::new(
            nodes.iter().map(|n| NodeId(*n)),
            edges.iter().map(|(e, u, v)| (EdgeId(*e), (NodeId(*u), NodeId(*v)))),
        )
        .unwrap()
    };
    let g1 = g(&[0, 1], &[(0, 0, 1)]);
    let g2 = AttributedGraph::path(3);
    let g3 = g(&[0, 1, 2], &[(0, 0, 1), (1, 1, 2), (2, 2, 0), (3, 1, 1)]);
    let g4 = g(
        &[0, 1, 2, 3, 4],
        &[(0, 0, 1), (1, 1, 2), (2, 2, 0), (3, 2, 3), (4, 3, 4), (5, 4, 4)],
    );
    let h12 = enumerate_morphisms(&g1, &g2).unwrap();
    let h23 = enumerate_morphisms(&g2, &g3).unwrap();
    let h34 = enumerate_morphisms(&g3, &g4).unwrap();
    assert!(!h12.is_empty() && !h23.is_empty() && !h34.is_empty());
    for f in &h12 {
        assert_eq!(&compose_graph_morphisms(&GraphMorphism::identity(&g1), f).unwrap(), f);
        assert_eq!(&compose_graph_morphisms(f, &GraphMorphism::identity(&g2)).unwrap(), f);
        for gm in &h23 {
            let fg = compose_graph_morphisms(f, gm).unwrap();
            for h in &h34 {
                let left = compose_graph_morphisms(&fg, h).unwrap();
                let right = compose_graph_morphisms(f, &compose_graph_morphisms(gm, h).unwrap()).unwrap();
                assert_eq!(left, right);
            }
        }
    }
}
