//! Yen's loopless k-shortest paths over free-flow time.
//!
//! Costs are integer nanoseconds so that equal-length routes compare equal
//! exactly; ties are broken by the lexicographic order of link names.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::error::{Error, Result};

use super::{LinkId, NetworkGraph, NodeId, Route};

/// Up to `k` loopless routes from `origin` to `destination`, ascending by
/// free-flow time.
pub fn k_shortest_routes(
    graph: &NetworkGraph,
    origin: NodeId,
    destination: NodeId,
    k: usize,
) -> Result<Vec<Route>> {
    k_shortest_routes_avoiding(graph, origin, destination, k, &[])
}

/// Like [`k_shortest_routes`], never visiting any node in `avoid`.
pub fn k_shortest_routes_avoiding(
    graph: &NetworkGraph,
    origin: NodeId,
    destination: NodeId,
    k: usize,
    avoid: &[NodeId],
) -> Result<Vec<Route>> {
    if origin == destination {
        return Err(Error::DegenerateOd(graph.node(origin).name.clone()));
    }
    let no_route = || Error::EmptyChoiceSet {
        origin: graph.node(origin).name.clone(),
        destination: graph.node(destination).name.clone(),
    };
    let n = graph.nodes().len();
    let mut blocked_nodes = vec![false; n];
    for &a in avoid {
        if a != origin {
            blocked_nodes[a.0] = true;
        }
    }
    if blocked_nodes[destination.0] {
        return Err(no_route());
    }
    let blocked_links = vec![false; graph.links().len()];
    let first = lex_shortest(graph, origin, destination, &blocked_links, &blocked_nodes)
        .ok_or_else(no_route)?;

    let mut accepted: Vec<Vec<LinkId>> = vec![first];
    let mut seen: HashSet<Vec<LinkId>> = accepted.iter().cloned().collect();
    let mut candidates: BTreeSet<(u64, Vec<u32>, Vec<LinkId>)> = BTreeSet::new();

    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        let mut spur_node = origin;
        for j in 0..prev.len() {
            let root = &prev[..j];
            let mut bl = blocked_links.clone();
            for p in &accepted {
                if p.len() > j && &p[..j] == root {
                    bl[p[j].0] = true;
                }
            }
            let mut bn = blocked_nodes.clone();
            let mut node = origin;
            for &l in root {
                bn[node.0] = true;
                node = graph.link(l).to;
            }
            if let Some(spur) = lex_shortest(graph, spur_node, destination, &bl, &bn) {
                let mut total = root.to_vec();
                total.extend(spur);
                if !seen.contains(&total) {
                    let cost = total.iter().map(|&l| graph.cost_ns(l)).sum();
                    let ranks = total.iter().map(|&l| graph.rank(l)).collect();
                    candidates.insert((cost, ranks, total));
                }
            }
            spur_node = graph.link(prev[j]).to;
        }
        match candidates.pop_first() {
            Some((_, _, path)) => {
                seen.insert(path.clone());
                accepted.push(path);
            }
            None => break,
        }
    }
    Ok(accepted.into_iter().map(|p| Route::new(graph, p)).collect())
}

/// Minimum-cost path, lexicographically smallest by link rank among ties.
fn lex_shortest(
    graph: &NetworkGraph,
    from: NodeId,
    to: NodeId,
    blocked_links: &[bool],
    blocked_nodes: &[bool],
) -> Option<Vec<LinkId>> {
    if blocked_nodes[to.0] {
        return None;
    }
    let n = graph.nodes().len();
    let mut dist = vec![u64::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[to.0] = 0;
    heap.push(Reverse((0u64, to.0)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &l in graph.in_links(NodeId(u)) {
            let link = graph.link(l);
            let v = link.from.0;
            if blocked_links[l.0] || (blocked_nodes[v] && link.from != from) {
                continue;
            }
            let nd = d + graph.cost_ns(l);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if dist[from.0] == u64::MAX {
        return None;
    }
    let mut path = Vec::new();
    let mut u = from;
    while u != to {
        let next = graph
            .out_links(u)
            .iter()
            .copied()
            .filter(|&l| {
                let v = graph.link(l).to;
                !blocked_links[l.0]
                    && (!blocked_nodes[v.0] || v == to)
                    && dist[v.0] != u64::MAX
                    && dist[v.0] + graph.cost_ns(l) == dist[u.0]
            })
            .min_by_key(|&l| graph.rank(l))?;
        path.push(next);
        u = graph.link(next).to;
    }
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::graph::tests::{doc, link};
    use crate::roadnet::load_network;
    use proptest::prelude::*;

    /// Every loopless path, sorted by (cost, link-name ranks), truncated to k.
    fn brute_force(graph: &NetworkGraph, from: NodeId, to: NodeId, k: usize) -> Vec<Vec<LinkId>> {
        fn dfs(
            g: &NetworkGraph,
            u: NodeId,
            to: NodeId,
            visited: &mut Vec<bool>,
            path: &mut Vec<LinkId>,
            out: &mut Vec<Vec<LinkId>>,
        ) {
            if u == to {
                out.push(path.clone());
                return;
            }
            for &l in g.out_links(u) {
                let v = g.link(l).to;
                if visited[v.0] {
                    continue;
                }
                visited[v.0] = true;
                path.push(l);
                dfs(g, v, to, visited, path, out);
                path.pop();
                visited[v.0] = false;
            }
        }
        let mut visited = vec![false; graph.nodes().len()];
        visited[from.0] = true;
        let mut all = Vec::new();
        dfs(graph, from, to, &mut visited, &mut Vec::new(), &mut all);
        all.sort_by_key(|p| {
            (
                p.iter().map(|&l| graph.cost_ns(l)).sum::<u64>(),
                p.iter().map(|&l| graph.rank(l)).collect::<Vec<_>>(),
            )
        });
        all.truncate(k);
        all
    }

    fn links_of(routes: &[Route]) -> Vec<Vec<LinkId>> {
        routes.iter().map(|r| r.links.clone()).collect()
    }

    #[test]
    fn diamond_has_two_routes_shorter_first() {
        let g = load_network(&doc(
            &[("O", 0.0, 0.0), ("U", 1.0, 1.0), ("L", 1.0, -1.0), ("D", 2.0, 0.0)],
            vec![
                link("O-U", "O", "U", 100.0),
                link("U-D", "U", "D", 100.0),
                link("O-L", "O", "L", 80.0),
                link("L-D", "L", "D", 80.0),
            ],
        ))
        .unwrap();
        let o = g.node_id("O").unwrap();
        let d = g.node_id("D").unwrap();
        let routes = k_shortest_routes(&g, o, d, 10).unwrap();
        assert_eq!(routes.len(), 2);
        assert_eq!(routes[0].label(&g), "O-L>L-D");
        assert_eq!(routes[0].free_flow_s, 16.0);
        assert_eq!(routes[1].free_flow_s, 20.0);
        assert_eq!(links_of(&routes), brute_force(&g, o, d, 10));
    }

    #[test]
    fn single_path_graph() {
        let g = load_network(&doc(
            &[("A", 0.0, 0.0), ("B", 1.0, 0.0), ("C", 2.0, 0.0)],
            vec![link("A-B", "A", "B", 10.0), link("B-C", "B", "C", 10.0)],
        ))
        .unwrap();
        let routes = k_shortest_routes(&g, NodeId(0), NodeId(2), 10).unwrap();
        assert_eq!(routes.len(), 1);
    }

    #[test]
    fn no_path_is_an_empty_choice_set_error() {
        let g = load_network(&doc(
            &[("A", 0.0, 0.0), ("B", 1.0, 0.0)],
            vec![link("A-B", "A", "B", 10.0)],
        ))
        .unwrap();
        assert!(matches!(
            k_shortest_routes(&g, NodeId(1), NodeId(0), 3),
            Err(Error::EmptyChoiceSet { .. })
        ));
        assert!(matches!(
            k_shortest_routes(&g, NodeId(0), NodeId(0), 3),
            Err(Error::DegenerateOd(_))
        ));
    }

    #[test]
    fn complete_graph_matches_enumeration() {
        let names = ["a", "b", "c", "d", "e"];
        let nodes: Vec<(&str, f64, f64)> = names.iter().enumerate().map(|(i, n)| (*n, i as f64, 0.0)).collect();
        let mut links = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                if i != j {
                    let len = 10.0 + ((i * 7 + j * 3) % 11) as f64 * 5.0;
                    links.push(link(&format!("{a}{b}"), a, b, len));
                }
            }
        }
        let g = load_network(&doc(&nodes, links)).unwrap();
        let routes = k_shortest_routes(&g, NodeId(0), NodeId(4), 4).unwrap();
        assert_eq!(routes.len(), 4);
        assert_eq!(links_of(&routes), brute_force(&g, NodeId(0), NodeId(4), 4));
    }

    #[test]
    fn avoiding_nodes_excludes_them() {
        let g = load_network(&doc(
            &[("O", 0.0, 0.0), ("U", 1.0, 1.0), ("L", 1.0, -1.0), ("D", 2.0, 0.0)],
            vec![
                link("O-U", "O", "U", 100.0),
                link("U-D", "U", "D", 100.0),
                link("O-L", "O", "L", 80.0),
                link("L-D", "L", "D", 80.0),
            ],
        ))
        .unwrap();
        let l = g.node_id("L").unwrap();
        let routes = k_shortest_routes_avoiding(&g, NodeId(0), NodeId(3), 10, &[l]).unwrap();
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].label(&g), "O-U>U-D");
    }

    fn random_graph(n: usize, edges: &[(usize, usize, u8)]) -> NetworkGraph {
        let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let nodes: Vec<(&str, f64, f64)> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i as f64, 0.0)).collect();
        let mut seen = HashSet::new();
        let mut links = Vec::new();
        for &(a, b, w) in edges {
            let (a, b) = (a % n, b % n);
            if a == b || !seen.insert((a, b)) {
                continue;
            }
            // Few distinct lengths so that ties are common.
            let len = 10.0 * (1 + w % 4) as f64;
            links.push(link(&format!("l{a}_{b}"), &names[a], &names[b], len));
        }
        load_network(&doc(&nodes, links)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn yen_equals_brute_force(
            n in 3usize..=8,
            edges in prop::collection::vec((0usize..8, 0usize..8, any::<u8>()), 4..30),
            k in 1usize..12,
        ) {
            let g = random_graph(n, &edges);
            let (o, d) = (NodeId(0), NodeId(n - 1));
            let expected = brute_force(&g, o, d, k);
            match k_shortest_routes(&g, o, d, k) {
                Ok(routes) => prop_assert_eq!(links_of(&routes), expected),
                Err(Error::EmptyChoiceSet { .. }) => prop_assert!(expected.is_empty()),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
