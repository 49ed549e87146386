#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Shortest path by Dijkstra over an undirected weighted edge list.
/// Returns the distance and the vertex sequence.
pub fn dijkstra(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> Option<(f64, Vec<usize>)> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Item(0.0, s));
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if v == t {
            break;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                prev[w] = v;
                heap.push(Item(nd, w));
            }
        }
    }
    if !dist[t].is_finite() {
        return None;
    }
    let mut path = vec![t];
    while *path.last().unwrap() != s {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Some((dist[t], path))
}

/// Shortest simple path by exhaustive enumeration, for tiny graphs.
pub fn brute_force(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> Option<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    fn go(adj: &[Vec<(usize, f64)>], v: usize, t: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if v == t {
            *best = best.min(acc);
            return;
        }
        for &(w, len) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                go(adj, w, t, seen, acc + len, best);
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut best = f64::INFINITY;
    go(&adj, s, t, &mut seen, 0.0, &mut best);
    best.is_finite().then_some(best)
}

/// Euclidean-weighted edge list of a graph instance, in vertex indices.
pub fn weighted_edges(g: &ehrp_core::harness::GraphInstance) -> Vec<(usize, usize, f64)> {
    g.edge_indices()
        .into_iter()
        .map(|(a, b)| {
            let (p, q) = (&g.nodes[a], &g.nodes[b]);
            (a, b, (p.x - q.x).hypot(p.y - q.y))
        })
        .collect()
}

/// Spearman rank correlation, average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub struct ColonyState {
    pub graph: ehrp_core::RoutingGraph,
    pub tau: ehrp_core::aco::PheromoneTable<f64>,
    pub at: usize,
    pub visited: Vec<usize>,
    pub destination: usize,
}

/// A random graph with random energies, a pheromone table aged by random
/// deposits, and an ant position that still has an unvisited neighbour.
pub fn random_colony_state(seed: u64) -> ColonyState {
    use ehrp_core::aco::{AcoParams, PheromoneTable};
    use ehrp_core::harness::random_instance;
    use ehrp_core::radio::PropagationParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=16);
    let mut g = random_instance(n, 200.0, 90.0, seed).unwrap();
    for node in &mut g.nodes {
        node.energy = rng.random_range(0.01..=0.5);
    }
    let (graph, _, destination) = g.routing_graph(&PropagationParams::default(), seed);
    let params = AcoParams::<f64>::default();
    let mut tau = PheromoneTable::for_graph(&graph, &params);
    for _ in 0..rng.random_range(0..8) {
        let deposits: Vec<(usize, f64)> = (0..rng.random_range(0..graph.edge_count() + 1))
            .map(|_| (rng.random_range(0..graph.edge_count()), rng.random_range(0.0..2.0)))
            .collect();
        tau.step(&deposits);
    }
    loop {
        let at = rng.random_range(0..n);
        let visited: Vec<usize> = (0..n).filter(|&v| v != at && rng.random_bool(0.3)).collect();
        let open = graph.neighbors(at).iter().any(|j| !visited.contains(j));
        if open {
            return ColonyState {
                graph,
                tau,
                at,
                visited,
                destination,
            };
        }
    }
}
