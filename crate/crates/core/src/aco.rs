//! Ant-colony multi-hop router.
//!
//! Ants walk from a source to a destination choosing each next hop `j` with
//! probability proportional to `tau_ij^alpha * eta_ij^beta`, where the
//! heuristic `eta_ij` is the sum of the shifted RSSI of link `i -> j` and of
//! `j` towards the destination. Every completed walk deposits `Q / L` on its
//! edges, the iteration's fittest walk additionally deposits `Q * fitness`,
//! and all trails evaporate by `1 - rho`. The returned route is the fittest
//! walk seen, where fitness is `E_avg * E_min / (exp(E_init) * L)`.

use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::RadioModel;
use crate::scalar::{lit, Scalar};
use crate::topology::Position;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct AcoParams<T> {
    pub alpha: T,
    pub beta: T,
    pub rho: T,
    pub q_deposit: T,
    pub ant_count: usize,
    pub max_iterations: usize,
    pub tau_init: T,
    pub tau_min: T,
    /// Stop after this many iterations without a better route. 0 disables.
    pub stall_limit: usize,
}

impl<T: Scalar> Default for AcoParams<T> {
    fn default() -> Self {
        AcoParams {
            alpha: lit(5.0),
            beta: lit(10.0),
            rho: lit(0.6),
            q_deposit: lit(1.0),
            ant_count: 20,
            max_iterations: 60,
            tau_init: lit(1.0),
            tau_min: lit(1e-4),
            stall_limit: 0,
        }
    }
}

impl<T: Scalar> AcoParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= T::zero() && self.rho <= T::one()) {
            return Err(Error::invalid("aco.rho", "must lie in [0, 1]"));
        }
        if self.ant_count == 0 {
            return Err(Error::invalid("aco.ant_count", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("aco.max_iterations", "must be at least 1"));
        }
        if !(self.tau_min > T::zero()) {
            return Err(Error::invalid("aco.tau_min", "must be positive"));
        }
        if !(self.tau_init >= self.tau_min) {
            return Err(Error::invalid("aco.tau_init", "must be >= tau_min"));
        }
        if !(self.alpha >= T::zero()) || !(self.beta >= T::zero()) {
            return Err(Error::invalid("aco.alpha/beta", "must be non-negative"));
        }
        if !(self.q_deposit >= T::zero()) {
            return Err(Error::invalid("aco.q_deposit", "must be non-negative"));
        }
        Ok(())
    }
}

/// A vertex of the routing graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex<T> {
    /// Endpoint id, used to key shadowing.
    pub id: usize,
    pub position: Position<T>,
    pub energy: T,
    pub initial: T,
}

/// Directed graph the ants walk on, in compressed sparse row form with
/// per-edge length and link heuristic precomputed.
#[derive(Debug, Clone)]
pub struct RoutingGraph<T> {
    vertices: Vec<Vertex<T>>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_len: Vec<T>,
    edge_eta: Vec<T>,
    radio: RadioModel<T>,
}

impl<T: Scalar> RoutingGraph<T> {
    /// Builds from directed `(from, to)` pairs of vertex indices. Duplicates
    /// and self-loops are dropped.
    pub fn new(vertices: Vec<Vertex<T>>, edges: impl IntoIterator<Item = (usize, usize)>, radio: RadioModel<T>) -> Self {
        let n = vertices.len();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range");
            if a != b {
                lists[a].push(b);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
            targets.extend_from_slice(l);
            offsets.push(targets.len());
        }
        let mut graph = RoutingGraph {
            vertices,
            offsets,
            targets,
            edge_len: Vec::new(),
            edge_eta: Vec::new(),
            radio,
        };
        let (len, eta): (Vec<T>, Vec<T>) = (0..n)
            .flat_map(|a| graph.edge_range(a).map(move |e| (a, e)))
            .map(|(a, e)| {
                let b = graph.targets[e];
                let (va, vb) = (&graph.vertices[a], &graph.vertices[b]);
                let d = va.position.distance(&vb.position);
                let r = graph
                    .radio
                    .rssi_between(va.id, va.position, vb.id, vb.position)
                    .unwrap_or_else(|_| graph.radio.params.reference_rssi());
                (d, graph.radio.shifted(r))
            })
            .unzip();
        graph.edge_len = len;
        graph.edge_eta = eta;
        graph
    }

    /// Builds with both directions of every pair.
    pub fn undirected(vertices: Vec<Vertex<T>>, edges: &[(usize, usize)], radio: RadioModel<T>) -> Self {
        let both = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]);
        Self::new(vertices, both, radio)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn vertex(&self, v: usize) -> &Vertex<T> {
        &self.vertices[v]
    }

    pub fn set_energy(&mut self, v: usize, energy: T) {
        self.vertices[v].energy = energy;
    }

    pub fn radio(&self) -> &RadioModel<T> {
        &self.radio
    }

    #[inline]
    fn edge_range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.edge_range(v)]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let r = self.edge_range(a);
        self.targets[r.clone()].binary_search(&b).ok().map(|k| r.start + k)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        self.vertices[a].position.distance(&self.vertices[b].position)
    }

    /// Breadth-first reachability.
    pub fn reachable(&self, source: usize, destination: usize) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(v) = queue.pop_front() {
            if v == destination {
                return true;
            }
            for &w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }

    /// Heuristic term of `j` towards `m`. At `j == m` it takes the
    /// reference-distance value, the strongest signal the model can produce.
    fn destination_eta(&self, j: usize, m: usize) -> T {
        if j == m {
            return self.radio.shifted(self.radio.params.reference_rssi());
        }
        let (vj, vm) = (&self.vertices[j], &self.vertices[m]);
        match self.radio.rssi_between(vj.id, vj.position, vm.id, vm.position) {
            Ok(r) => self.radio.shifted(r),
            Err(_) => self.radio.shifted(self.radio.params.reference_rssi()),
        }
    }
}

/// `eta_ij = shifted(rssi(i, j)) + shifted(rssi(j, m))`.
pub fn heuristic<T: Scalar>(graph: &RoutingGraph<T>, i: usize, j: usize, m: usize) -> T {
    let link = match graph.edge_index(i, j) {
        Some(e) => graph.edge_eta[e],
        None => {
            let (vi, vj) = (graph.vertex(i), graph.vertex(j));
            graph
                .radio
                .rssi_between(vi.id, vi.position, vj.id, vj.position)
                .map(|r| graph.radio.shifted(r))
                .unwrap_or(T::zero())
        }
    };
    link + graph.destination_eta(j, m)
}

/// Pheromone per directed edge, floored at `tau_min`.
///
/// Evaporation is applied lazily: an edge last written at iteration `s`
/// reads `max(tau_min, value * (1 - rho)^(now - s))`, which equals the value
/// obtained by evaporating and flooring it once per iteration.
#[derive(Debug, Clone)]
pub struct PheromoneTable<T> {
    value: Vec<T>,
    stamp: Vec<u32>,
    now: u32,
    decay: T,
    tau_min: T,
}

impl<T: Scalar> PheromoneTable<T> {
    pub fn new(edge_count: usize, params: &AcoParams<T>) -> Self {
        PheromoneTable {
            value: vec![params.tau_init; edge_count],
            stamp: vec![0; edge_count],
            now: 0,
            decay: T::one() - params.rho,
            tau_min: params.tau_min,
        }
    }

    pub fn for_graph(graph: &RoutingGraph<T>, params: &AcoParams<T>) -> Self {
        Self::new(graph.edge_count(), params)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    #[inline]
    pub fn get(&self, edge: usize) -> T {
        let age = self.now - self.stamp[edge];
        if age == 0 {
            self.value[edge]
        } else {
            (self.value[edge] * self.decay.powi(age as i32)).max(self.tau_min)
        }
    }

    pub fn values(&self) -> Vec<T> {
        (0..self.len()).map(|e| self.get(e)).collect()
    }

    /// One update step: every edge evaporates, edges in `deposits` also gain
    /// their summed deposit, and everything is floored at `tau_min`.
    pub fn step(&mut self, deposits: &[(usize, T)]) {
        let mut sorted: Vec<(usize, T)> = deposits.to_vec();
        sorted.sort_by_key(|d| d.0);
        let mut k = 0;
        while k < sorted.len() {
            let edge = sorted[k].0;
            let mut add = T::zero();
            while k < sorted.len() && sorted[k].0 == edge {
                add = add + sorted[k].1;
                k += 1;
            }
            let prev = self.get(edge);
            self.value[edge] = (self.decay * prev + add).max(self.tau_min);
            self.stamp[edge] = self.now + 1;
        }
        self.now += 1;
    }
}

/// A completed walk.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath<T> {
    /// Vertex indices from source to destination.
    pub nodes: Vec<usize>,
    /// Sum of hop distances, m.
    pub length: T,
    pub e_avg: T,
    pub e_min: T,
    pub e_init: T,
    pub fitness: T,
}

impl<T: Scalar> RoutePath<T> {
    /// Energy statistics cover the source and relays, not the destination.
    pub fn from_nodes(graph: &RoutingGraph<T>, nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::ZeroLengthPath);
        }
        let length = nodes
            .windows(2)
            .map(|w| graph.distance(w[0], w[1]))
            .fold(T::zero(), |a, b| a + b);
        Self::with_length(graph, nodes, length)
    }

    fn with_length(graph: &RoutingGraph<T>, nodes: Vec<usize>, length: T) -> Result<Self> {
        let senders = &nodes[..nodes.len() - 1];
        let count = lit::<T>(senders.len() as f64);
        let e_avg = senders.iter().map(|&v| graph.vertex(v).energy).sum::<T>() / count;
        let e_min = senders
            .iter()
            .map(|&v| graph.vertex(v).energy)
            .fold(T::infinity(), T::min);
        let e_init = senders.iter().map(|&v| graph.vertex(v).initial).sum::<T>() / count;
        let fit = fitness_value(e_avg, e_min, e_init, length)?;
        Ok(RoutePath {
            nodes,
            length,
            e_avg,
            e_min,
            e_init,
            fitness: fit,
        })
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn source(&self) -> usize {
        self.nodes[0]
    }

    pub fn destination(&self) -> usize {
        *self.nodes.last().expect("nonempty path")
    }
}

/// `E_avg * E_min / (exp(E_init) * L)`.
pub fn fitness_value<T: Scalar>(e_avg: T, e_min: T, e_init: T, length: T) -> Result<T> {
    if !(length > T::zero()) {
        return Err(Error::ZeroLengthPath);
    }
    Ok(e_avg * e_min / (e_init.exp() * length))
}

pub fn fitness<T: Scalar>(path: &RoutePath<T>) -> Result<T> {
    fitness_value(path.e_avg, path.e_min, path.e_init, path.length)
}

/// Higher fitness first, then shorter, then lexicographically smaller.
fn better<T: Scalar>(a: &RoutePath<T>, b: &RoutePath<T>) -> bool {
    match a.fitness.partial_cmp(&b.fitness) {
        Some(Ordering::Greater) => return true,
        Some(Ordering::Less) => return false,
        _ => {}
    }
    match a.length.partial_cmp(&b.length) {
        Some(Ordering::Less) => return true,
        Some(Ordering::Greater) => return false,
        _ => {}
    }
    a.nodes < b.nodes
}

/// Scratch state for one routing request: cached `beta * ln(eta)` per edge.
struct Workspace<T> {
    destination: usize,
    log_eta: Vec<T>,
    visited: Vec<bool>,
    candidates: Vec<(usize, usize, T)>,
    /// Per-edge weight relative to the best out-edge of its tail, valid for
    /// the tail's stamp. Pheromone only changes between iterations, so all
    /// ants of an iteration share these.
    weight: Vec<f64>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl<T: Scalar> Workspace<T> {
    fn new(graph: &RoutingGraph<T>, destination: usize) -> Self {
        Workspace {
            destination,
            log_eta: vec![T::nan(); graph.edge_count()],
            visited: vec![false; graph.vertex_count()],
            candidates: Vec::new(),
            weight: vec![0.0; graph.edge_count()],
            stamp: vec![0; graph.vertex_count()],
            epoch: 1,
        }
    }

    fn cache_weights(&mut self, graph: &RoutingGraph<T>, at: usize, tau: &PheromoneTable<T>, params: &AcoParams<T>) {
        if self.stamp[at] == self.epoch {
            return;
        }
        self.stamp[at] = self.epoch;
        let mut max = f64::NEG_INFINITY;
        for e in graph.edge_range(at) {
            let log_tau = if params.alpha == T::zero() {
                T::zero()
            } else {
                params.alpha * tau.get(e).ln()
            };
            let lw = crate::scalar::to_f64(log_tau + self.beta_log_eta(graph, e, params.beta));
            self.weight[e] = lw;
            max = max.max(lw);
        }
        for e in graph.edge_range(at) {
            self.weight[e] = if max == f64::NEG_INFINITY {
                0.0
            } else {
                (self.weight[e] - max).exp()
            };
        }
    }

    fn beta_log_eta(&mut self, graph: &RoutingGraph<T>, edge: usize, beta: T) -> T {
        let cached = self.log_eta[edge];
        if !cached.is_nan() {
            return cached;
        }
        let eta = graph.edge_eta[edge] + graph.destination_eta(graph.targets[edge], self.destination);
        let v = if beta == T::zero() {
            T::zero()
        } else {
            beta * eta.ln()
        };
        self.log_eta[edge] = v;
        v
    }

    /// Fills `candidates` with `(vertex, edge, weight)` normalised to sum to
    /// one. Returns false when no unvisited neighbour exists.
    fn fill(&mut self, graph: &RoutingGraph<T>, at: usize, tau: &PheromoneTable<T>, params: &AcoParams<T>) -> bool {
        self.candidates.clear();
        let mut max = T::neg_infinity();
        for e in graph.edge_range(at) {
            let j = graph.targets[e];
            if self.visited[j] {
                continue;
            }
            let log_tau = if params.alpha == T::zero() {
                T::zero()
            } else {
                params.alpha * tau.get(e).ln()
            };
            let lw = log_tau + self.beta_log_eta(graph, e, params.beta);
            if lw > max {
                max = lw;
            }
            self.candidates.push((j, e, lw));
        }
        if self.candidates.is_empty() {
            return false;
        }
        if max == T::neg_infinity() {
            // every weight is zero: fall back to uniform
            let u = T::one() / lit(self.candidates.len() as f64);
            for c in &mut self.candidates {
                c.2 = u;
            }
            return true;
        }
        let mut total = T::zero();
        for c in &mut self.candidates {
            c.2 = (c.2 - max).exp();
            total = total + c.2;
        }
        for c in &mut self.candidates {
            c.2 = c.2 / total;
        }
        true
    }
}

/// Next-hop distribution of an ant at `at` that has visited `visited`.
pub fn transition_probabilities<T: Scalar>(
    graph: &RoutingGraph<T>,
    at: usize,
    visited: &[usize],
    destination: usize,
    tau: &PheromoneTable<T>,
    params: &AcoParams<T>,
) -> Result<Vec<(usize, T)>> {
    let mut ws = Workspace::new(graph, destination);
    for &v in visited {
        ws.visited[v] = true;
    }
    ws.visited[at] = true;
    if !ws.fill(graph, at, tau, params) {
        return Err(Error::DeadEnd);
    }
    Ok(ws.candidates.iter().map(|c| (c.0, c.2)).collect())
}

fn walk<T: Scalar>(
    graph: &RoutingGraph<T>,
    source: usize,
    tau: &PheromoneTable<T>,
    params: &AcoParams<T>,
    ws: &mut Workspace<T>,
    rng: &mut ChaCha8Rng,
) -> Result<RoutePath<T>> {
    let destination = ws.destination;
    let mut nodes = Vec::with_capacity(32);
    nodes.push(source);
    let mut length = T::zero();
    ws.visited[source] = true;
    let mut at = source;
    let outcome = loop {
        if at == destination {
            break Ok(());
        }
        ws.cache_weights(graph, at, tau, params);
        let total: f64 = graph
            .edge_range(at)
            .filter(|&e| !ws.visited[graph.targets[e]])
            .map(|e| ws.weight[e])
            .sum();
        let u: f64 = rng.random();
        let next = if total > 0.0 && total.is_finite() {
            let target = u * total;
            let mut acc = 0.0;
            let mut pick = None;
            for e in graph.edge_range(at) {
                let j = graph.targets[e];
                if ws.visited[j] {
                    continue;
                }
                acc += ws.weight[e];
                pick = Some((j, e));
                if target < acc {
                    break;
                }
            }
            pick.expect("positive total has a candidate")
        } else {
            // cached weights underflowed or no candidate left: exact path
            if !ws.fill(graph, at, tau, params) {
                break Err(Error::DeadEnd);
            }
            let mut acc = 0.0;
            let last = ws.candidates.last().expect("nonempty");
            let mut pick = (last.0, last.1);
            for c in &ws.candidates {
                acc += crate::scalar::to_f64(c.2);
                if u < acc {
                    pick = (c.0, c.1);
                    break;
                }
            }
            pick
        };
        let (next, edge) = next;
        length = length + graph.edge_len[edge];
        ws.visited[next] = true;
        nodes.push(next);
        at = next;
    };
    for &v in &nodes {
        ws.visited[v] = false;
    }
    outcome?;
    RoutePath::with_length(graph, nodes, length)
}

/// Sends one ant from `source` towards `destination`.
pub fn construct_path<T: Scalar>(
    graph: &RoutingGraph<T>,
    source: usize,
    destination: usize,
    tau: &PheromoneTable<T>,
    params: &AcoParams<T>,
    seed: u64,
) -> Result<RoutePath<T>> {
    let mut ws = Workspace::new(graph, destination);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    walk(graph, source, tau, params, &mut ws, &mut rng)
}

/// Evaporates every trail, deposits `Q / L_k` along each completed walk and
/// `Q * fitness` along the iteration's best walk.
pub fn update_pheromones<T: Scalar>(
    tau: &mut PheromoneTable<T>,
    graph: &RoutingGraph<T>,
    iteration_paths: &[RoutePath<T>],
    best: Option<&RoutePath<T>>,
    params: &AcoParams<T>,
) {
    let mut deposits = Vec::new();
    let mut lay = |path: &RoutePath<T>, amount: T| {
        for w in path.nodes.windows(2) {
            if let Some(e) = graph.edge_index(w[0], w[1]) {
                deposits.push((e, amount));
            }
        }
    };
    for p in iteration_paths {
        lay(p, params.q_deposit / p.length);
    }
    if let Some(b) = best {
        lay(b, params.q_deposit * b.fitness);
    }
    tau.step(&deposits);
}

/// Best route of a solve, with convergence bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub path: RoutePath<T>,
    /// 1-based iteration in which `path` was first found.
    pub best_iteration: usize,
    pub iterations_run: usize,
}

/// Runs the colony and returns the fittest route found.
pub fn solve<T: Scalar>(
    graph: &RoutingGraph<T>,
    source: usize,
    destination: usize,
    params: &AcoParams<T>,
    seed: u64,
) -> Result<Solution<T>> {
    let mut tau = PheromoneTable::for_graph(graph, params);
    solve_with(graph, source, destination, params, seed, &mut tau)
}

/// Like [`solve`], but continues from and updates an existing pheromone
/// table for `graph`.
pub fn solve_with<T: Scalar>(
    graph: &RoutingGraph<T>,
    source: usize,
    destination: usize,
    params: &AcoParams<T>,
    seed: u64,
    tau: &mut PheromoneTable<T>,
) -> Result<Solution<T>> {
    params.validate()?;
    if source == destination {
        return Err(Error::invalid("destination", "must differ from source"));
    }
    assert_eq!(tau.len(), graph.edge_count(), "pheromone table belongs to another graph");
    let mut ws = Workspace::new(graph, destination);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(RoutePath<T>, usize)> = None;
    let mut stalled = 0;
    let mut iterations_run = 0;
    let mut paths = Vec::with_capacity(params.ant_count);

    for iteration in 1..=params.max_iterations {
        iterations_run = iteration;
        paths.clear();
        for _ in 0..params.ant_count {
            if let Ok(p) = walk(graph, source, tau, params, &mut ws, &mut rng) {
                paths.push(p);
            }
        }
        let iteration_best = paths
            .iter()
            .fold(None::<&RoutePath<T>>, |acc, p| match acc {
                Some(b) if !better(p, b) => Some(b),
                _ => Some(p),
            });
        let improved = match (iteration_best, &best) {
            (Some(ib), Some((b, _))) => better(ib, b),
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            best = iteration_best.map(|p| (p.clone(), iteration));
            stalled = 0;
        } else {
            stalled += 1;
        }
        update_pheromones(tau, graph, &paths, iteration_best, params);
        ws.epoch += 1;
        if params.stall_limit > 0 && best.is_some() && stalled >= params.stall_limit {
            break;
        }
    }

    match best {
        Some((path, best_iteration)) => Ok(Solution {
            path,
            best_iteration,
            iterations_run,
        }),
        None if graph.reachable(source, destination) => Err(Error::NoAntCompleted { origin: source, destination }),
        None => Err(Error::Unreachable { origin: source, destination }),
    }
}
