//! Round-based protocol driver.
//!
//! Each round: cluster heads rotate, members report one reading to their
//! cluster head, the cluster head aggregates them into one message, the
//! cluster head of every grid a sink is currently in hands its message to
//! that sink, and every other cluster head either routes its message to the
//! nearest sink over the ant-colony router or, in the wait-for-sink mode,
//! holds it until a sink arrives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aco::{self, PheromoneTable, RoutePath, RoutingGraph, Vertex};
use crate::clustering::{adopt_unconnected, apply_rotation, failover, refresh_energy_order, Failover};
use crate::config::{Protocol, ScenarioConfig};
use crate::energy::{aggregation_energy, debit, rx_energy, tx_energy, Charge, EnergyLedger, Femtojoules, RadioParams};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, Recorder};
use crate::mobility::{build_routes, kmh_to_mps, serving_grid, SinkState};
use crate::radio::RadioModel;
use crate::scalar::{lit, to_f64, Scalar};
use crate::topology::{deploy, rebuild_comm_graph, CommGraph, Deployment, GridId, Lattice, NodeId, NodeState, Position};

/// One aggregated message from a cluster head.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    /// Cluster head that built the message.
    pub source: NodeId,
    pub origin_grid: GridId,
    pub created_round: usize,
    /// bits
    pub size: u64,
    /// Member readings carried, the cluster head's own included.
    pub readings: u64,
    pub hop_count: u32,
    pub delivered: bool,
    pub delivered_round: Option<usize>,
    pub waiting_rounds: usize,
    /// Nodes the message passed through after leaving its source.
    pub relays: Vec<NodeId>,
    pub sink: Option<usize>,
    /// m
    pub route_length: f64,
}

/// `hop_count * hop_time + waiting_rounds * round_duration`, seconds.
pub fn packet_delay(p: &Packet, hop_time: f64, round_duration: f64) -> Result<f64> {
    if !p.delivered {
        return Err(Error::Undelivered(p.id));
    }
    Ok(p.hop_count as f64 * hop_time + p.waiting_rounds as f64 * round_duration)
}

pub fn route_distance<T: Scalar>(path: &RoutePath<T>) -> T {
    path.length
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.generated += other.generated;
        self.delivered += other.delivered;
        self.dropped += other.dropped;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    /// Energy each node spent this round, indexed by node id.
    pub energy_spent: Vec<Femtojoules>,
    /// Member readings this round.
    pub readings: Tally,
    /// Aggregated messages this round.
    pub packets: Tally,
    pub in_flight_readings: u64,
    pub in_flight_packets: u64,
    pub delivered: Vec<Packet>,
    pub alive: usize,
    /// Total consumed since the start of the run.
    pub energy_cum: Femtojoules,
    pub residual_total: Femtojoules,
    pub routing_failures: u64,
    /// Initial minus residual energy equals the debit ledger.
    pub ledger_exact: bool,
    /// generated = delivered + dropped + in-flight, for readings and messages.
    pub packets_balanced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Node(NodeId),
    Sink(usize),
}

struct RouteEntry<T> {
    target: Endpoint,
    graph: RoutingGraph<T>,
    vertex_of: Vec<usize>,
    endpoint: Vec<Endpoint>,
    tau: Option<PheromoneTable<T>>,
}

#[derive(Debug, Clone, Default)]
struct Meter {
    ledger: EnergyLedger,
    spent: Vec<Femtojoules>,
    died: Vec<NodeId>,
}

impl Meter {
    fn charge<T: Scalar>(&mut self, node: &mut NodeState<T>, joules: T, kind: Charge) -> bool {
        let was_alive = node.alive();
        let d = debit(node, joules);
        self.ledger.record(kind, d.charged);
        self.spent[node.id] += d.charged;
        if was_alive && !node.alive() {
            self.died.push(node.id);
        }
        d.complete
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

const NONE: usize = usize::MAX;

/// Full state of one run.
pub struct Simulation<T: Scalar> {
    config: ScenarioConfig,
    radio: RadioParams<T>,
    model: RadioModel<T>,
    aco: aco::AcoParams<T>,
    bits: T,
    control_bits: T,
    comm_range: T,
    idle: T,
    lattice: Lattice<T>,
    nodes: Vec<NodeState<T>>,
    grids: Vec<crate::topology::VirtualGrid<T>>,
    sinks: Vec<SinkState<T>>,
    comm: CommGraph,
    round: usize,
    round_duration: T,
    meter: Meter,
    initial_total: Femtojoules,
    loss_rng: ChaCha8Rng,
    seed: u64,
    buffers: Vec<Vec<Packet>>,
    next_packet: u64,
    readings: Tally,
    packets: Tally,
    routes: Vec<RouteEntry<T>>,
    routing_failures: u64,
}

impl<T: Scalar> Simulation<T> {
    /// Validates the config, deploys the nodes and lays out the sink routes.
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let deployment = deploy::<T>(config, seed)?;
        let sinks = build_routes(&deployment.lattice, config.sink_count, kmh_to_mps(lit::<T>(config.sink_speed)))?;
        Self::with_layout(config, deployment, sinks, seed)
    }

    /// Starts from a hand-made deployment and sink set.
    pub fn with_layout(config: &ScenarioConfig, deployment: Deployment<T>, sinks: Vec<SinkState<T>>, seed: u64) -> Result<Self> {
        config.radio.validate()?;
        config.propagation.validate()?;
        config.aco.validate()?;
        let Deployment { lattice, nodes, grids } = deployment;
        let comm_range: T = lit(config.comm_range);
        let comm = rebuild_comm_graph(&nodes, comm_range);
        let model = RadioModel::new(config.propagation.cast(), mix(seed, 1, 0));
        let pitch = lattice.cell_width().min(lattice.cell_height());
        let round_duration = pitch / kmh_to_mps(lit::<T>(config.sink_speed));
        let initial_total = nodes.iter().map(|n| n.residual).sum();
        let mut sim = Simulation {
            radio: config.radio.cast(),
            model,
            aco: config.aco.cast(),
            bits: lit(config.message_size as f64),
            control_bits: lit(config.control_packet_size as f64),
            comm_range,
            idle: lit(config.idle_energy),
            meter: Meter {
                spent: vec![Femtojoules::ZERO; nodes.len()],
                ..Meter::default()
            },
            buffers: vec![Vec::new(); grids.len()],
            lattice,
            nodes,
            grids,
            sinks,
            comm,
            round: 0,
            round_duration,
            initial_total,
            loss_rng: ChaCha8Rng::seed_from_u64(mix(seed, 2, 0)),
            seed,
            next_packet: 0,
            readings: Tally::default(),
            packets: Tally::default(),
            routes: Vec::new(),
            routing_failures: 0,
            config: config.clone(),
        };
        sim.adopt_all();
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeState<T>] {
        &self.nodes
    }

    pub fn grids(&self) -> &[crate::topology::VirtualGrid<T>] {
        &self.grids
    }

    pub fn sinks(&self) -> &[SinkState<T>] {
        &self.sinks
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn round_duration(&self) -> T {
        self.round_duration
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.meter.ledger
    }

    pub fn initial_total(&self) -> Femtojoules {
        self.initial_total
    }

    pub fn residual_total(&self) -> Femtojoules {
        self.nodes.iter().map(|n| n.residual).sum()
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive()).count()
    }

    /// Cumulative member-reading tally.
    pub fn readings(&self) -> Tally {
        self.readings
    }

    pub fn packets(&self) -> Tally {
        self.packets
    }

    pub fn in_flight(&self) -> (u64, u64) {
        let packets = self.buffers.iter().map(|b| b.len() as u64).sum();
        let readings = self.buffers.iter().flatten().map(|p| p.readings).sum();
        (readings, packets)
    }

    fn adopt_all(&mut self) {
        for id in 0..self.nodes.len() {
            if self.nodes[id].alive() && self.nodes[id].grid_id.is_none() {
                adopt_unconnected(id, &mut self.nodes, &mut self.grids, &self.comm, &self.model);
            }
        }
    }

    fn endpoint_of(&self, e: Endpoint) -> (usize, Position<T>) {
        match e {
            Endpoint::Node(id) => (id, self.nodes[id].position),
            Endpoint::Sink(s) => (self.nodes.len() + s, self.sinks[s].position),
        }
    }

    /// One hop with a single retry. The receiver pays for every attempt it
    /// listens to; sinks are mains powered.
    fn hop(&mut self, from: NodeId, to: Endpoint) -> bool {
        let (to_key, to_pos) = self.endpoint_of(to);
        let from_pos = self.nodes[from].position;
        let d = from_pos.distance(&to_pos);
        let tx = tx_energy(self.bits, d, &self.radio).unwrap_or(T::zero());
        let rx = rx_energy(self.bits, &self.radio).unwrap_or(T::zero());
        let p = if self.config.lossless {
            1.0
        } else {
            let r = self
                .model
                .rssi_between(from, from_pos, to_key, to_pos)
                .unwrap_or_else(|_| self.model.params.reference_rssi());
            to_f64(self.model.delivery_probability(r))
        };
        for _ in 0..2 {
            if !self.meter.charge(&mut self.nodes[from], tx, Charge::Transmit) {
                return false;
            }
            let ok = self.config.lossless || self.loss_rng.random::<f64>() < p;
            if let Endpoint::Node(t) = to {
                if !self.meter.charge(&mut self.nodes[t], rx, Charge::Receive) {
                    return false;
                }
            }
            if ok {
                return true;
            }
        }
        false
    }

    fn drop_buffer(&mut self, g: GridId, round: &mut RoundOutcome) {
        for p in self.buffers[g].drain(..) {
            round.readings.dropped += p.readings;
            round.packets.dropped += 1;
        }
    }

    /// Live cluster head of `g`, failing over if the current one is dead.
    fn ensure_ch(&mut self, g: GridId, out: &mut RoundOutcome) -> Option<NodeId> {
        if !self.grids[g].active {
            return None;
        }
        match failover(&mut self.grids[g], &mut self.nodes) {
            Failover::Unchanged => self.grids[g].ch_id,
            Failover::Promoted(b) => Some(b),
            Failover::Deactivated(_) => {
                self.drop_buffer(g, out);
                None
            }
        }
    }

    fn rotate(&mut self, out: &mut RoundOutcome) {
        let r = self.round;
        for g in 0..self.grids.len() {
            if !self.grids[g].active {
                continue;
            }
            apply_rotation(&mut self.grids[g], &mut self.nodes, r);
            if self.grids[g].schedule.refresh_due(r) {
                let meter = &mut self.meter;
                refresh_energy_order(
                    &mut self.grids[g],
                    &mut self.nodes,
                    r,
                    self.control_bits,
                    &self.radio,
                    &mut |node: &mut NodeState<T>, j: T, kind: Charge| meter.charge(node, j, kind),
                );
                apply_rotation(&mut self.grids[g], &mut self.nodes, r);
            }
            if !self.grids[g].active {
                self.drop_buffer(g, out);
            }
        }
    }

    /// Members report to the cluster head, which aggregates.
    fn collect(&mut self, g: GridId, out: &mut RoundOutcome) -> Option<Packet> {
        let mut ch = self.ensure_ch(g, out)?;
        let senders: Vec<NodeId> = self.grids[g]
            .member_ids
            .iter()
            .copied()
            .filter(|&m| self.nodes[m].alive())
            .collect();
        out.readings.generated += senders.len() as u64;
        let mut pending: Vec<bool> = senders.iter().map(|&m| m != ch).collect();
        let mut held: u64 = 1;
        let mut received: u64 = 0;

        for k in 0..senders.len() {
            if !pending[k] {
                continue;
            }
            if !self.nodes[ch].alive() {
                out.readings.dropped += held;
                held = 0;
                received = 0;
                match self.ensure_ch(g, out) {
                    Some(c) => {
                        ch = c;
                        if let Some(j) = senders.iter().position(|&m| m == c) {
                            if pending[j] {
                                pending[j] = false;
                                held = 1;
                            }
                        }
                    }
                    None => break,
                }
                if !pending[k] {
                    continue;
                }
            }
            pending[k] = false;
            if self.hop(senders[k], Endpoint::Node(ch)) {
                held += 1;
                received += 1;
            } else {
                out.readings.dropped += 1;
            }
        }
        out.readings.dropped += pending.iter().filter(|p| **p).count() as u64;
        if !self.nodes[ch].alive() {
            out.readings.dropped += held;
            self.ensure_ch(g, out);
            return None;
        }
        if held == 0 {
            return None;
        }
        if received > 0 {
            let bits = self.bits * lit(received as f64);
            let e = aggregation_energy(bits, &self.radio).unwrap_or(T::zero());
            if !self.meter.charge(&mut self.nodes[ch], e, Charge::Aggregate) {
                out.readings.dropped += held;
                self.ensure_ch(g, out);
                return None;
            }
        }
        out.packets.generated += 1;
        let id = self.next_packet;
        self.next_packet += 1;
        Some(Packet {
            id,
            source: ch,
            origin_grid: g,
            created_round: self.round,
            size: self.config.message_size,
            readings: held,
            hop_count: 0,
            delivered: false,
            delivered_round: None,
            waiting_rounds: 0,
            relays: Vec::new(),
            sink: None,
            route_length: 0.0,
        })
    }

    fn deliver(&mut self, mut p: Packet, sink: usize, out: &mut RoundOutcome) {
        p.delivered = true;
        p.delivered_round = Some(self.round);
        p.waiting_rounds = self.round - p.created_round;
        p.sink = Some(sink);
        out.readings.delivered += p.readings;
        out.packets.delivered += 1;
        out.delivered.push(p);
    }

    fn drop_packet(&mut self, p: Packet, out: &mut RoundOutcome) {
        out.readings.dropped += p.readings;
        out.packets.dropped += 1;
    }

    /// Direct hand-off from `from` to the sink.
    fn send_direct(&mut self, mut p: Packet, from: NodeId, sink: usize, out: &mut RoundOutcome) {
        let d = self.nodes[from].position.distance(&self.sinks[sink].position);
        if self.hop(from, Endpoint::Sink(sink)) {
            p.hop_count += 1;
            p.route_length += to_f64(d);
            self.deliver(p, sink, out);
        } else {
            self.drop_packet(p, out);
        }
    }

    fn route_entry(&mut self, target: Endpoint) -> usize {
        self.handle_deaths();
        if let Some(i) = self.routes.iter().position(|r| r.target == target) {
            return i;
        }
        let (_, m) = self.endpoint_of(target);
        let n = self.nodes.len();
        let mut vertex_of = vec![NONE; n];
        let mut vertices = Vec::new();
        let mut endpoint = Vec::new();
        for node in self.nodes.iter().filter(|x| x.alive()) {
            vertex_of[node.id] = vertices.len();
            vertices.push(Vertex {
                id: node.id,
                position: node.position,
                energy: node.residual_energy(),
                initial: node.initial_energy(),
            });
            endpoint.push(Endpoint::Node(node.id));
        }
        let sink_vertex = match target {
            Endpoint::Sink(s) => {
                let v = vertices.len();
                vertices.push(Vertex {
                    id: n + s,
                    position: m,
                    energy: T::zero(),
                    initial: T::zero(),
                });
                endpoint.push(target);
                Some(v)
            }
            Endpoint::Node(_) => None,
        };
        let progress = self.config.progress_filter;
        let mut edges = Vec::new();
        for node in self.nodes.iter().filter(|x| x.alive()) {
            let da = node.position.distance(&m);
            for &b in self.comm.neighbors(node.id) {
                if !progress || self.nodes[b].position.distance(&m) < da {
                    edges.push((vertex_of[node.id], vertex_of[b]));
                }
            }
            if let Some(sv) = sink_vertex {
                if da <= self.comm_range {
                    edges.push((vertex_of[node.id], sv));
                }
            }
        }
        let graph = RoutingGraph::new(vertices, edges, self.model);
        self.routes.push(RouteEntry {
            target,
            graph,
            vertex_of,
            endpoint,
            tau: None,
        });
        self.routes.len() - 1
    }

    fn handle_deaths(&mut self) {
        if self.meter.died.is_empty() {
            return;
        }
        for id in std::mem::take(&mut self.meter.died) {
            self.comm.remove_node(id);
        }
        self.routes.clear();
    }

    /// Multi-hop delivery towards the nearest sink.
    fn route(&mut self, mut p: Packet, from: NodeId, serving: &[Option<GridId>], out: &mut RoundOutcome) {
        let here = self.nodes[from].position;
        let (sink, dist) = self
            .sinks
            .iter()
            .enumerate()
            .map(|(s, k)| (s, here.distance(&k.position)))
            .fold((0, T::infinity()), |b, c| if c.1 < b.1 { c } else { b });
        if dist <= self.comm_range {
            self.send_direct(p, from, sink, out);
            return;
        }
        let relay_ch = serving[sink]
            .filter(|&g| self.grids[g].active)
            .and_then(|g| self.grids[g].ch_id)
            .filter(|&c| c != from && self.nodes[c].alive());
        let target = match relay_ch {
            Some(c) => Endpoint::Node(c),
            None => Endpoint::Sink(sink),
        };
        let e = self.route_entry(target);
        let (src, dst) = {
            let entry = &self.routes[e];
            let dst = match target {
                Endpoint::Node(c) => entry.vertex_of[c],
                Endpoint::Sink(_) => entry.graph.vertex_count() - 1,
            };
            (entry.vertex_of[from], dst)
        };
        if src == NONE || dst == NONE {
            self.routing_failures += 1;
            self.drop_packet(p, out);
            return;
        }
        let seed = mix(self.seed, self.round as u64 + 3, p.origin_grid as u64);
        let hops: Result<Vec<Endpoint>> = {
            let entry = &mut self.routes[e];
            for v in 0..entry.graph.vertex_count() {
                if let Endpoint::Node(id) = entry.endpoint[v] {
                    entry.graph.set_energy(v, self.nodes[id].residual_energy());
                }
            }
            let solved = if self.config.persist_pheromones {
                let tau = entry
                    .tau
                    .get_or_insert_with(|| PheromoneTable::for_graph(&entry.graph, &self.aco));
                aco::solve_with(&entry.graph, src, dst, &self.aco, seed, tau)
            } else {
                aco::solve(&entry.graph, src, dst, &self.aco, seed)
            };
            solved.map(|sol| sol.path.nodes.iter().map(|&v| entry.endpoint[v]).collect())
        };
        let Ok(hops) = hops else {
            self.routing_failures += 1;
            self.drop_packet(p, out);
            return;
        };

        let mut ok = true;
        for w in hops.windows(2) {
            let Endpoint::Node(a) = w[0] else { unreachable!("sink is always last") };
            let (_, pa) = self.endpoint_of(w[0]);
            let (_, pb) = self.endpoint_of(w[1]);
            if !self.hop(a, w[1]) {
                ok = false;
                break;
            }
            p.hop_count += 1;
            p.route_length += to_f64(pa.distance(&pb));
            if let Endpoint::Node(b) = w[1] {
                p.relays.push(b);
            }
        }
        if ok {
            match target {
                Endpoint::Node(c) => self.send_direct(p, c, sink, out),
                Endpoint::Sink(s) => self.deliver(p, s, out),
            }
        } else {
            self.drop_packet(p, out);
        }
        self.handle_deaths();
    }

    /// Advances the network by one round.
    pub fn run_round(&mut self) -> RoundOutcome {
        let r = self.round;
        let t = self.round_duration * lit(r as f64);
        for s in &mut self.sinks {
            s.advance_to(t);
        }
        for e in &mut self.meter.spent {
            *e = Femtojoules::ZERO;
        }
        let mut out = RoundOutcome {
            round: r,
            energy_spent: Vec::new(),
            readings: Tally::default(),
            packets: Tally::default(),
            in_flight_readings: 0,
            in_flight_packets: 0,
            delivered: Vec::new(),
            alive: 0,
            energy_cum: Femtojoules::ZERO,
            residual_total: Femtojoules::ZERO,
            routing_failures: 0,
            ledger_exact: true,
            packets_balanced: true,
        };
        let failures_before = self.routing_failures;

        if self.alive_count() > 0 {
            self.adopt_all();
            self.rotate(&mut out);
            self.handle_deaths();

            let mut fresh = Vec::new();
            for g in 0..self.grids.len() {
                if let Some(p) = self.collect(g, &mut out) {
                    fresh.push(p);
                }
                self.handle_deaths();
            }

            let serving: Vec<Option<GridId>> = self
                .sinks
                .iter()
                .map(|s| serving_grid(s, t, &self.lattice).filter(|&g| self.grids[g].active))
                .collect();
            let sink_for = |g: GridId| serving.iter().position(|&s| s == Some(g));

            for p in fresh {
                let g = p.origin_grid;
                let from = p.source;
                if !self.nodes[from].alive() {
                    self.drop_packet(p, &mut out);
                    continue;
                }
                if let Some(s) = sink_for(g) {
                    self.send_direct(p, from, s, &mut out);
                    self.handle_deaths();
                    continue;
                }
                match self.config.protocol {
                    Protocol::Ehrp => self.route(p, from, &serving, &mut out),
                    Protocol::WaitForSink => self.buffers[g].push(p),
                }
            }

            // the cluster heads of served grids flush anything they held
            for (s, slot) in serving.iter().enumerate() {
                let Some(g) = *slot else { continue };
                if self.buffers[g].is_empty() {
                    continue;
                }
                let Some(ch) = self.ensure_ch(g, &mut out) else { continue };
                let held = std::mem::take(&mut self.buffers[g]);
                for p in held {
                    if self.nodes[ch].alive() {
                        self.send_direct(p, ch, s, &mut out);
                    } else {
                        self.drop_packet(p, &mut out);
                    }
                }
                self.handle_deaths();
            }

            if self.idle > T::zero() {
                for id in 0..self.nodes.len() {
                    if self.nodes[id].alive() {
                        self.meter.charge(&mut self.nodes[id], self.idle, Charge::Idle);
                    }
                }
            }
            self.handle_deaths();
            for g in 0..self.grids.len() {
                if !self.grids[g].active && !self.buffers[g].is_empty() {
                    self.drop_buffer(g, &mut out);
                }
            }
        }

        self.readings.add(&out.readings);
        self.packets.add(&out.packets);
        let (in_r, in_p) = self.in_flight();
        out.in_flight_readings = in_r;
        out.in_flight_packets = in_p;
        out.routing_failures = self.routing_failures - failures_before;
        out.alive = self.alive_count();
        out.residual_total = self.residual_total();
        out.energy_cum = self.meter.ledger.total();
        out.energy_spent = self.meter.spent.clone();
        out.ledger_exact = self.initial_total - out.residual_total == out.energy_cum;
        out.packets_balanced = self.readings.generated == self.readings.delivered + self.readings.dropped + in_r
            && self.packets.generated == self.packets.delivered + self.packets.dropped + in_p;
        self.round += 1;
        out
    }
}

/// Runs until fewer than half the nodes are alive (plus the configured
/// overrun) or `max_rounds` is reached.
pub fn run_simulation<T: Scalar>(config: &ScenarioConfig, seed: u64) -> Result<MetricsReport> {
    let mut sim = Simulation::<T>::new(config, seed)?;
    Ok(drive(&mut sim))
}

/// Runs an already constructed simulation to completion.
pub fn drive<T: Scalar>(sim: &mut Simulation<T>) -> MetricsReport {
    let config = sim.config().clone();
    let n = sim.nodes().len();
    let threshold = n.div_ceil(2);
    let mut rec = Recorder::new(
        n,
        sim.initial_total(),
        config.hop_time,
        to_f64(sim.round_duration()),
    );
    let mut stop_at: Option<usize> = None;
    while sim.round() < config.max_rounds {
        let out = sim.run_round();
        let r = out.round;
        let alive = out.alive;
        rec.push(&out);
        if stop_at.is_none() && alive < threshold {
            stop_at = Some(r + config.overrun_rounds);
        }
        if alive == 0 || stop_at.is_some_and(|s| r >= s) {
            break;
        }
    }
    rec.finish(config.max_rounds)
}
