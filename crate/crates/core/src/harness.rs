//! Experiment plumbing: parameter sweeps with repetition statistics, CSV
//! output, and the standalone router benchmark on graph files.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aco::{solve, AcoParams, RoutingGraph, Vertex};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::radio::{PropagationParams, RadioModel};
use crate::topology::Position;

/// Metrics summarised by a sweep, in output order.
pub const SWEEP_METRICS: [&str; 4] = ["total_energy", "lifetime_hna", "avg_delay", "pdr"];

/// The eight `(alpha, beta, rho)` settings of the classic tuning table.
pub const TUNING_TRIPLES: [(f64, f64, f64); 8] = [
    (0.5, 1.0, 0.3),
    (0.5, 1.0, 0.4),
    (0.5, 1.0, 0.5),
    (0.5, 1.0, 0.6),
    (1.0, 5.0, 0.3),
    (2.0, 6.0, 0.4),
    (4.0, 8.0, 0.5),
    (5.0, 10.0, 0.6),
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    /// Config key, dotted for grouped parameters. `dimension` sets both
    /// `area_width` and `area_height`.
    pub param: String,
    pub values: Vec<String>,
    /// Applied before the swept value.
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: String,
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
    pub repetitions: usize,
    pub seed: u64,
}

fn parse_value(s: &str) -> toml::Value {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = s.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = s.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(s.to_string())
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let unknown = || Error::invalid(key, "no such config key");
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            let slot = cur.get_mut(part).ok_or_else(unknown)?;
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            return Ok(());
        }
        cur = cur
            .get_mut(part)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(unknown)?;
    }
    Err(unknown())
}

/// Sets `key = value` in a serialised config.
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let v = parse_value(value);
    if key == "dimension" {
        set_path(table, "area_width", v.clone())?;
        return set_path(table, "area_height", v);
    }
    set_path(table, key, v)
}

/// `base` with the given overrides, validated.
pub fn configure(base: &ScenarioConfig, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let mut table = base.to_table();
    for (k, v) in overrides {
        apply_override(&mut table, k, v)?;
    }
    ScenarioConfig::from_table(table)
}

/// Runs `config.repetitions` seeds `config.seed + k`, in parallel, returning
/// reports in seed order.
pub fn run_repetitions(config: &ScenarioConfig) -> std::result::Result<Vec<MetricsReport>, (u64, Error)> {
    (0..config.repetitions as u64)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k);
            crate::sim::run_simulation::<f64>(config, seed).map_err(|e| (seed, e))
        })
        .collect()
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than
/// two samples.
pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarise(param: &str, value: &str, config: &ScenarioConfig, reports: &[MetricsReport]) -> Vec<SweepRow> {
    SWEEP_METRICS
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = reports.iter().map(|r| r.metric(m).expect("known metric")).collect();
            let (mean, stddev) = mean_stddev(&xs);
            SweepRow {
                sweep_param: param.to_string(),
                value: value.to_string(),
                metric: m.to_string(),
                mean,
                stddev,
                repetitions: reports.len(),
                seed: config.seed,
            }
        })
        .collect()
}

/// One block of four metric rows per swept value, in the given value order.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::invalid("values", "sweep needs at least one value"));
    }
    let mut rows = Vec::new();
    for value in &spec.values {
        let mut overrides = spec.overrides.clone();
        overrides.push((spec.param.clone(), value.clone()));
        let wrap = |seed: u64, e: Error| Error::SweepRun {
            param: spec.param.clone(),
            value: value.clone(),
            seed,
            source: Box::new(e),
        };
        let config = configure(base, &overrides).map_err(|e| wrap(base.seed, e))?;
        let reports = run_repetitions(&config).map_err(|(seed, e)| wrap(seed, e))?;
        rows.extend(summarise(&spec.param, value, &config, &reports));
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("sweep_param,value,metric,mean,stddev,repetitions,seed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.sweep_param, r.value, r.metric, r.mean, r.stddev, r.repetitions, r.seed
        );
    }
    s
}

/// Aggregate metrics of a single run as `metric,value` lines.
pub fn summary_csv(report: &MetricsReport) -> String {
    let mut s = String::from("metric,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(s, "{k},{v}");
    };
    row("rounds_run", report.rounds_run.to_string());
    row("lifetime_hna", report.lifetime_hna.to_string());
    row("hna_reached", report.hna_reached.to_string());
    row("lifetime_fnd", report.lifetime_fnd.to_string());
    row("total_energy", report.total_energy.to_string());
    row("pdr", report.pdr.to_string());
    row("avg_delay", report.avg_delay.to_string());
    row("avg_hops", report.avg_hops.to_string());
    row("wasted_energy", report.wasted_energy.to_string());
    row(
        "analytic_lifetime",
        report.analytic_lifetime.map_or(String::new(), |v| v.to_string()),
    );
    row("generated_readings", report.generated_readings.to_string());
    row("delivered_readings", report.delivered_readings.to_string());
    row("dropped_readings", report.dropped_readings.to_string());
    row("in_flight_readings", report.in_flight_readings.to_string());
    row("routing_failures", report.routing_failures.to_string());
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNode {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    pub initial: f64,
}

/// A standalone routing instance.
///
/// Text form, one directive per line, `#` comments:
///
/// ```text
/// source 0
/// destination 7
/// range 100
/// node 0 12.5 40.0 0.5
/// edge 0 1
/// ```
///
/// Node energy and initial energy default to 0.5 J. Without `edge` lines
/// the edges are every pair within `range`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
    pub source: usize,
    pub destination: usize,
    pub range: Option<f64>,
}

impl GraphInstance {
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let (mut source, mut destination, mut range) = (None, None, None);
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |reason: &str| Error::GraphFile {
                line,
                reason: reason.to_string(),
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut f = content.split_whitespace();
            let kw = f.next().unwrap_or("");
            let rest: Vec<&str> = f.collect();
            let num = |i: usize| -> Result<f64> {
                rest.get(i)
                    .ok_or_else(|| err("missing field"))?
                    .parse::<f64>()
                    .map_err(|_| err("not a number"))
            };
            let id = |i: usize| -> Result<usize> {
                rest.get(i)
                    .ok_or_else(|| err("missing id"))?
                    .parse::<usize>()
                    .map_err(|_| err("not a node id"))
            };
            match kw {
                "source" => source = Some(id(0)?),
                "destination" => destination = Some(id(0)?),
                "range" => range = Some(num(0)?),
                "node" => {
                    if rest.len() < 3 || rest.len() > 5 {
                        return Err(err("expected `node id x y [energy [initial]]`"));
                    }
                    let energy = if rest.len() > 3 { num(3)? } else { 0.5 };
                    let initial = if rest.len() > 4 { num(4)? } else { energy.max(0.5) };
                    nodes.push(GraphNode {
                        id: id(0)?,
                        x: num(1)?,
                        y: num(2)?,
                        energy,
                        initial,
                    });
                }
                "edge" => {
                    if rest.len() != 2 {
                        return Err(err("expected `edge a b`"));
                    }
                    edges.push((id(0)?, id(1)?));
                }
                other => return Err(err(&format!("unknown directive `{other}`"))),
            }
        }
        let eof = |reason: &str| Error::GraphFile {
            line: text.lines().count(),
            reason: reason.to_string(),
        };
        let g = GraphInstance {
            nodes,
            edges,
            source: source.ok_or_else(|| eof("missing `source`"))?,
            destination: destination.ok_or_else(|| eof("missing `destination`"))?,
            range,
        };
        g.check().map_err(|e| eof(&e))?;
        Ok(g)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let mut ids: Vec<usize> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate node id".into());
        }
        let known = |i: usize| ids.binary_search(&i).is_ok();
        if !known(self.source) || !known(self.destination) {
            return Err("source or destination is not a node".into());
        }
        if self.source == self.destination {
            return Err("source equals destination".into());
        }
        if let Some(&(a, b)) = self.edges.iter().find(|(a, b)| !known(*a) || !known(*b)) {
            return Err(format!("edge {a} {b} names an unknown node"));
        }
        if self.edges.is_empty() && self.range.is_none() {
            return Err("needs `edge` lines or a `range`".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "source {}", self.source);
        let _ = writeln!(s, "destination {}", self.destination);
        if let Some(r) = self.range {
            let _ = writeln!(s, "range {r}");
        }
        for n in &self.nodes {
            let _ = writeln!(s, "node {} {} {} {} {}", n.id, n.x, n.y, n.energy, n.initial);
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "edge {a} {b}");
        }
        s
    }

    /// Undirected edge list in vertex indices.
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        let index = |id: usize| self.nodes.iter().position(|n| n.id == id).expect("checked");
        if !self.edges.is_empty() {
            return self.edges.iter().map(|&(a, b)| (index(a), index(b))).collect();
        }
        let r = self.range.unwrap_or(0.0);
        let mut out = Vec::new();
        for i in 0..self.nodes.len() {
            for j in i + 1..self.nodes.len() {
                let (a, b) = (&self.nodes[i], &self.nodes[j]);
                if (a.x - b.x).hypot(a.y - b.y) <= r {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Routing graph plus the source and destination vertex indices.
    pub fn routing_graph(&self, propagation: &PropagationParams<f64>, seed: u64) -> (RoutingGraph<f64>, usize, usize) {
        let vertices = self
            .nodes
            .iter()
            .map(|n| Vertex {
                id: n.id,
                position: Position::new(n.x, n.y),
                energy: n.energy,
                initial: n.initial,
            })
            .collect();
        let graph = RoutingGraph::undirected(vertices, &self.edge_indices(), RadioModel::new(*propagation, seed));
        let index = |id: usize| self.nodes.iter().position(|n| n.id == id).expect("checked");
        (graph, index(self.source), index(self.destination))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (a, b) in self.edge_indices() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|s| *s)
    }
}

/// Uniform random points in a `side x side` square joined within `range`,
/// redrawn until connected. Source and destination are the nodes nearest
/// two opposite corners.
pub fn random_instance(n: usize, side: f64, range: f64, seed: u64) -> Result<GraphInstance> {
    if n < 2 {
        return Err(Error::invalid("nodes", "need at least two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let nodes: Vec<GraphNode> = (0..n)
            .map(|id| GraphNode {
                id,
                x: rng.random::<f64>() * side,
                y: rng.random::<f64>() * side,
                energy: 0.5,
                initial: 0.5,
            })
            .collect();
        let nearest = |cx: f64, cy: f64| {
            nodes
                .iter()
                .min_by(|a, b| {
                    let da = (a.x - cx).hypot(a.y - cy);
                    let db = (b.x - cx).hypot(b.y - cy);
                    da.total_cmp(&db)
                })
                .map(|n| n.id)
                .expect("nonempty")
        };
        let source = nearest(0.0, 0.0);
        let destination = nearest(side, side);
        if source == destination {
            continue;
        }
        let g = GraphInstance {
            nodes,
            edges: Vec::new(),
            source,
            destination,
            range: Some(range),
        };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::invalid("range", "could not draw a connected instance"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub path_length: f64,
    pub iteration: usize,
}

/// Solves the instance once per `(alpha, beta, rho)` triple.
pub fn aco_bench(
    instance: &GraphInstance,
    triples: &[(f64, f64, f64)],
    base: &AcoParams<f64>,
    propagation: &PropagationParams<f64>,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if !instance.is_connected() {
        return Err(Error::invalid("graph", "graph is disconnected"));
    }
    let (graph, s, d) = instance.routing_graph(propagation, seed);
    triples
        .iter()
        .map(|&(alpha, beta, rho)| {
            let params = AcoParams {
                alpha,
                beta,
                rho,
                ..*base
            };
            let sol = solve(&graph, s, d, &params, seed)?;
            Ok(BenchRow {
                alpha,
                beta,
                rho,
                path_length: sol.path.length,
                iteration: sol.best_iteration,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("alpha,beta,rho,path_length,iteration\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.alpha, r.beta, r.rho, r.path_length, r.iteration);
    }
    s
}
