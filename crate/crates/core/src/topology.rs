//! Node deployment, the virtual-grid lattice and the communication graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{initial_ch_election, RotationSchedule};
use crate::config::ScenarioConfig;
use crate::energy::Femtojoules;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub type NodeId = usize;
pub type GridId = usize;

/// Nodes per virtual grid at deployment: one cluster head and four members.
pub const NODES_PER_GRID: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position<T>) -> T {
        euclidean_distance(*self, *other)
    }
}

pub fn euclidean_distance<T: Scalar>(a: Position<T>, b: Position<T>) -> T {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Member,
    ClusterHead,
    BackupClusterHead,
}

/// A static sensor node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<T> {
    pub id: NodeId,
    pub position: Position<T>,
    pub residual: Femtojoules,
    pub initial: Femtojoules,
    pub role: Role,
    /// `None` while unattached.
    pub grid_id: Option<GridId>,
}

impl<T: Scalar> NodeState<T> {
    pub fn new(id: NodeId, position: Position<T>, initial_energy: T) -> Self {
        let e = Femtojoules::from_joules(initial_energy);
        NodeState {
            id,
            position,
            residual: e,
            initial: e,
            role: Role::Member,
            grid_id: None,
        }
    }

    #[inline]
    pub fn alive(&self) -> bool {
        self.residual > Femtojoules::ZERO
    }

    pub fn residual_energy(&self) -> T {
        self.residual.joules()
    }

    pub fn initial_energy(&self) -> T {
        self.initial.joules()
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min: Position<T>,
    pub max: Position<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn contains(&self, p: Position<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Position<T> {
        let two = lit::<T>(2.0);
        Position::new((self.min.x + self.max.x) / two, (self.min.y + self.max.y) / two)
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }
}

/// A `rows x cols` tiling of the deployment area. Grid ids are row-major with
/// row 0 at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice<T> {
    pub rows: usize,
    pub cols: usize,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Lattice<T> {
    /// Picks the factorisation `rows * cols = grids` whose cells are closest
    /// to square, rejecting anything with cell aspect outside `[1/4, 4]`.
    pub fn for_grid_count(grids: usize, width: T, height: T) -> Result<Self> {
        let unrealizable = || Error::LatticeUnrealizable {
            grids,
            width: crate::scalar::to_f64(width),
            height: crate::scalar::to_f64(height),
        };
        if grids == 0 || !(width > T::zero()) || !(height > T::zero()) {
            return Err(unrealizable());
        }
        let mut best: Option<(T, usize, usize)> = None;
        for rows in (1..=grids).filter(|r| grids.is_multiple_of(*r)) {
            let cols = grids / rows;
            let aspect = (width / lit(cols as f64)) / (height / lit(rows as f64));
            let score = (aspect - T::one()).abs();
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, rows, cols));
            }
        }
        let (_, rows, cols) = best.ok_or_else(unrealizable)?;
        let lattice = Lattice {
            rows,
            cols,
            width,
            height,
        };
        let aspect = lattice.cell_width() / lattice.cell_height();
        if aspect < lit(0.25) || aspect > lit(4.0) {
            return Err(unrealizable());
        }
        Ok(lattice)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self) -> T {
        self.width / lit(self.cols as f64)
    }

    pub fn cell_height(&self) -> T {
        self.height / lit(self.rows as f64)
    }

    pub fn id(&self, row: usize, col: usize) -> GridId {
        row * self.cols + col
    }

    pub fn row_col(&self, id: GridId) -> (usize, usize) {
        (id / self.cols, id % self.cols)
    }

    pub fn bounds(&self, id: GridId) -> Rect<T> {
        let (row, col) = self.row_col(id);
        let (w, h) = (self.cell_width(), self.cell_height());
        let x0 = w * lit(col as f64);
        let y0 = h * lit(row as f64);
        // the last row/column end exactly on the area edge
        let x1 = if col + 1 == self.cols { self.width } else { x0 + w };
        let y1 = if row + 1 == self.rows { self.height } else { y0 + h };
        Rect {
            min: Position::new(x0, y0),
            max: Position::new(x1, y1),
        }
    }

    /// The cell containing `p`; on shared boundaries the lowest id wins.
    pub fn cell_of(&self, p: Position<T>) -> Option<GridId> {
        if p.x < T::zero() || p.y < T::zero() || p.x > self.width || p.y > self.height {
            return None;
        }
        let col = self.axis_index(p.x, self.cell_width(), self.cols);
        let row = self.axis_index(p.y, self.cell_height(), self.rows);
        // step back onto a boundary shared with a lower index
        let row = if row > 0 && self.bounds(self.id(row - 1, col)).contains(p) {
            row - 1
        } else {
            row
        };
        let col = if col > 0 && self.bounds(self.id(row, col - 1)).contains(p) {
            col - 1
        } else {
            col
        };
        Some(self.id(row, col))
    }

    fn axis_index(&self, v: T, step: T, n: usize) -> usize {
        let i = (v / step).floor().to_usize().unwrap_or(0);
        i.min(n - 1)
    }
}

/// A cluster: one cell of the lattice and the nodes attached to it.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualGrid<T> {
    pub id: GridId,
    pub bounds: Rect<T>,
    pub member_ids: Vec<NodeId>,
    pub ch_id: Option<NodeId>,
    pub backup_ch_id: Option<NodeId>,
    pub schedule: RotationSchedule,
    /// False once no member can serve as cluster head.
    pub active: bool,
}

impl<T: Scalar> VirtualGrid<T> {
    pub fn new(id: GridId, bounds: Rect<T>, refresh_period: usize) -> Self {
        VirtualGrid {
            id,
            bounds,
            member_ids: Vec::new(),
            ch_id: None,
            backup_ch_id: None,
            schedule: RotationSchedule::new(id, refresh_period),
            active: true,
        }
    }

    pub fn rotation_order(&self) -> &[NodeId] {
        &self.schedule.order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment<T> {
    pub lattice: Lattice<T>,
    pub nodes: Vec<NodeState<T>>,
    pub grids: Vec<VirtualGrid<T>>,
}

/// Places `node_count` nodes: five uniformly inside each of the
/// `node_count / 5` cells, and any remainder uniformly over the whole area
/// as unattached nodes. Cluster heads are elected before returning.
pub fn deploy<T: Scalar>(config: &ScenarioConfig, seed: u64) -> Result<Deployment<T>> {
    let n = config.node_count;
    if n < NODES_PER_GRID {
        return Err(Error::TooFewNodes(n));
    }
    let width: T = lit(config.area_width);
    let height: T = lit(config.area_height);
    let lattice = Lattice::for_grid_count(n / NODES_PER_GRID, width, height)?;
    let initial: T = lit(config.initial_energy);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(n);
    let mut grids = Vec::with_capacity(lattice.len());
    for g in 0..lattice.len() {
        let bounds = lattice.bounds(g);
        let mut grid = VirtualGrid::new(g, bounds, config.refresh_period);
        for _ in 0..NODES_PER_GRID {
            let p = uniform_in(&mut rng, &bounds);
            let mut node = NodeState::new(nodes.len(), p, initial);
            node.grid_id = Some(g);
            grid.member_ids.push(node.id);
            nodes.push(node);
        }
        grids.push(grid);
    }
    let area = Rect {
        min: Position::new(T::zero(), T::zero()),
        max: Position::new(width, height),
    };
    while nodes.len() < n {
        let p = uniform_in(&mut rng, &area);
        nodes.push(NodeState::new(nodes.len(), p, initial));
    }
    for grid in &mut grids {
        initial_ch_election(grid, &mut nodes);
    }
    Ok(Deployment {
        lattice,
        nodes,
        grids,
    })
}

fn uniform_in<T: Scalar>(rng: &mut ChaCha8Rng, r: &Rect<T>) -> Position<T> {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Position::new(
        r.min.x + r.width() * lit(u),
        r.min.y + r.height() * lit(v),
    )
}

/// Undirected unit-disk graph over alive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adjacency: Vec<Vec<NodeId>>,
    alive: Vec<bool>,
}

impl CommGraph {
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.alive.get(id).copied().unwrap_or(false)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn node_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Drops a node that has died.
    pub fn remove_node(&mut self, id: NodeId) {
        if !self.contains(id) {
            return;
        }
        self.alive[id] = false;
        for nb in std::mem::take(&mut self.adjacency[id]) {
            if let Ok(pos) = self.adjacency[nb].binary_search(&id) {
                self.adjacency[nb].remove(pos);
            }
        }
    }
}

/// Builds the graph with an edge between every pair of alive nodes at most
/// `comm_range` apart.
pub fn rebuild_comm_graph<T: Scalar>(nodes: &[NodeState<T>], comm_range: T) -> CommGraph {
    let n = nodes.len();
    let mut adjacency = vec![Vec::new(); n];
    let alive: Vec<bool> = nodes.iter().map(NodeState::alive).collect();

    // bucket by range-sized cells so only adjacent buckets are compared
    let key = |p: &Position<T>| {
        (
            (p.x / comm_range).floor().to_i64().unwrap_or(0),
            (p.y / comm_range).floor().to_i64().unwrap_or(0),
        )
    };
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<NodeId>> =
        std::collections::HashMap::new();
    for node in nodes.iter().filter(|n| n.alive()) {
        buckets.entry(key(&node.position)).or_default().push(node.id);
    }
    for node in nodes.iter().filter(|n| n.alive()) {
        let (bx, by) = key(&node.position);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = buckets.get(&(bx + dx, by + dy)) else {
                    continue;
                };
                for &other in bucket {
                    if other != node.id
                        && node.position.distance(&nodes[other].position) <= comm_range
                    {
                        adjacency[node.id].push(other);
                    }
                }
            }
        }
        adjacency[node.id].sort_unstable();
    }
    CommGraph { adjacency, alive }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> ScenarioConfig {
        ScenarioConfig {
            node_count: n,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn distance_examples() {
        let o = Position::new(0.0, 0.0);
        assert_eq!(euclidean_distance(o, Position::new(3.0, 4.0)), 5.0);
        let p = Position::new(12.5, -3.0);
        assert_eq!(euclidean_distance(p, p), 0.0);
        assert_eq!(euclidean_distance(o, Position::new(87.705, 0.0)), 87.705);
    }

    #[test]
    fn nine_hundred_nodes_make_180_grids() {
        let d = deploy::<f64>(&cfg(900), 1).unwrap();
        assert_eq!(d.grids.len(), 180);
        let chs = d.nodes.iter().filter(|n| n.role == Role::ClusterHead).count();
        assert_eq!(chs, 180);
        assert_eq!((d.lattice.rows, d.lattice.cols), (12, 15));
    }

    #[test]
    fn minimal_network() {
        let d = deploy::<f64>(&cfg(5), 1).unwrap();
        assert_eq!(d.grids.len(), 1);
        assert_eq!(d.grids[0].member_ids.len(), 5);
        assert_eq!(d.grids[0].ch_id, Some(0));
    }

    #[test]
    fn deterministic_placement() {
        let a = deploy::<f64>(&cfg(100), 7).unwrap();
        let b = deploy::<f64>(&cfg(100), 7).unwrap();
        assert_eq!(a.grids.len(), 20);
        assert_eq!(a, b);
        let c = deploy::<f64>(&cfg(100), 8).unwrap();
        assert_ne!(a.nodes, c.nodes);
    }

    #[test]
    fn nodes_start_inside_their_cell() {
        let d = deploy::<f64>(&cfg(300), 3).unwrap();
        for g in &d.grids {
            assert_eq!(g.member_ids.len(), NODES_PER_GRID);
            for &m in &g.member_ids {
                assert!(g.bounds.contains(d.nodes[m].position));
            }
        }
    }

    #[test]
    fn remainder_nodes_are_unattached() {
        let d = deploy::<f64>(&cfg(23), 3).unwrap();
        assert_eq!(d.grids.len(), 4);
        assert_eq!(d.nodes.len(), 23);
        assert_eq!(d.nodes.iter().filter(|n| n.grid_id.is_none()).count(), 3);
    }

    #[test]
    fn rejects_too_few_nodes_and_bad_lattices() {
        assert_eq!(deploy::<f64>(&cfg(4), 1).unwrap_err(), Error::TooFewNodes(4));
        // 7 grids in a square area only factor as 1x7
        assert!(matches!(
            deploy::<f64>(&cfg(35), 1),
            Err(Error::LatticeUnrealizable { grids: 7, .. })
        ));
    }

    #[test]
    fn cell_lookup_tie_breaks_low() {
        let l = Lattice::for_grid_count(4, 200.0, 200.0).unwrap();
        assert_eq!(l.cell_of(Position::new(50.0, 50.0)), Some(0));
        assert_eq!(l.cell_of(Position::new(100.0, 50.0)), Some(0));
        assert_eq!(l.cell_of(Position::new(100.0, 100.0)), Some(0));
        assert_eq!(l.cell_of(Position::new(150.0, 150.0)), Some(3));
        assert_eq!(l.cell_of(Position::new(200.0, 200.0)), Some(3));
        assert_eq!(l.cell_of(Position::new(201.0, 0.0)), None);
    }

    #[test]
    fn comm_graph_edges() {
        let mk = |id, x: f64| NodeState::new(id, Position::new(x, 0.0), 0.5);
        let nodes = vec![mk(0, 0.0), mk(1, 10.0), mk(2, 70.0)];
        let g = rebuild_comm_graph(&nodes, 50.0);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(!g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));

        let mut nodes = nodes;
        nodes[1].residual = Femtojoules::ZERO;
        let g = rebuild_comm_graph(&nodes, 50.0);
        assert!(!g.contains(1));
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn incremental_removal_matches_rebuild() {
        let d = deploy::<f64>(&cfg(100), 11).unwrap();
        let mut nodes = d.nodes.clone();
        let mut g = rebuild_comm_graph(&nodes, 100.0);
        for dead in [3, 17, 42] {
            nodes[dead].residual = Femtojoules::ZERO;
            g.remove_node(dead);
        }
        assert_eq!(g, rebuild_comm_graph(&nodes, 100.0));
    }
}
