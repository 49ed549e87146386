//! One-time cluster-head election followed by energy-ordered round-robin
//! rotation inside each virtual grid.

use crate::energy::Charge;
use crate::radio::RadioModel;
use crate::scalar::Scalar;
use crate::topology::{CommGraph, GridId, NodeId, NodeState, Role, VirtualGrid};

/// Round-robin order of a grid's members, highest residual energy first as of
/// the last refresh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationSchedule {
    pub grid_id: GridId,
    pub order: Vec<NodeId>,
    pub refresh_period: usize,
    pub last_refresh: usize,
    /// Number of full elections run on this grid. Stays at 1.
    pub elections: u32,
}

impl RotationSchedule {
    pub fn new(grid_id: GridId, refresh_period: usize) -> Self {
        RotationSchedule {
            grid_id,
            order: Vec::new(),
            refresh_period: refresh_period.max(1),
            last_refresh: 0,
            elections: 0,
        }
    }

    pub fn refresh_due(&self, round: usize) -> bool {
        round >= self.last_refresh + self.refresh_period
    }
}

fn energy_order<T: Scalar>(ids: &[NodeId], nodes: &[NodeState<T>]) -> Vec<NodeId> {
    let mut alive: Vec<NodeId> = ids.iter().copied().filter(|&i| nodes[i].alive()).collect();
    alive.sort_by(|&a, &b| nodes[b].residual.cmp(&nodes[a].residual).then(a.cmp(&b)));
    alive
}

/// Elects the highest-energy alive member as cluster head (lowest id on
/// ties) and the runner-up as backup. Returns false and deactivates the grid
/// when it has no alive member.
pub fn initial_ch_election<T: Scalar>(grid: &mut VirtualGrid<T>, nodes: &mut [NodeState<T>]) -> bool {
    grid.schedule.order = energy_order(&grid.member_ids, nodes);
    grid.schedule.last_refresh = 0;
    grid.schedule.elections += 1;
    if grid.schedule.order.is_empty() {
        grid.active = false;
        grid.ch_id = None;
        grid.backup_ch_id = None;
        return false;
    }
    let ch = grid.schedule.order[0];
    let backup = grid.schedule.order.get(1).copied();
    assign_roles(grid, nodes, ch, backup);
    true
}

fn assign_roles<T>(grid: &mut VirtualGrid<T>, nodes: &mut [NodeState<T>], ch: NodeId, backup: Option<NodeId>) {
    for &m in &grid.member_ids {
        nodes[m].role = Role::Member;
    }
    nodes[ch].role = Role::ClusterHead;
    if let Some(b) = backup {
        nodes[b].role = Role::BackupClusterHead;
    }
    grid.ch_id = Some(ch);
    grid.backup_ch_id = backup;
}

/// Cluster head for `round`: entry `(round - last_refresh) mod len` of the
/// order, moving forward past dead nodes.
pub fn rotate_ch<T: Scalar>(
    schedule: &RotationSchedule,
    nodes: &[NodeState<T>],
    round: usize,
) -> Option<NodeId> {
    let len = schedule.order.len();
    if len == 0 {
        return None;
    }
    let start = round.saturating_sub(schedule.last_refresh) % len;
    (0..len)
        .map(|k| schedule.order[(start + k) % len])
        .find(|&id| nodes[id].alive())
}

fn next_alive_after<T: Scalar>(order: &[NodeId], nodes: &[NodeState<T>], id: NodeId) -> Option<NodeId> {
    let len = order.len();
    let at = order.iter().position(|&x| x == id)?;
    (1..len)
        .map(|k| order[(at + k) % len])
        .find(|&x| x != id && nodes[x].alive())
}

/// Installs the round's cluster head and backup. Costs nothing: every member
/// derives the same answer from the shared order.
pub fn apply_rotation<T: Scalar>(grid: &mut VirtualGrid<T>, nodes: &mut [NodeState<T>], round: usize) -> Option<NodeId> {
    if !grid.active {
        return None;
    }
    match rotate_ch(&grid.schedule, nodes, round) {
        Some(ch) => {
            let backup = next_alive_after(&grid.schedule.order, nodes, ch);
            assign_roles(grid, nodes, ch, backup);
            Some(ch)
        }
        None => {
            grid.active = false;
            grid.ch_id = None;
            grid.backup_ch_id = None;
            None
        }
    }
}

/// Control traffic paid by a refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefreshReport {
    pub reports_sent: usize,
}

/// Every alive member reports its residual energy to the current cluster
/// head with one control packet, then the order is re-sorted. No-op unless a
/// refresh is due.
///
/// `charge(node, joules, kind)` debits a node and returns whether the radio
/// operation completed.
pub fn refresh_energy_order<T: Scalar>(
    grid: &mut VirtualGrid<T>,
    nodes: &mut [NodeState<T>],
    round: usize,
    control_bits: T,
    radio: &crate::energy::RadioParams<T>,
    charge: &mut impl FnMut(&mut NodeState<T>, T, Charge) -> bool,
) -> Option<RefreshReport> {
    if !grid.active || !grid.schedule.refresh_due(round) {
        return None;
    }
    let mut report = RefreshReport::default();
    if let Some(ch) = grid.ch_id.filter(|&c| nodes[c].alive()) {
        let ch_pos = nodes[ch].position;
        for &m in &grid.member_ids {
            if m == ch || !nodes[m].alive() || !nodes[ch].alive() {
                continue;
            }
            let d = nodes[m].position.distance(&ch_pos);
            let tx = crate::energy::tx_energy(control_bits, d, radio).unwrap_or(T::zero());
            if charge(&mut nodes[m], tx, Charge::Control) {
                let rx = crate::energy::rx_energy(control_bits, radio).unwrap_or(T::zero());
                charge(&mut nodes[ch], rx, Charge::Control);
            }
            report.reports_sent += 1;
        }
    }
    grid.schedule.order = energy_order(&grid.member_ids, nodes);
    grid.schedule.last_refresh = round;
    Some(report)
}

/// Attaches an unattached node to the grid of the strongest alive neighbour
/// it can overhear (cluster head or member). Returns `None` if nothing is in
/// range.
pub fn adopt_unconnected<T: Scalar>(
    node: NodeId,
    nodes: &mut [NodeState<T>],
    grids: &mut [VirtualGrid<T>],
    graph: &CommGraph,
    radio: &RadioModel<T>,
) -> Option<GridId> {
    if nodes[node].grid_id.is_some() || !nodes[node].alive() {
        return nodes[node].grid_id;
    }
    let me = nodes[node].position;
    let mut best: Option<(T, GridId)> = None;
    for &nb in graph.neighbors(node) {
        let Some(g) = nodes[nb].grid_id else { continue };
        if !grids[g].active {
            continue;
        }
        let Ok(r) = radio.rssi_between(node, me, nb, nodes[nb].position) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((br, bg)) => r > br || (r == br && g < bg),
        };
        if better {
            best = Some((r, g));
        }
    }
    let (_, g) = best?;
    nodes[node].grid_id = Some(g);
    nodes[node].role = Role::Member;
    grids[g].member_ids.push(node);
    grids[g].schedule.order.push(node);
    Some(g)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failover {
    /// The cluster head is alive.
    Unchanged,
    /// The backup took over.
    Promoted(NodeId),
    /// Nobody could take over; the listed alive members are now unattached.
    Deactivated(Vec<NodeId>),
}

/// Replaces a dead cluster head by its backup.
pub fn failover<T: Scalar>(grid: &mut VirtualGrid<T>, nodes: &mut [NodeState<T>]) -> Failover {
    if !grid.active {
        return Failover::Unchanged;
    }
    if grid.ch_id.is_some_and(|c| nodes[c].alive()) {
        return Failover::Unchanged;
    }
    match grid.backup_ch_id.filter(|&b| nodes[b].alive()) {
        Some(b) => {
            let next = next_alive_after(&grid.schedule.order, nodes, b);
            assign_roles(grid, nodes, b, next);
            Failover::Promoted(b)
        }
        None => {
            grid.active = false;
            grid.ch_id = None;
            grid.backup_ch_id = None;
            let orphans: Vec<NodeId> = grid
                .member_ids
                .iter()
                .copied()
                .filter(|&m| nodes[m].alive())
                .collect();
            for &m in &orphans {
                nodes[m].grid_id = None;
                nodes[m].role = Role::Member;
            }
            grid.member_ids.retain(|m| !orphans.contains(m));
            grid.schedule.order.retain(|m| !orphans.contains(m));
            Failover::Deactivated(orphans)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{debit, rx_energy, tx_energy, Femtojoules, RadioParams};
    use crate::radio::PropagationParams;
    use crate::topology::{rebuild_comm_graph, Position, Rect};
    use approx::assert_relative_eq;

    fn grid_with(energies: &[f64]) -> (VirtualGrid<f64>, Vec<NodeState<f64>>) {
        let bounds = Rect {
            min: Position::new(0.0, 0.0),
            max: Position::new(100.0, 100.0),
        };
        let mut g = VirtualGrid::new(0, bounds, 10);
        let nodes: Vec<_> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let mut n = NodeState::new(i, Position::new(10.0 + i as f64, 50.0), e);
                n.grid_id = Some(0);
                n
            })
            .collect();
        g.member_ids = (0..energies.len()).collect();
        (g, nodes)
    }

    #[test]
    fn elects_highest_energy() {
        let (mut g, mut nodes) = grid_with(&[0.5, 0.4, 0.3, 0.2, 0.1]);
        assert!(initial_ch_election(&mut g, &mut nodes));
        assert_eq!(g.ch_id, Some(0));
        assert_eq!(g.backup_ch_id, Some(1));
        assert_eq!(nodes[0].role, Role::ClusterHead);
        assert_eq!(nodes[1].role, Role::BackupClusterHead);
        assert_eq!(g.rotation_order(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let (mut g, mut nodes) = grid_with(&[0.3, 0.5, 0.5, 0.5]);
        initial_ch_election(&mut g, &mut nodes);
        assert_eq!(g.ch_id, Some(1));
        assert_eq!(g.backup_ch_id, Some(2));
    }

    #[test]
    fn single_member_has_no_backup() {
        let (mut g, mut nodes) = grid_with(&[0.5]);
        initial_ch_election(&mut g, &mut nodes);
        assert_eq!(g.ch_id, Some(0));
        assert_eq!(g.backup_ch_id, None);
    }

    #[test]
    fn empty_grid_is_inactive() {
        let (mut g, mut nodes) = grid_with(&[0.0, 0.0]);
        assert!(!initial_ch_election(&mut g, &mut nodes));
        assert!(!g.active);
    }

    #[test]
    fn rotation_indexing() {
        let (mut g, mut nodes) = grid_with(&[0.5, 0.4, 0.3, 0.2, 0.1]);
        initial_ch_election(&mut g, &mut nodes);
        assert_eq!(rotate_ch(&g.schedule, &nodes, 7), Some(2));

        let (mut g1, mut n1) = grid_with(&[0.5]);
        initial_ch_election(&mut g1, &mut n1);
        assert_eq!(rotate_ch(&g1.schedule, &n1, 12345), Some(0));

        let (mut g3, mut n3) = grid_with(&[0.5, 0.4, 0.3]);
        initial_ch_election(&mut g3, &mut n3);
        n3[1].residual = Femtojoules::ZERO;
        assert_eq!(rotate_ch(&g3.schedule, &n3, 1), Some(2));
    }

    #[test]
    fn refresh_sorts_and_gates() {
        let (mut g, mut nodes) = grid_with(&[0.5, 0.5, 0.5]);
        initial_ch_election(&mut g, &mut nodes);
        nodes[0].residual = Femtojoules::from_joules(0.1);
        nodes[1].residual = Femtojoules::from_joules(0.4);
        nodes[2].residual = Femtojoules::from_joules(0.3);
        let p = RadioParams::default();
        let mut free = |_: &mut NodeState<f64>, _: f64, _: Charge| true;
        assert!(refresh_energy_order(&mut g, &mut nodes, 5, 200.0, &p, &mut free).is_none());
        assert_eq!(g.rotation_order(), &[0, 1, 2]);
        refresh_energy_order(&mut g, &mut nodes, 10, 200.0, &p, &mut free).unwrap();
        assert_eq!(g.rotation_order(), &[1, 2, 0]);
        assert_eq!(g.schedule.last_refresh, 10);
        // highest-energy node leads right after a refresh
        assert_eq!(rotate_ch(&g.schedule, &nodes, 10), Some(1));
    }

    #[test]
    fn refresh_costs_two_members() {
        let bounds = Rect {
            min: Position::new(0.0, 0.0),
            max: Position::new(100.0, 100.0),
        };
        let mut g = VirtualGrid::new(0, bounds, 10);
        let mut nodes = vec![
            NodeState::new(0, Position::new(50.0, 50.0), 0.5),
            NodeState::new(1, Position::new(70.0, 50.0), 0.4),
            NodeState::new(2, Position::new(50.0, 30.0), 0.3),
        ];
        g.member_ids = vec![0, 1, 2];
        initial_ch_election(&mut g, &mut nodes);
        let p = RadioParams::default();
        let mut charges = Vec::new();
        {
            let mut rec = |n: &mut NodeState<f64>, e: f64, _: Charge| {
                charges.push((n.id, e));
                true
            };
            refresh_energy_order(&mut g, &mut nodes, 10, 200.0, &p, &mut rec).unwrap();
        }
        let tx = tx_energy(200.0, 20.0, &p).unwrap();
        let rx = rx_energy(200.0, &p).unwrap();
        let paid = |id| charges.iter().filter(|c| c.0 == id).map(|c| c.1).sum::<f64>();
        assert_relative_eq!(paid(1), tx);
        assert_relative_eq!(paid(2), tx);
        assert_relative_eq!(paid(0), 2.0 * rx);
    }

    #[test]
    fn adoption_prefers_strongest_signal() {
        let radio = RadioModel::new(
            PropagationParams {
                shadowing_sigma: 0.0,
                ..PropagationParams::default()
            },
            1,
        );
        let bounds = |x: f64| Rect {
            min: Position::new(x, 0.0),
            max: Position::new(x + 100.0, 100.0),
        };
        let mut grids = vec![VirtualGrid::new(0, bounds(0.0), 10), VirtualGrid::new(1, bounds(100.0), 10)];
        let mut nodes = vec![
            NodeState::new(0, Position::new(60.0, 50.0), 0.5),  // CH of grid 0, 40 m away
            NodeState::new(1, Position::new(120.0, 50.0), 0.5), // CH of grid 1, 20 m away
            NodeState::new(2, Position::new(100.0, 50.0), 0.5), // unattached
        ];
        nodes[0].grid_id = Some(0);
        nodes[1].grid_id = Some(1);
        grids[0].member_ids = vec![0];
        grids[1].member_ids = vec![1];
        for g in grids.iter_mut() {
            initial_ch_election(g, &mut nodes);
        }
        let graph = rebuild_comm_graph(&nodes, 100.0);
        assert_eq!(adopt_unconnected(2, &mut nodes, &mut grids, &graph, &radio), Some(1));
        assert_eq!(nodes[2].grid_id, Some(1));
        assert!(grids[1].member_ids.contains(&2));
    }

    #[test]
    fn adoption_out_of_range_and_via_member() {
        let radio = RadioModel::new(PropagationParams::<f64>::default(), 1);
        let bounds = Rect {
            min: Position::new(0.0, 0.0),
            max: Position::new(100.0, 100.0),
        };
        let mut grids = vec![VirtualGrid::new(0, bounds, 10)];
        let mut nodes = vec![
            NodeState::new(0, Position::new(10.0, 10.0), 0.5), // CH
            NodeState::new(1, Position::new(90.0, 90.0), 0.4), // member
            NodeState::new(2, Position::new(170.0, 170.0), 0.5),
            NodeState::new(3, Position::new(400.0, 400.0), 0.5),
        ];
        nodes[0].grid_id = Some(0);
        nodes[1].grid_id = Some(0);
        grids[0].member_ids = vec![0, 1];
        initial_ch_election(&mut grids[0], &mut nodes);
        let graph = rebuild_comm_graph(&nodes, 120.0);
        assert!(!graph.has_edge(0, 2));
        assert_eq!(adopt_unconnected(2, &mut nodes, &mut grids, &graph, &radio), Some(0));
        assert_eq!(adopt_unconnected(3, &mut nodes, &mut grids, &graph, &radio), None);
        assert_eq!(nodes[3].grid_id, None);
    }

    #[test]
    fn failover_paths() {
        let (mut g, mut nodes) = grid_with(&[0.5, 0.4, 0.3, 0.2]);
        initial_ch_election(&mut g, &mut nodes);
        assert_eq!(failover(&mut g, &mut nodes), Failover::Unchanged);

        debit(&mut nodes[0], 1.0);
        assert_eq!(failover(&mut g, &mut nodes), Failover::Promoted(1));
        assert_eq!(g.ch_id, Some(1));
        assert_eq!(g.backup_ch_id, Some(2));

        debit(&mut nodes[1], 1.0);
        debit(&mut nodes[2], 1.0);
        assert_eq!(failover(&mut g, &mut nodes), Failover::Deactivated(vec![3]));
        assert!(!g.active);
        assert_eq!(nodes[3].grid_id, None);
    }

    #[test]
    fn rotation_is_fair_over_a_window() {
        let (mut g, mut nodes) = grid_with(&[0.5, 0.45, 0.4, 0.35, 0.3]);
        initial_ch_election(&mut g, &mut nodes);
        let mut served: Vec<_> = (3..8).map(|r| apply_rotation(&mut g, &mut nodes, r).unwrap()).collect();
        served.sort();
        assert_eq!(served, vec![0, 1, 2, 3, 4]);
        assert_eq!(g.schedule.elections, 1);
    }
}
