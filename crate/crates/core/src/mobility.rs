//! Mobile sinks shuttling back and forth along fixed serpentine paths.
//!
//! Every node can evaluate [`position_at`] locally, so after the initial
//! announcement sinks never broadcast their location.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::topology::{GridId, Lattice, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkState<T> {
    pub id: usize,
    /// Grid centres in visiting order.
    pub waypoints: Vec<Position<T>>,
    /// Arc length at each waypoint; `cumulative[0] = 0`.
    cumulative: Vec<T>,
    /// m/s
    pub speed: T,
    pub position: Position<T>,
    /// Sorted.
    pub assigned_grid_ids: Vec<GridId>,
    pub direction: Direction,
}

impl<T: Scalar> SinkState<T> {
    pub fn new(id: usize, waypoints: Vec<Position<T>>, speed: T, mut assigned: Vec<GridId>) -> Self {
        assert!(!waypoints.is_empty(), "sink path needs at least one waypoint");
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in waypoints.windows(2) {
            acc = acc + w[0].distance(&w[1]);
            cumulative.push(acc);
        }
        assigned.sort_unstable();
        SinkState {
            id,
            position: waypoints[0],
            waypoints,
            cumulative,
            speed,
            assigned_grid_ids: assigned,
            direction: Direction::Forward,
        }
    }

    pub fn path_length(&self) -> T {
        *self.cumulative.last().expect("nonempty")
    }

    /// Time for a full out-and-back sweep.
    pub fn period(&self) -> T {
        lit::<T>(2.0) * self.path_length() / self.speed
    }

    pub fn serves(&self, grid: GridId) -> bool {
        self.assigned_grid_ids.binary_search(&grid).is_ok()
    }

    /// Moves the sink to its scheduled position at time `t`.
    pub fn advance_to(&mut self, t: T) {
        let (p, dir) = locate(self, t);
        self.position = p;
        self.direction = dir;
    }

    fn point_at_arc(&self, s: T) -> Position<T> {
        let seg = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arc length"))
        {
            Ok(i) => return self.waypoints[i],
            Err(i) => i.clamp(1, self.waypoints.len() - 1) - 1,
        };
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let span = self.cumulative[seg + 1] - self.cumulative[seg];
        let f = ((s - self.cumulative[seg]) / span).min(T::one()).max(T::zero());
        Position::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
    }
}

fn locate<T: Scalar>(sink: &SinkState<T>, t: T) -> (Position<T>, Direction) {
    let len = sink.path_length();
    if len == T::zero() {
        return (sink.waypoints[0], Direction::Forward);
    }
    let two_len = lit::<T>(2.0) * len;
    let travelled = (sink.speed * t.max(T::zero())) % two_len;
    if travelled <= len {
        (sink.point_at_arc(travelled), Direction::Forward)
    } else {
        (sink.point_at_arc(two_len - travelled), Direction::Backward)
    }
}

/// Splits the grids into `sink_count` contiguous column-major bands of
/// near-equal size and gives each sink a row-serpentine path through its
/// band's cell centres.
pub fn build_routes<T: Scalar>(lattice: &Lattice<T>, sink_count: usize, speed: T) -> Result<Vec<SinkState<T>>> {
    let grids = lattice.len();
    if sink_count == 0 {
        return Err(Error::invalid("sink_count", "must be at least 1"));
    }
    if sink_count > grids {
        return Err(Error::TooManySinks {
            sinks: sink_count,
            grids,
        });
    }
    if !(speed > T::zero()) {
        return Err(Error::invalid("sink_speed", "must be positive"));
    }
    let column_major: Vec<GridId> = (0..lattice.cols)
        .flat_map(|c| (0..lattice.rows).map(move |r| (r, c)))
        .map(|(r, c)| lattice.id(r, c))
        .collect();

    let base = grids / sink_count;
    let extra = grids % sink_count;
    let mut sinks = Vec::with_capacity(sink_count);
    let mut start = 0;
    for s in 0..sink_count {
        let size = base + usize::from(s < extra);
        let band = &column_major[start..start + size];
        start += size;

        let mut cells: Vec<(usize, usize)> = band.iter().map(|&g| lattice.row_col(g)).collect();
        cells.sort_unstable();
        let mut path = Vec::with_capacity(cells.len());
        let mut row_index = 0;
        let mut i = 0;
        while i < cells.len() {
            let row = cells[i].0;
            let j = cells[i..].iter().position(|c| c.0 != row).map_or(cells.len(), |k| i + k);
            let mut row_cells = cells[i..j].to_vec();
            if row_index % 2 == 1 {
                row_cells.reverse();
            }
            path.extend(row_cells.into_iter().map(|(r, c)| lattice.id(r, c)));
            row_index += 1;
            i = j;
        }
        let waypoints = path.iter().map(|&g| lattice.bounds(g).center()).collect();
        sinks.push(SinkState::new(s, waypoints, speed, band.to_vec()));
    }
    Ok(sinks)
}

/// Scheduled position at time `t` (seconds).
pub fn position_at<T: Scalar>(sink: &SinkState<T>, t: T) -> Position<T> {
    locate(sink, t).0
}

/// The sink's own grid containing its position at `t`, if any.
pub fn serving_grid<T: Scalar>(sink: &SinkState<T>, t: T, lattice: &Lattice<T>) -> Option<GridId> {
    lattice
        .cell_of(position_at(sink, t))
        .filter(|&g| sink.serves(g))
}

/// Kilometres per hour to metres per second.
pub fn kmh_to_mps<T: Scalar>(kmh: T) -> T {
    kmh / lit(3.6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn straight(len: f64, speed: f64) -> SinkState<f64> {
        SinkState::new(
            0,
            vec![Position::new(0.0, 0.0), Position::new(len, 0.0)],
            speed,
            vec![0],
        )
    }

    #[test]
    fn start_and_far_end() {
        let s = straight(100.0, kmh_to_mps(9.0));
        assert_eq!(s.speed, 2.5);
        assert_eq!(position_at(&s, 0.0), Position::new(0.0, 0.0));
        assert_abs_diff_eq!(position_at(&s, 40.0).x, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(position_at(&s, 80.0).x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(position_at(&s, 60.0).x, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn band_split_at_900_nodes() {
        let l = Lattice::for_grid_count(180, 1000.0, 1000.0).unwrap();
        let sinks = build_routes(&l, 2, 2.5).unwrap();
        assert_eq!(sinks[0].assigned_grid_ids.len(), 90);
        assert_eq!(sinks[1].assigned_grid_ids.len(), 90);
        assert!(sinks[0]
            .assigned_grid_ids
            .iter()
            .all(|g| !sinks[1].serves(*g)));
    }

    #[test]
    fn single_grid_is_stationary() {
        let l = Lattice::for_grid_count(1, 100.0, 100.0).unwrap();
        let s = &build_routes(&l, 1, 2.5).unwrap()[0];
        assert_eq!(s.waypoints.len(), 1);
        assert_eq!(position_at(s, 1234.5), Position::new(50.0, 50.0));
        assert_eq!(serving_grid(s, 99.0, &l), Some(0));
    }

    #[test]
    fn serpentine_on_4x5() {
        let l = Lattice::for_grid_count(20, 500.0, 400.0).unwrap();
        assert_eq!((l.rows, l.cols), (4, 5));
        let s = &build_routes(&l, 1, 1.0).unwrap()[0];
        assert_eq!(s.waypoints.len(), 20);
        let mut ids: Vec<_> = s.waypoints.iter().map(|p| l.cell_of(*p).unwrap()).collect();
        assert_eq!(&ids[..6], &[0, 1, 2, 3, 4, 9]);
        // consecutive waypoints are adjacent cells
        for w in s.waypoints.windows(2) {
            assert_abs_diff_eq!(w[0].distance(&w[1]), 100.0, epsilon = 1e-9);
        }
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn boundary_goes_to_lower_id_and_foreign_cells_are_none() {
        let l = Lattice::for_grid_count(2, 200.0, 100.0).unwrap();
        let sinks = build_routes(&l, 2, 1.0).unwrap();
        let on_edge = SinkState::new(0, vec![Position::new(100.0, 50.0)], 1.0, vec![0, 1]);
        assert_eq!(serving_grid(&on_edge, 0.0, &l), Some(0));
        let stray = SinkState::new(1, vec![Position::new(50.0, 50.0)], 1.0, vec![1]);
        assert_eq!(serving_grid(&stray, 0.0, &l), None);
        assert_eq!(serving_grid(&sinks[1], 0.0, &l), Some(1));
    }

    #[test]
    fn too_many_sinks() {
        let l = Lattice::for_grid_count(4, 200.0, 200.0).unwrap();
        assert!(matches!(
            build_routes(&l, 5, 1.0),
            Err(Error::TooManySinks { sinks: 5, grids: 4 })
        ));
    }

    #[test]
    fn direction_flips_on_return() {
        let mut s = straight(100.0, 1.0);
        s.advance_to(30.0);
        assert_eq!(s.direction, Direction::Forward);
        s.advance_to(130.0);
        assert_eq!(s.direction, Direction::Backward);
        assert_abs_diff_eq!(s.position.x, 70.0, epsilon = 1e-12);
    }
}
