//! Binary slot schedules realizing an attempt-probability vector.
//!
//! Row `i` holds exactly `floor(alpha_i * T)` ones and no column may carry
//! more than `M` ones. Rows start from random placements and are repaired
//! by min-conflicts local search; if the iteration budget runs out the
//! deterministic staircase construction is used instead.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AttemptVector;

pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Slack for `alpha * T` landing a hair below an integer.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleMatrix {
    slots: usize,
    capacity: usize,
    row_targets: Vec<usize>,
    /// Row-major `N x T`.
    cells: Vec<bool>,
}

/// How a matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildPath {
    MinConflicts { iterations: usize },
    Staircase,
}

impl ScheduleMatrix {
    /// Wraps an explicit grid. Does not check the invariants; see [`verify_matrix`].
    pub fn from_grid(grid: &[Vec<u8>], row_targets: Vec<usize>, capacity: usize) -> Result<Self> {
        let slots = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != slots) {
            return Err(Error::domain("ragged schedule grid"));
        }
        if row_targets.len() != grid.len() {
            return Err(Error::domain("one row target per grid row is required"));
        }
        Ok(Self {
            slots,
            capacity,
            row_targets,
            cells: grid.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect(),
        })
    }

    fn empty(row_targets: Vec<usize>, slots: usize, capacity: usize) -> Self {
        Self {
            cells: vec![false; row_targets.len() * slots],
            slots,
            capacity,
            row_targets,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_targets.len()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn row_targets(&self) -> &[usize] {
        &self.row_targets
    }

    pub fn get(&self, row: usize, slot: usize) -> bool {
        self.cells[row * self.slots + slot]
    }

    fn set(&mut self, row: usize, slot: usize, on: bool) {
        self.cells[row * self.slots + slot] = on;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.cells[row * self.slots..(row + 1) * self.slots]
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.row(row).iter().filter(|&&b| b).count()
    }

    pub fn column_sum(&self, slot: usize) -> usize {
        (0..self.rows()).filter(|&r| self.get(r, slot)).count()
    }

    /// Scheduled slot indices of `row`, ascending.
    pub fn scheduled_slots(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(row).iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| t)
    }

    pub fn to_grid(&self) -> Vec<Vec<u8>> {
        (0..self.rows())
            .map(|r| self.row(r).iter().map(|&b| u8::from(b)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Row { row: usize, actual: usize, expected: usize },
    Column { slot: usize, actual: usize, allowed: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Row { row, actual, expected } => {
                write!(f, "row {row} has {actual} ones, expected {expected}")
            }
            Violation::Column { slot, actual, allowed } => {
                write!(f, "slot {slot} carries {actual} transmissions, at most {allowed} allowed")
            }
        }
    }
}

/// All row-sum and column-capacity violations; empty iff the matrix is feasible.
pub fn verify_matrix(q: &ScheduleMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    for (row, &expected) in q.row_targets.iter().enumerate() {
        let actual = q.row_sum(row);
        if actual != expected {
            out.push(Violation::Row { row, actual, expected });
        }
    }
    for slot in 0..q.slots {
        let actual = q.column_sum(slot);
        if actual > q.capacity {
            out.push(Violation::Column {
                slot,
                actual,
                allowed: q.capacity,
            });
        }
    }
    out
}

/// `floor(alpha_i * T)` per row, after feasibility checks.
pub fn row_targets(alpha: &AttemptVector, slots: usize, capacity: usize) -> Result<Vec<usize>> {
    if slots == 0 {
        return Err(Error::Infeasible("T must be at least 1".into()));
    }
    let mut targets = Vec::with_capacity(alpha.len());
    for (i, &a) in alpha.0.iter().enumerate() {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Infeasible(format!(
                "alpha[{i}] = {a} gives a row target outside [0, T]"
            )));
        }
        targets.push(((a * slots as f64 + FLOOR_SLACK).floor() as usize).min(slots));
    }
    let total: usize = targets.iter().sum();
    if total > capacity * slots {
        return Err(Error::Infeasible(format!(
            "sum of row targets {total} exceeds M * T = {}",
            capacity * slots
        )));
    }
    Ok(targets)
}

/// Builds a feasible schedule; see the module docs.
pub fn build_matrix<R: Rng + ?Sized>(
    alpha: &AttemptVector,
    slots: usize,
    capacity: usize,
    rng: &mut R,
    max_iters: usize,
) -> Result<ScheduleMatrix> {
    build_matrix_traced(alpha, slots, capacity, rng, max_iters).map(|(q, _)| q)
}

pub fn build_matrix_traced<R: Rng + ?Sized>(
    alpha: &AttemptVector,
    slots: usize,
    capacity: usize,
    rng: &mut R,
    max_iters: usize,
) -> Result<(ScheduleMatrix, BuildPath)> {
    let targets = row_targets(alpha, slots, capacity)?;
    if let Some((q, iterations)) = min_conflicts(&targets, slots, capacity, rng, max_iters) {
        return Ok((q, BuildPath::MinConflicts { iterations }));
    }
    Ok((staircase(&targets, slots, capacity), BuildPath::Staircase))
}

fn min_conflicts<R: Rng + ?Sized>(
    targets: &[usize],
    slots: usize,
    capacity: usize,
    rng: &mut R,
    max_iters: usize,
) -> Option<(ScheduleMatrix, usize)> {
    let mut q = ScheduleMatrix::empty(targets.to_vec(), slots, capacity);
    let mut load = vec![0usize; slots];
    for (row, &target) in targets.iter().enumerate() {
        for t in index::sample(rng, slots, target) {
            q.set(row, t, true);
            load[t] += 1;
        }
    }
    let mut iterations = 0;
    loop {
        let over: Vec<usize> = (0..slots).filter(|&t| load[t] > capacity).collect();
        if over.is_empty() {
            return Some((q, iterations));
        }
        if iterations >= max_iters {
            return None;
        }
        iterations += 1;

        // Random variable in conflict: a row transmitting in an overloaded slot.
        let slot = over[rng.random_range(0..over.len())];
        let rows: Vec<usize> = (0..q.rows()).filter(|&r| q.get(r, slot)).collect();
        let row = rows[rng.random_range(0..rows.len())];

        // Min-conflict value: move that one to the least-loaded free slot.
        let free: Vec<usize> = (0..slots).filter(|&t| !q.get(row, t)).collect();
        let Some(min_load) = free.iter().map(|&t| load[t]).min() else {
            continue;
        };
        // Moving into a slot already at capacity cannot reduce conflicts.
        if min_load + 1 > load[slot] {
            continue;
        }
        let best: Vec<usize> = free.into_iter().filter(|&t| load[t] == min_load).collect();
        let dest = best[rng.random_range(0..best.len())];
        q.set(row, slot, false);
        q.set(row, dest, true);
        load[slot] -= 1;
        load[dest] += 1;
    }
}

/// Deterministic construction: rows by descending target, each placing its
/// ones in the least-loaded columns, scanning round-robin from a cursor.
///
/// Column loads never differ by more than one, so the maximum load is at
/// most `ceil(sum / T) <= M`.
pub fn staircase(targets: &[usize], slots: usize, capacity: usize) -> ScheduleMatrix {
    let mut q = ScheduleMatrix::empty(targets.to_vec(), slots, capacity);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[b].cmp(&targets[a]).then(a.cmp(&b)));
    let mut load = vec![0usize; slots];
    let mut cursor = 0;
    for row in order {
        let mut cols: Vec<usize> = (0..slots).collect();
        cols.sort_by_key(|&t| (load[t], (t + slots - cursor) % slots));
        for &t in &cols[..targets[row]] {
            q.set(row, t, true);
            load[t] += 1;
        }
        cursor = (cursor + targets[row]) % slots;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn figure_example_is_feasible() {
        let alpha = AttemptVector(vec![1.0 / 8.0, 3.0 / 8.0, 0.5, 1.0, 0.0]);
        let q = build_matrix(&alpha, 16, 2, &mut rng_from_seed(2), DEFAULT_MAX_ITERS).unwrap();
        let sums: Vec<usize> = (0..5).map(|r| q.row_sum(r)).collect();
        assert_eq!(sums, vec![2, 6, 8, 16, 0]);
        assert!((0..16).all(|t| q.column_sum(t) <= 2));
        assert!(verify_matrix(&q).is_empty());
    }

    #[test]
    fn tight_example_staircase_is_feasible() {
        let alpha = AttemptVector(vec![1.0 / 8.0, 3.0 / 8.0, 0.5, 1.0, 0.0]);
        let (q, path) = build_matrix_traced(&alpha, 16, 2, &mut rng_from_seed(2), 0).unwrap();
        assert!(matches!(path, BuildPath::Staircase | BuildPath::MinConflicts { iterations: 0 }));
        assert!(verify_matrix(&q).is_empty());
    }

    #[test]
    fn all_ones_is_unique_solution() {
        let q = build_matrix(&AttemptVector(vec![1.0, 1.0]), 4, 2, &mut rng_from_seed(0), 100).unwrap();
        assert_eq!(q.to_grid(), vec![vec![1, 1, 1, 1]; 2]);
    }

    #[test]
    fn infeasible_targets_rejected() {
        let err = build_matrix(&AttemptVector(vec![1.0, 1.0, 0.5]), 4, 2, &mut rng_from_seed(0), 10).unwrap_err();
        assert!(matches!(err, Error::Infeasible(ref m) if m.contains("M * T")));
        assert!(build_matrix(&AttemptVector(vec![1.2]), 4, 2, &mut rng_from_seed(0), 10).is_err());
        assert!(build_matrix(&AttemptVector(vec![0.5]), 0, 2, &mut rng_from_seed(0), 10).is_err());
    }

    #[test]
    fn verify_reports_column_and_row() {
        let grid = vec![vec![1, 0, 1], vec![1, 1, 0], vec![1, 0, 0]];
        let q = ScheduleMatrix::from_grid(&grid, vec![2, 2, 1], 2).unwrap();
        assert_eq!(
            verify_matrix(&q),
            vec![Violation::Column { slot: 0, actual: 3, allowed: 2 }]
        );
        let q = ScheduleMatrix::from_grid(&grid, vec![2, 1, 1], 3).unwrap();
        assert_eq!(
            verify_matrix(&q),
            vec![Violation::Row { row: 1, actual: 2, expected: 1 }]
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let alpha = AttemptVector(vec![0.3, 0.7, 0.45, 0.55, 0.9]);
        let a = build_matrix(&alpha, 50, 3, &mut rng_from_seed(9), 1000).unwrap();
        let b = build_matrix(&alpha, 50, 3, &mut rng_from_seed(9), 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(staircase(a.row_targets(), 50, 3), staircase(a.row_targets(), 50, 3));
    }

    #[test]
    fn flooring_error_below_one_slot() {
        let alpha = AttemptVector(vec![1.0 / 3.0, 2.0 / 3.0, 0.123, 0.999]);
        let q = build_matrix(&alpha, 97, 3, &mut rng_from_seed(4), 1000).unwrap();
        for (i, &a) in alpha.0.iter().enumerate() {
            let realized = q.row_sum(i) as f64 / 97.0;
            assert!(a - realized < 1.0 / 97.0 && realized <= a + 1e-12);
        }
        // exact multiples survive floating-point products
        let t = row_targets(&AttemptVector(vec![5.0 / 7.0, 0.7, 0.29]), 100, 3).unwrap();
        assert_eq!(t, vec![71, 70, 29]);
    }
}
