//! Small reference datasets used by examples, the CLI and the browser demo.

use crate::error::Result;
use crate::joint::{DiscreteJoint, Orientation};

/// The 4×4 example joint, as `table[i][j] = P(U₁ = i, U₂ = j)`.
pub const EXAMPLE_4X4: [[f64; 4]; 4] = [
    [0.02, 0.0, 0.13, 0.10],
    [0.0, 0.03, 0.07, 0.15],
    [0.08, 0.12, 0.05, 0.0],
    [0.15, 0.10, 0.0, 0.0],
];

pub fn example_joint() -> Result<DiscreteJoint> {
    let rows: Vec<Vec<f64>> = EXAMPLE_4X4.iter().map(|r| r.to_vec()).collect();
    DiscreteJoint::from_table(&rows, Orientation::Math)
}

/// Cell counts of 34 annual (windstorm, flood) loss pairs on a 10×10 grid of
/// relative ranks r/(n + 1). Printed orientation: row 0 is the top cell
/// (0.9, 1.0] of the first variable, column j the cell (j/10, (j+1)/10] of the
/// second.
pub const STORM_FLOOD_COUNTS: [[u32; 10]; 10] = [
    [0, 0, 0, 0, 0, 1, 1, 1, 0, 0],
    [1, 0, 0, 0, 0, 0, 1, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, 1, 1, 2],
    [0, 1, 0, 0, 0, 1, 0, 0, 1, 0],
    [0, 1, 1, 1, 0, 0, 0, 1, 0, 0],
    [0, 1, 0, 1, 0, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 1, 1, 1, 0, 0, 0],
    [0, 0, 0, 2, 0, 0, 0, 1, 0, 0],
    [1, 1, 0, 0, 2, 0, 0, 0, 0, 0],
    [0, 0, 2, 0, 0, 1, 0, 0, 0, 0],
];

/// Counts in math orientation: `[k1][k2]` with k1 the first variable's cell.
pub fn storm_flood_counts() -> Vec<Vec<u64>> {
    STORM_FLOOD_COUNTS
        .iter()
        .rev()
        .map(|r| r.iter().map(|&c| u64::from(c)).collect())
        .collect()
}

/// Integer ranks (1..=34 per column) of a 34-point sample whose r/35 pseudo-
/// observations bin exactly into [`STORM_FLOOD_COUNTS`]. Inside each cell of
/// one variable the ranks are handed out in the other variable's cell order.
pub fn storm_flood_ranks() -> Vec<[u32; 2]> {
    let counts = storm_flood_counts();
    let m = counts.len();
    let n: u64 = counts.iter().flatten().sum();
    let mut points: Vec<(usize, usize)> = Vec::new();
    for (k1, row) in counts.iter().enumerate() {
        for (k2, &c) in row.iter().enumerate() {
            points.extend(std::iter::repeat_n((k1, k2), c as usize));
        }
    }
    // ranks r with ceil(r·m/(n+1)) − 1 == k, in ascending order
    let ranks_in = |k: usize| -> Vec<u32> {
        (1..=n)
            .filter(|&r| ((r * m as u64).div_ceil(n + 1) - 1) as usize == k)
            .map(|r| r as u32)
            .collect()
    };
    let mut out = vec![[0u32; 2]; points.len()];
    for axis in 0..2 {
        for k in 0..m {
            let mut members: Vec<usize> = (0..points.len())
                .filter(|&i| [points[i].0, points[i].1][axis] == k)
                .collect();
            members.sort_by_key(|&i| ([points[i].0, points[i].1][1 - axis], i));
            for (i, r) in members.into_iter().zip(ranks_in(k)) {
                out[i][axis] = r;
            }
        }
    }
    out
}
