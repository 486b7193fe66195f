//! Second-order finite differences on grid functions.
//!
//! `t` derivatives are centered on inner rings and one-sided (three points)
//! on the first and last ring; angular derivatives are periodic and centered.
//! The tip node of a capped grid gets zero derivatives.

use super::grid::Grid;

pub fn d_t(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let h = grid.h_t();
    let n = grid.rings();
    let m = grid.ring_size();
    let mut out = vec![0.0; grid.len()];
    let first = if grid.has_tip() { 1 } else { 0 };
    for i in first..n {
        for j in 0..m {
            let v = grid.node(i, j);
            let at = |k: usize| f[grid.node(k, j)];
            out[v] = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
    }
    out
}

/// `∂/∂φ_k` with respect to the angle of circle factor `k`.
pub fn d_angle(grid: &Grid, f: &[f64], k: usize) -> Vec<f64> {
    let cross = grid.cross();
    let ht = cross.h_theta();
    let m = grid.ring_size();
    let mut out = vec![0.0; grid.len()];
    let first = if grid.has_tip() { 1 } else { 0 };
    for i in first..grid.rings() {
        for j in 0..m {
            let fw = f[grid.node(i, cross.neighbor(j, k, true))];
            let bw = f[grid.node(i, cross.neighbor(j, k, false))];
            out[grid.node(i, j)] = (fw - bw) / (2.0 * ht);
        }
    }
    out
}
