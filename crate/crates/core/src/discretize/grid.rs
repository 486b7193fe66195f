//! Tensor-product grid: uniform `t` rings times a periodic cross-section mesh.

use std::f64::consts::PI;

use crate::geometry::CrossSection;

/// Uniform periodic mesh of a product of circles.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossMesh {
    radii: Vec<f64>,
    points: usize,
}

impl CrossMesh {
    pub fn new(radii: Vec<f64>, points: usize) -> Self {
        CrossMesh { radii, points }
    }

    pub fn from_cross_section(x: &CrossSection) -> Self {
        CrossMesh::new(x.radii(), x.mesh_points())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    /// Points per circle factor.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Nodes per ring.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    /// Flat measure of one cross-section cell, `Π r_k h_θ`.
    pub fn cell_measure(&self) -> f64 {
        self.radii.iter().map(|r| r * self.h_theta()).product()
    }

    /// Angle of node `j` along factor `k`.
    pub fn angle(&self, j: usize, k: usize) -> f64 {
        let idx = (j / self.points.pow(k as u32)) % self.points;
        idx as f64 * self.h_theta()
    }

    /// Periodic neighbour of `j` along factor `k` with offset `±1`.
    pub fn neighbor(&self, j: usize, k: usize, forward: bool) -> usize {
        let stride = self.points.pow(k as u32);
        let idx = (j / stride) % self.points;
        let next = if forward {
            (idx + 1) % self.points
        } else {
            (idx + self.points - 1) % self.points
        };
        j - idx * stride + next * stride
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Tip,
    Interior,
    /// Node on the truncation face of end `end`.
    Boundary { end: usize },
}

/// Rings `t_0 < … < t_n` crossed with a [`CrossMesh`]. With `tip` set the
/// first ring collapses to a single node (a smooth polar origin).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t: Vec<f64>,
    h: f64,
    cross: CrossMesh,
    tip: bool,
}

impl Grid {
    pub fn uniform(t0: f64, t1: f64, intervals: usize, cross: CrossMesh, tip: bool) -> Self {
        let h = (t1 - t0) / intervals as f64;
        let t = (0..=intervals)
            .map(|i| if i == intervals { t1 } else { t0 + i as f64 * h })
            .collect();
        Grid { t, h, cross, tip }
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn h_t(&self) -> f64 {
        self.h
    }

    pub fn cross(&self) -> &CrossMesh {
        &self.cross
    }

    pub fn has_tip(&self) -> bool {
        self.tip
    }

    pub fn rings(&self) -> usize {
        self.t.len()
    }

    pub fn ring_size(&self) -> usize {
        self.cross.size()
    }

    pub fn len(&self) -> usize {
        let m = self.cross.size();
        if self.tip {
            1 + (self.t.len() - 1) * m
        } else {
            self.t.len() * m
        }
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Flat node index of ring `i`, cross node `j`.
    pub fn node(&self, i: usize, j: usize) -> usize {
        let m = self.cross.size();
        if self.tip {
            if i == 0 {
                0
            } else {
                1 + (i - 1) * m + j
            }
        } else {
            i * m + j
        }
    }

    /// Inverse of [`Grid::node`]; the tip reports cross index 0.
    pub fn ring_of(&self, node: usize) -> (usize, usize) {
        let m = self.cross.size();
        if self.tip {
            if node == 0 {
                (0, 0)
            } else {
                (1 + (node - 1) / m, (node - 1) % m)
            }
        } else {
            (node / m, node % m)
        }
    }

    /// End whose truncation face is ring `i`, if any.
    pub fn boundary_end_of_ring(&self, i: usize) -> Option<usize> {
        let last = self.t.len() - 1;
        if i == last {
            Some(0)
        } else if i == 0 && !self.tip {
            Some(1)
        } else {
            None
        }
    }

    /// Ring index holding the truncation face of `end`.
    pub fn boundary_ring(&self, end: usize) -> usize {
        if end == 0 {
            self.t.len() - 1
        } else {
            0
        }
    }

    /// Unit outward direction of end `end` in the global `t` coordinate.
    pub fn end_orientation(&self, end: usize) -> f64 {
        if end == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if self.tip && node == 0 {
            return NodeKind::Tip;
        }
        let (i, _) = self.ring_of(node);
        match self.boundary_end_of_ring(i) {
            Some(end) => NodeKind::Boundary { end },
            None => NodeKind::Interior,
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        matches!(self.kind(node), NodeKind::Boundary { .. })
    }

    pub fn boundary_nodes(&self, end: usize) -> Vec<usize> {
        let i = self.boundary_ring(end);
        (0..self.cross.size()).map(|j| self.node(i, j)).collect()
    }

    /// Global `t` coordinate of every node.
    pub fn node_t(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.t[self.ring_of(n).0]).collect()
    }

    /// Samples `f(t, angles)` at every node.
    pub fn sample(&self, f: impl Fn(f64, &[f64]) -> f64) -> Vec<f64> {
        let dim = self.cross.dim();
        let mut angles = vec![0.0; dim];
        (0..self.len())
            .map(|n| {
                let (i, j) = self.ring_of(n);
                for (k, a) in angles.iter_mut().enumerate() {
                    *a = self.cross.angle(j, k);
                }
                f(self.t[i], &angles)
            })
            .collect()
    }

    /// Index of the ring closest to `t`.
    pub fn nearest_ring(&self, t: f64) -> usize {
        let i = ((t - self.t[0]) / self.h).round();
        i.clamp(0.0, (self.t.len() - 1) as f64) as usize
    }
}
