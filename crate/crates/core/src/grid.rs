//! Uniform axis-aligned grids over intervals and rectangles.

use serde::Serialize;
use thiserror::Error;

/// Node coordinates. The second component is 0 on one-dimensional grids.
pub type Point = [f64; 2];

const SPAN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("lower has {lower} components but upper has {upper}")]
    Mismatch { lower: usize, upper: usize },
    #[error("spacing h must be positive and finite, got {0}")]
    Spacing(f64),
    #[error("axis {axis}: upper bound {upper} must exceed lower bound {lower}")]
    EmptyAxis { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis}: span {span} is not an integer multiple of h = {h}")]
    NonIntegralSpan { axis: usize, span: f64, h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    lower: Point,
    upper: Point,
    h: f64,
    counts: [usize; 2],
    #[serde(skip)]
    kinds: Vec<NodeKind>,
}

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], h: f64) -> Result<Self, GridError> {
        if lower.len() != upper.len() {
            return Err(GridError::Mismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        let dim = lower.len();
        if !(1..=2).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::Spacing(h));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut counts = [1usize; 2];
        for axis in 0..dim {
            let (a, b) = (lower[axis], upper[axis]);
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(GridError::EmptyAxis {
                    axis,
                    lower: a,
                    upper: b,
                });
            }
            let span = b - a;
            let cells = (span / h).round();
            if cells < 1.0 || (cells * h - span).abs() > SPAN_RTOL * span {
                return Err(GridError::NonIntegralSpan { axis, span, h });
            }
            lo[axis] = a;
            hi[axis] = b;
            counts[axis] = cells as usize + 1;
        }
        let mut grid = Grid {
            dim,
            lower: lo,
            upper: hi,
            h,
            counts,
            kinds: Vec::new(),
        };
        grid.kinds = (0..grid.len())
            .map(|i| {
                let idx = grid.multi_index(i);
                let on_face = (0..dim).any(|a| idx[a] == 0 || idx[a] + 1 == counts[a]);
                if on_face {
                    NodeKind::Boundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    /// Nodes per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        [node % self.counts[0], node / self.counts[0]]
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.counts[0] * idx[1]
    }

    pub fn coords(&self, node: usize) -> Point {
        let idx = self.multi_index(node);
        let mut p = [0.0; 2];
        for axis in 0..self.dim {
            p[axis] = self.lower[axis] + idx[axis] as f64 * self.h;
        }
        p
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Boundary
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Interior
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_interior(i))
    }

    pub fn boundary(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_boundary(i))
    }

    pub fn interior_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    /// The node `delta` steps away along `axis`, if it exists.
    pub fn step(&self, node: usize, axis: usize, delta: isize) -> Option<usize> {
        if axis >= self.dim {
            return None;
        }
        let mut idx = self.multi_index(node);
        let moved = idx[axis] as isize + delta;
        if moved < 0 || moved as usize >= self.counts[axis] {
            return None;
        }
        idx[axis] = moved as usize;
        Some(self.flat_index(idx))
    }

    /// The node whose coordinates are within h/2 of `point` in every axis.
    pub fn nearest(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim {
            return None;
        }
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            let t = (point[axis] - self.lower[axis]) / self.h;
            let k = t.round();
            if k < 0.0 || k as usize >= self.counts[axis] || (t - k).abs() > 0.5 {
                return None;
            }
            idx[axis] = k as usize;
        }
        Some(self.flat_index(idx))
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.coords(a), self.coords(b));
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        (self.upper[0] - self.lower[0]).hypot(self.upper[1] - self.lower[1])
    }

    /// Whether the closed ball of radius `r` around `center` lies in the box.
    pub fn contains_ball(&self, center: usize, r: f64) -> bool {
        let p = self.coords(center);
        let slack = 1e-12 * (1.0 + r);
        (0..self.dim).all(|a| p[a] - r >= self.lower[a] - slack && p[a] + r <= self.upper[a] + slack)
    }
}
