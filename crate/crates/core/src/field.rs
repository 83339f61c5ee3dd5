use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Bindings, EvalError, FunctionSpec};
use crate::grid::{Grid, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field has {found} values but the grid has {expected} nodes")]
    Length { expected: usize, found: usize },
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("evaluating '{source_text}' at node {node} {point:?}: {err}")]
    Eval {
        source_text: String,
        node: usize,
        point: Vec<f64>,
        err: EvalError,
    },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// One finite real per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FieldError::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::new(grid, values).expect("from_fn produced a non-finite value")
    }

    /// Evaluates `spec` at every node, binding `x`, `y` and `r`.
    pub fn sample(grid: Arc<Grid>, spec: &FunctionSpec) -> Result<Self, FieldError> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|node| {
                let p = grid.coords(node);
                spec.eval(&Bindings::at_point(p, dim))
                    .map_err(|err| FieldError::Eval {
                        source_text: spec.source().to_string(),
                        node,
                        point: p[..dim].to_vec(),
                        err,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(grid, values)
    }

    pub(crate) fn from_values_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.grid.clone(), values).expect("map produced a non-finite value")
    }

    /// max |self − other| over all nodes.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64, FieldError> {
        if !self.same_grid(other) {
            return Err(FieldError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Like [`sup_distance`](Self::sup_distance), also returning the node.
    pub fn sup_distance_at(&self, other: &ScalarField) -> Result<(f64, usize), FieldError> {
        if !self.same_grid(other) {
            return Err(FieldError::GridMismatch);
        }
        let mut best = (0.0, 0);
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let d = (a - b).abs();
            if d > best.0 {
                best = (d, i);
            }
        }
        Ok(best)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lipschitz constant of the nodal data: the largest difference quotient
    /// over all node pairs. In 1D this equals the largest adjacent
    /// difference divided by h.
    pub fn lipschitz_constant(&self) -> f64 {
        let g = &self.grid;
        if g.dim() == 1 {
            return self
                .values
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() / g.h())
                .fold(0.0, f64::max);
        }
        let n = g.len();
        let mut best = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                let q = (self.values[a] - self.values[b]).abs() / g.distance(a, b);
                best = best.max(q);
            }
        }
        best
    }
}
