//! Experiment-level checks on value fields: cost recovery, uniqueness gaps,
//! variable doubling, slope estimates and comparison with cones.

mod cones;
mod doubling;
mod recovery;
mod slope;
mod uniqueness;

pub use cones::{cone_comparison_check, ConeDirection, ConeReport};
pub use doubling::{doubling_diagnostic, DoublingReport};
pub use recovery::{recover_cost, RecoveryReport};
pub use slope::{slope_analysis, EndpointTriple, SlopeReport};
pub use uniqueness::{uniqueness_experiment, UniquenessReport};

use thiserror::Error;

use crate::game::GameError;
use crate::grid::Grid;
use crate::operators::OperatorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerificationError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("node {0} is not on the grid")]
    Node(usize),
    #[error("slope radii must be positive and strictly increasing, got {0:?}")]
    Radii(Vec<f64>),
    #[error("ball of radius {radius} around {center:?} leaves the grid")]
    BallExitsGrid { center: Vec<f64>, radius: f64 },
    #[error("box {lower:?}..{upper:?}: {reason}")]
    InvalidBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        reason: &'static str,
    },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Nodes whose multi-index lies within `reach` steps of `center` along every
/// axis, in increasing flat index order.
fn index_window(grid: &Grid, center: usize, reach: usize) -> impl Iterator<Item = usize> + '_ {
    let [i, j] = grid.multi_index(center);
    let counts = grid.counts();
    let (i0, i1) = (i.saturating_sub(reach), (i + reach).min(counts[0] - 1));
    let (j0, j1) = if grid.dim() == 2 {
        (j.saturating_sub(reach), (j + reach).min(counts[1] - 1))
    } else {
        (0, 0)
    };
    (j0..=j1).flat_map(move |b| (i0..=i1).map(move |a| grid.flat_index([a, b])))
}
