use rayon::prelude::*;
use serde::Serialize;

use super::{index_window, VerificationError};
use crate::field::ScalarField;

/// Maximizer of w(x, y) = u(x) − v(y) − |x − y|²/(2ε) over all node pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub epsilon: f64,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub gap: f64,
    pub w_max: f64,
    pub gap_over_eps: f64,
    /// Pairs actually evaluated after pruning.
    pub pairs_evaluated: u64,
}

#[derive(Clone, Copy)]
struct Best {
    w: f64,
    x: usize,
    y: usize,
}

impl Best {
    /// Larger w wins; ties go to the lower (x, y) pair.
    fn pick(self, other: Best) -> Best {
        if other.w > self.w || (other.w == self.w && (other.x, other.y) < (self.x, self.y)) {
            other
        } else {
            self
        }
    }
}

/// Exhaustive maximization of w. A pair can only beat the best diagonal
/// value m when |x − y|² ≤ 2ε(u(x) − min v − m), so each x scans only that
/// window; this prunes strictly dominated pairs and leaves the result
/// identical to the full O(N²) scan.
pub fn doubling_diagnostic(
    u: &ScalarField,
    v: &ScalarField,
    epsilon: f64,
) -> Result<DoublingReport, VerificationError> {
    if !u.same_grid(v) {
        return Err(VerificationError::GridMismatch);
    }
    if !(epsilon > 0.0) {
        return Err(VerificationError::Epsilon(epsilon));
    }
    let grid = u.grid();
    let n = grid.len();
    let h = grid.h();
    let coords: Vec<[f64; 2]> = (0..n).map(|i| grid.coords(i)).collect();
    let w = |x: usize, y: usize| {
        let d2 = (coords[x][0] - coords[y][0]).powi(2) + (coords[x][1] - coords[y][1]).powi(2);
        u.get(x) - v.get(y) - d2 / (2.0 * epsilon)
    };

    let diagonal = (0..n)
        .map(|i| Best { w: w(i, i), x: i, y: i })
        .reduce(Best::pick)
        .expect("grids are non-empty");
    let floor = diagonal.w;
    let v_min = v.min();

    let (best, evaluated) = (0..n)
        .into_par_iter()
        .map(|x| {
            let slack = u.get(x) - v_min - floor;
            if slack < 0.0 {
                return (None, 0u64);
            }
            let reach = ((2.0 * epsilon * slack).sqrt() / h).ceil() as usize + 1;
            let mut best: Option<Best> = None;
            let mut count = 0u64;
            for y in index_window(grid, x, reach) {
                count += 1;
                let cand = Best { w: w(x, y), x, y };
                best = Some(match best {
                    Some(b) => b.pick(cand),
                    None => cand,
                });
            }
            (best, count)
        })
        .reduce(
            || (None, 0),
            |(a, ca), (b, cb)| {
                let m = match (a, b) {
                    (Some(a), Some(b)) => Some(a.pick(b)),
                    (a, b) => a.or(b),
                };
                (m, ca + cb)
            },
        );
    let best = best.map_or(diagonal, |b| b.pick(diagonal));

    let dim = grid.dim();
    let gap = grid.distance(best.x, best.y);
    Ok(DoublingReport {
        epsilon,
        x_bar: coords[best.x][..dim].to_vec(),
        y_bar: coords[best.y][..dim].to_vec(),
        gap,
        w_max: best.w,
        gap_over_eps: gap / epsilon,
        pairs_evaluated: evaluated,
    })
}
