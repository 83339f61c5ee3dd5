use rayon::prelude::*;
use serde::Serialize;

use super::VerificationError;
use crate::field::ScalarField;
use crate::grid::Grid;

/// Upper bound on scanned vertices; the vertex lattice is thinned until it fits.
const MAX_VERTICES: usize = 400;
/// Offsets b tried per vertex, besides b = u(x₀).
const OFFSET_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeDirection {
    Above,
    Below,
}

/// Outcome of a cone scan. This is a falsifier: a pass means no scanned
/// cone was violated, not that comparison holds for every cone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub direction: ConeDirection,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Largest amount by which u crosses a cone inside V; 0 when none does.
    pub worst_violation: f64,
    pub worst_vertex: Option<Vec<f64>>,
    pub worst_point: Option<Vec<f64>>,
    /// Cone a|x − x₀| + b realizing the worst violation.
    pub worst_slope: Option<f64>,
    pub worst_offset: Option<f64>,
    pub vertices_scanned: usize,
    pub vertex_stride: usize,
    pub offsets_per_vertex: usize,
}

struct Region {
    boundary: Vec<usize>,
    interior: Vec<usize>,
}

fn region(grid: &Grid, lower: &[f64], upper: &[f64]) -> Result<(Region, [[usize; 2]; 2]), VerificationError> {
    let bad = |reason| VerificationError::InvalidBox {
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        reason,
    };
    let dim = grid.dim();
    if lower.len() != dim || upper.len() != dim {
        return Err(bad("dimension differs from the grid"));
    }
    let h = grid.h();
    let mut ranges = [[0usize; 2]; 2];
    for a in 0..dim {
        let lo = ((lower[a] - grid.lower()[a]) / h - 1e-9).ceil();
        let hi = ((upper[a] - grid.lower()[a]) / h + 1e-9).floor();
        let n = grid.counts()[a] as f64;
        if !(lo >= 1.0 && hi <= n - 2.0) {
            return Err(bad("V must lie strictly inside the grid"));
        }
        if hi - lo < 2.0 {
            return Err(bad("V has no interior nodes"));
        }
        ranges[a] = [lo as usize, hi as usize];
    }
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for node in 0..grid.len() {
        let idx = grid.multi_index(node);
        let inside = (0..dim).all(|a| idx[a] >= ranges[a][0] && idx[a] <= ranges[a][1]);
        if !inside {
            continue;
        }
        let on_face = (0..dim).any(|a| idx[a] == ranges[a][0] || idx[a] == ranges[a][1]);
        if on_face {
            boundary.push(node);
        } else {
            interior.push(node);
        }
    }
    Ok((Region { boundary, interior }, ranges))
}

/// Scans cones c(x) = a|x − x₀| + b with vertices on grid nodes outside V
/// within 2·diam(V) of it. For each vertex and offset b the slope is fitted
/// so that c touches u on ∂V; the report records the largest amount by
/// which u then crosses c inside V.
pub fn cone_comparison_check(
    u: &ScalarField,
    lower: &[f64],
    upper: &[f64],
    direction: ConeDirection,
    tolerance: f64,
) -> Result<ConeReport, VerificationError> {
    let grid = u.grid();
    let dim = grid.dim();
    let (v, ranges) = region(grid, lower, upper)?;
    let h = grid.h();
    let diam = (0..dim)
        .map(|a| (ranges[a][1] - ranges[a][0]) as f64 * h)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt();
    let dist_to_box = |node: usize| {
        let idx = grid.multi_index(node);
        (0..dim)
            .map(|a| {
                let gap = if idx[a] < ranges[a][0] {
                    ranges[a][0] - idx[a]
                } else {
                    idx[a].saturating_sub(ranges[a][1])
                };
                (gap as f64 * h).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&n| {
            let d = dist_to_box(n);
            d > 0.0 && d <= 2.0 * diam + 1e-12
        })
        .collect();
    let mut stride = 1;
    let vertices = loop {
        let picked: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&n| grid.multi_index(n)[..dim].iter().all(|i| i % stride == 0))
            .collect();
        if picked.len() <= MAX_VERTICES {
            break picked;
        }
        stride += 1;
    };

    let in_v = || v.boundary.iter().chain(&v.interior).map(|&n| u.get(n));
    let (u_min, u_max) = in_v().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let osc = (u_max - u_min).max(h);
    let offsets: Vec<f64> = (0..=OFFSET_STEPS)
        .map(|k| u_min - osc + 3.0 * osc * k as f64 / OFFSET_STEPS as f64)
        .collect();
    let sign = match direction {
        ConeDirection::Above => 1.0,
        ConeDirection::Below => -1.0,
    };

    // (violation, vertex position, offset position, interior node, a, b)
    type Hit = (f64, usize, usize, usize, f64, f64);
    let better = |p: Hit, q: Hit| {
        if q.0 > p.0 || (q.0 == p.0 && (q.1, q.2) < (p.1, p.2)) {
            q
        } else {
            p
        }
    };
    let worst: Option<Hit> = vertices
        .par_iter()
        .enumerate()
        .filter_map(|(vi, &x0)| {
            let mut best: Option<Hit> = None;
            let own = std::iter::once(u.get(x0));
            for (bi, b) in own.chain(offsets.iter().copied()).enumerate() {
                // From below, fit −u against the cone −c.
                let a = v
                    .boundary
                    .iter()
                    .map(|&y| sign * (u.get(y) - b) / grid.distance(x0, y))
                    .fold(f64::NEG_INFINITY, f64::max)
                    * sign;
                for &y in &v.interior {
                    let c = b + a * grid.distance(x0, y);
                    let viol = sign * (u.get(y) - c);
                    let hit = (viol, vi, bi, y, a, b);
                    best = Some(best.map_or(hit, |p| better(p, hit)));
                }
            }
            best
        })
        .reduce_with(better);

    let (worst_violation, worst_vertex, worst_point, worst_slope, worst_offset) = match worst {
        Some((viol, vi, _, y, a, b)) if viol > 0.0 => (
            viol,
            Some(grid.coords(vertices[vi])[..dim].to_vec()),
            Some(grid.coords(y)[..dim].to_vec()),
            Some(a),
            Some(b),
        ),
        _ => (0.0, None, None, None, None),
    };
    Ok(ConeReport {
        direction,
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        tolerance,
        pass: worst_violation <= tolerance,
        worst_violation,
        worst_vertex,
        worst_point,
        worst_slope,
        worst_offset,
        vertices_scanned: vertices.len(),
        vertex_stride: stride,
        offsets_per_vertex: offsets.len() + 1,
    })
}
