use serde::Serialize;

use super::{index_window, VerificationError};
use crate::field::ScalarField;
use crate::grid::Grid;

const SLACK: f64 = 1e-12;

/// The three numbers of the endpoint estimate at one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointTriple {
    pub radius: f64,
    /// Maximizing node on the discrete sphere of this radius.
    pub x_r: Vec<f64>,
    /// Smallest-radius slope at x_r; `None` when that ball leaves the grid.
    pub s_plus_at_x_r: Option<f64>,
    pub slope: f64,
    pub s_plus_at_center: f64,
    /// S₊(x_r) ≥ slope − tol and slope ≥ S₊(x) − tol.
    pub ordered: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    /// (max over the sphere of u − u(x)) / r.
    pub slopes: Vec<f64>,
    /// Nondecreasing within `tolerance`.
    pub monotone: bool,
    pub s_plus: f64,
    pub tolerance: f64,
    pub endpoints: Vec<EndpointTriple>,
    pub notes: Vec<String>,
}

/// Largest value on the annulus r − h < |y − x| ≤ r, lowest index on ties.
fn sphere_max(u: &ScalarField, center: usize, r: f64) -> Option<(f64, usize)> {
    let g: &Grid = u.grid();
    let reach = (r / g.h()).ceil() as usize + 1;
    let mut best: Option<(f64, usize)> = None;
    for y in index_window(g, center, reach) {
        let d = g.distance(center, y);
        if d <= r + SLACK && d > r - g.h() + SLACK {
            let v = u.get(y);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, y));
            }
        }
    }
    best
}

fn slope_at(u: &ScalarField, center: usize, r: f64) -> Option<(f64, usize)> {
    sphere_max(u, center, r).map(|(m, y)| ((m - u.get(center)) / r, y))
}

pub fn slope_analysis(
    u: &ScalarField,
    center: usize,
    radii: &[f64],
) -> Result<SlopeReport, VerificationError> {
    let g = u.grid();
    if center >= g.len() {
        return Err(VerificationError::Node(center));
    }
    let increasing = radii.windows(2).all(|w| w[0] < w[1]);
    if radii.is_empty() || radii[0] <= 0.0 || !increasing || radii.iter().any(|r| !r.is_finite()) {
        return Err(VerificationError::Radii(radii.to_vec()));
    }
    let dim = g.dim();
    let point = g.coords(center)[..dim].to_vec();
    for &r in radii {
        if !g.contains_ball(center, r) {
            return Err(VerificationError::BallExitsGrid {
                center: point,
                radius: r,
            });
        }
    }

    let tol = g.h();
    let r0 = radii[0];
    let mut slopes = Vec::with_capacity(radii.len());
    let mut argmax = Vec::with_capacity(radii.len());
    for &r in radii {
        let (s, y) = slope_at(u, center, r).ok_or(VerificationError::Radii(radii.to_vec()))?;
        slopes.push(s);
        argmax.push(y);
    }
    let s_plus = slopes[0];
    let monotone = slopes.windows(2).all(|w| w[1] >= w[0] - tol);

    let mut notes = Vec::new();
    let endpoints = radii
        .iter()
        .zip(&slopes)
        .zip(&argmax)
        .map(|((&radius, &slope), &x_r)| {
            let s_plus_at_x_r = g
                .contains_ball(x_r, r0)
                .then(|| slope_at(u, x_r, r0).map(|(s, _)| s))
                .flatten();
            if s_plus_at_x_r.is_none() {
                notes.push(format!(
                    "endpoint check skipped at r = {radius}: ball of radius {r0} around x_r leaves the grid"
                ));
            }
            EndpointTriple {
                radius,
                x_r: g.coords(x_r)[..dim].to_vec(),
                s_plus_at_x_r,
                slope,
                s_plus_at_center: s_plus,
                ordered: s_plus_at_x_r.map(|s| s >= slope - tol && slope >= s_plus - tol),
            }
        })
        .collect();

    Ok(SlopeReport {
        center: point,
        radii: radii.to_vec(),
        slopes,
        monotone,
        s_plus,
        tolerance: tol,
        endpoints,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn square(lo: f64, hi: f64, h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&[lo, lo], &[hi, hi], h).unwrap())
    }

    #[test]
    fn cone_slope_is_one_at_its_vertex() {
        let g = square(0.0, 1.0, 0.05);
        let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.5).hypot(p[1] - 0.5));
        let c = g.nearest(&[0.5, 0.5]).unwrap();
        let rep = slope_analysis(&u, c, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        for s in &rep.slopes {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(rep.monotone);
        for t in &rep.endpoints {
            assert!((t.s_plus_at_x_r.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(t.ordered, Some(true));
        }
    }

    #[test]
    fn square_at_origin_has_slope_r() {
        let h = 0.05;
        let g = Arc::new(Grid::new(&[-1.0], &[1.0], h).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| p[0] * p[0]);
        let c = g.nearest(&[0.0]).unwrap();
        let radii = [0.1, 0.2, 0.3, 0.4];
        let rep = slope_analysis(&u, c, &radii).unwrap();
        for (s, r) in rep.slopes.iter().zip(radii) {
            assert!((s - r).abs() <= h);
        }
        assert!(rep.slopes.windows(2).all(|w| w[1] > w[0]));
        assert!((rep.s_plus - 0.1).abs() < 1e-12);
        for t in &rep.endpoints {
            // ((r + r₀)² − r²)/r₀ = 2r + r₀
            let want = 2.0 * t.radius + 0.1;
            assert!((t.s_plus_at_x_r.unwrap() - want).abs() < 1e-9);
            assert_eq!(t.ordered, Some(true));
        }
    }

    #[test]
    fn plane_triple_is_all_ones() {
        let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.05).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| p[0]);
        let rep = slope_analysis(&u, g.nearest(&[0.5]).unwrap(), &[0.25]).unwrap();
        let t = &rep.endpoints[0];
        for v in [t.s_plus_at_x_r.unwrap(), t.slope, t.s_plus_at_center] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn annulus_is_half_open() {
        let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.1).unwrap());
        // the only larger value sits at distance exactly r − h
        let u = ScalarField::from_fn(g.clone(), |p| if (p[0] - 0.3).abs() < 1e-9 { 5.0 } else { 0.0 });
        let c = g.nearest(&[0.5]).unwrap();
        assert_eq!(slope_analysis(&u, c, &[0.3]).unwrap().slopes, [0.0]);
        assert!((slope_analysis(&u, c, &[0.2]).unwrap().slopes[0] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_balls_leaving_the_grid() {
        let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.1).unwrap());
        let u = ScalarField::constant(g.clone(), 0.0);
        let err = slope_analysis(&u, g.nearest(&[0.3]).unwrap(), &[0.2, 0.4]).unwrap_err();
        match err {
            VerificationError::BallExitsGrid { radius, .. } => assert_eq!(radius, 0.4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            slope_analysis(&u, 5, &[0.2, 0.1]),
            Err(VerificationError::Radii(_))
        ));
    }

    #[test]
    fn endpoint_skipped_near_the_edge() {
        let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.1).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| p[0]);
        let rep = slope_analysis(&u, g.nearest(&[0.5]).unwrap(), &[0.2, 0.5]).unwrap();
        assert!(rep.endpoints[1].s_plus_at_x_r.is_none());
        assert_eq!(rep.notes.len(), 1);
    }

    proptest::proptest! {
        // convex in 1D: the one-sided difference quotients grow with r
        #[test]
        fn convex_slopes_are_nondecreasing(
            a in 0.0..3.0f64,
            b in -2.0..2.0f64,
            k in 0.0..2.0f64,
            c in 0.2..0.8f64,
        ) {
            let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.025).unwrap());
            let u = ScalarField::from_fn(g.clone(), |p| a * p[0] * p[0] + b * p[0] + k * (p[0] - c).abs());
            let center = g.nearest(&[0.5]).unwrap();
            let rep = slope_analysis(&u, center, &[0.05, 0.1, 0.2, 0.3, 0.45]).unwrap();
            proptest::prop_assert!(rep.monotone);
            proptest::prop_assert!(rep.slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }
}
