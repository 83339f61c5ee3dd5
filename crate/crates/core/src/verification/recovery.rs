use serde::Serialize;

use super::VerificationError;
use crate::field::ScalarField;
use crate::operators::normalized_inf_laplacian;

/// Running cost read back from a value field, f̂ = −Δ∞u/|Du|².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    #[serde(skip)]
    pub recovered: ScalarField,
    #[serde(skip)]
    pub mask: Vec<bool>,
    pub theta: f64,
    pub masked_nodes: usize,
    pub interior_nodes: usize,
    /// Fraction of interior nodes where f̂ is defined.
    pub coverage: f64,
    pub sup_error: Option<f64>,
    pub sup_error_at: Option<Vec<f64>>,
    pub mean_error: Option<f64>,
    pub warnings: Vec<String>,
}

/// f̂ is defined where |Du| ≥ θ and set to 0 elsewhere. Errors against
/// `reference` are taken over the mask only.
pub fn recover_cost(
    u: &ScalarField,
    theta: f64,
    reference: Option<&ScalarField>,
) -> Result<RecoveryReport, VerificationError> {
    if let Some(r) = reference {
        if !r.same_grid(u) {
            return Err(VerificationError::GridMismatch);
        }
    }
    let (normalized, mask) = normalized_inf_laplacian(u, theta)?;
    let grid = u.grid().clone();
    let recovered = normalized.map(|v| -v + 0.0);
    let masked_nodes = mask.iter().filter(|&&m| m).count();
    let interior_nodes = grid.interior_count();
    let coverage = if interior_nodes == 0 {
        0.0
    } else {
        masked_nodes as f64 / interior_nodes as f64
    };

    let mut warnings = Vec::new();
    if masked_nodes == 0 {
        warnings.push(format!(
            "|Du| < theta = {theta} at every interior node; no cost can be recovered"
        ));
    }

    let (mut sup_error, mut sup_error_at, mut mean_error) = (None, None, None);
    if let (Some(r), true) = (reference, masked_nodes > 0) {
        let mut sup = (0.0f64, usize::MAX);
        let mut total = 0.0;
        for node in (0..grid.len()).filter(|&n| mask[n]) {
            let e = (recovered.get(node) - r.get(node)).abs();
            total += e;
            if e > sup.0 || sup.1 == usize::MAX {
                sup = (e, node);
            }
        }
        sup_error = Some(sup.0);
        sup_error_at = Some(grid.coords(sup.1)[..grid.dim()].to_vec());
        mean_error = Some(total / masked_nodes as f64);
    }

    Ok(RecoveryReport {
        recovered,
        mask,
        theta,
        masked_nodes,
        interior_nodes,
        coverage,
        sup_error,
        sup_error_at,
        mean_error,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::expr::FunctionSpec;
    use crate::grid::Grid;

    fn line(h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&[0.0], &[1.0], h).unwrap())
    }

    #[test]
    fn quadratic_recovers_its_cost_exactly() {
        let h = 0.05;
        let g = line(h);
        let u = ScalarField::sample(g.clone(), &FunctionSpec::parse("2*x - x^2").unwrap()).unwrap();
        let two = ScalarField::constant(g.clone(), 2.0);
        let rep = recover_cost(&u, h.sqrt(), Some(&two)).unwrap();
        assert!(rep.sup_error.unwrap() < 1e-10);
        // |u'| = 2|1 − x| drops below θ near the right end
        for node in g.interior() {
            let x = g.coords(node)[0];
            let grad = 2.0 * (1.0 - x);
            if (grad - h.sqrt()).abs() > 1e-3 {
                assert_eq!(rep.mask[node], grad >= h.sqrt(), "x = {x}");
            }
        }
        assert!(!rep.mask[g.nearest(&[0.95]).unwrap()]);
        assert!(rep.mask[g.nearest(&[0.5]).unwrap()]);
        assert!(rep.coverage > 0.5 && rep.coverage < 1.0);
    }

    #[test]
    fn symmetric_quadratic_masks_the_midpoint() {
        let h = 0.05;
        let g = line(h);
        let u = ScalarField::sample(g.clone(), &FunctionSpec::parse("x - x^2").unwrap()).unwrap();
        let rep = recover_cost(&u, h.sqrt(), Some(&ScalarField::constant(g.clone(), 2.0))).unwrap();
        assert!(!rep.mask[g.nearest(&[0.5]).unwrap()]);
        assert!(rep.sup_error.unwrap() < 1e-10);
    }

    #[test]
    fn constant_field_has_empty_mask() {
        let g = Arc::new(Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap());
        let rep = recover_cost(&ScalarField::constant(g, 3.0), 0.1, None).unwrap();
        assert_eq!(rep.coverage, 0.0);
        assert_eq!(rep.masked_nodes, 0);
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.sup_error.is_none());
        assert!(rep.recovered.values().iter().all(|v| *v == 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn rejects_bad_theta_and_mismatched_reference() {
        let u = ScalarField::constant(line(0.1), 0.0);
        assert!(recover_cost(&u, 0.0, None).is_err());
        let other = ScalarField::constant(line(0.05), 0.0);
        assert_eq!(recover_cost(&u, 0.1, Some(&other)), Err(VerificationError::GridMismatch));
    }
}
