use std::sync::Arc;

use serde::Serialize;

use super::VerificationError;
use crate::expr::FunctionSpec;
use crate::field::ScalarField;
use crate::game::{solve_value, GameProblem, SolveOptions, SolveStats};
use crate::grid::Grid;

/// Sup-norm distance between the game values for two running costs that
/// share terminal data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub epsilon: f64,
    pub tol: f64,
    pub stats_f: SolveStats,
    pub stats_g: SolveStats,
    /// Omitted when either solve failed to converge.
    pub gap: Option<f64>,
    pub gap_at: Option<Vec<f64>>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub value_f: ScalarField,
    #[serde(skip)]
    pub value_g: ScalarField,
}

pub fn uniqueness_experiment(
    f: &FunctionSpec,
    g: &FunctionSpec,
    terminal: &FunctionSpec,
    grid: Arc<Grid>,
    epsilon: f64,
    opts: &SolveOptions,
) -> Result<UniquenessReport, VerificationError> {
    let pf = GameProblem::from_specs(grid.clone(), epsilon, f, terminal)?;
    let pg = GameProblem::from_specs(grid.clone(), epsilon, g, terminal)?;
    let (rf, rg) = rayon::join(|| solve_value(&pf, opts), || solve_value(&pg, opts));
    let ((value_f, stats_f), (value_g, stats_g)) = (rf?, rg?);

    let mut failed = Vec::new();
    if !stats_f.converged {
        failed.push(format!("solve with f = {} did not converge", f.source()));
    }
    if !stats_g.converged {
        failed.push(format!("solve with g = {} did not converge", g.source()));
    }
    let (gap, gap_at, failure) = if failed.is_empty() {
        let (d, node) = value_f.sup_distance_at(&value_g).expect("same grid");
        (Some(d), Some(grid.coords(node)[..grid.dim()].to_vec()), None)
    } else {
        (None, None, Some(failed.join("; ")))
    };
    Ok(UniquenessReport {
        epsilon,
        tol: opts.tol,
        stats_f,
        stats_g,
        gap,
        gap_at,
        failure,
        value_f,
        value_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: &str) -> FunctionSpec {
        FunctionSpec::parse(s).unwrap()
    }

    fn line() -> Arc<Grid> {
        Arc::new(Grid::new(&[0.0], &[1.0], 0.025).unwrap())
    }

    #[test]
    fn costs_one_and_two_separate_by_an_eighth() {
        let opts = SolveOptions::default();
        let rep = uniqueness_experiment(&spec("1"), &spec("2"), &spec("0"), line(), 0.025, &opts).unwrap();
        let gap = rep.gap.unwrap();
        // x(1−x) − x(1−x)/2 peaks at 1/8
        assert!((gap - 0.125).abs() <= 0.02, "gap {gap}");
        assert!((rep.gap_at.unwrap()[0] - 0.5).abs() <= 0.05);
        assert!(rep.stats_f.converged && rep.stats_g.converged);
    }

    #[test]
    fn identical_costs_have_no_gap() {
        let opts = SolveOptions::default();
        let rep = uniqueness_experiment(&spec("1"), &spec("1"), &spec("0"), line(), 0.025, &opts).unwrap();
        assert!(rep.gap.unwrap() <= 2.0 * opts.tol);
    }

    #[test]
    fn small_cost_perturbation_is_visible() {
        let opts = SolveOptions::default();
        let rep = uniqueness_experiment(&spec("1"), &spec("1.1"), &spec("0"), line(), 0.025, &opts).unwrap();
        let gap = rep.gap.unwrap();
        assert!(gap > 5.0 * opts.tol);
        // the ODE values differ by 0.05·x(1−x), at most 0.0125
        assert!((gap - 0.0125).abs() < 2e-3, "gap {gap}");
    }

    #[test]
    fn gap_is_symmetric() {
        let opts = SolveOptions::default();
        let g2 = Arc::new(Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap());
        let a = uniqueness_experiment(&spec("1 + x"), &spec("2"), &spec("x*y"), g2.clone(), 0.1, &opts).unwrap();
        let b = uniqueness_experiment(&spec("2"), &spec("1 + x"), &spec("x*y"), g2, 0.1, &opts).unwrap();
        assert_eq!(a.gap, b.gap);
        assert_eq!(a.gap_at, b.gap_at);
    }

    #[test]
    fn non_convergence_omits_the_gap() {
        let opts = SolveOptions {
            max_iter: 3,
            ..SolveOptions::default()
        };
        let rep = uniqueness_experiment(&spec("1"), &spec("2"), &spec("0"), line(), 0.025, &opts).unwrap();
        assert!(rep.gap.is_none());
        assert!(rep.failure.unwrap().contains("did not converge"));
    }
}
