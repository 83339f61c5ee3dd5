//! Closed-form reference functions with the equations they satisfy.

use std::sync::Arc;

use serde::Serialize;

use crate::expr::FunctionSpec;
use crate::grid::{Grid, GridError};
use crate::operators::{Form, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    /// Every node of the validity region passes.
    Pass,
    /// Every node of the validity region fails.
    FailEverywhere,
    /// At least one node of the validity region fails.
    FailSomewhere,
}

/// One classification statement: running the viscosity check with this
/// form, role and constant cost yields `expect`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Claim {
    pub form: Form,
    pub role: Role,
    pub cost: f64,
    pub expect: Expectation,
}

impl Claim {
    const fn new(form: Form, role: Role, cost: f64, expect: Expectation) -> Self {
        Self {
            form,
            role,
            cost,
            expect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSolution {
    pub name: &'static str,
    pub expression: &'static str,
    pub dim: usize,
    /// Box the function is sampled on.
    pub domain: (Vec<f64>, Vec<f64>),
    /// Sub-box where the claims hold and stencils stay clear of singular sets.
    pub validity: (Vec<f64>, Vec<f64>),
    /// Running cost the entry is usually paired with.
    pub running_cost: Option<f64>,
    /// Check tolerance is `tol_scale · h²`.
    pub tol_scale: f64,
    /// Default grid spacing for checks.
    pub test_h: f64,
    pub notes: &'static str,
    pub claims: Vec<Claim>,
}

impl ReferenceSolution {
    pub fn function(&self) -> FunctionSpec {
        FunctionSpec::parse(self.expression).expect("catalog expressions parse")
    }

    pub fn grid(&self, h: f64) -> Result<Arc<Grid>, GridError> {
        Grid::new(&self.domain.0, &self.domain.1, h).map(Arc::new)
    }

    pub fn tolerance(&self, h: f64) -> f64 {
        self.tol_scale * h * h
    }
}

fn boxed(lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (lower.to_vec(), upper.to_vec())
}

/// Claims for an infinity-harmonic function: passes both forms and roles
/// with zero running cost.
fn harmonic_claims() -> Vec<Claim> {
    use Expectation::Pass;
    vec![
        Claim::new(Form::Ratio, Role::Sub, 0.0, Pass),
        Claim::new(Form::Ratio, Role::Super, 0.0, Pass),
        Claim::new(Form::Product, Role::Sub, 0.0, Pass),
        Claim::new(Form::Product, Role::Super, 0.0, Pass),
    ]
}

/// Claims for a solution of the ratio equation with constant cost `f`.
fn ratio_solution_claims(f: f64) -> Vec<Claim> {
    use Expectation::{FailEverywhere, Pass};
    vec![
        Claim::new(Form::Ratio, Role::Sub, f, Pass),
        Claim::new(Form::Ratio, Role::Super, f, Pass),
        Claim::new(Form::Product, Role::Sub, f, Pass),
        Claim::new(Form::Product, Role::Super, f, Pass),
        // shifting the cost by one breaks one side at every node
        Claim::new(Form::Ratio, Role::Super, f + 1.0, FailEverywhere),
        Claim::new(Form::Ratio, Role::Sub, f - 1.0, FailEverywhere),
    ]
}

pub fn catalog() -> Vec<ReferenceSolution> {
    use Expectation::*;
    vec![
        ReferenceSolution {
            name: "plane",
            expression: "x + 0.5*y - 0.25",
            dim: 2,
            domain: boxed(&[0.0, 0.0], &[1.0, 1.0]),
            validity: boxed(&[0.0, 0.0], &[1.0, 1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "affine; infinity harmonic everywhere",
            claims: harmonic_claims(),
        },
        ReferenceSolution {
            name: "plane1d",
            expression: "2*x - 1",
            dim: 1,
            domain: boxed(&[0.0], &[1.0]),
            validity: boxed(&[0.0], &[1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "affine; infinity harmonic everywhere",
            claims: harmonic_claims(),
        },
        ReferenceSolution {
            name: "cone",
            expression: "sqrt((x - 0.5)^2 + (y - 0.5)^2)",
            dim: 2,
            domain: boxed(&[0.0, 0.0], &[1.0, 1.0]),
            validity: boxed(&[0.8, 0.0], &[1.0, 1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.025,
            notes: "|x − (0.5, 0.5)|; infinity harmonic off the vertex",
            claims: harmonic_claims(),
        },
        ReferenceSolution {
            name: "cone1d",
            expression: "abs(x - 0.5)",
            dim: 1,
            domain: boxed(&[0.0], &[1.0]),
            validity: boxed(&[0.6], &[1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "|x − 0.5|; kink at the vertex",
            claims: harmonic_claims(),
        },
        ReferenceSolution {
            name: "aronsson43",
            expression: "x^(4/3) - y^(4/3)",
            dim: 2,
            domain: boxed(&[0.0, 0.0], &[2.0, 2.0]),
            validity: boxed(&[0.5, 0.5], &[2.0, 2.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.025,
            notes: "infinity harmonic; smooth off the axes, only C^{1,1/3} across them",
            claims: harmonic_claims(),
        },
        ReferenceSolution {
            name: "zero-counterexample",
            expression: "0",
            dim: 1,
            domain: boxed(&[0.0], &[1.0]),
            validity: boxed(&[0.0], &[1.0]),
            running_cost: Some(-1.0),
            tol_scale: 0.0,
            test_h: 0.05,
            notes: "solves (u')²u'' = (u')² but not (u')²u''/(u')² = 1",
            claims: vec![
                Claim::new(Form::Product, Role::Sub, -1.0, Pass),
                Claim::new(Form::Product, Role::Super, -1.0, Pass),
                Claim::new(Form::Ratio, Role::Sub, -1.0, FailEverywhere),
                Claim::new(Form::Ratio, Role::Super, -1.0, Pass),
            ],
        },
        ReferenceSolution {
            name: "quad-f2",
            expression: "2*x - x^2",
            dim: 1,
            domain: boxed(&[0.0], &[1.0]),
            validity: boxed(&[0.0], &[1.0]),
            running_cost: Some(2.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "u'' = −2 with u(0) = 0, u(1) = 1; gradient vanishes at x = 1",
            claims: ratio_solution_claims(2.0),
        },
        ReferenceSolution {
            name: "quad-f1",
            expression: "(x - x^2)/2",
            dim: 1,
            domain: boxed(&[0.0], &[1.0]),
            validity: boxed(&[0.0], &[1.0]),
            running_cost: Some(1.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "u'' = −1 with zero boundary data; degenerate interior node at x = 0.5",
            claims: ratio_solution_claims(1.0),
        },
        ReferenceSolution {
            name: "square",
            expression: "x^2",
            dim: 1,
            domain: boxed(&[-1.0], &[1.0]),
            validity: boxed(&[-1.0], &[1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "Δ∞u = 8x² ≥ 0: subsolution with zero cost, strict away from 0",
            claims: vec![
                Claim::new(Form::Product, Role::Sub, 0.0, Pass),
                Claim::new(Form::Ratio, Role::Sub, 0.0, Pass),
                Claim::new(Form::Ratio, Role::Super, 0.0, FailEverywhere),
                Claim::new(Form::Product, Role::Super, 0.0, FailSomewhere),
            ],
        },
        ReferenceSolution {
            name: "bowl",
            expression: "x^2 + y^2",
            dim: 2,
            domain: boxed(&[-1.0, -1.0], &[1.0, 1.0]),
            validity: boxed(&[-1.0, -1.0], &[1.0, 1.0]),
            running_cost: Some(0.0),
            tol_scale: 10.0,
            test_h: 0.05,
            notes: "Δ∞u = 8|x|² ≥ 0; subsolution, not a supersolution",
            claims: vec![
                Claim::new(Form::Product, Role::Sub, 0.0, Pass),
                Claim::new(Form::Ratio, Role::Sub, 0.0, Pass),
                Claim::new(Form::Ratio, Role::Super, 0.0, FailEverywhere),
                Claim::new(Form::Ratio, Role::Sub, -2.0, Pass),
                Claim::new(Form::Ratio, Role::Super, -2.0, Pass),
            ],
        },
    ]
}

pub fn lookup(name: &str) -> Option<ReferenceSolution> {
    catalog().into_iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    catalog().iter().map(|s| s.name).collect()
}
