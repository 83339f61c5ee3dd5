//! Central-difference operators on grid fields and the pointwise
//! viscosity classifier for the normalized and product forms of the
//! infinity-Laplacian equation with running cost.
//!
//! All operators are evaluated on interior nodes only. Boundary entries of
//! returned fields are zero and carry no meaning.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, FunctionSpec};
use crate::field::ScalarField;
use crate::grid::{Grid, Point};

/// Finite-difference step for Hamiltonian partials not given explicitly.
pub const DEFAULT_DIFF_STEP: f64 = 1e-5;
const DERIVATIVE_AGREEMENT: f64 = 1e-4;
const PROBE_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("{what} expects a {expected}D grid, got {found}D")]
    Arity {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("explicit derivative {name} disagrees with central differences of H at {probe:?}: {explicit} vs {numeric}")]
    DerivativeMismatch {
        name: String,
        probe: Vec<f64>,
        explicit: f64,
        numeric: f64,
    },
    #[error("could not find probe points where H and its derivatives evaluate")]
    NoProbePoints,
    #[error("evaluating {what} at node {node}: {err}")]
    Eval {
        what: String,
        node: usize,
        err: EvalError,
    },
    #[error("degeneracy threshold theta must be positive, got {0}")]
    Theta(f64),
}

pub type Vector = [f64; 2];
/// Symmetric matrix stored as [[a, b], [b, c]].
pub type Matrix = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<Vector>,
}

impl VectorField {
    pub fn get(&self, node: usize) -> Vector {
        self.values[node]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn norm(&self, node: usize) -> f64 {
        let v = self.values[node];
        v[0].hypot(v[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: Arc<Grid>,
    values: Vec<Matrix>,
}

impl MatrixField {
    pub fn get(&self, node: usize) -> Matrix {
        self.values[node]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// v·M·v, restricted to the first `dim` components.
#[inline]
pub fn quad_form(m: &Matrix, v: &Vector, dim: usize) -> f64 {
    if dim == 1 {
        m[0][0] * v[0] * v[0]
    } else {
        m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1]
    }
}

#[inline]
fn dot(a: &Vector, b: &Vector, dim: usize) -> f64 {
    (0..dim).map(|i| a[i] * b[i]).sum()
}

/// (min, max) eigenvalue; in 1D both are the single entry.
pub fn eigen_extremes(m: &Matrix, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (m[0][0], m[0][0]);
    }
    let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
    let mid = 0.5 * (a + c);
    let rad = 0.5 * ((a - c).powi(2) + 4.0 * b * b).sqrt();
    (mid - rad, mid + rad)
}

fn interior_map<T: Send + Default + Copy>(
    grid: &Grid,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| if grid.is_interior(i) { f(i) } else { T::default() })
        .collect()
}

fn try_interior_map(
    grid: &Grid,
    f: impl Fn(usize) -> Result<f64, OperatorError> + Sync + Send,
) -> Result<Vec<f64>, OperatorError> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| if grid.is_interior(i) { f(i) } else { Ok(0.0) })
        .collect()
}

fn axis_diff(u: &ScalarField, node: usize, axis: usize) -> f64 {
    let g = u.grid();
    let plus = g.step(node, axis, 1).expect("interior node has axis neighbors");
    let minus = g.step(node, axis, -1).expect("interior node has axis neighbors");
    (u.get(plus) - u.get(minus)) / (2.0 * g.h())
}

fn gradient_at(u: &ScalarField, node: usize) -> Vector {
    let mut v = [0.0; 2];
    for (axis, slot) in v.iter_mut().enumerate().take(u.grid().dim()) {
        *slot = axis_diff(u, node, axis);
    }
    v
}

fn hessian_at(u: &ScalarField, node: usize) -> Matrix {
    let g = u.grid();
    let h2 = g.h() * g.h();
    let center = u.get(node);
    let second = |axis: usize| {
        let p = g.step(node, axis, 1).unwrap();
        let m = g.step(node, axis, -1).unwrap();
        (u.get(p) - 2.0 * center + u.get(m)) / h2
    };
    let a = second(0);
    if g.dim() == 1 {
        return [[a, 0.0], [0.0, 0.0]];
    }
    let c = second(1);
    let [i, j] = g.multi_index(node);
    let at = |di: isize, dj: isize| {
        u.get(g.flat_index([(i as isize + di) as usize, (j as isize + dj) as usize]))
    };
    let b = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h2);
    [[a, b], [b, c]]
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let g = u.grid().clone();
    let values = interior_map(&g, |i| gradient_at(u, i));
    VectorField { grid: g, values }
}

pub fn hessian(u: &ScalarField) -> MatrixField {
    let g = u.grid().clone();
    let values = interior_map(&g, |i| hessian_at(u, i));
    MatrixField { grid: g, values }
}

/// Du·D²u·Du.
pub fn infinity_laplacian(u: &ScalarField) -> ScalarField {
    let g = u.grid().clone();
    let dim = g.dim();
    let values = interior_map(&g, |i| quad_form(&hessian_at(u, i), &gradient_at(u, i), dim));
    ScalarField::from_values_unchecked(g, values)
}

/// Δ∞u/|Du|² where |Du| ≥ θ. The mask is false on boundary nodes and where
/// the gradient is below the threshold; the value there is 0.
pub fn normalized_inf_laplacian(
    u: &ScalarField,
    theta: f64,
) -> Result<(ScalarField, Vec<bool>), OperatorError> {
    if !(theta > 0.0) {
        return Err(OperatorError::Theta(theta));
    }
    let g = u.grid().clone();
    let dim = g.dim();
    let pairs: Vec<(f64, bool)> = interior_map(&g, |i| {
        let p = gradient_at(u, i);
        let n2 = dot(&p, &p, dim);
        if n2.sqrt() >= theta {
            (quad_form(&hessian_at(u, i), &p, dim) / n2, true)
        } else {
            (0.0, false)
        }
    });
    let (values, mask) = pairs.into_iter().unzip();
    Ok((ScalarField::from_values_unchecked(g, values), mask))
}

/// Explicit partial derivatives of a Hamiltonian. Missing entries are
/// replaced by central differences of H.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partials {
    pub h_x: [Option<FunctionSpec>; 2],
    pub h_z: Option<FunctionSpec>,
    pub h_p: [Option<FunctionSpec>; 2],
}

/// H(x, z, p) with its partials.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    dim: usize,
    h: FunctionSpec,
    partials: Partials,
    step: f64,
}

#[derive(Clone, Copy)]
enum Arg {
    X(usize),
    Z,
    P(usize),
}

struct State {
    point: Point,
    z: f64,
    p: Vector,
}

impl State {
    fn bindings(&self, dim: usize) -> Bindings {
        Bindings::at_state(self.point, dim, self.z, self.p)
    }

    fn shifted(&self, arg: Arg, by: f64) -> State {
        let mut s = State {
            point: self.point,
            z: self.z,
            p: self.p,
        };
        match arg {
            Arg::X(i) => s.point[i] += by,
            Arg::Z => s.z += by,
            Arg::P(i) => s.p[i] += by,
        }
        s
    }
}

impl HamiltonianSpec {
    /// Validates every explicit partial against central differences of H at
    /// ten seeded probe points drawn from [−1, 1] in each argument.
    pub fn new(dim: usize, h: FunctionSpec, partials: Partials, step: f64) -> Result<Self, OperatorError> {
        let spec = Self {
            dim,
            h,
            partials,
            step,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// ½|p|² with exact partials.
    pub fn half_norm_squared(dim: usize) -> Self {
        let parse = |s: &str| FunctionSpec::parse(s).expect("builtin expression");
        let (h, h_p) = if dim == 1 {
            ("0.5*p1^2", [Some(parse("p1")), None])
        } else {
            ("0.5*(p1^2 + p2^2)", [Some(parse("p1")), Some(parse("p2"))])
        };
        Self {
            dim,
            h: parse(h),
            partials: Partials {
                h_x: [Some(parse("0")), (dim == 2).then(|| parse("0"))],
                h_z: Some(parse("0")),
                h_p,
            },
            step: DEFAULT_DIFF_STEP,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &FunctionSpec {
        &self.h
    }

    fn explicit(&self, arg: Arg) -> Option<&FunctionSpec> {
        match arg {
            Arg::X(i) => self.partials.h_x[i].as_ref(),
            Arg::Z => self.partials.h_z.as_ref(),
            Arg::P(i) => self.partials.h_p[i].as_ref(),
        }
    }

    fn numeric(&self, s: &State, arg: Arg) -> Result<f64, EvalError> {
        let hi = self.h.eval(&s.shifted(arg, self.step).bindings(self.dim))?;
        let lo = self.h.eval(&s.shifted(arg, -self.step).bindings(self.dim))?;
        Ok((hi - lo) / (2.0 * self.step))
    }

    fn partial(&self, s: &State, arg: Arg) -> Result<f64, EvalError> {
        match self.explicit(arg) {
            Some(f) => f.eval(&s.bindings(self.dim)),
            None => self.numeric(s, arg),
        }
    }

    fn args(&self) -> Vec<(Arg, String)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            out.push((Arg::X(i), format!("H_{}", ["x", "y"][i])));
        }
        out.push((Arg::Z, "H_z".to_string()));
        for i in 0..self.dim {
            out.push((Arg::P(i), format!("H_p{}", i + 1)));
        }
        out
    }

    fn validate(&self) -> Result<(), OperatorError> {
        let explicit: Vec<_> = self
            .args()
            .into_iter()
            .filter(|(a, _)| self.explicit(*a).is_some())
            .collect();
        if explicit.is_empty() {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ab1e);
        let mut accepted = 0;
        for _ in 0..100 * PROBE_POINTS {
            if accepted == PROBE_POINTS {
                break;
            }
            let mut draw = || rng.random_range(-1.0..=1.0);
            let s = State {
                point: [draw(), if self.dim == 2 { draw() } else { 0.0 }],
                z: draw(),
                p: [draw(), if self.dim == 2 { draw() } else { 0.0 }],
            };
            let mut ok = true;
            let mut checks = Vec::new();
            for (arg, name) in &explicit {
                let e = self.explicit(*arg).unwrap().eval(&s.bindings(self.dim));
                let n = self.numeric(&s, *arg);
                match (e, n) {
                    (Ok(e), Ok(n)) => checks.push((name, e, n)),
                    _ => ok = false,
                }
            }
            if !ok {
                continue;
            }
            accepted += 1;
            for (name, e, n) in checks {
                if (e - n).abs() > DERIVATIVE_AGREEMENT {
                    let mut probe = s.point[..self.dim].to_vec();
                    probe.push(s.z);
                    probe.extend_from_slice(&s.p[..self.dim]);
                    return Err(OperatorError::DerivativeMismatch {
                        name: name.clone(),
                        probe,
                        explicit: e,
                        numeric: n,
                    });
                }
            }
        }
        if accepted < PROBE_POINTS {
            return Err(OperatorError::NoProbePoints);
        }
        Ok(())
    }
}

fn check_dim(what: &'static str, expected: usize, grid: &Grid) -> Result<(), OperatorError> {
    if expected != grid.dim() {
        return Err(OperatorError::Arity {
            what,
            expected,
            found: grid.dim(),
        });
    }
    Ok(())
}

/// A_H(u) = H_p·D_x(H(x, u, Du)), expanded by the chain rule as
/// H_p·H_x + H_z (H_p·Du) + H_p·D²u·H_p at (x, u(x), Du(x)).
pub fn aronsson_apply(ham: &HamiltonianSpec, u: &ScalarField) -> Result<ScalarField, OperatorError> {
    let g = u.grid().clone();
    check_dim("Hamiltonian", ham.dim, &g)?;
    let dim = g.dim();
    let values = try_interior_map(&g, |node| {
        let s = State {
            point: g.coords(node),
            z: u.get(node),
            p: gradient_at(u, node),
        };
        let d2u = hessian_at(u, node);
        let wrap = |what: String| move |err| OperatorError::Eval { what, node, err };
        let mut h_p = [0.0; 2];
        let mut h_x = [0.0; 2];
        for i in 0..dim {
            h_p[i] = ham.partial(&s, Arg::P(i)).map_err(wrap(format!("H_p{}", i + 1)))?;
            h_x[i] = ham.partial(&s, Arg::X(i)).map_err(wrap("H_x".into()))?;
        }
        let h_z = ham.partial(&s, Arg::Z).map_err(wrap("H_z".into()))?;
        Ok(dot(&h_p, &h_x, dim) + h_z * dot(&h_p, &s.p, dim) + quad_form(&d2u, &h_p, dim))
    })?;
    Ok(ScalarField::from_values_unchecked(g, values))
}

/// B(x, z, p) and c(x, z, p) of the operator B·D²u·B + c.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralOperatorSpec {
    b: Vec<FunctionSpec>,
    c: FunctionSpec,
}

impl GeneralOperatorSpec {
    pub fn new(b: Vec<FunctionSpec>, c: FunctionSpec) -> Self {
        Self { b, c }
    }

    /// B = p, c = 0: the infinity Laplacian.
    pub fn gradient_direction(dim: usize) -> Self {
        let parse = |s: &str| FunctionSpec::parse(s).expect("builtin expression");
        let b = ["p1", "p2"][..dim].iter().map(|s| parse(s)).collect();
        Self::new(b, parse("0"))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

pub fn general_operator_apply(
    spec: &GeneralOperatorSpec,
    u: &ScalarField,
) -> Result<ScalarField, OperatorError> {
    let g = u.grid().clone();
    check_dim("B", spec.b.len(), &g)?;
    let dim = g.dim();
    let values = try_interior_map(&g, |node| {
        let env = Bindings::at_state(g.coords(node), dim, u.get(node), gradient_at(u, node));
        let mut b = [0.0; 2];
        for (i, bi) in spec.b.iter().enumerate() {
            b[i] = bi.eval(&env).map_err(|err| OperatorError::Eval {
                what: format!("B{}", i + 1),
                node,
                err,
            })?;
        }
        let c = spec.c.eval(&env).map_err(|err| OperatorError::Eval {
            what: "c".into(),
            node,
            err,
        })?;
        Ok(quad_form(&hessian_at(u, node), &b, dim) + c)
    })?;
    Ok(ScalarField::from_values_unchecked(g, values))
}

/// Which equation is tested: Δ∞u/|Du|² = −f or Δ∞u + f|Du|² = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Ratio,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sub,
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeVerdict {
    pub node: usize,
    pub point: Vec<f64>,
    pub role: Role,
    pub grad_norm: f64,
    pub degenerate: bool,
    /// Signed residual; zero for an exact solution. Sub passes when
    /// residual ≥ −tol, super when residual ≤ tol.
    pub residual: f64,
    pub pass: bool,
    /// Extremal Hessian eigenvalue used at degenerate nodes (ratio form).
    pub eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscosityVerdict {
    pub form: Form,
    pub role: Role,
    pub theta: f64,
    pub tol: f64,
    pub nodes: Vec<NodeVerdict>,
    pub notes: Vec<String>,
}

impl ViscosityVerdict {
    pub fn all_pass(&self) -> bool {
        self.nodes.iter().all(|n| n.pass)
    }

    pub fn all_fail(&self) -> bool {
        self.nodes.iter().all(|n| !n.pass)
    }

    pub fn fail_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.pass).count()
    }

    pub fn worst_residual(&self) -> f64 {
        let sign = match self.role {
            Role::Sub => -1.0,
            Role::Super => 1.0,
        };
        self.nodes
            .iter()
            .map(|n| sign * n.residual)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Keeps only nodes inside the closed box [lower, upper].
    pub fn restrict(mut self, lower: &[f64], upper: &[f64]) -> Self {
        self.nodes.retain(|n| {
            n.point
                .iter()
                .enumerate()
                .all(|(a, &x)| x >= lower[a] - 1e-12 && x <= upper[a] + 1e-12)
        });
        self
    }
}

/// Pointwise test of u against the running-cost equation, using the
/// discrete derivatives of u itself in place of touching test functions.
///
/// Ratio form: where |Du| ≥ θ the residual is Δ∞u/|Du|² + f; below θ it is
/// λ + f with λ the largest (sub) or smallest (super) Hessian eigenvalue.
/// Product form: the residual is Δ∞u + f|Du|² at every node.
pub fn viscosity_check(
    u: &ScalarField,
    f: &ScalarField,
    form: Form,
    role: Role,
    theta: f64,
    tol: f64,
) -> Result<ViscosityVerdict, OperatorError> {
    if !(theta > 0.0) {
        return Err(OperatorError::Theta(theta));
    }
    let g = u.grid();
    let dim = g.dim();
    let nodes: Vec<NodeVerdict> = g
        .interior()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|node| {
            let p = gradient_at(u, node);
            let d2u = hessian_at(u, node);
            let n2 = dot(&p, &p, dim);
            let grad_norm = n2.sqrt();
            let degenerate = grad_norm < theta;
            let cost = f.get(node);
            let (residual, eigenvalue) = match form {
                Form::Product => (quad_form(&d2u, &p, dim) + cost * n2, None),
                Form::Ratio if !degenerate => (quad_form(&d2u, &p, dim) / n2 + cost, None),
                Form::Ratio => {
                    let (lo, hi) = eigen_extremes(&d2u, dim);
                    let lambda = match role {
                        Role::Sub => hi,
                        Role::Super => lo,
                    };
                    (lambda + cost, Some(lambda))
                }
            };
            let pass = match role {
                Role::Sub => residual >= -tol,
                Role::Super => residual <= tol,
            };
            NodeVerdict {
                node,
                point: g.coords(node)[..dim].to_vec(),
                role,
                grad_norm,
                degenerate,
                residual,
                pass,
                eigenvalue,
            }
        })
        .collect();
    let mut notes = Vec::new();
    let degenerate = nodes.iter().filter(|n| n.degenerate).count();
    if form == Form::Ratio && degenerate > 0 {
        notes.push(format!(
            "{degenerate} node(s) used the eigenvalue branch on the discrete Hessian of u; \
             this surrogate is not a certified touching-test-function check"
        ));
    }
    Ok(ViscosityVerdict {
        form,
        role,
        theta,
        tol,
        nodes,
        notes,
    })
}
