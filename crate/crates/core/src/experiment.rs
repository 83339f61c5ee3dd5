//! Runs one configured experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FieldSource, OperatorConfig, OperatorKind, Selector};
use crate::expr::FunctionSpec;
use crate::field::ScalarField;
use crate::game::{default_step_cap, estimate_value_mc, solve_value, GameProblem, SolveStats};
use crate::grid::Grid;
use crate::operators::{
    aronsson_apply, general_operator_apply, infinity_laplacian, normalized_inf_laplacian,
    viscosity_check, GeneralOperatorSpec, HamiltonianSpec, Partials, ViscosityVerdict,
};
use crate::output::{self, Report, Status};
use crate::verification::{
    cone_comparison_check, doubling_diagnostic, recover_cost, slope_analysis, uniqueness_experiment,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug)]
enum RunError {
    /// A config value turned out to be unusable; names the key.
    Config(String),
    NotConverged(String),
    Other(String),
}

impl RunError {
    fn other(e: impl std::fmt::Display) -> Self {
        RunError::Other(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Report,
    pub report_path: PathBuf,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    grid: Arc<Grid>,
    dir: PathBuf,
    tolerances: BTreeMap<String, f64>,
    result: serde_json::Map<String, Value>,
    warnings: Vec<String>,
    artifacts: Vec<String>,
    solved: Option<(ScalarField, SolveStats)>,
    /// A non-converged solve whose output was still used.
    not_converged: Option<String>,
}

impl Context<'_> {
    fn path(&mut self, suffix: &str) -> PathBuf {
        let name = format!("{}_{suffix}", self.cfg.output.prefix);
        self.artifacts.push(name.clone());
        self.dir.join(name)
    }

    fn tol(&mut self, key: &str, v: f64) {
        self.tolerances.insert(key.to_string(), v);
    }

    fn put(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("report values serialize");
        self.result.insert(key.to_string(), v);
    }

    fn problem(&self) -> Result<GameProblem, RunError> {
        let game = self.cfg.game.as_ref().expect("validated at load");
        let f = game.f.as_ref().expect("validated at load");
        GameProblem::from_specs(self.grid.clone(), game.epsilon, &f.spec, &game.terminal.spec)
            .map_err(RunError::other)
    }

    /// Solves the configured game once and caches the result.
    fn value(&mut self) -> Result<ScalarField, RunError> {
        if let Some((u, _)) = &self.solved {
            return Ok(u.clone());
        }
        let prob = self.problem()?;
        let opts = self.cfg.solver;
        self.tol("solver.tol", opts.tol);
        self.tol("game.epsilon", prob.epsilon());
        let (u, stats) = solve_value(&prob, &opts).map_err(RunError::other)?;
        log::info!(
            "solve: {} iterations, final update {:e}, converged {}",
            stats.iterations,
            stats.final_update,
            stats.converged
        );
        self.warnings.extend(stats.warnings.iter().cloned());
        if !stats.converged {
            self.not_converged = Some(format!(
                "value iteration stopped after {} iterations with update {:e} > tol {:e}",
                stats.iterations, stats.final_update, opts.tol
            ));
        }
        self.put("solve", &stats);
        self.solved = Some((u.clone(), stats));
        Ok(u)
    }

    fn field(&mut self, src: &FieldSource, key: &str) -> Result<ScalarField, RunError> {
        match src {
            FieldSource::Solve => self.value(),
            FieldSource::Expr(e) => ScalarField::sample(self.grid.clone(), &e.spec)
                .map_err(|err| RunError::Config(format!("'{key}': {err}"))),
        }
    }

    fn node_at(&self, point: &[f64], key: &str) -> Result<usize, RunError> {
        self.grid
            .nearest(point)
            .ok_or_else(|| RunError::Config(format!("'{key}': {point:?} is not a grid node")))
    }
}

/// Executes the experiment. Failures are reported in the returned report
/// and exit code rather than as errors; only a missing output directory
/// that cannot be created prevents the report from being written.
pub fn run(cfg: &ExperimentConfig) -> RunOutcome {
    let dir = cfg.output.dir.clone();
    let report_path = dir.join(format!("{}_report.json", cfg.output.prefix));
    let mut errors = Vec::new();
    let mut status = Status::Ok;
    let mut exit_code = EXIT_OK;

    let grid = Grid::new(&cfg.grid.lower, &cfg.grid.upper, cfg.grid.h).map(Arc::new);
    let mut ctx = grid.as_ref().ok().map(|g| Context {
        cfg,
        grid: g.clone(),
        dir: dir.clone(),
        tolerances: BTreeMap::new(),
        result: serde_json::Map::new(),
        warnings: Vec::new(),
        artifacts: Vec::new(),
        solved: None,
        not_converged: None,
    });

    let outcome = match (&grid, ctx.as_mut()) {
        (Err(e), _) => Err(RunError::Config(format!("'grid': {e}"))),
        (Ok(_), Some(ctx)) => std::fs::create_dir_all(&dir)
            .map_err(|e| RunError::Other(format!("creating {}: {e}", dir.display())))
            .and_then(|_| execute(ctx)),
        (Ok(_), None) => unreachable!(),
    };
    let converge_msg = ctx.as_ref().and_then(|c| c.not_converged.clone());
    match outcome {
        Ok(()) => {
            if let Some(msg) = converge_msg {
                errors.push(msg);
                status = Status::NotConverged;
                exit_code = EXIT_NOT_CONVERGED;
            }
        }
        Err(RunError::NotConverged(msg)) => {
            errors.push(msg);
            status = Status::NotConverged;
            exit_code = EXIT_NOT_CONVERGED;
        }
        Err(RunError::Config(msg)) => {
            errors.push(msg);
            status = Status::Error;
            exit_code = EXIT_CONFIG;
        }
        Err(RunError::Other(msg)) => {
            errors.push(msg);
            status = Status::Error;
            exit_code = EXIT_FAILURE;
        }
    }

    let (tolerances, result, warnings, artifacts) = match ctx {
        Some(c) => (c.tolerances, Value::Object(c.result), c.warnings, c.artifacts),
        None => (BTreeMap::new(), json!({}), Vec::new(), Vec::new()),
    };
    let report = Report {
        experiment: cfg.experiment.name().to_string(),
        status,
        exit_code,
        seed: cfg.seed,
        config: serde_json::to_value(&cfg.table).unwrap_or(Value::Null),
        tolerances,
        result,
        warnings,
        errors,
        artifacts,
    };
    let exit_code = match output::write_report(&report_path, &report) {
        Ok(()) => exit_code,
        Err(e) => {
            log::error!("writing {}: {e}", report_path.display());
            if exit_code == EXIT_OK {
                EXIT_FAILURE
            } else {
                exit_code
            }
        }
    };
    RunOutcome {
        exit_code,
        report,
        report_path,
    }
}

fn write_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Other(format!("writing {}: {e}", path.display()))
}

fn execute(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    match cfg.experiment {
        Selector::Solve => {
            let u = ctx.value()?;
            let path = ctx.path("value.csv");
            output::write_field_csv(&path, &u, None).map_err(|e| write_err(&path, e))?;
        }
        Selector::Recover => run_recover(ctx)?,
        Selector::Unique => run_unique(ctx)?,
        Selector::Doubling => run_doubling(ctx)?,
        Selector::Slope => run_slope(ctx)?,
        Selector::Cones => run_cones(ctx)?,
        Selector::Check => run_check(ctx)?,
        Selector::Simulate => run_simulate(ctx)?,
    }
    Ok(())
}

fn run_recover(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let rc = ctx.cfg.recover.as_ref().expect("validated at load");
    let u = ctx.field(&rc.u, "recover.u")?;
    let reference_spec = match (&rc.reference, &rc.u) {
        (Some(r), _) => Some(r.spec.clone()),
        (None, FieldSource::Solve) => ctx.cfg.game.as_ref().and_then(|g| g.f.as_ref()).map(|f| f.spec.clone()),
        (None, _) => None,
    };
    let reference = reference_spec
        .map(|s| ScalarField::sample(ctx.grid.clone(), &s))
        .transpose()
        .map_err(|e| RunError::Config(format!("'recover.reference': {e}")))?;
    ctx.tol("recover.theta", rc.theta);
    let rep = recover_cost(&u, rc.theta, reference.as_ref()).map_err(RunError::other)?;
    ctx.warnings.extend(rep.warnings.iter().cloned());
    let path = ctx.path("recovered.csv");
    output::write_field_csv(&path, &rep.recovered, Some(&rep.mask)).map_err(|e| write_err(&path, e))?;
    ctx.put("recovery", &rep);
    Ok(())
}

fn run_unique(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let uc = ctx.cfg.unique.as_ref().expect("validated at load");
    let game = ctx.cfg.game.as_ref().expect("validated at load");
    let opts = ctx.cfg.solver;
    ctx.tol("solver.tol", opts.tol);
    ctx.tol("game.epsilon", game.epsilon);
    let rep = uniqueness_experiment(&uc.f.spec, &uc.g.spec, &game.terminal.spec, ctx.grid.clone(), game.epsilon, &opts)
        .map_err(RunError::other)?;
    let pf = ctx.path("value_f.csv");
    output::write_field_csv(&pf, &rep.value_f, None).map_err(|e| write_err(&pf, e))?;
    let pg = ctx.path("value_g.csv");
    output::write_field_csv(&pg, &rep.value_g, None).map_err(|e| write_err(&pg, e))?;
    ctx.warnings.extend(rep.stats_f.warnings.iter().cloned());
    ctx.put("uniqueness", &rep);
    if let Some(msg) = &rep.failure {
        return Err(RunError::NotConverged(msg.clone()));
    }
    Ok(())
}

fn run_doubling(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let dc = ctx.cfg.doubling.as_ref().expect("validated at load");
    let u = ctx.field(&dc.u, "doubling.u")?;
    let v = match &dc.v {
        Some(src) => ctx.field(src, "doubling.v")?,
        None => u.clone(),
    };
    let lipschitz = u.lipschitz_constant();
    let h = ctx.grid.h();
    let mut reports = Vec::new();
    for &eps in &dc.epsilons {
        let rep = doubling_diagnostic(&u, &v, eps).map_err(RunError::other)?;
        reports.push(rep);
    }
    let bounds: Vec<Value> = reports
        .iter()
        .map(|r| {
            let bound = lipschitz * r.epsilon + h;
            json!({ "epsilon": r.epsilon, "bound": bound, "within_bound": r.gap <= bound })
        })
        .collect();
    let path = ctx.path("doubling.csv");
    output::write_doubling_csv(&path, &reports).map_err(|e| write_err(&path, e))?;
    ctx.put("lipschitz_constant", lipschitz);
    ctx.put("doubling", &reports);
    ctx.put("gap_bounds", bounds);
    ctx.tol("doubling.bound_slack", h);
    Ok(())
}

fn run_slope(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let sc = ctx.cfg.slope.as_ref().expect("validated at load");
    let u = ctx.field(&sc.u, "slope.u")?;
    let center = ctx.node_at(&sc.center, "slope.center")?;
    let rep = slope_analysis(&u, center, &sc.radii).map_err(|e| RunError::Config(format!("'slope.radii': {e}")))?;
    ctx.tol("slope.tolerance", rep.tolerance);
    let path = ctx.path("slope.csv");
    output::write_slope_csv(&path, &rep).map_err(|e| write_err(&path, e))?;
    ctx.warnings.extend(rep.notes.iter().cloned());
    ctx.put("slope", &rep);
    Ok(())
}

fn run_cones(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let cc = ctx.cfg.cones.as_ref().expect("validated at load");
    let u = ctx.field(&cc.u, "cones.u")?;
    ctx.tol("cones.tol", cc.tol);
    let mut reports = Vec::new();
    for &dir in &cc.directions {
        let rep = cone_comparison_check(&u, &cc.lower, &cc.upper, dir, cc.tol)
            .map_err(|e| RunError::Config(format!("'cones.lower'/'cones.upper': {e}")))?;
        reports.push(rep);
    }
    ctx.put("cones", &reports);
    ctx.put(
        "note",
        "cone scan is a falsifier over a finite family of cones, not a proof of comparison",
    );
    Ok(())
}

#[derive(Serialize)]
struct VerdictSummary<'a> {
    role: crate::operators::Role,
    verdict: &'static str,
    nodes: usize,
    fail_count: usize,
    degenerate_nodes: usize,
    worst_residual: f64,
    notes: &'a [String],
}

fn summarize(v: &ViscosityVerdict) -> VerdictSummary<'_> {
    let verdict = if v.all_pass() {
        "pass"
    } else if v.all_fail() {
        "fail-at-all-nodes"
    } else {
        "fail-at-some-nodes"
    };
    VerdictSummary {
        role: v.role,
        verdict,
        nodes: v.nodes.len(),
        fail_count: v.fail_count(),
        degenerate_nodes: v.nodes.iter().filter(|n| n.degenerate).count(),
        worst_residual: v.worst_residual(),
        notes: &v.notes,
    }
}

fn operator_field(op: &OperatorConfig, u: &ScalarField, theta: f64) -> Result<(ScalarField, Option<Vec<bool>>), RunError> {
    let dim = u.grid().dim();
    let spec = |e: &Option<crate::config::Expression>| e.as_ref().map(|e| e.spec.clone());
    match op.kind {
        OperatorKind::Infinity => Ok((infinity_laplacian(u), None)),
        OperatorKind::Normalized => {
            let (f, mask) = normalized_inf_laplacian(u, theta).map_err(RunError::other)?;
            Ok((f, Some(mask)))
        }
        OperatorKind::Aronsson => {
            let h: FunctionSpec = spec(&op.hamiltonian).expect("validated at load");
            let partials = Partials {
                h_x: [spec(&op.partials[0]), spec(&op.partials[1])],
                h_z: spec(&op.partials[2]),
                h_p: [spec(&op.partials[3]), spec(&op.partials[4])],
            };
            let ham = HamiltonianSpec::new(dim, h, partials, op.step)
                .map_err(|e| RunError::Config(format!("'operator.H': {e}")))?;
            Ok((aronsson_apply(&ham, u).map_err(RunError::other)?, None))
        }
        OperatorKind::General => {
            let b = op.b.iter().map(|e| e.spec.clone()).collect();
            let c = spec(&op.c).unwrap_or_else(|| FunctionSpec::constant(0.0));
            let g = GeneralOperatorSpec::new(b, c);
            Ok((general_operator_apply(&g, u).map_err(|e| RunError::Config(format!("'operator.B': {e}")))?, None))
        }
    }
}

fn run_check(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let cc = ctx.cfg.check.as_ref().expect("validated at load");
    let u = ctx.field(&cc.u, "check.u")?;
    let f = ScalarField::sample(ctx.grid.clone(), &cc.f.spec)
        .map_err(|e| RunError::Config(format!("'check.f': {e}")))?;
    ctx.tol("check.theta", cc.theta);
    ctx.tol("check.tol", cc.tol);
    let mut summaries = Vec::new();
    for &role in &cc.roles {
        let mut v = viscosity_check(&u, &f, cc.form, role, cc.theta, cc.tol).map_err(RunError::other)?;
        if let Some((lo, hi)) = &cc.region {
            v = v.restrict(lo, hi);
        }
        let suffix = match role {
            crate::operators::Role::Sub => "check_sub.csv",
            crate::operators::Role::Super => "check_super.csv",
        };
        let path = ctx.path(suffix);
        output::write_verdict_csv(&path, ctx.grid.dim(), &v).map_err(|e| write_err(&path, e))?;
        summaries.push(serde_json::to_value(summarize(&v)).expect("serializes"));
    }
    ctx.put("form", cc.form);
    ctx.put("check", summaries);
    if let Some(op) = &ctx.cfg.operator {
        let (field, mask) = operator_field(op, &u, cc.theta)?;
        let path = ctx.path("operator.csv");
        output::write_field_csv(&path, &field, mask.as_deref()).map_err(|e| write_err(&path, e))?;
        ctx.put("operator", op.kind);
        if op.kind == OperatorKind::Aronsson {
            ctx.tol("operator.step", op.step);
        }
    }
    Ok(())
}

fn run_simulate(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let sc = ctx.cfg.simulate.as_ref().expect("validated at load");
    let value = ctx.value()?;
    if let Some(msg) = ctx.not_converged.clone() {
        return Err(RunError::NotConverged(msg));
    }
    let prob = ctx.problem()?;
    let start = ctx.node_at(&sc.start, "simulate.start")?;
    if !ctx.grid.is_interior(start) {
        return Err(RunError::Config(format!("'simulate.start': {:?} is not an interior node", sc.start)));
    }
    let cap = sc.step_cap.unwrap_or_else(|| default_step_cap(prob.epsilon()));
    let est = estimate_value_mc(&prob, &value, start, sc.samples, ctx.cfg.seed, cap).map_err(RunError::other)?;
    let dp = value.get(start);
    let z = if est.stderr > 0.0 {
        (est.mean - dp) / est.stderr
    } else {
        0.0
    };
    if est.truncated_fraction > 0.0 {
        ctx.warnings.push(format!(
            "{:.3}% of playouts hit the step cap {cap}",
            100.0 * est.truncated_fraction
        ));
    }
    let path = ctx.path("playouts.csv");
    output::write_playouts_csv(&path, &est).map_err(|e| write_err(&path, e))?;
    ctx.put("monte_carlo", &est);
    ctx.put("dp_value", dp);
    ctx.put("z_score", z);
    Ok(())
}
