//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tugwar_core::config::load_config;
use tugwar_core::experiment::{run, EXIT_OK};
use tugwar_core::expr::{BinOp, Bindings, Expr, Func, Var};
use tugwar_core::game::{estimate_value_mc, solve_value, GameProblem, SolveOptions};
use tugwar_core::operators::{
    aronsson_apply, general_operator_apply, infinity_laplacian, viscosity_check, Form,
    GeneralOperatorSpec, HamiltonianSpec, Role,
};
use tugwar_core::solutions::{self, Expectation};
use tugwar_core::verification::{doubling_diagnostic, recover_cost, slope_analysis, uniqueness_experiment};
use tugwar_core::{FunctionSpec, Grid, ScalarField};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn spec(s: &str) -> FunctionSpec {
    FunctionSpec::parse(s).unwrap()
}

fn grid(lower: &[f64], upper: &[f64], h: f64) -> Arc<Grid> {
    Arc::new(Grid::new(lower, upper, h).unwrap())
}

fn solve(g: Arc<Grid>, eps: f64, f: &str, big_f: &str, tol: f64) -> ScalarField {
    let prob = GameProblem::from_specs(g, eps, &spec(f), &spec(big_f)).unwrap();
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let (u, stats) = solve_value(&prob, &opts).unwrap();
    assert!(stats.converged, "solve did not converge");
    u
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn solver_convergence() -> Outcome {
    let err_at = |h: f64| {
        let g = grid(&[0.0], &[1.0], h);
        let started = Instant::now();
        let u = solve(g.clone(), h, "2", "x", 1e-10);
        let secs = started.elapsed().as_secs_f64();
        let exact = ScalarField::from_fn(g, |p| 2.0 * p[0] - p[0] * p[0]);
        (u.sup_distance(&exact).unwrap(), secs)
    };
    let (coarse, secs) = err_at(0.025);
    let (fine, _) = err_at(0.0125);
    let ratio = coarse / fine;
    let (a, b, c) = (coarse <= 5e-2, ratio >= 1.5, secs < 5.0);
    (
        a && b && c,
        format!(
            "sup error {coarse:.3e} <= 5e-2 {}; refinement factor {ratio:.3} >= 1.5 {} (fine error {fine:.3e}); runtime {secs:.3}s < 5s {}",
            mark(a),
            mark(b),
            mark(c)
        ),
    )
}

fn counterexample() -> Outcome {
    let entry = solutions::lookup("zero-counterexample").unwrap();
    let g = entry.grid(entry.test_h).unwrap();
    let u = ScalarField::sample(g.clone(), &entry.function()).unwrap();
    let f = ScalarField::constant(g, -1.0);
    let theta = entry.test_h.sqrt();
    let check = |form, role| viscosity_check(&u, &f, form, role, theta, 0.0).unwrap();
    let product_sub = check(Form::Product, Role::Sub).all_pass();
    let product_super = check(Form::Product, Role::Super).all_pass();
    let ratio_sub = check(Form::Ratio, Role::Sub);
    let ok = product_sub && product_super && ratio_sub.all_fail();
    (
        ok,
        format!(
            "product sub all pass {product_sub}, product super all pass {product_super}, ratio sub fails at {}/{} nodes (tol 0)",
            ratio_sub.fail_count(),
            ratio_sub.nodes.len()
        ),
    )
}

fn aronsson_patch() -> Outcome {
    let residual = |h: f64| {
        let g = grid(&[1.0, 1.0], &[2.0, 2.0], h);
        let u = ScalarField::sample(g.clone(), &spec("x^(4/3) - y^(4/3)")).unwrap();
        let lap = infinity_laplacian(&u);
        g.interior().map(|i| lap.get(i).abs()).fold(0.0, f64::max)
    };
    let coarse = residual(0.01);
    let fine = residual(0.005);
    let ratio = fine / coarse;
    let (a, b) = (coarse <= 0.05, ratio <= 0.6);
    (
        a && b,
        format!(
            "sup residual {coarse:.3e} <= 0.05 {} at h = 0.01; halved-h ratio {ratio:.3} <= 0.6 {}",
            mark(a),
            mark(b)
        ),
    )
}

fn cost_recovery() -> Outcome {
    let level = |h: f64| {
        let g = grid(&[0.0, 0.0], &[1.0, 1.0], h);
        let u = solve(g.clone(), h, "1", "0", 1e-10);
        let one = ScalarField::constant(g, 1.0);
        recover_cost(&u, h.sqrt(), Some(&one)).unwrap()
    };
    let coarse = level(0.025);
    let fine = level(0.0125);
    let (sup_c, sup_f) = (coarse.sup_error.unwrap(), fine.sup_error.unwrap());
    let (a, b, c) = (sup_c <= 0.15, coarse.coverage >= 0.5, sup_f < sup_c);
    (
        a && b && c,
        format!(
            "sup error {sup_c:.3} <= 0.15 {} (mean {:.3}); coverage {:.3} >= 0.5 {}; refined sup error {sup_f:.3} < {sup_c:.3} {} (refined mean {:.3})",
            mark(a),
            coarse.mean_error.unwrap(),
            coarse.coverage,
            mark(b),
            mark(c),
            fine.mean_error.unwrap()
        ),
    )
}

fn uniqueness_gap() -> Outcome {
    let g = grid(&[0.0], &[1.0], 0.025);
    let opts = SolveOptions::default();
    let rep = uniqueness_experiment(&spec("1"), &spec("2"), &spec("0"), g.clone(), 0.025, &opts).unwrap();
    let same = uniqueness_experiment(&spec("1"), &spec("1"), &spec("0"), g, 0.025, &opts).unwrap();
    let (gap, control) = (rep.gap.unwrap(), same.gap.unwrap());
    let (a, b) = ((gap - 0.125).abs() <= 0.02, control <= 2.0 * opts.tol);
    (
        a && b,
        format!(
            "gap {gap:.5} in 0.125 ± 0.02 {} at x = {:?}; control gap {control:.2e} <= {:.0e} {}",
            mark(a),
            rep.gap_at.unwrap(),
            2.0 * opts.tol,
            mark(b)
        ),
    )
}

fn doubling_gap() -> Outcome {
    let mut fields: Vec<(String, ScalarField)> = vec![
        ("solve 1d f=2".into(), solve(grid(&[0.0], &[1.0], 0.025), 0.025, "2", "x", 1e-10)),
        ("solve 1d f=1".into(), solve(grid(&[0.0], &[1.0], 0.025), 0.025, "1", "0", 1e-10)),
        (
            "solve 2d f=1".into(),
            solve(grid(&[0.0, 0.0], &[1.0, 1.0], 0.05), 0.05, "1", "0", 1e-10),
        ),
    ];
    for entry in solutions::catalog() {
        let g = entry.grid(entry.test_h).unwrap();
        fields.push((entry.name.to_string(), ScalarField::sample(g, &entry.function()).unwrap()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (name, u) in &fields {
        let l = u.lipschitz_constant();
        let h = u.grid().h();
        for eps in [0.05, 0.1, 0.2] {
            let rep = doubling_diagnostic(u, u, eps).unwrap();
            let slack = rep.gap - (l * eps + h);
            worst = worst.max(slack);
            if slack > 1e-12 {
                violations.push(format!("{name} eps={eps}"));
            }
        }
    }
    let plane = ScalarField::from_fn(grid(&[0.0], &[1.0], 0.1), |p| p[0]);
    let rep = doubling_diagnostic(&plane, &plane, 0.2).unwrap();
    let offset = rep.x_bar[0] - rep.y_bar[0];
    let exact = (offset - 0.2).abs() < 1e-12 && (rep.w_max - 0.1).abs() < 1e-12;
    let bound_ok = violations.is_empty();
    (
        bound_ok && exact,
        format!(
            "{} fields x 3 eps: max(gap − (Lε + h)) = {worst:.3e} {}{}; plane offset {offset:.15} w_max {:.15} {}",
            fields.len(),
            mark(bound_ok),
            if bound_ok { String::new() } else { format!(" {violations:?}") },
            rep.w_max,
            mark(exact)
        ),
    )
}

fn slope_suite() -> Outcome {
    let cone = solutions::lookup("cone").unwrap();
    let g = grid(&cone.domain.0, &cone.domain.1, 0.05);
    let u = ScalarField::sample(g.clone(), &cone.function()).unwrap();
    let rep = slope_analysis(&u, g.nearest(&[0.5, 0.5]).unwrap(), &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let cone_dev = rep.slopes.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let a = cone_dev <= 1e-9;

    let h = 0.05;
    let g = grid(&[-1.0], &[1.0], h);
    let sq = ScalarField::sample(g.clone(), &spec("x^2")).unwrap();
    let radii = [0.1, 0.2, 0.3, 0.4];
    let rep = slope_analysis(&sq, g.nearest(&[0.0]).unwrap(), &radii).unwrap();
    let sq_dev = rep.slopes.iter().zip(radii).map(|(s, r)| (s - r).abs()).fold(0.0, f64::max);
    let b = sq_dev <= h;

    let mut checked = Vec::new();
    let mut unordered = Vec::new();
    for entry in solutions::catalog() {
        let g = entry.grid(entry.test_h).unwrap();
        let u = ScalarField::sample(g.clone(), &entry.function()).unwrap();
        let zero = ScalarField::constant(g.clone(), 0.0);
        let certified = viscosity_check(&u, &zero, Form::Product, Role::Sub, entry.test_h.sqrt(), entry.tolerance(entry.test_h))
            .unwrap()
            .restrict(&entry.validity.0, &entry.validity.1)
            .all_pass();
        if !certified {
            continue;
        }
        let width = (0..entry.dim)
            .map(|a| entry.domain.1[a] - entry.domain.0[a])
            .fold(f64::INFINITY, f64::min);
        let center: Vec<f64> = (0..entry.dim)
            .map(|a| 0.5 * (entry.domain.0[a] + entry.domain.1[a]))
            .collect();
        let radii = [0.1 * width, 0.2 * width, 0.3 * width];
        let rep = slope_analysis(&u, g.nearest(&center).unwrap(), &radii).unwrap();
        checked.push(entry.name);
        if rep.endpoints.iter().any(|t| t.ordered != Some(true)) {
            unordered.push(entry.name);
        }
    }
    let c = unordered.is_empty() && !checked.is_empty();
    (
        a && b && c,
        format!(
            "cone slope max |s − 1| {cone_dev:.2e} {}; x^2 max |slope − r| {sq_dev:.2e} <= h {}; endpoint triples ordered on {checked:?} {}{}",
            mark(a),
            mark(b),
            mark(c),
            if unordered.is_empty() { String::new() } else { format!(" (unordered: {unordered:?})") }
        ),
    )
}

fn monte_carlo() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for f in ["0", "2"] {
        let h = 0.1;
        let g = grid(&[0.0], &[1.0], h);
        let prob = GameProblem::from_specs(g.clone(), h, &spec(f), &spec("x")).unwrap();
        let (value, _) = solve_value(&prob, &SolveOptions::default()).unwrap();
        let start = g.nearest(&[0.5]).unwrap();
        let est = estimate_value_mc(&prob, &value, start, 10_000, 7, tugwar_core::game::default_step_cap(h)).unwrap();
        let dp = value.get(start);
        let within = (est.mean - dp).abs() <= 3.0 * est.stderr;
        let trunc = est.truncated_fraction < 0.01;
        ok &= within && trunc;
        parts.push(format!(
            "f={f}: mean {:.4} vs DP {dp:.4} (|diff| {:.4} <= 3·se {:.4} {}), truncated {:.3}% {}",
            est.mean,
            (est.mean - dp).abs(),
            3.0 * est.stderr,
            mark(within),
            100.0 * est.truncated_fraction,
            mark(trunc)
        ));
    }
    (ok, parts.join("; "))
}

fn random_smooth(rng: &mut ChaCha8Rng) -> String {
    let mut c = || rng.random_range(-2.0..2.0f64);
    let (c0, c1, c2, c3, c4, c5, c6, k1, k2) = (c(), c(), c(), c(), c(), c(), c(), c(), c());
    format!(
        "{c0:?} + {c1:?}*x + {c2:?}*y + {c3:?}*x^2 + {c4:?}*x*y + {c5:?}*y^2 + {c6:?}*sin({k1:?}*x + {k2:?}*y)"
    )
}

fn operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = grid(&[0.0, 0.0], &[1.0, 1.0], 0.05);
    let ham = HamiltonianSpec::half_norm_squared(2);
    let general = GeneralOperatorSpec::gradient_direction(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = ScalarField::sample(g.clone(), &spec(&random_smooth(&mut rng))).unwrap();
        let lap = infinity_laplacian(&u);
        let a = aronsson_apply(&ham, &u).unwrap();
        let b = general_operator_apply(&general, &u).unwrap();
        for node in g.interior() {
            worst = worst.max((a.get(node) - lap.get(node)).abs());
            worst = worst.max((b.get(node) - lap.get(node)).abs());
        }
    }
    (worst <= 1e-10, format!("20 fields: max deviation {worst:.3e} <= 1e-10"))
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        return if rng.random_bool(0.5) {
            let v: f64 = rng.random_range(-10.0..10.0);
            Expr::Num((v * 100.0).round() / 100.0)
        } else {
            Expr::Var(Var::ALL[rng.random_range(0..Var::ALL.len())])
        };
    }
    match rng.random_range(0..4) {
        0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        1 => {
            let f = [Func::Abs, Func::Sin, Func::Cos, Func::Min, Func::Max][rng.random_range(0..5)];
            let args = (0..f.arity()).map(|_| random_expr(rng, depth - 1)).collect();
            Expr::Call(f, args)
        }
        _ => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][rng.random_range(0..5)];
            Expr::Bin(op, Box::new(random_expr(rng, depth - 1)), Box::new(random_expr(rng, depth - 1)))
        }
    }
}

fn parser() -> Outcome {
    let fixtures = [("2+3*4", 14.0), ("2^3^2", 512.0), ("-2^2", -4.0), ("(2+3)*4", 20.0), ("8/4/2", 1.0)];
    let env = Bindings::new();
    let fixture_fail: Vec<&str> = fixtures
        .iter()
        .filter(|(s, want)| spec(s).eval(&env).ok() != Some(*want))
        .map(|(s, _)| *s)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 5);
        let text = e.to_string();
        let Ok(parsed) = FunctionSpec::parse(&text) else {
            failures += 1;
            continue;
        };
        let env = Var::ALL
            .iter()
            .fold(Bindings::new(), |b, &v| b.with(v, rng.random_range(-3.0..3.0)));
        let same_text = parsed.expr().to_string() == text;
        let same_value = match (e.eval(&env), parsed.eval(&env)) {
            (Ok(a), Ok(b)) => a.to_bits() == b.to_bits(),
            (Err(_), Err(_)) => true,
            _ => false,
        };
        if !(same_text && same_value) {
            failures += 1;
        }
    }
    let ok = fixture_fail.is_empty() && failures == 0;
    (
        ok,
        format!(
            "fixtures {}/{} {}; round trip failures {failures}/1000 {}",
            fixtures.len() - fixture_fail.len(),
            fixtures.len(),
            mark(fixture_fail.is_empty()),
            mark(failures == 0)
        ),
    )
}

fn reproducibility() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut configs: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    configs.sort();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for path in &configs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let set = |d: &Path| vec![format!("output.dir={:?}", d.display().to_string())];
        let ra = run(&load_config(path, &set(a.path())).unwrap());
        let rb = run(&load_config(path, &set(b.path())).unwrap());
        assert_eq!(ra.exit_code, EXIT_OK, "{}", path.display());
        assert_eq!(rb.exit_code, EXIT_OK, "{}", path.display());
        for name in ra.report.artifacts.iter().filter(|n| n.ends_with(".csv")) {
            compared += 1;
            if std::fs::read(a.path().join(name)).unwrap() != std::fs::read(b.path().join(name)).unwrap() {
                mismatched.push(name.clone());
            }
        }
    }
    (
        mismatched.is_empty() && compared > 0,
        format!("{} configs, {compared} CSVs compared byte for byte, {} differ", configs.len(), mismatched.len()),
    )
}

fn catalog_claims() -> Vec<String> {
    let mut bad = Vec::new();
    for entry in solutions::catalog() {
        let g = entry.grid(entry.test_h).unwrap();
        let u = ScalarField::sample(g.clone(), &entry.function()).unwrap();
        for claim in &entry.claims {
            let f = ScalarField::constant(g.clone(), claim.cost);
            let v = viscosity_check(&u, &f, claim.form, claim.role, entry.test_h.sqrt(), entry.tolerance(entry.test_h))
                .unwrap()
                .restrict(&entry.validity.0, &entry.validity.1);
            let ok = match claim.expect {
                Expectation::Pass => v.all_pass(),
                Expectation::FailEverywhere => v.all_fail(),
                Expectation::FailSomewhere => v.fail_count() > 0,
            };
            if !ok {
                bad.push(format!("{} {:?}", entry.name, claim));
            }
        }
    }
    bad
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("solver convergence against 2x − x²", solver_convergence),
        ("zero counterexample classification", counterexample),
        ("Aronsson patch residual", aronsson_patch),
        ("cost recovery round trip", cost_recovery),
        ("uniqueness gap", uniqueness_gap),
        ("doubling gap", doubling_gap),
        ("slope suite", slope_suite),
        ("Monte Carlo against DP", monte_carlo),
        ("operator identities", operator_identities),
        ("parser", parser),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            started.elapsed().as_secs_f64()
        );
    }
    let bad_claims = catalog_claims();
    println!(
        "{} catalog claims: {}",
        if bad_claims.is_empty() { "PASS" } else { "FAIL" },
        if bad_claims.is_empty() { "every claim holds".to_string() } else { format!("{bad_claims:?}") }
    );
    if !bad_claims.is_empty() {
        failed += 1;
    }
    println!("acceptance: {} of {} checks passed", criteria.len() + 1 - failed, criteria.len() + 1);
    if failed > 0 {
        std::process::exit(1);
    }
}
