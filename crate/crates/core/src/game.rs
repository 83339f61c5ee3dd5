//! The ε-step tug-of-war game on a grid.
//!
//! Each turn a fair coin picks a player; the winner moves the token to any
//! node within distance ε. Player I maximizes and player II minimizes
//!
//! ```text
//! F(x_k) + (ε²/2) Σ_{i<k} f(x_i)
//! ```
//!
//! where `x_k` is the first boundary node reached. The game value is the
//! fixed point of
//!
//! ```text
//! u(x) = ½ (max_{B_ε(x)} u + min_{B_ε(x)} u) + (ε²/2) f(x)   on interior nodes
//! u(x) = F(x)                                                on boundary nodes
//! ```
//!
//! Playouts use ChaCha8 (`rand_chacha::ChaCha8Rng`) keyed by
//! `seed_from_u64(seed)`. Sample `i` of a Monte Carlo estimate runs on
//! stream `i` of that key, so payoff streams are reproducible bit for bit.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::FunctionSpec;
use crate::field::{FieldError, ScalarField};
use crate::grid::Grid;
use crate::neighbors::NeighborTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("epsilon {epsilon} must be at least the grid spacing {h}")]
    EpsilonBelowSpacing { epsilon: f64, h: f64 },
    #[error("running and terminal payoffs must live on the problem grid")]
    GridMismatch,
    #[error("solver tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("max_iter must be at least 1")]
    MaxIter,
    #[error("start node {0} is not an interior node")]
    StartNotInterior(usize),
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignRegime {
    Positive,
    Negative,
    Zero,
    Mixed,
}

impl SignRegime {
    fn classify(values: impl Iterator<Item = f64>) -> Self {
        let (mut pos, mut neg, mut zero) = (false, false, false);
        for v in values {
            if v > 0.0 {
                pos = true;
            } else if v < 0.0 {
                neg = true;
            } else {
                zero = true;
            }
        }
        match (pos, neg, zero) {
            (true, false, false) => SignRegime::Positive,
            (false, true, false) => SignRegime::Negative,
            (false, false, _) => SignRegime::Zero,
            _ => SignRegime::Mixed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GameProblem {
    grid: Arc<Grid>,
    epsilon: f64,
    running: ScalarField,
    terminal: ScalarField,
    sign_regime: SignRegime,
}

impl GameProblem {
    /// `running` is read on interior nodes and `terminal` on boundary nodes.
    pub fn new(
        epsilon: f64,
        running: ScalarField,
        terminal: ScalarField,
    ) -> Result<Self, GameError> {
        let grid = running.grid().clone();
        if !terminal.same_grid(&running) {
            return Err(GameError::GridMismatch);
        }
        if !(epsilon >= grid.h()) {
            return Err(GameError::EpsilonBelowSpacing {
                epsilon,
                h: grid.h(),
            });
        }
        let sign_regime = SignRegime::classify(grid.interior().map(|i| running.get(i)));
        Ok(Self {
            grid,
            epsilon,
            running,
            terminal,
            sign_regime,
        })
    }

    pub fn from_specs(
        grid: Arc<Grid>,
        epsilon: f64,
        running: &FunctionSpec,
        terminal: &FunctionSpec,
    ) -> Result<Self, GameError> {
        let f = ScalarField::sample(grid.clone(), running)?;
        let big_f = ScalarField::sample(grid, terminal)?;
        Self::new(epsilon, f, big_f)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn running(&self) -> &ScalarField {
        &self.running
    }

    pub fn terminal(&self) -> &ScalarField {
        &self.terminal
    }

    pub fn sign_regime(&self) -> SignRegime {
        self.sign_regime
    }

    pub fn neighbors(&self) -> NeighborTable {
        NeighborTable::build(&self.grid, self.epsilon)
    }

    fn half_eps_sq(&self) -> f64 {
        0.5 * self.epsilon * self.epsilon
    }

    /// Boundary values of F, interior filled with their mean.
    pub fn initial_guess(&self) -> ScalarField {
        let (sum, count) = self
            .grid
            .boundary()
            .fold((0.0, 0usize), |(s, c), i| (s + self.terminal.get(i), c + 1));
        let mean = sum / count as f64;
        let values = (0..self.grid.len())
            .map(|i| {
                if self.grid.is_boundary(i) {
                    self.terminal.get(i)
                } else {
                    mean
                }
            })
            .collect();
        ScalarField::from_values_unchecked(self.grid.clone(), values)
    }

    #[inline]
    fn node_update(&self, values: &[f64], nbr: &NeighborTable, node: usize) -> f64 {
        if self.grid.is_boundary(node) {
            return self.terminal.get(node);
        }
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &y in nbr.ball(node) {
            let v = values[y];
            hi = hi.max(v);
            lo = lo.min(v);
        }
        0.5 * (hi + lo) + self.half_eps_sq() * self.running.get(node)
    }
}

/// One Jacobi sweep of the dynamic programming operator.
pub fn dpp_update(u: &ScalarField, prob: &GameProblem, nbr: &NeighborTable) -> ScalarField {
    let values = u.values();
    let next = (0..values.len())
        .into_par_iter()
        .map(|node| prob.node_update(values, nbr, node))
        .collect();
    ScalarField::from_values_unchecked(u.grid().clone(), next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            sweep: SweepMode::Jacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    pub tol: f64,
    pub sweep: SweepMode,
    pub sign_regime: SignRegime,
    pub warnings: Vec<String>,
}

pub fn solve_value(
    prob: &GameProblem,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveStats), GameError> {
    solve_value_from(prob, prob.initial_guess(), opts)
}

/// Value iteration from a caller-supplied start. Boundary values of `init`
/// are overwritten with F by the first sweep.
pub fn solve_value_from(
    prob: &GameProblem,
    init: ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveStats), GameError> {
    if !(opts.tol > 0.0) {
        return Err(GameError::Tolerance(opts.tol));
    }
    if opts.max_iter == 0 {
        return Err(GameError::MaxIter);
    }
    if !init.same_grid(prob.running()) {
        return Err(GameError::GridMismatch);
    }
    let started = Instant::now();
    let nbr = prob.neighbors();
    let mut warnings = Vec::new();
    if prob.sign_regime() == SignRegime::Mixed {
        warnings.push(
            "running payoff changes sign (or vanishes somewhere); convergence of the game value is not guaranteed"
                .to_string(),
        );
    }

    let mut u = init;
    let mut iterations = 0;
    let mut update = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        match opts.sweep {
            SweepMode::Jacobi => {
                let next = dpp_update(&u, prob, &nbr);
                update = next.sup_distance(&u).expect("same grid");
                u = next;
            }
            SweepMode::GaussSeidel => {
                let mut values = u.into_values();
                update = 0.0;
                for node in 0..values.len() {
                    let v = prob.node_update(&values, &nbr, node);
                    update = f64::max(update, (v - values[node]).abs());
                    values[node] = v;
                }
                u = ScalarField::from_values_unchecked(prob.grid().clone(), values);
            }
        }
        if update <= opts.tol {
            break;
        }
    }
    let converged = update <= opts.tol;
    if !converged {
        warnings.push(format!(
            "stopped after {iterations} iterations with update {update:e} > tol {:e}",
            opts.tol
        ));
    }
    let stats = SolveStats {
        iterations,
        final_update: update,
        converged,
        wall_time_s: started.elapsed().as_secs_f64(),
        tol: opts.tol,
        sweep: opts.sweep,
        sign_regime: prob.sign_regime(),
        warnings,
    };
    Ok((u, stats))
}

/// Default per-playout step cap, 10⁶·ε⁻².
pub fn default_step_cap(epsilon: f64) -> u64 {
    (1e6 / (epsilon * epsilon)).ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Playout {
    pub payoff: f64,
    pub steps: u64,
    pub terminated: bool,
}

/// Greedy strategies read off a value field: for each node, the lowest-index
/// argmax and argmin of the value over its ε-ball.
#[derive(Debug, Clone)]
pub struct GreedyStrategies {
    up: Vec<usize>,
    down: Vec<usize>,
}

impl GreedyStrategies {
    pub fn new(value: &ScalarField, nbr: &NeighborTable) -> Self {
        let v = value.values();
        let mut up = Vec::with_capacity(v.len());
        let mut down = Vec::with_capacity(v.len());
        for node in 0..v.len() {
            let ball = nbr.ball(node);
            let (mut best_up, mut best_down) = (ball[0], ball[0]);
            for &y in &ball[1..] {
                if v[y] > v[best_up] {
                    best_up = y;
                }
                if v[y] < v[best_down] {
                    best_down = y;
                }
            }
            up.push(best_up);
            down.push(best_down);
        }
        Self { up, down }
    }

    pub fn maximizer_move(&self, node: usize) -> usize {
        self.up[node]
    }

    pub fn minimizer_move(&self, node: usize) -> usize {
        self.down[node]
    }
}

fn play<R: Rng>(
    prob: &GameProblem,
    moves: &GreedyStrategies,
    start: usize,
    rng: &mut R,
    step_cap: u64,
) -> Playout {
    let grid = prob.grid();
    let weight = prob.half_eps_sq();
    let mut x = start;
    let mut running = 0.0;
    let mut steps = 0;
    while !grid.is_boundary(x) {
        if steps == step_cap {
            return Playout {
                payoff: running,
                steps,
                terminated: false,
            };
        }
        running += weight * prob.running().get(x);
        x = if rng.random::<bool>() {
            moves.maximizer_move(x)
        } else {
            moves.minimizer_move(x)
        };
        steps += 1;
    }
    Playout {
        payoff: prob.terminal().get(x) + running,
        steps,
        terminated: true,
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One game played by the greedy strategies of `value` from `start`.
pub fn simulate_playout(
    prob: &GameProblem,
    value: &ScalarField,
    start: usize,
    seed: u64,
    step_cap: u64,
) -> Result<Playout, GameError> {
    if !prob.grid().is_interior(start) {
        return Err(GameError::StartNotInterior(start));
    }
    let moves = GreedyStrategies::new(value, &prob.neighbors());
    Ok(play(prob, &moves, start, &mut sample_rng(seed, 0), step_cap))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub truncated_fraction: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub step_cap: u64,
    #[serde(skip)]
    pub playouts: Vec<Playout>,
}

pub fn estimate_value_mc(
    prob: &GameProblem,
    value: &ScalarField,
    start: usize,
    n_samples: usize,
    seed: u64,
    step_cap: u64,
) -> Result<McEstimate, GameError> {
    if n_samples == 0 {
        return Err(GameError::NoSamples);
    }
    if !prob.grid().is_interior(start) {
        return Err(GameError::StartNotInterior(start));
    }
    let moves = GreedyStrategies::new(value, &prob.neighbors());
    let playouts: Vec<Playout> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| play(prob, &moves, start, &mut sample_rng(seed, i), step_cap))
        .collect();
    let n = n_samples as f64;
    let mean = playouts.iter().map(|p| p.payoff).sum::<f64>() / n;
    let stderr = if n_samples > 1 {
        let var = playouts
            .iter()
            .map(|p| (p.payoff - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let truncated = playouts.iter().filter(|p| !p.terminated).count();
    Ok(McEstimate {
        mean,
        stderr,
        truncated_fraction: truncated as f64 / n,
        n_samples,
        seed,
        step_cap,
        playouts,
    })
}
