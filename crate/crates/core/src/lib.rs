//! Numerical laboratory for tug-of-war games with running payoff and the
//! degenerate elliptic operators behind them: the infinity Laplacian, its
//! normalized form, Aronsson operators and `B·D²u·B + c`.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`], [`field`], [`neighbors`]: uniform boxes in one or two
//!   dimensions, nodal fields and Euclidean ball tables.
//! - [`expr`]: the expression language for payoffs and coefficients.
//! - [`game`]: value iteration for the ε-step game and Monte Carlo playouts.
//! - [`operators`]: discrete operators and the pointwise viscosity check.
//! - [`verification`]: cost recovery, uniqueness gaps, variable doubling,
//!   slope estimates and comparison with cones.
//! - [`solutions`]: closed-form reference functions.
//! - [`config`], [`experiment`], [`output`]: the file-driven experiment
//!   runner used by the `tugwar` binary.

pub mod expr;
pub mod field;
pub mod game;
pub mod grid;
pub mod neighbors;
pub mod operators;
pub mod solutions;
pub mod verification;
pub mod config;
pub mod experiment;
pub mod output;

pub use expr::FunctionSpec;
pub use field::ScalarField;
pub use grid::Grid;
pub use neighbors::NeighborTable;
