//! Newton solver for `Delta u = -e^{2u}` on the stereographic chart with
//! prescribed cone points.
//!
//! The unknown is split as `u = w + b - sum_i K_i S_i`:
//! `b` carries every logarithmic singularity and the decay at infinity in
//! closed form, `S_i = |z - z_i|^{q_i}` absorbs the leading non-smooth term
//! of the regular part near a cone point of order `beta_i` (with
//! `q_i = 2 + 2 beta_i`), and `w` is smooth enough for a five-point
//! Laplacian. The coefficients `K_i = e^{kappa_i} / q_i^2` are extra
//! unknowns tied to the value of `w + b - beta_i ln|z - z_i|` at `z_i`.

mod newton;
mod problem;
mod solution;

pub use newton::{solve, solve_with, InitialGuess, SolveReport, SolverConfig};
pub use problem::{ConformalProblem, Enrichment};
pub use solution::{mass_error, ConformalSolution};
