//! Solve for the curvature-one metric with three cone points and check it
//! against Gauss-Bonnet.
//!
//! `cargo run --release --example solve_liouville -- [cells]`

use conic::field::{Chart, Field};
use conic::liouville::{solve_with, ConformalProblem, SolverConfig};
use conic::{ConePoint, Divisor, Point};

fn main() -> conic::Result<()> {
    let cells = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let d = Divisor::new(vec![
        ConePoint::at_infinity(-0.3),
        ConePoint::finite(Point::new(1.0, 0.0), -0.3),
        ConePoint::finite(Point::new(-0.5, 0.8), -0.3),
    ])?;
    let problem = ConformalProblem::new(d, Chart::new(8.0, cells)?)?;
    let sol = solve_with(&problem, &SolverConfig::default(), None)?;
    let r = &sol.report;
    println!("{} Newton steps, residual {:.2e}, mass equation {:.2e}", r.total_iterations, r.residual, r.mass_equation);
    println!("far constant c = {:.8}", sol.far_constant());
    println!("Gauss-Bonnet relative error {:.2e}", sol.verify_gauss_bonnet());
    for z in [Point::new(0.0, 0.0), Point::new(3.0, 1.0), Point::new(20.0, 0.0)] {
        println!("u({z}) = {:.8}", sol.u(z));
    }
    Ok(())
}
