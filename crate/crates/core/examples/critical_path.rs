//! Walk a three-point divisor toward the critical wall and print how the
//! normalized metrics approach the limit football.
//!
//! `cargo run --release --example critical_path -- [cells]`

use conic::convergence::{make_path, run, ConvergenceConfig};
use conic::{Point, Position};

fn main() -> conic::Result<()> {
    let cells = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let positions = [Position::Infinity, Position::Finite(Point::new(1.0, 0.0)), Position::Finite(Point::new(-1.0, 0.0))];
    let path = make_path(&[-0.5, -0.3, -0.3], &[-0.5, -0.25, -0.25], &positions, 8)?;
    let config = ConvergenceConfig { cells, ..ConvergenceConfig::default() };
    let report = run(&path, &config)?;
    println!("control A deviation {:.3e}", report.control_a_deviation);
    println!("{:>4} {:>8} {:>9} {:>9} {:>10} {:>10} {:>8} {:>9} {:>7} {:>9} {:>9}", "step", "slack", "mu", "lambda", "A dev", "defect", "slack", "diameter", "share", "field", "GB");
    for s in &report.steps {
        println!(
            "{:>4} {:>8.4} {:>9.3e} {:>9.4} {:>10.3e} {:>10.3e} {:>8.1e} {:>9.4} {:>7.4} {:>9.3e} {:>9.1e}",
            s.step, s.slack, s.mu, s.lambda, s.a_deviation, s.max_defect, s.defect_slack, s.cluster_diameter, s.largest_share, s.field_difference, s.gauss_bonnet
        );
    }
    if let Some(e) = report.error {
        println!("stopped: {e}");
    }
    Ok(())
}
