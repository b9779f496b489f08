//! Classify a few divisors and compare the subcritical test with the
//! angle condition for triangles and quadrilaterals.

use std::f64::consts::PI;

use conic::divisor::{classify, luo_tian_admissible, total_area, DEFAULT_CRITICAL_TOL};
use conic::{ConePoint, Divisor, Point};

fn main() -> conic::Result<()> {
    for orders in [vec![-0.5, -0.5, -0.5], vec![-0.5, -0.25, -0.25], vec![-0.75, -0.1, -0.1], vec![0.5], vec![-0.5, -0.5]] {
        let d = Divisor::from_orders(&orders)?;
        let c = classify(&d, DEFAULT_CRITICAL_TOL);
        let angles: Vec<f64> = orders.iter().map(|b| 2.0 * PI * (1.0 + b)).collect();
        let lt = luo_tian_admissible(&angles).map_or("n/a".to_string(), |ok| ok.to_string());
        println!("{orders:?}: {} slack {:+.4} chi {:.2} area {:.4} angle condition {lt}", c.kind, c.slack, c.chi, total_area(&d));
    }

    // divisors travel as JSON
    let d = Divisor::new(vec![
        ConePoint::at_infinity(-0.5),
        ConePoint::finite(Point::new(1.0, 0.0), -0.25),
        ConePoint::finite(Point::new(-1.0, 0.0), -0.25),
    ])?;
    let text = d.to_json();
    assert_eq!(Divisor::from_json(&text)?, d);
    println!("{text}");
    Ok(())
}
