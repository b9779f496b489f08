//! Closed-form level profiles of a football and the ODE they satisfy.

use conic::FootballMetric;

fn main() -> conic::Result<()> {
    let beta = -0.5;
    let m = FootballMetric::new(beta)?;
    println!("beta {beta}: cone angle {:.6}, area {:.6}, pole distance {:.6}", m.cone_angle(), m.total_area(), m.pole_distance());
    let anchor = (1.0 + beta).ln();
    println!("{:>8} {:>12} {:>12} {:>12}", "t", "rho", "A(t)", "B(t)");
    for k in -6..=6 {
        let t = anchor + 0.5 * k as f64;
        println!("{t:>8.4} {:>12.6e} {:>12.8} {:>12.6e}", m.rho_from_t(t)?, m.a_profile(t)?, m.b_profile(t)?);
    }
    let grid: Vec<f64> = (0..=6000).map(|k| anchor - 3.0 + 1e-3 * k as f64).collect();
    println!("ODE residual on a 1e-3 grid: {:.3e}", m.ode_check(&grid)?);
    println!("distance from 0 to 1: {:.6}", m.distance(0.0.into(), 1.0.into()));
    Ok(())
}
