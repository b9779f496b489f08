//! Mass and area lower bounds on a cone-free component, on the round
//! sphere (where they are equalities) and on a solved three-point metric.

use conic::field::{Chart, Field, FootballField};
use conic::levelset::level_bounds_check;
use conic::liouville::{solve_with, ConformalProblem, SolverConfig};
use conic::{ConePoint, Divisor, FootballMetric, Point};

fn main() -> conic::Result<()> {
    let round = FootballField::new(FootballMetric::new(0.0)?, Chart::new(4.0, 256)?);
    let r = level_bounds_check(&round, 0.0, Point::new(0.0, 0.0))?;
    println!("round sphere: H = {:.6}, worst slack {:+.2e}", r.max_u, r.worst_slack);

    let mut pts = vec![ConePoint::at_infinity(-0.1)];
    for k in 0..3 {
        pts.push(ConePoint::finite(Point::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0), -0.1));
    }
    let sol = solve_with(&ConformalProblem::new(Divisor::new(pts)?, Chart::new(8.0, 256)?)?, &SolverConfig::default(), None)?;
    // the origin is a local maximum; stop halfway down to the saddle toward a cone
    let top = sol.u(Point::new(0.0, 0.0));
    let saddle = (1..100).map(|k| sol.u(Point::new(0.01 * k as f64, 0.0))).fold(f64::INFINITY, f64::min);
    let t0 = 0.5 * (top + saddle);
    let r = level_bounds_check(&sol, t0, Point::new(0.0, 0.0))?;
    println!("four points: saddle {saddle:.4}, t0 = {t0:.4}, H = {:.6}, worst slack {:+.2e}", r.max_u, r.worst_slack);
    for s in &r.samples {
        println!("  t {:.4}: a {:.5} >= {:.5}, b {:.5} >= {}", s.t, s.a, s.a_bound, s.b, s.b_bound.map_or("-".into(), |b| format!("{b:.5}")));
    }
    Ok(())
}
