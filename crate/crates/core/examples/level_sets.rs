//! Superlevel sets of a solved field: masses, areas, the functional f and
//! isoperimetric defects, with slacks from a coarser lattice.

use conic::field::{Chart, Field};
use conic::levelset::{bonnesen, extract, profile};
use conic::liouville::{solve_with, ConformalProblem, SolverConfig};
use conic::{ConePoint, Divisor, Point};

fn main() -> conic::Result<()> {
    let d = Divisor::new(vec![
        ConePoint::at_infinity(-0.2),
        ConePoint::finite(Point::new(0.8, 0.0), -0.2),
        ConePoint::finite(Point::new(-0.8, 0.0), -0.2),
    ])?;
    let sol = solve_with(&ConformalProblem::new(d, Chart::new(8.0, 128)?)?, &SolverConfig::default(), None)?;

    let ts: Vec<f64> = (0..13).map(|k| -3.0 + 0.5 * k as f64).collect();
    let p = profile(&sol, &ts)?;
    println!("total mass {:.6}, f ranges over [0, {:.4}]", p.total_mass, p.f_upper());
    println!("{:>6} {:>10} {:>10} {:>11} {:>10} {:>5} {:>10}", "t", "A", "B", "f", "eps_f", "comp", "defect");
    for q in &p.points {
        println!("{:>6.2} {:>10.6} {:>10.5} {:>11.3e} {:>10.2e} {:>5} {:>10.3e}", q.t, q.a, q.b, q.f, q.eps_f, q.components, q.max_defect());
    }
    println!("f monotonicity excess {:.2e}, range excess {:.2e}", p.f_monotonicity_excess(), p.f_range_excess());

    let regions = extract(&sol, 0.0);
    if let Some(r) = regions.first() {
        match bonnesen(r, sol.chart().h()) {
            Ok(b) => println!("level 0: r_in {:.4} r_out {:.4} defect {:.4} >= {:.4}", b.r_in, b.r_out, r.defect(), b.bound),
            Err(e) => println!("level 0: {e}"),
        }
    }
    Ok(())
}
