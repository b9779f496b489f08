//! Gromov-Hausdorff lower bounds between doubled lens triangles and the
//! football they collapse to.

use std::f64::consts::PI;

use conic::convergence::{gh_lower_bound, sample_metric, Surface};
use conic::polytope::TriangleSurface;
use conic::FootballMetric;

fn main() -> conic::Result<()> {
    let n = 200;
    let football = FootballMetric::new(-2.0 / 3.0)?;
    let dy = sample_metric(&Surface::Football(&football), n, 7)?;
    let b = 2.0 * PI / 3.0;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let s = TriangleSurface::from_angles(2.0 * b - PI + eps, b, b)?;
        let dx = sample_metric(&Surface::Triangle(&s), n, 7)?;
        println!("eps {eps:.0e}: diameter {:.6}, GH lower bound {:.3e}", dx.max(), gh_lower_bound(&dx, &dy)?);
    }
    Ok(())
}
