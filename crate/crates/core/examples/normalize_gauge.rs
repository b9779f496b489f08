//! Fix the scaling and translation gauge of a football moved off centre.

use conic::field::{Chart, FootballField};
use conic::levelset::normalize;
use conic::{FootballMetric, Point};

fn main() -> conic::Result<()> {
    let beta: f64 = -0.5;
    let t_star = (1.0 + beta).ln() - 0.5;
    let base = FootballField::new(FootballMetric::new(beta)?, Chart::new(8.0, 256)?);
    for (scale, center) in [(1.0, Point::new(0.0, 0.0)), (2.0, Point::new(0.0, 0.0)), (1.0, Point::new(0.3, -0.1))] {
        let f = base.with_gauge(scale, center);
        let n = normalize(&f, beta, t_star)?;
        println!(
            "scale {scale} centre {center}: ln lambda {:+.8}, kappa {:.6}, cone point lands at {:.2e}",
            n.lambda.ln(),
            n.kappa,
            n.apply(center).norm()
        );
    }
    Ok(())
}
