use std::f64::consts::PI;

use crate::divisor::{classify, ClassKind, Divisor, Point, DEFAULT_CRITICAL_TOL};
use crate::error::{Error, Result};
use crate::field::{Chart, FarField};

/// A divisor placed on a chart: one cone point at infinity (order `beta_inf`,
/// zero when absent) and finite points strictly inside the square.
#[derive(Debug, Clone)]
pub struct ConformalProblem {
    divisor: Divisor,
    chart: Chart,
    beta_inf: f64,
    finite: Vec<(Point, f64)>,
}

impl ConformalProblem {
    pub fn new(divisor: Divisor, chart: Chart) -> Result<Self> {
        let finite = divisor.finite_points();
        let h = chart.h();
        for (k, (z, _)) in finite.iter().enumerate() {
            let margin = chart.half_width - z.re.abs().max(z.im.abs());
            if margin < 2.0 * h {
                return Err(Error::InvalidInput(format!(
                    "cone point {k} at ({}, {}) must lie at least two cells inside the chart",
                    z.re, z.im
                )));
            }
        }
        let beta_inf = divisor.infinity_order().unwrap_or(0.0);
        Ok(ConformalProblem { divisor, chart, beta_inf, finite })
    }

    pub fn divisor(&self) -> &Divisor {
        &self.divisor
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn beta_inf(&self) -> f64 {
        self.beta_inf
    }

    pub fn finite_points(&self) -> &[(Point, f64)] {
        &self.finite
    }

    /// Sum of the finite orders.
    pub fn alpha(&self) -> f64 {
        self.finite.iter().map(|p| p.1).sum()
    }

    /// `2 + beta_inf + alpha`, the coefficient of `-(1/2) ln(1 + |z|^2)` in
    /// the background.
    pub fn decay(&self) -> f64 {
        2.0 + self.beta_inf + self.alpha()
    }

    pub fn total_mass(&self) -> f64 {
        2.0 * PI * (2.0 + self.divisor.degree())
    }

    /// Same divisor with every finite point mapped by `z -> z / lambda`.
    pub fn rescaled(&self, lambda: f64, chart: Chart) -> Result<Self> {
        let points = self
            .divisor
            .points()
            .iter()
            .map(|p| match p.position {
                crate::divisor::Position::Finite(z) => crate::divisor::ConePoint::finite(z / lambda, p.order),
                crate::divisor::Position::Infinity => *p,
            })
            .collect();
        ConformalProblem::new(Divisor::new(points)?, chart)
    }

    /// The background `sum beta_i ln|z - z_i| - (decay / 2) ln(1 + |z|^2)`.
    pub fn background(&self, z: Point) -> Result<f64> {
        if let Some((k, _)) = self.finite.iter().enumerate().find(|(_, (zi, b))| *b != 0.0 && *zi == z) {
            return Err(Error::Domain(format!("the background is singular at cone point {k}")));
        }
        Ok(self.background_raw(z))
    }

    /// Background without the singular-point check; infinite at cone points.
    pub(crate) fn background_raw(&self, z: Point) -> f64 {
        let mut b = -0.5 * self.decay() * (z.norm_sqr()).ln_1p();
        for (zi, beta) in &self.finite {
            if *beta != 0.0 {
                b += beta * (z - zi).norm().ln();
            }
        }
        b
    }

    /// Background with the term of finite point `skip` removed.
    pub(crate) fn background_rest(&self, z: Point, skip: usize) -> f64 {
        let mut b = -0.5 * self.decay() * (z.norm_sqr()).ln_1p();
        for (k, (zi, beta)) in self.finite.iter().enumerate() {
            if k != skip && *beta != 0.0 {
                b += beta * (z - zi).norm().ln();
            }
        }
        b
    }

    pub(crate) fn background_grad(&self, z: Point) -> [f64; 2] {
        let s = -self.decay() / (1.0 + z.norm_sqr());
        let mut g = [s * z.re, s * z.im];
        for (zi, beta) in &self.finite {
            let d = z - zi;
            let r2 = d.norm_sqr();
            if *beta != 0.0 && r2 > 0.0 {
                g[0] += beta * d.re / r2;
                g[1] += beta * d.im / r2;
            }
        }
        g
    }

    /// `-Delta b = 2 decay / (1 + |z|^2)^2` away from the cone points.
    pub fn source(&self, z: Point) -> f64 {
        let d = 1.0 + z.norm_sqr();
        2.0 * self.decay() / (d * d)
    }

    /// Far-field model for a given constant `c`.
    pub fn far_field(&self, c: f64) -> FarField {
        FarField { c, beta_inf: self.beta_inf }
    }

    /// Whether `c` is pinned: with fewer than two finite points the scaling
    /// gauge is free and is fixed by `c = ln(2 (1 + beta_inf))`.
    pub fn pinned_constant(&self) -> Option<f64> {
        if self.finite.len() < 2 {
            Some((2.0 * (1.0 + self.beta_inf)).ln())
        } else {
            None
        }
    }

    /// Existence check: subcritical divisors, the round sphere and footballs.
    pub fn check_solvable(&self) -> Result<()> {
        let class = classify(&self.divisor, DEFAULT_CRITICAL_TOL);
        if class.kind == ClassKind::Subcritical {
            return Ok(());
        }
        let mut orders: Vec<f64> = self.finite.iter().map(|p| p.1).filter(|b| *b != 0.0).collect();
        orders.push(self.beta_inf);
        if orders.len() == 1 && orders[0] == 0.0 {
            return Ok(());
        }
        let nonzero_finite = self.finite.iter().filter(|p| p.1 != 0.0).count();
        if orders.len() == 2 && nonzero_finite == 1 && (orders[0] - orders[1]).abs() <= DEFAULT_CRITICAL_TOL {
            return Ok(());
        }
        Err(Error::NotSolvable(format!(
            "divisor is {} (slack {:.6}); only subcritical divisors, the round sphere and footballs are solved",
            class.kind, class.slack
        )))
    }

    /// Nodes within Chebyshev distance `1.5 h` of a cone point of nonzero
    /// order, with the index of the nearest such point.
    pub(crate) fn near_nodes(&self) -> Vec<Option<usize>> {
        let chart = self.chart;
        let h = chart.h();
        let n = chart.nodes_per_side();
        let mut near = vec![None; chart.node_count()];
        let mut best = vec![f64::INFINITY; chart.node_count()];
        for (k, (z, beta)) in self.finite.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let ci = ((z.re + chart.half_width) / h).round() as isize;
            let cj = ((z.im + chart.half_width) / h).round() as isize;
            for j in (cj - 2).max(0)..=(cj + 2).min(n as isize - 1) {
                for i in (ci - 2).max(0)..=(ci + 2).min(n as isize - 1) {
                    let x = chart.node(i as usize, j as usize);
                    let d = (x.re - z.re).abs().max((x.im - z.im).abs());
                    let idx = chart.index(i as usize, j as usize);
                    if d < 1.5 * h && d < best[idx] {
                        best[idx] = d;
                        near[idx] = Some(k);
                    }
                }
            }
        }
        near
    }

    /// Discrete residual `Delta_h v + e^{2(v + b)} - source` of a plain
    /// regular part `v` given at every node. Boundary nodes and nodes next to
    /// a cone point are reported as NaN.
    pub fn residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        let chart = self.chart;
        if v.len() != chart.node_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, the chart has {} nodes",
                v.len(),
                chart.node_count()
            )));
        }
        let near = self.near_nodes();
        let h2 = chart.h() * chart.h();
        let n = chart.nodes_per_side();
        let mut out = vec![f64::NAN; v.len()];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = chart.index(i, j);
                if near[k].is_some() {
                    continue;
                }
                let z = chart.node(i, j);
                let lap = (v[k - 1] + v[k + 1] + v[k - n] + v[k + n] - 4.0 * v[k]) / h2;
                out[k] = lap + (2.0 * (v[k] + self.background_raw(z))).exp() - self.source(z);
            }
        }
        Ok(out)
    }

    /// Enrichment terms for the finite cone points of nonzero order.
    pub fn enrichments(&self) -> Vec<Enrichment> {
        self.finite
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 != 0.0)
            .map(|(k, (z, beta))| Enrichment { point: k, z: *z, q: 2.0 + 2.0 * beta, rest: self.background_rest(*z, k) })
            .collect()
    }
}

/// Power term `S(z) = |z - z0|^q` attached to a cone point of order
/// `(q - 2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enrichment {
    /// Index among the finite points.
    pub point: usize,
    pub z: Point,
    pub q: f64,
    /// Value at `z` of the background without this point's logarithm.
    pub rest: f64,
}

impl Enrichment {
    pub fn value(&self, z: Point) -> f64 {
        (z - self.z).norm().powf(self.q)
    }

    /// `Delta S = q^2 r^{q - 2}`; infinite at the centre when `q < 2`.
    pub fn laplacian(&self, z: Point) -> f64 {
        self.q * self.q * (z - self.z).norm().powf(self.q - 2.0)
    }

    pub fn grad(&self, z: Point) -> [f64; 2] {
        let d = z - self.z;
        let r = d.norm();
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = self.q * r.powf(self.q - 2.0);
        [s * d.re, s * d.im]
    }

    /// `K = e^{kappa} / q^2`.
    pub fn coefficient(&self, kappa: f64) -> f64 {
        kappa.exp() / (self.q * self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divisor::ConePoint;
    use crate::football::FootballMetric;

    fn football_problem(beta: f64, cells: usize) -> ConformalProblem {
        let d = Divisor::new(vec![ConePoint::at_infinity(beta), ConePoint::finite(Point::new(0.0, 0.0), beta)]).unwrap();
        ConformalProblem::new(d, Chart::new(4.0, cells).unwrap()).unwrap()
    }

    #[test]
    fn background_examples() {
        let p = ConformalProblem::new(Divisor::empty(), Chart::new(8.0, 16).unwrap()).unwrap();
        assert_eq!(p.background(Point::new(0.0, 0.0)).unwrap(), 0.0);
        let p = football_problem(-0.5, 16);
        let b = p.background(Point::new(0.6, 0.8)).unwrap();
        assert!((b + 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(p.background(Point::new(0.0, 0.0)).is_err());
        let far = Point::new(3e7, 4e7);
        assert!((p.background(far).unwrap() + 1.5 * far.norm().ln()).abs() < 1e-12);
    }

    #[test]
    fn residual_of_constants() {
        let chart = Chart::new(4.0, 32).unwrap();
        let p = ConformalProblem::new(Divisor::empty(), chart).unwrap();
        let zero = vec![0.0; chart.node_count()];
        let r = p.residual(&zero).unwrap();
        for j in 1..32 {
            for i in 1..32 {
                let z = chart.node(i, j);
                let want = -3.0 / (1.0 + z.norm_sqr()).powi(2);
                assert!((r[chart.index(i, j)] - want).abs() < 1e-14);
            }
        }
        let ln2 = vec![2f64.ln(); chart.node_count()];
        let r = p.residual(&ln2).unwrap();
        assert!(r.iter().filter(|x| x.is_finite()).all(|x| x.abs() < 1e-13));
        assert!(r[chart.index(0, 5)].is_nan());
    }

    #[test]
    fn football_residual_is_second_order() {
        let mut errs = Vec::new();
        for cells in [64, 128] {
            let p = football_problem(-0.5, cells);
            let chart = p.chart();
            let f = FootballMetric::new(-0.5).unwrap();
            let v: Vec<f64> = (0..chart.node_count())
                .map(|k| {
                    let z = chart.node(k % chart.nodes_per_side(), k / chart.nodes_per_side());
                    f.log_factor(z) - p.background_raw(z)
                })
                .collect();
            let r = p.residual(&v).unwrap();
            let n = chart.nodes_per_side();
            // node at (1, 0)
            errs.push(r[chart.index(n / 2 + cells / 8, n / 2)].abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, errors {errs:?}");
    }

    #[test]
    fn enrichment_laplacian_matches_finite_differences() {
        let p = ConformalProblem::new(
            Divisor::new(vec![ConePoint::at_infinity(-0.3), ConePoint::finite(Point::new(0.2, -0.1), -0.3)]).unwrap(),
            Chart::new(4.0, 64).unwrap(),
        )
        .unwrap();
        let e = p.enrichments()[0];
        let d = 1e-4;
        for z in [Point::new(0.5, 0.1), Point::new(0.2, 0.75), Point::new(-0.3, -0.6), Point::new(2.3, 0.0)] {
            let lap = (e.value(z + d) + e.value(z - d) + e.value(z + Point::new(0.0, d)) + e.value(z - Point::new(0.0, d))
                - 4.0 * e.value(z))
                / (d * d);
            assert!((lap - e.laplacian(z)).abs() < 1e-5 * (1.0 + lap.abs()), "{z} {lap} {}", e.laplacian(z));
            let g = e.grad(z);
            let gx = (e.value(z + d) - e.value(z - d)) / (2.0 * d);
            assert!((g[0] - gx).abs() < 1e-7);
        }
    }

    #[test]
    fn solvability() {
        let chart = Chart::new(8.0, 16).unwrap();
        let ok = |d: Divisor| ConformalProblem::new(d, chart).unwrap().check_solvable().is_ok();
        assert!(ok(Divisor::empty()));
        assert!(ok(Divisor::new(vec![ConePoint::at_infinity(-0.5), ConePoint::finite(Point::new(0.0, 0.0), -0.5)]).unwrap()));
        assert!(!ok(Divisor::new(vec![ConePoint::at_infinity(-0.5), ConePoint::finite(Point::new(0.0, 0.0), -0.25)]).unwrap()));
        let crit = Divisor::new(vec![
            ConePoint::at_infinity(-0.5),
            ConePoint::finite(Point::new(1.0, 0.0), -0.25),
            ConePoint::finite(Point::new(-1.0, 0.0), -0.25),
        ])
        .unwrap();
        assert!(!ok(crit));
    }
}
