//! Log conformal factors `u` on the stereographic chart, seen as fields the
//! level-set code can sample.
//!
//! Every field lives on a square chart `[-L, L]^2` with a uniform lattice.
//! Outside the chart a field may carry a radial far-field model, which is how
//! the tail of the metric beyond the square is accounted for.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::divisor::Point;
use crate::error::{Error, Result};
use crate::football::FootballMetric;
use crate::quadrature::{bisect, sigmoid, softplus, unit32};

/// Square `[-L, L]^2` cut into `cells x cells` squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub half_width: f64,
    pub cells: usize,
}

impl Chart {
    pub fn new(half_width: f64, cells: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput(format!("chart half width {half_width} must be positive")));
        }
        if cells < 4 || !cells.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "the chart needs an even number of cells, at least 4 (got {cells})"
            )));
        }
        Ok(Chart { half_width, cells })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.cells + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.coord(i), self.coord(j))
    }

    /// Row-major node index, `i` along x.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_per_side() + i
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.cells || j == self.cells
    }

    pub fn contains(&self, z: Point) -> bool {
        z.re.abs() <= self.half_width && z.im.abs() <= self.half_width
    }

    /// Distance from the origin to the chart boundary along direction `theta`.
    pub fn boundary_radius(&self, theta: f64) -> f64 {
        self.half_width / theta.cos().abs().max(theta.sin().abs())
    }

    /// Cell containing `z` and the local coordinates in [0, 1]^2.
    pub fn locate(&self, z: Point) -> (usize, usize, f64, f64) {
        let h = self.h();
        let fx = ((z.re + self.half_width) / h).clamp(0.0, self.cells as f64);
        let fy = ((z.im + self.half_width) / h).clamp(0.0, self.cells as f64);
        let i = (fx.floor() as usize).min(self.cells - 1);
        let j = (fy.floor() as usize).min(self.cells - 1);
        (i, j, fx - i as f64, fy - j as f64)
    }
}

/// The radial model `u = c - (2 + b) ln r - ln(1 + k r^{-q})` with
/// `q = 2 + 2b` and `k = e^{2c} / q^2`, used outside the chart. It is the
/// exact far field of a football and the leading behaviour near a cone point
/// of order `b` at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub c: f64,
    pub beta_inf: f64,
}

impl FarField {
    pub fn q(&self) -> f64 {
        2.0 + 2.0 * self.beta_inf
    }

    /// `ln k`.
    pub fn ln_k(&self) -> f64 {
        2.0 * self.c - 2.0 * self.q().ln()
    }

    pub fn u(&self, r: f64) -> f64 {
        let s = r.ln();
        self.c - (2.0 + self.beta_inf) * s - softplus(self.ln_k() - self.q() * s)
    }

    pub fn du_dr(&self, r: f64) -> f64 {
        let s = r.ln();
        let w = sigmoid(self.ln_k() - self.q() * s);
        (-(2.0 + self.beta_inf) + self.q() * w) / r
    }

    /// Derivative of `u(r)` with respect to `c` at fixed `r`.
    pub fn du_dc(&self, r: f64) -> f64 {
        1.0 - 2.0 * sigmoid(self.ln_k() - self.q() * r.ln())
    }

    /// `int_r^inf e^{2u} rho d rho`, the mass per radian beyond radius `r`.
    pub fn mass_beyond(&self, r: f64) -> f64 {
        self.q() * sigmoid(self.ln_k() - self.q() * r.ln())
    }

    /// Derivative of [`FarField::mass_beyond`] with respect to `c`.
    pub fn mass_beyond_dc(&self, r: f64) -> f64 {
        let w = sigmoid(self.ln_k() - self.q() * r.ln());
        2.0 * self.q() * w * (1.0 - w)
    }

    /// Radius where the model crosses level `t`, searched in `[r_min, 1e12]`
    /// where the model is decreasing. `None` when `u(r_min) <= t`.
    pub fn radius_of_level(&self, t: f64, r_min: f64) -> Option<f64> {
        if self.u(r_min) <= t {
            return None;
        }
        let hi = 1e12f64;
        if self.u(hi) > t {
            return Some(hi);
        }
        let s = bisect(|s| self.u(s.exp()) - t, r_min.ln(), hi.ln(), 1e-14);
        Some(s.exp())
    }

    /// Mass of the model outside the square of half width `l`.
    pub fn mass_outside_square(&self, l: f64) -> (f64, f64) {
        let mut m = 0.0;
        let mut dm = 0.0;
        for (x, w) in unit32().iter() {
            let theta = x * PI / 4.0;
            let r = l / theta.cos();
            m += w * self.mass_beyond(r);
            dm += w * self.mass_beyond_dc(r);
        }
        (2.0 * PI * m, 2.0 * PI * dm)
    }

    /// Contribution of `{u > t}` outside the square of half width `l`:
    /// `(mass, flat area, boundary length, boundary flux)`. Only the part of
    /// the circle `r = r_t` lying outside the square counts towards the
    /// length and the flux.
    pub fn level_tail(&self, t: f64, l: f64) -> TailPiece {
        let Some(rt) = self.radius_of_level(t, l) else {
            return TailPiece::default();
        };
        let theta_star = if rt >= l * std::f64::consts::SQRT_2 {
            PI / 4.0
        } else {
            (l / rt).acos()
        };
        let mut a = 0.0;
        for (x, w) in unit32().iter() {
            let theta = x * theta_star;
            a += w * theta_star * self.mass_beyond(l / theta.cos());
        }
        a -= theta_star * self.mass_beyond(rt);
        let b = 0.5 * (rt * rt * theta_star - l * l * theta_star.tan());
        TailPiece {
            mass: 8.0 * a,
            area: 8.0 * b,
            length: 8.0 * rt * theta_star,
            flux: 8.0 * rt * theta_star * self.du_dr(rt).abs(),
            radius: rt,
        }
    }
}

/// See [`FarField::level_tail`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TailPiece {
    pub mass: f64,
    pub area: f64,
    pub length: f64,
    pub flux: f64,
    pub radius: f64,
}

/// A log conformal factor `u` sampled by the level-set code.
pub trait Field: Sync {
    fn chart(&self) -> Chart;

    /// `u(z)`; `+inf` at cone points of negative order.
    fn u(&self, z: Point) -> f64;

    /// Gradient of `u` as `(du/dx, du/dy)`.
    fn grad(&self, z: Point) -> [f64; 2];

    /// Finite cone points with their orders.
    fn cone_points(&self) -> Vec<(Point, f64)>;

    /// Radial model of `u` outside the chart, if the field extends there.
    fn far_field(&self) -> Option<FarField>;

    /// Total curvature-one area `2 pi (2 + |D|)`.
    fn total_mass(&self) -> f64;

    /// Sum of the finite orders.
    fn alpha(&self) -> f64 {
        self.cone_points().iter().map(|p| p.1).sum()
    }

    /// Order of the cone point at infinity.
    fn infinity_order(&self) -> f64 {
        self.far_field().map_or(0.0, |f| f.beta_inf)
    }

    /// Mass `int e^{2u}` over cell `(i, j)` of the chart.
    fn cell_mass(&self, i: usize, j: usize) -> f64 {
        default_cell_mass(self, i, j)
    }
}

/// Radius within which cells are integrated by polar rules around a cone point,
/// in units of the lattice spacing.
pub const POLAR_RADIUS_CELLS: f64 = 2.0;

/// 3x3 Gauss on ordinary cells; cells within two spacings of a cone point
/// use the polar rule of [`crate::quadrature::polar_square`].
pub fn default_cell_mass<F: Field + ?Sized>(f: &F, i: usize, j: usize) -> f64 {
    let chart = f.chart();
    let h = chart.h();
    let lo = chart.node(i, j);
    let hi = lo + Point::new(h, h);
    let singular: Vec<(Point, f64)> = f
        .cone_points()
        .into_iter()
        .filter(|(z, b)| *b != 0.0 && near_box(*z, lo, hi, POLAR_RADIUS_CELLS * h))
        .collect();
    let e2u = |p: Point| (2.0 * f.u(p)).exp();
    if singular.is_empty() {
        crate::quadrature::gauss_box(lo, hi, 3, &e2u)
    } else {
        crate::quadrature::singular_box(lo, hi, &singular, &e2u)
    }
}

/// True when `z` lies within distance `pad` of the box `[lo, hi]`.
pub fn near_box(z: Point, lo: Point, hi: Point, pad: f64) -> bool {
    let dx = (lo.re - z.re).max(z.re - hi.re).max(0.0);
    let dy = (lo.im - z.im).max(z.im - hi.im).max(0.0);
    dx * dx + dy * dy <= pad * pad
}

/// A football on a chart, with cone points at 0 and infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootballField {
    pub metric: FootballMetric,
    pub chart: Chart,
    /// Rotation-free gauge: the field is `u(scale z) + ln scale`, moved so the
    /// finite cone point sits at `center`.
    pub scale: f64,
    pub center: Point,
}

impl FootballField {
    pub fn new(metric: FootballMetric, chart: Chart) -> Self {
        FootballField { metric, chart, scale: 1.0, center: Point::new(0.0, 0.0) }
    }

    /// The field `z -> u(scale (z - center)) + ln scale`.
    pub fn with_gauge(mut self, scale: f64, center: Point) -> Self {
        self.scale = scale;
        self.center = center;
        self
    }

    fn local(&self, z: Point) -> Point {
        (z - self.center) * self.scale
    }
}

impl Field for FootballField {
    fn chart(&self) -> Chart {
        self.chart
    }

    fn u(&self, z: Point) -> f64 {
        self.metric.log_factor(self.local(z)) + self.scale.ln()
    }

    fn grad(&self, z: Point) -> [f64; 2] {
        let w = self.local(z);
        let r = w.norm();
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = self.metric.log_factor_dr(r) * self.scale / r;
        [d * w.re, d * w.im]
    }

    fn cone_points(&self) -> Vec<(Point, f64)> {
        if self.metric.beta() == 0.0 {
            Vec::new()
        } else {
            vec![(self.center, self.metric.beta())]
        }
    }

    fn far_field(&self) -> Option<FarField> {
        // exact only when the cone point sits at the origin
        if self.center != Point::new(0.0, 0.0) {
            return None;
        }
        let a = self.metric.alpha();
        Some(FarField {
            c: (2.0 * a).ln() - a * self.scale.ln(),
            beta_inf: self.metric.beta(),
        })
    }

    fn total_mass(&self) -> f64 {
        self.metric.total_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_geometry() {
        let c = Chart::new(8.0, 16).unwrap();
        assert_eq!(c.h(), 1.0);
        assert_eq!(c.node(0, 16), Point::new(-8.0, 8.0));
        assert_eq!(c.index(3, 2), 2 * 17 + 3);
        assert!((c.boundary_radius(PI / 4.0) - 8.0 * 2f64.sqrt()).abs() < 1e-12);
        let (i, j, a, b) = c.locate(Point::new(0.25, -7.5));
        assert_eq!((i, j), (8, 0));
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert!(Chart::new(8.0, 15).is_err());
    }

    #[test]
    fn far_field_reproduces_footballs() {
        for &b in &[0.0, -0.25, -0.5, -0.75] {
            let f = FootballMetric::new(b).unwrap();
            let ff = FarField { c: (2.0 * (1.0 + b)).ln(), beta_inf: b };
            for &r in &[0.3, 1.0, 7.0, 1e4] {
                let z = Point::new(r, 0.0);
                assert!((ff.u(r) - f.log_factor(z)).abs() < 1e-12);
                assert!((ff.du_dr(r) - f.log_factor_dr(r)).abs() < 1e-12);
            }
            // mass beyond r against the closed-form profile at level u(r)
            let r = 2.5;
            let beyond = 2.0 * PI * ff.mass_beyond(r);
            let inside = f.a_profile(f.log_factor(Point::new(r, 0.0))).unwrap();
            assert!((beyond + inside - f.total_area()).abs() < 1e-10);
        }
    }

    #[test]
    fn far_field_derivatives() {
        let ff = FarField { c: 0.3, beta_inf: -0.4 };
        let d = 1e-6;
        let up = FarField { c: 0.3 + d, ..ff };
        let dn = FarField { c: 0.3 - d, ..ff };
        for &r in &[0.5, 3.0, 20.0] {
            assert!(((up.u(r) - dn.u(r)) / (2.0 * d) - ff.du_dc(r)).abs() < 1e-8);
            let fd = (up.mass_beyond(r) - dn.mass_beyond(r)) / (2.0 * d);
            assert!((fd - ff.mass_beyond_dc(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn square_tail_against_radial_integration() {
        let ff = FarField { c: 0.0, beta_inf: -0.5 };
        let (m, _) = ff.mass_outside_square(4.0);
        // brute force: polar integration of e^{2u} r over r > r_sq(theta)
        let (nt, nr) = (2000, 4000);
        let mut brute = 0.0;
        for a in 0..nt {
            let theta = (a as f64 + 0.5) * 2.0 * PI / nt as f64;
            let r0 = Chart::new(4.0, 4).unwrap().boundary_radius(theta);
            // substitute r = r0 / s^2 on (0, 1]
            for k in 0..nr {
                let s = (k as f64 + 0.5) / nr as f64;
                let r = r0 / (s * s);
                let jac = 2.0 * r0 / (s * s * s);
                brute += (2.0 * ff.u(r)).exp() * r * jac / nr as f64 * 2.0 * PI / nt as f64;
            }
        }
        assert!((m - brute).abs() < 1e-5 * m, "{m} vs {brute}");
    }

    #[test]
    fn level_tail_of_a_circle_outside_the_square() {
        let ff = FarField { c: 0.0, beta_inf: -0.5 };
        let l = 2.0;
        let t = ff.u(5.0);
        let piece = ff.level_tail(t, l);
        assert!((piece.radius - 5.0).abs() < 1e-9);
        assert!((piece.area - (PI * 25.0 - 16.0)).abs() < 1e-9);
        assert!((piece.length - 2.0 * PI * 5.0).abs() < 1e-9);
        let (outside, _) = ff.mass_outside_square(l);
        assert!((piece.mass - (outside - 2.0 * PI * ff.mass_beyond(5.0))).abs() < 1e-10);
        assert_eq!(ff.level_tail(ff.u(1.5), l), TailPiece::default());
    }

    #[test]
    fn football_field_gauge() {
        let f = FootballMetric::new(-0.5).unwrap();
        let chart = Chart::new(8.0, 64).unwrap();
        let g = FootballField::new(f, chart).with_gauge(2.0, Point::new(0.0, 0.0));
        let z = Point::new(0.7, 0.2);
        assert!((g.u(z) - (f.log_factor(z * 2.0) + 2f64.ln())).abs() < 1e-14);
        let ff = g.far_field().unwrap();
        for &r in &[9.0, 30.0] {
            assert!((ff.u(r) - g.u(Point::new(0.0, r))).abs() < 1e-12);
        }
        let d = 1e-6;
        let gr = g.grad(z);
        let fx = (g.u(z + Point::new(d, 0.0)) - g.u(z - Point::new(d, 0.0))) / (2.0 * d);
        let fy = (g.u(z + Point::new(0.0, d)) - g.u(z - Point::new(0.0, d))) / (2.0 * d);
        assert!((gr[0] - fx).abs() < 1e-7 && (gr[1] - fy).abs() < 1e-7);
    }
}
