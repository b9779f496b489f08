//! Footballs: the constant-curvature spheres with two equal cone points at
//! 0 and infinity, with conformal factor
//! `4 a^2 |z|^{2b} / (1 + |z|^{2a})^2`, `a = 1 + b`.

use std::f64::consts::PI;

use crate::divisor::Point;
use crate::error::{Error, Result};
use crate::quadrature::{bisect, sigmoid, softplus};

const RHO_MIN: f64 = 1e-12;
const RHO_MAX: f64 = 1e12;

/// Football with cone order `beta` at both poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootballMetric {
    beta: f64,
}

impl FootballMetric {
    /// Orders in (-1, 0]; `beta = 0` is the round sphere.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > -1.0 && beta <= 0.0) {
            return Err(Error::Domain(format!("football order {beta} is outside (-1, 0]")));
        }
        Ok(FootballMetric { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `alpha = 1 + beta`; the cone angle at each pole is `2 pi alpha`.
    pub fn alpha(&self) -> f64 {
        1.0 + self.beta
    }

    /// Exponent `2 + 2 beta` of the denominator.
    fn q(&self) -> f64 {
        2.0 + 2.0 * self.beta
    }

    pub fn cone_angle(&self) -> f64 {
        2.0 * PI * self.alpha()
    }

    pub fn total_area(&self) -> f64 {
        4.0 * PI * self.alpha()
    }

    /// `e^{2u}` at `z`.
    pub fn conformal_factor(&self, z: Point) -> Result<f64> {
        let r = z.norm();
        if r == 0.0 && self.beta < 0.0 {
            return Err(Error::Domain("the football factor is singular at z = 0".into()));
        }
        let a = self.alpha();
        let rq = r.powf(self.q());
        Ok(4.0 * a * a * r.powf(2.0 * self.beta) / ((1.0 + rq) * (1.0 + rq)))
    }

    /// `u = ln(2 alpha) + beta ln r - ln(1 + r^q)` as a function of `ln r`.
    /// Stable for any real `s`, including very large and very small radii.
    pub fn log_factor_radial(&self, s: f64) -> f64 {
        (2.0 * self.alpha()).ln() + self.beta * s - softplus(self.q() * s)
    }

    /// `u(z)`; `+inf` at the origin when `beta < 0`.
    pub fn log_factor(&self, z: Point) -> f64 {
        let r = z.norm();
        if r == 0.0 {
            return if self.beta < 0.0 { f64::INFINITY } else { (2.0 * self.alpha()).ln() };
        }
        self.log_factor_radial(r.ln())
    }

    /// `du/dr`, so that the gradient is `du/dr * z/|z|`.
    pub fn log_factor_dr(&self, r: f64) -> f64 {
        let q = self.q();
        let w = sigmoid(q * r.ln());
        self.beta / r - q * w / r
    }

    /// Radius of the superlevel boundary `{u = t}`.
    pub fn rho_from_t(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("level {t} is not finite")));
        }
        if self.beta == 0.0 {
            if t > std::f64::consts::LN_2 {
                return Err(Error::Domain(format!(
                    "the round sphere has no level {t} above ln 2"
                )));
            }
            return Ok((2.0 * (-t).exp() - 1.0).max(0.0).sqrt());
        }
        let g = |s: f64| self.log_factor_radial(s) - t;
        let (lo, hi) = (RHO_MIN.ln(), RHO_MAX.ln());
        if g(lo) < 0.0 || g(hi) > 0.0 {
            return Err(Error::Domain(format!(
                "level {t} has its radius outside [{RHO_MIN:e}, {RHO_MAX:e}]"
            )));
        }
        Ok(bisect(g, lo, hi, 1e-13).exp())
    }

    /// Curvature-weighted area `A(t)` of `{u > t}`.
    pub fn a_profile(&self, t: f64) -> Result<f64> {
        let rho = self.rho_from_t(t)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        Ok(self.total_area() * sigmoid(self.q() * rho.ln()))
    }

    /// Flat area `B(t)` of `{u > t}`.
    pub fn b_profile(&self, t: f64) -> Result<f64> {
        let rho = self.rho_from_t(t)?;
        Ok(PI * rho * rho)
    }

    /// Largest deviation from 1 of `(a/A + b/(C - A)) A'` over the interior of
    /// `t_grid`, with `a = beta/(2 beta + 2)`, `b = -(beta + 2)/(2 beta + 2)`,
    /// `C = 4 pi (1 + beta)` and `A'` from centred differences.
    pub fn ode_check(&self, t_grid: &[f64]) -> Result<f64> {
        if t_grid.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "the ODE check needs at least 3 levels, got {}",
                t_grid.len()
            )));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        let al = self.beta;
        let a = al / (2.0 * al + 2.0);
        let b = -(al + 2.0) / (2.0 * al + 2.0);
        let total = 4.0 * PI * (1.0 + al);
        let values = t_grid
            .iter()
            .map(|&t| self.a_profile(t))
            .collect::<Result<Vec<f64>>>()?;
        let mut worst = 0.0f64;
        for k in 1..t_grid.len() - 1 {
            let (h0, h1) = (t_grid[k] - t_grid[k - 1], t_grid[k + 1] - t_grid[k]);
            // three-point derivative, second order on uneven spacing
            let d = -h1 / (h0 * (h0 + h1)) * values[k - 1]
                + (h1 - h0) / (h0 * h1) * values[k]
                + h0 / (h1 * (h0 + h1)) * values[k + 1];
            let av = values[k];
            let lhs = (a / av + b / (total - av)) * d;
            worst = worst.max((lhs - 1.0).abs());
        }
        Ok(worst)
    }

    /// Distance between the two poles.
    pub fn pole_distance(&self) -> f64 {
        PI
    }

    /// Position on the doubled lune model: polar angle from the pole at 0 and
    /// an azimuth in `[0, 2 pi alpha)`.
    pub fn lune_coordinates(&self, z: Point) -> (f64, f64) {
        let a = self.alpha();
        let r = z.norm();
        let theta = if r == 0.0 { 0.0 } else { 2.0 * (a * r.ln()).exp().atan() };
        let mut arg = z.im.atan2(z.re);
        if arg < 0.0 {
            arg += 2.0 * PI;
        }
        (theta, a * arg)
    }

    /// Intrinsic distance between two points given in lune coordinates.
    pub fn lune_distance(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        let period = 2.0 * PI * self.alpha();
        let d = (p.1 - q.1).rem_euclid(period);
        // at most pi alpha <= pi, so the minor arc stays inside the lune
        let delta = d.min(period - d);
        let c = p.0.cos() * q.0.cos() + p.0.sin() * q.0.sin() * delta.cos();
        c.clamp(-1.0, 1.0).acos()
    }

    /// Intrinsic distance between two chart points.
    pub fn distance(&self, z: Point, w: Point) -> f64 {
        self.lune_distance(self.lune_coordinates(z), self.lune_coordinates(w))
    }
}
