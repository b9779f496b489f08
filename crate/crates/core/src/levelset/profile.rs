use std::f64::consts::PI;

use serde::Serialize;

use super::extract::{LevelSampler, Region};
use crate::error::{Error, Result};
use crate::field::{Chart, Field};
use crate::parallel::par_map;

/// Level-set data at one `t`. The `eps_*` fields are discretization slacks
/// estimated from the same quantity on a lattice twice as coarse.
#[derive(Debug, Clone, Serialize)]
pub struct LevelPoint {
    pub t: f64,
    /// `int_{u > t} e^{2u}`
    pub a: f64,
    /// flat area of `{u > t}`
    pub b: f64,
    pub perimeter: f64,
    /// defect of each component, largest component first
    pub defects: Vec<f64>,
    pub f: f64,
    pub components: usize,
    /// 1 when the set is empty
    pub largest_share: f64,
    /// `int |grad u| + 2 pi (orders inside) - A`
    pub flux_residual: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_f: f64,
    pub eps_defect: f64,
    pub eps_flux: f64,
}

impl LevelPoint {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelProfile {
    /// sum of the finite orders
    pub alpha: f64,
    /// `C = 2 pi (2 + |D|)`
    pub total_mass: f64,
    /// mass of the sampled field, cells plus tail
    pub measured_mass: f64,
    pub points: Vec<LevelPoint>,
}

impl LevelProfile {
    /// `C^2 - 4 pi (1 + alpha) C`, the upper end of the range of `f`.
    pub fn f_upper(&self) -> f64 {
        let c = self.total_mass;
        c * c - 4.0 * PI * (1.0 + self.alpha) * c
    }

    /// Largest increase of `f` between neighbouring levels beyond the joint
    /// slack (0 or negative when `f` is nonincreasing within tolerance).
    pub fn f_monotonicity_excess(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].f - w[0].f - w[0].eps_f - w[1].eps_f)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest violation of `-eps <= f <= f_upper + eps` (0 or negative when inside).
    /// The upper end also allows for the field's own mass error: `f` tends
    /// to `C^2 - 4 pi (1 + alpha) C` with `C` the mass actually sampled.
    pub fn f_range_excess(&self) -> f64 {
        let g = |c: f64| c * c - 4.0 * PI * (1.0 + self.alpha) * c;
        let up = self.f_upper() + (g(self.measured_mass) - g(self.total_mass)).max(0.0);
        self.points
            .iter()
            .map(|p| (-p.f - p.eps_f).max(p.f - up - p.eps_f))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest increase of `A` or `B` between neighbouring levels, relative
    /// to the slacks (0 or negative when both are nonincreasing).
    pub fn ab_monotonicity_excess(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let da = w[1].a - w[0].a - w[0].eps_a - w[1].eps_a;
                let db = w[1].b - w[0].b - w[0].eps_b - w[1].eps_b;
                da.max(db)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Level data on `t_grid` with slacks from a coarse lattice.
pub fn profile<F: Field + ?Sized>(field: &F, t_grid: &[f64]) -> Result<LevelProfile> {
    profile_with(&LevelSampler::new(field), t_grid, true)
}

/// Level data from an existing sampler; with `estimate_error` off every slack is 0.
pub fn profile_with<F: Field + ?Sized>(
    sampler: &LevelSampler<'_, F>,
    t_grid: &[f64],
    estimate_error: bool,
) -> Result<LevelProfile> {
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("levels must be finite".into()));
    }
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let field = sampler.field();
    let coarse = if estimate_error {
        let chart = sampler.chart();
        let cells = ((chart.cells / 2).max(4) + 1) & !1;
        Some(LevelSampler::with_chart(field, Chart::new(chart.half_width, cells)?))
    } else {
        None
    };
    let alpha = field.alpha();
    let cones = field.cone_points();
    let points = par_map(ts.len(), |k| {
        let t = ts[k];
        let fine = Totals::new(&sampler.extract(t), &cones, alpha, t);
        let mut p = fine.point(t);
        if let Some(c) = &coarse {
            let g = Totals::new(&c.extract(t), &cones, alpha, t);
            let (da, db, dp) = ((fine.a - g.a).abs(), (fine.b - g.b).abs(), (fine.p - g.p).abs());
            let e2t = (2.0 * t).exp();
            p.eps_a = da;
            p.eps_b = db;
            p.eps_f = (2.0 * fine.a - 4.0 * PI * (1.0 + alpha)).abs() * da + da * da + 4.0 * PI * e2t * db;
            p.eps_defect = 2.0 * fine.p * dp + dp * dp + 4.0 * PI * db;
            p.eps_flux = (fine.flux_residual - g.flux_residual).abs();
        }
        p
    });
    Ok(LevelProfile { alpha, total_mass: field.total_mass(), measured_mass: sampler.total_mass(), points })
}

struct Totals {
    a: f64,
    b: f64,
    p: f64,
    f: f64,
    defects: Vec<f64>,
    components: usize,
    share: f64,
    flux_residual: f64,
}

impl Totals {
    fn new(regions: &[Region], cones: &[(crate::divisor::Point, f64)], alpha: f64, t: f64) -> Self {
        let a: f64 = regions.iter().map(|r| r.mass).sum();
        let b: f64 = regions.iter().map(|r| r.area).sum();
        let p: f64 = regions.iter().map(|r| r.perimeter).sum();
        let flux: f64 = regions.iter().map(|r| r.flux).sum();
        let inside: f64 = regions.iter().flat_map(|r| r.singular.iter()).map(|k| cones[*k].1).sum();
        let f = a * a - 4.0 * PI * (1.0 + alpha) * a + 4.0 * PI * (2.0 * t).exp() * b;
        Totals {
            a,
            b,
            p,
            f,
            defects: regions.iter().map(|r| r.defect()).collect(),
            components: regions.len(),
            share: super::share(regions).unwrap_or(1.0),
            flux_residual: flux + 2.0 * PI * inside - a,
        }
    }

    fn point(&self, t: f64) -> LevelPoint {
        LevelPoint {
            t,
            a: self.a,
            b: self.b,
            perimeter: self.p,
            defects: self.defects.clone(),
            f: self.f,
            components: self.components,
            largest_share: self.share,
            flux_residual: self.flux_residual,
            eps_a: 0.0,
            eps_b: 0.0,
            eps_f: 0.0,
            eps_defect: 0.0,
            eps_flux: 0.0,
        }
    }
}
