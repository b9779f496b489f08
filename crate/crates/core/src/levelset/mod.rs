//! Superlevel sets `{u > t}` of a field: regions, the profiles `A(t)` and
//! `B(t)`, the functional `f(t)`, isoperimetric defects and the scaling and
//! translation gauge.
//!
//! Contours come from marching squares on the lattice with crossings found
//! by bisection on the continuous field. Masses of cut cells use polygon
//! quadrature, or a polar rule with an indicator near cone points.

mod extract;
mod profile;

use std::f64::consts::PI;

use serde::Serialize;

pub use extract::{LevelSampler, Region};
pub use profile::{profile, profile_with, LevelPoint, LevelProfile};

use crate::divisor::Point;
use crate::error::{Error, Result};
use crate::field::Field;
pub use crate::geometry::Bonnesen;

/// Components of `{u > t}` on the field's chart.
pub fn extract<F: Field + ?Sized>(field: &F, t: f64) -> Vec<Region> {
    LevelSampler::new(field).extract(t)
}

/// `|dR|^2 - 4 pi |R|`.
pub fn defect(region: &Region) -> f64 {
    region.defect()
}

/// Inradius, circumradius and `pi^2 (R - r)^2` for a region bounded by
/// closed loops. The incircle is rastered at half the lattice spacing.
pub fn bonnesen(region: &Region, h: f64) -> Result<Bonnesen> {
    region.bonnesen(h / 2.0)
}

/// Area share of the largest component of `{u > t}`.
pub fn largest_component_share<F: Field + ?Sized>(field: &F, t: f64) -> Result<f64> {
    share(&LevelSampler::new(field).extract(t))
}

pub(crate) fn share(regions: &[Region]) -> Result<f64> {
    let total: f64 = regions.iter().map(|r| r.area).sum();
    match regions.first() {
        Some(r) if total > 0.0 => Ok(r.area / total),
        _ => Err(Error::Domain("the superlevel set is empty".into())),
    }
}

/// The gauge `z -> (z + kappa) / lambda` with `u~(w) = u(lambda w - kappa) + ln lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    pub lambda: f64,
    pub kappa: Point,
    /// Level of the original field holding half the mass.
    pub t_half: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization { lambda: 1.0, kappa: Point::new(0.0, 0.0), t_half: f64::NAN }
    }

    /// Position of `z` in normalized coordinates.
    pub fn apply(&self, z: Point) -> Point {
        (z + self.kappa) / self.lambda
    }

    /// Inverse of [`Normalization::apply`].
    pub fn pull_back(&self, w: Point) -> Point {
        w * self.lambda - self.kappa
    }

    /// Normalized field value at `w`.
    pub fn value<F: Field + ?Sized>(&self, field: &F, w: Point) -> f64 {
        field.u(self.pull_back(w)) + self.lambda.ln()
    }

    /// Level of the original field matching level `t` of the normalized one.
    pub fn original_level(&self, t: f64) -> f64 {
        t - self.lambda.ln()
    }
}

/// Scale so that `{u > ln(1 + beta1_inf)}` holds half the mass, then
/// translate so that the level `t_star` set has its centroid at 0.
pub fn normalize<F: Field + ?Sized>(field: &F, beta1_inf: f64, t_star: f64) -> Result<Normalization> {
    normalize_sampled(&LevelSampler::new(field), beta1_inf, t_star)
}

/// [`normalize`] reusing a sampler.
pub fn normalize_sampled<F: Field + ?Sized>(
    s: &LevelSampler<'_, F>,
    beta1_inf: f64,
    t_star: f64,
) -> Result<Normalization> {
    if !(beta1_inf > -1.0) {
        return Err(Error::Domain(format!("order {beta1_inf} must exceed -1")));
    }
    let target = 0.5 * s.field().total_mass();
    let a = |t: f64| s.extract(t).iter().map(|r| r.mass).sum::<f64>() - target;
    let t_half = half_mass_level(a, s.range())?;
    let ln_lambda = (1.0 + beta1_inf).ln() - t_half;
    let lambda = ln_lambda.exp();
    let regions = s.extract(t_star - ln_lambda);
    let area: f64 = regions.iter().map(|r| r.area).sum();
    if area <= 0.0 {
        return Err(Error::Domain(format!("the level {t_star} set of the normalized field is empty")));
    }
    let centroid = regions.iter().map(|r| r.centroid * r.area).sum::<Point>() / area;
    Ok(Normalization { lambda, kappa: -centroid, t_half })
}

/// Root of the decreasing function `g`, bracketed outward from the node range
/// and refined by the Illinois rule.
fn half_mass_level<G: Fn(f64) -> f64>(g: G, range: (f64, f64)) -> Result<f64> {
    let (lo0, hi0) = range;
    let span = (hi0 - lo0).max(1.0);
    let (mut hi, mut ghi) = (hi0, g(hi0));
    let mut k = 0;
    while ghi > 0.0 {
        hi += span;
        ghi = g(hi);
        k += 1;
        if k > 40 {
            return Err(Error::Domain("half-mass level lies above the sampled range".into()));
        }
    }
    let (mut lo, mut glo) = (hi - span, g(hi - span));
    let mut step = span;
    k = 0;
    while glo <= 0.0 {
        step *= 2.0;
        lo -= step;
        glo = g(lo);
        k += 1;
        if k > 40 || !lo.is_finite() {
            return Err(Error::Domain("half-mass level lies below the sampled range".into()));
        }
    }
    let mut side = 0;
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
        let mut m = (lo * ghi - hi * glo) / (ghi - glo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if gm > 0.0 {
            lo = m;
            glo = gm;
            if side == 1 {
                ghi *= 0.5;
            }
            side = 1;
        } else {
            hi = m;
            ghi = gm;
            if side == -1 {
                glo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One level of a [`LevelBoundsReport`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelBoundsSample {
    pub t: f64,
    /// mass of the sub-component
    pub a: f64,
    /// flat area of the sub-component
    pub b: f64,
    pub a_bound: f64,
    /// only where `a <= 2 pi`
    pub b_bound: Option<f64>,
}

/// Mass and area lower bounds on a component free of cone points, checked
/// on a ladder of levels between `t0` and the component's maximum.
#[derive(Debug, Clone, Serialize)]
pub struct LevelBoundsReport {
    pub t0: f64,
    pub max_u: f64,
    pub samples: Vec<LevelBoundsSample>,
    /// Smallest `lhs / rhs - 1` over both bounds.
    pub worst_slack: f64,
}

/// Number of levels in the ladder of [`level_bounds_check`].
pub const LEVEL_BOUNDS_LADDER: usize = 12;

/// Check `a(t) >= 4 pi (1 - e^{t - H})` and, where `a <= 2 pi`,
/// `b(t) >= 4 pi e^{-H} (e^{-t} - e^{-H})` on the component of `{u > t0}`
/// containing `seed`.
pub fn level_bounds_check<F: Field + ?Sized>(field: &F, t0: f64, seed: Point) -> Result<LevelBoundsReport> {
    let s = LevelSampler::new(field);
    let chart = s.chart();
    let (i, j, a, b) = chart.locate(seed);
    let node = chart.index(i + (a > 0.5) as usize, j + (b > 0.5) as usize);
    let regions = s.extract(t0);
    let gamma = regions
        .iter()
        .find(|r| r.nodes.binary_search(&node).is_ok())
        .ok_or_else(|| Error::Domain(format!("the seed {seed} is not inside {{u > {t0}}}")))?;
    if !gamma.singular.is_empty() {
        return Err(Error::Domain("the component contains a cone point".into()));
    }
    if gamma.tail || !gamma.chains.is_empty() {
        return Err(Error::Domain("the component is not bounded inside the chart".into()));
    }
    let values = s.values();
    let best = gamma.nodes.iter().copied().max_by(|x, y| values[*x].total_cmp(&values[*y])).unwrap();
    let n = chart.nodes_per_side();
    let mut top = chart.node(best % n, best / n);
    let mut h_max = values[best];
    let mut step = chart.h() / 2.0;
    while step > 1e-10 * chart.h() {
        let mut moved = false;
        for d in [Point::new(step, 0.0), Point::new(-step, 0.0), Point::new(0.0, step), Point::new(0.0, -step)] {
            let v = field.u(top + d);
            if v > h_max {
                h_max = v;
                top += d;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    if h_max <= t0 {
        return Err(Error::Domain("the component maximum is not above t0".into()));
    }
    let members = &gamma.nodes;
    let mut samples = Vec::with_capacity(LEVEL_BOUNDS_LADDER);
    let mut worst = f64::INFINITY;
    for k in 0..LEVEL_BOUNDS_LADDER {
        let t = t0 + (h_max - t0) * k as f64 / LEVEL_BOUNDS_LADDER as f64;
        let sub: Vec<Region> = s
            .extract(t)
            .into_iter()
            .filter(|r| r.nodes.first().is_some_and(|n| members.binary_search(n).is_ok()))
            .collect();
        let a: f64 = sub.iter().map(|r| r.mass).sum();
        let b: f64 = sub.iter().map(|r| r.area).sum();
        let a_bound = 4.0 * PI * (1.0 - (t - h_max).exp());
        worst = worst.min(a / a_bound - 1.0);
        let b_bound = (a <= 2.0 * PI).then(|| 4.0 * PI * (-h_max).exp() * ((-t).exp() - (-h_max).exp()));
        if let Some(bb) = b_bound {
            worst = worst.min(b / bb - 1.0);
        }
        samples.push(LevelBoundsSample { t, a, b, a_bound, b_bound });
    }
    Ok(LevelBoundsReport { t0, max_u: h_max, samples, worst_slack: worst })
}
