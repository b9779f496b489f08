//! Gauss-Legendre rules and a few one-dimensional helpers shared by the
//! integration code.

use std::sync::OnceLock;

use crate::divisor::Point;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [0, 1].
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        UnitRule {
            nodes: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Shared 32-point rule on [0, 1].
pub fn unit32() -> &'static UnitRule {
    static RULE: OnceLock<UnitRule> = OnceLock::new();
    RULE.get_or_init(|| UnitRule::new(32))
}

/// Shared 8-point rule on [0, 1].
pub fn unit8() -> &'static UnitRule {
    static RULE: OnceLock<UnitRule> = OnceLock::new();
    RULE.get_or_init(|| UnitRule::new(8))
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bisection for a root of a function with `f(lo)` and `f(hi)` of opposite sign.
/// Stops when the bracket is narrower than `xtol` or after 200 halvings.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tensor Gauss rule with `n` points per direction on the box `[lo, hi]`.
pub fn gauss_box<F: Fn(Point) -> f64>(lo: Point, hi: Point, n: usize, f: &F) -> f64 {
    let rule = match n {
        8 => unit8().clone(),
        32 => unit32().clone(),
        _ => UnitRule::new(n),
    };
    let d = hi - lo;
    let mut sum = 0.0;
    for (x, wx) in rule.iter() {
        for (y, wy) in rule.iter() {
            sum += wx * wy * f(Point::new(lo.re + x * d.re, lo.im + y * d.im));
        }
    }
    sum * d.re * d.im
}

/// A ray of a polar rule: from the centre along `dir` up to the box edge at
/// distance `reach`, carrying the angular weight.
#[derive(Debug, Clone, Copy)]
pub struct PolarRay {
    pub dir: Point,
    pub reach: f64,
    pub weight: f64,
}

/// Rays of the polar rule about `z0` over the box `[lo, hi]`: the box is
/// split into the signed triangles joining `z0` to its edges, with `n`
/// Gauss angles per triangle.
pub fn polar_box_rays(lo: Point, hi: Point, z0: Point, n: usize) -> Vec<PolarRay> {
    polar_box_rays_split(lo, hi, z0, n, &[])
}

/// [`polar_box_rays`] with the triangles further cut at the directions of
/// `breaks`, points on the box boundary where the integrand has a kink.
pub fn polar_box_rays_split(lo: Point, hi: Point, z0: Point, n: usize, breaks: &[Point]) -> Vec<PolarRay> {
    let rule = if n == 32 { unit32().clone() } else { UnitRule::new(n) };
    let corners = [lo, Point::new(hi.re, lo.im), hi, Point::new(lo.re, hi.im)];
    let tol = 1e-9 * (hi - lo).norm();
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..4 {
        let (ca, cb) = (corners[k], corners[(k + 1) % 4]);
        let (a, b) = (ca - z0, cb - z0);
        let cross = a.re * b.im - a.im * b.re;
        let edge = b - a;
        // z0 on the line of this edge (up to rounding): the triangle is empty
        if cross.abs() <= 1e-12 * edge.norm() * (a.norm() + b.norm()) {
            continue;
        }
        // foot of the perpendicular from z0 to the edge line
        let dist = cross.abs() / edge.norm();
        let normal = Point::new(edge.im, -edge.re) / edge.norm();
        let normal = if normal.re * a.re + normal.im * a.im < 0.0 { -normal } else { normal };
        let theta_n = normal.arg();
        let mut cuts: Vec<f64> = breaks
            .iter()
            .filter_map(|q| {
                let s = ((*q - ca) * edge.conj()).re / edge.norm_sqr();
                let off = (*q - (ca + edge * s)).norm();
                (off <= tol && s > 1e-9 && s < 1.0 - 1e-9).then_some(s)
            })
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut pts = vec![a];
        pts.extend(cuts.iter().map(|s| a + edge * *s));
        pts.push(b);
        for w in pts.windows(2) {
            let dtheta = (w[1] / w[0]).arg();
            let theta_a = w[0].arg();
            for (x, wx) in rule.iter() {
                let theta = theta_a + x * dtheta;
                out.push(PolarRay {
                    dir: Point::from_polar(1.0, theta),
                    reach: dist / (theta - theta_n).cos(),
                    weight: wx * dtheta,
                });
            }
        }
    }
    out
}

/// Quadrature points for integrals over the box `[lo, hi]` of functions that
/// behave like `|p - z0|^{2 beta}` times a smooth factor.
///
/// Along each ray of [`polar_box_rays`] the substitution
/// `r = R s^{1/(2 beta + 2)}` turns the weight into a smooth integrand in
/// `s`. `n x n` Gauss points per triangle.
pub fn polar_box_points(lo: Point, hi: Point, z0: Point, beta: f64, n: usize) -> Vec<(Point, f64)> {
    let rule = if n == 32 { unit32().clone() } else { UnitRule::new(n) };
    let p = 2.0 * beta + 2.0;
    let mut out = Vec::with_capacity(4 * n * n);
    for ray in polar_box_rays(lo, hi, z0, n) {
        let scale = ray.weight * ray.reach.powf(p) / p;
        for (s, ws) in rule.iter() {
            let r = ray.reach * s.powf(1.0 / p);
            out.push((z0 + ray.dir * r, scale * ws / r.powf(2.0 * beta)));
        }
    }
    out
}

/// Integral over a box of a function with cone-type singularities at the
/// listed points. A box near several of them is split until each piece sees
/// at most one, then integrated with [`polar_box_points`].
pub fn singular_box<F: Fn(Point) -> f64>(lo: Point, hi: Point, singular: &[(Point, f64)], f: &F) -> f64 {
    singular_box_depth(lo, hi, singular, f, 0)
}

fn singular_box_depth<F: Fn(Point) -> f64>(
    lo: Point,
    hi: Point,
    singular: &[(Point, f64)],
    f: &F,
    depth: usize,
) -> f64 {
    let width = (hi.re - lo.re).max(hi.im - lo.im);
    let near: Vec<(Point, f64)> = singular
        .iter()
        .copied()
        .filter(|(z, _)| crate::field::near_box(*z, lo, hi, width))
        .collect();
    match near.len() {
        0 => gauss_box(lo, hi, 8, f),
        1 => polar_box_points(lo, hi, near[0].0, near[0].1, 32)
            .iter()
            .map(|(p, w)| w * f(*p))
            .sum(),
        _ if depth >= 4 => {
            let c = (lo + hi) * 0.5;
            let (z, b) = near
                .iter()
                .copied()
                .min_by(|x, y| (x.0 - c).norm().total_cmp(&(y.0 - c).norm()))
                .unwrap();
            polar_box_points(lo, hi, z, b, 32).iter().map(|(p, w)| w * f(*p)).sum()
        }
        _ => {
            let m = (lo + hi) * 0.5;
            let mut sum = 0.0;
            for (a, b) in [
                (lo, m),
                (Point::new(m.re, lo.im), Point::new(hi.re, m.im)),
                (m, hi),
                (Point::new(lo.re, m.im), Point::new(m.re, hi.im)),
            ] {
                sum += singular_box_depth(a, b, &near, f, depth + 1);
            }
            sum
        }
    }
}
