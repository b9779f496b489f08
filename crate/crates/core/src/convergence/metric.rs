//! Sampled distance matrices of conic spheres and a Gromov-Hausdorff
//! lower-bound estimate between them.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divisor::Point;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::football::FootballMetric;
use crate::parallel::par_map;
use crate::polytope::{SurfacePoint, TriangleSurface, Side, Vec3, DEFAULT_MAX_UNFOLD};

/// Something `sample_metric` can sample.
pub enum Surface<'a> {
    Triangle(&'a TriangleSurface),
    Football(&'a FootballMetric),
    /// A field on the plane with its far-field model, sampled through a
    /// log-polar graph about `center`.
    Field { field: &'a dyn Field, center: Point, graph: GraphSpec },
}

/// Log-polar grid `r = e^s`, `s` uniform in `[ln r_min, ln r_max]`, with
/// `angular` nodes per circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub radial: usize,
    pub angular: usize,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec { r_min: 1e-4, r_max: 1e4, radial: 256, angular: 128 }
    }
}

/// Pairwise distances of `n` area-weighted sample points. Footballs and
/// doubled triangles use the same low-discrepancy pattern in polar
/// coordinates about their first vertex, so nearby surfaces get nearby
/// samples. `seed` only rotates the pattern.
pub fn sample_metric(surface: &Surface<'_>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples (got {n})")));
    }
    let (shift_u, shift_v) = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (rng.random::<f64>(), rng.random::<f64>())
    };
    let pattern: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let u = ((k as f64 + 0.5) / n as f64 + shift_u).fract();
            let v = (k as f64 * GOLDEN + shift_v).fract();
            (u, v)
        })
        .collect();
    match surface {
        Surface::Football(m) => {
            let period = 2.0 * PI * m.alpha();
            let pts: Vec<(f64, f64)> = pattern.iter().map(|&(u, v)| ((1.0 - 2.0 * u).acos(), v * period)).collect();
            Ok(matrix(n, |i, j| Ok(m.lune_distance(pts[i], pts[j])))?)
        }
        Surface::Triangle(s) => {
            let pts = triangle_samples(s, &pattern);
            matrix(n, |i, j| s.distance(&pts[i], &pts[j], DEFAULT_MAX_UNFOLD))
        }
        Surface::Field { field, center, graph } => {
            let g = Graph::new(*field, *center, graph)?;
            let picks = g.systematic_sample(n, shift_u)?;
            let rows = par_map(n, |i| g.dijkstra(picks[i]));
            let d = DMatrix::from_fn(n, n, |i, j| {
                let x = rows[i][picks[j]].min(rows[j][picks[i]]);
                if i == j {
                    0.0
                } else {
                    x
                }
            });
            if d.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("the metric graph is disconnected".into()));
            }
            Ok(d)
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn matrix<F: Fn(usize, usize) -> Result<f64> + Sync>(n: usize, f: F) -> Result<DMatrix<f64>> {
    let rows = par_map(n, |i| (i + 1..n).map(|j| f(i, j)).collect::<Result<Vec<f64>>>());
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, x) in row?.into_iter().enumerate() {
            let j = i + 1 + k;
            d[(i, j)] = x;
            d[(j, i)] = x;
        }
    }
    Ok(d)
}

/// Area-weighted points of the doubled triangle in polar coordinates about
/// vertex 0: azimuth by inverting the cumulative area over the angle at the
/// vertex (front copy first, back copy mirrored), polar angle uniform in
/// `cos` up to the opposite edge.
fn triangle_samples(s: &TriangleSurface, pattern: &[(f64, f64)]) -> Vec<SurfacePoint> {
    let a = s.base.angles[0];
    const M: usize = 2048;
    // cumulative area over azimuth on one copy
    let mut cum = vec![0.0; M + 1];
    for k in 0..M {
        let phi = a * (k as f64 + 0.5) / M as f64;
        cum[k + 1] = cum[k] + (1.0 - s.base.edge_polar_angle(phi).cos()) * a / M as f64;
    }
    let total = cum[M];
    let azimuth = |w: f64| {
        let target = w * total;
        let k = cum.partition_point(|c| *c < target).clamp(1, M);
        let (c0, c1) = (cum[k - 1], cum[k]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        a * ((k - 1) as f64 + frac) / M as f64
    };
    pattern
        .iter()
        .map(|&(u, v)| {
            let (side, w) = if v < 0.5 { (Side::Front, 2.0 * v) } else { (Side::Back, 2.0 - 2.0 * v) };
            let phi = azimuth(w);
            let top = s.base.edge_polar_angle(phi);
            let theta = (1.0 - u * (1.0 - top.cos())).clamp(-1.0, 1.0).acos();
            let x = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            SurfacePoint::new(x, side)
        })
        .collect()
}

/// `max(|diam X - diam Y| / 2, sup |sorted d_X - sorted d_Y| / 2)`, the
/// second term comparing the upper-triangle distance lists after resampling
/// to a common length.
pub fn gh_lower_bound(dx: &DMatrix<f64>, dy: &DMatrix<f64>) -> Result<f64> {
    let sx = sorted_distances(dx)?;
    let sy = sorted_distances(dy)?;
    let diam = |s: &[f64]| s.last().copied().unwrap_or(0.0);
    let mut bound = 0.5 * (diam(&sx) - diam(&sy)).abs();
    if !sx.is_empty() && !sy.is_empty() {
        let m = sx.len().max(sy.len());
        let at = |s: &[f64], k: usize| s[(k * s.len()) / m];
        for k in 0..m {
            bound = bound.max(0.5 * (at(&sx, k) - at(&sy, k)).abs());
        }
    }
    Ok(bound)
}

fn sorted_distances(d: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = d.nrows();
    if n == 0 || d.ncols() != n {
        return Err(Error::InvalidInput(format!("distance matrix must be square and nonempty ({} x {})", n, d.ncols())));
    }
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(Error::InvalidInput(format!("nonzero diagonal entry at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (d[(i, j)], d[(j, i)]);
            if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is negative, infinite or asymmetric")));
            }
            out.push(a);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Neighbour offsets `(ds, dtheta)` of the 16-neighbour stencil.
const STENCIL: [(i64, i64); 16] = [
    (1, 0), (0, 1), (-1, 0), (0, -1),
    (1, 1), (-1, 1), (-1, -1), (1, -1),
    (2, 1), (1, 2), (-1, 2), (-2, 1),
    (-2, -1), (-1, -2), (1, -2), (2, -1),
];

/// Weighted graph on a log-polar grid; edge length is `e^u |dz|` at the
/// edge midpoint.
struct Graph {
    adj: Vec<Vec<(usize, f64)>>,
    area: Vec<f64>,
}

impl Graph {
    fn new(field: &dyn Field, center: Point, spec: &GraphSpec) -> Result<Graph> {
        if !(spec.r_min > 0.0 && spec.r_max > spec.r_min && spec.radial >= 2 && spec.angular >= 8) {
            return Err(Error::InvalidInput("bad log-polar graph parameters".into()));
        }
        let (nr, nt) = (spec.radial, spec.angular);
        let s0 = spec.r_min.ln();
        let ds = (spec.r_max.ln() - s0) / (nr - 1) as f64;
        let dt = 2.0 * PI / nt as f64;
        let at = |s: f64, t: f64| center + Point::from_polar(s.exp(), t);
        let adj: Vec<Vec<(usize, f64)>> = par_map(nr * nt, |k| {
            let (i, j) = ((k / nt) as i64, (k % nt) as i64);
            let mut out = Vec::with_capacity(16);
            for (di, dj) in STENCIL {
                let (a, b) = (i + di, j + dj);
                if a < 0 || a >= nr as i64 {
                    continue;
                }
                let b = b.rem_euclid(nt as i64);
                let (sm, tm) = (s0 + (i as f64 + 0.5 * di as f64) * ds, (j as f64 + 0.5 * dj as f64) * dt);
                let e = field.u(at(sm, tm)).exp() * sm.exp() * ((di as f64 * ds).hypot(dj as f64 * dt));
                if e.is_finite() {
                    out.push((a as usize * nt + b as usize, e));
                }
            }
            out
        });
        let area = (0..nr * nt)
            .map(|k| {
                let s = s0 + (k / nt) as f64 * ds;
                let w = if k / nt == 0 || k / nt == nr - 1 { 0.5 } else { 1.0 };
                let a = w * (2.0 * field.u(at(s, (k % nt) as f64 * dt))).exp() * (2.0 * s).exp() * ds * dt;
                if a.is_finite() { a } else { 0.0 }
            })
            .collect();
        Ok(Graph { adj, area })
    }

    /// Nodes at equally spaced quantiles of the cumulative area.
    fn systematic_sample(&self, n: usize, shift: f64) -> Result<Vec<usize>> {
        let mut cum = Vec::with_capacity(self.area.len());
        let mut s = 0.0;
        for a in &self.area {
            s += a;
            cum.push(s);
        }
        let picks: Vec<usize> = (0..n)
            .map(|k| {
                let target = (k as f64 + shift) / n as f64 * s;
                cum.partition_point(|c| *c <= target).min(cum.len() - 1)
            })
            .collect();
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() < n {
            return Err(Error::InvalidInput(format!("{n} samples exceed what the graph resolves")));
        }
        Ok(picks)
    }

    fn dijkstra(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((bits, u))) = heap.pop() {
            let d = f64::from_bits(bits);
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd.to_bits(), v)));
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Chart, FootballField};
    use crate::polytope::triangle_from_angles;
    use proptest::prelude::*;

    fn triangle_ok(d: &DMatrix<f64>, slack: f64) -> bool {
        let n = d.nrows();
        (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| d[(i, k)] <= d[(i, j)] + d[(j, k)] + slack)))
    }

    #[test]
    fn gh_examples() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
        assert_eq!(gh_lower_bound(&d, &d).unwrap(), 0.0);
        let point = DMatrix::zeros(1, 1);
        assert!((gh_lower_bound(&point, &d).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gh_lower_bound(&point, &d).unwrap(), gh_lower_bound(&d, &point).unwrap());
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(gh_lower_bound(&bad, &d).is_err());
        assert!(gh_lower_bound(&DMatrix::zeros(2, 3), &d).is_err());
    }

    #[test]
    fn football_samples() {
        let m = FootballMetric::new(-0.5).unwrap();
        assert!((m.lune_distance((0.0, 0.0), (PI, 0.0)) - PI).abs() < 1e-15);
        let d = sample_metric(&Surface::Football(&m), 60, 1).unwrap();
        assert!(triangle_ok(&d, 1e-9));
        assert!(d.max() <= PI + 1e-12);
        assert_eq!(d, sample_metric(&Surface::Football(&m), 60, 1).unwrap());
    }

    #[test]
    fn octant_vertices() {
        let s = TriangleSurface::new(triangle_from_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap());
        let v = s.base.vertices;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let d = s.distance(&SurfacePoint::new(v[i], Side::Front), &SurfacePoint::new(v[j], Side::Back), 6).unwrap();
                    assert!((d - PI / 2.0).abs() < 1e-12);
                }
            }
        }
        let d = sample_metric(&Surface::Triangle(&s), 40, 3).unwrap();
        assert!(triangle_ok(&d, 1e-9));
    }

    #[test]
    fn lune_samples_approach_the_football() {
        // a thin lens is close to the football with the same vertex angle
        let m = FootballMetric::new(-2.0 / 3.0).unwrap();
        let df = sample_metric(&Surface::Football(&m), 80, 5).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let b = 2.0 * PI / 3.0;
            let s = TriangleSurface::new(triangle_from_angles(2.0 * b - PI + eps, b, b).unwrap());
            let dt = sample_metric(&Surface::Triangle(&s), 80, 5).unwrap();
            let gh = gh_lower_bound(&dt, &df).unwrap();
            assert!(gh < prev, "eps {eps}: {gh} after {prev}");
            prev = gh;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn round_sphere_graph_distances() {
        let f = FootballField::new(FootballMetric::new(0.0).unwrap(), Chart::new(4.0, 16).unwrap());
        let g = Graph::new(&f, Point::new(0.0, 0.0), &GraphSpec::default()).unwrap();
        let spec = GraphSpec::default();
        let nt = spec.angular;
        let s0 = spec.r_min.ln();
        let ds = (spec.r_max.ln() - s0) / (spec.radial - 1) as f64;
        let node = |r: f64, k: usize| (((r.ln() - s0) / ds).round() as usize) * nt + k;
        let pos = |id: usize| Point::from_polar((s0 + (id / nt) as f64 * ds).exp(), (id % nt) as f64 * 2.0 * PI / nt as f64);
        let sphere = |z: Point, w: Point| {
            let lift = |z: Point| {
                let d = 1.0 + z.norm_sqr();
                Vec3::new(2.0 * z.re / d, 2.0 * z.im / d, (z.norm_sqr() - 1.0) / d)
            };
            crate::polytope::arc(&lift(z), &lift(w))
        };
        for (a, b) in [(node(0.01, 0), node(100.0, 64)), (node(0.01, 0), node(100.0, 0)), (node(0.5, 10), node(3.0, 90))] {
            let d = g.dijkstra(a)[b];
            let exact = sphere(pos(a), pos(b));
            assert!((d / exact - 1.0).abs() < 0.02, "{d} vs {exact}");
        }
        let d = sample_metric(
            &Surface::Field { field: &f, center: Point::new(0.0, 0.0), graph: GraphSpec::default() },
            50,
            0,
        )
        .unwrap();
        assert!(triangle_ok(&d, 1e-9));
        assert!(d.max() <= PI * 1.02);
    }

    proptest! {
        #[test]
        fn gh_is_symmetric(xs in prop::collection::vec(0.0..5.0f64, 3), ys in prop::collection::vec(0.0..5.0f64, 6)) {
            let m = |v: &[f64], n: usize| {
                let mut d = DMatrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n { for j in i + 1..n { d[(i, j)] = v[k]; d[(j, i)] = v[k]; k += 1; } }
                d
            };
            let (a, b) = (m(&xs, 3), m(&ys, 4));
            prop_assert_eq!(gh_lower_bound(&a, &b).unwrap(), gh_lower_bound(&b, &a).unwrap());
            prop_assert_eq!(gh_lower_bound(&a, &a).unwrap(), 0.0);
        }
    }
}
