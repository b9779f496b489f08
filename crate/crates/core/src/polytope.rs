//! Three cone points realized exactly: two copies of a spherical triangle
//! glued along their boundary.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::Serialize;

use crate::divisor::{classify, ClassKind, Divisor, DEFAULT_CRITICAL_TOL};
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const INSIDE_TOL: f64 = 1e-9;

/// Spherical distance between two unit vectors.
pub fn arc(p: &Vec3, q: &Vec3) -> f64 {
    p.cross(q).norm().atan2(p.dot(q))
}

/// A triangle on the unit sphere. Side `sides[i]` is opposite `angles[i]`;
/// vertex 0 sits at the north pole and vertex 1 in the x-z plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalTriangle {
    pub angles: [f64; 3],
    pub sides: [f64; 3],
    pub vertices: [Vec3; 3],
}

/// Builds the triangle with the given interior angles.
pub fn triangle_from_angles(a: f64, b: f64, c: f64) -> Result<SphericalTriangle> {
    let angles = [a, b, c];
    let names = ["A", "B", "C"];
    for (x, n) in angles.iter().zip(names) {
        if !(*x > 0.0 && *x < PI) {
            return Err(Error::NoTriangle(format!("angle {n} = {x} is outside (0, pi)")));
        }
    }
    if a + b + c <= PI {
        return Err(Error::NoTriangle(format!(
            "A + B + C = {} does not exceed pi",
            a + b + c
        )));
    }
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        if angles[j] + angles[k] >= PI + angles[i] {
            return Err(Error::NoTriangle(format!(
                "{} + {} < pi + {} fails ({} >= {})",
                names[j],
                names[k],
                names[i],
                angles[j] + angles[k],
                PI + angles[i]
            )));
        }
    }
    let mut sides = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let cos = (angles[i].cos() + angles[j].cos() * angles[k].cos())
            / (angles[j].sin() * angles[k].sin());
        sides[i] = cos.clamp(-1.0, 1.0).acos();
    }
    let (sb, sc) = (sides[1], sides[2]);
    let vertices = [
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(sc.sin(), 0.0, sc.cos()),
        Vec3::new(sb.sin() * a.cos(), sb.sin() * a.sin(), sb.cos()),
    ];
    Ok(SphericalTriangle { angles, sides, vertices })
}

/// Interior angles recovered from the sides by the law of cosines.
pub fn angles_from_sides(sides: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let cos = (sides[i].cos() - sides[j].cos() * sides[k].cos()) / (sides[j].sin() * sides[k].sin());
        out[i] = cos.clamp(-1.0, 1.0).acos();
    }
    out
}

impl SphericalTriangle {
    /// Spherical excess.
    pub fn area(&self) -> f64 {
        self.angles.iter().sum::<f64>() - PI
    }

    /// Endpoints of the edge opposite vertex `i`.
    pub fn edge(&self, i: usize) -> (Vec3, Vec3) {
        (self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }

    /// Unit normal of the great circle through edge `i`, pointing into the triangle.
    pub fn inward_normal(&self, i: usize) -> Vec3 {
        let (p, q) = self.edge(i);
        let n = p.cross(&q).normalize();
        if n.dot(&self.vertices[i]) < 0.0 {
            -n
        } else {
            n
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|i| self.inward_normal(i).dot(x) >= -INSIDE_TOL)
    }

    /// Polar angle, measured from vertex 0, at which the meridian of azimuth
    /// `phi` leaves the triangle through the opposite edge.
    pub fn edge_polar_angle(&self, phi: f64) -> f64 {
        let (p, q) = self.edge(0);
        let n = p.cross(&q);
        let mut theta = (-n.z).atan2(n.x * phi.cos() + n.y * phi.sin());
        if theta < 0.0 {
            theta += PI;
        }
        theta
    }
}

/// Mirror of `x` in the great circle with unit normal `n`.
fn reflect(x: &Vec3, n: &Vec3) -> Vec3 {
    x - 2.0 * n.dot(x) * n
}

/// `(lens_defect, collapse_defect) = (A - (B + C - pi), A + B + C - pi)`.
pub fn angle_relation_defects(t: &SphericalTriangle) -> (f64, f64) {
    let [a, b, c] = t.angles;
    (a - (b + c - PI), a + b + c - PI)
}

/// Sides along the family `A = B + C - pi + eps`.
pub fn lens_degeneration_curve(b: f64, c: f64, eps_list: &[f64]) -> Result<Vec<(f64, [f64; 3])>> {
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::Domain(format!("lens parameter {eps} must be positive")));
            }
            let t = triangle_from_angles(b + c - PI + eps, b, c)?;
            Ok((eps, t.sides))
        })
        .collect()
}

/// The two poles of the limiting lune in the placement gauge of
/// [`triangle_from_angles`].
pub fn lens_poles() -> [Vec3; 2] {
    [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)]
}

/// Cone angle `2 pi (1 + min beta)` of the football a critical divisor degenerates to.
pub fn limit_cone_angle(divisor: &Divisor) -> Result<f64> {
    let class = classify(divisor, DEFAULT_CRITICAL_TOL);
    if class.kind != ClassKind::Critical {
        return Err(Error::Domain(format!(
            "the limit cone angle needs a critical divisor, got {} (slack {})",
            class.kind, class.slack
        )));
    }
    let min = divisor.orders().into_iter().fold(f64::INFINITY, f64::min);
    Ok(2.0 * PI * (1.0 + min.min(0.0)))
}

/// Hausdorff distance between two finite sets of unit vectors, measured along
/// the sphere.
pub fn hausdorff_distance(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("Hausdorff distance of an empty set".into()));
    }
    let directed = |p: &[Vec3], q: &[Vec3]| {
        p.iter()
            .map(|a| q.iter().map(|b| arc(a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(x, y).max(directed(y, x)))
}

/// Which copy of the triangle a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Front,
    Back,
}

/// A point of the doubled triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub side: Side,
}

impl SurfacePoint {
    pub fn new(position: Vec3, side: Side) -> Self {
        SurfacePoint { position: position.normalize(), side }
    }
}

/// The sphere with cone angles `2A, 2B, 2C` obtained by doubling a triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSurface {
    pub base: SphericalTriangle,
}

/// Default unfolding depth of [`TriangleSurface::distance`].
pub const DEFAULT_MAX_UNFOLD: usize = 6;

impl TriangleSurface {
    pub fn new(base: SphericalTriangle) -> Self {
        TriangleSurface { base }
    }

    pub fn from_angles(a: f64, b: f64, c: f64) -> Result<Self> {
        Ok(TriangleSurface::new(triangle_from_angles(a, b, c)?))
    }

    pub fn cone_angles(&self) -> [f64; 3] {
        self.base.angles.map(|x| 2.0 * x)
    }

    /// Orders `angle / pi - 1` of the three cone points.
    pub fn orders(&self) -> [f64; 3] {
        self.base.angles.map(|x| x / PI - 1.0)
    }

    pub fn divisor(&self) -> Divisor {
        Divisor::from_orders(&self.orders()).expect("triangle orders lie in (-1, 0)")
    }

    pub fn area(&self) -> f64 {
        2.0 * self.base.area()
    }

    /// Intrinsic distance between two points of the surface.
    ///
    /// Points on the same copy are joined by the direct arc, which is optimal
    /// because folding the two copies onto one triangle does not increase
    /// length. Points on opposite copies are joined through edge sequences of
    /// odd length at most `max_unfold`, developed onto the round sphere, with
    /// the broken paths through a vertex as a fallback. Since each copy is
    /// convex a single crossing already attains the minimum, so depth 1 is
    /// exact and deeper sequences only add valid candidates.
    pub fn distance(&self, p: &SurfacePoint, q: &SurfacePoint, max_unfold: usize) -> Result<f64> {
        if max_unfold == 0 {
            return Err(Error::InvalidInput("max_unfold must be at least 1".into()));
        }
        for x in [p, q] {
            if !self.base.contains(&x.position) {
                return Err(Error::Domain(format!(
                    "point ({}, {}, {}) is outside the triangle",
                    x.position.x, x.position.y, x.position.z
                )));
            }
        }
        let direct = arc(&p.position, &q.position);
        if p.side == q.side {
            return Ok(direct);
        }
        let (p, q) = (p.position, q.position);
        let mut best = self
            .base
            .vertices
            .iter()
            .map(|v| arc(&p, v) + arc(v, &q))
            .fold(f64::INFINITY, f64::min);
        let mut seq = Vec::with_capacity(max_unfold);
        self.unfold(&p, &q, self.base.vertices, &mut seq, max_unfold, &mut best);
        Ok(best.max(direct))
    }

    /// Depth-first walk over edge sequences without immediate repeats.
    /// `developed` holds the vertices of the current developed triangle and
    /// `seq` the edges crossed so far together with their developed endpoints.
    fn unfold(
        &self,
        p: &Vec3,
        q: &Vec3,
        developed: [Vec3; 3],
        seq: &mut Vec<(Vec3, Vec3, usize)>,
        max_unfold: usize,
        best: &mut f64,
    ) {
        if seq.len() >= max_unfold {
            return;
        }
        let last = seq.last().map(|&(_, _, tag)| tag);
        for e in 0..3 {
            let u = developed[(e + 1) % 3];
            let w = developed[(e + 2) % 3];
            if last == Some(e) {
                continue;
            }
            let n = u.cross(&w).normalize();
            let next = developed.map(|x| reflect(&x, &n));
            seq.push((u, w, e));
            if seq.len() % 2 == 1 {
                let image = seq_image(q, seq);
                let d = arc(p, &image);
                if d < *best && crosses_in_order(p, &image, seq) {
                    *best = d;
                }
            }
            self.unfold(p, q, next, seq, max_unfold, best);
            seq.pop();
        }
    }
}

/// Image of `x` after reflecting, in order, across the developed edges of `seq`.
fn seq_image(x: &Vec3, seq: &[(Vec3, Vec3, usize)]) -> Vec3 {
    // developed edge j is the image of a base edge under the first j - 1
    // reflections, so composing the developed mirrors in order develops x
    let mut y = *x;
    for (u, w, _) in seq {
        let n = u.cross(w).normalize();
        y = reflect(&y, &n);
    }
    y
}

/// True when the minor arc `p -> q` meets every segment of `seq` at
/// nondecreasing arc length from `p`.
fn crosses_in_order(p: &Vec3, q: &Vec3, seq: &[(Vec3, Vec3, usize)]) -> bool {
    let mut prev = -1.0;
    for (u, w, _) in seq {
        match arc_segment_crossing(p, q, u, w) {
            Some(tau) if tau >= prev - 1e-12 => prev = tau,
            _ => return false,
        }
    }
    true
}

/// Arc length from `p` at which the minor arc `p -> q` meets the segment `u -> w`.
fn arc_segment_crossing(p: &Vec3, q: &Vec3, u: &Vec3, w: &Vec3) -> Option<f64> {
    const TOL: f64 = 1e-12;
    let n1 = p.cross(q);
    let n2 = u.cross(w);
    if n1.norm() < TOL {
        // degenerate path: accept only a point lying on the segment
        let on = n2.normalize().dot(p).abs() < 1e-10 && (arc(u, p) + arc(p, w) - arc(u, w)).abs() < 1e-10;
        return on.then_some(0.0);
    }
    let d = n1.cross(&n2);
    if d.norm() < TOL {
        return None;
    }
    let x0 = d.normalize();
    for x in [x0, -x0] {
        let on_path = p.cross(&x).dot(&n1) >= -TOL && x.cross(q).dot(&n1) >= -TOL;
        let on_edge = u.cross(&x).dot(&n2) >= -TOL && x.cross(w).dot(&n2) >= -TOL;
        if on_path && on_edge {
            return Some(arc(p, &x));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cmp::Reverse;
    use std::collections::{BinaryHeap, HashMap};

    const TAU: f64 = 2.0 * PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Shortest path on a Steiner graph: the triangle is cut into `n^2` small
    /// triangles, every small edge carries `m` extra nodes, and all nodes on
    /// the boundary of a small triangle are joined by arcs. Boundary nodes of
    /// the big triangle are shared by the two copies.
    fn mesh_distance(t: &SphericalTriangle, p: &SurfacePoint, q: &SurfacePoint, n: usize, m: usize) -> f64 {
        let fine = n * (m + 1);
        let [v0, v1, v2] = t.vertices;
        let pos = |i: usize, j: usize| {
            let k = fine - i - j;
            ((v0 * i as f64 + v1 * j as f64 + v2 * k as f64) / fine as f64).normalize()
        };
        let mut ids: HashMap<(usize, usize, u8), usize> = HashMap::new();
        let mut points: Vec<Vec3> = Vec::new();
        let mut id = |i: usize, j: usize, copy: u8, points: &mut Vec<Vec3>| {
            let on_boundary = i == 0 || j == 0 || i + j == fine;
            let key = (i, j, if on_boundary { 0 } else { copy });
            *ids.entry(key).or_insert_with(|| {
                points.push(pos(i, j));
                points.len() - 1
            })
        };
        let mut cells: Vec<(Vec<usize>, [Vec3; 3], u8)> = Vec::new();
        let s = m + 1;
        for copy in 0..2u8 {
            for i in 0..n {
                for j in 0..n - i {
                    let mut tris = vec![[(i, j), (i + 1, j), (i, j + 1)]];
                    if i + j + 1 < n {
                        tris.push([(i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                    }
                    for tri in tris {
                        let mut nodes = Vec::new();
                        for e in 0..3 {
                            let (a, b) = (tri[e], tri[(e + 1) % 3]);
                            for k in 0..s {
                                let fi = if b.0 >= a.0 { a.0 * s + (b.0 - a.0) * k } else { a.0 * s - (a.0 - b.0) * k };
                                let fj = if b.1 >= a.1 { a.1 * s + (b.1 - a.1) * k } else { a.1 * s - (a.1 - b.1) * k };
                                nodes.push(id(fi, fj, copy, &mut points));
                            }
                        }
                        let corners = tri.map(|(a, b)| pos(a * s, b * s));
                        cells.push((nodes, corners, copy));
                    }
                }
            }
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); points.len() + 2];
        let src = points.len();
        let dst = points.len() + 1;
        let inside = |c: &[Vec3; 3], x: &Vec3| {
            (0..3).all(|k| {
                let (a, b, o) = (c[(k + 1) % 3], c[(k + 2) % 3], c[k]);
                let nrm = a.cross(&b);
                nrm.dot(x) * nrm.dot(&o) >= -1e-14
            })
        };
        for (nodes, corners, copy) in &cells {
            for (a, &u) in nodes.iter().enumerate() {
                for &w in &nodes[a + 1..] {
                    if u != w {
                        let d = arc(&points[u], &points[w]);
                        adj[u].push((w, d));
                        adj[w].push((u, d));
                    }
                }
            }
            for (x, node) in [(p, src), (q, dst)] {
                let want = if x.side == Side::Front { 0 } else { 1 };
                if *copy == want && inside(corners, &x.position) {
                    for &u in nodes {
                        let d = arc(&x.position, &points[u]);
                        adj[node].push((u, d));
                        adj[u].push((node, d));
                    }
                }
            }
        }
        let mut dist = vec![f64::INFINITY; adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((dbits, u))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[u] {
                continue;
            }
            if u == dst {
                return d;
            }
            for &(w, l) in &adj[u] {
                let nd = d + l;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((nd.to_bits(), w)));
                }
            }
        }
        f64::INFINITY
    }

    /// Every path between the copies meets the boundary, and each copy is
    /// convex, so the distance is the least `|px| + |xq|` over boundary points.
    /// Dense sampling followed by golden-section refinement on each edge.
    fn boundary_minimum(t: &SphericalTriangle, p: &Vec3, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for e in 0..3 {
            let (u, w) = t.edge(e);
            let len = arc(&u, &w);
            let axis = u.cross(&w).normalize();
            let at = |s: f64| {
                let x = u * s.cos() + axis.cross(&u) * s.sin();
                arc(p, &x) + arc(&x, q)
            };
            let n = 4000;
            let mut k_best: usize = 0;
            for k in 0..=n {
                if at(len * k as f64 / n as f64) < at(len * k_best as f64 / n as f64) {
                    k_best = k;
                }
            }
            let (mut lo, mut hi) = (
                len * (k_best.saturating_sub(1)) as f64 / n as f64,
                len * ((k_best + 1).min(n)) as f64 / n as f64,
            );
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
                if at(m1) < at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(at(0.5 * (lo + hi)));
        }
        best
    }

    fn centroid(t: &SphericalTriangle) -> Vec3 {
        (t.vertices[0] + t.vertices[1] + t.vertices[2]).normalize()
    }

    fn point_in(t: &SphericalTriangle, a: f64, b: f64) -> Vec3 {
        // a, b in [0, 1]; square-root warp keeps the point inside
        let (u, v) = (1.0 - a.sqrt(), a.sqrt() * (1.0 - b));
        (t.vertices[0] * u + t.vertices[1] * v + t.vertices[2] * (1.0 - u - v)).normalize()
    }

    #[test]
    fn octant_and_equilateral_sides() {
        let t = triangle_from_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap();
        for s in t.sides {
            assert!(close(s, PI / 2.0, 1e-15));
        }
        let t = triangle_from_angles(TAU / 3.0, TAU / 3.0, TAU / 3.0).unwrap();
        for s in t.sides {
            assert!(close(s, (-1.0f64 / 3.0).acos(), 1e-14));
            assert!(close(s, 1.910633, 1e-6));
        }
        let back = angles_from_sides(t.sides);
        for a in back {
            assert!(close(a, TAU / 3.0, 1e-12));
        }
    }

    #[test]
    fn vertices_realize_the_sides() {
        let t = triangle_from_angles(1.1, 1.9, 2.3).unwrap();
        for i in 0..3 {
            let (p, q) = t.edge(i);
            assert!(close(arc(&p, &q), t.sides[i], 1e-12));
        }
        assert_eq!(t.vertices[0], Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(t.vertices[1].y, 0.0);
    }

    #[test]
    fn nearly_degenerate_triangle_is_nearly_a_lens() {
        let t = triangle_from_angles(PI / 3.0 + 1e-9, TAU / 3.0, TAU / 3.0).unwrap();
        assert!(t.sides[0] < 1e-3);
        assert!(close(t.sides[1], PI, 1e-3) && close(t.sides[2], PI, 1e-3));
    }

    #[test]
    fn nonexistence_names_the_inequality() {
        let e = triangle_from_angles(0.5, 0.5, 0.5).unwrap_err().to_string();
        assert!(e.contains("does not exceed pi"), "{e}");
        let e = triangle_from_angles(0.2, 2.0, 2.0).unwrap_err().to_string();
        assert!(e.contains("B + C < pi + A"), "{e}");
        assert!(triangle_from_angles(PI, 1.0, 1.0).is_err());
    }

    #[test]
    fn lens_curve_examples() {
        let b = TAU / 3.0;
        let curve = lens_degeneration_curve(b, b, &[PI / 6.0]).unwrap();
        assert!(close(curve[0].1[0], (1.0f64 / 3.0).acos(), 1e-14));
        let curve = lens_degeneration_curve(PI / 2.0, PI / 2.0, &[PI / 2.0]).unwrap();
        for s in curve[0].1 {
            assert!(close(s, PI / 2.0, 1e-14));
        }
        assert!(lens_degeneration_curve(b, b, &[0.0]).is_err());
        assert!(lens_degeneration_curve(b, b, &[3.0]).is_err());
    }

    #[test]
    fn lens_curve_is_monotone_with_square_root_rate() {
        let b = TAU / 3.0;
        let eps: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
        let curve = lens_degeneration_curve(b, b, &eps).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1[0] < w[0].1[0]);
            assert!(w[1].1[1] > w[0].1[1] && w[1].1[2] > w[0].1[2]);
        }
        // first-order expansion gives a^2 ~ 2 eps sin A / (sin B sin C)
        // with A -> pi/3, B = C = 2pi/3: a^2 ~ (8 / (3^(1/2) * 2)) eps
        for (e, s) in &curve[3..] {
            let pred = (4.0 / 3f64.sqrt() * e).sqrt();
            assert!((s[0] / pred - 1.0).abs() < 1e-2, "eps {e}: {} vs {pred}", s[0]);
        }
    }

    #[test]
    fn defects_examples() {
        let b = TAU / 3.0;
        let t = triangle_from_angles(PI / 3.0 + 1e-6, b, b).unwrap();
        let (lens, _) = angle_relation_defects(&t);
        assert!(close(lens, 1e-6, 1e-15));
        let t = triangle_from_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap();
        let (lens, collapse) = angle_relation_defects(&t);
        assert!(close(lens, PI / 2.0, 1e-15) && close(collapse, PI / 2.0, 1e-15));
        for (eps, _) in lens_degeneration_curve(b, b, &[0.1, 0.01]).unwrap() {
            let t = triangle_from_angles(2.0 * b - PI + eps, b, b).unwrap();
            assert!(close(angle_relation_defects(&t).0, eps, 1e-14));
        }
    }

    #[test]
    fn limit_cone_angle_examples() {
        let d = Divisor::from_orders(&[-0.5, -0.25, -0.25]).unwrap();
        assert!(close(limit_cone_angle(&d).unwrap(), PI, 1e-15));
        let d = Divisor::from_orders(&[-2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]).unwrap();
        assert!(close(limit_cone_angle(&d).unwrap(), TAU / 3.0, 1e-12));
        let d = Divisor::from_orders(&[-0.5, -0.5]).unwrap();
        assert!(close(limit_cone_angle(&d).unwrap(), PI, 1e-15));
        let d = Divisor::from_orders(&[-0.5, -0.5, -0.5]).unwrap();
        assert!(limit_cone_angle(&d).is_err());
    }

    #[test]
    fn critical_wall_angle_identity() {
        // at the lens limit the cone angles obey alpha_1 + 2 pi = alpha_2 + alpha_3
        let b = TAU / 3.0;
        let c = 1.9;
        let s = TriangleSurface::from_angles(b + c - PI + 1e-12, b, c).unwrap();
        let al = s.cone_angles();
        assert!(close(al[0] + TAU, al[1] + al[2], 1e-10));
        let d = Divisor::from_orders(&[b / PI + c / PI - 2.0, b / PI - 1.0, c / PI - 1.0]).unwrap();
        assert_eq!(classify(&d, 1e-12).kind, ClassKind::Critical);
    }

    #[test]
    fn hausdorff_examples() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let s = Vec3::new(0.0, 0.0, -1.0);
        assert_eq!(hausdorff_distance(&[n], &[n]).unwrap(), 0.0);
        assert!(close(hausdorff_distance(&[n], &[s]).unwrap(), PI, 1e-15));
        assert!(hausdorff_distance(&[], &[s]).is_err());
        let b = TAU / 3.0;
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let t = triangle_from_angles(2.0 * b - PI + eps, b, b).unwrap();
            let h = hausdorff_distance(&t.vertices, &lens_poles()).unwrap();
            // oracle: the merging vertices sit at polar angles c and b
            assert!(close(h, PI - t.sides[1].min(t.sides[2]), 1e-12));
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn octant_vertex_distances() {
        let s = TriangleSurface::from_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap();
        let v = s.base.vertices;
        for i in 0..3 {
            for j in 0..3 {
                let p = SurfacePoint::new(v[i], Side::Front);
                let q = SurfacePoint::new(v[j], Side::Back);
                let d = s.distance(&p, &q, DEFAULT_MAX_UNFOLD).unwrap();
                let expect = if i == j { 0.0 } else { PI / 2.0 };
                assert!(close(d, expect, 1e-12), "{i} {j}: {d}");
            }
        }
    }

    #[test]
    fn centroid_to_its_mirror() {
        for angles in [[PI / 2.0; 3], [1.2, 1.7, 2.1], [PI / 3.0 + 0.1, TAU / 3.0, TAU / 3.0]] {
            let s = TriangleSurface::from_angles(angles[0], angles[1], angles[2]).unwrap();
            let g = centroid(&s.base);
            let p = SurfacePoint::new(g, Side::Front);
            let q = SurfacePoint::new(g, Side::Back);
            let d = s.distance(&p, &q, DEFAULT_MAX_UNFOLD).unwrap();
            // twice the distance to the nearest edge circle
            let foot = (0..3)
                .map(|i| s.base.inward_normal(i).dot(&g).asin())
                .fold(f64::INFINITY, f64::min);
            assert!(close(d, 2.0 * foot, 1e-12), "{angles:?}: {d} vs {}", 2.0 * foot);
            assert!(close(d, boundary_minimum(&s.base, &g, &g), 1e-9));
            let coarse = mesh_distance(&s.base, &p, &q, 16, 5);
            let finer = mesh_distance(&s.base, &p, &q, 32, 10);
            assert!(coarse >= d - 1e-9 && finer >= d - 1e-9);
            assert!(finer - d < 1e-2, "{angles:?}: mesh {finer} vs {d}");
        }
    }

    #[test]
    fn unfolding_matches_mesh_shortest_paths() {
        let cases = [
            ([1.2, 1.7, 2.1], (0.3, 0.2), (0.7, 0.9)),
            ([1.2, 1.7, 2.1], (0.05, 0.5), (0.95, 0.1)),
            ([PI / 3.0 + 0.1, TAU / 3.0, TAU / 3.0], (0.2, 0.3), (0.6, 0.8)),
            ([2.5, 1.4, 0.9], (0.9, 0.9), (0.1, 0.1)),
        ];
        for (angles, a, b) in cases {
            let s = TriangleSurface::from_angles(angles[0], angles[1], angles[2]).unwrap();
            let p = SurfacePoint::new(point_in(&s.base, a.0, a.1), Side::Front);
            let q = SurfacePoint::new(point_in(&s.base, b.0, b.1), Side::Back);
            let d = s.distance(&p, &q, DEFAULT_MAX_UNFOLD).unwrap();
            let exact = boundary_minimum(&s.base, &p.position, &q.position);
            assert!(close(d, exact, 1e-9), "{angles:?}: unfold {d} boundary {exact}");
            let mesh = mesh_distance(&s.base, &p, &q, 32, 10);
            assert!(mesh >= d - 1e-9 && mesh - d < 1e-2, "{angles:?}: unfold {d} mesh {mesh}");
        }
    }

    #[test]
    fn points_outside_are_rejected() {
        let s = TriangleSurface::from_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap();
        let p = SurfacePoint::new(Vec3::new(-1.0, -1.0, 0.2), Side::Front);
        let q = SurfacePoint::new(Vec3::new(0.2, 0.2, 1.0), Side::Front);
        assert!(s.distance(&p, &q, 6).is_err());
        assert!(s.distance(&q, &q, 0).is_err());
    }

    proptest! {
        #[test]
        fn angles_round_trip(a in 0.3f64..3.0, b in 0.3f64..3.0, c in 0.3f64..3.0) {
            prop_assume!(triangle_from_angles(a, b, c).is_ok());
            let t = triangle_from_angles(a, b, c).unwrap();
            prop_assume!(t.sides.iter().all(|&s| s > 1e-3 && s < PI - 1e-3));
            let back = angles_from_sides(t.sides);
            for (x, y) in back.iter().zip([a, b, c]) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn doubled_area_is_the_total_area(a in 0.1f64..3.0, b in 0.1f64..3.0, c in 0.1f64..3.0) {
            prop_assume!(triangle_from_angles(a, b, c).is_ok());
            let s = TriangleSurface::from_angles(a, b, c).unwrap();
            let total = crate::divisor::total_area(&s.divisor());
            prop_assert!((s.area() - total).abs() < 1e-12);
            prop_assert_eq!(classify(&s.divisor(), 0.0).kind, ClassKind::Subcritical);
        }

        #[test]
        fn distance_bounds_and_monotone_depth(
            pa in (0.0f64..1.0, 0.0f64..1.0), pb in (0.0f64..1.0, 0.0f64..1.0), flip in any::<bool>()
        ) {
            let s = TriangleSurface::from_angles(1.3, 1.8, 2.0).unwrap();
            let x = point_in(&s.base, pa.0, pa.1);
            let y = point_in(&s.base, pb.0, pb.1);
            let p = SurfacePoint::new(x, Side::Front);
            let q = SurfacePoint::new(y, if flip { Side::Back } else { Side::Front });
            let mut prev = f64::INFINITY;
            for depth in 1..=6 {
                let d = s.distance(&p, &q, depth).unwrap();
                prop_assert!(d <= prev + 1e-15);
                prev = d;
            }
            prop_assert!(prev >= arc(&x, &y) - 1e-12);
            if !flip {
                prop_assert!(prev <= arc(&x, &y) + 1e-15);
            }
        }
    }
}
