use std::collections::HashMap;
use std::f64::consts::PI;

use crate::divisor::Point;
use crate::error::Result;
use crate::field::{near_box, Chart, FarField, Field, POLAR_RADIUS_CELLS};
use crate::geometry;
use crate::parallel::par_map;
use crate::quadrature::{bisect, gauss_box, polar_box_rays_split, singular_box, unit8, UnitRule};

/// One connected component of `{u > t}`.
///
/// Components touching the chart boundary are closed through infinity with
/// the far-field model: their `chains` end on the chart boundary and the
/// tail outside the square is included in the totals.
#[derive(Debug, Clone)]
pub struct Region {
    /// Closed contour loops.
    pub loops: Vec<Vec<Point>>,
    /// Contour pieces that run into the chart boundary.
    pub chains: Vec<Vec<Point>>,
    /// Cells `(i, j)` meeting the region.
    pub cells: Vec<(usize, usize)>,
    /// Lattice nodes inside the region (row-major indices).
    pub nodes: Vec<usize>,
    /// Flat area.
    pub area: f64,
    pub perimeter: f64,
    /// `int e^{2u}`.
    pub mass: f64,
    /// `int |grad u|` along the boundary.
    pub flux: f64,
    /// Flat centroid.
    pub centroid: Point,
    /// Indices into `Field::cone_points` of the cone points inside.
    pub singular: Vec<usize>,
    /// True when the region closes through the far field.
    pub tail: bool,
}

impl Region {
    /// `perimeter^2 - 4 pi area`.
    pub fn defect(&self) -> f64 {
        self.perimeter * self.perimeter - 4.0 * PI * self.area
    }

    /// Bonnesen radii of a region bounded by closed loops, with the incircle
    /// rastered at spacing `res`.
    pub fn bonnesen(&self, res: f64) -> Result<geometry::Bonnesen> {
        if !self.chains.is_empty() || self.tail {
            return Err(crate::Error::InvalidInput(
                "degenerate polygon: the region is not bounded inside the chart".into(),
            ));
        }
        geometry::bonnesen_loops(&self.loops, res)
    }
}

/// Node values and cell integrals of a field on a lattice, reused across
/// levels.
pub struct LevelSampler<'a, F: Field + ?Sized> {
    field: &'a F,
    chart: Chart,
    values: Vec<f64>,
    full_mass: Vec<f64>,
    /// cell index -> nearest cone point, for cells integrated by polar rules
    near: HashMap<usize, (Point, f64)>,
    cones: Vec<(Point, f64)>,
    /// cell index -> cone points of negative order located in it
    cone_cells: HashMap<usize, Vec<usize>>,
    far: Option<FarField>,
    range: (f64, f64),
}

const SPIKE_RAYS: usize = 64;

struct Seg {
    a: usize,
    b: usize,
}

struct Piece {
    nodes: Vec<usize>,
    segs: Vec<Seg>,
    spike: Option<Vec<Point>>,
    mass: f64,
    area: f64,
    moment: Point,
    cones: Vec<usize>,
    boundary: bool,
    cell: usize,
}

impl<'a, F: Field + ?Sized> LevelSampler<'a, F> {
    /// Sample on the field's own chart.
    pub fn new(field: &'a F) -> Self {
        Self::with_chart(field, field.chart())
    }

    /// Sample on another lattice over the same field (used for error
    /// estimates on a coarser grid).
    pub fn with_chart(field: &'a F, chart: Chart) -> Self {
        let n = chart.nodes_per_side();
        let h = chart.h();
        let cones = field.cone_points();
        let values = par_map(n, |j| (0..n).map(|i| field.u(chart.node(i, j))).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();
        let cells = chart.cells;
        let rows = par_map(cells, |j| {
            let mut out = Vec::with_capacity(cells);
            for i in 0..cells {
                let lo = chart.node(i, j);
                let hi = lo + Point::new(h, h);
                let near: Vec<(Point, f64)> = cones
                    .iter()
                    .copied()
                    .filter(|(z, _)| near_box(*z, lo, hi, POLAR_RADIUS_CELLS * h))
                    .collect();
                let e2u = |p: Point| (2.0 * field.u(p)).exp();
                if near.is_empty() {
                    out.push((gauss_box(lo, hi, 3, &e2u), None));
                    continue;
                }
                let mass = singular_box(lo, hi, &near, &e2u);
                let c = (lo + hi) * 0.5;
                let (z0, beta) = near
                    .iter()
                    .copied()
                    .min_by(|a, b| (a.0 - c).norm().total_cmp(&(b.0 - c).norm()))
                    .unwrap();
                out.push((mass, Some((z0, beta))))
            }
            out
        });
        let mut full_mass = Vec::with_capacity(cells * cells);
        let mut near = HashMap::new();
        for (j, row) in rows.into_iter().enumerate() {
            for (i, (m, cone)) in row.into_iter().enumerate() {
                full_mass.push(m);
                if let Some(cone) = cone {
                    near.insert(j * cells + i, cone);
                }
            }
        }
        let mut cone_cells: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, (z, b)) in cones.iter().enumerate() {
            if *b < 0.0 && chart.contains(*z) {
                let (i, j, _, _) = chart.locate(*z);
                cone_cells.entry(j * cells + i).or_default().push(k);
            }
        }
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let range = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        LevelSampler { field, chart, values, full_mass, near, cones, cone_cells, far: field.far_field(), range }
    }

    pub fn field(&self) -> &'a F {
        self.field
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// `u` at every lattice node.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest and largest finite node value.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Total mass seen by the sampler: cells plus far-field tail.
    pub fn total_mass(&self) -> f64 {
        let tail = self.far.map_or(0.0, |ff| ff.mass_outside_square(self.chart.half_width).0);
        self.full_mass.iter().sum::<f64>() + tail
    }

    /// Move `t` off the node values (ties are broken upwards by
    /// `1e-12` times the range of `u`).
    pub fn regularize(&self, mut t: f64) -> f64 {
        let step = 1e-12 * (self.range.1 - self.range.0).abs().max(1.0);
        while self.values.contains(&t) {
            t += step;
        }
        t
    }

    fn h_edge(&self, i: usize, j: usize) -> usize {
        2 * self.chart.index(i, j)
    }

    fn v_edge(&self, i: usize, j: usize) -> usize {
        2 * self.chart.index(i, j) + 1
    }

    fn edge_on_boundary(&self, e: usize) -> bool {
        let n = self.chart.nodes_per_side();
        let (i, j) = ((e / 2) % n, (e / 2) / n);
        if e.is_multiple_of(2) {
            j == 0 || j == self.chart.cells
        } else {
            i == 0 || i == self.chart.cells
        }
    }

    /// The connected components of `{u > t}`, largest area first.
    pub fn extract(&self, t: f64) -> Vec<Region> {
        let t = self.regularize(t);
        let chart = self.chart;
        let cells = chart.cells;
        let h = chart.h();
        let mut crossings: HashMap<usize, Point> = HashMap::new();
        let mut pieces: Vec<Piece> = Vec::new();

        for j in 0..cells {
            for i in 0..cells {
                let cell = j * cells + i;
                let corner_ij = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let idx = corner_ij.map(|(a, b)| chart.index(a, b));
                let inside = idx.map(|k| self.values[k] > t);
                let spike_cones = self.cone_cells.get(&cell);
                if !inside.iter().any(|x| *x) && spike_cones.is_none() {
                    continue;
                }
                let edges = [self.h_edge(i, j), self.v_edge(i + 1, j), self.h_edge(i, j + 1), self.v_edge(i, j)];
                let pos = corner_ij.map(|(a, b)| chart.node(a, b));
                let mut local = self.cell_pieces(cell, t, &inside, &idx, &edges, &pos, &mut crossings);
                if let Some(cs) = spike_cones {
                    for &k in cs {
                        let z = self.cones[k].0;
                        let mut found = false;
                        for p in local.iter_mut() {
                            let at_node = p.nodes.iter().any(|n| {
                                let (a, b) = (n % chart.nodes_per_side(), n / chart.nodes_per_side());
                                (chart.node(a, b) - z).norm() <= 1e-12 * h
                            });
                            if at_node || self.piece_polygon_contains(p, &pos, &inside, &edges, &crossings, z) {
                                p.cones.push(k);
                                found = true;
                            }
                        }
                        if !found {
                            if let Some(sp) = self.spike(k, cell, &pos, t) {
                                local.push(sp);
                            }
                        }
                    }
                }
                self.integrate_pieces(cell, t, &mut local, &pos, &inside, &edges, &crossings);
                pieces.extend(local);
            }
        }
        self.assemble(t, pieces, &crossings)
    }

    #[allow(clippy::too_many_arguments)]
    fn cell_pieces(
        &self,
        cell: usize,
        t: f64,
        inside: &[bool; 4],
        idx: &[usize; 4],
        edges: &[usize; 4],
        pos: &[Point; 4],
        crossings: &mut HashMap<usize, Point>,
    ) -> Vec<Piece> {
        let boundary_node = |k: usize| {
            let n = self.chart.nodes_per_side();
            self.chart.is_boundary(idx[k] % n, idx[k] / n)
        };
        let mut items: Vec<Item> = Vec::with_capacity(8);
        let mut n_cross = 0;
        for k in 0..4 {
            if inside[k] {
                items.push(Item::Corner(k));
            }
            if inside[k] != inside[(k + 1) % 4] {
                let e = edges[k];
                crossings.entry(e).or_insert_with(|| {
                    let (a, b) = (pos[k], pos[(k + 1) % 4]);
                    let s = bisect(|s| self.field.u(a + (b - a) * s) - t, 0.0, 1.0, 1e-13);
                    a + (b - a) * s
                });
                items.push(Item::Cross(k));
                n_cross += 1;
            }
        }
        if items.is_empty() {
            return Vec::new();
        }
        let make = |its: &[Item], segs: Vec<Seg>| Piece {
            nodes: its.iter().filter_map(|it| if let Item::Corner(k) = it { Some(idx[*k]) } else { None }).collect(),
            boundary: its.iter().any(|it| matches!(it, Item::Corner(k) if boundary_node(*k))),
            segs,
            spike: None,
            mass: 0.0,
            area: 0.0,
            moment: Point::new(0.0, 0.0),
            cones: Vec::new(),
            cell,
        };
        let edge_of = |it: &Item| if let Item::Cross(k) = it { edges[*k] } else { unreachable!() };
        match n_cross {
            0 => vec![make(&items, Vec::new())],
            2 => {
                let xs: Vec<usize> = items.iter().filter(|it| matches!(it, Item::Cross(_))).map(edge_of).collect();
                vec![make(&items, vec![Seg { a: xs[0], b: xs[1] }])]
            }
            _ => {
                // saddle: rotate to start at a crossing that opens an inside run
                let start = (0..items.len())
                    .find(|&s| {
                        matches!(items[s], Item::Cross(_)) && matches!(items[(s + 1) % items.len()], Item::Corner(_))
                    })
                    .unwrap();
                let rot: Vec<Item> = (0..items.len()).map(|k| items[(start + k) % items.len()]).collect();
                let (r1, r2) = rot.split_at(3);
                let centre = (pos[0] + pos[2]) * 0.5;
                if self.field.u(centre) > t {
                    vec![make(
                        &rot,
                        vec![Seg { a: edge_of(&r1[2]), b: edge_of(&r2[0]) }, Seg { a: edge_of(&r2[2]), b: edge_of(&r1[0]) }],
                    )]
                } else {
                    vec![
                        make(r1, vec![Seg { a: edge_of(&r1[2]), b: edge_of(&r1[0]) }]),
                        make(r2, vec![Seg { a: edge_of(&r2[2]), b: edge_of(&r2[0]) }]),
                    ]
                }
            }
        }
    }

    fn piece_polygon(&self, p: &Piece, pos: &[Point; 4], inside: &[bool; 4], edges: &[usize; 4], crossings: &HashMap<usize, Point>) -> Vec<Point> {
        // rebuild the counter-clockwise item list restricted to this piece
        let mut out = Vec::new();
        let seg_edges: Vec<usize> = p.segs.iter().flat_map(|s| [s.a, s.b]).collect();
        for k in 0..4 {
            if inside[k] && p.nodes.contains(&self.node_of(pos[k])) {
                out.push(pos[k]);
            }
            if seg_edges.contains(&edges[k]) {
                out.push(crossings[&edges[k]]);
            }
        }
        out
    }

    fn node_of(&self, z: Point) -> usize {
        let h = self.chart.h();
        let i = ((z.re + self.chart.half_width) / h).round() as usize;
        let j = ((z.im + self.chart.half_width) / h).round() as usize;
        self.chart.index(i, j)
    }

    #[allow(clippy::too_many_arguments)]
    fn piece_polygon_contains(
        &self,
        p: &Piece,
        pos: &[Point; 4],
        inside: &[bool; 4],
        edges: &[usize; 4],
        crossings: &HashMap<usize, Point>,
        z: Point,
    ) -> bool {
        let poly = self.piece_polygon(p, pos, inside, edges, crossings);
        poly.len() >= 3 && geometry::inside(&[poly], z)
    }

    /// Star-shaped island around a cone point of negative order whose cell
    /// has no other piece covering it. The island holds no lattice node, so
    /// it is traced out to the 3x3 block of cells around the cone's cell
    /// (the cone may sit on a cell edge).
    fn spike(&self, k: usize, cell: usize, pos: &[Point; 4], t: f64) -> Option<Piece> {
        let (z, beta) = self.cones[k];
        let h = self.chart.h();
        let (lo, hi) = (pos[0] - Point::new(h, h), pos[2] + Point::new(h, h));
        let p = 2.0 + 2.0 * beta;
        let dtheta = 2.0 * PI / SPIKE_RAYS as f64;
        let mut poly = Vec::with_capacity(SPIKE_RAYS);
        let (mut mass, mut area, mut moment) = (0.0, 0.0, Point::new(0.0, 0.0));
        for m in 0..SPIKE_RAYS {
            let dir = Point::from_polar(1.0, m as f64 * dtheta);
            let rx = if dir.re > 0.0 { (hi.re - z.re) / dir.re } else if dir.re < 0.0 { (lo.re - z.re) / dir.re } else { f64::INFINITY };
            let ry = if dir.im > 0.0 { (hi.im - z.im) / dir.im } else if dir.im < 0.0 { (lo.im - z.im) / dir.im } else { f64::INFINITY };
            let r_max = rx.min(ry);
            if r_max <= 0.0 {
                return None;
            }
            let g = |r: f64| self.field.u(z + dir * r) - t;
            let r = if g(r_max) > 0.0 { r_max } else { bisect(g, r_max * 1e-14, r_max, 1e-13 * r_max) };
            poly.push(z + dir * r);
            for (s, w) in unit8().iter() {
                let rr = r * s.powf(1.0 / p);
                let q = z + dir * rr;
                mass += dtheta * w * r.powf(p) / p * (2.0 * self.field.u(q)).exp() / rr.powf(2.0 * beta);
            }
            area += dtheta * r * r / 2.0;
            moment += (z * (r * r / 2.0) + dir * (r * r * r / 3.0)) * dtheta;
        }
        Some(Piece {
            nodes: Vec::new(),
            segs: Vec::new(),
            spike: Some(poly),
            mass,
            area,
            moment,
            cones: vec![k],
            boundary: false,
            cell,
        })
    }

    /// Fill in the integrals of the pieces of one cell. Cut cells are
    /// integrated line by line with the crossings located on the field; when
    /// a cell holds several pieces the totals are split in proportion to
    /// polygon estimates.
    #[allow(clippy::too_many_arguments)]
    fn integrate_pieces(
        &self,
        cell: usize,
        t: f64,
        local: &mut [Piece],
        pos: &[Point; 4],
        inside: &[bool; 4],
        edges: &[usize; 4],
        crossings: &HashMap<usize, Point>,
    ) {
        let h = self.chart.h();
        if local.iter().all(|p| p.spike.is_some()) {
            return;
        }
        if let [p] = local {
            if p.spike.is_none() && p.segs.is_empty() {
                p.mass = self.full_mass[cell];
                p.area = h * h;
                p.moment = (pos[0] + pos[2]) * 0.5 * (h * h);
                return;
            }
        }
        for p in local.iter_mut().filter(|p| p.spike.is_none()) {
            let poly = self.piece_polygon(p, pos, inside, edges, crossings);
            p.area = geometry::signed_area(&poly).abs();
            p.moment = geometry::first_moment(&poly) * geometry::signed_area(&poly).signum();
            p.mass = polygon_integral(&poly, &|q| (2.0 * self.field.u(q)).exp());
        }
        let breaks: Vec<Point> = edges.iter().filter_map(|e| crossings.get(e).copied()).collect();
        let (mass, area, moment) = self.cut_cell(cell, pos[0], pos[2], t, &breaks);
        let (sm, sa) = (local.iter().map(|p| p.mass).sum::<f64>(), local.iter().map(|p| p.area).sum::<f64>());
        for p in local.iter_mut() {
            let (fm, fa) = if sm > 0.0 && sa > 0.0 { (p.mass / sm, p.area / sa) } else { (1.0, 1.0) };
            p.mass = mass * fm;
            p.area = area * fa;
            p.moment = moment * fa;
        }
    }

    /// `(int e^{2u}, area, first moment)` of `{u > t}` within a cell.
    fn cut_cell(&self, cell: usize, lo: Point, hi: Point, t: f64, breaks: &[Point]) -> (f64, f64, Point) {
        let rule = unit8();
        let (mut mass, mut area, mut moment) = (0.0, 0.0, Point::new(0.0, 0.0));
        if let Some(&(z0, beta)) = self.near.get(&cell) {
            let p = 2.0 + 2.0 * beta;
            for ray in polar_box_rays_split(lo, hi, z0, 12, breaks) {
                let scale = ray.weight * ray.reach.powf(p) / p;
                let at = |s: f64| z0 + ray.dir * (ray.reach * s.powf(1.0 / p));
                for (sa, sb) in inside_intervals(|s| self.field.u(at(s.max(1e-14))) - t, 12) {
                    for (x, w) in rule.iter() {
                        let s = sa + (sb - sa) * x;
                        let q = at(s);
                        let r = (q - z0).norm();
                        let jac = scale * w * (sb - sa) / r.powf(2.0 * beta);
                        mass += jac * (2.0 * self.field.u(q)).exp();
                        area += jac;
                        moment += q * jac;
                    }
                }
            }
        } else {
            // the inside length along a vertical line has kinks where the
            // contour meets the top or bottom edge
            let mut xs = vec![lo.re];
            let mut cuts: Vec<f64> = breaks
                .iter()
                .filter(|q| (q.im - lo.im).abs() < 1e-12 || (q.im - hi.im).abs() < 1e-12)
                .map(|q| q.re)
                .filter(|x| *x > lo.re && *x < hi.re)
                .collect();
            cuts.sort_by(f64::total_cmp);
            xs.extend(cuts);
            xs.push(hi.re);
            let dy = hi.im - lo.im;
            for span in xs.windows(2) {
                let wdt = span[1] - span[0];
                for (x, wx) in rule.iter() {
                    let xx = span[0] + x * wdt;
                    let at = |y: f64| Point::new(xx, lo.im + y * dy);
                    for (ya, yb) in inside_intervals(|y| self.field.u(at(y)) - t, 8) {
                        for (y, wy) in rule.iter() {
                            let q = at(ya + (yb - ya) * y);
                            let jac = wx * wy * wdt * (yb - ya) * dy;
                            mass += jac * (2.0 * self.field.u(q)).exp();
                            area += jac;
                            moment += q * jac;
                        }
                    }
                }
            }
        }
        (mass, area, moment)
    }

    fn assemble(&self, t: f64, pieces: Vec<Piece>, crossings: &HashMap<usize, Point>) -> Vec<Region> {
        let outside = pieces.len();
        let mut uf = UnionFind::new(pieces.len() + 1);
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (k, p) in pieces.iter().enumerate() {
            for n in &p.nodes {
                match owner.get(n) {
                    Some(&o) => uf.union(o, k),
                    None => {
                        owner.insert(*n, k);
                    }
                }
            }
            if p.boundary {
                uf.union(k, outside);
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for k in 0..pieces.len() {
            groups.entry(uf.find(k)).or_default().push(k);
        }
        let outside_root = uf.find(outside);
        let tail = self.far.map(|ff| ff.level_tail(t, self.chart.half_width));
        let cells = self.chart.cells;
        let mut regions: Vec<Region> = groups
            .into_iter()
            .map(|(root, members)| {
                let mut r = Region {
                    loops: Vec::new(),
                    chains: Vec::new(),
                    cells: Vec::new(),
                    nodes: Vec::new(),
                    area: 0.0,
                    perimeter: 0.0,
                    mass: 0.0,
                    flux: 0.0,
                    centroid: Point::new(0.0, 0.0),
                    singular: Vec::new(),
                    tail: false,
                };
                let mut moment = Point::new(0.0, 0.0);
                let mut segs: Vec<(usize, usize)> = Vec::new();
                for &k in &members {
                    let p = &pieces[k];
                    r.area += p.area;
                    r.mass += p.mass;
                    moment += p.moment;
                    r.nodes.extend(&p.nodes);
                    r.cells.push((p.cell % cells, p.cell / cells));
                    r.singular.extend(&p.cones);
                    segs.extend(p.segs.iter().map(|s| (s.a, s.b)));
                    if let Some(loop_) = &p.spike {
                        r.perimeter += geometry::perimeter(loop_);
                        r.flux += self.loop_flux(loop_, true);
                        r.loops.push(loop_.clone());
                    }
                }
                for (a, b) in &segs {
                    let (pa, pb) = (crossings[a], crossings[b]);
                    let (len, flux) = self.curve_measure(pa, pb, t);
                    r.perimeter += len;
                    r.flux += flux;
                }
                let (loops, chains) = self.chain(&segs, crossings);
                r.loops.extend(loops);
                r.chains = chains;
                if root == outside_root {
                    if let Some(tp) = tail {
                        r.tail = true;
                        r.mass += tp.mass;
                        r.area += tp.area;
                        r.perimeter += tp.length;
                        r.flux += tp.flux;
                    }
                }
                r.nodes.sort_unstable();
                r.nodes.dedup();
                r.cells.sort_unstable_by_key(|c| (c.1, c.0));
                r.cells.dedup();
                r.singular.sort_unstable();
                r.singular.dedup();
                r.centroid = if r.area > 0.0 { moment / r.area } else { Point::new(0.0, 0.0) };
                r
            })
            .filter(|r| r.area > 0.0)
            .collect();
        regions.sort_by(|a, b| {
            b.area
                .total_cmp(&a.area)
                .then(a.centroid.re.total_cmp(&b.centroid.re))
                .then(a.centroid.im.total_cmp(&b.centroid.im))
        });
        regions
    }

    /// Points of the level curve between two crossings: `k - 1` equally
    /// spaced chord points pushed onto `{u = t}` along the gradient.
    fn curve(&self, a: Point, b: Point, t: f64, k: usize) -> Vec<Point> {
        let len = (b - a).norm();
        let mut out = Vec::with_capacity(k + 1);
        out.push(a);
        for m in 1..k {
            let mut q = a + (b - a) * (m as f64 / k as f64);
            for _ in 0..6 {
                let v = self.field.u(q) - t;
                let g = self.field.grad(q);
                let g2 = g[0] * g[0] + g[1] * g[1];
                let step = Point::new(g[0], g[1]) * (v / g2);
                if !(step.norm() < 0.5 * len) {
                    break;
                }
                q -= step;
                if step.norm() < 1e-14 * len {
                    break;
                }
            }
            out.push(q);
        }
        out.push(b);
        out
    }

    /// Length and `int |grad u|` of the level curve between two crossings,
    /// from refined polylines with one Richardson step.
    fn curve_measure(&self, a: Point, b: Point, t: f64) -> (f64, f64) {
        let measure = |k: usize| {
            let pts = self.curve(a, b, t, k);
            let len: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let flux: f64 = pts.windows(2).map(|w| self.segment_flux(w[0], w[1])).sum();
            (len, flux)
        };
        let (l4, f4) = measure(4);
        let (l8, f8) = measure(8);
        (l8 + (l8 - l4) / 3.0, f8 + (f8 - f4) / 3.0)
    }

    fn segment_flux(&self, a: Point, b: Point) -> f64 {
        let g = 0.5 / 3f64.sqrt();
        let len = (b - a).norm();
        let mut s = 0.0;
        for x in [0.5 - g, 0.5 + g] {
            let d = self.field.grad(a + (b - a) * x);
            s += 0.5 * d[0].hypot(d[1]);
        }
        s * len
    }

    fn loop_flux(&self, poly: &[Point], closed: bool) -> f64 {
        let n = poly.len();
        let m = if closed { n } else { n - 1 };
        (0..m).map(|k| self.segment_flux(poly[k], poly[(k + 1) % n])).sum()
    }

    /// Join segments (pairs of edge ids) into loops and boundary chains.
    fn chain(&self, segs: &[(usize, usize)], crossings: &HashMap<usize, Point>) -> (Vec<Vec<Point>>, Vec<Vec<Point>>) {
        let mut at: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, (a, b)) in segs.iter().enumerate() {
            at.entry(*a).or_default().push(k);
            at.entry(*b).or_default().push(k);
        }
        let mut used = vec![false; segs.len()];
        let walk = |start_edge: usize, first: usize, used: &mut Vec<bool>| -> (Vec<Point>, bool) {
            let mut pts = vec![crossings[&start_edge]];
            let (mut e, mut s) = (start_edge, first);
            loop {
                used[s] = true;
                let (a, b) = segs[s];
                e = if a == e { b } else { a };
                if e == start_edge {
                    return (pts, true);
                }
                pts.push(crossings[&e]);
                match at[&e].iter().copied().find(|&k| !used[k]) {
                    Some(k) => s = k,
                    None => return (pts, false),
                }
            }
        };
        let mut loops = Vec::new();
        let mut chains = Vec::new();
        let mut starts: Vec<usize> = at.keys().copied().filter(|e| self.edge_on_boundary(*e)).collect();
        starts.sort_unstable();
        for e in starts {
            if let Some(k) = at[&e].iter().copied().find(|&k| !used[k]) {
                chains.push(walk(e, k, &mut used).0);
            }
        }
        for k in 0..segs.len() {
            if !used[k] {
                let (pts, closed) = walk(segs[k].0, k, &mut used);
                if closed {
                    loops.push(pts);
                } else {
                    chains.push(pts);
                }
            }
        }
        (loops, chains)
    }
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Corner(usize),
    Cross(usize),
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Subintervals of [0, 1] where `g > 0`, from `m` equal sampling steps and
/// bisection at each sign change.
fn inside_intervals<G: Fn(f64) -> f64>(g: G, m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut prev = (0.0, g(0.0));
    if prev.1 > 0.0 {
        start = Some(0.0);
    }
    for k in 1..=m {
        let s = k as f64 / m as f64;
        let v = g(s);
        if (v > 0.0) != (prev.1 > 0.0) {
            let root = bisect(&g, prev.0, s, 1e-13);
            match start.take() {
                Some(a) => out.push((a, root)),
                None => start = Some(root),
            }
        }
        prev = (s, v);
    }
    if let Some(a) = start {
        out.push((a, 1.0));
    }
    out
}

fn duffy_rule() -> &'static UnitRule {
    static RULE: std::sync::OnceLock<UnitRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| UnitRule::new(4))
}

/// Integral over a convex polygon by a fan of collapsed-square Gauss rules.
pub(crate) fn polygon_integral<G: Fn(Point) -> f64>(poly: &[Point], g: &G) -> f64 {
    let rule = duffy_rule();
    let mut sum = 0.0;
    for k in 1..poly.len().saturating_sub(1) {
        let (a, b, c) = (poly[0], poly[k], poly[k + 1]);
        let e1 = b - a;
        let e2 = c - b;
        let jac = (e1.re * e2.im - e1.im * e2.re).abs();
        if jac == 0.0 {
            continue;
        }
        for (s, ws) in rule.iter() {
            for (r, wr) in rule.iter() {
                sum += ws * wr * s * jac * g(a + e1 * s + e2 * (s * r));
            }
        }
    }
    sum
}
