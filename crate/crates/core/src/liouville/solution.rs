use super::newton::SolveReport;
use super::problem::{ConformalProblem, Enrichment};
use crate::divisor::Point;
use crate::field::{Chart, FarField, Field};

/// Output of the Newton solver. `u = w + b - sum K_i S_i` inside the chart
/// (with `w` interpolated by cubic convolution) and the far-field model outside.
#[derive(Debug, Clone)]
pub struct ConformalSolution {
    problem: ConformalProblem,
    w: Vec<f64>,
    c: f64,
    enr: Vec<Enrichment>,
    coef: Vec<f64>,
    pub report: SolveReport,
}

impl ConformalSolution {
    pub(crate) fn new(
        problem: ConformalProblem,
        w: Vec<f64>,
        c: f64,
        enr: Vec<Enrichment>,
        kappa: Vec<f64>,
        report: SolveReport,
    ) -> Self {
        let coef = enr.iter().zip(&kappa).map(|(e, k)| e.coefficient(*k)).collect();
        ConformalSolution { problem, w, c, enr, coef, report }
    }

    pub fn problem(&self) -> &ConformalProblem {
        &self.problem
    }

    /// Far-field constant `c`.
    pub fn far_constant(&self) -> f64 {
        self.c
    }

    /// The smooth unknown `w` at every node.
    pub fn w_nodes(&self) -> &[f64] {
        &self.w
    }

    /// The regular part `v = u - b` at every node.
    pub fn v_nodes(&self) -> Vec<f64> {
        let chart = self.problem.chart();
        let n = chart.nodes_per_side();
        (0..self.w.len())
            .map(|k| {
                let z = chart.node(k % n, k / n);
                self.w[k] - self.enrichment_value(z)
            })
            .collect()
    }

    fn enrichment_value(&self, z: Point) -> f64 {
        self.enr.iter().zip(&self.coef).map(|(e, k)| k * e.value(z)).sum()
    }

    /// Keys cubic convolution of `w` (C^1, exact at nodes) with its gradient.
    /// Ghost nodes past the edge are linear extrapolations.
    fn interpolate(&self, z: Point) -> (f64, [f64; 2]) {
        let chart = self.problem.chart();
        let n = chart.nodes_per_side() as i64;
        let (i, j, a, b) = chart.locate(z);
        let w = &self.w;
        let col = |i: i64, j: usize| -> f64 {
            let at = |i: i64| w[chart.index(i as usize, j)];
            if i < 0 {
                2.0 * at(0) - at(1)
            } else if i >= n {
                2.0 * at(n - 1) - at(n - 2)
            } else {
                at(i)
            }
        };
        let node = |i: i64, j: i64| -> f64 {
            if j < 0 {
                2.0 * col(i, 0) - col(i, 1)
            } else if j >= n {
                2.0 * col(i, (n - 1) as usize) - col(i, (n - 2) as usize)
            } else {
                col(i, j as usize)
            }
        };
        let (wx, dx) = keys(a);
        let (wy, dy) = keys(b);
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for q in 0..4 {
            for p in 0..4 {
                let x = node(i as i64 + p as i64 - 1, j as i64 + q as i64 - 1);
                v += wx[p] * wy[q] * x;
                gx += dx[p] * wy[q] * x;
                gy += wx[p] * dy[q] * x;
            }
        }
        let h = chart.h();
        (v, [gx / h, gy / h])
    }

    /// Regular part `v = u - b` at any point of the chart.
    pub fn regular_part(&self, z: Point) -> f64 {
        self.interpolate(z).0 - self.enrichment_value(z)
    }

    /// Relative error of the total mass: cell quadrature over the chart plus
    /// the far-field tail, against `2 pi (2 + |D|)`.
    pub fn verify_gauss_bonnet(&self) -> f64 {
        mass_error(self)
    }

    /// Spread of `u + (2 + beta_inf) ln|z|` over the boundary nodes.
    pub fn boundary_consistency(&self) -> (f64, f64) {
        let chart = self.problem.chart();
        let n = chart.nodes_per_side();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            for (i, j) in [(k, 0), (k, n - 1), (0, k), (n - 1, k)] {
                let z = chart.node(i, j);
                let x = self.u(z) + (2.0 + self.problem.beta_inf()) * z.norm().ln();
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }
}

/// Relative Gauss-Bonnet error of any field.
pub fn mass_error<F: Field + ?Sized>(field: &F) -> f64 {
    let chart = field.chart();
    let mut m = 0.0;
    for j in 0..chart.cells {
        for i in 0..chart.cells {
            m += field.cell_mass(i, j);
        }
    }
    if let Some(ff) = field.far_field() {
        m += ff.mass_outside_square(chart.half_width).0;
    }
    m / field.total_mass() - 1.0
}

impl Field for ConformalSolution {
    fn chart(&self) -> Chart {
        self.problem.chart()
    }

    fn u(&self, z: Point) -> f64 {
        if !self.problem.chart().contains(z) {
            return self.problem.far_field(self.c).u(z.norm());
        }
        self.interpolate(z).0 + self.problem.background_raw(z) - self.enrichment_value(z)
    }

    fn grad(&self, z: Point) -> [f64; 2] {
        if !self.problem.chart().contains(z) {
            let r = z.norm();
            let d = self.problem.far_field(self.c).du_dr(r) / r;
            return [d * z.re, d * z.im];
        }
        let gb = self.problem.background_grad(z);
        let gw = self.interpolate(z).1;
        let mut g = [gw[0] + gb[0], gw[1] + gb[1]];
        for (e, k) in self.enr.iter().zip(&self.coef) {
            let s = e.grad(z);
            g[0] -= k * s[0];
            g[1] -= k * s[1];
        }
        g
    }

    fn cone_points(&self) -> Vec<(Point, f64)> {
        self.problem.finite_points().iter().copied().filter(|p| p.1 != 0.0).collect()
    }

    fn far_field(&self) -> Option<FarField> {
        Some(self.problem.far_field(self.c))
    }

    fn total_mass(&self) -> f64 {
        self.problem.total_mass()
    }

    fn infinity_order(&self) -> f64 {
        self.problem.beta_inf()
    }
}

/// Weights of the Keys cubic kernel at offsets -1, 0, 1, 2 for fraction `s`,
/// and their derivatives in `s`.
fn keys(s: f64) -> ([f64; 4], [f64; 4]) {
    let (s2, s3) = (s * s, s * s * s);
    (
        [
            0.5 * (-s3 + 2.0 * s2 - s),
            0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
            0.5 * (-3.0 * s3 + 4.0 * s2 + s),
            0.5 * (s3 - s2),
        ],
        [
            0.5 * (-3.0 * s2 + 4.0 * s - 1.0),
            0.5 * (9.0 * s2 - 10.0 * s),
            0.5 * (-9.0 * s2 + 8.0 * s + 1.0),
            0.5 * (3.0 * s2 - 2.0 * s),
        ],
    )
}
