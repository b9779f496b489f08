use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Pair, SparseColMat, SymbolicSparseColMat};
use faer::Mat;
use serde::Serialize;

use super::problem::{ConformalProblem, Enrichment};
use super::solution::ConformalSolution;
use crate::divisor::{classify, ClassKind, ConePoint, Divisor, Point, DEFAULT_CRITICAL_TOL};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::quadrature::{gauss_box, polar_box_points};

/// Knobs of [`solve_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop when the max-norm of the discrete residual and the mass
    /// equation are both below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Walk in from slack 0.1 when the divisor is closer than 0.05 to the wall.
    pub continuation: bool,
    /// Use the cut-off power terms at cone points.
    pub enrichment: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, max_iter: 60, continuation: true, enrichment: true }
    }
}

/// Convergence record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Newton steps of the last stage.
    pub iterations: usize,
    /// Total Newton steps over all continuation stages.
    pub total_iterations: usize,
    /// Max-norm of the discrete residual at exit.
    pub residual: f64,
    /// Relative defect of the mass equation at exit (zero when `c` is pinned).
    pub mass_equation: f64,
    /// Merit value after each accepted step of the last stage.
    pub history: Vec<f64>,
    pub stages: usize,
}

/// Starting point of a Newton solve: the regular part `v = u - b` at every
/// node and the far-field constant.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGuess {
    pub v: Vec<f64>,
    pub c: f64,
}

impl InitialGuess {
    /// Samples `u'(z) = u(lambda z) + ln lambda` from another field onto the
    /// chart of `problem`. Nodes where the sample is not finite are filled
    /// from their neighbours.
    pub fn transplant<F: Field + ?Sized>(old: &F, problem: &ConformalProblem, lambda: f64) -> InitialGuess {
        let chart = problem.chart();
        let n = chart.nodes_per_side();
        // old cone points in new coordinates with the order change left in
        // the sample: removing (beta_old - beta_new) ln|z - p| keeps the
        // guess smooth when a path step changes the orders
        let shifts: Vec<(Point, f64)> = old
            .cone_points()
            .into_iter()
            .map(|(p, b)| {
                let q = p / lambda;
                let tol = 1e-9 * (1.0 + q.norm());
                let now = problem.finite_points().iter().find(|(z, _)| (z - q).norm() <= tol).map_or(0.0, |x| x.1);
                (q, b - now)
            })
            .filter(|(_, d)| *d != 0.0)
            .collect();
        let mut v = vec![f64::NAN; chart.node_count()];
        for j in 0..n {
            for i in 0..n {
                let z = chart.node(i, j);
                let mut x = old.u(z * lambda) + lambda.ln() - problem.background_raw(z);
                for (q, d) in &shifts {
                    x -= d * (z - q).norm().ln();
                }
                v[chart.index(i, j)] = x;
            }
        }
        repair(&mut v, n);
        let c = match old.far_field() {
            Some(ff) => ff.c - (1.0 + ff.beta_inf) * lambda.ln(),
            None => {
                // average of the regular part on the boundary ring
                let ring: Vec<f64> =
                    (0..n).flat_map(|k| [v[chart.index(k, 0)], v[chart.index(k, n - 1)]]).collect();
                ring.iter().sum::<f64>() / ring.len() as f64
            }
        };
        InitialGuess { v, c }
    }
}

/// Replace non-finite entries by the mean of their finite 4-neighbours,
/// sweeping until none is left.
fn repair(v: &mut [f64], n: usize) {
    for _ in 0..4 * n {
        let bad: Vec<usize> = (0..v.len()).filter(|&k| !v[k].is_finite()).collect();
        if bad.is_empty() {
            return;
        }
        let mut fixed = Vec::new();
        for &k in &bad {
            let (i, j) = (k % n, k / n);
            let mut s = 0.0;
            let mut m = 0;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                    let x = v[b as usize * n + a as usize];
                    if x.is_finite() {
                        s += x;
                        m += 1;
                    }
                }
            }
            if m > 0 {
                fixed.push((k, s / m as f64));
            }
        }
        if fixed.is_empty() {
            break;
        }
        for (k, x) in fixed {
            v[k] = x;
        }
    }
    for x in v.iter_mut() {
        if !x.is_finite() {
            *x = 0.0;
        }
    }
}

/// Solve with default options apart from `tol` and `max_iter`.
pub fn solve(problem: &ConformalProblem, tol: f64, max_iter: usize) -> Result<ConformalSolution> {
    solve_with(problem, &SolverConfig { tol, max_iter, ..SolverConfig::default() }, None)
}

/// Damped Newton solve, with continuation from slack 0.1 for near-critical
/// divisors.
pub fn solve_with(
    problem: &ConformalProblem,
    config: &SolverConfig,
    guess: Option<&InitialGuess>,
) -> Result<ConformalSolution> {
    if !(config.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive (got {})", config.tol)));
    }
    problem.check_solvable()?;
    let class = classify(problem.divisor(), DEFAULT_CRITICAL_TOL);
    let stages = if config.continuation && class.kind == ClassKind::Subcritical && class.slack < 0.05 {
        continuation_ladder(problem, class.slack, class.min_index.unwrap_or(0))?
    } else {
        vec![problem.clone()]
    };
    let mut current: Option<InitialGuess> = guess.cloned();
    let mut total = 0;
    let count = stages.len();
    let mut last = None;
    for stage in stages {
        let sol = newton(&stage, config, current.as_ref())?;
        total += sol.report.iterations;
        current = Some(InitialGuess { v: sol.v_nodes(), c: sol.far_constant() });
        last = Some(sol);
    }
    let mut sol = last.expect("at least one stage");
    sol.report.total_iterations = total;
    sol.report.stages = count;
    Ok(sol)
}

/// Problems with the non-minimal orders lowered so the slack runs
/// 0.1, 0.05, 0.025, ... down to the target.
fn continuation_ladder(problem: &ConformalProblem, target: f64, min_index: usize) -> Result<Vec<ConformalProblem>> {
    let points = problem.divisor().points().to_vec();
    let movable: Vec<usize> = (0..points.len()).filter(|&k| k != min_index).collect();
    if movable.is_empty() {
        return Ok(vec![problem.clone()]);
    }
    let beta_min = points[min_index].order;
    let per_point = (0.1 - target) / movable.len() as f64;
    for &k in &movable {
        if points[k].order - per_point <= beta_min {
            return Err(Error::NotSolvable(format!(
                "continuation would push order {k} below the minimal order {beta_min}"
            )));
        }
    }
    let mut slacks = vec![0.1];
    while slacks.last().unwrap() / 2.0 > target * 1.2 {
        let s = slacks.last().unwrap() / 2.0;
        slacks.push(s);
    }
    slacks.push(target);
    let mut out = Vec::new();
    for s in slacks {
        let shift = (s - target) / movable.len() as f64;
        let pts: Vec<ConePoint> = points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut p = *p;
                if k != min_index {
                    p.order -= shift;
                }
                p
            })
            .collect();
        out.push(ConformalProblem::new(Divisor::new(pts)?, problem.chart())?);
    }
    Ok(out)
}

/// Quadrature point of a dual cell next to a cone point.
struct NearPoint {
    dx: f64,
    dy: f64,
    b: f64,
    /// Weight divided by `h^2`, so sums are cell averages.
    wt: f64,
    /// `(S_k, Delta S_k)` for every enrichment.
    enr: Vec<(f64, f64)>,
}

struct NearCell {
    pts: Vec<NearPoint>,
    g_avg: f64,
}

/// Everything about the discrete system that does not depend on the unknowns.
struct System<'a> {
    problem: &'a ConformalProblem,
    n: usize,
    h: f64,
    enr: Vec<Enrichment>,
    interp: Vec<[(usize, f64); 4]>,
    b: Vec<f64>,
    g: Vec<f64>,
    radius: Vec<f64>,
    /// `(S_k, Delta S_k)` at every node, for every enrichment.
    powers: Vec<Vec<(f64, f64)>>,
    near: Vec<Option<NearCell>>,
    omega: Vec<f64>,
    pinned: Option<f64>,
    mass_target: f64,
}

/// Unknowns: `w` at the nodes, the far-field constant and one `kappa` per
/// enrichment.
#[derive(Clone)]
struct State {
    w: Vec<f64>,
    c: f64,
    kappa: Vec<f64>,
}

/// Residuals and the bordered Jacobian `[[A, B], [C, D]]`.
struct Eval {
    f: Vec<f64>,
    /// Mass equation (when `c` is free) then the `kappa` equations.
    extra: Vec<f64>,
    vals: Vec<f64>,
    /// Columns of `B`, one per extra unknown.
    border_cols: Vec<Vec<f64>>,
    /// Rows of `C`.
    border_rows: Vec<Vec<f64>>,
    /// `D`, row-major.
    corner: Vec<Vec<f64>>,
}

impl<'a> System<'a> {
    fn new(problem: &'a ConformalProblem, enrichment: bool) -> Self {
        let chart = problem.chart();
        let n = chart.nodes_per_side();
        let h = chart.h();
        let enr = if enrichment { problem.enrichments() } else { Vec::new() };
        let interp = enr
            .iter()
            .map(|e| {
                let (i, j, a, b) = chart.locate(e.z);
                [
                    (chart.index(i, j), (1.0 - a) * (1.0 - b)),
                    (chart.index(i + 1, j), a * (1.0 - b)),
                    (chart.index(i, j + 1), (1.0 - a) * b),
                    (chart.index(i + 1, j + 1), a * b),
                ]
            })
            .collect();
        let count = chart.node_count();
        let near_idx = problem.near_nodes();
        let mut b = vec![0.0; count];
        let mut g = vec![0.0; count];
        let mut radius = vec![0.0; count];
        let mut powers = vec![Vec::new(); count];
        let mut near: Vec<Option<NearCell>> = (0..count).map(|_| None).collect();
        let mut omega = vec![0.0; count];
        for j in 0..n {
            for i in 0..n {
                let k = chart.index(i, j);
                let z = chart.node(i, j);
                radius[k] = z.norm();
                g[k] = problem.source(z);
                let edge = (i == 0 || i == n - 1) as u8 + (j == 0 || j == n - 1) as u8;
                omega[k] = h * h / f64::from(1u8 << edge);
                if let Some(p) = near_idx[k] {
                    let (zp, beta) = problem.finite_points()[p];
                    let half = Point::new(0.5 * h, 0.5 * h);
                    let pts = polar_box_points(z - half, z + half, zp, beta, 32)
                        .into_iter()
                        .map(|(x, w)| NearPoint {
                            dx: x.re - z.re,
                            dy: x.im - z.im,
                            b: problem.background_raw(x),
                            wt: w / (h * h),
                            enr: enr.iter().map(|e| (e.value(x), e.laplacian(x))).collect(),
                        })
                        .collect();
                    let g_avg = gauss_box(z - half, z + half, 4, &|x| problem.source(x)) / (h * h);
                    near[k] = Some(NearCell { pts, g_avg });
                } else {
                    b[k] = problem.background_raw(z);
                    powers[k] = enr.iter().map(|e| (e.value(z), e.laplacian(z))).collect();
                }
            }
        }
        System {
            problem,
            n,
            h,
            enr,
            interp,
            b,
            g,
            radius,
            powers,
            near,
            omega,
            pinned: problem.pinned_constant(),
            mass_target: problem.total_mass(),
        }
    }

    fn free_c(&self) -> bool {
        self.pinned.is_none()
    }

    fn extras(&self) -> usize {
        self.free_c() as usize + self.enr.len()
    }

    /// `kappa_k - 2 v(z_k) - 2 rest_k`, with `v = w - sum_m K_m S_m` and the
    /// own term `S_k(z_k) = 0`.
    fn kappa_equations(&self, w: &[f64], kappa: &[f64]) -> Vec<f64> {
        let coef: Vec<f64> = self.enr.iter().zip(kappa).map(|(e, k)| e.coefficient(*k)).collect();
        self.enr
            .iter()
            .zip(&self.interp)
            .enumerate()
            .map(|(k, (e, ip))| {
                let mut v = ip.iter().map(|(m, a)| a * w[*m]).sum::<f64>();
                for (m, other) in self.enr.iter().enumerate() {
                    if m != k {
                        v -= coef[m] * other.value(e.z);
                    }
                }
                kappa[k] - 2.0 * (v + e.rest)
            })
            .collect()
    }

    fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = (k % self.n, k / self.n);
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Residuals and Jacobian. Sparse entries are produced in a fixed order;
    /// `pairs` records their positions on the first call.
    fn eval(&self, st: &State, mut pairs: Option<&mut Vec<Pair<usize, usize>>>) -> Eval {
        let n = self.n;
        let h = self.h;
        let h2 = h * h;
        let w = &st.w;
        let count = w.len();
        let ne = self.enr.len();
        let off = self.free_c() as usize;
        let coef: Vec<f64> = self.enr.iter().zip(&st.kappa).map(|(e, k)| e.coefficient(*k)).collect();
        let ff = self.problem.far_field(st.c);
        let mut f = vec![0.0; count];
        let mut vals = Vec::with_capacity(5 * count);
        let mut border_cols = vec![vec![0.0; count]; self.extras()];
        let mut dmass_dw = vec![0.0; count];
        let mut dmass_dk = vec![0.0; ne];
        let mut mass = 0.0;
        let mut push = |vals: &mut Vec<f64>, row: usize, col: usize, v: f64| {
            vals.push(v);
            if let Some(p) = pairs.as_deref_mut() {
                p.push(Pair { row, col });
            }
        };
        for k in 0..count {
            if self.is_boundary(k) {
                let r = self.radius[k];
                let mut u = w[k] + self.b[k];
                for (m, (s, _)) in self.powers[k].iter().enumerate() {
                    u -= coef[m] * s;
                }
                let e = (2.0 * u).exp();
                mass += self.omega[k] * e;
                dmass_dw[k] += self.omega[k] * 2.0 * e;
                f[k] = u - ff.u(r);
                push(&mut vals, k, k, 1.0);
                if off == 1 {
                    border_cols[0][k] = -ff.du_dc(r);
                }
                for (m, (s, _)) in self.powers[k].iter().enumerate() {
                    border_cols[off + m][k] = -coef[m] * s;
                    dmass_dk[m] += self.omega[k] * (-2.0 * coef[m] * s * e);
                }
                continue;
            }
            let lap = (w[k - 1] + w[k + 1] + w[k - n] + w[k + n] - 4.0 * w[k]) / h2;
            let (diag, ax, ay);
            if let Some(cell) = &self.near[k] {
                let gx = (w[k + 1] - w[k - 1]) / (2.0 * h);
                let gy = (w[k + n] - w[k - n]) / (2.0 * h);
                let mut src = 0.0;
                let mut avg_e = 0.0;
                let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
                for p in &cell.pts {
                    let mut u = w[k] + gx * p.dx + gy * p.dy + p.b;
                    let mut lap_s = 0.0;
                    for (m, (s, ls)) in p.enr.iter().enumerate() {
                        u -= coef[m] * s;
                        lap_s += coef[m] * ls;
                    }
                    let e = (2.0 * u).exp();
                    src += p.wt * (e - lap_s);
                    avg_e += p.wt * e;
                    a0 += p.wt * 2.0 * e;
                    a1 += p.wt * 2.0 * e * p.dx;
                    a2 += p.wt * 2.0 * e * p.dy;
                    for (m, (s, ls)) in p.enr.iter().enumerate() {
                        border_cols[off + m][k] += p.wt * (-coef[m] * ls - 2.0 * coef[m] * s * e);
                        dmass_dk[m] += self.omega[k] * p.wt * (-2.0 * coef[m] * s * e);
                    }
                }
                f[k] = lap + src - cell.g_avg;
                mass += self.omega[k] * avg_e;
                diag = a0;
                ax = a1 / (2.0 * h);
                ay = a2 / (2.0 * h);
                dmass_dw[k] += self.omega[k] * a0;
                dmass_dw[k + 1] += self.omega[k] * ax;
                dmass_dw[k - 1] -= self.omega[k] * ax;
                dmass_dw[k + n] += self.omega[k] * ay;
                dmass_dw[k - n] -= self.omega[k] * ay;
            } else {
                let mut u = w[k] + self.b[k];
                let mut lap_s = 0.0;
                for (m, (s, ls)) in self.powers[k].iter().enumerate() {
                    u -= coef[m] * s;
                    lap_s += coef[m] * ls;
                }
                let e = (2.0 * u).exp();
                f[k] = lap - lap_s + e - self.g[k];
                mass += self.omega[k] * e;
                for (m, (s, ls)) in self.powers[k].iter().enumerate() {
                    border_cols[off + m][k] = -coef[m] * ls - 2.0 * coef[m] * s * e;
                    dmass_dk[m] += self.omega[k] * (-2.0 * coef[m] * s * e);
                }
                diag = 2.0 * e;
                ax = 0.0;
                ay = 0.0;
                dmass_dw[k] += self.omega[k] * 2.0 * e;
            }
            let inv = 1.0 / h2;
            push(&mut vals, k, k, -4.0 * inv + diag);
            push(&mut vals, k, k - 1, inv - ax);
            push(&mut vals, k, k + 1, inv + ax);
            push(&mut vals, k, k - n, inv - ay);
            push(&mut vals, k, k + n, inv + ay);
        }
        let ext = self.extras();
        let mut extra = Vec::with_capacity(ext);
        let mut border_rows = Vec::with_capacity(ext);
        let mut corner = vec![vec![0.0; ext]; ext];
        if off == 1 {
            let (tail, tail_dc) = ff.mass_outside_square(self.problem.chart().half_width);
            let mt = self.mass_target;
            extra.push((mass + tail) / mt - 1.0);
            border_rows.push(dmass_dw.iter().map(|x| x / mt).collect());
            corner[0][0] = tail_dc / mt;
            for m in 0..ne {
                corner[0][off + m] = dmass_dk[m] / mt;
            }
        }
        extra.extend(self.kappa_equations(w, &st.kappa));
        for (m, ip) in self.interp.iter().enumerate() {
            let mut row = vec![0.0; count];
            for &(node, a) in ip {
                row[node] -= 2.0 * a;
            }
            border_rows.push(row);
            corner[off + m][off + m] = 1.0;
            for (j, other) in self.enr.iter().enumerate() {
                if j != m {
                    corner[off + m][off + j] = 2.0 * coef[j] * other.value(self.enr[m].z);
                }
            }
        }
        Eval { f, extra, vals, border_cols, border_rows, corner }
    }

    fn merit(&self, e: &Eval) -> f64 {
        let h2 = self.h * self.h;
        h2 * e.f.iter().map(|x| x * x).sum::<f64>() + e.extra.iter().map(|x| x * x).sum::<f64>()
    }

    fn step(&self, st: &State, d: &(Vec<f64>, Vec<f64>), t: f64) -> State {
        let off = self.free_c() as usize;
        State {
            w: st.w.iter().zip(&d.0).map(|(a, b)| a + t * b).collect(),
            c: if off == 1 { st.c + t * d.1[0] } else { st.c },
            kappa: st.kappa.iter().zip(&d.1[off..]).map(|(a, b)| a + t * b).collect(),
        }
    }
}

/// Sparse LU with a cached symbolic factorisation.
struct Linear {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: faer::sparse::Argsort<usize>,
    symlu: SymbolicLu<usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Linear {
    fn new(count: usize, pairs: &[Pair<usize, usize>]) -> Result<Self> {
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(count, count, pairs)
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        let symlu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| Error::Linear(format!("{e:?}")))?;
        Ok(Linear {
            symbolic,
            argsort,
            symlu,
            rows: pairs.iter().map(|p| p.row).collect(),
            cols: pairs.iter().map(|p| p.col).collect(),
        })
    }

    fn matvec(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for ((r, c), v) in self.rows.iter().zip(&self.cols).zip(vals) {
            y[*r] += v * x[*c];
        }
        y
    }

    /// Solves for each right-hand side, refining until the relative residual
    /// is at most 1e-10.
    fn solve(&self, vals: &[f64], rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, vals)
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(self.symlu.clone(), mat.as_ref())
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        let count = rhs[0].len();
        let mut b = Mat::<f64>::zeros(count, rhs.len());
        for (c, r) in rhs.iter().enumerate() {
            for (i, x) in r.iter().enumerate() {
                b[(i, c)] = *x;
            }
        }
        lu.solve_in_place(b.as_mut());
        let mut out: Vec<Vec<f64>> = (0..rhs.len()).map(|c| (0..count).map(|i| b[(i, c)]).collect()).collect();
        // normwise backward error ||b - Ax|| / (||A|| ||x|| + ||b||), max norms
        let mut row_sum = vec![0.0; count];
        for (r, v) in self.rows.iter().zip(vals) {
            row_sum[*r] += v.abs();
        }
        let a_norm = row_sum.iter().fold(0.0f64, |a, x| a.max(*x));
        for (c, x) in out.iter_mut().enumerate() {
            let b_norm = max_abs(&rhs[c]);
            if b_norm == 0.0 {
                continue;
            }
            let mut ok = false;
            for _ in 0..4 {
                let ax = self.matvec(vals, x);
                let res: Vec<f64> = rhs[c].iter().zip(&ax).map(|(b, a)| b - a).collect();
                if max_abs(&res) <= 1e-10 * (a_norm * max_abs(x) + b_norm) {
                    ok = true;
                    break;
                }
                let mut r = Mat::<f64>::zeros(count, 1);
                for (i, v) in res.iter().enumerate() {
                    r[(i, 0)] = *v;
                }
                lu.solve_in_place(r.as_mut());
                for (i, v) in x.iter_mut().enumerate() {
                    *v += r[(i, 0)];
                }
            }
            if !ok {
                return Err(Error::Linear("relative linear residual stayed above 1e-10".into()));
            }
        }
        Ok(out)
    }
}

fn initial_state(sys: &System, guess: Option<&InitialGuess>) -> State {
    let problem = sys.problem;
    let chart = problem.chart();
    let (mut v, c) = match guess {
        Some(g) if g.v.len() == chart.node_count() => {
            let mut v = g.v.clone();
            repair(&mut v, sys.n);
            (v, g.c)
        }
        _ => {
            let v0 = constant_guess(problem);
            (vec![v0; chart.node_count()], v0)
        }
    };
    let c = sys.pinned.unwrap_or(c);
    // kappa from v at the cone points, then w = v + sum K S
    let kappa: Vec<f64> = sys
        .enr
        .iter()
        .zip(&sys.interp)
        .map(|(e, ip)| 2.0 * (ip.iter().map(|(m, a)| a * v[*m]).sum::<f64>() + e.rest))
        .collect();
    for (k, x) in v.iter_mut().enumerate() {
        let z = chart.node(k % sys.n, k / sys.n);
        for (m, e) in sys.enr.iter().enumerate() {
            *x += e.coefficient(kappa[m]) * e.value(z);
        }
    }
    let mut st = State { w: v, c, kappa };
    // boundary values from the far field
    let ff = problem.far_field(c);
    let coef: Vec<f64> = sys.enr.iter().zip(&st.kappa).map(|(e, k)| e.coefficient(*k)).collect();
    for k in 0..st.w.len() {
        if sys.is_boundary(k) {
            let ks: f64 = sys.powers[k].iter().zip(&coef).map(|((s, _), c)| c * s).sum();
            st.w[k] = ff.u(sys.radius[k]) - sys.b[k] + ks;
        }
    }
    st
}

/// Constant `v0` with `int e^{2 (v0 + b)}` equal to the total mass, the
/// integral taken over the chart plus a radial tail.
fn constant_guess(problem: &ConformalProblem) -> f64 {
    let chart = problem.chart();
    let h = chart.h();
    let singular: Vec<(Point, f64)> = problem.finite_points().iter().copied().filter(|p| p.1 != 0.0).collect();
    let f = |z: Point| (2.0 * problem.background_raw(z)).exp();
    let mut integral = 0.0;
    for j in 0..chart.cells {
        for i in 0..chart.cells {
            let lo = chart.node(i, j);
            let hi = lo + Point::new(h, h);
            let near: Vec<(Point, f64)> = singular
                .iter()
                .copied()
                .filter(|(z, _)| crate::field::near_box(*z, lo, hi, 2.0 * h))
                .collect();
            integral += if near.is_empty() {
                gauss_box(lo, hi, 3, &f)
            } else {
                crate::quadrature::singular_box(lo, hi, &near, &f)
            };
        }
    }
    let p = 2.0 + 2.0 * problem.beta_inf();
    let l = chart.half_width;
    integral += std::f64::consts::PI * l.powf(-p) * 2.0 / p;
    0.5 * (problem.total_mass() / integral).ln()
}

fn newton(problem: &ConformalProblem, config: &SolverConfig, guess: Option<&InitialGuess>) -> Result<ConformalSolution> {
    faer::set_global_parallelism(faer::Par::Seq);
    let sys = System::new(problem, config.enrichment);
    let count = problem.chart().node_count();
    let mut st = initial_state(&sys, guess);
    let mut pairs = Vec::new();
    let mut cur = sys.eval(&st, Some(&mut pairs));
    let linear = Linear::new(count, &pairs)?;
    let mut phi = sys.merit(&cur);
    let mut history = Vec::new();
    let converged = |e: &Eval| max_abs(&e.f) <= config.tol && max_abs(&e.extra) <= config.tol;
    let mut iterations = 0;
    while !converged(&cur) {
        if iterations >= config.max_iter {
            return Err(Error::NoConvergence { iterations, residual: max_abs(&cur.f) });
        }
        iterations += 1;
        let d = bordered_solve(&linear, &cur)?;
        let mut t = 1.0;
        loop {
            let trial = sys.step(&st, &d, t);
            let e = sys.eval(&trial, None);
            let p = sys.merit(&e);
            if p.is_finite() && p <= (1.0 - 2e-4 * t) * phi {
                st = trial;
                cur = e;
                phi = p;
                history.push(p);
                break;
            }
            t *= 0.5;
            if t < 1.0 / 1024.0 {
                return Err(Error::NoConvergence { iterations, residual: max_abs(&cur.f) });
            }
        }
    }
    let report = SolveReport {
        iterations,
        total_iterations: iterations,
        residual: max_abs(&cur.f),
        mass_equation: if sys.free_c() { cur.extra[0] } else { 0.0 },
        history,
        stages: 1,
    };
    Ok(ConformalSolution::new(problem.clone(), st.w, st.c, sys.enr.clone(), st.kappa, report))
}

/// Newton direction from the Schur complement of the sparse block.
fn bordered_solve(linear: &Linear, e: &Eval) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rhs = vec![e.f.iter().map(|x| -x).collect::<Vec<f64>>()];
    rhs.extend(e.border_cols.iter().cloned());
    let sol = linear.solve(&e.vals, &rhs)?;
    let m = e.extra.len();
    if m == 0 {
        return Ok((sol.into_iter().next().unwrap(), Vec::new()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // (D - C Y) de = -E - C x0
    let schur = nalgebra::DMatrix::from_fn(m, m, |i, j| e.corner[i][j] - dot(&e.border_rows[i], &sol[1 + j]));
    let r = nalgebra::DVector::from_fn(m, |i, _| -e.extra[i] - dot(&e.border_rows[i], &sol[0]));
    let de = schur
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Linear("singular Schur complement".into()))?;
    let mut dw = sol[0].clone();
    for j in 0..m {
        for (x, y) in dw.iter_mut().zip(&sol[1 + j]) {
            *x -= y * de[j];
        }
    }
    Ok((dw, de.iter().copied().collect()))
}

/// Max norm; NaN entries count as infinite.
fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| if x.is_nan() { f64::INFINITY } else { a.max(x.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Chart;

    fn three_points(cells: usize) -> ConformalProblem {
        let mut pts = vec![ConePoint::at_infinity(-0.3)];
        for k in 0..3 {
            let z = Point::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
            pts.push(ConePoint::finite(z, -0.3));
        }
        ConformalProblem::new(Divisor::new(pts).unwrap(), Chart::new(4.0, cells).unwrap()).unwrap()
    }

    /// Directional derivative of the residuals against central differences.
    #[test]
    fn jacobian_matches_finite_differences() {
        let p = three_points(16);
        let sys = System::new(&p, true);
        let mut st = initial_state(&sys, None);
        let count = st.w.len();
        for (k, x) in st.w.iter_mut().enumerate() {
            *x += 0.1 * ((k as f64) * 0.37).sin();
        }
        let mut pairs = Vec::new();
        let e = sys.eval(&st, Some(&mut pairs));
        let dw: Vec<f64> = (0..count).map(|k| ((k as f64) * 1.3).cos()).collect();
        let de: Vec<f64> = (0..sys.extras()).map(|k| 0.5 - 0.2 * k as f64).collect();
        let d = (dw.clone(), de.clone());
        let eps = 1e-6;
        let plus = sys.eval(&sys.step(&st, &d, eps), None);
        let minus = sys.eval(&sys.step(&st, &d, -eps), None);
        // J d
        let mut jd = vec![0.0; count];
        for (pr, v) in pairs.iter().zip(&e.vals) {
            jd[pr.row] += v * dw[pr.col];
        }
        for (j, col) in e.border_cols.iter().enumerate() {
            for k in 0..count {
                jd[k] += col[k] * de[j];
            }
        }
        for (k, an) in jd.iter().enumerate().take(count) {
            let fd = (plus.f[k] - minus.f[k]) / (2.0 * eps);
            assert!((fd - an).abs() <= 1e-5 * (1.0 + fd.abs()), "row {k}: {fd} vs {an}");
        }
        for i in 0..sys.extras() {
            let fd = (plus.extra[i] - minus.extra[i]) / (2.0 * eps);
            let an: f64 = e.border_rows[i].iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>()
                + e.corner[i].iter().zip(&de).map(|(a, b)| a * b).sum::<f64>();
            assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "extra {i}: {fd} vs {an}");
        }
    }

    #[test]
    fn round_sphere_from_the_mass_guess() {
        let chart = Chart::new(8.0, 64).unwrap();
        let p = ConformalProblem::new(Divisor::empty(), chart).unwrap();
        let s = solve(&p, 1e-10, 20).unwrap();
        let ln2 = 2f64.ln();
        assert!(s.v_nodes().iter().all(|v| (v - ln2).abs() < 1e-10));
        assert!(s.report.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn football_error_is_second_order() {
        let f = crate::football::FootballMetric::new(-0.5).unwrap();
        let mut errs = Vec::new();
        for cells in [64, 128] {
            let d = Divisor::new(vec![ConePoint::at_infinity(-0.5), ConePoint::finite(Point::new(0.0, 0.0), -0.5)]).unwrap();
            let p = ConformalProblem::new(d, Chart::new(4.0, cells).unwrap()).unwrap();
            let s = solve(&p, 1e-10, 30).unwrap();
            let z = Point::new(1.0, 0.0);
            errs.push((s.u(z) - f.log_factor(z)).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn symmetric_divisor_gives_symmetric_field() {
        let rot = Point::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let mut asym = Vec::new();
        for cells in [64, 128] {
            let s = solve(&three_points(cells), 1e-10, 30).unwrap();
            let mut a: f64 = 0.0;
            for z in [Point::new(0.3, 0.1), Point::new(1.5, -1.0), Point::new(-0.5, 0.7)] {
                a = a.max((s.regular_part(z) - s.regular_part(z * rot)).abs());
            }
            asym.push(a);
        }
        // the square lattice only has the symmetry up to discretisation error
        // what is left comes from the square boundary, not the lattice
        assert!(asym.iter().all(|a| *a < 1e-3), "{asym:?}");
        assert!((asym[0] - asym[1]).abs() < 0.5 * asym[0], "{asym:?}");
    }

    #[test]
    fn warm_start_from_a_rescaled_solution() {
        let s = solve(&three_points(32), 1e-10, 30).unwrap();
        let lambda = 1.25;
        let p2 = three_points(32).rescaled(lambda, Chart::new(4.0, 32).unwrap()).unwrap();
        let guess = InitialGuess::transplant(&s, &p2, lambda);
        let s2 = solve_with(&p2, &SolverConfig { tol: 1e-10, ..Default::default() }, Some(&guess)).unwrap();
        assert!((s2.far_constant() - guess.c).abs() < 0.05);
        assert!(s2.report.iterations <= 6);
    }

    #[test]
    fn near_critical_divisors_use_continuation() {
        let d = Divisor::new(vec![
            ConePoint::at_infinity(-0.5),
            ConePoint::finite(Point::new(0.5, 0.0), -0.26),
            ConePoint::finite(Point::new(-0.5, 0.0), -0.26),
        ])
        .unwrap();
        let p = ConformalProblem::new(d, Chart::new(4.0, 64).unwrap()).unwrap();
        let s = solve(&p, 1e-9, 40).unwrap();
        assert!(s.report.stages >= 3);
        assert!(s.report.residual <= 1e-9);
    }

    #[test]
    fn rejects_supercritical() {
        let d = Divisor::new(vec![
            ConePoint::at_infinity(-0.5),
            ConePoint::finite(Point::new(1.0, 0.0), -0.2),
            ConePoint::finite(Point::new(-1.0, 0.0), -0.2),
        ])
        .unwrap();
        let p = ConformalProblem::new(d, Chart::new(4.0, 16).unwrap()).unwrap();
        assert!(matches!(solve(&p, 1e-8, 10), Err(Error::NotSolvable(_))));
    }
}
