//! Divisor paths approaching the critical wall and the per-step
//! measurements along them: profile deviation from the limit football,
//! isoperimetric defects, normalized cone positions, component shares,
//! field differences on fixed annuli and a Gromov-Hausdorff lower bound.

mod metric;

use std::f64::consts::PI;

use serde::Serialize;

pub use metric::{gh_lower_bound, sample_metric, GraphSpec, Surface};

use crate::divisor::{classify, slack, ClassKind, ConePoint, Divisor, Point, Position, DEFAULT_CRITICAL_TOL};
use crate::error::{Error, Result};
use crate::field::{Chart, Field, FootballField};
use crate::football::FootballMetric;
use crate::levelset::{normalize_sampled, LevelSampler, Normalization};
use crate::liouville::{solve_with, ConformalProblem, ConformalSolution, InitialGuess, SolverConfig};
use crate::parallel::par_map;

/// Orders interpolated linearly from a subcritical start to a critical end
/// with fixed positions. Step `k` sits at `s = k / steps`, so the critical
/// end itself is not a step.
#[derive(Debug, Clone)]
pub struct DivisorPath {
    pub positions: Vec<Position>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub params: Vec<f64>,
    pub steps: Vec<Divisor>,
    pub slacks: Vec<f64>,
    /// Index of the smallest order, the same at every step.
    pub min_index: usize,
}

impl DivisorPath {
    /// The critical divisor at `s = 1`.
    pub fn limit(&self) -> Divisor {
        divisor_at(&self.positions, &self.end).expect("validated by make_path")
    }

    /// Smallest order of the limit divisor.
    pub fn limit_order(&self) -> f64 {
        self.end[self.min_index]
    }
}

fn divisor_at(positions: &[Position], orders: &[f64]) -> Result<Divisor> {
    Divisor::new(positions.iter().zip(orders).map(|(p, b)| ConePoint { position: *p, order: *b }).collect())
}

/// Build and validate a path. Every step must be subcritical with the
/// same minimal index as the end, and the slack must strictly decrease.
pub fn make_path(beta_start: &[f64], beta_end: &[f64], positions: &[Position], steps: usize) -> Result<DivisorPath> {
    let n = positions.len();
    if beta_start.len() != n || beta_end.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} positions but {} start and {} end orders",
            n,
            beta_start.len(),
            beta_end.len()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("a path needs at least one step".into()));
    }
    let end = divisor_at(positions, beta_end)?;
    let end_class = classify(&end, DEFAULT_CRITICAL_TOL);
    if end_class.kind != ClassKind::Critical {
        return Err(Error::Domain(format!("the end divisor is {} (slack {}), not Critical", end_class.kind, end_class.slack)));
    }
    let min_index = end_class.min_index.expect("nonempty");
    let mut params = Vec::with_capacity(steps);
    let mut divisors = Vec::with_capacity(steps);
    let mut slacks = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = k as f64 / steps as f64;
        let orders: Vec<f64> = beta_start.iter().zip(beta_end).map(|(a, b)| a + s * (b - a)).collect();
        let d = divisor_at(positions, &orders)?;
        let c = classify(&d, DEFAULT_CRITICAL_TOL);
        if c.kind != ClassKind::Subcritical {
            return Err(Error::Domain(format!("step {k} (s = {s}) is {} with slack {}", c.kind, c.slack)));
        }
        if c.min_index != Some(min_index) {
            return Err(Error::Domain(format!("the minimal order moves from point {min_index} at step {k}")));
        }
        if let Some(prev) = slacks.last() {
            if !(c.slack < *prev) {
                return Err(Error::Domain(format!("slack does not decrease at step {k}")));
            }
        }
        params.push(s);
        slacks.push(c.slack);
        divisors.push(d);
    }
    debug_assert!(slack(beta_end).abs() <= DEFAULT_CRITICAL_TOL);
    Ok(DivisorPath {
        positions: positions.to_vec(),
        start: beta_start.to_vec(),
        end: beta_end.to_vec(),
        params,
        steps: divisors,
        slacks,
        min_index,
    })
}

/// Grid and measurement settings of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub half_width: f64,
    pub cells: usize,
    pub solver: SolverConfig,
    /// Normalized levels compared with the limit profile; defaults to
    /// `ln(1 + beta) -+ 2` for the limit order `beta`.
    pub window: Option<(f64, f64)>,
    pub window_levels: usize,
    /// Level of the share and centroid measurements; defaults to `ln(1 + beta) - 0.5`.
    pub t_star: Option<f64>,
    /// Sample size of the GH estimate, 0 to skip it.
    pub gh_samples: usize,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            half_width: 8.0,
            cells: 512,
            solver: SolverConfig::default(),
            window: None,
            window_levels: 41,
            t_star: None,
            gh_samples: 0,
            seed: 0,
        }
    }
}

/// Measurements at one step of a path.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub s: f64,
    pub slack: f64,
    /// Working scale: finite points were solved at `mu z_i`.
    pub mu: f64,
    /// Gauge of the working field.
    pub lambda: f64,
    pub kappa: Point,
    /// `sup |A_l(t) - A_inf(t)|` over the window.
    pub a_deviation: f64,
    /// Largest defect of the whole superlevel set at the window levels, in
    /// normalized units.
    pub max_defect: f64,
    /// change of that defect when the step is solved, normalized and
    /// measured again on a lattice with half as many cells (NaN if that
    /// solve fails)
    pub defect_slack: f64,
    /// Normalized positions of the finite points, in input order.
    pub positions: Vec<Point>,
    /// Largest mutual distance among the normalized finite points.
    pub cluster_diameter: f64,
    pub largest_share: f64,
    /// `sup |u_l - u_inf|` on the two annuli, normalized coordinates.
    pub field_difference: f64,
    pub gh_lower_bound: Option<f64>,
    pub gauss_bonnet: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub limit_order: f64,
    pub window: (f64, f64),
    pub t_star: f64,
    /// The same A-deviation measured on the exact limit football on the
    /// working chart: the floor set by the discretization.
    pub control_a_deviation: f64,
    pub steps: Vec<StepReport>,
    /// Set when a step failed; `steps` then holds the steps before it.
    pub error: Option<String>,
}

impl ConvergenceReport {
    pub fn column<F: Fn(&StepReport) -> f64>(&self, f: F) -> Vec<f64> {
        self.steps.iter().map(f).collect()
    }
}

/// Annuli of the field comparison in normalized coordinates.
pub const ANNULI: [(f64, f64); 2] = [(0.25, 0.5), (2.0, 4.0)];

/// Largest working-scale change accepted without a re-solve.
const SCALE_TOLERANCE: f64 = 1.5;
const SCALE_RETRIES: usize = 3;

/// Solve every step of `path` with warm starts, normalize, and measure.
/// The smallest order must sit at infinity, so the finite points are the
/// ones that merge. A failed step ends the run with a partial report.
pub fn run(path: &DivisorPath, config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if path.positions[path.min_index] != Position::Infinity {
        return Err(Error::InvalidInput("the smallest order must sit at infinity".into()));
    }
    if config.window_levels < 2 {
        return Err(Error::InvalidInput("need at least two window levels".into()));
    }
    let chart = Chart::new(config.half_width, config.cells)?;
    let beta = path.limit_order();
    let anchor = (1.0 + beta).ln();
    let window = config.window.unwrap_or((anchor - 2.0, anchor + 2.0));
    if !(window.0 < window.1) {
        return Err(Error::InvalidInput(format!("empty window {window:?}")));
    }
    let t_star = config.t_star.unwrap_or(anchor - 0.5);
    let limit = FootballMetric::new(beta)?;
    let n = config.window_levels;
    let a_levels: Vec<f64> = (0..n).map(|k| window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64).collect();
    let exact: Vec<f64> = a_levels.iter().map(|t| limit.a_profile(*t)).collect::<Result<_>>()?;

    let control = {
        let f = FootballField::new(limit, chart);
        let s = LevelSampler::new(&f);
        window_scan(&s, &Normalization::identity(), &a_levels, &exact).0
    };

    let finite: Vec<Point> = path
        .positions
        .iter()
        .filter_map(|p| match p {
            Position::Finite(z) => Some(*z),
            Position::Infinity => None,
        })
        .collect();
    let mu_min = min_working_scale(&finite, chart);
    let mu_max = max_working_scale(&finite, chart);
    let mut mu = 1.0f64.clamp(mu_min, mu_max);

    let mut report = ConvergenceReport {
        limit_order: beta,
        window,
        t_star,
        control_a_deviation: control,
        steps: Vec::new(),
        error: None,
    };
    let mut previous: Option<Warm> = None;
    for (k, divisor) in path.steps.iter().enumerate() {
        let mut attempt = 0;
        let outcome = loop {
            let orders = divisor.orders();
            let solved = solve_toward(previous.as_ref(), &path.positions, &orders, mu, chart, &config.solver, 0).or_else(|e| {
                if previous.is_some() {
                    solve_with(&working_problem(divisor, mu, chart)?, &config.solver, None)
                } else {
                    Err(e)
                }
            });
            let sol = match solved {
                Ok(s) => s,
                Err(e) => break Err(e),
            };
            let sampler = LevelSampler::new(&sol);
            let norm = match normalize_sampled(&sampler, beta, t_star) {
                Ok(n) => n,
                Err(e) => break Err(e),
            };
            let next = (mu / norm.lambda).clamp(mu_min, mu_max);
            let off = (next / mu).ln().abs() > SCALE_TOLERANCE.ln();
            if off && attempt < SCALE_RETRIES {
                attempt += 1;
                previous = Some(Warm { sol, mu, orders });
                mu = next;
                continue;
            }
            break Ok((sol, norm, next));
        };
        let (sol, norm, next) = match outcome {
            Ok(x) => x,
            Err(e) => {
                report.error = Some(format!("step {k}: {e}"));
                return Ok(report);
            }
        };
        let sampler = LevelSampler::new(&sol);
        let step = measure(&sol, &sampler, &norm, MeasureInput {
            step: k,
            divisor,
            s: path.params[k],
            slack: path.slacks[k],
            mu,
            finite: &finite,
            limit: &limit,
            a_levels: &a_levels,
            exact: &exact,
            t_star,
            config,
        })?;
        report.steps.push(step);
        previous = Some(Warm { sol, mu, orders: divisor.orders() });
        mu = next;
    }
    Ok(report)
}

/// Points closer than four cells, or nearer than two cells to the edge, are
/// not resolved by the solver.
fn min_working_scale(finite: &[Point], chart: Chart) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in finite.iter().enumerate() {
        for b in &finite[..i] {
            gap = gap.min((a - b).norm());
        }
        if a.norm() > 0.0 {
            gap = gap.min(2.0 * a.norm());
        }
    }
    if gap.is_finite() {
        4.0 * chart.h() / gap
    } else {
        0.0
    }
}

fn max_working_scale(finite: &[Point], chart: Chart) -> f64 {
    let reach = finite.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if reach > 0.0 {
        0.5 * chart.half_width / reach
    } else {
        f64::INFINITY
    }
}

/// A solved neighbour on the path: its working scale and orders.
struct Warm {
    sol: ConformalSolution,
    mu: f64,
    orders: Vec<f64>,
}

/// Deepest halving of the order change before giving up on warm starts.
const MAX_HALVINGS: usize = 4;

/// Solve for `orders` warm-started from `from`; when Newton fails, solve the
/// midpoint orders first and continue from there.
fn solve_toward(
    from: Option<&Warm>,
    positions: &[Position],
    orders: &[f64],
    mu: f64,
    chart: Chart,
    solver: &SolverConfig,
    depth: usize,
) -> Result<ConformalSolution> {
    let problem = working_problem(&divisor_at(positions, orders)?, mu, chart)?;
    let guess = from.map(|w| InitialGuess::transplant(&w.sol, &problem, w.mu / mu));
    // the path itself is the continuation when there is a warm start
    let config = SolverConfig { continuation: solver.continuation && guess.is_none(), ..*solver };
    match solve_with(&problem, &config, guess.as_ref()) {
        Ok(s) => Ok(s),
        Err(e) => match from {
            Some(w) if depth < MAX_HALVINGS && w.orders != orders => {
                let mid: Vec<f64> = w.orders.iter().zip(orders).map(|(a, b)| 0.5 * (a + b)).collect();
                let sol = solve_toward(from, positions, &mid, mu, chart, solver, depth + 1)?;
                let half = Warm { sol, mu, orders: mid };
                solve_toward(Some(&half), positions, orders, mu, chart, solver, depth + 1)
            }
            _ => Err(e),
        },
    }
}

fn working_problem(divisor: &Divisor, mu: f64, chart: Chart) -> Result<ConformalProblem> {
    let points = divisor
        .points()
        .iter()
        .map(|p| match p.position {
            Position::Finite(z) => ConePoint::finite(z * mu, p.order),
            Position::Infinity => *p,
        })
        .collect();
    ConformalProblem::new(Divisor::new(points)?, chart)
}

/// `sup |A - exact|` and the largest normalized defect over the levels.
/// Normalized whole-set defect at window level `t` of the same step solved
/// on a lattice with half as many cells, warm-started from `sol`.
fn coarse_defect(sol: &ConformalSolution, divisor: &Divisor, mu: f64, beta: f64, t_star: f64, t: f64, solver: &SolverConfig) -> Result<f64> {
    let chart = sol.chart();
    let coarse = Chart::new(chart.half_width, ((chart.cells / 2).max(4) + 1) & !1)?;
    let problem = working_problem(divisor, mu, coarse)?;
    let guess = InitialGuess::transplant(sol, &problem, 1.0);
    let csol = solve_with(&problem, &SolverConfig { continuation: false, ..*solver }, Some(&guess))?;
    let s = LevelSampler::new(&csol);
    let norm = normalize_sampled(&s, beta, t_star)?;
    Ok(set_defect(&s, norm.original_level(t)).1 / (norm.lambda * norm.lambda))
}

/// Whole-set isoperimetric defect `L^2 - 4 pi B` of `{u > t}`.
fn set_defect<F: Field + ?Sized>(s: &LevelSampler<'_, F>, t: f64) -> (f64, f64) {
    let regions = s.extract(t);
    let a: f64 = regions.iter().map(|r| r.mass).sum();
    let p: f64 = regions.iter().map(|r| r.perimeter).sum();
    let b: f64 = regions.iter().map(|r| r.area).sum();
    (a, p * p - 4.0 * PI * b)
}

/// `(sup |A - exact|, max defect / lambda^2, level of that defect)`.
fn window_scan<F: Field + ?Sized>(s: &LevelSampler<'_, F>, norm: &Normalization, levels: &[f64], exact: &[f64]) -> (f64, f64, f64) {
    let l2 = norm.lambda * norm.lambda;
    let rows = par_map(levels.len(), |k| {
        let (a, d) = set_defect(s, norm.original_level(levels[k]));
        ((a - exact[k]).abs(), d / l2)
    });
    let mut out = (0.0, f64::NEG_INFINITY, levels[0]);
    for (r, t) in rows.iter().zip(levels) {
        out.0 = f64::max(out.0, r.0);
        if r.1 > out.1 {
            out.1 = r.1;
            out.2 = *t;
        }
    }
    out
}

struct MeasureInput<'a> {
    step: usize,
    divisor: &'a Divisor,
    s: f64,
    slack: f64,
    mu: f64,
    finite: &'a [Point],
    limit: &'a FootballMetric,
    a_levels: &'a [f64],
    exact: &'a [f64],
    t_star: f64,
    config: &'a ConvergenceConfig,
}

fn measure(sol: &ConformalSolution, s: &LevelSampler<'_, ConformalSolution>, norm: &Normalization, m: MeasureInput<'_>) -> Result<StepReport> {
    let (a_dev, max_defect, t_max) = window_scan(s, norm, m.a_levels, m.exact);
    let defect_slack = coarse_defect(sol, m.divisor, m.mu, m.limit.beta(), m.t_star, t_max, &m.config.solver)
        .map_or(f64::NAN, |d| (d - max_defect).abs());
    let positions: Vec<Point> = m.finite.iter().map(|z| norm.apply(z * m.mu)).collect();
    let mut diam: f64 = 0.0;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[..i] {
            diam = diam.max((a - b).norm());
        }
    }
    let share = crate::levelset::share(&s.extract(norm.original_level(m.t_star))).unwrap_or(1.0);
    let field_difference = annulus_difference(sol, norm, m.limit);
    let gh = if m.config.gh_samples > 0 {
        let spec = GraphSpec { r_min: 1e-4 * norm.lambda, r_max: 1e5 * norm.lambda, ..GraphSpec::default() };
        let dx = sample_metric(&Surface::Field { field: sol, center: -norm.kappa, graph: spec }, m.config.gh_samples, m.config.seed)?;
        let dy = sample_metric(&Surface::Football(m.limit), m.config.gh_samples, m.config.seed)?;
        Some(gh_lower_bound(&dx, &dy)?)
    } else {
        None
    };
    Ok(StepReport {
        step: m.step,
        s: m.s,
        slack: m.slack,
        mu: m.mu,
        lambda: norm.lambda,
        kappa: norm.kappa,
        a_deviation: a_dev,
        max_defect,
        defect_slack,
        positions,
        cluster_diameter: diam,
        largest_share: share,
        field_difference,
        gh_lower_bound: gh,
        gauss_bonnet: sol.verify_gauss_bonnet(),
        iterations: sol.report.total_iterations,
    })
}

fn annulus_difference(sol: &ConformalSolution, norm: &Normalization, limit: &FootballMetric) -> f64 {
    const RADII: usize = 16;
    const ANGLES: usize = 64;
    let mut worst: f64 = 0.0;
    for (r0, r1) in ANNULI {
        for i in 0..RADII {
            let r = r0 * (r1 / r0).powf(i as f64 / (RADII - 1) as f64);
            for j in 0..ANGLES {
                let w = Point::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / ANGLES as f64);
                worst = worst.max((norm.value(sol, w) - limit.log_factor(w)).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions() -> Vec<Position> {
        vec![Position::Infinity, Position::Finite(Point::new(1.0, 0.0)), Position::Finite(Point::new(-1.0, 0.0))]
    }

    #[test]
    fn valid_path() {
        let p = make_path(&[-0.5, -0.3, -0.3], &[-0.5, -0.25, -0.25], &positions(), 8).unwrap();
        assert_eq!(p.steps.len(), 8);
        assert!((p.slacks[0] - 0.1).abs() < 1e-15);
        assert!((p.slacks[7] - 0.0125).abs() < 1e-14);
        assert!(p.slacks.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(p.min_index, 0);
        assert_eq!(p.limit_order(), -0.5);
    }

    #[test]
    fn invalid_paths() {
        // supercritical start
        assert!(make_path(&[-0.5, -0.2, -0.2], &[-0.5, -0.25, -0.25], &positions(), 8).is_err());
        // end not critical
        assert!(make_path(&[-0.5, -0.3, -0.3], &[-0.5, -0.28, -0.28], &positions(), 8).is_err());
        // the minimal order changes hands
        assert!(make_path(&[-0.3, -0.6, -0.3], &[-0.5, -0.25, -0.25], &positions(), 8).is_err());
        assert!(make_path(&[-0.5, -0.3], &[-0.5, -0.25, -0.25], &positions(), 8).is_err());
        assert!(make_path(&[-0.5, -0.3, -0.3], &[-0.5, -0.25, -0.25], &positions(), 0).is_err());
    }

    #[test]
    fn run_needs_the_minimum_at_infinity() {
        let pos = vec![Position::Finite(Point::new(0.0, 0.0)), Position::Finite(Point::new(1.0, 0.0)), Position::Infinity];
        let p = make_path(&[-0.5, -0.3, -0.3], &[-0.5, -0.25, -0.25], &pos, 2).unwrap();
        assert!(run(&p, &ConvergenceConfig::default()).is_err());
    }
}
