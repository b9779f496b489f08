//! The `conic` command line tool.
//!
//! Exit codes: 0 on success, 1 when an input violates a precondition,
//! 2 on I/O and parse failures (including unknown flags).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::convergence::{make_path, run, ConvergenceConfig, ConvergenceReport};
use crate::divisor::{classify, Divisor, Point, Position, DEFAULT_CRITICAL_TOL};
use crate::error::{Error, Result};
use crate::field::{Chart, Field};
use crate::football::FootballMetric;
use crate::io::{num, sha256_hex, Table};
use crate::levelset::profile;
use crate::liouville::{solve_with, ConformalProblem, ConformalSolution, SolverConfig};
use crate::polytope::{hausdorff_distance, lens_degeneration_curve, lens_poles, triangle_from_angles};

#[derive(Debug, Parser, Serialize)]
#[command(name = "conic", version, about = "Constant-curvature conic metrics on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Classify a divisor file.
    Classify {
        #[serde(skip)]
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CRITICAL_TOL)]
        tol: f64,
        /// Print the classification as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Closed-form A, B and radius profiles of a football.
    Football {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Levels as `start:step:stop` or a comma list.
        #[arg(long = "t", allow_hyphen_values = true)]
        levels: String,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Sides and area of a spherical triangle.
    Triangle {
        #[arg(long, num_args = 3, allow_hyphen_values = true, required = true)]
        angles: Vec<f64>,
        /// Read the three numbers as cone orders beta, the angle being pi (1 + beta).
        #[arg(long)]
        orders: bool,
    },
    /// Sides along the family A = B + C - pi + eps.
    LensCurve {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        /// Comma list of positive eps values.
        #[arg(long)]
        eps: String,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Solve the Liouville equation for a divisor file.
    Solve {
        #[serde(skip)]
        file: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Directory for field.csv and report.json.
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Superlevel-set profile of a solved divisor.
    Levels {
        #[serde(skip)]
        file: PathBuf,
        #[arg(long = "t", allow_hyphen_values = true)]
        levels: String,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Run a divisor path toward the critical wall.
    Converge {
        #[serde(skip)]
        file: PathBuf,
        /// Override the lattice size of the path file.
        #[arg(long)]
        cells: Option<usize>,
        /// Directory for converge.csv and summary.json.
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
struct GridArgs {
    /// Half width L of the chart [-L, L]^2.
    #[arg(long, default_value_t = 8.0)]
    half_width: f64,
    /// Cells per side.
    #[arg(long, conflicts_with = "h")]
    cells: Option<usize>,
    /// Lattice spacing, rounded to an even cell count.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 60)]
    max_iter: usize,
    #[arg(long)]
    no_continuation: bool,
}

impl GridArgs {
    fn chart(&self) -> Result<Chart> {
        let cells = match (self.cells, self.h) {
            (Some(n), _) => n,
            (None, Some(h)) if h > 0.0 => {
                let n = (2.0 * self.half_width / h).round() as usize;
                n + (n & 1)
            }
            (None, Some(h)) => return Err(Error::InvalidInput(format!("lattice spacing {h} must be positive"))),
            (None, None) => 512,
        };
        Chart::new(self.half_width, cells)
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig { tol: self.tol, max_iter: self.max_iter, continuation: !self.no_continuation, ..SolverConfig::default() }
    }
}

/// Run the tool on `argv` (program name first), writing results to `stdout`
/// and diagnostics to stderr. Returns the exit code.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                eprint!("{e}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Hash of the parsed command plus the contents of its input file. Output
/// paths are left out so the same run lands byte-identical anywhere.
fn config_hash(cli: &Cli, input: Option<&str>) -> Result<String> {
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": serde_json::to_value(cli)?,
        "input_sha256": input.map(|s| sha256_hex(s.as_bytes())),
    });
    Ok(sha256_hex(serde_json::to_string(&doc)?.as_bytes()))
}

fn emit(table: &Table, hash: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => table.save(p, hash),
        None => table.write_to(stdout, hash),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Classify { file, tol, json } => {
            let d = Divisor::from_json(&read(file)?)?;
            let c = classify(&d, *tol);
            if *json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&c)?)?;
            } else {
                let slack = if c.slack.abs() <= *tol { 0.0 } else { c.slack };
                writeln!(stdout, "{}, slack {}", c.kind, slack)?;
                if c.outside_hypotheses {
                    writeln!(stdout, "note: an order lies outside (-1, 0)")?;
                }
            }
            Ok(())
        }
        Command::Football { beta, levels, out } => {
            let m = FootballMetric::new(*beta)?;
            let mut t = Table::new(&["t", "rho", "a", "b"]);
            for x in parse_levels(levels)? {
                t.push(&[x, m.rho_from_t(x)?, m.a_profile(x)?, m.b_profile(x)?]);
            }
            emit(&t, &config_hash(cli, None)?, out.as_deref(), stdout)
        }
        Command::Triangle { angles, orders } => {
            let a: Vec<f64> =
                if *orders { angles.iter().map(|b| std::f64::consts::PI * (1.0 + b)).collect() } else { angles.clone() };
            let tri = triangle_from_angles(a[0], a[1], a[2])?;
            let mut t = Table::new(&["angle_a", "angle_b", "angle_c", "side_a", "side_b", "side_c", "area"]);
            t.push(&[a[0], a[1], a[2], tri.sides[0], tri.sides[1], tri.sides[2], tri.area()]);
            emit(&t, &config_hash(cli, None)?, None, stdout)
        }
        Command::LensCurve { b, c, eps, out } => {
            let eps = parse_levels(eps)?;
            let mut t = Table::new(&["eps", "side_a", "side_b", "side_c", "hausdorff_to_poles"]);
            for (e, sides) in lens_degeneration_curve(*b, *c, &eps)? {
                let tri = triangle_from_angles(b + c - std::f64::consts::PI + e, *b, *c)?;
                let h = hausdorff_distance(&tri.vertices, &lens_poles())?;
                t.push(&[e, sides[0], sides[1], sides[2], h]);
            }
            emit(&t, &config_hash(cli, None)?, out.as_deref(), stdout)
        }
        Command::Solve { file, grid, out } => {
            let text = read(file)?;
            let sol = solve_file(&text, grid)?;
            let report = serde_json::json!({
                "report": sol.report,
                "far_constant": sol.far_constant(),
                "gauss_bonnet": sol.verify_gauss_bonnet(),
                "config_hash": config_hash(cli, Some(&text))?,
            });
            let json = serde_json::to_string_pretty(&report)?;
            writeln!(stdout, "{json}")?;
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("report.json"), format!("{json}\n"))?;
                field_table(&sol).save(&dir.join("field.csv"), &config_hash(cli, Some(&text))?)?;
            }
            Ok(())
        }
        Command::Levels { file, levels, grid, out } => {
            let text = read(file)?;
            let ts = parse_levels(levels)?;
            let sol = solve_file(&text, grid)?;
            let p = profile(&sol, &ts)?;
            let mut t = Table::new(&[
                "t", "a", "b", "perimeter", "f", "components", "largest_share", "max_defect", "flux_residual", "eps_a",
                "eps_b", "eps_f", "eps_defect", "eps_flux",
            ]);
            for q in &p.points {
                t.push(&[
                    q.t,
                    q.a,
                    q.b,
                    q.perimeter,
                    q.f,
                    q.components as f64,
                    q.largest_share,
                    q.max_defect(),
                    q.flux_residual,
                    q.eps_a,
                    q.eps_b,
                    q.eps_f,
                    q.eps_defect,
                    q.eps_flux,
                ]);
            }
            emit(&t, &config_hash(cli, Some(&text))?, out.as_deref(), stdout)
        }
        Command::Converge { file, cells, out } => {
            let text = read(file)?;
            let cfg: PathFile = serde_json::from_str(&text)?;
            let (path, mut config) = cfg.build()?;
            if let Some(n) = cells {
                config.cells = *n;
            }
            let report = run(&path, &config)?;
            let hash = config_hash(cli, Some(&text))?;
            let table = converge_table(&report);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    table.save(&dir.join("converge.csv"), &hash)?;
                    let summary = serde_json::json!({ "config": config, "report": report, "config_hash": hash });
                    std::fs::write(dir.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
                }
                None => table.write_to(stdout, &hash)?,
            }
            match &report.error {
                Some(e) => Err(Error::Domain(format!("the path stopped early: {e}"))),
                None => Ok(()),
            }
        }
    }
}

fn solve_file(text: &str, grid: &GridArgs) -> Result<ConformalSolution> {
    let d = Divisor::from_json(text)?;
    let problem = ConformalProblem::new(d, grid.chart()?)?;
    solve_with(&problem, &grid.solver(), None)
}

fn field_table(sol: &ConformalSolution) -> Table {
    let chart = sol.chart();
    let n = chart.nodes_per_side();
    let v = sol.v_nodes();
    let mut t = Table::new(&["x", "y", "v", "u", "e2u"]);
    for j in 0..n {
        for i in 0..n {
            let z = chart.node(i, j);
            let u = sol.u(z);
            t.push(&[z.re, z.im, v[chart.index(i, j)], u, (2.0 * u).exp()]);
        }
    }
    t
}

fn converge_table(report: &ConvergenceReport) -> Table {
    let k = report.steps.first().map_or(0, |s| s.positions.len());
    let mut header: Vec<String> = [
        "step", "s", "slack", "mu", "lambda", "kappa_x", "kappa_y", "a_deviation", "max_defect", "defect_slack",
        "cluster_diameter",
        "largest_share", "field_difference", "gh_lower_bound", "gauss_bonnet", "iterations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..k {
        header.push(format!("z{i}_x"));
        header.push(format!("z{i}_y"));
    }
    let mut t = Table::new(&header);
    for s in &report.steps {
        let mut row = vec![
            s.step.to_string(),
            num(s.s),
            num(s.slack),
            num(s.mu),
            num(s.lambda),
            num(s.kappa.re),
            num(s.kappa.im),
            num(s.a_deviation),
            num(s.max_defect),
            num(s.defect_slack),
            num(s.cluster_diameter),
            num(s.largest_share),
            num(s.field_difference),
            s.gh_lower_bound.map_or_else(|| "nan".to_string(), num),
            num(s.gauss_bonnet),
            s.iterations.to_string(),
        ];
        for z in &s.positions {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        t.push_text(row);
    }
    t
}

/// JSON description of a path run.
///
/// `points` lists positions as `{"x": .., "y": ..}` or `{"infinity": true}`;
/// `start` and `end` give the orders in the same order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub points: Vec<PathPoint>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub steps: usize,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub window_levels: Option<usize>,
    #[serde(default)]
    pub t_star: Option<f64>,
    #[serde(default)]
    pub gh_samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PathPoint {
    Infinity { infinity: bool },
    Finite { x: f64, y: f64 },
}

impl PathFile {
    pub fn build(&self) -> Result<(crate::convergence::DivisorPath, ConvergenceConfig)> {
        let positions = self
            .points
            .iter()
            .map(|p| match *p {
                PathPoint::Infinity { infinity: true } => Ok(Position::Infinity),
                PathPoint::Infinity { infinity: false } => {
                    Err(Error::InvalidInput("a point must be finite or {\"infinity\": true}".into()))
                }
                PathPoint::Finite { x, y } => Ok(Position::Finite(Point::new(x, y))),
            })
            .collect::<Result<Vec<_>>>()?;
        let path = make_path(&self.start, &self.end, &positions, self.steps)?;
        let d = ConvergenceConfig::default();
        let config = ConvergenceConfig {
            half_width: self.half_width.unwrap_or(d.half_width),
            cells: self.cells.unwrap_or(d.cells),
            solver: SolverConfig {
                tol: self.tol.unwrap_or(d.solver.tol),
                max_iter: self.max_iter.unwrap_or(d.solver.max_iter),
                ..d.solver
            },
            window: self.window.or(d.window),
            window_levels: self.window_levels.unwrap_or(d.window_levels),
            t_star: self.t_star.or(d.t_star),
            gh_samples: self.gh_samples.unwrap_or(d.gh_samples),
            seed: self.seed.unwrap_or(d.seed),
        };
        Ok((path, config))
    }
}

/// Levels from `start:step:stop` (stop included) or a comma list.
pub fn parse_levels(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::InvalidInput(format!("bad level list {spec:?}: {why}"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let out = match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (parse(a)?, parse(step)?, parse(b)?);
            if !(step > 0.0) || !(b >= a) {
                return Err(bad("need start <= stop and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 10_000_000 {
                return Err(bad("too many levels"));
            }
            (0..=n).map(|k| a + k as f64 * step).collect()
        }
        [list] => list.split(',').map(parse).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad("use start:step:stop or a comma list")),
    };
    if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
        return Err(bad("levels must be finite"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_lists() {
        let r = parse_levels("-3:0.1:1").unwrap();
        assert_eq!(r.len(), 41);
        assert_eq!(r[0], -3.0);
        assert!((r[40] - 1.0).abs() < 1e-12);
        assert_eq!(parse_levels("0.5, -1").unwrap(), vec![0.5, -1.0]);
        assert!(parse_levels("1:0:2").is_err());
        assert!(parse_levels("a").is_err());
        assert!(parse_levels("1:2").is_err());
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        assert_eq!(dispatch(["conic", "triangle", "--angles", "2.0944", "2.0944", "2.0944"], &mut out), 0);
        let text = String::from_utf8(out).unwrap();
        let side: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!((side - 1.910633).abs() < 1e-5, "{text}");
        assert_eq!(dispatch(["conic", "triangle", "--angles", "1", "1", "1"], &mut Vec::new()), 1);
        assert_eq!(dispatch(["conic", "triangle", "--angles", "2", "2", "2", "--bogus"], &mut Vec::new()), 2);
        assert_eq!(dispatch(["conic", "classify", "/nonexistent/d.json"], &mut Vec::new()), 2);
        assert_eq!(dispatch(["conic", "frobnicate"], &mut Vec::new()), 2);
        assert_eq!(dispatch(["conic", "--help"], &mut Vec::new()), 0);
    }
}
