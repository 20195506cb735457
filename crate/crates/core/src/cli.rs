//! Experiment commands behind the `fvporous` binary.
//!
//! Every command validates its configuration before computing anything,
//! writes plot-ready CSV plus a `summary.json` into the output directory and
//! reports whether its own acceptance predicate held.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    error_pair, fit_order, inequality_sweep, monitors, relative_spread, ErrorRow, InequalityKind, MonitorReport,
    OrderFit,
};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::problem::ProblemSpec;
use crate::scheme::mass;
use crate::stepper::{integrate, uniform_checkpoints, Method, StepControl, Trajectory};

/// Minimum observed order required by `converge`.
pub const ORDER_THRESHOLD: f64 = 0.5;
/// Maximum relative spread between the two finest grids allowed by `monitors`.
pub const SPREAD_THRESHOLD: f64 = 0.10;
/// Maximum ratio of a monitor's sweep maximum to its finest-grid value.
pub const DOMINANCE_THRESHOLD: f64 = 2.0;

pub const DEFAULT_CHECKPOINTS: usize = 200;

/// Time step as a fixed value or as a multiple of `dx` or `dx^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DtRule {
    Fixed(f64),
    DxOver(f64),
    Dx2Over(f64),
}

impl DtRule {
    pub fn resolve(&self, grid: &Grid) -> f64 {
        let dx = grid.dx();
        match *self {
            DtRule::Fixed(dt) => dt,
            DtRule::DxOver(d) => dx / d,
            DtRule::Dx2Over(d) => dx * dx / d,
        }
    }
}

impl std::str::FromStr for DtRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace(' ', "");
        let bad = || Error::InvalidArgument(format!("cannot parse time step `{s}`"));
        let divisor = |rest: &str| -> Result<f64> {
            let d: f64 = rest.parse().map_err(|_| bad())?;
            if d > 0.0 {
                Ok(d)
            } else {
                Err(bad())
            }
        };
        if let Some(rest) = s.strip_prefix("dx^2/") {
            Ok(DtRule::Dx2Over(divisor(rest)?))
        } else if let Some(rest) = s.strip_prefix("dx/") {
            Ok(DtRule::DxOver(divisor(rest)?))
        } else {
            s.parse().map(DtRule::Fixed).map_err(|_| bad())
        }
    }
}

/// Everything a command needs from the configuration file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub n: usize,
    pub method: Method,
    pub dt: Option<DtRule>,
    pub atol: f64,
    pub rtol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub checkpoints: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let problem = ProblemSpec::from_keys(&mut kv)?;
        let n_line = kv.line_of("disc.n").unwrap_or(0);
        let n = kv.take("disc.n")?.unwrap_or(32);
        Grid::new(n).map_err(|e| Error::Config {
            line: n_line,
            msg: e.to_string(),
        })?;
        let method = match kv.take_str("time.method") {
            None => Method::ImplicitEuler,
            Some((line, m)) => m.parse().map_err(|e: Error| Error::Config {
                line,
                msg: e.to_string(),
            })?,
        };
        let dt = match kv.take_str("time.dt") {
            None => None,
            Some((line, s)) => Some(s.parse::<DtRule>().map_err(|e| Error::Config {
                line,
                msg: e.to_string(),
            })?),
        };
        let atol = kv.take("time.atol")?.unwrap_or(1e-10);
        let rtol = kv.take("time.rtol")?.unwrap_or(1e-8);
        let newton_tol = kv.take("time.newton_tol")?.unwrap_or(1e-12);
        let newton_max_iter = kv.take("time.newton_max_iter")?.unwrap_or(50);
        let checkpoint_line = kv.line_of("time.checkpoints").unwrap_or(0);
        let checkpoints = kv.take("time.checkpoints")?.unwrap_or(DEFAULT_CHECKPOINTS);
        if checkpoints < 1 {
            return Err(Error::Config {
                line: checkpoint_line,
                msg: "time.checkpoints must be at least 1".into(),
            });
        }
        let seed = kv.take("seed")?.unwrap_or(0);
        let out = kv.take_str("out").map(|(_, p)| PathBuf::from(p));
        kv.finish()?;
        let cfg = Self {
            problem,
            n,
            method,
            dt,
            atol,
            rtol,
            newton_tol,
            newton_max_iter,
            checkpoints,
            seed,
            out,
        };
        cfg.control(&Grid::new(n)?).validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Step control for a given grid. Implicit runs default to `dx / 4`,
    /// explicit runs start from `dx^2 / 4`.
    pub fn control(&self, grid: &Grid) -> StepControl {
        let dt = match (self.dt, self.method) {
            (Some(rule), _) => rule.resolve(grid),
            (None, Method::ImplicitEuler) => grid.dx() / 4.0,
            (None, Method::ExplicitAdaptive) => grid.dx() * grid.dx() / 4.0,
        };
        StepControl {
            method: self.method,
            dt,
            atol: self.atol,
            rtol: self.rtol,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
        }
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        uniform_checkpoints(self.problem.horizon, self.checkpoints)
    }

    pub fn run(&self, n: usize) -> Result<Trajectory> {
        let grid = Grid::new(n)?;
        integrate(&self.problem, &grid, &self.control(&grid), &self.checkpoint_times())
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_outputs(out: &Path, files: &[(&str, &str)], summary: &impl Serialize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for (name, content) in files {
        let p = out.join(name);
        fs::write(&p, content)?;
        paths.push(p);
    }
    let p = out.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(summary)? + "\n")?;
    paths.push(p);
    Ok(paths)
}

/// Largest relative deviation of `dx sum h(v)` from its initial value,
/// normalised by `1 + |mass_0|`.
pub fn mass_drift(traj: &Trajectory) -> f64 {
    let m0 = mass(traj.initial(), &traj.spec);
    traj.states
        .iter()
        .map(|s| (mass(s, &traj.spec) - m0).abs() / (1.0 + m0.abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub n: usize,
    pub control: StepControl,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    pub newton_max_iterations: usize,
    pub dt_halvings: usize,
    pub mass_initial: f64,
    pub mass_drift: f64,
}

impl RunStats {
    fn of(traj: &Trajectory) -> Self {
        let d = &traj.diagnostics;
        Self {
            n: traj.grid.n(),
            control: traj.control,
            accepted_steps: d.accepted_steps,
            rejected_steps: d.rejected_steps,
            newton_iterations: d.newton_iterations,
            newton_max_iterations: d.newton_max_iterations,
            dt_halvings: d.dt_halvings,
            mass_initial: mass(traj.initial(), &traj.spec),
            mass_drift: mass_drift(traj),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub runs: Vec<RunStats>,
    pub outputs: Vec<PathBuf>,
    pub passed: bool,
    #[serde(flatten)]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunSummary {
    fn new(command: &'static str, config: &RunConfig) -> Self {
        Self {
            command,
            config: config.clone(),
            wall_time_s: 0.0,
            runs: Vec::new(),
            outputs: Vec::new(),
            passed: true,
            details: BTreeMap::new(),
        }
    }

    fn detail(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.details.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

pub fn solution_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,i,x_center,v\n");
    for (&t, state) in traj.times.iter().zip(&traj.states) {
        for (k, &v) in state.values().iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_num(t),
                k + 1,
                fmt_num(traj.grid.center(k)),
                fmt_num(v)
            );
        }
    }
    s
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let traj = cfg.run(cfg.n)?;
    let mut summary = RunSummary::new("solve", cfg);
    summary.runs.push(RunStats::of(&traj));
    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.outputs = vec![out.join("solution.csv"), out.join("summary.json")];
    write_outputs(out, &[("solution.csv", &solution_csv(&traj))], &summary)?;
    Ok(summary)
}

/// Checks that `ns` doubles strictly and every entry divides `ref_n`.
pub fn check_nested(ns: &[usize], ref_n: usize) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty list of grid sizes".into()));
    }
    for w in ns.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidArgument(format!(
                "grid sizes must double strictly, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    for &n in ns {
        Grid::new(n)?;
        if ref_n < n || !ref_n.is_multiple_of(n) {
            return Err(Error::NonNested { fine: ref_n, coarse: n });
        }
    }
    Ok(())
}

pub fn convergence_csv(rows: &[ErrorRow], fit: &OrderFit) -> String {
    let mut s = String::from("n,dx,E_sup_sq,E_flux,S,order_S\n");
    for (r, o) in rows.iter().zip(&fit.orders) {
        let order = o.map(fmt_num).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            fmt_num(r.dx),
            fmt_num(r.e_sup_sq),
            fmt_num(r.e_flux),
            fmt_num(r.s),
            order
        );
    }
    s
}

/// Order predicate: slope at least [`ORDER_THRESHOLD`], or no error at all.
pub fn order_passes(rows: &[ErrorRow], fit: &OrderFit) -> bool {
    match fit.slope {
        Some(slope) => slope >= ORDER_THRESHOLD,
        None => rows.iter().all(|r| r.s == 0.0),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceResult {
    pub rows: Vec<ErrorRow>,
    pub fit: OrderFit,
    pub runs: Vec<RunStats>,
}

/// Runs every grid of the study (concurrently) and tabulates the errors
/// against the reference grid.
pub fn convergence_study(cfg: &RunConfig, ns: &[usize], ref_n: usize) -> Result<ConvergenceResult> {
    check_nested(ns, ref_n)?;
    let mut all: Vec<usize> = ns.to_vec();
    if !all.contains(&ref_n) {
        all.push(ref_n);
    }
    let trajs: Vec<Trajectory> = all.par_iter().map(|&n| cfg.run(n)).collect::<Result<_>>()?;
    let reference = trajs.iter().find(|t| t.grid.n() == ref_n).expect("reference run");
    let rows = ns
        .iter()
        .map(|&n| {
            let t = trajs.iter().find(|t| t.grid.n() == n).expect("coarse run");
            error_pair(t, reference)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_order(&rows);
    Ok(ConvergenceResult {
        rows,
        fit,
        runs: trajs.iter().map(RunStats::of).collect(),
    })
}

pub fn cmd_converge(cfg: &RunConfig, ns: &[usize], ref_n: usize, out: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let result = convergence_study(cfg, ns, ref_n)?;
    let mut summary = RunSummary::new("converge", cfg);
    summary.passed = order_passes(&result.rows, &result.fit);
    summary.detail("slope", result.fit.slope)?;
    summary.detail("order_threshold", ORDER_THRESHOLD)?;
    summary.detail("ref_n", ref_n)?;
    summary.detail("rows", &result.rows)?;
    summary.runs = result.runs;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.outputs = vec![out.join("convergence.csv"), out.join("summary.json")];
    let csv = convergence_csv(&result.rows, &result.fit);
    write_outputs(out, &[("convergence.csv", &csv)], &summary)?;
    Ok(summary)
}

pub fn cmd_inequalities(cfg: &RunConfig, samples: usize, ns: &[usize], seed: u64, out: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    for &n in ns {
        Grid::new(n)?;
    }
    let mut csv = String::from("kind,n,sample_id,ratio\n");
    let mut summary = RunSummary::new("inequalities", cfg);
    let mut max_ratio = BTreeMap::new();
    for kind in [InequalityKind::GnDiscrete, InequalityKind::GnContinuous] {
        let results = inequality_sweep(kind, ns, samples, seed)?;
        let mut worst: Option<(f64, usize, usize)> = None;
        for r in &results {
            let _ = writeln!(csv, "{},{},{},{}", kind.name(), r.n, r.sample_id, fmt_num(r.ratio));
            if worst.is_none_or(|w| r.ratio > w.0) {
                worst = Some((r.ratio, r.n, r.sample_id));
            }
        }
        if let Some((ratio, _, _)) = worst {
            summary.passed &= ratio <= 1.0;
        }
        max_ratio.insert(
            kind.name(),
            worst.map(|(ratio, n, id)| serde_json::json!({ "ratio": ratio, "n": n, "sample_id": id })),
        );
    }
    summary.detail("max_ratio", max_ratio)?;
    summary.detail("samples", samples)?;
    summary.detail("ns", ns)?;
    summary.detail("seed", seed)?;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.outputs = vec![out.join("inequalities.csv"), out.join("summary.json")];
    write_outputs(out, &[("inequalities.csv", &csv)], &summary)?;
    Ok(summary)
}

pub fn monitors_csv(reports: &[MonitorReport]) -> String {
    let mut s = String::from("n,M1,M2,M3,M4,M5,M6\n");
    for r in reports {
        let cols: Vec<String> = r.as_array().iter().map(|&x| fmt_num(x)).collect();
        let _ = writeln!(s, "{},{}", r.n, cols.join(","));
    }
    s
}

/// Per-monitor stabilisation across a sweep ordered by increasing `n`.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorStability {
    /// Relative spread between the two finest grids.
    pub spread: [f64; 6],
    /// Sweep maximum divided by the finest-grid value.
    pub dominance: [f64; 6],
}

impl MonitorStability {
    pub fn of(reports: &[MonitorReport]) -> Option<Self> {
        if reports.len() < 2 {
            return None;
        }
        let last = reports[reports.len() - 1].as_array();
        let prev = reports[reports.len() - 2].as_array();
        let spread = std::array::from_fn(|j| relative_spread(prev[j], last[j]));
        let dominance = std::array::from_fn(|j| {
            let max = reports.iter().map(|r| r.as_array()[j]).fold(0.0, f64::max);
            if max == 0.0 {
                0.0
            } else {
                max / last[j]
            }
        });
        Some(Self { spread, dominance })
    }

    pub fn passes(&self) -> bool {
        self.spread.iter().all(|&s| s <= SPREAD_THRESHOLD) && self.dominance.iter().all(|&d| d <= DOMINANCE_THRESHOLD)
    }
}

pub fn monitor_sweep(cfg: &RunConfig, ns: &[usize]) -> Result<(Vec<MonitorReport>, Vec<RunStats>)> {
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &n in &sorted {
        Grid::new(n)?;
    }
    let results: Vec<(MonitorReport, RunStats)> = sorted
        .par_iter()
        .map(|&n| {
            let traj = cfg.run(n)?;
            Ok((monitors(&traj)?, RunStats::of(&traj)))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().unzip())
}

pub fn cmd_monitors(cfg: &RunConfig, ns: &[usize], out: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let (reports, runs) = monitor_sweep(cfg, ns)?;
    let mut summary = RunSummary::new("monitors", cfg);
    if let Some(stab) = MonitorStability::of(&reports) {
        summary.passed = stab.passes();
        summary.detail("spread", stab.spread)?;
        summary.detail("dominance", stab.dominance)?;
    }
    summary.detail("spread_threshold", SPREAD_THRESHOLD)?;
    summary.detail("monitors", &reports)?;
    summary.runs = runs;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.outputs = vec![out.join("monitors.csv"), out.join("summary.json")];
    write_outputs(out, &[("monitors.csv", &monitors_csv(&reports))], &summary)?;
    Ok(summary)
}
