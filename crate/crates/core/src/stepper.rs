//! Time integration of the semi-discrete system.
//!
//! The primary integrator is implicit Euler applied to the conservative form
//! `h(u) - dt G(u) = h(v_k)`, solved by Newton with a tridiagonal Jacobian.
//! Because `sum_i G_i = 0` exactly, every converged step preserves
//! `dx sum_i h(v_i)` up to the Newton tolerance. An embedded Dormand–Prince
//! 5(4) pair on `dv/dt = G(v) / h'(v)` serves as an independent cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellField, Grid};
use crate::problem::ProblemSpec;
use crate::scheme::{initial_state, Discretization};
use crate::tridiag::TridiagonalMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ImplicitEuler,
    ExplicitAdaptive,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit_euler" => Ok(Method::ImplicitEuler),
            "explicit_adaptive" => Ok(Method::ExplicitAdaptive),
            _ => Err(Error::InvalidArgument(format!("unknown time method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub method: Method,
    /// Fixed step (implicit) or first trial step (explicit).
    pub dt: f64,
    pub atol: f64,
    pub rtol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

pub const MAX_DT_HALVINGS: usize = 20;
const MAX_LINE_SEARCH_HALVINGS: usize = 8;
const MIN_EXPLICIT_DT: f64 = 1e-14;

impl StepControl {
    pub fn implicit(dt: f64) -> Self {
        Self {
            method: Method::ImplicitEuler,
            dt,
            atol: 1e-10,
            rtol: 1e-8,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }

    pub fn explicit(rtol: f64, atol: f64, dt0: f64) -> Self {
        Self {
            method: Method::ExplicitAdaptive,
            dt: dt0,
            atol,
            rtol,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }

    /// Implicit Euler with the default step `dx / 4`.
    pub fn implicit_default(grid: &Grid) -> Self {
        Self::implicit(grid.dx() / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
            }
        };
        positive("dt", self.dt)?;
        positive("atol", self.atol)?;
        positive("rtol", self.rtol)?;
        positive("newton_tol", self.newton_tol)?;
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    pub newton_max_iterations: usize,
    pub dt_halvings: usize,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
}

impl Diagnostics {
    fn record_dt(&mut self, dt: f64) {
        self.accepted_steps += 1;
        self.dt_min = Some(self.dt_min.map_or(dt, |m| m.min(dt)));
        self.dt_max = Some(self.dt_max.map_or(dt, |m| m.max(dt)));
    }
}

/// States of the semi-discrete solution at the checkpoint times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub spec: ProblemSpec,
    pub control: StepControl,
    pub times: Vec<f64>,
    pub states: Vec<CellField>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn initial(&self) -> &CellField {
        &self.states[0]
    }

    pub fn last(&self) -> &CellField {
        self.states.last().expect("trajectory has at least two states")
    }
}

/// `K + 1` equally spaced times from 0 to `horizon`, the last exactly equal
/// to `horizon`.
pub fn uniform_checkpoints(horizon: f64, k: usize) -> Vec<f64> {
    (0..=k)
        .map(|j| if j == k { horizon } else { horizon * j as f64 / k as f64 })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ImplicitStep {
    pub state: CellField,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ExplicitStep {
    pub state: CellField,
    pub dt_used: f64,
    pub dt_next: f64,
    pub rejected: usize,
    /// Weighted max-norm error estimate of the accepted step.
    pub error: f64,
}

/// Newton did not reach the tolerance.
#[derive(Debug, Clone, Copy)]
struct Stall {
    residual: f64,
}

struct ImplicitSolver<'a> {
    disc: Discretization<'a>,
    control: StepControl,
    p: Vec<f64>,
    h_old: Vec<f64>,
    g: Vec<f64>,
    res: Vec<f64>,
    trial: Vec<f64>,
    trial_res: Vec<f64>,
    jac: TridiagonalMatrix,
}

impl<'a> ImplicitSolver<'a> {
    fn new(spec: &'a ProblemSpec, grid: Grid, control: StepControl) -> Self {
        let n = grid.n();
        Self {
            disc: Discretization::new(spec, grid),
            control,
            p: vec![0.0; n],
            h_old: vec![0.0; n],
            g: vec![0.0; n],
            res: vec![0.0; n],
            trial: vec![0.0; n],
            trial_res: vec![0.0; n],
            jac: TridiagonalMatrix::zeros(n),
        }
    }

    /// `h(u) - dt G(u) - h(v_k)` into `out`; returns its max norm.
    fn residual(&mut self, u: &[f64], dt: f64, into_trial: bool) -> f64 {
        self.disc.divergence_into(u, &self.p, &mut self.g);
        let h = &self.disc.spec().h;
        let out = if into_trial {
            &mut self.trial_res
        } else {
            &mut self.res
        };
        let mut norm = 0.0f64;
        for k in 0..u.len() {
            let r = h.value(u[k]) - dt * self.g[k] - self.h_old[k];
            out[k] = r;
            norm = if r.is_nan() { f64::NAN } else { norm.max(r.abs()) };
        }
        norm
    }

    /// One implicit Euler step from `(t, v)` to `t + dt`.
    fn step(&mut self, v: &[f64], t: f64, dt: f64) -> Result<std::result::Result<(Vec<f64>, usize), Stall>> {
        self.disc.pressure_into(t + dt, &mut self.p)?;
        let spec = self.disc.spec();
        for (ho, &x) in self.h_old.iter_mut().zip(v) {
            *ho = spec.h.value(x);
        }
        let mut u = v.to_vec();
        let mut norm = self.residual(&u, dt, false);
        for iter in 1..=self.control.newton_max_iter {
            if norm <= self.control.newton_tol {
                return Ok(Ok((u, iter)));
            }
            if !norm.is_finite() {
                return Ok(Err(Stall { residual: norm }));
            }
            self.disc.jacobian_into(&u, &self.p, &mut self.jac);
            for k in 0..u.len() {
                self.jac.diag[k] = spec.h.d1(u[k]) - dt * self.jac.diag[k];
                self.jac.lower[k] *= -dt;
                self.jac.upper[k] *= -dt;
            }
            let rhs: Vec<f64> = self.res.iter().map(|r| -r).collect();
            let delta = match self.jac.solve(&rhs) {
                Ok(d) => d,
                Err(_) => return Ok(Err(Stall { residual: norm })),
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_LINE_SEARCH_HALVINGS {
                let mut trial = std::mem::take(&mut self.trial);
                for k in 0..u.len() {
                    trial[k] = u[k] + lambda * delta[k];
                }
                let trial_norm = self.residual(&trial, dt, true);
                self.trial = trial;
                if trial_norm < norm {
                    std::mem::swap(&mut u, &mut self.trial);
                    std::mem::swap(&mut self.res, &mut self.trial_res);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Ok(Err(Stall { residual: norm }));
            }
        }
        if norm <= self.control.newton_tol {
            return Ok(Ok((u, self.control.newton_max_iter)));
        }
        Ok(Err(Stall { residual: norm }))
    }

    /// Advances by `dt`, splitting the step in halves whenever Newton stalls.
    fn advance(&mut self, v: &[f64], t: f64, dt: f64, depth: usize, diag: &mut Diagnostics) -> Result<Vec<f64>> {
        match self.step(v, t, dt)? {
            Ok((u, iters)) => {
                diag.newton_iterations += iters;
                diag.newton_max_iterations = diag.newton_max_iterations.max(iters);
                diag.record_dt(dt);
                Ok(u)
            }
            Err(stall) => {
                diag.rejected_steps += 1;
                if depth >= MAX_DT_HALVINGS {
                    return Err(Error::NewtonFailure {
                        t,
                        dt,
                        halvings: depth,
                        residual: stall.residual,
                    });
                }
                diag.dt_halvings += 1;
                let half = 0.5 * dt;
                let mid = self.advance(v, t, half, depth + 1, diag)?;
                self.advance(&mid, t + half, dt - half, depth + 1, diag)
            }
        }
    }
}

/// One conservative implicit Euler step. Newton failure is reported as
/// [`Error::NewtonFailure`] with zero halvings; the caller may retry with a
/// smaller `dt`.
pub fn step_implicit_conservative(
    v_k: &CellField,
    t: f64,
    dt: f64,
    spec: &ProblemSpec,
    control: &StepControl,
) -> Result<ImplicitStep> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut solver = ImplicitSolver::new(spec, *v_k.grid(), *control);
    match solver.step(v_k.values(), t, dt)? {
        Ok((u, iterations)) => Ok(ImplicitStep {
            state: CellField::new(*v_k.grid(), u)?,
            iterations,
        }),
        Err(stall) => Err(Error::NewtonFailure {
            t,
            dt,
            halvings: 0,
            residual: stall.residual,
        }),
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

struct ExplicitSolver<'a> {
    disc: Discretization<'a>,
    control: StepControl,
    k: [Vec<f64>; 7],
    p: Vec<f64>,
    stage: Vec<f64>,
    /// `k[0]` already holds the rate at the current state (first-same-as-last).
    fsal: bool,
}

impl<'a> ExplicitSolver<'a> {
    fn new(spec: &'a ProblemSpec, grid: Grid, control: StepControl) -> Self {
        let n = grid.n();
        Self {
            disc: Discretization::new(spec, grid),
            control,
            k: std::array::from_fn(|_| vec![0.0; n]),
            p: vec![0.0; n],
            stage: vec![0.0; n],
            fsal: false,
        }
    }

    fn rate(&mut self, t: f64, y_is_stage: bool, y: &[f64], slot: usize) -> Result<()> {
        self.disc.pressure_into(t, &mut self.p)?;
        let src: &[f64] = if y_is_stage { &self.stage } else { y };
        let mut out = std::mem::take(&mut self.k[slot]);
        let r = self.disc.rate_into(src, &self.p, &mut out);
        self.k[slot] = out;
        r
    }

    /// Attempts steps from `(t, y)` starting at `dt_try` until one is
    /// accepted.
    fn step(&mut self, y: &[f64], t: f64, dt_try: f64) -> Result<(Vec<f64>, f64, f64, usize, f64)> {
        let n = y.len();
        if !self.fsal {
            self.rate(t, false, y, 0)?;
        }
        let mut dt = dt_try;
        let mut rejected = 0;
        loop {
            if !(dt >= MIN_EXPLICIT_DT) {
                return Err(Error::StepUnderflow { t, dt });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * self.k[j][i];
                    }
                    self.stage[i] = y[i] + dt * acc;
                }
                self.rate(t + C[s] * dt, true, y, s)?;
            }
            // stage 6 evaluated the rate at the fifth-order solution
            let y_new = self.stage.clone();
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = 0.0;
                for (j, w) in E.iter().enumerate() {
                    e += w * self.k[j][i];
                }
                let scale = self.control.atol + self.control.rtol * y[i].abs().max(y_new[i].abs());
                let ratio = (dt * e).abs() / scale;
                err = if ratio.is_nan() { f64::NAN } else { err.max(ratio) };
            }
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                self.k.swap(0, 6);
                self.fsal = true;
                return Ok((y_new, dt, dt * fac, rejected, err));
            }
            rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            dt *= fac;
        }
    }
}

/// One accepted step of the adaptive Dormand–Prince 5(4) pair.
pub fn step_explicit_adaptive(
    v_k: &CellField,
    t: f64,
    dt_try: f64,
    spec: &ProblemSpec,
    control: &StepControl,
) -> Result<ExplicitStep> {
    let mut solver = ExplicitSolver::new(spec, *v_k.grid(), *control);
    let (y, dt_used, dt_next, rejected, error) = solver.step(v_k.values(), t, dt_try)?;
    Ok(ExplicitStep {
        state: CellField::new(*v_k.grid(), y)?,
        dt_used,
        dt_next,
        rejected,
        error,
    })
}

fn validate_checkpoints(spec: &ProblemSpec, checkpoints: &[f64]) -> Result<Vec<f64>> {
    if checkpoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least two checkpoints".into()));
    }
    let tol = 1e-12 * spec.horizon;
    if checkpoints[0].abs() > tol {
        return Err(Error::InvalidArgument("checkpoints must start at 0".into()));
    }
    let last = *checkpoints.last().unwrap();
    if (last - spec.horizon).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "checkpoints must end at T = {}, got {last}",
            spec.horizon
        )));
    }
    if checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("checkpoints must be strictly increasing".into()));
    }
    let mut times = checkpoints.to_vec();
    times[0] = 0.0;
    *times.last_mut().unwrap() = spec.horizon;
    Ok(times)
}

/// Integrates from the projected initial datum, hitting every checkpoint
/// exactly.
pub fn integrate(spec: &ProblemSpec, grid: &Grid, control: &StepControl, checkpoints: &[f64]) -> Result<Trajectory> {
    control.validate()?;
    let times = validate_checkpoints(spec, checkpoints)?;
    let v0 = initial_state(spec, grid)?;
    let mut diagnostics = Diagnostics::default();
    let mut states = Vec::with_capacity(times.len());
    states.push(v0.clone());
    let mut y = v0.into_values();

    match control.method {
        Method::ImplicitEuler => {
            let mut solver = ImplicitSolver::new(spec, *grid, *control);
            for w in times.windows(2) {
                let (ta, tb) = (w[0], w[1]);
                let span = tb - ta;
                let m = ((span / control.dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / m as f64;
                let mut t = ta;
                for j in 0..m {
                    let t_next = if j + 1 == m { tb } else { ta + (j + 1) as f64 * h };
                    y = solver.advance(&y, t, t_next - t, 0, &mut diagnostics)?;
                    t = t_next;
                }
                states.push(CellField::new(*grid, y.clone())?);
            }
        }
        Method::ExplicitAdaptive => {
            let mut solver = ExplicitSolver::new(spec, *grid, *control);
            let mut dt_try = control.dt;
            for w in times.windows(2) {
                let tb = w[1];
                let mut t = w[0];
                while t < tb {
                    let remaining = tb - t;
                    let landing = dt_try >= remaining * (1.0 - 1e-12);
                    let h = if landing { remaining } else { dt_try };
                    let (y_new, used, next, rejected, _) = solver.step(&y, t, h)?;
                    diagnostics.rejected_steps += rejected;
                    diagnostics.record_dt(used);
                    y = y_new;
                    t = if landing && used == h { tb } else { t + used };
                    dt_try = next;
                }
                states.push(CellField::new(*grid, y.clone())?);
            }
        }
    }

    Ok(Trajectory {
        grid: *grid,
        spec: spec.clone(),
        control: *control,
        times,
        states,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BFamily, CoefficientB, CoefficientH, HFamily, InitialData, PFamily, PressureField};
    use crate::scheme::{divergence, mass};

    fn linear_spec(p: PFamily, v0: InitialData) -> ProblemSpec {
        ProblemSpec::new(
            CoefficientH::new(HFamily::Linear { a: 1.0 }).unwrap(),
            CoefficientB::new(BFamily::Const { c0: 1.0 }).unwrap(),
            PressureField::new(p).unwrap(),
            v0,
            1.0,
        )
        .unwrap()
    }

    fn steady_spec(c: f64) -> ProblemSpec {
        let mut spec = ProblemSpec::default_problem();
        spec.p = PressureField::new(PFamily::Zero).unwrap();
        spec.v0 = InitialData::Const { c };
        spec
    }

    #[test]
    fn constant_state_is_an_exact_root() {
        let spec = steady_spec(0.8);
        let g = Grid::new(6).unwrap();
        let v = CellField::constant(g, 0.8);
        let s = step_implicit_conservative(&v, 0.0, 0.01, &spec, &StepControl::implicit(0.01)).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.state, v);
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn linear_step_matches_dense_solve() {
        // h(v) = v, b = 1, p = 1: (I - dt L) u = v + dt f with the flux
        // contribution f = [p/dx, 0, -p/dx]
        let spec = linear_spec(PFamily::Const { alpha: 1.0 }, InitialData::Const { c: 0.0 });
        let g = Grid::new(3).unwrap();
        let dx = g.dx();
        let dt = 0.05;
        let v = vec![0.3, -0.1, 0.6];
        let l = 1.0 / (dx * dx);
        let a = vec![
            vec![1.0 + dt * l, -dt * l, 0.0],
            vec![-dt * l, 1.0 + 2.0 * dt * l, -dt * l],
            vec![0.0, -dt * l, 1.0 + dt * l],
        ];
        let rhs = vec![v[0] + dt / dx, v[1], v[2] - dt / dx];
        let want = dense_solve(a, rhs);
        let got = step_implicit_conservative(
            &CellField::new(g, v).unwrap(),
            0.0,
            dt,
            &spec,
            &StepControl::implicit(dt),
        )
        .unwrap();
        for (x, y) in got.state.values().iter().zip(&want) {
            assert!((x - y).abs() < 1e-13, "{x} vs {y}");
        }
    }

    #[test]
    fn implicit_step_conserves_mass() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(40).unwrap();
        let v = initial_state(&spec, &g).unwrap();
        for dt in [1e-4, 1e-2, 0.1] {
            let s = step_implicit_conservative(&v, 0.0, dt, &spec, &StepControl::implicit(dt)).unwrap();
            let m0 = mass(&v, &spec);
            let m1 = mass(&s.state, &spec);
            assert!((m1 - m0).abs() <= 1e-10 * (1.0 + m0.abs()));
            // the converged state satisfies the step equation
            let gv = divergence(dt, &s.state, &spec).unwrap();
            for k in 0..40 {
                let r = spec.h.value(s.state.values()[k]) - dt * gv.values()[k] - spec.h.value(v.values()[k]);
                assert!(r.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn newton_failure_is_reported() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(16).unwrap();
        let v = initial_state(&spec, &g).unwrap();
        let mut control = StepControl::implicit(0.01);
        control.newton_max_iter = 1;
        let e = step_implicit_conservative(&v, 0.0, 0.01, &spec, &control).unwrap_err();
        assert!(matches!(e, Error::NewtonFailure { halvings: 0, .. }), "{e}");
    }

    #[test]
    fn stalled_newton_exhausts_halvings() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(16).unwrap();
        let mut control = StepControl::implicit(0.01);
        control.newton_max_iter = 2;
        control.newton_tol = 1e-300;
        let e = integrate(&spec, &g, &control, &[0.0, 0.25]).unwrap_err();
        assert!(matches!(e, Error::NewtonFailure { halvings: MAX_DT_HALVINGS, .. }), "{e}");
    }

    #[test]
    fn explicit_step_on_constant_state() {
        let spec = steady_spec(-0.4);
        let g = Grid::new(8).unwrap();
        let v = CellField::constant(g, -0.4);
        let s = step_explicit_adaptive(&v, 0.0, 1e-3, &spec, &StepControl::explicit(1e-8, 1e-10, 1e-3)).unwrap();
        assert_eq!(s.error, 0.0);
        assert_eq!(s.rejected, 0);
        assert_eq!(s.state, v);
        assert_eq!(s.dt_used, 1e-3);
    }

    #[test]
    fn explicit_control_shrinks_oversized_steps() {
        let spec = linear_spec(
            PFamily::Zero,
            InitialData::Cosine {
                coeffs: vec![0.0, 1.0, 0.0, 0.5],
            },
        );
        let g = Grid::new(32).unwrap();
        let dx = g.dx();
        let stable = dx * dx * spec.h.c1 / 2.0;
        let control = StepControl::explicit(1e-6, 1e-8, 100.0 * stable);
        let mut v = initial_state(&spec, &g).unwrap();
        let mut t = 0.0;
        let mut dt = control.dt;
        let mut used = Vec::new();
        for _ in 0..200 {
            let s = step_explicit_adaptive(&v, t, dt, &spec, &control).unwrap();
            used.push(s.dt_used);
            t += s.dt_used;
            dt = s.dt_next;
            v = s.state;
        }
        let peak = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(peak <= 1.5, "solution blew up: {peak}");
        assert!(used[0] < 100.0 * stable);
        let tail_max = used[100..].iter().cloned().fold(0.0, f64::max);
        // Dormand–Prince is stable up to roughly 3.3 / |lambda_max|
        assert!(tail_max <= 4.0 * stable, "{tail_max} vs {stable}");
    }

    #[test]
    fn explicit_underflow_is_a_hard_failure() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(16).unwrap();
        let v = initial_state(&spec, &g).unwrap();
        let control = StepControl::explicit(1e-8, 1e-10, 1e-3);
        let e = step_explicit_adaptive(&v, 0.0, 1e-15, &spec, &control).unwrap_err();
        assert!(matches!(e, Error::StepUnderflow { .. }));
    }

    #[test]
    fn steady_run_is_bitwise_constant() {
        let spec = steady_spec(1.25);
        let g = Grid::new(10).unwrap();
        let v0 = initial_state(&spec, &g).unwrap();
        for control in [StepControl::implicit(0.01), StepControl::explicit(1e-8, 1e-10, 1e-3)] {
            let traj = integrate(&spec, &g, &control, &uniform_checkpoints(spec.horizon, 5)).unwrap();
            assert!(traj.states.iter().all(|s| *s == v0));
            let one = integrate(&spec, &g, &control, &[0.0, spec.horizon]).unwrap();
            assert_eq!(one.states.len(), 2);
            assert_eq!(one.states[0], one.states[1]);
        }
    }

    #[test]
    fn checkpoints_are_hit_exactly_and_validated() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(12).unwrap();
        let cps = [0.0, 0.013, 0.1, 0.25];
        let traj = integrate(&spec, &g, &StepControl::implicit(0.02), &cps).unwrap();
        assert_eq!(traj.times, cps.to_vec());
        assert_eq!(traj.states.len(), 4);
        assert!(traj.diagnostics.dt_max.unwrap() <= 0.02);
        let ex = integrate(&spec, &g, &StepControl::explicit(1e-8, 1e-10, 1e-4), &cps).unwrap();
        assert_eq!(ex.times, cps.to_vec());
        for bad in [&[0.1, 0.25][..], &[0.0, 0.2], &[0.0, 0.2, 0.1, 0.25], &[0.0]] {
            assert!(integrate(&spec, &g, &StepControl::implicit(0.01), bad).is_err());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(20).unwrap();
        let cps = uniform_checkpoints(spec.horizon, 10);
        for control in [StepControl::implicit_default(&g), StepControl::explicit(1e-8, 1e-10, 1e-4)] {
            let a = integrate(&spec, &g, &control, &cps).unwrap();
            let b = integrate(&spec, &g, &control, &cps).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                let xb: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
                let yb: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
                assert_eq!(xb, yb);
            }
        }
    }

    #[test]
    fn explicit_matches_implicit_on_linear_problem() {
        let spec = linear_spec(
            PFamily::Const { alpha: 0.7 },
            InitialData::Cosine {
                coeffs: vec![0.2, 1.0],
            },
        );
        let g = Grid::new(16).unwrap();
        let cps = uniform_checkpoints(0.2, 4);
        let mut spec = spec;
        spec.horizon = 0.2;
        let ex = integrate(&spec, &g, &StepControl::explicit(1e-10, 1e-12, 1e-4), &cps).unwrap();
        let im_coarse = integrate(&spec, &g, &StepControl::implicit(1e-3), &cps).unwrap();
        let im_fine = integrate(&spec, &g, &StepControl::implicit(2.5e-4), &cps).unwrap();
        let gap = |a: &Trajectory| {
            a.states
                .iter()
                .zip(&ex.states)
                .map(|(x, y)| {
                    x.values()
                        .iter()
                        .zip(y.values())
                        .map(|(p, q)| (p - q).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (gap(&im_coarse), gap(&im_fine));
        // first-order implicit error dominates the combined tolerance
        assert!(e1 < 1e-2 && e2 < e1 / 3.0, "{e1} {e2}");
    }
}
