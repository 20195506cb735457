//! Norms, nested-grid error measurement, observed-order fitting, bound
//! monitors, the two Gagliardo–Nirenberg type inequality checkers and the
//! weak-form residual.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{hat, midpoint, restrict, tilde, CellField, Grid};
use crate::problem::p_cell_averages;
use crate::quadrature::{composite, GAUSS2, GAUSS3, GAUSS5};
use crate::stepper::Trajectory;

/// Constant of the discrete Gagliardo–Nirenberg type inequality.
pub const GN_DISCRETE_CONSTANT: f64 = 1152.0;

/// `L2(0, 1)` norm of the piecewise-constant function.
pub fn norm_h(f: &CellField) -> f64 {
    let dx = f.grid().dx();
    (dx * f.values().iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `L2(dx, 1)` norm: the first cell is left out.
pub fn norm_hdelta(f: &CellField) -> f64 {
    let dx = f.grid().dx();
    (dx * f.values()[1..].iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub dx: f64,
    /// `sup_k |v_ref - v|_H^2` over checkpoints.
    pub e_sup_sq: f64,
    /// Time integral of `|dv/dx - tilde v|^2` over `(dx, 1)`.
    pub e_flux: f64,
    pub s: f64,
}

impl ErrorRow {
    pub fn new(n: usize, e_sup_sq: f64, e_flux: f64) -> Self {
        Self {
            n,
            dx: 1.0 / n as f64,
            e_sup_sq,
            e_flux,
            s: e_sup_sq + e_flux,
        }
    }
}

/// Error of `coarse` against a reference computed on a nested finer grid.
/// The reference's `tilde v`, averaged onto the coarse grid, stands in for
/// the exact derivative.
pub fn error_pair(coarse: &Trajectory, reference: &Trajectory) -> Result<ErrorRow> {
    let grid = coarse.grid;
    if !reference.grid.n().is_multiple_of(grid.n()) {
        return Err(Error::NonNested {
            fine: reference.grid.n(),
            coarse: grid.n(),
        });
    }
    let tol = 1e-12 * coarse.spec.horizon.max(1.0);
    if coarse.times.len() != reference.times.len()
        || coarse.times.iter().zip(&reference.times).any(|(a, b)| (a - b).abs() > tol)
    {
        return Err(Error::InvalidArgument("checkpoint times differ".into()));
    }
    let mut sup = 0.0f64;
    let mut flux = Vec::with_capacity(coarse.times.len());
    for (vc, vr) in coarse.states.iter().zip(&reference.states) {
        let diff = restrict(vr, &grid)?.sub(vc)?;
        sup = sup.max(norm_h(&diff).powi(2));
        let dr = restrict(&tilde(vr).field, &grid)?;
        let d = dr.sub(&tilde(vc).field)?;
        flux.push(norm_hdelta(&d).powi(2));
    }
    Ok(ErrorRow::new(grid.n(), sup, trapezoid(&coarse.times, &flux)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    /// Observed order between consecutive rows; `None` for the first row or
    /// when either error vanishes.
    pub orders: Vec<Option<f64>>,
    /// Least-squares slope of `log S` against `log dx` over rows with `S > 0`.
    pub slope: Option<f64>,
}

pub fn fit_order(rows: &[ErrorRow]) -> OrderFit {
    let mut orders = vec![None; rows.len()];
    for k in 1..rows.len() {
        let (a, b) = (&rows[k - 1], &rows[k]);
        if a.s > 0.0 && b.s > 0.0 {
            orders[k] = Some((a.s / b.s).ln() / (a.dx / b.dx).ln());
        }
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.s > 0.0)
        .map(|r| (r.dx.ln(), r.s.ln()))
        .collect();
    OrderFit {
        orders,
        slope: least_squares_slope(&pts),
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Quantities whose boundedness in `n` the a-priori estimates assert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorReport {
    pub n: usize,
    /// `sup_k |v(t_k)|_H`
    pub m1: f64,
    /// `int |tilde v|_H^2 dt`
    pub m2: f64,
    /// `sum_k |(v_{k+1} - v_k) / dt_k|_H^2 dt_k`
    pub m3: f64,
    /// `sup_k |tilde v(t_k)|_H`
    pub m4: f64,
    /// `int |hat v|_H^2 dt`
    pub m5: f64,
    /// `max_{i,k} |v_i(t_k)|`
    pub m6: f64,
}

impl MonitorReport {
    pub fn as_array(&self) -> [f64; 6] {
        [self.m1, self.m2, self.m3, self.m4, self.m5, self.m6]
    }
}

pub fn monitors(traj: &Trajectory) -> Result<MonitorReport> {
    let mut m1 = 0.0f64;
    let mut m4 = 0.0f64;
    let mut m6 = 0.0f64;
    let mut tilde_sq = Vec::with_capacity(traj.states.len());
    let mut hat_sq = Vec::with_capacity(traj.states.len());
    for v in &traj.states {
        m1 = m1.max(norm_h(v));
        let t = norm_h(&tilde(v).field);
        m4 = m4.max(t);
        tilde_sq.push(t * t);
        hat_sq.push(norm_h(&hat(v).field).powi(2));
        m6 = v.values().iter().fold(m6, |m, x| m.max(x.abs()));
    }
    let mut m3 = 0.0;
    for k in 0..traj.states.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        let d = traj.states[k + 1].sub(&traj.states[k])?;
        m3 += (norm_h(&d) / dt).powi(2) * dt;
    }
    Ok(MonitorReport {
        n: traj.grid.n(),
        m1,
        m2: trapezoid(&traj.times, &tilde_sq),
        m3,
        m4,
        m5: trapezoid(&traj.times, &hat_sq),
        m6,
    })
}

/// Both sides of an inequality `LHS <= RHS` and their ratio (0 when both
/// vanish).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityValue {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl InequalityValue {
    fn new(lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 && rhs == 0.0 { 0.0 } else { lhs / rhs };
        Self { lhs, rhs, ratio }
    }
}

fn check_lengths(grid: &Grid, nodes: usize, cells: Option<usize>) -> Result<()> {
    if nodes != grid.n() + 1 {
        return Err(Error::Length {
            what: "nodal values",
            expected: grid.n() + 1,
            got: nodes,
        });
    }
    if let Some(c) = cells {
        if c != grid.n() {
            return Err(Error::Length {
                what: "cell values",
                expected: grid.n(),
                got: c,
            });
        }
    }
    Ok(())
}

/// Discrete Gagliardo–Nirenberg type inequality for `s - w`, with `w` the
/// piecewise-linear interpolant of `w_nodes` and `s` piecewise constant:
///
/// ```text
/// int_dx^1 |s - w|^4 <= C |s - w|^4 + C (|delta s - w'|^2 + |w' - w'(. - dx)|^2 + dx |w'|_H^2) |s - w|^2
/// ```
///
/// with all unlabelled norms over `(dx, 1)` and `C = 1152`.
pub fn check_gn_discrete(w_nodes: &[f64], s_cells: &[f64], grid: &Grid) -> Result<InequalityValue> {
    check_lengths(grid, w_nodes.len(), Some(s_cells.len()))?;
    let n = grid.n();
    let dx = grid.dx();
    let slope = |i: usize| (w_nodes[i + 1] - w_nodes[i]) / dx;
    let mut l4 = 0.0;
    let mut l2 = 0.0;
    let mut d_s_w = 0.0;
    let mut d_w_shift = 0.0;
    for i in 1..n {
        // s - w is linear on the cell; the 3-point rule integrates its
        // fourth power exactly
        let (a, b) = (s_cells[i] - w_nodes[i], s_cells[i] - w_nodes[i + 1]);
        let (x0, x1) = grid.cell_bounds(i);
        let at = |x: f64| a + (b - a) * (x - x0) / (x1 - x0);
        for (x, wt) in GAUSS3.points(x0, x1) {
            let d = at(x);
            l4 += wt * d.powi(4);
            l2 += wt * d * d;
        }
        let ds = (s_cells[i] - s_cells[i - 1]) / dx;
        d_s_w += dx * (ds - slope(i)).powi(2);
        d_w_shift += dx * (slope(i) - slope(i - 1)).powi(2);
    }
    let grad_sq: f64 = (0..n).map(|i| dx * slope(i).powi(2)).sum();
    let c = GN_DISCRETE_CONSTANT;
    let rhs = c * l2 * l2 + c * (d_s_w + d_w_shift + dx * grad_sq) * l2;
    Ok(InequalityValue::new(l4, rhs))
}

/// One-dimensional Gagliardo–Nirenberg inequality
/// `|u|_inf^2 <= |u|_H^2 + 2 |u|_H |u'|_H` for the piecewise-linear
/// interpolant of `u_nodes`.
pub fn check_gn_continuous(u_nodes: &[f64], grid: &Grid) -> Result<InequalityValue> {
    check_lengths(grid, u_nodes.len(), None)?;
    let n = grid.n();
    let dx = grid.dx();
    let sup = u_nodes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for i in 0..n {
        let (a, b) = (u_nodes[i], u_nodes[i + 1]);
        // mean of the squared linear interpolant, exact with two Gauss points
        let mean_sq: f64 = GAUSS2
            .nodes
            .iter()
            .zip(GAUSS2.weights)
            .map(|(&xi, &w)| {
                let u = a + (b - a) * 0.5 * (xi + 1.0);
                0.5 * w * u * u
            })
            .sum();
        l2 += mean_sq;
        grad += (b - a) * (b - a);
    }
    let l2 = l2 / n as f64;
    let grad = grad / dx;
    let rhs = l2 + 2.0 * l2.sqrt() * grad.sqrt();
    Ok(InequalityValue::new(sup * sup, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    GnDiscrete,
    GnContinuous,
}

impl InequalityKind {
    pub fn name(&self) -> &'static str {
        match self {
            InequalityKind::GnDiscrete => "gn_discrete",
            InequalityKind::GnContinuous => "gn_continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalitySample {
    pub kind: InequalityKind,
    pub n: usize,
    pub sample_id: usize,
    pub seed: u64,
    pub ratio: f64,
    pub witness: String,
}

/// Amplitude of the random nodal and cell values.
pub const SWEEP_AMPLITUDE: f64 = 5.0;

/// Random inequality samples with entries uniform in `[-5, 5]`. Sample `j`
/// draws from a generator seeded with `seed ^ j`, so results do not depend
/// on scheduling. Output is ordered by `n`, then sample id.
pub fn inequality_sweep(kind: InequalityKind, ns: &[usize], samples: usize, seed: u64) -> Result<Vec<InequalitySample>> {
    let mut out = Vec::with_capacity(ns.len() * samples);
    for &n in ns {
        let grid = Grid::new(n)?;
        let batch: Result<Vec<_>> = (0..samples)
            .into_par_iter()
            .map(|j| {
                let sample_seed = seed ^ j as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
                let mut draw = |len: usize| -> Vec<f64> {
                    (0..len)
                        .map(|_| rng.gen_range(-SWEEP_AMPLITUDE..=SWEEP_AMPLITUDE))
                        .collect()
                };
                let value = match kind {
                    InequalityKind::GnDiscrete => {
                        let w = draw(n + 1);
                        let s = draw(n);
                        check_gn_discrete(&w, &s, &grid)?
                    }
                    InequalityKind::GnContinuous => check_gn_continuous(&draw(n + 1), &grid)?,
                };
                Ok(InequalitySample {
                    kind,
                    n,
                    sample_id: j,
                    seed: sample_seed,
                    ratio: value.ratio,
                    witness: format!("lhs={:e} rhs={:e}", value.lhs, value.rhs),
                })
            })
            .collect();
        out.extend(batch?);
    }
    Ok(out)
}

/// Residual of the weak formulation for the test function
/// `eta(t, x) = (1 - t/T) cos(m pi x)`:
///
/// ```text
/// R = -int int h(v) d_t eta + int int (tilde v + b(bar v) p(., . - dx)) d_x eta - int h(v0) eta(0)
/// ```
///
/// Time integrals use the trapezoid rule over checkpoints; space integrals
/// are exact against the piecewise-constant fields. Returns `|R|`.
pub fn weak_residual(traj: &Trajectory, m: i64) -> Result<f64> {
    if m < 0 {
        return Err(Error::InvalidArgument(format!("mode must be non-negative, got {m}")));
    }
    let spec = &traj.spec;
    let grid = traj.grid;
    let n = grid.n();
    let horizon = spec.horizon;
    let w = m as f64 * PI;
    // int_{V_i} cos(m pi x) dx and int_{V_i} m pi sin(m pi x) dx
    let (cos_int, sin_int): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|k| {
            let (a, b) = grid.cell_bounds(k);
            if m == 0 {
                (b - a, 0.0)
            } else {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                (
                    2.0 * (w * mid).cos() * (w * half).sin() / w,
                    2.0 * (w * mid).sin() * (w * half).sin(),
                )
            }
        })
        .unzip();

    let mut storage = Vec::with_capacity(traj.times.len());
    let mut transport = Vec::with_capacity(traj.times.len());
    for (&t, v) in traj.times.iter().zip(&traj.states) {
        let hv: f64 = v
            .values()
            .iter()
            .zip(&cos_int)
            .map(|(&x, c)| spec.h.value(x) * c)
            .sum();
        storage.push(hv / horizon);
        let p = p_cell_averages(spec, &grid, t)?;
        let td = tilde(v);
        let mid = midpoint(v);
        let mut flux = 0.0;
        for i in 1..n {
            let q = td.values()[i] + spec.b.value(mid.values()[i]) * p.values()[i - 1];
            flux += q * sin_int[i];
        }
        // d_x eta = -(1 - t/T) m pi sin(m pi x)
        transport.push(-(1.0 - t / horizon) * flux);
    }
    let initial = composite(&GAUSS5, 0.0, 1.0, 4096, |x| {
        spec.h.value(spec.v0.value(x)) * (w * x).cos()
    });
    let r = trapezoid(&traj.times, &storage) + trapezoid(&traj.times, &transport) - initial;
    Ok(r.abs())
}

/// Relative spread `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_spread(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{InitialData, PFamily, PressureField, ProblemSpec};
    use crate::stepper::{integrate, uniform_checkpoints, StepControl};
    use proptest::prelude::*;
    use rand::Rng;

    fn field(vals: &[f64]) -> CellField {
        CellField::new(Grid::new(vals.len()).unwrap(), vals.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert!((norm_h(&field(&[1.0, 2.0, 2.0])) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(norm_h(&field(&[0.0; 5])), 0.0);
        assert!((norm_h(&field(&[1.0; 7])) - 1.0).abs() < 1e-15);
        assert_eq!(norm_hdelta(&field(&[5.0, 0.0, 0.0])), 0.0);
        assert!((norm_hdelta(&field(&[0.0, 1.0, 1.0, 1.0])) - 0.75f64.sqrt()).abs() < 1e-15);
        let c = field(&[2.0; 8]);
        assert!((norm_hdelta(&c) - 2.0 * (1.0 - 0.125f64).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn norms_split_off_first_cell(v in prop::collection::vec(-100.0f64..100.0, 3..50)) {
            let f = field(&v);
            let dx = f.grid().dx();
            let lhs = norm_h(&f).powi(2);
            let rhs = norm_hdelta(&f).powi(2) + dx * v[0] * v[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }

        #[test]
        fn fit_recovers_synthetic_power(g in 0.1f64..4.0, c in 0.01f64..100.0) {
            let rows: Vec<ErrorRow> = [8usize, 16, 32, 64]
                .iter()
                .map(|&n| ErrorRow::new(n, c * (1.0 / n as f64).powf(g), 0.0))
                .collect();
            let fit = fit_order(&rows);
            prop_assert!((fit.slope.unwrap() - g).abs() <= 1e-12);
            for o in &fit.orders[1..] {
                prop_assert!((o.unwrap() - g).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fit_examples() {
        let rows: Vec<ErrorRow> = [(4, 0.1), (8, 0.05), (16, 0.025)]
            .iter()
            .map(|&(n, s)| ErrorRow::new(n, s, 0.0))
            .collect();
        let fit = fit_order(&rows);
        assert!(fit.orders[0].is_none());
        assert!((fit.slope.unwrap() - 1.0).abs() < 1e-12);
        let rows: Vec<ErrorRow> = [16, 32, 64]
            .iter()
            .map(|&n| ErrorRow::new(n, 0.3 * (1.0 / n as f64).sqrt(), 0.0))
            .collect();
        assert!((fit_order(&rows).slope.unwrap() - 0.5).abs() < 1e-12);
        let zeros = vec![ErrorRow::new(8, 0.0, 0.0), ErrorRow::new(16, 0.0, 0.0)];
        let fit = fit_order(&zeros);
        assert_eq!(fit.slope, None);
        assert_eq!(fit.orders, vec![None, None]);
    }

    fn steady_trajectory(c: f64, n: usize) -> Trajectory {
        let mut spec = ProblemSpec::default_problem();
        spec.p = PressureField::new(PFamily::Zero).unwrap();
        spec.v0 = InitialData::Const { c };
        let g = Grid::new(n).unwrap();
        integrate(&spec, &g, &StepControl::implicit(0.01), &uniform_checkpoints(spec.horizon, 10)).unwrap()
    }

    #[test]
    fn steady_monitors() {
        let traj = steady_trajectory(-1.5, 8);
        let r = monitors(&traj).unwrap();
        assert!((r.m1 - 1.5).abs() < 1e-15);
        assert_eq!([r.m2, r.m3, r.m4, r.m5], [0.0; 4]);
        assert_eq!(r.m6, 1.5);
    }

    #[test]
    fn sup_monitor_dominates_final_state() {
        let spec = ProblemSpec::default_problem();
        let g = Grid::new(16).unwrap();
        let traj = integrate(&spec, &g, &StepControl::implicit_default(&g), &uniform_checkpoints(0.25, 20)).unwrap();
        let r = monitors(&traj).unwrap();
        assert!(r.m1 >= norm_h(traj.last()));
        assert!(r.as_array().iter().all(|&x| x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn error_pair_against_itself_and_its_restriction() {
        let spec = ProblemSpec::default_problem();
        let cps = uniform_checkpoints(0.25, 8);
        let coarse = integrate(&spec, &Grid::new(8).unwrap(), &StepControl::implicit(0.01), &cps).unwrap();
        let row = error_pair(&coarse, &coarse).unwrap();
        assert_eq!((row.e_sup_sq, row.e_flux, row.s), (0.0, 0.0, 0.0));

        let fine = integrate(&spec, &Grid::new(32).unwrap(), &StepControl::implicit(0.01), &cps).unwrap();
        let mut restricted = coarse.clone();
        restricted.states = fine.states.iter().map(|s| restrict(s, &coarse.grid).unwrap()).collect();
        let row = error_pair(&restricted, &fine).unwrap();
        assert_eq!(row.e_sup_sq, 0.0);
        assert!(row.e_flux > 0.0);

        let other = integrate(&spec, &Grid::new(12).unwrap(), &StepControl::implicit(0.01), &cps).unwrap();
        assert!(matches!(error_pair(&coarse, &other), Err(Error::NonNested { .. })));
        let shifted = integrate(&spec, &Grid::new(16).unwrap(), &StepControl::implicit(0.01), &uniform_checkpoints(0.25, 4)).unwrap();
        assert!(error_pair(&coarse, &shifted).is_err());
    }

    #[test]
    fn gn_discrete_examples() {
        let g = Grid::new(4).unwrap();
        let v = check_gn_discrete(&[0.3; 5], &[0.3; 4], &g).unwrap();
        assert_eq!(v.ratio, 0.0);
        let v = check_gn_discrete(&[0.0; 5], &[1.0; 4], &g).unwrap();
        assert!((v.lhs - 0.75).abs() < 1e-15);
        assert!((v.rhs - 648.0).abs() < 1e-12);
        assert!((v.ratio - 0.75 / 648.0).abs() < 1e-15);
        assert!((v.ratio - 1.157e-3).abs() < 1e-6);
        assert!(check_gn_discrete(&[0.0; 4], &[1.0; 4], &g).is_err());
        assert!(check_gn_discrete(&[0.0; 5], &[1.0; 3], &g).is_err());
    }

    /// Brute-force midpoint-rule value of the left-hand side.
    fn lhs_brute(w: &[f64], s: &[f64], n: usize) -> f64 {
        let dx = 1.0 / n as f64;
        let per = 2000;
        let mut total = 0.0;
        for i in 1..n {
            for q in 0..per {
                let theta = (q as f64 + 0.5) / per as f64;
                let wx = w[i] + (w[i + 1] - w[i]) * theta;
                total += (s[i] - wx).powi(4) * dx / per as f64;
            }
        }
        total
    }

    #[test]
    fn gn_discrete_lhs_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [4, 9] {
            let w: Vec<f64> = (0..=n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v = check_gn_discrete(&w, &s, &Grid::new(n).unwrap()).unwrap();
            let b = lhs_brute(&w, &s, n);
            assert!((v.lhs - b).abs() < 1e-6 * b.max(1.0));
        }
    }

    #[test]
    fn gn_discrete_holds_for_structured_inputs() {
        // s close to the cell means of a smooth w is where the left side is
        // largest relative to the right
        let mut worst = 0.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [4, 16, 64] {
            let g = Grid::new(n).unwrap();
            for _ in 0..200 {
                let freq = rng.gen_range(0.5..20.0);
                let w: Vec<f64> = (0..=n).map(|i| (freq * g.node(i)).sin()).collect();
                let s: Vec<f64> = (0..n)
                    .map(|i| 0.5 * (w[i] + w[i + 1]) + rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-6.0..1.0)))
                    .collect();
                worst = worst.max(check_gn_discrete(&w, &s, &g).unwrap().ratio);
            }
        }
        assert!(worst <= 1.0, "{worst}");
    }

    #[test]
    fn gn_continuous_examples() {
        let g = Grid::new(8).unwrap();
        for c in [1.0, -2.5, 3.0, 0.5] {
            let v = check_gn_continuous(&[c; 9], &g).unwrap();
            assert!((v.ratio - 1.0).abs() <= 4.0 * f64::EPSILON, "{c}: {}", v.ratio);
        }
        assert_eq!(check_gn_continuous(&[0.0; 9], &g).unwrap().ratio, 0.0);
        assert!(check_gn_continuous(&[0.0; 8], &g).is_err());
        // u = x on (0, 1): sup^2 = 1, |u|_H^2 = 1/3, |u'|_H = 1
        let nodes: Vec<f64> = (0..=8).map(|i| g.node(i)).collect();
        let v = check_gn_continuous(&nodes, &g).unwrap();
        let want = 1.0 / (1.0 / 3.0 + 2.0 / 3f64.sqrt());
        assert!((v.ratio - want).abs() < 1e-14);
    }

    #[test]
    fn sweeps_are_reproducible_and_bounded() {
        let a = inequality_sweep(InequalityKind::GnDiscrete, &[4, 8], 50, 42).unwrap();
        let b = inequality_sweep(InequalityKind::GnDiscrete, &[4, 8], 50, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|s| s.ratio <= 1.0 && s.ratio >= 0.0));
        let c = inequality_sweep(InequalityKind::GnContinuous, &[4, 16], 50, 1).unwrap();
        assert!(c.iter().all(|s| s.ratio <= 1.0));
        assert!(inequality_sweep(InequalityKind::GnContinuous, &[4], 0, 1).unwrap().is_empty());
    }

    #[test]
    fn weak_residual_vanishes_on_steady_state() {
        let traj = steady_trajectory(0.9, 10);
        for m in 0..4 {
            let r = weak_residual(&traj, m).unwrap();
            assert!(r < 1e-12, "m = {m}: {r}");
        }
        assert!(weak_residual(&traj, -1).is_err());
    }
}
