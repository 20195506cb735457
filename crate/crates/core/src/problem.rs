//! Coefficient families for `h`, `b`, `p` and `v0`, their declared bound
//! constants, and a sampling check of those bounds.
//!
//! Every family has closed-form derivatives and closed-form cell means, so
//! projections onto a grid carry no quadrature error.

use std::f64::consts::PI;

use serde::Serialize;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::grid::{cell_average_exact, CellField, ExactCellMean, Grid};

/// `sin(z) / z`, continuous at zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Mean of `sin(w x)` over `[a, b]`, written without cancellation.
fn mean_sin(w: f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (w * mid).sin() * sinc(w * half)
}

/// Mean of `cos(w x)` over `[a, b]`.
fn mean_cos(w: f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (w * mid).cos() * sinc(w * half)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HFamily {
    /// `a v`
    Linear { a: f64 },
    /// `a v + c sin v`
    LinearPlusSin { a: f64, c: f64 },
}

/// The nonlinearity under the time derivative, with `C_h1 <= h' <= C_h2`
/// and `|h''| <= C_h2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientH {
    pub family: HFamily,
    pub c1: f64,
    pub c2: f64,
}

impl CoefficientH {
    pub fn new(family: HFamily) -> Result<Self> {
        let (c1, c2) = match family {
            HFamily::Linear { a } => {
                if !(a > 0.0) {
                    return Err(Error::Admissibility(format!("h linear needs a > 0, got a = {a}")));
                }
                (a, a)
            }
            HFamily::LinearPlusSin { a, c } => {
                if !(c >= 0.0) {
                    return Err(Error::Admissibility(format!(
                        "h linear_plus_sin needs c >= 0, got c = {c}"
                    )));
                }
                if !(a > c) {
                    return Err(Error::Admissibility(format!(
                        "h linear_plus_sin needs a > c, got a = {a}, c = {c} (C_h1 = a - c = {} not positive)",
                        a - c
                    )));
                }
                (a - c, a + c)
            }
        };
        Ok(Self { family, c1, c2 })
    }

    pub fn value(&self, v: f64) -> f64 {
        match self.family {
            HFamily::Linear { a } => a * v,
            HFamily::LinearPlusSin { a, c } => a * v + c * v.sin(),
        }
    }

    pub fn d1(&self, v: f64) -> f64 {
        match self.family {
            HFamily::Linear { a } => a,
            HFamily::LinearPlusSin { a, c } => a + c * v.cos(),
        }
    }

    pub fn d2(&self, v: f64) -> f64 {
        match self.family {
            HFamily::Linear { .. } => 0.0,
            HFamily::LinearPlusSin { c, .. } => -c * v.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BFamily {
    Const { c0: f64 },
    /// `c0 + c1 sin v`
    OffsetSin { c0: f64, c1: f64 },
}

/// The mobility multiplying the pressure, with `C_b1 <= b <= C_b2` and
/// `|b'|, |b''| <= C_b2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientB {
    pub family: BFamily,
    pub c1: f64,
    pub c2: f64,
}

impl CoefficientB {
    pub fn new(family: BFamily) -> Result<Self> {
        let (c1, c2) = match family {
            BFamily::Const { c0 } => {
                if !(c0 > 0.0) {
                    return Err(Error::Admissibility(format!("b const needs c0 > 0, got c0 = {c0}")));
                }
                (c0, c0)
            }
            BFamily::OffsetSin { c0, c1 } => {
                if !(c0 > c1.abs()) {
                    return Err(Error::Admissibility(format!(
                        "b offset_sin needs c0 > |c1|, got c0 = {c0}, c1 = {c1}"
                    )));
                }
                (c0 - c1.abs(), c0 + c1.abs())
            }
        };
        Ok(Self { family, c1, c2 })
    }

    pub fn value(&self, v: f64) -> f64 {
        match self.family {
            BFamily::Const { c0 } => c0,
            BFamily::OffsetSin { c0, c1 } => c0 + c1 * v.sin(),
        }
    }

    pub fn d1(&self, v: f64) -> f64 {
        match self.family {
            BFamily::Const { .. } => 0.0,
            BFamily::OffsetSin { c1, .. } => c1 * v.cos(),
        }
    }

    pub fn d2(&self, v: f64) -> f64 {
        match self.family {
            BFamily::Const { .. } => 0.0,
            BFamily::OffsetSin { c1, .. } => -c1 * v.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PFamily {
    Zero,
    /// `alpha`, constant in space and time.
    Const { alpha: f64 },
    /// `alpha sin(k pi x) cos(omega t)`
    Separable { alpha: f64, k: f64, omega: f64 },
}

/// Prescribed pressure `p(t, x)`. Every family factors as
/// `time_factor(t) * shape(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureField {
    pub family: PFamily,
    /// Declared bound on `|p|` over `[0, T] x [0, 1]`.
    pub sup: f64,
}

impl PressureField {
    pub fn new(family: PFamily) -> Result<Self> {
        let sup = match family {
            PFamily::Zero => 0.0,
            PFamily::Const { alpha } => alpha.abs(),
            PFamily::Separable { alpha, k, omega } => {
                if !(alpha.is_finite() && k.is_finite() && omega.is_finite()) {
                    return Err(Error::Admissibility("p separable parameters must be finite".into()));
                }
                alpha.abs()
            }
        };
        if !sup.is_finite() {
            return Err(Error::Admissibility("p parameters must be finite".into()));
        }
        Ok(Self { family, sup })
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        match self.family {
            PFamily::Zero => 0.0,
            PFamily::Const { alpha } => alpha,
            PFamily::Separable { alpha, omega, .. } => alpha * (omega * t).cos(),
        }
    }

    fn shape(&self, x: f64) -> f64 {
        match self.family {
            PFamily::Zero | PFamily::Const { .. } => 1.0,
            PFamily::Separable { k, .. } => (k * PI * x).sin(),
        }
    }

    fn shape_mean(&self, a: f64, b: f64) -> f64 {
        match self.family {
            PFamily::Zero | PFamily::Const { .. } => 1.0,
            PFamily::Separable { k, .. } => mean_sin(k * PI, a, b),
        }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.time_factor(t) * self.shape(x)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        match self.family {
            PFamily::Zero | PFamily::Const { .. } => 0.0,
            PFamily::Separable { alpha, k, omega } => {
                -alpha * omega * (omega * t).sin() * (k * PI * x).sin()
            }
        }
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        match self.family {
            PFamily::Zero | PFamily::Const { .. } => 0.0,
            PFamily::Separable { k, .. } => self.time_factor(t) * k * PI * (k * PI * x).cos(),
        }
    }

    /// Cell means of the spatial shape; multiply by `time_factor(t)` for the
    /// pressure cell means at time `t`.
    pub fn shape_profile(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n())
            .map(|k| {
                let (a, b) = grid.cell_bounds(k);
                self.shape_mean(a, b)
            })
            .collect()
    }
}

/// `p(t, .)` frozen at a fixed time.
pub struct PressureAt<'a> {
    pub field: &'a PressureField,
    pub t: f64,
}

impl ExactCellMean for PressureAt<'_> {
    fn mean_over(&self, a: f64, b: f64) -> f64 {
        self.field.time_factor(self.t) * self.field.shape_mean(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialData {
    Const { c: f64 },
    /// `sum_m coeffs[m] cos(m pi x)`, `m = 0, 1, ...`
    Cosine { coeffs: Vec<f64> },
    /// `a + slope x`; its derivative does not vanish at the boundary, so it
    /// is only compatible with the zero-flux condition in a weak sense.
    Linear { a: f64, slope: f64 },
}

impl InitialData {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            InitialData::Const { c } => *c,
            InitialData::Cosine { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(m, am)| am * (m as f64 * PI * x).cos())
                .sum(),
            InitialData::Linear { a, slope } => a + slope * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            InitialData::Const { .. } => 0.0,
            InitialData::Cosine { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(m, am)| {
                    let w = m as f64 * PI;
                    -am * w * (w * x).sin()
                })
                .sum(),
            InitialData::Linear { slope, .. } => *slope,
        }
    }
}

impl ExactCellMean for InitialData {
    fn mean_over(&self, a: f64, b: f64) -> f64 {
        match self {
            InitialData::Const { c } => *c,
            InitialData::Cosine { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(m, am)| am * mean_cos(m as f64 * PI, a, b))
                .sum(),
            InitialData::Linear { a: c, slope } => c + slope * 0.5 * (a + b),
        }
    }
}

/// A fully specified problem instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub h: CoefficientH,
    pub b: CoefficientB,
    pub p: PressureField,
    pub v0: InitialData,
    /// Final time `T`.
    pub horizon: f64,
    /// State range over which the bounds on `h` and `b` are sampled.
    pub vrange: (f64, f64),
}

pub const DEFAULT_VRANGE: (f64, f64) = (-20.0, 20.0);

impl ProblemSpec {
    pub fn new(
        h: CoefficientH,
        b: CoefficientB,
        p: PressureField,
        v0: InitialData,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Admissibility(format!("T must be positive, got {horizon}")));
        }
        if let InitialData::Cosine { coeffs } = &v0 {
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Admissibility("v0 cosine needs finite coefficients".into()));
            }
        }
        Ok(Self {
            h,
            b,
            p,
            v0,
            horizon,
            vrange: DEFAULT_VRANGE,
        })
    }

    /// `h = 2v + sin v`, `b = 2 + sin v`, `p = 0.5 sin(pi x) cos(3t)`,
    /// `v0 = cos(pi x)`, `T = 0.25`.
    pub fn default_problem() -> Self {
        Self::new(
            CoefficientH::new(HFamily::LinearPlusSin { a: 2.0, c: 1.0 }).unwrap(),
            CoefficientB::new(BFamily::OffsetSin { c0: 2.0, c1: 1.0 }).unwrap(),
            PressureField::new(PFamily::Separable {
                alpha: 0.5,
                k: 1.0,
                omega: 3.0,
            })
            .unwrap(),
            InitialData::Cosine {
                coeffs: vec![0.0, 1.0],
            },
            0.25,
        )
        .unwrap()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Reads the `problem.*` keys of a configuration.
    pub fn from_keys(kv: &mut KeyValues) -> Result<Self> {
        let (line, name) = kv.require_str("problem.h")?;
        let h = match name.as_str() {
            "linear" => HFamily::Linear {
                a: kv.require("problem.h.a")?,
            },
            "linear_plus_sin" => HFamily::LinearPlusSin {
                a: kv.require("problem.h.a")?,
                c: kv.require("problem.h.c")?,
            },
            _ => return Err(unknown(line, "h", name)),
        };
        let h = CoefficientH::new(h)?;

        let (line, name) = kv.require_str("problem.b")?;
        let b = match name.as_str() {
            "const" => BFamily::Const {
                c0: kv.require("problem.b.c0")?,
            },
            "offset_sin" => BFamily::OffsetSin {
                c0: kv.require("problem.b.c0")?,
                c1: kv.require("problem.b.c1")?,
            },
            _ => return Err(unknown(line, "b", name)),
        };
        let b = CoefficientB::new(b)?;

        let (line, name) = kv.require_str("problem.p")?;
        let p = match name.as_str() {
            "zero" => PFamily::Zero,
            "const" => PFamily::Const {
                alpha: kv.require("problem.p.alpha")?,
            },
            "separable" => PFamily::Separable {
                alpha: kv.require("problem.p.alpha")?,
                k: kv.require("problem.p.k")?,
                omega: kv.require("problem.p.omega")?,
            },
            _ => return Err(unknown(line, "p", name)),
        };
        let p = PressureField::new(p)?;

        let (line, name) = kv.require_str("problem.v0")?;
        let v0 = match name.as_str() {
            "const" => InitialData::Const {
                c: kv.require("problem.v0.c")?,
            },
            "cosine" => InitialData::Cosine {
                coeffs: kv
                    .take_list("problem.v0.coeffs")?
                    .ok_or_else(|| Error::MissingKey("problem.v0.coeffs".into()))?,
            },
            "linear" => InitialData::Linear {
                a: kv.require("problem.v0.a")?,
                slope: kv.require("problem.v0.slope")?,
            },
            _ => return Err(unknown(line, "v0", name)),
        };

        let horizon = kv.require("problem.T")?;
        let mut spec = Self::new(h, b, p, v0, horizon)?;
        let vmin = kv.take::<f64>("problem.vmin")?.unwrap_or(DEFAULT_VRANGE.0);
        let vmax = kv.take::<f64>("problem.vmax")?.unwrap_or(DEFAULT_VRANGE.1);
        if !(vmin < vmax) {
            return Err(Error::Admissibility(format!(
                "problem.vmin < problem.vmax required, got [{vmin}, {vmax}]"
            )));
        }
        spec.vrange = (vmin, vmax);
        Ok(spec)
    }
}

fn unknown(line: usize, kind: &'static str, name: String) -> Error {
    Error::Config {
        line,
        msg: Error::UnknownFamily { kind, name }.to_string(),
    }
}

/// Builds a problem from configuration text containing only `problem.*`
/// keys.
pub fn build_from_config(text: &str) -> Result<ProblemSpec> {
    let mut kv = KeyValues::parse(text)?;
    let spec = ProblemSpec::from_keys(&mut kv)?;
    kv.finish()?;
    Ok(spec)
}

/// Sampled extrema of the coefficients, compared with the declared
/// constants.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub vrange: (f64, f64),
    pub dh_min: f64,
    pub dh_max: f64,
    pub d2h_abs_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub db_abs_max: f64,
    pub d2b_abs_max: f64,
    pub p_abs_max: f64,
}

/// Dense sampling check of the declared bounds on `h`, `b` and `p`.
pub fn verify_assumptions(spec: &ProblemSpec, samples: usize) -> Result<VerificationReport> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 samples required, got {samples}"
        )));
    }
    let (lo, hi) = spec.vrange;
    let mut r = VerificationReport {
        samples,
        vrange: spec.vrange,
        dh_min: f64::INFINITY,
        dh_max: f64::NEG_INFINITY,
        d2h_abs_max: 0.0,
        b_min: f64::INFINITY,
        b_max: f64::NEG_INFINITY,
        db_abs_max: 0.0,
        d2b_abs_max: 0.0,
        p_abs_max: 0.0,
    };
    let tol = |c: f64| 1e-12 * c.abs().max(1.0);
    let violated = |bound: &str, witness: String| {
        Err(Error::AssumptionViolated {
            bound: bound.to_string(),
            witness,
        })
    };
    let (h, b) = (&spec.h, &spec.b);
    for k in 0..samples {
        let v = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let (dh, d2h) = (h.d1(v), h.d2(v));
        let (bv, db, d2b) = (b.value(v), b.d1(v), b.d2(v));
        r.dh_min = r.dh_min.min(dh);
        r.dh_max = r.dh_max.max(dh);
        r.d2h_abs_max = r.d2h_abs_max.max(d2h.abs());
        r.b_min = r.b_min.min(bv);
        r.b_max = r.b_max.max(bv);
        r.db_abs_max = r.db_abs_max.max(db.abs());
        r.d2b_abs_max = r.d2b_abs_max.max(d2b.abs());
        if dh < h.c1 - tol(h.c1) {
            return violated("C_h1 <= h'", format!("v = {v}, h' = {dh}, C_h1 = {}", h.c1));
        }
        if dh > h.c2 + tol(h.c2) {
            return violated("h' <= C_h2", format!("v = {v}, h' = {dh}, C_h2 = {}", h.c2));
        }
        if d2h.abs() > h.c2 + tol(h.c2) {
            return violated("|h''| <= C_h2", format!("v = {v}, h'' = {d2h}, C_h2 = {}", h.c2));
        }
        if bv < b.c1 - tol(b.c1) {
            return violated("C_b1 <= b", format!("v = {v}, b = {bv}, C_b1 = {}", b.c1));
        }
        if bv > b.c2 + tol(b.c2) {
            return violated("b <= C_b2", format!("v = {v}, b = {bv}, C_b2 = {}", b.c2));
        }
        if db.abs() > b.c2 + tol(b.c2) {
            return violated("|b'| <= C_b2", format!("v = {v}, b' = {db}, C_b2 = {}", b.c2));
        }
        if d2b.abs() > b.c2 + tol(b.c2) {
            return violated("|b''| <= C_b2", format!("v = {v}, b'' = {d2b}, C_b2 = {}", b.c2));
        }
    }
    let side = (samples as f64).sqrt().ceil() as usize;
    for i in 0..side {
        let t = spec.horizon * i as f64 / (side - 1) as f64;
        for j in 0..side {
            let x = j as f64 / (side - 1) as f64;
            let pv = spec.p.value(t, x);
            if !(pv.is_finite() && spec.p.dt(t, x).is_finite() && spec.p.dx(t, x).is_finite()) {
                return violated("p finite", format!("t = {t}, x = {x}"));
            }
            r.p_abs_max = r.p_abs_max.max(pv.abs());
            if pv.abs() > spec.p.sup + tol(spec.p.sup) {
                return violated("|p| <= p_inf", format!("t = {t}, x = {x}, p = {pv}, p_inf = {}", spec.p.sup));
            }
        }
        let x = i as f64 / (side - 1) as f64;
        if !(spec.v0.value(x).is_finite() && spec.v0.derivative(x).is_finite()) {
            return violated("v0 finite", format!("x = {x}"));
        }
    }
    Ok(r)
}

/// Cell means of `p(t, .)`.
pub fn p_cell_averages(spec: &ProblemSpec, grid: &Grid, t: f64) -> Result<CellField> {
    spec.check_time(t)?;
    cell_average_exact(&PressureAt { field: &spec.p, t }, grid)
}
