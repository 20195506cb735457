//! The semi-discrete finite volume system.
//!
//! With face fluxes
//!
//! ```text
//! F_{i+1/2} = (v_{i+1} - v_i) / dx + b((v_i + v_{i+1}) / 2) p_i,   i = 1..n-1
//! ```
//!
//! and `F_{1/2} = F_{n+1/2} = 0`, each cell evolves by
//! `h'(v_i) dv_i/dt = G_i(v) = (F_{i+1/2} - F_{i-1/2}) / dx`.
//! The face `i+1/2` pairs the midpoint mobility with the pressure mean of
//! the cell on its left.

use crate::error::{Error, Result};
use crate::grid::{cell_average_exact, CellField, Grid};
use crate::problem::ProblemSpec;
pub use crate::tridiag::TridiagonalMatrix;

/// Interior face fluxes `F_{3/2} .. F_{n-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxVector {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// A problem bound to a grid, with the spatial pressure profile cached.
/// Works on raw slices so the time steppers can reuse buffers.
#[derive(Debug, Clone)]
pub struct Discretization<'a> {
    spec: &'a ProblemSpec,
    grid: Grid,
    p_shape: Vec<f64>,
}

impl<'a> Discretization<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Grid) -> Self {
        Self {
            spec,
            grid,
            p_shape: spec.p.shape_profile(&grid),
        }
    }

    pub fn spec(&self) -> &'a ProblemSpec {
        self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Pressure cell means at time `t`.
    pub fn pressure_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.spec.check_time(t)?;
        let factor = self.spec.p.time_factor(t);
        for (o, s) in out.iter_mut().zip(&self.p_shape) {
            *o = factor * s;
        }
        Ok(())
    }

    pub fn pressure(&self, t: f64) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.grid.n()];
        self.pressure_into(t, &mut p)?;
        Ok(p)
    }

    /// Interior fluxes into `out` (length `n - 1`).
    pub fn fluxes_into(&self, v: &[f64], p: &[f64], out: &mut [f64]) {
        let dx = self.grid.dx();
        let b = &self.spec.b;
        for (k, f) in out.iter_mut().enumerate() {
            *f = (v[k + 1] - v[k]) / dx + b.value((v[k] + v[k + 1]) / 2.0) * p[k];
        }
    }

    /// `G(v)` into `out` (length `n`).
    pub fn divergence_into(&self, v: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let b = &self.spec.b;
        let flux = |k: usize| (v[k + 1] - v[k]) / dx + b.value((v[k] + v[k + 1]) / 2.0) * p[k];
        let mut left = 0.0;
        for k in 0..n {
            let right = if k + 1 < n { flux(k) } else { 0.0 };
            out[k] = (right - left) / dx;
            left = right;
        }
    }

    /// `dv/dt = G(v) / h'(v)` into `out`.
    pub fn rate_into(&self, v: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        self.divergence_into(v, p, out);
        let h = &self.spec.h;
        for (k, o) in out.iter_mut().enumerate() {
            let dh = h.d1(v[k]);
            if !(dh >= 0.5 * h.c1) {
                return Err(Error::CorruptedState {
                    cell: k + 1,
                    v: v[k],
                    dh,
                });
            }
            *o /= dh;
        }
        Ok(())
    }

    /// `dG/dv` into `jac`.
    pub fn jacobian_into(&self, v: &[f64], p: &[f64], jac: &mut TridiagonalMatrix) {
        let n = self.grid.n();
        let dx = self.grid.dx();
        let b = &self.spec.b;
        jac.lower.iter_mut().for_each(|x| *x = 0.0);
        jac.diag.iter_mut().for_each(|x| *x = 0.0);
        jac.upper.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..n - 1 {
            let s = 0.5 * b.d1((v[k] + v[k + 1]) / 2.0) * p[k];
            // derivatives of F_{k+1/2} with respect to its left and right cells
            let dl = -1.0 / dx + s;
            let dr = 1.0 / dx + s;
            jac.diag[k] += dl / dx;
            jac.upper[k] += dr / dx;
            jac.diag[k + 1] -= dr / dx;
            jac.lower[k + 1] -= dl / dx;
        }
    }
}

pub fn assemble_fluxes(v: &CellField, p_cells: &CellField, spec: &ProblemSpec) -> Result<FluxVector> {
    v.check_grid(p_cells)?;
    let grid = *v.grid();
    let disc = Discretization::new(spec, grid);
    let mut values = vec![0.0; grid.n() - 1];
    disc.fluxes_into(v.values(), p_cells.values(), &mut values);
    Ok(FluxVector { grid, values })
}

/// `G(v)`, the conservative right-hand side before division by `h'`.
pub fn divergence(t: f64, v: &CellField, spec: &ProblemSpec) -> Result<CellField> {
    let disc = Discretization::new(spec, *v.grid());
    let p = disc.pressure(t)?;
    let mut out = vec![0.0; v.grid().n()];
    disc.divergence_into(v.values(), &p, &mut out);
    CellField::new(*v.grid(), out)
}

/// `dv/dt` of the semi-discrete system.
pub fn rhs(t: f64, v: &CellField, spec: &ProblemSpec) -> Result<CellField> {
    let disc = Discretization::new(spec, *v.grid());
    let p = disc.pressure(t)?;
    let mut out = vec![0.0; v.grid().n()];
    disc.rate_into(v.values(), &p, &mut out)?;
    CellField::new(*v.grid(), out)
}

/// Cell means of `v0`.
pub fn initial_state(spec: &ProblemSpec, grid: &Grid) -> Result<CellField> {
    cell_average_exact(&spec.v0, grid)
}

/// `dx * sum_i h(v_i)`, conserved by the scheme.
pub fn mass(v: &CellField, spec: &ProblemSpec) -> f64 {
    v.grid().dx() * v.values().iter().map(|&x| spec.h.value(x)).sum::<f64>()
}

/// Tridiagonal Jacobian of `G` at `(t, v)`.
pub fn jacobian_g(t: f64, v: &CellField, spec: &ProblemSpec) -> Result<TridiagonalMatrix> {
    let grid = *v.grid();
    let disc = Discretization::new(spec, grid);
    let p = disc.pressure(t)?;
    let mut jac = TridiagonalMatrix::zeros(grid.n());
    disc.jacobian_into(v.values(), &p, &mut jac);
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BFamily, CoefficientB, CoefficientH, HFamily, InitialData, PFamily, PressureField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_spec(p: PFamily) -> ProblemSpec {
        ProblemSpec::new(
            CoefficientH::new(HFamily::Linear { a: 1.0 }).unwrap(),
            CoefficientB::new(BFamily::Const { c0: 1.0 }).unwrap(),
            PressureField::new(p).unwrap(),
            InitialData::Const { c: 0.0 },
            1.0,
        )
        .unwrap()
    }

    fn field(vals: &[f64]) -> CellField {
        CellField::new(Grid::new(vals.len()).unwrap(), vals.to_vec()).unwrap()
    }

    /// Three branches written out cell by cell, independent of the flux path.
    fn transcribed_rhs(v: &[f64], p: &[f64], spec: &ProblemSpec) -> Vec<f64> {
        let n = v.len();
        let dx = 1.0 / n as f64;
        let b = |x: f64| spec.b.value(x);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let g = if i == 0 {
                (1.0 / dx) * ((v[1] - v[0]) / dx + b((v[0] + v[1]) / 2.0) * p[0])
            } else if i == n - 1 {
                -(1.0 / dx) * ((v[i] - v[i - 1]) / dx + b((v[i - 1] + v[i]) / 2.0) * p[i - 1])
            } else {
                (1.0 / dx)
                    * ((v[i + 1] - v[i]) / dx + b((v[i] + v[i + 1]) / 2.0) * p[i]
                        - ((v[i] - v[i - 1]) / dx + b((v[i - 1] + v[i]) / 2.0) * p[i - 1]))
            };
            out.push(g / spec.h.d1(v[i]));
        }
        out
    }

    #[test]
    fn flux_examples() {
        let spec = linear_spec(PFamily::Zero);
        let ones = field(&[1.0; 4]);
        let f = assemble_fluxes(&field(&[0.0; 4]), &ones, &spec).unwrap();
        assert_eq!(f.values, vec![1.0, 1.0, 1.0]);
        let zeros = field(&[0.0; 4]);
        let f = assemble_fluxes(&field(&[0.0, 1.0, 2.0, 3.0]), &zeros, &spec).unwrap();
        assert_eq!(f.values, vec![4.0, 4.0, 4.0]);
        let f = assemble_fluxes(&field(&[0.3; 4]), &zeros, &spec).unwrap();
        assert_eq!(f.values, vec![0.0, 0.0, 0.0]);
        assert!(assemble_fluxes(&field(&[0.0; 4]), &field(&[0.0; 5]), &spec).is_err());
    }

    #[test]
    fn rhs_examples() {
        let spec = linear_spec(PFamily::Const { alpha: 1.0 });
        let r = rhs(0.0, &field(&[0.0; 4]), &spec).unwrap();
        assert_eq!(r.values(), &[4.0, 0.0, 0.0, -4.0]);
        let steady = ProblemSpec::default_problem();
        let mut s = steady.clone();
        s.p = PressureField::new(PFamily::Zero).unwrap();
        let r = rhs(0.1, &field(&[0.7; 5]), &s).unwrap();
        assert!(r.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rhs_matches_transcription_on_small_grids() {
        let spec = ProblemSpec::default_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3, 4, 7] {
            let g = Grid::new(n).unwrap();
            for _ in 0..50 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let t = rng.gen_range(0.0..spec.horizon);
                let p = Discretization::new(&spec, g).pressure(t).unwrap();
                let got = rhs(t, &CellField::new(g, v.clone()).unwrap(), &spec).unwrap();
                let want = transcribed_rhs(&v, &p, &spec);
                for (a, b) in got.values().iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-15 * a.abs().max(b.abs()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn corrupted_state_is_a_hard_failure() {
        let mut spec = ProblemSpec::default_problem();
        spec.h.c1 = 10.0;
        assert!(matches!(
            rhs(0.0, &field(&[0.0; 4]), &spec),
            Err(Error::CorruptedState { cell: 1, .. })
        ));
    }

    #[test]
    fn divergence_sums_to_zero() {
        let spec = ProblemSpec::default_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3, 16, 101] {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let f = field(&v);
            let g = divergence(0.1, &f, &spec).unwrap();
            let dx = f.grid().dx();
            let total: f64 = g.values().iter().map(|x| dx * x).sum();
            let scale: f64 = g.values().iter().map(|x| dx * x.abs()).sum();
            assert!(total.abs() <= 1e-13 * scale, "{total} vs {scale}");
        }
    }

    #[test]
    fn initial_state_projections() {
        let mut spec = ProblemSpec::default_problem();
        spec.v0 = InitialData::Const { c: 1.5 };
        let v = initial_state(&spec, &Grid::new(5).unwrap()).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.5));
        spec.v0 = InitialData::Linear { a: 0.0, slope: 1.0 };
        let v = initial_state(&spec, &Grid::new(4).unwrap()).unwrap();
        assert_eq!(v.values(), &[0.125, 0.375, 0.625, 0.875]);
        spec.v0 = InitialData::Cosine {
            coeffs: vec![0.0, 1.0],
        };
        let v = initial_state(&spec, &Grid::new(3).unwrap()).unwrap();
        assert!((v.values()[0] - 0.8269933).abs() < 1e-7);
    }

    #[test]
    fn mass_examples() {
        let spec = linear_spec(PFamily::Zero);
        assert_eq!(mass(&field(&[1.0, 2.0, 3.0]), &spec), 2.0);
        let spec = ProblemSpec::default_problem();
        assert_eq!(mass(&field(&[0.0; 6]), &spec), 0.0);
    }

    #[test]
    fn constant_mobility_gives_second_difference_stencil() {
        let spec = linear_spec(PFamily::Const { alpha: 0.8 });
        let v = field(&[0.1, -0.4, 0.9, 2.0, 0.3]);
        let j = jacobian_g(0.2, &v, &spec).unwrap();
        let inv = 1.0 / (0.2 * 0.2);
        for k in 0..5 {
            let row_sum: f64 = (0..5).map(|c| j.get(k, c)).sum();
            assert!(row_sum.abs() < 1e-12);
            if k > 0 && k < 4 {
                assert!((j.diag[k] + 2.0 * inv).abs() < 1e-9);
                assert!((j.lower[k] - inv).abs() < 1e-9);
                assert!((j.upper[k] - inv).abs() < 1e-9);
            }
        }
        assert!((j.diag[0] + inv).abs() < 1e-9);
        assert!((j.diag[4] + inv).abs() < 1e-9);
    }

    #[test]
    fn energy_decays_for_linear_h_without_pressure() {
        let spec = linear_spec(PFamily::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 4, 9, 32] {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let f = field(&v);
            let r = rhs(0.0, &f, &spec).unwrap();
            let dx = f.grid().dx();
            let e: f64 = v.iter().zip(r.values()).map(|(a, b)| dx * a * b).sum();
            assert!(e <= 1e-12);
        }
    }
}
