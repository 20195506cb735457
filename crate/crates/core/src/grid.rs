//! Uniform grids on (0, 1), piecewise-constant cell fields and the discrete
//! operators built from backward differences of cell means.

use crate::error::{Error, Result};
use crate::quadrature::GAUSS5;

/// Uniform partition of (0, 1) into `n` control volumes.
///
/// Cell `i` (1-based) is `[x_{i-1}, x_i)` with `x_i = i * dx`; the last cell
/// is closed on the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::GridTooSmall(n));
        }
        Ok(Self {
            n,
            dx: 1.0 / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node `x_i`, `i = 0..=n`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            1.0
        } else {
            i as f64 * self.dx
        }
    }

    /// Bounds of the cell with 0-based index `k`.
    pub fn cell_bounds(&self, k: usize) -> (f64, f64) {
        (self.node(k), self.node(k + 1))
    }

    /// Centre of the cell with 0-based index `k`.
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dx
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }
}

/// Cell means of a piecewise-constant function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Length {
                what: "cell field",
                expected: grid.n,
                got: values.len(),
            });
        }
        if let Some((k, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { cell: k + 1, value: v });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Checks that both fields live on grids with the same cell count.
    pub fn check_grid(&self, other: &CellField) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    /// `self - other`, cellwise.
    pub fn sub(&self, other: &CellField) -> Result<CellField> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        CellField::new(self.grid, values)
    }

    /// Repeats every value `m` times, giving the same function on the grid
    /// refined by `m`.
    pub fn inject(&self, m: usize) -> Result<CellField> {
        if m == 0 {
            return Err(Error::InvalidArgument("refinement factor must be positive".into()));
        }
        let fine = Grid::new(self.grid.n * m)?;
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, m))
            .collect();
        Ok(CellField { grid: fine, values })
    }
}

/// Which discrete operator produced a [`DerivedField`]; fixes the cells on
/// which it is meaningful. Cells outside the support hold exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedKind {
    /// Backward difference, cells 2..=n.
    Delta,
    /// Backward midpoint, cells 2..=n.
    Midpoint,
    /// Backward difference extended by 0 on cell 1.
    Tilde,
    /// Second difference, cells 2..=n-1.
    Hat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedField {
    pub field: CellField,
    pub kind: DerivedKind,
}

impl DerivedField {
    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// 0-based index range of the cells in the support.
    pub fn support(&self) -> std::ops::Range<usize> {
        let n = self.field.grid.n;
        match self.kind {
            DerivedKind::Delta | DerivedKind::Midpoint | DerivedKind::Tilde => 1..n,
            DerivedKind::Hat => 1..n - 1,
        }
    }
}

fn backward(v: &CellField, kind: DerivedKind, op: impl Fn(f64, f64) -> f64) -> DerivedField {
    let mut out = vec![0.0; v.grid.n];
    for k in 1..v.grid.n {
        out[k] = op(v.values[k], v.values[k - 1]);
    }
    DerivedField {
        field: CellField {
            grid: v.grid,
            values: out,
        },
        kind,
    }
}

/// `(v_i - v_{i-1}) / dx` on cells 2..=n.
pub fn delta(v: &CellField) -> DerivedField {
    let dx = v.grid.dx;
    backward(v, DerivedKind::Delta, |a, b| (a - b) / dx)
}

/// `(v_i + v_{i-1}) / 2` on cells 2..=n.
pub fn midpoint(v: &CellField) -> DerivedField {
    backward(v, DerivedKind::Midpoint, |a, b| (a + b) / 2.0)
}

/// Piecewise-constant approximation of the first derivative: the backward
/// difference, zero on the first cell.
pub fn tilde(v: &CellField) -> DerivedField {
    let dx = v.grid.dx;
    backward(v, DerivedKind::Tilde, |a, b| (a - b) / dx)
}

/// Piecewise-constant approximation of the second derivative:
/// `(v_{i+1} - 2 v_i + v_{i-1}) / dx^2` on cells 2..=n-1, zero on the first
/// and last cell.
pub fn hat(v: &CellField) -> DerivedField {
    let n = v.grid.n;
    let dx2 = v.grid.dx * v.grid.dx;
    let mut out = vec![0.0; n];
    for k in 1..n - 1 {
        out[k] = (v.values[k + 1] - 2.0 * v.values[k] + v.values[k - 1]) / dx2;
    }
    DerivedField {
        field: CellField {
            grid: v.grid,
            values: out,
        },
        kind: DerivedKind::Hat,
    }
}

/// Functions whose cell means are available in closed form.
pub trait ExactCellMean {
    /// Mean of the function over `[a, b]`.
    fn mean_over(&self, a: f64, b: f64) -> f64;
}

fn collect_means(grid: &Grid, mean: impl Fn(f64, f64) -> f64) -> Result<CellField> {
    let mut values = Vec::with_capacity(grid.n);
    for k in 0..grid.n {
        let (a, b) = grid.cell_bounds(k);
        let m = mean(a, b);
        if !m.is_finite() {
            return Err(Error::NonFinite { cell: k + 1, value: m });
        }
        values.push(m);
    }
    Ok(CellField {
        grid: *grid,
        values,
    })
}

/// Cell averages of an arbitrary function by 5-point Gauss–Legendre on each
/// cell (exact up to polynomial degree 9).
pub fn cell_average<F: Fn(f64) -> f64>(f: F, grid: &Grid) -> Result<CellField> {
    collect_means(grid, |a, b| GAUSS5.integrate(a, b, &f) / (b - a))
}

/// Cell averages of a function with a closed-form mean.
pub fn cell_average_exact<F: ExactCellMean + ?Sized>(f: &F, grid: &Grid) -> Result<CellField> {
    collect_means(grid, |a, b| f.mean_over(a, b))
}

/// Averages a fine field over the cells of a coarser nested grid.
pub fn restrict(fine: &CellField, coarse: &Grid) -> Result<CellField> {
    let nf = fine.grid.n;
    if !nf.is_multiple_of(coarse.n) {
        return Err(Error::NonNested {
            fine: nf,
            coarse: coarse.n,
        });
    }
    let m = nf / coarse.n;
    let values = fine
        .values
        .chunks_exact(m)
        .map(|c| c.iter().sum::<f64>() / m as f64)
        .collect();
    Ok(CellField {
        grid: *coarse,
        values,
    })
}
