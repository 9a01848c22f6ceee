//! Uniform grids and sampled functions with a declared left-tail model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    xmin: f64,
    xmax: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(xmin: f64, xmax: f64, n: usize) -> Result<Self> {
        if !(xmin.is_finite() && xmax.is_finite()) || xmin >= xmax {
            return Err(Error::param(format!(
                "grid bounds must satisfy xmin < xmax (got {xmin}, {xmax})"
            )));
        }
        if n < 3 {
            return Err(Error::param(format!("grid needs at least 3 points (got {n})")));
        }
        Ok(Grid {
            xmin,
            xmax,
            n,
            h: (xmax - xmin) / (n - 1) as f64,
        })
    }

    /// Grid with spacing as close as possible to `h`; the actual spacing is
    /// `(xmax - xmin) / (n - 1)` for the rounded point count.
    pub fn with_spacing(xmin: f64, xmax: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("grid spacing must be positive (got {h})")));
        }
        let cells = ((xmax - xmin) / h).round();
        if !cells.is_finite() || cells < 2.0 {
            return Err(Error::param(format!(
                "spacing {h} too coarse for [{xmin}, {xmax}]"
            )));
        }
        Grid::new(xmin, xmax, cells as usize + 1)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.xmax
        } else {
            self.xmin + i as f64 * self.h
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point nearest to `x`, if `x` lies on the grid to
    /// within 1e-9 of a cell.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let s = (x - self.xmin) / self.h;
        let i = s.round();
        if i < 0.0 || i > (self.n - 1) as f64 || (s - i).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }
}

/// Behaviour of a function to the left of its grid, `y < xmin`.
///
/// Only the derivative of the tail enters the one-sided fractional derivative;
/// continuity with the first grid value is the caller's business.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    Zero,
    Constant { level: f64 },
    /// `f(y) = level + amplitude * exp(rate * y)` for `y < xmin`.
    ExponentialApproach { level: f64, amplitude: f64, rate: f64 },
}

impl TailModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TailModel::Zero => Ok(()),
            TailModel::Constant { level } => {
                if level.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("tail level must be finite"))
                }
            }
            TailModel::ExponentialApproach {
                level,
                amplitude,
                rate,
            } => {
                if !(level.is_finite() && amplitude.is_finite()) {
                    Err(Error::param("tail level and amplitude must be finite"))
                } else if !(rate.is_finite() && rate > 0.0) {
                    Err(Error::param(format!("tail decay rate must be positive (got {rate})")))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        match *self {
            TailModel::Zero => 0.0,
            TailModel::Constant { level } => level,
            TailModel::ExponentialApproach {
                level,
                amplitude,
                rate,
            } => level + amplitude * (rate * y).exp(),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            TailModel::ExponentialApproach {
                amplitude, rate, ..
            } => amplitude * rate * (rate * y).exp(),
            _ => 0.0,
        }
    }

    /// Exponential tail attached at `x0` that matches the value `f0` there.
    pub fn exponential_through(level: f64, rate: f64, x0: f64, f0: f64) -> TailModel {
        TailModel::ExponentialApproach {
            level,
            amplitude: (f0 - level) * (-rate * x0).exp(),
            rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    tail: TailModel,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::param(format!(
                "grid has {} points but {} values were given",
                grid.n(),
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        tail.validate()?;
        Ok(GridFunction { grid, values, tail })
    }

    pub fn from_fn(grid: Grid, tail: TailModel, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        GridFunction::new(grid, values, tail)
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.n()],
            tail: TailModel::Zero,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid-rule L² norm over the grid.
    pub fn l2_norm(&self) -> f64 {
        trapezoid_sq(&self.values, self.grid.h()).sqrt()
    }
}

pub(crate) fn trapezoid_sq(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values.iter().map(|v| v * v).sum();
    h * (inner - 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]))
}

/// Fourth-order finite-difference derivative (central in the interior,
/// one-sided five-point stencils at the two ends on each side).
pub(crate) fn derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "fourth-order derivative needs at least 5 points");
    let f = values;
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        / (12.0 * h);
    d[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
    d
}
