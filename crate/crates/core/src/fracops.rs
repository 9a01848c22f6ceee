//! One-sided Caputo-type fractional derivative
//!
//! ```text
//! D^α f(x) = d_α ∫_{-∞}^x f'(y) (x - y)^{-α} dy,   d_α = 1 / Γ(1 - α),
//! ```
//!
//! discretised with the L1 product-integration rule on a uniform grid, plus
//! Fourier-side helpers (symbol, Sobolev norms).

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TailModel};
use crate::special::{gamma, upper_gamma_scaled};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    alpha: f64,
    d_alpha: f64,
}

impl FracParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!(
                "fractional order alpha must lie in (0, 1) (got {alpha})"
            )));
        }
        Ok(FracParams {
            alpha,
            d_alpha: 1.0 / gamma(1.0 - alpha),
        })
    }

    /// Rebuilds from stored values, checking `d_alpha` against `1/Γ(1-α)`.
    pub fn from_parts(alpha: f64, d_alpha: f64) -> Result<Self> {
        let p = FracParams::new(alpha)?;
        if ((d_alpha - p.d_alpha) / p.d_alpha).abs() > 1e-14 {
            return Err(Error::param(format!(
                "d_alpha = {d_alpha} does not match 1/Gamma(1 - alpha) = {}",
                p.d_alpha
            )));
        }
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }
}

/// L1 weights for a fixed order and spacing.
///
/// For grid samples `f_0..f_{n-1}` the on-grid part of `D^α f(x_i)` is
/// `Σ_{m<i} w[i-1-m] (f_{m+1} - f_m)` with
/// `w[k] = h^{-α} / Γ(2-α) * ((k+1)^{1-α} - k^{1-α})`.
#[derive(Debug, Clone)]
pub struct L1Stencil {
    alpha: f64,
    weights: Vec<f64>,
}

impl L1Stencil {
    pub fn new(p: &FracParams, h: f64, n: usize) -> Self {
        let a = p.alpha();
        let scale = h.powf(-a) / gamma(2.0 - a);
        let weights = (0..n)
            .map(|k| {
                let k = k as f64;
                scale * ((k + 1.0).powf(1.0 - a) - k.powf(1.0 - a))
            })
            .collect();
        L1Stencil { alpha: a, weights }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// On-grid part of the derivative at every node.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        assert!(n <= self.weights.len() + 1);
        let diffs: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate().skip(1) {
            // w[i-1-m] * d[m], m = 0..i
            let w = &self.weights[..i];
            let d = &diffs[..i];
            *o = w.iter().rev().zip(d).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Matrix entry: coefficient of `f_j` in the on-grid part at node `i`.
    #[inline]
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        if j > i {
            return 0.0;
        }
        let mut c = 0.0;
        if j >= 1 {
            c += self.weights[i - j];
        }
        if j < i {
            c -= self.weights[i - 1 - j];
        }
        c
    }
}

/// `D^α` at distance `s >= 0` to the right of the tail junction, for a tail
/// `A e^{r y}` whose value at the junction is 1: `r^α e^{r s} Γ(1-α, r s) / Γ(1-α)`.
pub fn exponential_tail_response(p: &FracParams, rate: f64, s: f64) -> f64 {
    let a = p.alpha();
    rate.powf(a) * upper_gamma_scaled(1.0 - a, rate * s) * p.d_alpha()
}

/// Tail contribution `d_α ∫_{-∞}^{xmin} f'(y)(x_i - y)^{-α} dy` at every node.
pub(crate) fn tail_contribution(f: &GridFunction, p: &FracParams) -> Vec<f64> {
    let grid = f.grid();
    match f.tail() {
        TailModel::Zero | TailModel::Constant { .. } => vec![0.0; grid.n()],
        TailModel::ExponentialApproach {
            amplitude, rate, ..
        } => {
            let x0 = grid.xmin();
            let at_junction = amplitude * (rate * x0).exp();
            (0..grid.n())
                .map(|i| at_junction * exponential_tail_response(p, rate, grid.x(i) - x0))
                .collect()
        }
    }
}

pub fn apply_dalpha(f: &GridFunction, p: &FracParams) -> Result<GridFunction> {
    let grid = *f.grid();
    let stencil = L1Stencil::new(p, grid.h(), grid.n());
    let mut g = stencil.apply(f.values());
    for (gi, ti) in g.iter_mut().zip(tail_contribution(f, p)) {
        *gi += ti;
    }
    let tail = match f.tail() {
        TailModel::ExponentialApproach {
            amplitude, rate, ..
        } => TailModel::ExponentialApproach {
            level: 0.0,
            amplitude: amplitude * rate.powf(p.alpha()),
            rate,
        },
        _ => TailModel::Zero,
    };
    GridFunction::new(grid, g, tail)
}

/// Exact multiplier `λ^α` with `D^α e^{λξ} = λ^α e^{λξ}`.
pub fn dalpha_of_exponential(lambda: f64, p: &FracParams) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param(format!("exponent must be positive (got {lambda})")));
    }
    Ok(lambda.powf(p.alpha()))
}

/// `(ik)^α` on the principal branch.
pub fn fourier_symbol(k: f64, p: &FracParams) -> Complex64 {
    if k == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = p.alpha();
    Complex64::from_polar(k.abs().powf(a), k.signum() * a * std::f64::consts::FRAC_PI_2)
}

/// Unitary DFT of the grid samples: `(k_m, û_m)` with `û ≈ (2π)^{-1/2} ∫ u e^{-ikx} dx`
/// up to a phase. Frequencies are in FFT order.
pub(crate) fn unitary_spectrum(f: &GridFunction) -> Vec<(f64, Complex64)> {
    let n = f.grid().n();
    let h = f.grid().h();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let scale = h / (2.0 * std::f64::consts::PI).sqrt();
    buf.into_iter()
        .enumerate()
        .map(|(m, c)| {
            let mm = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            (mm * dk, c * scale)
        })
        .collect()
}

/// Discrete `‖(1+k²)^{s/2} û‖_{L²}` (or `‖|k|^s û‖` when `homogeneous`).
/// The samples are treated as one period, so `f` must decay at both grid ends.
pub fn sobolev_norm(f: &GridFunction, s: f64, homogeneous: bool) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::param(format!("Sobolev index must be >= 0 (got {s})")));
    }
    let n = f.grid().n();
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * f.grid().h());
    let sum: f64 = unitary_spectrum(f)
        .into_iter()
        .map(|(k, c)| {
            let w = if homogeneous {
                if k == 0.0 {
                    if s == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    k.abs().powf(2.0 * s)
                }
            } else {
                (1.0 + k * k).powf(s)
            };
            w * c.norm_sqr()
        })
        .sum();
    Ok((sum * dk).sqrt())
}
