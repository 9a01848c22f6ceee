//! The singular quadratic form
//!
//! ```text
//! I[v] = ∫_{-∞}^0 ∫_{-∞}^ξ v'(ξ) v'(y) (ξ - y)^{-α} dy dξ
//! ```
//!
//! on functions of the left half-line, evaluated two independent ways:
//! directly (product integration of the singular kernel) and through the
//! mollifier representation `|ξ-y|^{-α} = ∫ t^α ∫ h(t(z-ξ)) h(t(z-y)) dz dt`,
//! which writes `I[v]` as an integral of squares.

use std::num::NonZeroUsize;

use gauss_quad::{GaussJacobi, GaussLegendre};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charroots::WaveParams;
use crate::error::{Error, Result};
use crate::fracops::{apply_dalpha, exponential_tail_response, FracParams};
use crate::grid::{derivative4, trapezoid_sq, Grid, GridFunction, TailModel};

/// A function on `(-∞, 0]`: samples on `[-L, 0]` plus the tail model of the
/// inner grid function for `ξ < -L`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineFunction {
    inner: GridFunction,
    boundary_value: f64,
    in_h2_0: bool,
}

impl HalfLineFunction {
    /// Wraps `inner`; the grid must end at 0. `v(0)` is read off the last sample.
    pub fn new(inner: GridFunction) -> Result<Self> {
        if inner.grid().xmax() != 0.0 {
            return Err(Error::param(format!(
                "half-line functions live on [-L, 0] (grid ends at {})",
                inner.grid().xmax()
            )));
        }
        if inner.grid().n() < 5 {
            return Err(Error::param("half-line functions need at least 5 samples"));
        }
        let boundary_value = *inner.values().last().unwrap();
        Ok(HalfLineFunction {
            inner,
            boundary_value,
            in_h2_0: false,
        })
    }

    /// Same as [`HalfLineFunction::new`] but additionally asserts `v(0) = 0`.
    pub fn new_h2_0(inner: GridFunction) -> Result<Self> {
        let mut v = HalfLineFunction::new(inner)?;
        let scale = v.inner.max_abs();
        if v.boundary_value.abs() > 1e-12 * scale {
            return Err(Error::param(format!(
                "H2_0 membership requires v(0) = 0 (got {})",
                v.boundary_value
            )));
        }
        v.boundary_value = 0.0;
        v.in_h2_0 = true;
        Ok(v)
    }

    pub fn from_fn(grid: Grid, tail: TailModel, f: impl Fn(f64) -> f64) -> Result<Self> {
        HalfLineFunction::new(GridFunction::from_fn(grid, tail, f)?)
    }

    pub fn inner(&self) -> &GridFunction {
        &self.inner
    }

    pub fn grid(&self) -> &Grid {
        self.inner.grid()
    }

    pub fn tail(&self) -> TailModel {
        self.inner.tail()
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    pub fn is_h2_0(&self) -> bool {
        self.in_h2_0
    }

    /// Fourth-order finite-difference derivative on the grid.
    pub fn slope(&self) -> Vec<f64> {
        derivative4(self.inner.values(), self.grid().h())
    }

    fn check_decaying(&self) -> Result<()> {
        match self.tail() {
            TailModel::Constant { level } if level != 0.0 => Err(Error::param(format!(
                "tail level {level} does not decay"
            ))),
            TailModel::ExponentialApproach { level, .. } if level != 0.0 => Err(Error::param(
                format!("tail level {level} does not decay"),
            )),
            _ => Ok(()),
        }
    }

    /// `(A e^{r x0}, r)` for an exponential tail: derivative of the tail is
    /// `jA r e^{r(y - x0)}` with `jA` the junction amplitude.
    fn tail_junction(&self) -> Option<(f64, f64)> {
        match self.tail() {
            TailModel::ExponentialApproach {
                amplitude, rate, ..
            } => Some((amplitude * (rate * self.grid().xmin()).exp(), rate)),
            _ => None,
        }
    }

    /// `‖v'‖_{L²(-∞,0)}`, trapezoid on the grid plus the exact tail part.
    pub fn slope_l2_norm(&self) -> f64 {
        let d = self.slope();
        let mut s = trapezoid_sq(&d, self.grid().h());
        if let Some((a, r)) = self.tail_junction() {
            s += a * a * r / 2.0;
        }
        s.sqrt()
    }

    /// `‖v‖_{H¹(-∞,0)}`.
    pub fn h1_norm(&self) -> f64 {
        let mut s = trapezoid_sq(self.inner.values(), self.grid().h());
        if let Some((a, r)) = self.tail_junction() {
            s += a * a / (2.0 * r);
        }
        let d = self.slope_l2_norm();
        (s + d * d).sqrt()
    }
}

/// `F(x) = v'(x) θ(-x)` on the symmetric grid `[-L, L]`.
pub fn heaviside_slope(v: &HalfLineFunction) -> Result<GridFunction> {
    let g = v.grid();
    let n = g.n();
    let full = Grid::new(g.xmin(), -g.xmin(), 2 * n - 1)?;
    let mut values = v.slope();
    values.extend(std::iter::repeat(0.0).take(n - 1));
    let tail = match v.tail() {
        TailModel::ExponentialApproach {
            amplitude, rate, ..
        } => TailModel::ExponentialApproach {
            level: 0.0,
            amplitude: amplitude * rate,
            rate,
        },
        _ => TailModel::Zero,
    };
    GridFunction::new(full, values, tail)
}

/// Odd reflection `v*(x) = -v(-x)` for `x > 0` onto `[-L, L]`.
///
/// With trapezoid weights and `v(0) = 0` the discrete norms satisfy
/// `‖v*‖² = 2‖v‖²` exactly: the shared node carries a zero value.
pub fn reflect_odd(v: &HalfLineFunction) -> Result<GridFunction> {
    if v.boundary_value() != 0.0 && !v.is_h2_0() {
        let scale = v.inner().max_abs();
        if v.boundary_value().abs() > 1e-12 * scale {
            return Err(Error::param(format!(
                "odd reflection needs v(0) = 0 (got {})",
                v.boundary_value()
            )));
        }
    }
    let g = v.grid();
    let n = g.n();
    let full = Grid::new(g.xmin(), -g.xmin(), 2 * n - 1)?;
    let vals = v.inner().values();
    let mut values = vals.to_vec();
    values[n - 1] = 0.0;
    values.extend((0..n - 1).rev().map(|i| -vals[i]));
    GridFunction::new(full, values, v.tail())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadMethod {
    Direct,
    KernelRepresentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadFormResult {
    pub value: f64,
    pub method: QuadMethod,
    pub estimated_error: f64,
}

/// Product-integration weights for `∫ g(y) (x_i - y)^{-α} dy` with `g`
/// piecewise linear. Cell `k` (distance `(k-1)h..kh` from `x_i`) contributes
/// `near[k] * g(right node) + far[k] * g(left node)`.
struct WedgeWeights {
    near: Vec<f64>,
    far: Vec<f64>,
}

impl WedgeWeights {
    fn new(alpha: f64, h: f64, n: usize) -> Self {
        let mut near = vec![0.0; n + 1];
        let mut far = vec![0.0; n + 1];
        let b1 = 1.0 - alpha;
        let b2 = 2.0 - alpha;
        let c0 = h.powf(b1) / b1;
        let c1 = h.powf(b1) / b2;
        for k in 1..=n {
            let kf = k as f64;
            let km = kf - 1.0;
            let m0 = c0 * (kf.powf(b1) - km.powf(b1));
            // ∫ ((s - (k-1)h)/h) s^{-α} ds over the cell
            let m1 = c1 * (kf.powf(b2) - km.powf(b2)) - km * m0;
            near[k] = m0 - m1;
            far[k] = m1;
        }
        WedgeWeights { near, far }
    }
}

/// Nodal values of `∫_{-∞}^{x_i} g(y)(x_i - y)^{-α} dy` for piecewise-linear `g`
/// plus an exponential tail of `g` given by its junction value and rate.
fn wedge_inner(g: &[f64], ww: &WedgeWeights, tail: Option<(f64, f64)>, p: &FracParams, h: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 1..=i {
            acc += ww.near[k] * g[i + 1 - k] + ww.far[k] * g[i - k];
        }
        if let Some((a, r)) = tail {
            // ∫_{s0}^∞ a e^{-r(s - s0)} s^{-α} ds with s0 = i h
            acc += a / r * exponential_tail_response(p, r, i as f64 * h) / p.d_alpha();
        }
        *o = acc;
    }
    out
}

fn wedge_form_once(
    du: &[f64],
    dv: &[f64],
    tails: (Option<(f64, f64)>, Option<(f64, f64)>),
    p: &FracParams,
    h: f64,
) -> f64 {
    let n = dv.len();
    let ww = WedgeWeights::new(p.alpha(), h, n);
    let inner = wedge_inner(dv, &ww, tails.1, p, h);
    let prod: Vec<f64> = du.iter().zip(&inner).map(|(a, b)| a * b).collect();
    let mut total = h * (prod.iter().sum::<f64>() - 0.5 * (prod[0] + prod[n - 1]));
    // both points in the tail: ∫_{-∞}^{x0} u'(ξ) ∫_{-∞}^{ξ} v'(y)(ξ-y)^{-α} dy dξ
    if let (Some((au, ru)), Some((av, rv))) = tails {
        // v' tail at ξ is av e^{rv(ξ-x0)}; full-tail inner integral gives
        // av e^{rv(ξ-x0)} rv^{α-1} Γ(1-α); integrate against au e^{ru(ξ-x0)}.
        let g = crate::special::gamma(1.0 - p.alpha());
        total += au * av * rv.powf(p.alpha() - 1.0) * g / (ru + rv);
    }
    total
}

fn tail_derivative(v: &HalfLineFunction) -> Option<(f64, f64)> {
    v.tail_junction().map(|(a, r)| (a * r, r))
}

/// Coarse copy (every second node counted back from 0).
fn coarsen(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut out: Vec<f64> = (0..n).rev().step_by(2).map(|i| d[i]).collect();
    out.reverse();
    out
}

/// `W(u, v) = ∫_{-∞}^0 u'(ξ) ∫_{-∞}^ξ v'(y)(ξ-y)^{-α} dy dξ`; `I[v] = W(v, v)`.
///
/// Returns the fine-grid value and `|W_h - W_2h|` as the error estimate.
pub fn wedge_form(u: &HalfLineFunction, v: &HalfLineFunction, p: &FracParams) -> Result<QuadFormResult> {
    u.check_decaying()?;
    v.check_decaying()?;
    if u.grid() != v.grid() {
        return Err(Error::param("both functions must share a grid"));
    }
    let h = v.grid().h();
    let du = u.slope();
    let dv = v.slope();
    let tails = (tail_derivative(u), tail_derivative(v));
    let fine = wedge_form_once(&du, &dv, tails, p, h);
    let coarse = if dv.len() % 2 == 1 {
        // odd length: the coarse grid starts at the same x0, tails unchanged
        wedge_form_once(&coarsen(&du), &coarsen(&dv), tails, p, 2.0 * h)
    } else {
        // even length: coarse grid starts one cell later; shift the tails
        let shift = |t: Option<(f64, f64)>| t.map(|(a, r)| (a * (r * h).exp(), r));
        wedge_form_once(
            &coarsen(&du),
            &coarsen(&dv),
            (shift(tails.0), shift(tails.1)),
            p,
            2.0 * h,
        )
    };
    let scale = fine.abs().max(1e-300);
    Ok(QuadFormResult {
        value: fine,
        method: QuadMethod::Direct,
        estimated_error: (fine - coarse).abs() + 1e-14 * scale,
    })
}

/// `I[v]` by product integration in `y` (kernel moments exact against the
/// piecewise-linear interpolant of `v'`) and the trapezoid rule in `ξ`.
pub fn eval_i_direct(v: &HalfLineFunction, p: &FracParams) -> Result<QuadFormResult> {
    wedge_form(v, v, p)
}

/// `∫_{-∞}^0 v' D^α v dξ + τ/2 v'(0)² = h'(φ₋)/2 v(0)²`: returns the absolute
/// defect, using `∫ v' D^α v = d_α I[v]`.
pub fn energy_identity_residual(v: &HalfLineFunction, w: &WaveParams) -> Result<f64> {
    let i = eval_i_direct(v, w.frac())?;
    let v0 = v.boundary_value();
    let dv0 = *v.slope().last().unwrap();
    Ok((w.hprime() / 2.0 * v0 * v0 - w.frac().d_alpha() * i.value - w.tau() / 2.0 * dv0 * dv0).abs())
}

// ---------------------------------------------------------------------------
// Mollifier kernel

const BUMP_MASS: f64 = 256.0 / 315.0; // ∫_{-1}^{1} (1 - x²)^4 dx

fn bump_primitive_unit(x: f64) -> f64 {
    // ∫_{-1}^{x} (1 - s²)^4 ds
    let x2 = x * x;
    let q = |x: f64, x2: f64| {
        x * (1.0 + x2 * (-4.0 / 3.0 + x2 * (6.0 / 5.0 + x2 * (-4.0 / 7.0 + x2 / 9.0))))
    };
    q(x, x2) + BUMP_MASS / 2.0
}

/// Smooth even bump `h`, its convolution square `H = h * h`, normalised so
/// that `∫_0^∞ t^{α-1} H(t) dt = 1`.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    alpha: f64,
    halfwidth: f64,
    /// Multiplier on the raw bump `(1 - (u/w)²)^4`.
    scale: f64,
    raw_moment: f64,
    sample_points: Vec<f64>,
    h_samples: Vec<f64>,
    big_h_samples: Vec<f64>,
    mass: f64,
    jump_constant: f64,
}

impl MollifierKernel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// `∫_0^∞ t^{α-1} H(t) dt` of the un-normalised bump.
    pub fn raw_moment(&self) -> f64 {
        self.raw_moment
    }

    /// `∫ h`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `∫ (M0² 1_{u<0} - (∫_u^∞ h)²) du`: the O(t^{-3}) deficit constant of a unit jump.
    pub fn jump_constant(&self) -> f64 {
        self.jump_constant
    }

    pub fn sample_points(&self) -> &[f64] {
        &self.sample_points
    }

    pub fn h_samples(&self) -> &[f64] {
        &self.h_samples
    }

    pub fn big_h_samples(&self) -> &[f64] {
        &self.big_h_samples
    }

    #[inline]
    pub fn h(&self, u: f64) -> f64 {
        let x = u / self.halfwidth;
        if x.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - x * x;
            let s2 = s * s;
            self.scale * s2 * s2
        }
    }

    /// `∫_{-∞}^{u} h`.
    #[inline]
    fn primitive0(&self, u: f64) -> f64 {
        let x = u / self.halfwidth;
        if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            self.mass
        } else {
            self.scale * self.halfwidth * bump_primitive_unit(x)
        }
    }

    /// `∫_{-∞}^{u} s h(s) ds`.
    #[inline]
    fn primitive1(&self, u: f64) -> f64 {
        let x = u / self.halfwidth;
        if x.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - x * x;
            -self.scale * self.halfwidth * self.halfwidth * s.powi(5) / 10.0
        }
    }

    /// `H(t) = ∫ h(t - r) h(r) dr` by Gauss-Legendre on the support overlap
    /// (exact: the integrand is a polynomial there).
    pub fn big_h(&self, t: f64) -> f64 {
        let w = self.halfwidth;
        let t = t.abs();
        if t >= 2.0 * w {
            return 0.0;
        }
        let gl = GaussLegendre::new(NonZeroUsize::new(12).unwrap());
        gl.integrate(t - w, w, |r| self.h(t - r) * self.h(r))
    }
}

/// Builds the polynomial bump `(1 - (t/w)²)^4`, its convolution square, and
/// rescales `h ← h/√c` with `c = ∫_0^∞ t^{α-1} H(t) dt`.
pub fn build_kernel(p: &FracParams, bump_halfwidth: f64) -> Result<MollifierKernel> {
    if !(bump_halfwidth.is_finite() && bump_halfwidth > 0.0) {
        return Err(Error::param(format!(
            "bump half-width must be positive (got {bump_halfwidth})"
        )));
    }
    let w = bump_halfwidth;
    let mut k = MollifierKernel {
        alpha: p.alpha(),
        halfwidth: w,
        scale: 1.0,
        raw_moment: f64::NAN,
        sample_points: Vec::new(),
        h_samples: Vec::new(),
        big_h_samples: Vec::new(),
        mass: BUMP_MASS * w,
        jump_constant: f64::NAN,
    };
    let c = power_moment(&k);
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Quadrature(format!("kernel moment {c} is not positive")));
    }
    k.raw_moment = c;
    k.scale = 1.0 / c.sqrt();
    k.mass = BUMP_MASS * w * k.scale;
    let check = power_moment(&k);
    if (check - 1.0).abs() > 1e-10 {
        return Err(Error::Quadrature(format!(
            "normalised kernel moment is {check}, expected 1"
        )));
    }
    let m = 201;
    k.sample_points = (0..m).map(|i| -2.0 * w + 4.0 * w * i as f64 / (m - 1) as f64).collect();
    k.h_samples = k.sample_points.iter().map(|&t| k.h(t)).collect();
    k.big_h_samples = k.sample_points.iter().map(|&t| k.big_h(t)).collect();
    k.jump_constant = jump_constant(&k);
    Ok(k)
}

/// `∫_0^{2w} t^{α-1} H(t) dt` with a Gauss-Jacobi rule carrying the endpoint
/// power; `H` is a polynomial of degree 17 on `[0, 2w]`, so 12 nodes are exact.
pub fn power_moment(k: &MollifierKernel) -> f64 {
    let beta = k.alpha - 1.0;
    let b = 2.0 * k.halfwidth;
    let gj = GaussJacobi::new(
        NonZeroUsize::new(12).unwrap(),
        0.0.try_into().unwrap(),
        beta.try_into().unwrap(),
    );
    // the rule integrates (1 + x)^β g(x) on [-1, 1] mapped onto [0, b]
    gj.integrate(0.0, b, |t| k.big_h(t)) * (b / 2.0).powf(beta)
}

fn jump_constant(k: &MollifierKernel) -> f64 {
    let gl = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
    let m0 = k.mass;
    let phi = |u: f64| m0 - k.primitive0(u);
    let w = k.halfwidth;
    gl.integrate(-w, 0.0, |u| m0 * m0 - phi(u).powi(2)) - gl.integrate(0.0, w, |u| phi(u).powi(2))
}

/// Settings of the kernel route. `t_nodes` is the number of geometric nodes
/// between `t_min = t_min_factor / L` and `t_c = w / (2h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    pub t_nodes: usize,
    pub t_min_factor: f64,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature {
            t_nodes: 400,
            t_min_factor: 1e-3,
        }
    }
}

/// Piecewise-linear `F = v' θ(-x)` on cells ending at 0, with the exponential
/// tail sampled far enough to the left to be negligible.
struct SlopeCells {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl SlopeCells {
    fn new(v: &HalfLineFunction) -> Self {
        let g = v.grid();
        let h = g.h();
        let d = v.slope();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let mut ext = Vec::new();
        if let Some((a, r)) = tail_derivative(v) {
            let mut j = 1;
            loop {
                let val = a * (-r * h * j as f64).exp();
                if val.abs() < 1e-17 * scale || j > 1_000_000 {
                    break;
                }
                ext.push(val);
                j += 1;
            }
        }
        let extra = ext.len();
        let mut values: Vec<f64> = ext.into_iter().rev().collect();
        values.extend_from_slice(&d);
        SlopeCells {
            x0: g.xmin() - extra as f64 * h,
            h,
            values,
        }
    }

    fn length(&self) -> f64 {
        -self.x0
    }

    /// Every other node, counted from the right end at 0.
    fn coarsen(&self) -> SlopeCells {
        let values = coarsen(&self.values);
        SlopeCells {
            x0: -2.0 * self.h * (values.len() - 1) as f64,
            h: 2.0 * self.h,
            values,
        }
    }

    /// `∫ F²` of the piecewise-linear interpolant.
    fn l2_sq(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| self.h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
            .sum()
    }

    fn integral(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| 0.5 * self.h * (w[0] + w[1]))
            .sum()
    }

    fn jump(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `G_t(z) = ∫ F(ξ) h(t(z - ξ)) dξ`, exact for the piecewise-linear `F`.
    fn convolve(&self, k: &MollifierKernel, t: f64, z: f64) -> f64 {
        let reach = k.halfwidth / t;
        let ncell = self.values.len() - 1;
        let lo = ((z - reach - self.x0) / self.h).floor().max(0.0);
        let hi = ((z + reach - self.x0) / self.h).ceil().min(ncell as f64);
        if hi <= lo {
            return 0.0;
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let mut acc = 0.0;
        for j in lo..hi {
            let a = self.x0 + j as f64 * self.h;
            let b = a + self.h;
            let fa = self.values[j];
            let s = (self.values[j + 1] - fa) / self.h;
            let ua = t * (z - a);
            let ub = t * (z - b);
            let p0 = k.primitive0(ua) - k.primitive0(ub);
            let p1 = k.primitive1(ua) - k.primitive1(ub);
            acc += (fa + s * (z - a)) * p0 - s / t * p1;
        }
        acc / t
    }

    /// `∫ G_t(z)² dz` by composite Simpson on a grid of spacing `w / (8t)`.
    fn energy(&self, k: &MollifierKernel, t: f64) -> f64 {
        let reach = k.halfwidth / t;
        let za = self.x0 - reach;
        let zb = reach;
        let target = reach / 8.0;
        let mut m = ((zb - za) / target).ceil() as usize;
        if m % 2 == 1 {
            m += 1;
        }
        let m = m.max(16);
        let dz = (zb - za) / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let z = za + i as f64 * dz;
            let g = self.convolve(k, t, z);
            let wgt = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += wgt * g * g;
        }
        acc * dz / 3.0
    }
}

/// `I[v] = ½ ∫_0^∞ t^α ∫ (∫ F(ξ) h(t(z-ξ)) dξ)² dz dt` with `F = v' θ(-x)`.
///
/// The t-integral runs over geometric nodes on `[t_min, t_c]`, `t_c = w/(2h)`
/// being the largest scale at which the mollifier is still resolved by the
/// grid. Beyond `t_c` the inner energy follows
/// `∫ G_t² = M0² ‖F‖² t^{-2} - F(0⁻)² D t^{-3} + O(t^{-4})` and is integrated
/// in closed form; below `t_min` the leading term `(∫F)² H(0) / t` is used.
pub fn eval_i_kernel(
    v: &HalfLineFunction,
    k: &MollifierKernel,
    quad: &KernelQuadrature,
) -> Result<QuadFormResult> {
    v.check_decaying()?;
    if quad.t_nodes < 8 {
        return Err(Error::param("kernel quadrature needs at least 8 t-nodes"));
    }
    let cells = SlopeCells::new(v);
    let t_c = k.halfwidth / (2.0 * cells.h);
    let (value, t_err) = kernel_value(&cells, k, quad, t_c)?;
    // spatial discretisation: compare with the same evaluation at spacing 2h
    let coarse = cells.coarsen();
    let grid_err = if coarse.values.len() >= 3 {
        (value - kernel_value(&coarse, k, quad, t_c)?.0).abs()
    } else {
        0.0
    };
    Ok(QuadFormResult {
        value,
        method: QuadMethod::KernelRepresentation,
        estimated_error: t_err + grid_err,
    })
}

/// Value and t-quadrature error estimate of the kernel representation.
fn kernel_value(
    cells: &SlopeCells,
    k: &MollifierKernel,
    quad: &KernelQuadrature,
    t_c: f64,
) -> Result<(f64, f64)> {
    let a = k.alpha;
    let t_min = quad.t_min_factor / cells.length();
    if t_c <= t_min {
        return Err(Error::param("grid too coarse for the kernel t-range"));
    }
    let n_t = quad.t_nodes;
    let log_span = (t_c / t_min).ln();
    let energies: Vec<(f64, f64)> = (0..n_t)
        .map(|i| {
            let t = t_min * (log_span * i as f64 / (n_t - 1) as f64).exp();
            (t, cells.energy(k, t))
        })
        .collect();
    // ∫ t^α S(t) dt = ∫ t^{α+1} S d(ln t), trapezoid in ln t
    let integrand: Vec<f64> = energies.iter().map(|(t, s)| t.powf(a + 1.0) * s).collect();
    let trap = |stride: usize| {
        let pts: Vec<f64> = integrand.iter().step_by(stride).copied().collect();
        let m = pts.len();
        let dl = log_span * stride as f64 / (n_t - 1) as f64;
        0.5 * dl * (pts.iter().sum::<f64>() - 0.5 * (pts[0] + pts[m - 1]))
    };
    let body = trap(1);
    let body_coarse = if (n_t - 1) % 2 == 0 { trap(2) } else { body };

    let f_sq = cells.l2_sq();
    let jump = cells.jump();
    let m0 = k.mass;
    let big_tail = 0.5
        * (m0 * m0 * f_sq * t_c.powf(a - 1.0) / (1.0 - a)
            - jump * jump * k.jump_constant * t_c.powf(a - 2.0) / (2.0 - a));
    let h0 = k.big_h(0.0);
    let mass_f = cells.integral();
    let small_tail = 0.5 * mass_f * mass_f * h0 * t_min.powf(a) / a;

    // remainder beyond the two-term asymptotics, extrapolated as t^{-4}
    let (_, s_c) = energies[n_t - 1];
    let asym_c = m0 * m0 * f_sq / (t_c * t_c) - jump * jump * k.jump_constant / t_c.powi(3);
    let remainder = s_c - asym_c;
    let remainder_tail = 0.5 * remainder.abs() * t_c.powf(a + 1.0) / (3.0 - a);
    if remainder.abs() > 0.1 * asym_c.abs() {
        return Err(Error::Quadrature(format!(
            "t-grid truncation: inner energy at t_max = {t_c:.3e} is {s_c:.3e}, \
             large-t asymptote {asym_c:.3e}"
        )));
    }
    let (_, s_min) = energies[0];
    let lead_min = mass_f * mass_f * h0 / t_min;
    let value = body + big_tail + small_tail;
    let scale = value.abs().max(1e-300);
    let small_end = 0.5 * t_min.powf(a + 1.0) * (s_min - lead_min).abs();
    if small_end > 1e-3 * scale.max(1e-12) && small_end > 1e-10 {
        return Err(Error::Quadrature(format!(
            "t-grid truncation: inner energy at t_min = {t_min:.3e} is {s_min:.3e}, \
             small-t asymptote {lead_min:.3e}"
        )));
    }
    Ok((value, (body - body_coarse).abs() + remainder_tail + small_end + 1e-14 * scale))
}

/// Right-hand side of the kernel identity
/// `|ξ - y|^{-α} = ∫_0^∞ t^α ∫ h(t(z-ξ)) h(t(z-y)) dz dt`, evaluated by nested
/// quadrature that never touches `H`.
pub fn kernel_identity_rhs(k: &MollifierKernel, xi: f64, y: f64) -> f64 {
    let d = (xi - y).abs();
    let w = k.halfwidth;
    if d == 0.0 {
        return f64::INFINITY;
    }
    let t_max = 2.0 * w / d;
    let gl = GaussLegendre::new(NonZeroUsize::new(12).unwrap());
    let inner = |t: f64| {
        let r = w / t;
        let lo = (xi - r).max(y - r);
        let hi = (xi + r).min(y + r);
        if hi <= lo {
            0.0
        } else {
            gl.integrate(lo, hi, |z| k.h(t * (z - xi)) * k.h(t * (z - y)))
        }
    };
    let beta = k.alpha - 1.0;
    let gj = GaussJacobi::new(
        NonZeroUsize::new(16).unwrap(),
        0.0.try_into().unwrap(),
        beta.try_into().unwrap(),
    );
    // t^α · inner(t) = t^{α-1} · (t · inner(t))
    gj.integrate(0.0, t_max, |t| t * inner(t)) * (t_max / 2.0).powf(beta)
}

// ---------------------------------------------------------------------------
// Seeded test family

/// Reproducible random members of `H²₀(-∞, 0)`:
/// `v(ξ) = ξ e^{rξ} (a₀ + Σ_{k=1}^{3} a_k cos(kωξ) + b_k sin(kωξ))`.
///
/// `VERSION` changes whenever the generator's output for a given seed changes.
#[derive(Debug, Clone)]
pub struct RandomFamily {
    rng: ChaCha8Rng,
    grid: Grid,
}

impl RandomFamily {
    pub const VERSION: u32 = 1;

    pub fn new(seed: u64, grid: Grid) -> Result<Self> {
        if grid.xmax() != 0.0 {
            return Err(Error::param("family grid must end at 0"));
        }
        Ok(RandomFamily {
            rng: ChaCha8Rng::seed_from_u64(seed),
            grid,
        })
    }

    /// Grid `[-30, 0]` with spacing 0.05.
    pub fn default_grid() -> Grid {
        Grid::new(-30.0, 0.0, 601).expect("valid grid")
    }

    pub fn next_member(&mut self) -> Result<(HalfLineFunction, FamilyCoefficients)> {
        let rate = self.rng.gen_range(1.0..2.0);
        let omega = self.rng.gen_range(0.5..1.5);
        let a0 = self.rng.gen_range(-1.0..1.0);
        let mut cos = [0.0; 3];
        let mut sin = [0.0; 3];
        for k in 0..3 {
            cos[k] = self.rng.gen_range(-1.0..1.0);
            sin[k] = self.rng.gen_range(-1.0..1.0);
        }
        let coef = FamilyCoefficients {
            rate,
            omega,
            a0,
            cos,
            sin,
        };
        let x0 = self.grid.xmin();
        let tail = TailModel::exponential_through(0.0, rate, x0, coef.eval(x0));
        let inner = GridFunction::from_fn(self.grid, tail, |x| coef.eval(x))?;
        Ok((HalfLineFunction::new_h2_0(inner)?, coef))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyCoefficients {
    pub rate: f64,
    pub omega: f64,
    pub a0: f64,
    pub cos: [f64; 3],
    pub sin: [f64; 3],
}

impl FamilyCoefficients {
    pub fn eval(&self, x: f64) -> f64 {
        let mut s = self.a0;
        for k in 0..3 {
            let arg = (k + 1) as f64 * self.omega * x;
            s += self.cos[k] * arg.cos() + self.sin[k] * arg.sin();
        }
        x * (self.rate * x).exp() * s
    }
}

/// `d_α |I[v]| <= ‖v'‖_{L²(-∞,0)} ‖D^α v*‖_{L²}`: returns `(lhs, rhs)`, with
/// `D^α v*` from the L1 scheme on the odd reflection.
pub fn cauchy_schwarz_sides(v: &HalfLineFunction, p: &FracParams) -> Result<(f64, f64)> {
    let i = eval_i_direct(v, p)?;
    let star = reflect_odd(v)?;
    let d = apply_dalpha(&star, p)?;
    Ok((p.d_alpha() * i.value.abs(), v.slope_l2_norm() * d.l2_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xexp(l: f64, h: f64) -> HalfLineFunction {
        let g = Grid::with_spacing(-l, 0.0, h).unwrap();
        let x0 = g.xmin();
        let tail = TailModel::exponential_through(0.0, 1.0, x0, x0 * x0.exp());
        HalfLineFunction::new_h2_0(GridFunction::from_fn(g, tail, |x| x * x.exp()).unwrap()).unwrap()
    }

    #[test]
    fn half_line_validation() {
        let g = Grid::new(-1.0, 1.0, 11).unwrap();
        assert!(HalfLineFunction::from_fn(g, TailModel::Zero, |x| x).is_err());
        let g = Grid::new(-1.0, 0.0, 11).unwrap();
        let f = GridFunction::from_fn(g, TailModel::Zero, |x| x + 1.0).unwrap();
        assert!(HalfLineFunction::new_h2_0(f.clone()).is_err());
        assert_eq!(HalfLineFunction::new(f).unwrap().boundary_value(), 1.0);
    }

    #[test]
    fn heaviside_slope_examples() {
        let g = Grid::new(-5.0, 0.0, 101).unwrap();
        let zero = HalfLineFunction::from_fn(g, TailModel::Zero, |_| 0.0).unwrap();
        assert!(heaviside_slope(&zero).unwrap().values().iter().all(|&v| v == 0.0));

        let lin = HalfLineFunction::from_fn(g, TailModel::Zero, |x| x).unwrap();
        let f = heaviside_slope(&lin).unwrap();
        for (x, fx) in f.grid().points().iter().zip(f.values()) {
            let want = if *x <= 0.0 { 1.0 } else { 0.0 };
            assert!((fx - want).abs() < 1e-10, "x={x}");
        }

        let v = xexp(5.0, 0.05);
        let f = heaviside_slope(&v).unwrap();
        for (x, fx) in f.grid().points().iter().zip(f.values()) {
            let want = if *x <= 0.0 { (1.0 + x) * x.exp() } else { 0.0 };
            assert!((fx - want).abs() < 1e-5, "x={x} {fx} {want}");
        }
    }

    #[test]
    fn reflect_odd_examples() {
        let g = Grid::new(-4.0, 0.0, 401).unwrap();
        let zero = HalfLineFunction::from_fn(g, TailModel::Zero, |_| 0.0).unwrap();
        assert!(reflect_odd(&zero).unwrap().values().iter().all(|&v| v == 0.0));
        let v = xexp(4.0, 0.01);
        let s = reflect_odd(&v).unwrap();
        let i1 = s.grid().index_of(1.0).unwrap();
        assert!((s.values()[i1] - (-1f64).exp()).abs() < 1e-12);
        assert!((s.values()[i1] - 0.3679).abs() < 1e-4);
        let ratio = s.l2_norm().powi(2) / v.inner().l2_norm().powi(2);
        assert!((ratio - 2.0).abs() < 1e-10);
        let g = Grid::new(-1.0, 0.0, 11).unwrap();
        let bad = HalfLineFunction::from_fn(g, TailModel::Zero, |x| x + 1.0).unwrap();
        assert!(reflect_odd(&bad).is_err());
    }

    #[test]
    fn direct_zero_and_xexp() {
        let p = FracParams::new(0.5).unwrap();
        let g = Grid::new(-10.0, 0.0, 101).unwrap();
        let zero = HalfLineFunction::from_fn(g, TailModel::Zero, |_| 0.0).unwrap();
        assert_eq!(eval_i_direct(&zero, &p).unwrap().value, 0.0);
        // frozen adaptive-quadrature oracle for I[ξ e^ξ] at α = 1/2
        let oracle = 0.221_556_731_363_189_5;
        for &h in &[0.02, 0.005, 0.002] {
            let r = eval_i_direct(&xexp(30.0, h), &p).unwrap();
            assert!((r.value - oracle).abs() <= r.estimated_error, "{r:?}");
        }
        let r = eval_i_direct(&xexp(30.0, 0.002), &p).unwrap();
        assert!((r.value - oracle).abs() < 1e-5 * oracle, "{r:?}");
    }

    #[test]
    fn kernel_normalisation_and_evenness() {
        for &alpha in &[0.25, 0.5, 0.75] {
            let p = FracParams::new(alpha).unwrap();
            let k = build_kernel(&p, 1.0).unwrap();
            assert!((power_moment(&k) - 1.0).abs() <= 1e-10);
            let hs = k.big_h_samples();
            let m = hs.len();
            for i in 0..m {
                assert!((hs[i] - hs[m - 1 - i]).abs() <= 1e-14);
                assert!(hs[i] >= 0.0);
                assert!((k.h_samples()[i] - k.h_samples()[m - 1 - i]).abs() <= 1e-14);
            }
        }
        let p = FracParams::new(0.5).unwrap();
        assert!(build_kernel(&p, 0.0).is_err());
    }

    #[test]
    fn kernel_identity_spot_check() {
        let p = FracParams::new(0.5).unwrap();
        let k = build_kernel(&p, 1.0).unwrap();
        let rhs = kernel_identity_rhs(&k, -1.0, -2.0);
        assert!((rhs - 1.0).abs() < 1e-3, "{rhs}");
        let rhs = kernel_identity_rhs(&k, 0.3, -0.2);
        assert!((rhs - 0.5f64.powf(-0.5)).abs() < 1e-3 * 0.5f64.powf(-0.5), "{rhs}");
    }

    #[test]
    fn kernel_large_t_asymptotics() {
        let p = FracParams::new(0.5).unwrap();
        let k = build_kernel(&p, 1.0).unwrap();
        let v = xexp(20.0, 0.01);
        let cells = SlopeCells::new(&v);
        let t = 40.0;
        let s = cells.energy(&k, t);
        let two_term = k.mass().powi(2) * cells.l2_sq() / (t * t)
            - cells.jump().powi(2) * k.jump_constant() / t.powi(3);
        let one_term = k.mass().powi(2) * cells.l2_sq() / (t * t);
        assert!((s - two_term).abs() < 0.05 * (s - one_term).abs(), "{s} {two_term} {one_term}");
    }

    #[test]
    fn kernel_matches_direct_on_xexp() {
        let p = FracParams::new(0.5).unwrap();
        let k = build_kernel(&p, 1.0).unwrap();
        let v = xexp(20.0, 0.02);
        let d = eval_i_direct(&v, &p).unwrap();
        let kr = eval_i_kernel(&v, &k, &KernelQuadrature::default()).unwrap();
        let tol = (3.0 * (d.estimated_error + kr.estimated_error)).max(1e-3);
        assert!((d.value - kr.value).abs() <= tol, "{d:?} {kr:?}");
        let zero = HalfLineFunction::from_fn(*v.grid(), TailModel::Zero, |_| 0.0).unwrap();
        assert_eq!(eval_i_kernel(&zero, &k, &KernelQuadrature::default()).unwrap().value, 0.0);
    }

    #[test]
    fn exponential_energy_value() {
        // d_α I[e^{λ·}] = λ^α / 2
        for &(alpha, lambda) in &[(0.5, 1.0), (0.25, 0.7), (0.75, 1.3)] {
            let p = FracParams::new(alpha).unwrap();
            let g = Grid::with_spacing(-12.0, 0.0, 0.001).unwrap();
            let tail = TailModel::ExponentialApproach {
                level: 0.0,
                amplitude: 1.0,
                rate: lambda,
            };
            let v = HalfLineFunction::from_fn(g, tail, |x| (lambda * x).exp()).unwrap();
            let i = eval_i_direct(&v, &p).unwrap();
            let want = lambda.powf(alpha) / 2.0;
            assert!((p.d_alpha() * i.value - want).abs() < 1e-6, "{} {want}", p.d_alpha() * i.value);
        }
    }

    #[test]
    fn family_is_reproducible() {
        let g = RandomFamily::default_grid();
        let mut a = RandomFamily::new(7, g).unwrap();
        let mut b = RandomFamily::new(7, g).unwrap();
        for _ in 0..3 {
            let (va, ca) = a.next_member().unwrap();
            let (vb, cb) = b.next_member().unwrap();
            assert_eq!(ca, cb);
            assert_eq!(va, vb);
            assert!(va.is_h2_0());
        }
    }
}
