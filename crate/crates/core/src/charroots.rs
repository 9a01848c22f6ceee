//! Characteristic function `P(z) = τ z² + z^α - h'(φ₋)` of the linearisation
//! at the left far-field state, and its roots on the principal branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::FracParams;

/// Far-field data of a travelling wave. Speed and slope are derived:
/// `c = φ₊ + φ₋` (Rankine-Hugoniot) and `h'(φ₋) = φ₋ - φ₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    phi_minus: f64,
    phi_plus: f64,
    tau: f64,
    frac: FracParams,
    c: f64,
    hprime: f64,
}

impl WaveParams {
    pub fn new(phi_minus: f64, phi_plus: f64, tau: f64, alpha: f64) -> Result<Self> {
        let frac = FracParams::new(alpha)?;
        if !(phi_minus.is_finite() && phi_plus.is_finite()) {
            return Err(Error::param("far-field states must be finite"));
        }
        if phi_minus <= phi_plus {
            return Err(Error::param(format!(
                "Lax entropy condition requires phi_minus > phi_plus (got {phi_minus} <= {phi_plus})"
            )));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::param(format!("dispersion tau must be >= 0 (got {tau})")));
        }
        Ok(WaveParams {
            phi_minus,
            phi_plus,
            tau,
            frac,
            c: phi_plus + phi_minus,
            hprime: phi_minus - phi_plus,
        })
    }

    /// Parameters with a prescribed slope `h'(φ₋)`, realised as `(φ₋, φ₊) = (h', 0)`.
    /// Only `h'` enters the characteristic function.
    pub fn from_hprime(tau: f64, alpha: f64, hprime: f64) -> Result<Self> {
        if !(hprime.is_finite() && hprime > 0.0) {
            return Err(Error::param(format!(
                "h'(phi_minus) must be positive (Lax condition), got {hprime}"
            )));
        }
        WaveParams::new(hprime, 0.0, tau, alpha)
    }

    pub fn phi_minus(&self) -> f64 {
        self.phi_minus
    }
    pub fn phi_plus(&self) -> f64 {
        self.phi_plus
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn frac(&self) -> &FracParams {
        &self.frac
    }
    pub fn alpha(&self) -> f64 {
        self.frac.alpha()
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn hprime(&self) -> f64 {
        self.hprime
    }

    /// `h(φ) = -c(φ - φ₋) + φ² - φ₋²`, evaluated as `(φ - φ₋)(φ + φ₋ - c)` so
    /// that both far-field states give exactly zero.
    pub fn flux(&self, phi: f64) -> f64 {
        (phi - self.phi_minus) * (phi + self.phi_minus - self.c)
    }

    /// `h'(φ) = 2φ - c`.
    pub fn flux_slope(&self, phi: f64) -> f64 {
        2.0 * phi - self.c
    }
}

fn on_cut(z: Complex64) -> bool {
    z.im == 0.0 && z.re < 0.0
}

fn principal_pow(z: Complex64, a: f64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        z
    } else {
        z.powf(a)
    }
}

/// `P(z)` with `z^α` on the principal branch.
pub fn eval_char(z: Complex64, w: &WaveParams) -> Result<Complex64> {
    if on_cut(z) {
        return Err(Error::BranchCut(z));
    }
    Ok(w.tau * z * z + principal_pow(z, w.alpha()) - w.hprime)
}

/// `P'(z) = 2τz + α z^{α-1}`.
pub fn eval_char_derivative(z: Complex64, w: &WaveParams) -> Result<Complex64> {
    if on_cut(z) || z == Complex64::new(0.0, 0.0) {
        return Err(Error::BranchCut(z));
    }
    Ok(2.0 * w.tau * z + w.alpha() * z.powf(w.alpha() - 1.0))
}

fn char_real(z: f64, w: &WaveParams) -> f64 {
    w.tau * z * z + z.powf(w.alpha()) - w.hprime
}

/// The unique positive zero λ of `P`.
///
/// `P(0) = -h' < 0` and `P` increases on `(0, ∞)`, so the root is bracketed by
/// geometric growth or shrinking and then bisected; a single Newton step polishes it.
pub fn find_lambda(w: &WaveParams) -> Result<f64> {
    if !(w.hprime > 0.0) {
        return Err(Error::param("h'(phi_minus) must be positive"));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while char_real(hi, w) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::RootSearch("could not bracket the positive root".into()));
        }
    }
    if lo == 0.0 {
        // root below 1: shrink the bracket geometrically
        lo = 0.5;
        while char_real(lo, w) > 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                return Err(Error::RootSearch("positive root underflows".into()));
            }
        }
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if char_real(mid, w) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let a = w.alpha();
    let dp = 2.0 * w.tau * z + a * z.powf(a - 1.0);
    let polished = z - char_real(z, w) / dp;
    let best = if char_real(polished, w).abs() <= char_real(z, w).abs() && polished > 0.0 {
        polished
    } else {
        z
    };
    if char_real(best, w).abs() > 1e-12 * w.hprime.max(1.0) {
        return Err(Error::RootSearch(format!(
            "positive root residual {} too large",
            char_real(best, w)
        )));
    }
    Ok(best)
}

/// Complex conjugate pair of zeros (stored as the member with positive
/// imaginary part).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair {
    pub re: f64,
    pub im: f64,
}

impl ComplexPair {
    pub fn upper(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
    pub fn lower(&self) -> Complex64 {
        self.upper().conj()
    }
}

fn newton_complex(z0: Complex64, w: &WaveParams) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..100 {
        if on_cut(z) || z.norm() == 0.0 {
            return None;
        }
        let p = eval_char(z, w).ok()?;
        let dp = eval_char_derivative(z, w).ok()?;
        let mut step = p / dp;
        // keep iterates in the upper half plane so they never cross the cut
        while z.im - step.im <= 0.0 && step.norm() > 1e-300 {
            step *= 0.5;
        }
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    let r = eval_char(z, w).ok()?;
    if r.norm() <= 1e-10 {
        Some(z)
    } else {
        None
    }
}

/// Zeros of `P` off the real axis in the cut plane (τ > 0 only).
///
/// Newton runs from a fan of guesses in the upper-left quadrant (including
/// `-√(h'/τ)` lifted off the cut); converged roots are deduplicated.
pub fn find_complex_pair(w: &WaveParams) -> Result<ComplexPair> {
    if w.tau <= 0.0 {
        return Err(Error::param("no complex pair exists for tau = 0"));
    }
    let base = (w.hprime / w.tau).sqrt();
    let mut guesses = vec![Complex64::new(-base, 0.1 * base)];
    for &r in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for k in 1..8 {
            let theta = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 16.0;
            guesses.push(Complex64::from_polar(r * base, theta));
        }
    }
    let mut found: Vec<Complex64> = Vec::new();
    let mut attempts = Vec::new();
    for g in guesses {
        match newton_complex(g, w) {
            Some(z) if z.im > 0.0 => {
                if !found.iter().any(|f| (f - z).norm() <= 1e-8 * z.norm().max(1.0)) {
                    found.push(z);
                }
            }
            other => attempts.push((g, other)),
        }
    }
    let mut left: Vec<Complex64> = found.into_iter().filter(|z| z.re < 0.0).collect();
    match left.len() {
        1 => {
            let z = left.pop().unwrap();
            Ok(ComplexPair { re: z.re, im: z.im })
        }
        0 => Err(Error::RootSearch(format!(
            "no complex root with negative real part found ({} failed guesses)",
            attempts.len()
        ))),
        _ => Err(Error::RootSearch(format!(
            "more than one complex root in the upper-left quadrant: {left:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharRoots {
    pub lambda: f64,
    pub complex_pair: Option<ComplexPair>,
    /// `|P|` at λ, and at the upper/lower pair members when present.
    pub residuals: Vec<f64>,
}

pub fn char_roots(w: &WaveParams) -> Result<CharRoots> {
    let lambda = find_lambda(w)?;
    let mut residuals = vec![eval_char(Complex64::new(lambda, 0.0), w)?.norm()];
    let complex_pair = if w.tau > 0.0 {
        let pair = find_complex_pair(w)?;
        residuals.push(eval_char(pair.upper(), w)?.norm());
        residuals.push(eval_char(pair.lower(), w)?.norm());
        Some(pair)
    } else {
        None
    };
    Ok(CharRoots {
        lambda,
        complex_pair,
        residuals,
    })
}

/// Closed polygonal loops; the winding numbers of all loops are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    loops: Vec<Vec<Complex64>>,
}

impl Contour {
    /// Counter-clockwise rectangle `[x0, x1] × [y0, y1]`. Must not meet the cut.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::param("rectangle needs x0 < x1 and y0 < y1"));
        }
        if x0 < 0.0 && y0 <= 0.0 && y1 >= 0.0 {
            return Err(Error::param(
                "rectangle meets the negative real axis; use Contour::cut_avoiding",
            ));
        }
        Ok(Contour {
            loops: vec![vec![
                Complex64::new(x0, y0),
                Complex64::new(x1, y0),
                Complex64::new(x1, y1),
                Complex64::new(x0, y1),
            ]],
        })
    }

    /// Rectangle with the strip `|Im z| < eps` along the negative real axis
    /// removed. If the rectangle reaches past the origin the result is one
    /// keyhole loop whose tip passes at `Re z = eps`; otherwise it splits into
    /// an upper and a lower rectangle.
    pub fn cut_avoiding(x0: f64, x1: f64, y0: f64, y1: f64, eps: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1 && eps > 0.0) {
            return Err(Error::param("cut-avoiding rectangle needs x0 < x1, y0 < y1, eps > 0"));
        }
        let crosses = x0 < 0.0 && y0 < 0.0 && y1 > 0.0;
        if !crosses {
            return Contour::rectangle(x0, x1, y0, y1);
        }
        if y1 <= eps || y0 >= -eps {
            return Err(Error::param("rectangle thinner than the cut indentation"));
        }
        let c = Complex64::new;
        if x1 > eps {
            Ok(Contour {
                loops: vec![vec![
                    c(x0, y0),
                    c(x1, y0),
                    c(x1, y1),
                    c(x0, y1),
                    c(x0, eps),
                    c(eps, eps),
                    c(eps, -eps),
                    c(x0, -eps),
                ]],
            })
        } else {
            Ok(Contour {
                loops: vec![
                    vec![c(x0, eps), c(x1, eps), c(x1, y1), c(x0, y1)],
                    vec![c(x0, y0), c(x1, y0), c(x1, -eps), c(x0, -eps)],
                ],
            })
        }
    }

    pub fn loops(&self) -> &[Vec<Complex64>] {
        &self.loops
    }

    fn distance_to(&self, z: Complex64) -> f64 {
        let mut best = f64::INFINITY;
        for lp in &self.loops {
            for k in 0..lp.len() {
                let a = lp[k];
                let b = lp[(k + 1) % lp.len()];
                let ab = b - a;
                let t = (((z - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
                best = best.min((a + ab * t - z).norm());
            }
        }
        best
    }
}

const MAX_EDGE_SAMPLES: usize = 1 << 20;

fn edge_winding(a: Complex64, b: Complex64, w: &WaveParams) -> Result<f64> {
    let mut m = 64;
    loop {
        let mut prev = eval_char(a, w)?;
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for k in 1..=m {
            let z = a + (b - a) * (k as f64 / m as f64);
            let p = eval_char(z, w)?;
            let d = (p / prev).arg();
            worst = worst.max(d.abs());
            total += d;
            prev = p;
        }
        if worst < std::f64::consts::FRAC_PI_2 {
            return Ok(total);
        }
        m *= 2;
        if m > MAX_EDGE_SAMPLES {
            return Err(Error::ContourRefinement(format!(
                "argument step {worst:.3} rad still >= pi/2 with {} samples on edge {a} -> {b}",
                m / 2
            )));
        }
    }
}

/// Number of zeros of `P` enclosed by the contour (argument principle).
pub fn count_roots_argument_principle(w: &WaveParams, contour: &Contour) -> Result<i64> {
    let roots = char_roots(w)?;
    let mut known = vec![Complex64::new(roots.lambda, 0.0)];
    if let Some(pair) = roots.complex_pair {
        known.push(pair.upper());
        known.push(pair.lower());
    }
    for r in &known {
        let d = contour.distance_to(*r);
        if d < 1e-6 {
            return Err(Error::param(format!(
                "contour passes within {d:.2e} of the root {r}"
            )));
        }
    }
    let mut total = 0.0;
    for lp in contour.loops() {
        for k in 0..lp.len() {
            total += edge_winding(lp[k], lp[(k + 1) % lp.len()], w)?;
        }
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 1e-6 {
        return Err(Error::ContourRefinement(format!(
            "winding number {turns} is not an integer"
        )));
    }
    Ok(rounded as i64)
}

/// Rectangle `[0.1, 10] × [-5, 5]` in the right half plane.
pub fn standard_right_contour() -> Contour {
    Contour::rectangle(0.1, 10.0, -5.0, 5.0).expect("valid rectangle")
}

/// `[-10, -1e-3] × [-5, 5]` minus the strip `|Im z| < 1e-9` around the cut.
pub fn standard_left_contour() -> Contour {
    Contour::cut_avoiding(-10.0, -1e-3, -5.0, 5.0, 1e-9).expect("valid rectangle")
}
