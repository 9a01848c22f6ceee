//! Dense linear algebra on top of faer: LU solves with a 1-norm condition
//! estimate, and extreme singular values without a full SVD.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Matrix = Mat<f64>;

pub struct Factorization {
    lu: PartialPivLu<f64>,
    n: usize,
    norm1: f64,
}

fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

impl Factorization {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() || n == 0 {
            return Err(Error::LinearAlgebra(format!(
                "expected a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut norm1: f64 = 0.0;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() {
                    return Err(Error::LinearAlgebra(format!("non-finite entry at ({i}, {j})")));
                }
                s += v.abs();
            }
            norm1 = norm1.max(s);
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        for i in 0..n {
            if u[(i, i)] == 0.0 {
                return Err(Error::LinearAlgebra(format!("exactly singular pivot at {i}")));
            }
        }
        Ok(Factorization { lu, n, norm1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = col(b);
        self.lu.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = col(b);
        self.lu.solve_transpose_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let mut x = b.clone();
        self.lu.solve_in_place(x.as_mut());
        x
    }

    pub fn solve_transpose_mat(&self, b: &Matrix) -> Matrix {
        let mut x = b.clone();
        self.lu.solve_transpose_in_place(x.as_mut());
        x
    }

    /// Estimate of `‖A‖₁ ‖A⁻¹‖₁` (Hager's method, at most five sweeps).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let sign: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&sign);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bj, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bj, bv) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        self.norm1 * est
    }
}

/// Solve `A x = b`, refusing matrices whose condition estimate exceeds `max_cond`.
pub fn solve_checked(a: &Matrix, b: &[f64], max_cond: f64) -> Result<(Vec<f64>, f64)> {
    let f = Factorization::new(a)?;
    let cond = f.condition_estimate();
    if !(cond.is_finite() && cond <= max_cond) {
        return Err(Error::LinearAlgebra(format!(
            "matrix is ill-conditioned: condition estimate {cond:.3e} > {max_cond:.1e}"
        )));
    }
    Ok((f.solve(b), cond))
}

pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut y = vec![0.0; n];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let c = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += c[i] * xj;
        }
    }
    y
}

fn matvec_t(a: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let c = a.col(j);
            (0..a.nrows()).map(|i| c[i] * x[i]).sum()
        })
        .collect()
}

/// Largest singular value: Lanczos on `AᵀA`, stopped once the top Ritz value
/// (a lower bound for `σ_max²`) changes by less than 1e-4 relative between
/// checks. Intended as a scale (typically within 1e-3 relative, never above
/// the true value): the top of the spectrum of a discretised second
/// derivative is tightly clustered and full convergence costs O(n) steps.
pub fn largest_singular_value(a: &Matrix) -> Result<f64> {
    let theta = lanczos_top(a.ncols(), 1, Stop::Stagnation(1e-4), 0x5eed, |v| {
        matvec_t(a, &matvec(a, v))
    })?;
    Ok(theta[0].sqrt())
}

/// The `k` smallest singular values of a square non-singular matrix, in
/// ascending order.
///
/// Lanczos on `B = A⁻¹A⁻ᵀ`, whose largest eigenvalues are `1/σ²` for the
/// smallest singular values `σ` of `A`; one LU factorisation serves every
/// application of `B`.
pub fn smallest_singular_values(a: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::LinearAlgebra(format!(
            "cannot extract {k} singular values of a {n}x{n} matrix"
        )));
    }
    let f = Factorization::new(a)?;
    let theta = lanczos_top(n, k, Stop::Residual(1e-13), 0x51_6e_a1, |q| f.solve(&f.solve_transpose(q)))?;
    theta
        .into_iter()
        .map(|t| {
            if t > 0.0 {
                Ok(1.0 / t.sqrt())
            } else {
                Err(Error::LinearAlgebra("matrix is numerically singular".into()))
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Stop {
    /// Residual bound `β_m |s_m|` below `tol·θ` for every wanted Ritz value.
    Residual(f64),
    /// Wanted Ritz values move by less than `tol·θ` between checks.
    Stagnation(f64),
}

/// The `k` largest eigenvalues (descending) of a symmetric positive
/// semi-definite operator, by Lanczos with full reorthogonalisation.
fn lanczos_top(n: usize, k: usize, stop: Stop, seed: u64, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    let max_steps = n.min(600);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_bound = f64::INFINITY;
    let mut previous: Vec<f64> = Vec::new();
    let mut next_check = k.max(4);
    for j in 0..max_steps {
        let qj = &basis[j];
        let mut w = apply(qj);
        let alpha = dot(qj, &w);
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let m = j + 1;
        let exhausted = beta <= 1e-14 * alphas.iter().fold(0.0f64, |x, y| x.max(y.abs())) || m == n;
        if m >= next_check || exhausted || m == max_steps {
            next_check = (m + 4).max(m + m / 8);
            let t = Mat::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r == c + 1 {
                    betas[c]
                } else if c == r + 1 {
                    betas[r]
                } else {
                    0.0
                }
            });
            let evd = t
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::LinearAlgebra(format!("tridiagonal eigensolve failed: {e:?}")))?;
            let (s, u) = (evd.S(), evd.U());
            // eigenvalues ascending: the wanted ones are at the end
            let mut top = Vec::with_capacity(k);
            let mut ok = true;
            last_bound = 0.0;
            for i in 0..k {
                let idx = m - 1 - i;
                let theta = s[idx];
                let bound = if exhausted {
                    0.0
                } else {
                    match stop {
                        Stop::Residual(_) => beta * u[(m - 1, idx)].abs() / theta.abs(),
                        Stop::Stagnation(_) => previous
                            .get(i)
                            .map_or(f64::INFINITY, |p: &f64| (theta - p).abs() / theta.abs()),
                    }
                };
                last_bound = last_bound.max(bound);
                ok &= match stop {
                    Stop::Residual(tol) | Stop::Stagnation(tol) => bound <= tol,
                };
                top.push(theta);
            }
            previous.clone_from(&top);
            if ok {
                return Ok(top);
            }
        }
        if exhausted {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    Err(Error::LinearAlgebra(format!(
        "Lanczos did not converge (relative bound {last_bound:.3e})"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let s = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// All singular values (descending) via faer's dense SVD.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::LinearAlgebra(format!("SVD failed: {e:?}")))
}

/// Square matrix with `a_ij = 0` for `j > i + q`, stored row-major.
///
/// Discretised left-sided nonlocal operators produce this shape: row `i`
/// couples every node to its left and at most `q` nodes to its right.
#[derive(Debug, Clone)]
pub struct NearLowerMatrix {
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl NearLowerMatrix {
    pub fn zeros(n: usize, q: usize) -> Self {
        NearLowerMatrix {
            n,
            q,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Adds `v` at `(i, j)`; panics outside the allowed pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i + self.q, "entry ({i}, {j}) outside the band");
        self.data[i * self.n + j] += v;
    }

    /// Row `i`, columns `0..=min(i + q, n - 1)`.
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let end = (i + self.q + 1).min(self.n);
        &mut self.data[i * self.n..i * self.n + end]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let end = (i + self.q + 1).min(self.n);
                dot(&self.data[i * self.n..i * self.n + end], &x[..end])
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting, sweeping columns from the
    /// right: each step pivots among `q + 1` rows, so the cost is `O(q n²)`
    /// instead of `O(n³)`.
    pub fn factor(mut self) -> Result<NearLowerLu> {
        let n = self.n;
        let q = self.q;
        if let Some(k) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: k,
                value: self.data[k],
            });
        }
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pivots = vec![0; n];
        for c in (0..n).rev() {
            let lo = c.saturating_sub(q);
            let mut p = c;
            for r in lo..c {
                if self.data[r * n + c].abs() > self.data[p * n + c].abs() {
                    p = r;
                }
            }
            let piv = self.data[p * n + c];
            if piv.abs() <= f64::EPSILON * scale * n as f64 || piv == 0.0 {
                return Err(Error::LinearAlgebra(format!(
                    "matrix is numerically singular (pivot {piv:.3e} in column {c})"
                )));
            }
            if p != c {
                let (a, b) = self.data.split_at_mut(c * n);
                a[p * n..p * n + c + 1].swap_with_slice(&mut b[..c + 1]);
            }
            pivots[c] = p;
            let (head, tail) = self.data.split_at_mut(c * n);
            let pivot_row = &tail[..c + 1];
            for r in lo..c {
                let row = &mut head[r * n..r * n + c + 1];
                let l = row[c] / pivot_row[c];
                if l != 0.0 {
                    row[..c]
                        .iter_mut()
                        .zip(&pivot_row[..c])
                        .for_each(|(x, y)| *x -= l * y);
                }
                row[c] = l;
            }
        }
        Ok(NearLowerLu {
            n,
            q,
            data: self.data,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NearLowerLu {
    n: usize,
    q: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl NearLowerLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for c in (0..n).rev() {
            y.swap(self.pivots[c], c);
            let yc = y[c];
            for r in c.saturating_sub(self.q)..c {
                y[r] -= self.data[r * n + c] * yc;
            }
        }
        let mut x = vec![0.0; n];
        for c in 0..n {
            let row = &self.data[c * n..c * n + c + 1];
            x[c] = (y[c] - dot(&row[..c], &x[..c])) / row[c];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> Matrix {
        Mat::from_fn(n, n, |i, j| {
            let d = i as f64 - j as f64;
            if i == j {
                2.0 + (i as f64 * 0.37).sin()
            } else {
                0.8 / (1.0 + d * d) + if j > i { 0.1 } else { 0.0 }
            }
        })
    }

    #[test]
    fn smallest_singular_values_match_full_svd() {
        let a = test_matrix(300);
        let full = singular_values(&a).unwrap();
        let small = smallest_singular_values(&a, 3).unwrap();
        for (k, s) in small.iter().enumerate() {
            let want = full[full.len() - 1 - k];
            assert!((s - want).abs() <= 1e-9 * want, "k={k} {s} {want}");
        }
        let big = largest_singular_value(&a).unwrap();
        assert!(big <= full[0] * (1.0 + 1e-12) && big >= full[0] * (1.0 - 1e-3));
    }

    #[test]
    fn solve_and_condition() {
        let a = test_matrix(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let b = matvec(&a, &x);
        let (got, cond) = solve_checked(&a, &b, 1e12).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
        let sv = singular_values(&a).unwrap();
        let cond2 = sv[0] / sv[49];
        // 1-norm and 2-norm condition numbers agree within a factor n
        assert!(cond > cond2 / 50.0 && cond < cond2 * 50.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = test_matrix(20);
        for j in 0..20 {
            let v = a[(3, j)];
            a[(7, j)] = 2.0 * v;
        }
        let b = vec![1.0; 20];
        assert!(solve_checked(&a, &b, 1e12).is_err());
    }

    #[test]
    fn near_lower_solve_matches_dense() {
        let n = 60;
        for q in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
            let mut m = NearLowerMatrix::zeros(n, q);
            let mut dense = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=(i + q).min(n - 1) {
                    // small diagonal forces pivoting when there is a band to pivot in
                    let v = match (i == j, q) {
                        (true, 0) => 2.0 + n as f64,
                        (true, _) => 1e-3,
                        _ => rng.gen_range(-1.0..1.0),
                    };
                    m.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = m.matvec(&x);
            for (u, v) in b.iter().zip(matvec(&dense, &x)) {
                assert!((u - v).abs() < 1e-12);
            }
            let lu = m.factor().unwrap();
            let got = lu.solve(&b);
            let reference = Factorization::new(&dense).unwrap().solve(&b);
            let back = matvec(&dense, &got);
            let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                assert!((back[i] - b[i]).abs() <= 1e-12 * bmax, "q={q} i={i}");
                assert!((got[i] - reference[i]).abs() <= 1e-6 * (1.0 + reference[i].abs()));
            }
        }
    }

    #[test]
    fn near_lower_singular_reported() {
        let mut m = NearLowerMatrix::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 0, 1.0);
        m.add(2, 0, 1.0);
        assert!(m.factor().is_err());
    }
}
