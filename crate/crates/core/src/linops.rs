//! The linearised operator `τ∂² + D^α − h'(φ₋)` on a truncated half-line
//! `[-L, 0]`, its boundary-value problem and a discrete null-space probe.

use serde::{Deserialize, Serialize};

use crate::charroots::{find_lambda, WaveParams};
use crate::dense::{
    largest_singular_value, matvec, smallest_singular_values, solve_checked, Matrix,
};
use crate::error::{Error, Result};
use crate::fracops::{exponential_tail_response, L1Stencil};
use crate::grid::{Grid, GridFunction, TailModel};

/// Conditions at the truncation point `ξ = -L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeftBc {
    /// `v = A e^{λξ}` beyond `-L`, with `A` tied to `v(-L)`. For `τ > 0` row 0
    /// is the discrete Robin relation `(v₁ - e^{λh} v₀)/h = 0`.
    AsymptoticExponential(f64),
    /// `v(-L) = 0` and nothing to the left. Requires `τ > 0`.
    Dirichlet0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RightBc {
    DirichletValue(f64),
}

/// What a matrix row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowRole {
    LeftClosure,
    /// Discretised equation at the given node.
    Collocation(usize),
    RightDirichlet,
}

/// Residual of the collocation rows on the samples of `e^{λξ}`, recorded at assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub residual: f64,
    pub bound: f64,
    pub warning: Option<String>,
}

/// Constant in the consistency bound `C h^{2-α}`.
pub const CONSISTENCY_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    params: WaveParams,
    grid: Grid,
    matrix: Matrix,
    bc_left: LeftBc,
    bc_right: RightBc,
    roles: Vec<RowRole>,
    lambda: f64,
    shift: f64,
    consistency: ConsistencyCheck,
}

impl LinearizedOperator {
    pub fn params(&self) -> &WaveParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn bc_left(&self) -> LeftBc {
        self.bc_left
    }

    pub fn bc_right(&self) -> RightBc {
        self.bc_right
    }

    pub fn roles(&self) -> &[RowRole] {
        &self.roles
    }

    /// Positive root of the characteristic function used for the tail closure.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Diagonal shift of the collocation rows (`-h'` unless probed).
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn consistency(&self) -> &ConsistencyCheck {
        &self.consistency
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.grid.n() {
            return Err(Error::param(format!(
                "vector length {} does not match grid size {}",
                v.len(),
                self.grid.n()
            )));
        }
        Ok(matvec(&self.matrix, v))
    }

    /// Indices of the collocation rows.
    pub fn interior_rows(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, RowRole::Collocation(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// `max |row · v|` over the collocation rows.
    pub fn interior_residual(&self, v: &[f64]) -> Result<f64> {
        let av = self.apply(v)?;
        Ok(self
            .interior_rows()
            .into_iter()
            .fold(0.0f64, |m, i| m.max(av[i].abs())))
    }
}

/// Assembles the operator with the physical shift `-h'(φ₋)`.
pub fn assemble(w: &WaveParams, grid: Grid, bc_left: LeftBc, bc_right: RightBc) -> Result<LinearizedOperator> {
    assemble_shifted(w, grid, bc_left, bc_right, -w.hprime())
}

/// Assembles with an arbitrary diagonal `shift` in place of `-h'(φ₋)`.
/// The exponential tail closure still uses the rate given in `bc_left`.
pub fn assemble_shifted(
    w: &WaveParams,
    grid: Grid,
    bc_left: LeftBc,
    bc_right: RightBc,
    shift: f64,
) -> Result<LinearizedOperator> {
    if grid.xmax() != 0.0 {
        return Err(Error::param(format!(
            "the linearised problem lives on [-L, 0] (grid ends at {})",
            grid.xmax()
        )));
    }
    if !shift.is_finite() {
        return Err(Error::param("diagonal shift must be finite"));
    }
    let RightBc::DirichletValue(c) = bc_right;
    if !c.is_finite() {
        return Err(Error::param("boundary value must be finite"));
    }
    let n = grid.n();
    let tau = w.tau();
    if n < 4 {
        return Err(Error::param("need at least 4 grid points"));
    }
    let tail_rate = match bc_left {
        LeftBc::AsymptoticExponential(rate) => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::param(format!("tail rate must be positive (got {rate})")));
            }
            Some(rate)
        }
        LeftBc::Dirichlet0 => {
            if tau == 0.0 {
                return Err(Error::param(
                    "Dirichlet0 needs τ > 0: for τ = 0 the equation is a Volterra march \
                     from the left and the condition leaves no room for v(0)",
                ));
            }
            None
        }
    };
    let lambda = find_lambda(w)?;
    let h = grid.h();
    let p = w.frac();
    let stencil = L1Stencil::new(p, h, n);
    let x0 = grid.xmin();

    let mut roles = Vec::with_capacity(n);
    if tau > 0.0 {
        roles.push(RowRole::LeftClosure);
        roles.extend((1..n - 1).map(RowRole::Collocation));
    } else {
        // the tail model already fixes the left behaviour; row 0 carries the
        // equation at ξ = 0
        roles.push(RowRole::Collocation(n - 1));
        roles.extend((1..n - 1).map(RowRole::Collocation));
    }
    roles.push(RowRole::RightDirichlet);

    let mut a = Matrix::zeros(n, n);
    for (row, role) in roles.iter().enumerate() {
        match *role {
            RowRole::LeftClosure => match tail_rate {
                Some(rate) => {
                    a[(row, 0)] = -(rate * h).exp() / h;
                    a[(row, 1)] = 1.0 / h;
                }
                None => a[(row, 0)] = 1.0,
            },
            RowRole::RightDirichlet => a[(row, n - 1)] = 1.0,
            RowRole::Collocation(i) => {
                for j in 0..=i {
                    a[(row, j)] = stencil.coefficient(i, j);
                }
                if let Some(rate) = tail_rate {
                    a[(row, 0)] += exponential_tail_response(p, rate, grid.x(i) - x0);
                }
                a[(row, i)] += shift;
                if tau > 0.0 {
                    let k = tau / (h * h);
                    a[(row, i - 1)] += k;
                    a[(row, i)] -= 2.0 * k;
                    a[(row, i + 1)] += k;
                }
            }
        }
    }

    let mut op = LinearizedOperator {
        params: *w,
        grid,
        matrix: a,
        bc_left,
        bc_right,
        roles,
        lambda,
        shift,
        consistency: ConsistencyCheck {
            residual: f64::NAN,
            bound: f64::NAN,
            warning: None,
        },
    };
    let samples: Vec<f64> = grid.points().iter().map(|&x| (lambda * x).exp()).collect();
    let residual = op.interior_residual(&samples)?;
    let bound = CONSISTENCY_CONSTANT * h.powf(2.0 - p.alpha());
    let physical = shift == -w.hprime() && matches!(bc_left, LeftBc::AsymptoticExponential(_));
    let warning = (physical && !(residual <= bound)).then(|| {
        format!(
            "grid too coarse: collocation residual on e^(λξ) is {residual:.3e}, \
             above {CONSISTENCY_CONSTANT}·h^(2-α) = {bound:.3e}"
        )
    });
    op.consistency = ConsistencyCheck {
        residual,
        bound,
        warning,
    };
    Ok(op)
}

/// Solves `A v = C e_{n-1}`. The returned function carries the exponential
/// tail implied by the left closure.
pub fn solve_bvp(op: &LinearizedOperator) -> Result<GridFunction> {
    let n = op.grid.n();
    let RightBc::DirichletValue(c) = op.bc_right;
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = c;
    let (v, _cond) = solve_checked(&op.matrix, &rhs, 1e12)?;
    let tail = match op.bc_left {
        LeftBc::AsymptoticExponential(rate) => {
            TailModel::exponential_through(0.0, rate, op.grid.xmin(), v[0])
        }
        LeftBc::Dirichlet0 => TailModel::Zero,
    };
    GridFunction::new(op.grid, v, tail)
}

/// `‖v - C e^{λξ}‖_∞ / |C|` on the grid.
pub fn exponential_error(v: &GridFunction, lambda: f64, c: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::param("relative error undefined for C = 0"));
    }
    let g = v.grid();
    Ok(v
        .values()
        .iter()
        .enumerate()
        .map(|(i, vi)| (vi - c * (lambda * g.x(i)).exp()).abs())
        .fold(0.0f64, f64::max)
        / c.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceReport {
    /// Smallest singular values, ascending.
    pub smallest: Vec<f64>,
    /// Lanczos estimate of the largest singular value (see
    /// [`largest_singular_value`]).
    pub sigma_max: f64,
    /// Number of singular values with `σ/σ_max < 1e-10`.
    pub kernel_dim: usize,
}

pub const KERNEL_RATIO: f64 = 1e-10;

/// Three smallest singular values of the homogeneous problem's matrix.
pub fn null_space_check(op: &LinearizedOperator) -> Result<NullSpaceReport> {
    let RightBc::DirichletValue(c) = op.bc_right;
    if c != 0.0 {
        return Err(Error::param(format!(
            "null-space check needs homogeneous right data (got {c})"
        )));
    }
    let smallest = smallest_singular_values(&op.matrix, 3)?;
    let sigma_max = largest_singular_value(&op.matrix)?;
    if !(sigma_max.is_finite() && sigma_max > 0.0) {
        return Err(Error::LinearAlgebra(format!("largest singular value {sigma_max}")));
    }
    let kernel_dim = smallest.iter().filter(|s| **s / sigma_max < KERNEL_RATIO).count();
    Ok(NullSpaceReport {
        smallest,
        sigma_max,
        kernel_dim,
    })
}
