//! Pseudo-resolvent tables `S(t_n)`, `U(t_n) = ∫_0^{t_n} S` for scalar-type and
//! nonscalar operator kernels.
//!
//! The table is defined by the discrete second resolvent equation
//!
//! ```text
//! S_n = I + Σ_i ( S_{n-i} N_i + S_{n-1-i} F_i )
//! ```
//!
//! with `N_i`, `F_i` the near/far cell weights of `A(·)`. Solving for `S_n`
//! needs one right-division by `(I − N_0)`, factored once.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::{asymmetry, operator_norm};
use crate::kernels::{march_scalar, ScalarKernel};
use crate::quadrature::{CellWeights, Quadrature, GAUSS_LEGENDRE_8};

pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

const OVERFLOW_NORM: f64 = 1e150;

/// Matrix-valued kernel `t ↦ A(t)` given by an evaluation rule.
#[derive(Clone)]
pub struct NonscalarKernel {
    dim: usize,
    eval: MatrixFn,
    derivative: Option<MatrixFn>,
    at_zero: Option<DMatrix<f64>>,
}

impl fmt::Debug for NonscalarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonscalarKernel")
            .field("dim", &self.dim)
            .field("w11", &self.derivative.is_some())
            .finish()
    }
}

impl NonscalarKernel {
    /// `L^1_loc` kernel without derivative information.
    pub fn new(dim: usize, eval: MatrixFn) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            eval,
            derivative: None,
            at_zero: None,
        })
    }

    /// `W^{1,1}` kernel. Checks `A(t) ≈ A(0) + ∫_0^t Ȧ` on `[0, horizon]`.
    pub fn with_derivative(
        dim: usize,
        eval: MatrixFn,
        derivative: MatrixFn,
        at_zero: DMatrix<f64>,
        horizon: f64,
    ) -> Result<Self> {
        if at_zero.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                context: "A(0) of nonscalar kernel",
                expected: dim,
                found: at_zero.nrows(),
            });
        }
        let kernel = Self {
            dim,
            eval,
            derivative: Some(derivative),
            at_zero: Some(at_zero),
        };
        let grid = Grid::new(horizon, 2000)?;
        let scale = 1.0 + grid.times().map(|t| (kernel.eval)(t).norm()).fold(0.0, f64::max);
        let gap = kernel.w11_consistency(&grid)?;
        if gap > 1e-6 * scale {
            return Err(Error::InvalidParameter(format!(
                "A(t) and A(0) + ∫Ȧ disagree by {gap:e}"
            )));
        }
        Ok(kernel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max over nodes of `|A(t_n) − A(0) − ∫_0^{t_n} Ȧ|_F` (trapezoid).
    pub fn w11_consistency(&self, grid: &Grid) -> Result<f64> {
        let (der, a0) = match (&self.derivative, &self.at_zero) {
            (Some(d), Some(a0)) => (d, a0),
            _ => return Err(Error::MissingDerivative),
        };
        let h = grid.step();
        let mut integral = DMatrix::zeros(self.dim, self.dim);
        let mut prev = der(0.0);
        let mut worst = ((self.eval)(0.0) - a0).norm();
        for n in 1..=grid.steps() {
            let t = grid.time(n);
            let cur = der(t);
            integral += (&prev + &cur) * (0.5 * h);
            worst = worst.max(((self.eval)(t) - a0 - &integral).norm());
            prev = cur;
        }
        Ok(worst)
    }
}

/// Smoothness class of an operator kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    L1Loc,
    W11,
}

/// Operator kernel `A(t) ∈ B(G, H)` of the Volterra equation.
#[derive(Debug, Clone)]
pub enum OperatorKernel {
    /// `A(t) = a(t) A`.
    ScalarType {
        kernel: ScalarKernel,
        generator: DMatrix<f64>,
    },
    Nonscalar(NonscalarKernel),
}

impl OperatorKernel {
    pub fn scalar_type(kernel: ScalarKernel, generator: DMatrix<f64>) -> Result<Self> {
        if !generator.is_square() || generator.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "generator must be a nonempty square matrix, got {:?}",
                generator.shape()
            )));
        }
        if generator.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("generator entries must be finite".into()));
        }
        Ok(Self::ScalarType { kernel, generator })
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorKernel::ScalarType { generator, .. } => generator.nrows(),
            OperatorKernel::Nonscalar(k) => k.dim,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        let w11 = match self {
            OperatorKernel::ScalarType { kernel, .. } => kernel.has_derivative(),
            OperatorKernel::Nonscalar(k) => k.derivative.is_some() && k.at_zero.is_some(),
        };
        if w11 {
            Smoothness::W11
        } else {
            Smoothness::L1Loc
        }
    }

    /// `A(t)`.
    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        match self {
            OperatorKernel::ScalarType { kernel, generator } => Ok(generator * kernel.eval(t)?),
            OperatorKernel::Nonscalar(k) => Ok((k.eval)(t)),
        }
    }

    /// `Ȧ(t)`.
    pub fn derivative(&self, t: f64) -> Result<DMatrix<f64>> {
        match self {
            OperatorKernel::ScalarType { kernel, generator } => kernel
                .derivative(t)
                .map(|d| generator * d)
                .ok_or(Error::MissingDerivative),
            OperatorKernel::Nonscalar(k) => k.derivative.as_ref().map(|d| d(t)).ok_or(Error::MissingDerivative),
        }
    }

    /// `A(0)`.
    pub fn at_zero(&self) -> Result<DMatrix<f64>> {
        match self {
            OperatorKernel::ScalarType { kernel, generator } => {
                if !kernel.has_derivative() {
                    return Err(Error::MissingDerivative);
                }
                Ok(generator * kernel.eval(0.0)?)
            }
            OperatorKernel::Nonscalar(k) => k.at_zero.clone().ok_or(Error::MissingDerivative),
        }
    }

    /// `∫_{i h}^{(i+1) h} A(σ) dσ` per cell: exact kernel moments in the
    /// scalar-type case, 8-point Gauss–Legendre otherwise.
    pub fn cell_moments(&self, grid: &Grid) -> Result<Vec<DMatrix<f64>>> {
        match self {
            OperatorKernel::ScalarType { kernel, generator } => {
                Ok(kernel.cell_moments(grid)?.into_iter().map(|w| generator * w).collect())
            }
            OperatorKernel::Nonscalar(k) => {
                let h = grid.step();
                Ok((0..grid.steps())
                    .into_par_iter()
                    .map(|i| {
                        let mid = (i as f64 + 0.5) * h;
                        let mut acc = DMatrix::zeros(k.dim, k.dim);
                        for (x, w) in GAUSS_LEGENDRE_8 {
                            acc += (k.eval)(mid + 0.5 * h * x) * (0.5 * h * w);
                        }
                        acc
                    })
                    .collect())
            }
        }
    }

    pub fn weights(&self, grid: &Grid, rule: Quadrature) -> Result<CellWeights<DMatrix<f64>>> {
        let moments = self.cell_moments(grid)?;
        let (near, far) = moments
            .iter()
            .map(|w| match rule {
                Quadrature::Rectangle => (w.clone(), DMatrix::zeros(w.nrows(), w.ncols())),
                Quadrature::Trapezoid => (w * 0.5, w * 0.5),
            })
            .unzip();
        Ok(CellWeights { rule, near, far })
    }
}

/// Grid values of a pseudo-resolvent and its integral.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    grid: Grid,
    rule: Quadrature,
    s: Vec<DMatrix<f64>>,
    u: Vec<DMatrix<f64>>,
    kernel: OperatorKernel,
}

impl ResolventTable {
    fn from_values(grid: Grid, rule: Quadrature, s: Vec<DMatrix<f64>>, kernel: OperatorKernel) -> Self {
        let h = grid.step();
        let mut u = Vec::with_capacity(s.len());
        u.push(DMatrix::zeros(s[0].nrows(), s[0].ncols()));
        for n in 1..s.len() {
            let next = &u[n - 1] + (&s[n - 1] + &s[n]) * (0.5 * h);
            u.push(next);
        }
        assert_eq!(s[0], DMatrix::identity(s[0].nrows(), s[0].ncols()));
        Self {
            grid,
            rule,
            s,
            u,
            kernel,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn quadrature(&self) -> Quadrature {
        self.rule
    }

    pub fn kernel(&self) -> &OperatorKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.s[0].nrows()
    }

    /// `S(t_n)` for `n = 0..=N`.
    pub fn s(&self) -> &[DMatrix<f64>] {
        &self.s
    }

    /// `U(t_n)` for `n = 0..=N`.
    pub fn u(&self) -> &[DMatrix<f64>] {
        &self.u
    }

    pub fn operator_norms(&self) -> Vec<f64> {
        self.s.par_iter().map(operator_norm).collect()
    }

    /// Largest discrete Lipschitz quotient `|U(t_{n+1}) − U(t_n)| / h` in the
    /// operator norm of `H`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let h = self.grid.step();
        self.u
            .windows(2)
            .map(|w| operator_norm(&(&w[1] - &w[0])) / h)
            .fold(0.0, f64::max)
    }
}

/// Builds the resolvent table of `kernel` on `grid`.
pub fn compute_resolvent(kernel: &OperatorKernel, grid: &Grid, rule: Quadrature) -> Result<ResolventTable> {
    let d = kernel.dim();
    let w = kernel.weights(grid, rule)?;
    let id = DMatrix::<f64>::identity(d, d);
    // S_n (I - N_0) = R_n  <=>  (I - N_0)^T S_n^T = R_n^T
    let lu = (&id - &w.near[0]).transpose().lu();
    if !lu.is_invertible() {
        return Err(Error::SingularStep { step: 1 });
    }
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(grid.len());
    s.push(id.clone());
    for n in 1..=grid.steps() {
        let mut rhs = id.clone();
        rhs.gemm(1.0, &s[n - 1], &w.far[0], 1.0);
        for i in 1..n {
            rhs.gemm(1.0, &s[n - i], &w.near[i], 1.0);
            rhs.gemm(1.0, &s[n - 1 - i], &w.far[i], 1.0);
        }
        let next = lu
            .solve(&rhs.transpose())
            .ok_or(Error::SingularStep { step: n })?
            .transpose();
        let norm = next.norm();
        if !norm.is_finite() || norm > OVERFLOW_NORM {
            return Err(Error::Overflow { step: n, norm });
        }
        s.push(next);
    }
    Ok(ResolventTable::from_values(*grid, rule, s, kernel.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventResiduals {
    /// First resolvent equation `S = I + ∫ A(t−τ) dU(τ)`, Riemann–Stieltjes
    /// sum over `U`-increments with the kernel tagged at the left cell end.
    pub first: f64,
    /// Defining discrete second resolvent equation, relative to `1 + |S_n|`.
    pub second: f64,
}

pub fn resolvent_residuals(table: &ResolventTable) -> Result<ResolventResiduals> {
    let grid = table.grid;
    let d = table.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let w = table.kernel.weights(&grid, table.rule)?;
    let s = &table.s;
    let u = &table.u;
    let n_max = grid.steps();

    // kernel at positive lags t_1..t_N
    let lags: Vec<DMatrix<f64>> = (0..=n_max)
        .into_par_iter()
        .map(|j| {
            if j == 0 {
                Ok(DMatrix::zeros(d, d))
            } else {
                table.kernel.eval(grid.time(j))
            }
        })
        .collect::<Result<_>>()?;
    let du: Vec<DMatrix<f64>> = u.windows(2).map(|p| &p[1] - &p[0]).collect();

    let per_node: Vec<(f64, f64)> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut second = &s[n] - &id;
            for i in 0..n {
                second.gemm(-1.0, &s[n - i], &w.near[i], 1.0);
                second.gemm(-1.0, &s[n - 1 - i], &w.far[i], 1.0);
            }
            let mut first = &s[n] - &id;
            for c in 0..n {
                first.gemm(-1.0, &lags[n - c], &du[c], 1.0);
            }
            (first.norm(), second.norm() / (1.0 + s[n].norm()))
        })
        .collect();
    Ok(per_node.into_iter().fold(
        ResolventResiduals {
            first: 0.0,
            second: 0.0,
        },
        |acc, (f, s)| ResolventResiduals {
            first: acc.first.max(f),
            second: acc.second.max(s),
        },
    ))
}

/// Result of the eigen-channel construction.
#[derive(Debug, Clone)]
pub struct SpectralResolvent {
    pub table: ResolventTable,
    /// Eigenvalues of the generator, ascending.
    pub eigenvalues: Vec<f64>,
    /// Some eigenvalue is positive, i.e. some channel has `μ < 0` and lies
    /// outside the completely positive setting.
    pub outside_cp_scope: bool,
}

/// Diagonalizes a symmetric generator `A = V Λ Vᵀ`, solves the scalar
/// resolvent equation with `μ_k = −Λ_k` per channel using the same weights,
/// and assembles `S(t) = V diag(s_k(t)) Vᵀ`.
pub fn spectral_resolvent(
    kernel: &ScalarKernel,
    generator: &DMatrix<f64>,
    grid: &Grid,
    rule: Quadrature,
) -> Result<SpectralResolvent> {
    let op = OperatorKernel::scalar_type(kernel.clone(), generator.clone())?;
    let asym = asymmetry(generator);
    if asym > 1e-12 * (1.0 + generator.amax()) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(generator.clone());
    let weights = kernel.weights(grid, rule)?;
    let channels: Vec<Vec<f64>> = eig
        .eigenvalues
        .as_slice()
        .par_iter()
        .map(|&lambda| march_scalar(&weights, -lambda, grid.steps()))
        .collect::<Result<_>>()?;
    let v = &eig.eigenvectors;
    let d = generator.nrows();
    let s = (0..=grid.steps())
        .map(|n| {
            if n == 0 {
                return DMatrix::identity(d, d);
            }
            let mut scaled = v.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= channels[k][n];
            }
            &scaled * v.transpose()
        })
        .collect();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let outside_cp_scope = eigenvalues.iter().any(|&l| l > 0.0);
    Ok(SpectralResolvent {
        table: ResolventTable::from_values(*grid, rule, s, op),
        eigenvalues,
        outside_cp_scope,
    })
}

/// `|S(t)| ≤ M e^{w t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialBound {
    pub m: f64,
    pub w: f64,
}

impl ExponentialBound {
    pub fn at(&self, t: f64) -> f64 {
        self.m * (self.w * t).exp()
    }
}

fn tail_log_slope(grid: &Grid, norms: &[f64]) -> f64 {
    let start = grid.steps() / 2;
    let pts: Vec<(f64, f64)> = (start..=grid.steps())
        .map(|n| (grid.time(n), norms[n].max(1e-300).ln()))
        .collect();
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

fn minimal_m(grid: &Grid, norms: &[f64], w: f64) -> f64 {
    norms
        .iter()
        .enumerate()
        .map(|(n, v)| v * (-w * grid.time(n)).exp())
        .fold(1.0, f64::max)
}

/// Least-squares fit of `log |S(t_n)|` over the tail half of the grid, then
/// the smallest `M ≥ 1` making the bound hold at every node.
pub fn exponential_bound_fit(table: &ResolventTable) -> Result<ExponentialBound> {
    if table.grid.steps() < 8 {
        return Err(Error::InvalidParameter("bound fit needs N >= 8".into()));
    }
    let norms = table.operator_norms();
    let w = tail_log_slope(&table.grid, &norms);
    Ok(ExponentialBound {
        m: minimal_m(&table.grid, &norms, w),
        w,
    })
}

/// A single `(M, w_0)` valid for every table of a family.
pub fn uniform_exponential_bound(tables: &[&ResolventTable]) -> Result<ExponentialBound> {
    if tables.is_empty() {
        return Err(Error::InvalidParameter("no tables given".into()));
    }
    let fits = tables
        .iter()
        .map(|t| exponential_bound_fit(t))
        .collect::<Result<Vec<_>>>()?;
    let w = fits.iter().map(|f| f.w).fold(f64::NEG_INFINITY, f64::max);
    let m = tables
        .iter()
        .map(|t| minimal_m(&t.grid, &t.operator_norms(), w))
        .fold(1.0, f64::max);
    Ok(ExponentialBound { m, w })
}
