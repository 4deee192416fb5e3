//! Stochastic convolution `W^Ψ(t) = ∫_0^t S(t−τ) Ψ(τ) dW(τ)`, mild solutions
//! and the covariance of `W^B`.
//!
//! The discrete convolution uses left-point Itô sums,
//! `W^Ψ(t_n) = Σ_{m<n} S(t_n − t_m) Ψ(t_m) ΔW_m`.

mod verify;

pub use verify::{
    ito_residual_statistics, verify_ito_identity, verify_volterra_identity, verify_weak_solution, IdentityReport,
    ItoReport, ItoStatistics, ItoTestFunction, ScalarFn,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::{symmetrize, weighted_column_norm_sq, CovOperator, HSOperator};
use crate::quadrature::Quadrature;
use crate::resolvent::{OperatorKernel, ResolventTable};
use crate::stats::par_sum_vec;
use crate::wiener::{noise_forcing, sample_wiener, stochastic_integral, DiffusionProcess, NoiseSpec, WienerIncrements};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    /// Rule of the resolvent table the path was built from.
    pub quadrature: Quadrature,
    pub path_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPath {
    grid: Grid,
    values: Vec<DVector<f64>>,
    provenance: Provenance,
}

impl ConvolutionPath {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `h Σ_{n=1}^N |W^Ψ(t_n)|²`.
    pub fn trajectory_l2_sq(&self) -> f64 {
        let h = self.grid.step();
        self.values[1..].iter().map(|v| h * v.norm_squared()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MildSolutionPath {
    grid: Grid,
    x0: DVector<f64>,
    values: Vec<DVector<f64>>,
    convolution: ConvolutionPath,
}

impl MildSolutionPath {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn convolution(&self) -> &ConvolutionPath {
        &self.convolution
    }
}

fn check_table_dims(table: &ResolventTable, psi: &DiffusionProcess) -> Result<()> {
    let (dim_h, _) = psi.dims();
    if dim_h != table.dim() {
        return Err(Error::DimensionMismatch {
            context: "rows of Psi vs resolvent dimension",
            expected: table.dim(),
            found: dim_h,
        });
    }
    Ok(())
}

/// `Σ_{m<n} S_{n−m} g_m` for every `n`.
pub(crate) fn convolve(s: &[DMatrix<f64>], forcing: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let d = s[0].nrows();
    (0..=forcing.len())
        .map(|n| {
            let mut acc = DVector::zeros(d);
            for (m, g) in forcing[..n].iter().enumerate() {
                acc.gemv(1.0, &s[n - m], g, 1.0);
            }
            acc
        })
        .collect()
}

pub fn stochastic_convolution(
    table: &ResolventTable,
    psi: &DiffusionProcess,
    inc: &WienerIncrements,
) -> Result<ConvolutionPath> {
    table.grid().ensure_same(inc.grid(), "resolvent table vs increments")?;
    check_table_dims(table, psi)?;
    let forcing = noise_forcing(psi, inc)?;
    Ok(ConvolutionPath {
        grid: *table.grid(),
        values: convolve(table.s(), &forcing),
        provenance: Provenance {
            quadrature: table.quadrature(),
            path_id: inc.path_id(),
        },
    })
}

/// `X(t_n) = S(t_n) X_0 + W^Ψ(t_n)`.
pub fn mild_solution(
    table: &ResolventTable,
    x0: &DVector<f64>,
    psi: &DiffusionProcess,
    inc: &WienerIncrements,
) -> Result<MildSolutionPath> {
    if x0.len() != table.dim() {
        return Err(Error::DimensionMismatch {
            context: "initial value vs resolvent dimension",
            expected: table.dim(),
            found: x0.len(),
        });
    }
    let convolution = stochastic_convolution(table, psi, inc)?;
    let values = table
        .s()
        .iter()
        .zip(convolution.values())
        .map(|(s, w)| s * x0 + w)
        .collect();
    Ok(MildSolutionPath {
        grid: *table.grid(),
        x0: x0.clone(),
        values,
        convolution,
    })
}

/// Explicit left-rectangle time stepping of the Volterra equation itself,
/// `X_n = X_0 + Σ_i (∫_{cell i} A) X_{n−1−i} + I(t_n)`. Euler–Maruyama when
/// `A(t)` is constant.
pub fn strong_solution_euler(
    kernel: &OperatorKernel,
    grid: &Grid,
    x0: &DVector<f64>,
    psi: &DiffusionProcess,
    inc: &WienerIncrements,
) -> Result<Vec<DVector<f64>>> {
    grid.ensure_same(inc.grid(), "grid vs increments")?;
    if x0.len() != kernel.dim() || psi.dims().0 != kernel.dim() {
        return Err(Error::DimensionMismatch {
            context: "strong solution state dimension",
            expected: kernel.dim(),
            found: x0.len(),
        });
    }
    let moments = kernel.cell_moments(grid)?;
    let ito = stochastic_integral(psi, inc)?;
    let mut x: Vec<DVector<f64>> = Vec::with_capacity(grid.len());
    x.push(x0.clone());
    for n in 1..=grid.steps() {
        let mut next = x0 + &ito[n];
        for i in 0..n {
            next.gemv(1.0, &moments[i], &x[n - 1 - i], 1.0);
        }
        x.push(next);
    }
    Ok(x)
}

fn check_b(table: &ResolventTable, b: &HSOperator, q: &CovOperator) -> Result<()> {
    if b.dim_h() != table.dim() {
        return Err(Error::DimensionMismatch {
            context: "rows of B vs resolvent dimension",
            expected: table.dim(),
            found: b.dim_h(),
        });
    }
    if b.dim_u() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "columns of B vs modes of Q",
            expected: b.dim_u(),
            found: q.dim(),
        });
    }
    Ok(())
}

fn check_index(table: &ResolventTable, t_index: usize) -> Result<()> {
    if t_index > table.grid().steps() {
        return Err(Error::InvalidParameter(format!(
            "time index {t_index} beyond N = {}",
            table.grid().steps()
        )));
    }
    Ok(())
}

/// Composite-trapezoid value of `∫_0^{t_n} S(τ) B Q Bᵀ S(τ)ᵀ dτ`.
pub fn covariance_quadrature(
    table: &ResolventTable,
    b: &HSOperator,
    q: &CovOperator,
    t_index: usize,
) -> Result<DMatrix<f64>> {
    check_b(table, b, q)?;
    check_index(table, t_index)?;
    let bqb = b.matrix() * q.matrix() * b.matrix().transpose();
    let h = table.grid().step();
    let d = table.dim();
    let mut acc = DMatrix::zeros(d, d);
    if t_index == 0 {
        return Ok(acc);
    }
    for (j, s) in table.s()[..=t_index].iter().enumerate() {
        let w = if j == 0 || j == t_index { 0.5 * h } else { h };
        acc += s * &bqb * s.transpose() * w;
    }
    Ok(symmetrize(&acc))
}

/// `E |W^B(t_k) − W^B(t_n)|²` of the discrete convolution, exactly.
pub fn mean_square_increment(
    table: &ResolventTable,
    b: &HSOperator,
    q: &CovOperator,
    k: usize,
    n: usize,
) -> Result<f64> {
    check_b(table, b, q)?;
    let (k, n) = (k.min(n), k.max(n));
    check_index(table, n)?;
    let h = table.grid().step();
    let s = table.s();
    let qs = q.eigenvalues();
    let mut total = 0.0;
    for m in 0..n {
        let op = if m < k {
            (&s[n - m] - &s[k - m]) * b.matrix()
        } else {
            &s[n - m] * b.matrix()
        };
        total += h * weighted_column_norm_sq(&op, qs);
    }
    Ok(total)
}

/// `h Σ_{m<n} |S(t_n − t_m) Ψ(t_m)|²_{L_2^0}` for every `n`; errors if any
/// value is not finite.
pub fn convolution_integrability(table: &ResolventTable, psi: &DiffusionProcess, q: &CovOperator) -> Result<Vec<f64>> {
    check_table_dims(table, psi)?;
    let h = table.grid().step();
    let psis = psi.cell_values(table.grid());
    let out: Vec<f64> = (0..=table.grid().steps())
        .map(|n| {
            (0..n)
                .map(|m| h * weighted_column_norm_sq(&(&table.s()[n - m] * psis[m].matrix()), q.eigenvalues()))
                .sum()
        })
        .collect();
    if let Some(n) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Overflow { step: n, norm: out[n] });
    }
    Ok(out)
}

/// `E h Σ_n |W^Ψ(t_n)|² = Σ_n Σ_{m<n} h² |S(t_n − t_m) Ψ(t_m)|²_{L_2^0}`.
pub fn trajectory_l2_expectation(table: &ResolventTable, psi: &DiffusionProcess, q: &CovOperator) -> Result<f64> {
    let h = table.grid().step();
    Ok(convolution_integrability(table, psi, q)?[1..]
        .iter()
        .map(|v| h * v)
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub sample_cov: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub n_paths: usize,
}

/// Unbiased sample covariance of `W^B(t_n)` over paths `0..n_paths`.
pub fn covariance_monte_carlo(
    table: &ResolventTable,
    b: &HSOperator,
    spec: &NoiseSpec,
    n_paths: usize,
    t_index: usize,
) -> Result<CovarianceEstimate> {
    if n_paths < 100 {
        return Err(Error::InvalidParameter(format!(
            "covariance estimate needs at least 100 paths, got {n_paths}"
        )));
    }
    check_b(table, b, spec.cov())?;
    check_index(table, t_index)?;
    let grid = *table.grid();
    let d = table.dim();
    let k = spec.truncation();
    let bk = b.matrix().columns(0, k).into_owned();
    let sb: Vec<DMatrix<f64>> = table.s()[..=t_index].iter().map(|s| s * &bk).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let width = d + 2 * pairs.len();
    let sums = par_sum_vec(n_paths, width, |p| {
        let inc = sample_wiener(spec, &grid, p as u64);
        let mut x = DVector::zeros(d);
        for m in 0..t_index {
            x.gemv(1.0, &sb[t_index - m], &inc.matrix().column(m), 1.0);
        }
        let mut out = Vec::with_capacity(width);
        out.extend(x.iter().cloned());
        for &(i, j) in &pairs {
            out.push(x[i] * x[j]);
        }
        for &(i, j) in &pairs {
            out.push((x[i] * x[j]).powi(2));
        }
        out
    });
    let nf = n_paths as f64;
    let mean = &sums[..d];
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let m2 = sums[d + p];
        let m4 = sums[d + pairs.len() + p];
        let c = (m2 - mean[i] * mean[j] / nf) / (nf - 1.0);
        let var_prod = (m4 / nf - (m2 / nf).powi(2)).max(0.0);
        let e = (var_prod / nf).sqrt();
        cov[(i, j)] = c;
        cov[(j, i)] = c;
        se[(i, j)] = e;
        se[(j, i)] = e;
    }
    Ok(CovarianceEstimate {
        sample_cov: cov,
        std_error: se,
        n_paths,
    })
}
