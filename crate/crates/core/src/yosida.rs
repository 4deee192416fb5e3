//! Yosida approximation `A_λ = A (I − λA)^{-1}` of a dissipative generator and
//! convergence of the approximating resolvents and stochastic convolutions.
//!
//! Convention: `A` is the generator as it appears in the equation, so a
//! contraction generator has symmetric part `⪯ 0` and `I − λA` is invertible
//! for every `λ > 0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::convolution::convolve;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::operator_norm;
use crate::kernels::{check_complete_positivity, CpVerdict, ScalarKernel, DEFAULT_CP_MU};
use crate::quadrature::Quadrature;
use crate::resolvent::{
    compute_resolvent, uniform_exponential_bound, ExponentialBound, OperatorKernel, ResolventTable,
};
use crate::stats::par_sum_vec;
use crate::wiener::{noise_forcing, sample_wiener, DiffusionProcess, NoiseSpec};

const ACCRETIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccretivityReport {
    /// Symmetric part has no eigenvalue above the tolerance.
    pub contraction_generator: bool,
    pub max_eigenvalue: f64,
}

/// Finite-dimensional contraction-generator test on `(A + Aᵀ)/2`.
pub fn accretivity_check(a: &DMatrix<f64>) -> Result<AccretivityReport> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidParameter(format!(
            "square matrix required, got {:?}",
            a.shape()
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let max_eigenvalue = sym
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AccretivityReport {
        contraction_generator: max_eigenvalue <= ACCRETIVITY_TOL,
        max_eigenvalue,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct YosidaFamily {
    pub generator: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    /// `J_λ = (I − λA)^{-1}`.
    pub j: Vec<DMatrix<f64>>,
    /// `A_λ = A J_λ = (J_λ − I)/λ`.
    pub a_lam: Vec<DMatrix<f64>>,
}

/// Builds `J_λ` and `A_λ` by LU solves. Without `allow_non_dissipative` the
/// generator must pass [`accretivity_check`].
pub fn make_yosida(a: &DMatrix<f64>, lambdas: &[f64], allow_non_dissipative: bool) -> Result<YosidaFamily> {
    let report = accretivity_check(a)?;
    if !report.contraction_generator && !allow_non_dissipative {
        return Err(Error::InvalidParameter(format!(
            "generator is not dissipative: symmetric part has eigenvalue {}",
            report.max_eigenvalue
        )));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::InvalidParameter("lambdas must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("lambdas must be strictly decreasing".into()));
    }
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut j = Vec::with_capacity(lambdas.len());
    let mut a_lam = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let lu = (&id - a * lambda).lu();
        let jl = lu.solve(&id).ok_or(Error::SingularYosida(lambda))?;
        if jl.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularYosida(lambda));
        }
        a_lam.push(a * &jl);
        j.push(jl);
    }
    Ok(YosidaFamily {
        generator: a.clone(),
        lambdas: lambdas.to_vec(),
        j,
        a_lam,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaRow {
    pub lambda: f64,
    /// `sup_n |S_λ(t_n) − S(t_n)|`.
    pub e_s: f64,
    /// `sup_n E |W_λ(t_n) − W(t_n)|²` with common noise.
    pub e_w: f64,
    /// `sup_n E |A_λ W_λ(t_n) − A W(t_n)|²` with common noise.
    pub e_aw: f64,
}

#[derive(Debug, Clone)]
pub struct YosidaStudy {
    pub rows: Vec<YosidaRow>,
    /// One `(M, w_0)` valid for `S` and every `S_λ`.
    pub bound: ExponentialBound,
    /// Set when the kernel fails the complete-positivity check.
    pub cp_warning: Option<String>,
    pub n_paths: usize,
}

fn check_psi(psi: &DiffusionProcess, generator: &DMatrix<f64>, spec: &NoiseSpec) -> Result<()> {
    let (dim_h, dim_u) = psi.dims();
    if dim_h != generator.nrows() || dim_u != spec.cov().dim() {
        return Err(Error::DimensionMismatch {
            context: "Psi shape vs generator and covariance",
            expected: generator.nrows(),
            found: dim_h,
        });
    }
    Ok(())
}

/// `S_λ` is computed with the same grid and rule as `S`; the Monte Carlo
/// columns reuse the increments of each path across every `λ`.
#[allow(clippy::too_many_arguments)]
pub fn yosida_convergence_study(
    a: &ScalarKernel,
    generator: &DMatrix<f64>,
    psi: &DiffusionProcess,
    spec: &NoiseSpec,
    lambdas: &[f64],
    grid: &Grid,
    n_paths: usize,
    rule: Quadrature,
) -> Result<YosidaStudy> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    check_psi(psi, generator, spec)?;
    let family = make_yosida(generator, lambdas, false)?;
    let cp = check_complete_positivity(a, &DEFAULT_CP_MU, grid, None)?;
    let cp_warning = match cp.verdict {
        CpVerdict::ConsistentWithCompletePositivity => None,
        CpVerdict::NotCompletelyPositive { mu, t, s } => {
            Some(format!("kernel is not completely positive: s({t}) = {s} for mu = {mu}"))
        }
    };

    let base = compute_resolvent(&OperatorKernel::scalar_type(a.clone(), generator.clone())?, grid, rule)?;
    let tables: Vec<ResolventTable> = family
        .a_lam
        .par_iter()
        .map(|al| compute_resolvent(&OperatorKernel::scalar_type(a.clone(), al.clone())?, grid, rule))
        .collect::<Result<_>>()?;

    let mut all: Vec<&ResolventTable> = vec![&base];
    all.extend(tables.iter());
    let bound = uniform_exponential_bound(&all)?;

    let e_s: Vec<f64> = tables
        .iter()
        .map(|t| {
            t.s()
                .iter()
                .zip(base.s())
                .map(|(x, y)| operator_norm(&(x - y)))
                .fold(0.0, f64::max)
        })
        .collect();

    let len = grid.len();
    let nl = lambdas.len();
    // per lambda: [E|ΔW|² at t_0..t_N, E|ΔAW|² at t_0..t_N]
    let sums = par_sum_vec(n_paths, 2 * nl * len, |p| {
        let inc = sample_wiener(spec, grid, p as u64);
        let forcing = noise_forcing(psi, &inc).expect("dimensions validated");
        let w = convolve(base.s(), &forcing);
        let aw: Vec<DVector<f64>> = w.iter().map(|x| generator * x).collect();
        let mut out = vec![0.0; 2 * nl * len];
        for (l, table) in tables.iter().enumerate() {
            let wl = convolve(table.s(), &forcing);
            for n in 0..len {
                out[2 * l * len + n] = (&wl[n] - &w[n]).norm_squared();
                out[(2 * l + 1) * len + n] = (&family.a_lam[l] * &wl[n] - &aw[n]).norm_squared();
            }
        }
        out
    });
    let nf = n_paths as f64;
    let sup = |block: usize| {
        sums[block * len..(block + 1) * len]
            .iter()
            .map(|v| v / nf)
            .fold(0.0, f64::max)
    };
    let rows = (0..nl)
        .map(|l| YosidaRow {
            lambda: lambdas[l],
            e_s: e_s[l],
            e_w: sup(2 * l),
            e_aw: sup(2 * l + 1),
        })
        .collect();
    Ok(YosidaStudy {
        rows,
        bound,
        cp_warning,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{CovOperator, HSOperator};

    fn diag5() -> DMatrix<f64> {
        -DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]))
    }

    #[test]
    fn accretivity_examples() {
        assert!(
            accretivity_check(&-DMatrix::<f64>::identity(3, 3))
                .unwrap()
                .contraction_generator
        );
        assert!(
            !accretivity_check(&DMatrix::<f64>::identity(3, 3))
                .unwrap()
                .contraction_generator
        );
        let r = accretivity_check(&DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -1.0])).unwrap();
        assert!(r.contraction_generator);
        assert!(r.max_eigenvalue.abs() < 1e-14);
    }

    #[test]
    fn scalar_family() {
        let f = make_yosida(&DMatrix::from_element(1, 1, -1.0), &[1.0], false).unwrap();
        assert!((f.j[0][(0, 0)] - 0.5).abs() < 1e-15);
        assert!((f.a_lam[0][(0, 0)] + 0.5).abs() < 1e-15);
        let z = make_yosida(&DMatrix::zeros(2, 2), &[0.5, 0.1], false).unwrap();
        for (j, al) in z.j.iter().zip(&z.a_lam) {
            assert_eq!(j, &DMatrix::<f64>::identity(2, 2));
            assert_eq!(al.amax(), 0.0);
        }
    }

    #[test]
    fn family_identities() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, -1.0, -1.0, 0.5, 0.0, -0.5, -3.0]);
        let lambdas = [0.4, 0.2, 0.1, 0.01];
        let f = make_yosida(&a, &lambdas, false).unwrap();
        let id = DMatrix::<f64>::identity(3, 3);
        for (l, (j, al)) in lambdas.iter().zip(f.j.iter().zip(&f.a_lam)) {
            assert!(((j - &id) / *l - al).amax() < 1e-12);
            assert!(operator_norm(j) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn first_order_convergence_of_generator() {
        let a = diag5();
        let f = make_yosida(&a, &[0.1, 0.05], false).unwrap();
        let e: Vec<f64> = f.a_lam.iter().map(|al| operator_norm(&(al - &a))).collect();
        // λ a²/(1 + λ a) at a = 5
        assert!((e[0] / e[1] - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_yosida(&DMatrix::identity(2, 2), &[0.1], false).is_err());
        assert!(make_yosida(&DMatrix::identity(2, 2), &[0.1], true).is_ok());
        assert_eq!(
            make_yosida(&DMatrix::identity(2, 2), &[1.0], true),
            Err(Error::SingularYosida(1.0))
        );
        assert!(make_yosida(&diag5(), &[0.1, 0.2], false).is_err());
    }

    #[test]
    fn zero_noise_gives_zero_mc_columns() {
        let grid = Grid::new(1.0, 20).unwrap();
        let spec = NoiseSpec::full(CovOperator::cylindrical(5).unwrap(), 1);
        let study = yosida_convergence_study(
            &ScalarKernel::exponential(1.0, 1.0).unwrap(),
            &diag5(),
            &DiffusionProcess::zero(5, 5),
            &spec,
            &[0.1, 0.05],
            &grid,
            10,
            Quadrature::Trapezoid,
        )
        .unwrap();
        assert!(study.cp_warning.is_none());
        for r in &study.rows {
            assert_eq!((r.e_w, r.e_aw), (0.0, 0.0));
            assert!(r.e_s > 0.0);
        }
    }

    #[test]
    fn tiny_lambda_reproduces_resolvent() {
        let grid = Grid::new(2.0, 50).unwrap();
        let spec = NoiseSpec::full(CovOperator::cylindrical(5).unwrap(), 1);
        let study = yosida_convergence_study(
            &ScalarKernel::exponential(1.0, 1.0).unwrap(),
            &diag5(),
            &DiffusionProcess::Constant(HSOperator::identity(5)),
            &spec,
            &[1e-6],
            &grid,
            20,
            Quadrature::Trapezoid,
        )
        .unwrap();
        assert!(study.rows[0].e_s < 1e-4);
    }
}
