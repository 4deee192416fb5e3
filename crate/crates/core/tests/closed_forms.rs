mod oracles;

use nalgebra::{DMatrix, DVector};
use volterra::convolution::covariance_quadrature;
use volterra::hilbert::{hs_norm, CovOperator, HSOperator};
use volterra::kernels::{check_complete_positivity, solve_scalar_resolvent, CpVerdict, ScalarKernel};
use volterra::resolvent::{compute_resolvent, spectral_resolvent, OperatorKernel};
use volterra::yosida::make_yosida;
use volterra::{Grid, Quadrature};

use oracles::*;

fn max_err(path: &[f64], grid: &Grid, f: impl Fn(f64) -> f64) -> f64 {
    grid.times()
        .zip(path)
        .map(|(t, s)| (s - f(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn gamma_recurrence_matches_known_values() {
    assert_eq!(gamma_half_plus_one(0), 1.0);
    assert!((gamma_half_plus_one(1) - 0.886_226_925_452_758).abs() < 1e-15);
    assert!((gamma_half_plus_one(6) - 6.0).abs() < 1e-12);
    assert!((gamma_half_plus_one(7) - 11.631_728_396_567_45).abs() < 1e-11);
}

#[test]
fn series_oracle_agrees_with_erfc_form() {
    for t in [0.0_f64, 0.1, 0.5, 1.0, 2.0] {
        // statrs' erfc is accurate to about 1e-10
        let erfc_form = t.exp() * statrs::function::erf::erfc(t.sqrt());
        assert!((mittag_leffler_half(t) - erfc_form).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn constant_kernel_gives_exponential_decay() {
    let g = Grid::new(1.0, 1024).unwrap();
    for mu in [0.5, 1.0, 3.0] {
        let p = solve_scalar_resolvent(&ScalarKernel::constant(1.0).unwrap(), mu, &g, Quadrature::Trapezoid).unwrap();
        assert!(max_err(p.values(), &g, |t| (-mu * t).exp()) < 1e-5 * mu * mu);
    }
}

#[test]
fn linear_kernel_gives_cosine() {
    let g = Grid::new(6.0, 1024).unwrap();
    let p = solve_scalar_resolvent(&ScalarKernel::Linear, 4.0, &g, Quadrature::Trapezoid).unwrap();
    assert!(max_err(p.values(), &g, |t| (2.0 * t).cos()) < 2e-3);
}

#[test]
fn exponential_kernel_closed_form() {
    let g = Grid::new(3.0, 600).unwrap();
    for (c, b, mu) in [(1.0, 1.0, 1.0), (2.0, 0.5, 3.0), (0.3, 4.0, 10.0)] {
        let k = ScalarKernel::exponential(c, b).unwrap();
        let p = solve_scalar_resolvent(&k, mu, &g, Quadrature::Trapezoid).unwrap();
        assert!(max_err(p.values(), &g, |t| exponential_kernel_resolvent(c, b, mu, t)) < 1e-4);
    }
}

#[test]
fn fractional_order_one_is_constant_kernel() {
    let g = Grid::new(2.0, 200).unwrap();
    let a = solve_scalar_resolvent(&ScalarKernel::fractional(1.0).unwrap(), 2.0, &g, Quadrature::Trapezoid).unwrap();
    let b = solve_scalar_resolvent(&ScalarKernel::constant(1.0).unwrap(), 2.0, &g, Quadrature::Trapezoid).unwrap();
    assert!(max_err(a.values(), &g, |t| b.at(t)) < 1e-12);
}

#[test]
fn tabulated_linear_kernel_matches_linear() {
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
    let k = ScalarKernel::tabulated(times.clone(), times).unwrap();
    let g = Grid::new(4.0, 400).unwrap();
    let a = solve_scalar_resolvent(&k, 1.0, &g, Quadrature::Trapezoid).unwrap();
    let b = solve_scalar_resolvent(&ScalarKernel::Linear, 1.0, &g, Quadrature::Trapezoid).unwrap();
    assert!(max_err(a.values(), &g, |t| b.at(t)) < 1e-12);
}

#[test]
fn fractional_half_matches_mittag_leffler() {
    let g = Grid::new(1.0, 2048).unwrap();
    let p = solve_scalar_resolvent(&ScalarKernel::fractional(0.5).unwrap(), 1.0, &g, Quadrature::Trapezoid).unwrap();
    assert!(max_err(p.values(), &g, mittag_leffler_half) < 1e-3);
}

#[test]
fn diagonal_generator_decouples_into_scalar_channels() {
    let g = Grid::new(2.0, 400).unwrap();
    let kernel = OperatorKernel::scalar_type(ScalarKernel::exponential(1.0, 1.0).unwrap(), diag5()).unwrap();
    let table = compute_resolvent(&kernel, &g, Quadrature::Trapezoid).unwrap();
    for (n, s) in table.s().iter().enumerate() {
        for k in 0..5 {
            let exact = exponential_kernel_resolvent(1.0, 1.0, (k + 1) as f64, g.time(n));
            assert!((s[(k, k)] - exact).abs() < 2e-4);
        }
        assert!((s - DMatrix::from_diagonal(&s.diagonal())).amax() == 0.0);
    }
}

#[test]
fn spectral_construction_of_rotated_generator() {
    let rot = {
        let (c, s) = (0.6, 0.8);
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    };
    let gen = &rot * DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0])) * rot.transpose();
    let g = Grid::new(1.0, 256).unwrap();
    let sp = spectral_resolvent(&ScalarKernel::constant(1.0).unwrap(), &gen, &g, Quadrature::Trapezoid).unwrap();
    assert!((sp.eigenvalues[0] + 3.0).abs() < 1e-12 && (sp.eigenvalues[1] + 1.0).abs() < 1e-12);
    let t = 1.0_f64;
    let exact = &rot * DMatrix::from_diagonal(&DVector::from_vec(vec![(-t).exp(), (-3.0 * t).exp()])) * rot.transpose();
    assert!((&sp.table.s()[256] - exact).amax() < 1e-4);
}

#[test]
fn complete_positivity_classification() {
    let g = Grid::new(4.0, 1024).unwrap();
    let mus = [0.5, 1.0, 2.0, 5.0];
    for k in [
        ScalarKernel::exponential(1.0, 1.0).unwrap(),
        ScalarKernel::fractional(0.5).unwrap(),
        ScalarKernel::constant(1.0).unwrap(),
    ] {
        let r = check_complete_positivity(&k, &mus, &g, None).unwrap();
        assert_eq!(r.verdict, CpVerdict::ConsistentWithCompletePositivity, "{k:?}");
    }
    let r = check_complete_positivity(&ScalarKernel::Linear, &mus, &g, None).unwrap();
    assert!(matches!(r.verdict, CpVerdict::NotCompletelyPositive { .. }));
}

#[test]
fn hs_norm_of_diagonal_pair() {
    let b = HSOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
    let q = CovOperator::new(vec![4.0, 1.0]).unwrap();
    assert!((hs_norm(&b, &q).unwrap() - 8f64.sqrt()).abs() < 1e-15);
}

#[test]
fn ou_covariance_quadrature_converges() {
    let q = CovOperator::new(vec![1.0]).unwrap();
    let kernel =
        OperatorKernel::scalar_type(ScalarKernel::constant(1.0).unwrap(), DMatrix::from_element(1, 1, -1.0)).unwrap();
    for t in [0.5, 1.0] {
        let g = Grid::new(t, 1000).unwrap();
        let table = compute_resolvent(&kernel, &g, Quadrature::Trapezoid).unwrap();
        let c = covariance_quadrature(&table, &HSOperator::identity(1), &q, 1000).unwrap();
        assert!((c[(0, 0)] - ou_variance(t)).abs() < 1e-6);
    }
}

#[test]
fn scalar_yosida_values() {
    let f = make_yosida(&DMatrix::from_element(1, 1, -2.0), &[1.0, 0.5], false).unwrap();
    // J = 1/(1 + 2λ), A_λ = −2/(1 + 2λ)
    assert!((f.j[0][(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    assert!((f.a_lam[1][(0, 0)] + 1.0).abs() < 1e-15);
}
