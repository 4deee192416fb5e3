//! Resolves a configuration and runs one experiment into in-memory files.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use volterra::convolution::{
    covariance_monte_carlo, covariance_quadrature, ito_residual_statistics, mild_solution, stochastic_convolution,
    verify_ito_identity, verify_volterra_identity, ItoTestFunction,
};
use volterra::hilbert::{CovOperator, HSOperator};
use volterra::kernels::{check_complete_positivity, solve_scalar_resolvent, CpVerdict, ScalarKernel, DEFAULT_CP_MU};
use volterra::resolvent::{compute_resolvent, exponential_bound_fit, resolvent_residuals, OperatorKernel};
use volterra::wiener::{sample_wiener, DiffusionProcess, NoiseSpec};
use volterra::yosida::yosida_convergence_study;
use volterra::{Grid, Quadrature};

use crate::config::{Config, KernelConfig, McConfig, NoiseConfig, OperatorConfig, PsiConfig, EXPERIMENTS};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 2,
            RunError::Validation(_) => 3,
            RunError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Parse(_) => "parse",
            RunError::Validation(_) => "validation",
            RunError::Numerical(_) => "numerical",
        }
    }
}

impl From<volterra::Error> for RunError {
    fn from(e: volterra::Error) -> Self {
        use volterra::Error::*;
        match e {
            SingularStep { .. } | Overflow { .. } | SingularYosida(_) => RunError::Numerical(e.to_string()),
            _ => RunError::Validation(e.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Validation(msg.into())
}

const DEFAULT_N_PATHS: usize = 1000;
const DEFAULT_LAMBDAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// A fully resolved experiment: the echoed configuration plus library objects.
struct Resolved {
    config: Config,
    grid: Grid,
    rule: Quadrature,
    kernel: ScalarKernel,
}

fn scalar_kernel(k: &KernelConfig) -> Result<ScalarKernel, RunError> {
    Ok(match k {
        KernelConfig::Fractional { alpha } => ScalarKernel::fractional(*alpha)?,
        KernelConfig::Exponential { scale, rate } => ScalarKernel::exponential(*scale, *rate)?,
        KernelConfig::Constant { value } => ScalarKernel::constant(*value)?,
        KernelConfig::Linear => ScalarKernel::Linear,
        KernelConfig::Tabulated { times, values } => ScalarKernel::tabulated(times.clone(), values.clone())?,
    })
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, RunError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(invalid(format!("{what} must be a nonempty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn benchmark(name: &str) -> Result<DMatrix<f64>, RunError> {
    match name {
        "ou1" => Ok(DMatrix::from_element(1, 1, -1.0)),
        "diag5" => Ok(-DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, 2.0, 3.0, 4.0, 5.0,
        ]))),
        other => Err(invalid(format!(
            "unknown operator benchmark {other:?}; expected \"ou1\" or \"diag5\""
        ))),
    }
}

fn parse_rule(s: &str) -> Result<Quadrature, RunError> {
    s.parse::<Quadrature>().map_err(|e| invalid(e.to_string()))
}

impl Resolved {
    fn new(mut config: Config) -> Result<Self, RunError> {
        if !EXPERIMENTS.contains(&config.experiment.as_str()) {
            return Err(invalid(format!(
                "unknown experiment {:?}; expected one of {}",
                config.experiment,
                EXPERIMENTS.join(", ")
            )));
        }
        config.code_version = Some(env!("CARGO_PKG_VERSION").to_string());
        let grid = Grid::new(config.grid.horizon, config.grid.steps)?;
        let rule = parse_rule(config.quadrature.as_deref().unwrap_or("trapezoid"))?;
        if config.experiment == "cp_check" {
            config.quadrature = Some(Quadrature::Rectangle.id().into());
        } else {
            config.quadrature = Some(rule.id().into());
        }
        let kernel = scalar_kernel(&config.kernel)?;
        Ok(Self {
            config,
            grid,
            rule,
            kernel,
        })
    }

    fn generator(&mut self) -> Result<DMatrix<f64>, RunError> {
        let op = self.config.operator.clone().unwrap_or(OperatorConfig {
            benchmark: Some("ou1".into()),
            matrix: None,
        });
        let m = match (&op.benchmark, &op.matrix) {
            (Some(b), None) => benchmark(b)?,
            (None, Some(rows)) => matrix_from_rows(rows, "operator matrix")?,
            _ => return Err(invalid("operator needs exactly one of `benchmark` or `matrix`")),
        };
        if !m.is_square() {
            return Err(invalid("operator matrix must be square"));
        }
        self.config.operator = Some(op);
        Ok(m)
    }

    fn operator_kernel(&mut self) -> Result<OperatorKernel, RunError> {
        let g = self.generator()?;
        Ok(OperatorKernel::scalar_type(self.kernel.clone(), g)?)
    }

    fn noise(&mut self, dim: usize, seed_override: Option<u64>) -> Result<NoiseSpec, RunError> {
        let mut n = self.config.noise.clone().unwrap_or(NoiseConfig {
            q: None,
            cylindrical: None,
            truncation: None,
            seed: None,
        });
        let cov = match (&n.q, n.cylindrical) {
            (Some(q), None) => CovOperator::new(q.clone())?,
            (None, Some(k)) => CovOperator::cylindrical(k)?,
            (None, None) => {
                n.q = Some(vec![1.0; dim]);
                CovOperator::new(vec![1.0; dim])?
            }
            _ => return Err(invalid("noise takes either `q` or `cylindrical`, not both")),
        };
        let k = n.truncation.unwrap_or(cov.dim());
        n.truncation = Some(k);
        let seed = seed_override.or(n.seed).unwrap_or(0);
        n.seed = Some(seed);
        self.config.noise = Some(n);
        Ok(NoiseSpec::new(cov, k, seed)?)
    }

    fn psi(&mut self, dim_h: usize, dim_u: usize) -> Result<HSOperator, RunError> {
        let p = self.config.psi.clone().unwrap_or(PsiConfig {
            matrix: None,
            scale: None,
        });
        let m = match (&p.matrix, p.scale) {
            (Some(rows), None) => matrix_from_rows(rows, "psi matrix")?,
            (None, scale) => {
                if dim_h != dim_u {
                    return Err(invalid(
                        "psi must be given as a matrix when state and noise dimensions differ",
                    ));
                }
                DMatrix::identity(dim_h, dim_u) * scale.unwrap_or(1.0)
            }
            _ => return Err(invalid("psi takes either `matrix` or `scale`, not both")),
        };
        if m.shape() != (dim_h, dim_u) {
            return Err(invalid(format!(
                "psi has shape {:?}, expected ({dim_h}, {dim_u})",
                m.shape()
            )));
        }
        self.config.psi = Some(PsiConfig {
            matrix: Some(rows_of(&m)),
            scale: None,
        });
        Ok(HSOperator::new(m)?)
    }

    fn n_paths(&mut self, default: usize) -> usize {
        let n = self.config.mc.map_or(default, |m| m.n_paths);
        self.config.mc = Some(McConfig { n_paths: n });
        n
    }

    fn vector(
        &mut self,
        value: Option<Vec<f64>>,
        dim: usize,
        what: &str,
        default: f64,
    ) -> Result<DVector<f64>, RunError> {
        let v = value.unwrap_or_else(|| vec![default; dim]);
        if v.len() != dim {
            return Err(invalid(format!("{what} has length {}, expected {dim}", v.len())));
        }
        Ok(DVector::from_vec(v))
    }
}

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    fn row(&mut self, fields: &[String]) {
        self.w.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

pub struct Outcome {
    pub manifest: Config,
    pub files: Vec<(String, Vec<u8>)>,
}

pub fn run(config: Config, seed_override: Option<u64>) -> Result<Outcome, RunError> {
    let mut r = Resolved::new(config)?;
    let files = match r.config.experiment.as_str() {
        "scalar_resolvent" => scalar_resolvent(&mut r)?,
        "cp_check" => cp_check(&mut r)?,
        "resolvent" => resolvent(&mut r)?,
        "convolve" => convolve(&mut r, seed_override)?,
        "covariance" => covariance(&mut r, seed_override)?,
        "verify_volterra" => verify_volterra(&mut r, seed_override)?,
        "verify_ito" => verify_ito(&mut r, seed_override)?,
        "yosida" => yosida(&mut r, seed_override)?,
        _ => unreachable!("experiment validated in Resolved::new"),
    };
    Ok(Outcome {
        manifest: r.config,
        files,
    })
}

fn scalar_resolvent(r: &mut Resolved) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let mu = r.config.mu.unwrap_or(1.0);
    r.config.mu = Some(mu);
    let path = solve_scalar_resolvent(&r.kernel, mu, &r.grid, r.rule)?;
    let mut csv = Csv::new(&["t", "s"]);
    for (t, s) in r.grid.times().zip(path.values()) {
        csv.row(&[num(t), num(*s)]);
    }
    Ok(vec![("scalar_resolvent.csv".into(), csv.finish())])
}

fn cp_check(r: &mut Resolved) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let mus = r.config.mus.clone().unwrap_or(DEFAULT_CP_MU.to_vec());
    r.config.mus = Some(mus.clone());
    let report = check_complete_positivity(&r.kernel, &mus, &r.grid, r.config.tol)?;
    r.config.tol = Some(report.tol);
    let mut csv = Csv::new(&["mu", "min_s", "t_min", "s_end"]);
    for s in &report.samples {
        csv.row(&[
            num(s.mu),
            num(s.min_s),
            num(s.t_min),
            num(*s.path.values().last().unwrap()),
        ]);
    }
    let mut verdict = Csv::new(&["verdict", "mu", "t", "s"]);
    match report.verdict {
        CpVerdict::ConsistentWithCompletePositivity => {
            verdict.row(&["consistent".into(), String::new(), String::new(), String::new()])
        }
        CpVerdict::NotCompletelyPositive { mu, t, s } => {
            verdict.row(&["not_completely_positive".into(), num(mu), num(t), num(s)])
        }
    }
    Ok(vec![
        ("cp_check.csv".into(), csv.finish()),
        ("cp_verdict.csv".into(), verdict.finish()),
    ])
}

fn resolvent(r: &mut Resolved) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let kernel = r.operator_kernel()?;
    let table = compute_resolvent(&kernel, &r.grid, r.rule)?;
    let d = table.dim();
    let mut csv = Csv::new(&["n", "t", "i", "j", "s"]);
    for (n, s) in table.s().iter().enumerate() {
        let t = num(r.grid.time(n));
        for i in 0..d {
            for j in 0..d {
                csv.row(&[n.to_string(), t.clone(), i.to_string(), j.to_string(), num(s[(i, j)])]);
            }
        }
    }
    let res = resolvent_residuals(&table)?;
    let mut summary = Csv::new(&["res_first", "res_second", "lipschitz", "bound_m", "bound_w"]);
    let (m, w) = if r.grid.steps() >= 8 {
        let b = exponential_bound_fit(&table)?;
        (num(b.m), num(b.w))
    } else {
        (String::new(), String::new())
    };
    summary.row(&[num(res.first), num(res.second), num(table.lipschitz_estimate()), m, w]);
    Ok(vec![
        ("resolvent.csv".into(), csv.finish()),
        ("resolvent_summary.csv".into(), summary.finish()),
    ])
}

fn convolve(r: &mut Resolved, seed: Option<u64>) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let kernel = r.operator_kernel()?;
    let d = kernel.dim();
    let spec = r.noise(d, seed)?;
    let b = r.psi(d, spec.cov().dim())?;
    let x0 = r.vector(r.config.x0.clone(), d, "x0", 0.0)?;
    r.config.x0 = Some(x0.iter().cloned().collect());
    let path_id = r.config.path_id.unwrap_or(0);
    r.config.path_id = Some(path_id);
    let table = compute_resolvent(&kernel, &r.grid, r.rule)?;
    let inc = sample_wiener(&spec, &r.grid, path_id);
    let x = mild_solution(&table, &x0, &DiffusionProcess::Constant(b), &inc)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("w{i}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (n, (xn, wn)) in x.values().iter().zip(x.convolution().values()).enumerate() {
        let mut row = vec![num(r.grid.time(n))];
        row.extend(xn.iter().map(|v| num(*v)));
        row.extend(wn.iter().map(|v| num(*v)));
        csv.row(&row);
    }
    Ok(vec![("convolve.csv".into(), csv.finish())])
}

fn covariance(r: &mut Resolved, seed: Option<u64>) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let kernel = r.operator_kernel()?;
    let d = kernel.dim();
    let spec = r.noise(d, seed)?;
    let b = r.psi(d, spec.cov().dim())?;
    let n_paths = r.n_paths(DEFAULT_N_PATHS);
    let t_index = r.config.t_index.unwrap_or(r.grid.steps());
    r.config.t_index = Some(t_index);
    let table = compute_resolvent(&kernel, &r.grid, r.rule)?;
    let quad = covariance_quadrature(&table, &b, spec.cov(), t_index)?;
    let mc = covariance_monte_carlo(&table, &b, &spec, n_paths, t_index)?;
    let mut csv = Csv::new(&["i", "j", "quadrature", "monte_carlo", "std_error"]);
    for i in 0..d {
        for j in 0..d {
            csv.row(&[
                i.to_string(),
                j.to_string(),
                num(quad[(i, j)]),
                num(mc.sample_cov[(i, j)]),
                num(mc.std_error[(i, j)]),
            ]);
        }
    }
    Ok(vec![("covariance.csv".into(), csv.finish())])
}

fn verify_volterra(r: &mut Resolved, seed: Option<u64>) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let kernel = r.operator_kernel()?;
    let d = kernel.dim();
    let spec = r.noise(d, seed)?;
    let psi = DiffusionProcess::Constant(r.psi(d, spec.cov().dim())?);
    let n_paths = r.n_paths(100);
    let check = parse_rule(r.config.check_quadrature.as_deref().unwrap_or(r.rule.id()))?;
    r.config.check_quadrature = Some(check.id().into());
    let table = compute_resolvent(&kernel, &r.grid, r.rule)?;
    let reports = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = sample_wiener(&spec, &r.grid, p as u64);
            let path = stochastic_convolution(&table, &psi, &inc)?;
            verify_volterra_identity(&path, &kernel, &psi, &inc, check)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["path_id", "sup_residual", "compatible"]);
    for (p, rep) in reports.iter().enumerate() {
        csv.row(&[p.to_string(), num(rep.sup), rep.compatible.to_string()]);
    }
    Ok(vec![("verify_volterra.csv".into(), csv.finish())])
}

fn verify_ito(r: &mut Resolved, seed: Option<u64>) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let kernel = r.operator_kernel()?;
    let d = kernel.dim();
    let spec = r.noise(d, seed)?;
    let b = r.psi(d, spec.cov().dim())?;
    let n_paths = r.n_paths(DEFAULT_N_PATHS);
    let x0 = r.vector(r.config.x0.clone(), d, "x0", 0.0)?;
    r.config.x0 = Some(x0.iter().cloned().collect());
    let xi0 = r.vector(r.config.xi.clone(), d, "xi", 1.0)?;
    r.config.xi = Some(xi0.iter().cloned().collect());
    let rate = r.config.xi_rate.unwrap_or(0.0);
    r.config.xi_rate = Some(rate);
    let xi = ItoTestFunction::exponential(xi0, rate);
    let table = compute_resolvent(&kernel, &r.grid, r.rule)?;
    let psi = DiffusionProcess::Constant(b.clone());
    let reports = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = sample_wiener(&spec, &r.grid, p as u64);
            let x = mild_solution(&table, &x0, &psi, &inc)?;
            verify_ito_identity(&x, &kernel, &b, &xi, &inc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["path_id", "sup_residual", "final_residual"]);
    for (p, rep) in reports.iter().enumerate() {
        csv.row(&[p.to_string(), num(rep.sup), num(rep.last)]);
    }
    let stats = ito_residual_statistics(&table, &x0, &b, &xi, &spec, n_paths)?;
    let mut summary = Csv::new(&["n_paths", "mean", "std_error", "mean_abs"]);
    summary.row(&[
        n_paths.to_string(),
        num(stats.mean),
        num(stats.std_error),
        num(stats.mean_abs),
    ]);
    Ok(vec![
        ("verify_ito.csv".into(), csv.finish()),
        ("verify_ito_summary.csv".into(), summary.finish()),
    ])
}

fn yosida(r: &mut Resolved, seed: Option<u64>) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let generator = r.generator()?;
    let d = generator.nrows();
    let spec = r.noise(d, seed)?;
    let psi = DiffusionProcess::Constant(r.psi(d, spec.cov().dim())?);
    let n_paths = r.n_paths(DEFAULT_N_PATHS);
    let lambdas = r.config.lambdas.clone().unwrap_or(DEFAULT_LAMBDAS.to_vec());
    r.config.lambdas = Some(lambdas.clone());
    let study = yosida_convergence_study(&r.kernel, &generator, &psi, &spec, &lambdas, &r.grid, n_paths, r.rule)?;
    let mut csv = Csv::new(&["lambda", "e_S", "e_W", "e_AW"]);
    for row in &study.rows {
        csv.row(&[num(row.lambda), num(row.e_s), num(row.e_w), num(row.e_aw)]);
    }
    let mut summary = Csv::new(&["bound_m", "bound_w", "cp_warning"]);
    summary.row(&[
        num(study.bound.m),
        num(study.bound.w),
        study.cp_warning.clone().unwrap_or_default(),
    ]);
    Ok(vec![
        ("yosida.csv".into(), csv.finish()),
        ("yosida_summary.csv".into(), summary.finish()),
    ])
}
