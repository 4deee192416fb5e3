//! Truncated Q-Wiener increments and the elementary Itô integral.
//!
//! Each Monte Carlo path owns a ChaCha stream selected by its `path_id`, keyed
//! by the master seed. Regenerating a path never depends on how many other
//! paths were drawn or on which thread draws it.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::{weighted_column_norm_sq, CovOperator, HSOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    cov: CovOperator,
    truncation: usize,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(cov: CovOperator, truncation: usize, seed: u64) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidParameter("noise truncation K must be >= 1".into()));
        }
        if truncation > cov.dim() {
            return Err(Error::InvalidParameter(format!(
                "noise truncation K = {truncation} exceeds dim U = {}",
                cov.dim()
            )));
        }
        Ok(Self { cov, truncation, seed })
    }

    /// All modes of `cov` retained.
    pub fn full(cov: CovOperator, seed: u64) -> Self {
        let truncation = cov.dim();
        Self { cov, truncation, seed }
    }

    pub fn cov(&self) -> &CovOperator {
        &self.cov
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// `dW[(k, n)] ~ N(0, h q_k)`, modes `k < K`, steps `n < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    grid: Grid,
    dw: DMatrix<f64>,
    path_id: u64,
}

impl WienerIncrements {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    pub fn modes(&self) -> usize {
        self.dw.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dw
    }

    pub fn step(&self, n: usize) -> DVector<f64> {
        self.dw.column(n).into_owned()
    }

    /// Increments of the same Brownian path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let dw = DMatrix::from_fn(self.dw.nrows(), grid.steps(), |k, n| {
            (0..factor).map(|j| self.dw[(k, n * factor + j)]).sum()
        });
        Ok(Self {
            grid,
            dw,
            path_id: self.path_id,
        })
    }
}

/// Draws the increments of path `path_id`.
pub fn sample_wiener(spec: &NoiseSpec, grid: &Grid, path_id: u64) -> WienerIncrements {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(path_id);
    let k = spec.truncation;
    let h = grid.step();
    let scale: Vec<f64> = spec.cov.eigenvalues()[..k].iter().map(|q| (h * q).sqrt()).collect();
    let mut dw = DMatrix::zeros(k, grid.steps());
    for n in 0..grid.steps() {
        for (j, sc) in scale.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            dw[(j, n)] = sc * z;
        }
    }
    WienerIncrements {
        grid: *grid,
        dw,
        path_id,
    }
}

pub type HSOperatorFn = Arc<dyn Fn(f64) -> HSOperator + Send + Sync>;

/// Integrand `Ψ` of the stochastic integral.
#[derive(Clone)]
pub enum DiffusionProcess {
    Constant(HSOperator),
    /// Left-continuous step function: `values[0]` on `[0, b_0]`,
    /// `values[i]` on `(b_{i-1}, b_i]`, the last value after the last breakpoint.
    Step {
        breakpoints: Vec<f64>,
        values: Vec<HSOperator>,
    },
    Deterministic {
        dim_h: usize,
        dim_u: usize,
        rule: HSOperatorFn,
    },
}

impl fmt::Debug for DiffusionProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffusionProcess::Constant(b) => f.debug_tuple("Constant").field(b).finish(),
            DiffusionProcess::Step { breakpoints, values } => f
                .debug_struct("Step")
                .field("breakpoints", breakpoints)
                .field("values", values)
                .finish(),
            DiffusionProcess::Deterministic { dim_h, dim_u, .. } => f
                .debug_struct("Deterministic")
                .field("dim_h", dim_h)
                .field("dim_u", dim_u)
                .finish(),
        }
    }
}

impl DiffusionProcess {
    pub fn step(breakpoints: Vec<f64>, values: Vec<HSOperator>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "step process needs one more value than breakpoints ({} vs {})",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let shape = (values[0].dim_h(), values[0].dim_u());
        if values.iter().any(|v| (v.dim_h(), v.dim_u()) != shape) {
            return Err(Error::InvalidParameter("step values must share one shape".into()));
        }
        Ok(Self::Step { breakpoints, values })
    }

    pub fn zero(dim_h: usize, dim_u: usize) -> Self {
        Self::Constant(HSOperator::zeros(dim_h, dim_u))
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            DiffusionProcess::Constant(b) => (b.dim_h(), b.dim_u()),
            DiffusionProcess::Step { values, .. } => (values[0].dim_h(), values[0].dim_u()),
            DiffusionProcess::Deterministic { dim_h, dim_u, .. } => (*dim_h, *dim_u),
        }
    }

    /// `Ψ(t)`.
    pub fn at(&self, t: f64) -> HSOperator {
        match self {
            DiffusionProcess::Constant(b) => b.clone(),
            DiffusionProcess::Step { breakpoints, values } => values[breakpoints.partition_point(|&b| b < t)].clone(),
            DiffusionProcess::Deterministic { rule, .. } => rule(t),
        }
    }

    /// `Ψ(t_n)` for `n < N`: the left endpoint value of every cell.
    pub fn cell_values(&self, grid: &Grid) -> Vec<HSOperator> {
        (0..grid.steps()).map(|n| self.at(grid.time(n))).collect()
    }

    /// `Σ_n h |Ψ(t_n)|²_{L_2^0}`, the discrete `N^2` norm squared.
    pub fn n2_norm_sq(&self, grid: &Grid, cov: &CovOperator) -> Result<f64> {
        let (_, dim_u) = self.dims();
        if dim_u != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "diffusion columns vs covariance modes",
                expected: dim_u,
                found: cov.dim(),
            });
        }
        let h = grid.step();
        Ok(self
            .cell_values(grid)
            .iter()
            .map(|b| h * weighted_column_norm_sq(b.matrix(), cov.eigenvalues()))
            .sum())
    }

    /// Pointwise sum, evaluated lazily.
    pub fn sum(&self, other: &DiffusionProcess) -> Result<DiffusionProcess> {
        if self.dims() != other.dims() {
            return Err(Error::InvalidParameter("diffusion shapes differ".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        let (dim_h, dim_u) = self.dims();
        Ok(DiffusionProcess::Deterministic {
            dim_h,
            dim_u,
            rule: Arc::new(move |t| HSOperator::new(a.at(t).matrix() + b.at(t).matrix()).expect("finite")),
        })
    }
}

/// `Ψ(t_m) ΔW_m` for each cell; only the first `K` columns of `Ψ` meet noise.
pub(crate) fn noise_forcing(psi: &DiffusionProcess, inc: &WienerIncrements) -> Result<Vec<DVector<f64>>> {
    let (dim_h, dim_u) = psi.dims();
    if inc.modes() > dim_u {
        return Err(Error::DimensionMismatch {
            context: "noise modes vs columns of Psi",
            expected: dim_u,
            found: inc.modes(),
        });
    }
    let k = inc.modes();
    let grid = inc.grid();
    let constant = match psi {
        DiffusionProcess::Constant(b) => Some(b.matrix().columns(0, k).into_owned()),
        _ => None,
    };
    Ok((0..grid.steps())
        .map(|m| {
            let dw = inc.dw.column(m);
            match &constant {
                Some(b) => b * dw,
                None => {
                    let b = psi.at(grid.time(m));
                    let out = b.matrix().columns(0, k) * dw;
                    debug_assert_eq!(out.len(), dim_h);
                    out
                }
            }
        })
        .collect())
}

/// Left-point Itô sums `I(t_n) = Σ_{m<n} Ψ(t_m) ΔW_m`.
pub fn stochastic_integral(psi: &DiffusionProcess, inc: &WienerIncrements) -> Result<Vec<DVector<f64>>> {
    let forcing = noise_forcing(psi, inc)?;
    let mut path = Vec::with_capacity(forcing.len() + 1);
    path.push(DVector::zeros(psi.dims().0));
    for g in &forcing {
        let next = path.last().unwrap() + g;
        path.push(next);
    }
    Ok(path)
}
