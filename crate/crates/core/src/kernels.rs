//! Scalar convolution kernels `a(t)`, the scalar resolvent equation
//! `s(t) + μ (a ⋆ s)(t) = 1` and complete-positivity classification.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{CellWeights, Quadrature};

/// Piecewise-linear kernel given by samples on an increasing grid from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "tabulated kernel needs matching time/value arrays of length >= 2 (got {} and {})",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter("tabulated kernel grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated kernel grid must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated kernel values must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the segment `[t_j, t_{j+1}]` containing `t` (right-open except at the end).
    fn segment(&self, t: f64) -> usize {
        let j = self.times.partition_point(|&x| x <= t);
        j.saturating_sub(1).min(self.times.len() - 2)
    }

    fn eval(&self, t: f64) -> Result<f64> {
        if t > self.end() {
            return Err(Error::Domain(format!(
                "t = {t} beyond tabulated range [0, {}]",
                self.end()
            )));
        }
        let j = self.segment(t);
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    fn slope(&self, t: f64) -> Option<f64> {
        if t > self.end() {
            return None;
        }
        let j = self.segment(t);
        Some((self.values[j + 1] - self.values[j]) / (self.times[j + 1] - self.times[j]))
    }

    /// Exact integral of the interpolant over `[a, b]` (composite trapezoid
    /// over the merged breakpoints).
    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if b > self.end() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "cell [{a}, {b}] beyond tabulated range [0, {}]",
                self.end()
            )));
        }
        let b = b.min(self.end());
        let mut total = 0.0;
        let mut left = a;
        let mut j = self.segment(a);
        while left < b {
            let right = self.times[j + 1].min(b);
            let fl = self.eval(left)?;
            let fr = self.eval(right)?;
            total += 0.5 * (fl + fr) * (right - left);
            left = right;
            j += 1;
            if j + 1 >= self.times.len() {
                break;
            }
        }
        Ok(total)
    }
}

/// Convolution kernel `a(t)` of a scalar-type Volterra equation.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarKernel {
    /// `t^{α-1} / Γ(α)`, `α ∈ (0, 2)`.
    Fractional {
        alpha: f64,
    },
    /// `c e^{-b t}`.
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `a(t) = c`.
    Constant {
        value: f64,
    },
    /// `a(t) = t`.
    Linear,
    Tabulated(TabulatedKernel),
}

impl ScalarKernel {
    pub fn fractional(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must lie in (0, 2), got {alpha}"
            )));
        }
        Ok(Self::Fractional { alpha })
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponential kernel needs scale > 0 and rate >= 0, got ({scale}, {rate})"
            )));
        }
        Ok(Self::Exponential { scale, rate })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constant kernel needs c >= 0, got {value}"
            )));
        }
        Ok(Self::Constant { value })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        TabulatedKernel::new(times, values).map(Self::Tabulated)
    }

    /// `a(t)`. Rejects `t = 0` for the singular fractional kernels (`α < 1`).
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("kernel evaluated at t = {t}")));
        }
        match *self {
            ScalarKernel::Fractional { alpha } => {
                if t == 0.0 {
                    if alpha < 1.0 {
                        Err(Error::Domain(format!(
                            "fractional kernel with alpha = {alpha} is singular at t = 0"
                        )))
                    } else if alpha == 1.0 {
                        Ok(1.0)
                    } else {
                        Ok(0.0)
                    }
                } else {
                    Ok(t.powf(alpha - 1.0) / gamma(alpha))
                }
            }
            ScalarKernel::Exponential { scale, rate } => Ok(scale * (-rate * t).exp()),
            ScalarKernel::Constant { value } => Ok(value),
            ScalarKernel::Linear => Ok(t),
            ScalarKernel::Tabulated(ref tab) => tab.eval(t),
        }
    }

    /// `ȧ(t)` where the kernel is `W^{1,1}` with a bounded derivative.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match *self {
            ScalarKernel::Fractional { alpha } => (alpha == 1.0).then_some(0.0),
            ScalarKernel::Exponential { scale, rate } => Some(-rate * scale * (-rate * t).exp()),
            ScalarKernel::Constant { .. } => Some(0.0),
            ScalarKernel::Linear => Some(1.0),
            ScalarKernel::Tabulated(ref tab) => tab.slope(t),
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative(0.0).is_some()
    }

    /// `∫_{i h}^{(i+1) h} a(τ) dτ`, exact for the analytic variants.
    pub fn cell_moment(&self, h: f64, i: usize) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell width must be positive, got {h}")));
        }
        let lo = i as f64 * h;
        let hi = (i + 1) as f64 * h;
        Ok(match *self {
            ScalarKernel::Fractional { alpha } => {
                let g = gamma(alpha + 1.0);
                if i == 0 {
                    h.powf(alpha) / g
                } else {
                    // (lo + h)^α - lo^α without cancellation
                    lo.powf(alpha) * (alpha * (1.0 / i as f64).ln_1p()).exp_m1() / g
                }
            }
            ScalarKernel::Exponential { scale, rate } => {
                if rate == 0.0 {
                    scale * h
                } else {
                    scale * (-rate * lo).exp() * -(-rate * h).exp_m1() / rate
                }
            }
            ScalarKernel::Constant { value } => value * h,
            ScalarKernel::Linear => 0.5 * h * h * (2 * i + 1) as f64,
            ScalarKernel::Tabulated(ref tab) => tab.integral(lo, hi)?,
        })
    }

    /// Cell moments for every cell of the grid.
    pub fn cell_moments(&self, grid: &Grid) -> Result<Vec<f64>> {
        let h = grid.step();
        (0..grid.steps()).map(|i| self.cell_moment(h, i)).collect()
    }

    pub fn weights(&self, grid: &Grid, rule: Quadrature) -> Result<CellWeights<f64>> {
        Ok(CellWeights::from_moments(rule, &self.cell_moments(grid)?))
    }
}

/// Discrete solution of `s + μ (a ⋆ s) = 1` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarResolventPath {
    grid: Grid,
    mu: f64,
    rule: Quadrature,
    values: Vec<f64>,
    weights: CellWeights<f64>,
}

impl ScalarResolventPath {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn quadrature(&self) -> Quadrature {
        self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the node nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let n = (t / self.grid.step()).round().clamp(0.0, self.grid.steps() as f64) as usize;
        self.values[n]
    }

    /// Max over nodes of `|s_n + μ (a ⋆ s)_n − 1|` for the discrete convolution.
    pub fn residual(&self) -> f64 {
        (1..self.values.len())
            .map(|n| {
                let conv = discrete_convolution(&self.weights, &self.values, n);
                (self.values[n] + self.mu * conv - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn discrete_convolution(w: &CellWeights<f64>, s: &[f64], n: usize) -> f64 {
    (0..n).map(|i| w.near[i] * s[n - i] + w.far[i] * s[n - 1 - i]).sum()
}

/// Marches `s_n (1 + μ near_0) = 1 − μ [Σ_{i≥1} near_i s_{n−i} + Σ_i far_i s_{n−1−i}]`.
/// `mu` may be negative here; the public entry point restricts it.
pub(crate) fn march_scalar(w: &CellWeights<f64>, mu: f64, steps: usize) -> Result<Vec<f64>> {
    let diag = 1.0 + mu * w.near[0];
    if !(diag.abs() > f64::EPSILON) {
        return Err(Error::SingularStep { step: 1 });
    }
    let mut s = Vec::with_capacity(steps + 1);
    s.push(1.0);
    for n in 1..=steps {
        let mut acc = w.far[0] * s[n - 1];
        for i in 1..n {
            acc += w.near[i] * s[n - i] + w.far[i] * s[n - 1 - i];
        }
        let v = (1.0 - mu * acc) / diag;
        if !v.is_finite() {
            return Err(Error::Overflow { step: n, norm: v.abs() });
        }
        s.push(v);
    }
    Ok(s)
}

/// Solves `s(t) + μ (a ⋆ s)(t) = 1` by product integration.
pub fn solve_scalar_resolvent(
    kernel: &ScalarKernel,
    mu: f64,
    grid: &Grid,
    rule: Quadrature,
) -> Result<ScalarResolventPath> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resolvent coefficient mu must be finite and >= 0, got {mu}"
        )));
    }
    let weights = kernel.weights(grid, rule)?;
    let values = march_scalar(&weights, mu, grid.steps())?;
    Ok(ScalarResolventPath {
        grid: *grid,
        mu,
        rule,
        values,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub holds: bool,
    /// `(t, description)` of the first sampled violation.
    pub first_violation: Option<(f64, String)>,
}

/// Sufficient condition for complete positivity: `a` nonnegative and
/// nonincreasing on the sampled grid (`t = 0` skipped when singular).
pub fn check_nonincreasing_nonnegative(kernel: &ScalarKernel, grid: &Grid) -> Result<MonotonicityReport> {
    let start = usize::from(kernel.eval(0.0).is_err());
    let mut prev: Option<f64> = None;
    for n in start..=grid.steps() {
        let t = grid.time(n);
        let v = kernel.eval(t)?;
        if v < -1e-12 {
            return Ok(MonotonicityReport {
                holds: false,
                first_violation: Some((t, format!("a({t}) = {v} is negative"))),
            });
        }
        if let Some(p) = prev {
            if v - p > 1e-12 {
                return Ok(MonotonicityReport {
                    holds: false,
                    first_violation: Some((t, format!("a increases to {v} from {p}"))),
                });
            }
        }
        prev = Some(v);
    }
    Ok(MonotonicityReport {
        holds: true,
        first_violation: None,
    })
}

pub const DEFAULT_CP_MU: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CpSample {
    pub mu: f64,
    pub min_s: f64,
    pub t_min: f64,
    pub path: ScalarResolventPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpVerdict {
    /// No negative value found for any tested μ. Not a proof.
    ConsistentWithCompletePositivity,
    NotCompletelyPositive {
        mu: f64,
        t: f64,
        s: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpReport {
    pub tol: f64,
    pub samples: Vec<CpSample>,
    pub verdict: CpVerdict,
}

/// Falsification test for complete positivity over a finite set of `μ`.
///
/// Uses the rectangle rule, which keeps the discrete solution nonnegative for
/// completely positive kernels, so negative values are genuine witnesses and
/// not quadrature oscillations. Default tolerance is `1e-8 + 10 h`.
pub fn check_complete_positivity(
    kernel: &ScalarKernel,
    mus: &[f64],
    grid: &Grid,
    tol: Option<f64>,
) -> Result<CpReport> {
    if mus.is_empty() {
        return Err(Error::InvalidParameter("mu list is empty".into()));
    }
    let tol = tol.unwrap_or(1e-8 + 10.0 * grid.step());
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let samples = mus
        .par_iter()
        .map(|&mu| {
            let path = solve_scalar_resolvent(kernel, mu, grid, Quadrature::Rectangle)?;
            let (n_min, min_s) = path
                .values()
                .iter()
                .cloned()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (n, v)| if v < acc.1 { (n, v) } else { acc });
            Ok(CpSample {
                mu,
                min_s,
                t_min: grid.time(n_min),
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = samples
        .iter()
        .find(|s| s.min_s < -tol)
        .map(|s| CpVerdict::NotCompletelyPositive {
            mu: s.mu,
            t: s.t_min,
            s: s.min_s,
        })
        .unwrap_or(CpVerdict::ConsistentWithCompletePositivity);
    Ok(CpReport { tol, samples, verdict })
}
