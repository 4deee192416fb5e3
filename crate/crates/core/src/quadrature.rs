//! Product-integration rules on a uniform grid.
//!
//! A convolution `∫_0^{t_n} k(σ) f(t_n - σ) dσ` is split into cells
//! `σ ∈ [i h, (i+1) h]`. The kernel is integrated exactly over each cell
//! (its cell moment `w_i`), and the unknown is replaced on the cell by a
//! constant built from its two endpoint values `f(t_{n-i})` ("near", the
//! endpoint closer to `t_n`) and `f(t_{n-i-1})` ("far"):
//!
//! ```text
//! ∫ k(σ) f(t_n - σ) dσ  ≈  Σ_i  near_i · f(t_{n-i}) + far_i · f(t_{n-i-1})
//! ```
//!
//! The same split is used for scalar weights and for matrix-valued weights.

use std::fmt;
use std::str::FromStr;

/// How the unknown is approximated on each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Quadrature {
    /// Constant equal to the value at the near endpoint; first order,
    /// implicit, positivity preserving for completely positive kernels.
    Rectangle,
    /// Constant equal to the mean of both endpoint values; second order.
    #[default]
    Trapezoid,
}

impl Quadrature {
    pub fn id(&self) -> &'static str {
        match self {
            Quadrature::Rectangle => "rectangle",
            Quadrature::Trapezoid => "trapezoid",
        }
    }

    /// Splits a cell moment into its (near, far) weights.
    pub fn split(&self, moment: f64) -> (f64, f64) {
        match self {
            Quadrature::Rectangle => (moment, 0.0),
            Quadrature::Trapezoid => (0.5 * moment, 0.5 * moment),
        }
    }
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Quadrature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rectangle" => Ok(Quadrature::Rectangle),
            "trapezoid" => Ok(Quadrature::Trapezoid),
            other => Err(format!("unknown quadrature '{other}'")),
        }
    }
}

/// Per-cell weights of one rule on one grid; index `i` is the cell
/// `[i h, (i+1) h]` of the kernel argument.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights<W> {
    pub rule: Quadrature,
    pub near: Vec<W>,
    pub far: Vec<W>,
}

impl CellWeights<f64> {
    pub fn from_moments(rule: Quadrature, moments: &[f64]) -> Self {
        let (near, far) = moments.iter().map(|&w| rule.split(w)).unzip();
        Self { rule, near, far }
    }
}

/// 8-point Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];
