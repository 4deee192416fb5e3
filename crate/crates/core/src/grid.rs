use crate::error::{Error, Result};

/// Uniform time grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    horizon: f64,
    steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.time(n))
    }

    /// Grid with `factor` times fewer steps on the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::InvalidParameter(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps
            )));
        }
        Grid::new(self.horizon, self.steps / factor)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.steps == other.steps && self.horizon == other.horizon
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (T={}, N={}) vs (T={}, N={})",
                self.horizon, self.steps, other.horizon, other.steps
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_node_is_horizon() {
        let g = Grid::new(0.3, 7).unwrap();
        assert_eq!(g.time(7), 0.3);
        assert_eq!(g.times().count(), 8);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn coarsen_requires_divisor() {
        let g = Grid::new(1.0, 512).unwrap();
        assert_eq!(g.coarsen(4).unwrap().steps(), 128);
        assert!(g.coarsen(3).is_err());
    }
}
