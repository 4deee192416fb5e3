//! Order-independent aggregation for Monte Carlo estimators.
//!
//! Per-path work runs on the rayon pool, but every reduction is performed over
//! fixed-size blocks of path indices in a fixed tree order, so the floating
//! point result does not depend on the number of worker threads.

use rayon::prelude::*;

const BLOCK: usize = 64;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}

fn tree_reduce(mut parts: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; width];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                add_into(&mut left, &right);
            }
            next.push(left);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Sums `f(i)` over `i in 0..count` component-wise, in parallel, with a result
/// that is bit-identical for any thread count.
pub fn par_sum_vec<F>(count: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    let partial: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(count);
            let items: Vec<Vec<f64>> = (lo..hi).map(&f).collect();
            tree_reduce(items, width)
        })
        .collect();
    tree_reduce(partial, width)
}

/// Sample moments of a scalar sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = pairwise_sum(xs) / nf;
        let dev = |p: i32| -> f64 {
            let v: Vec<f64> = xs.iter().map(|x| (x - mean).powi(p)).collect();
            pairwise_sum(&v) / nf
        };
        let m2 = dev(2);
        let m3 = dev(3);
        let m4 = dev(4);
        let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            count: n,
            mean,
            variance,
            skewness,
            excess_kurtosis,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn par_sum_is_thread_count_independent() {
        let f = |i: usize| vec![(i as f64).sin() * 1e-3, 1.0 / (1.0 + i as f64)];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| par_sum_vec(1000, 2, f))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn moments_of_symmetric_sample() {
        let m = Moments::of(&[-1.0, 0.0, 1.0]);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 1.0);
        assert_eq!(m.skewness, 0.0);
    }
}
