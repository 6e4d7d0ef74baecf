//! Batch-means summaries and confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Two-sided interval at `level` using a Student-t quantile with
    /// `batches − 1` degrees of freedom.
    pub fn ci(&self, level: f64, batches: usize) -> (f64, f64) {
        let q = t_quantile(level, batches);
        (self.mean - q * self.stderr, self.mean + q * self.stderr)
    }
}

pub fn t_quantile(level: f64, batches: usize) -> f64 {
    let dof = (batches.max(2) - 1) as f64;
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive dof")
        .inverse_cdf(0.5 + 0.5 * level)
}

/// Sample mean and standard error of i.i.d. values.
pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Estimate { mean, stderr, n }
}

/// Splits `xs` into `batches` contiguous groups (the last absorbs the
/// remainder) and returns the group means.
pub fn batch_means(xs: &[f64], batches: usize) -> Vec<f64> {
    let nb = batches.clamp(1, xs.len().max(1));
    let size = xs.len() / nb;
    (0..nb)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == nb { xs.len() } else { lo + size };
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Mean of all values with the standard error taken from batch means.
pub fn batch_estimate(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let bm = batch_means(xs, batches);
    let se = mean_stderr(&bm).stderr;
    Estimate {
        mean,
        stderr: se,
        n,
    }
}
