//! Monte Carlo summary statistics.

use serde::Serialize;

/// Neumaier compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Two-pass estimate over `xs`.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, std_error, n }
    }

    /// Number of standard errors separating the mean from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.std_error
    }
}

/// Difference of two independent estimates.
pub fn difference(a: &Estimate, b: &Estimate) -> Estimate {
    Estimate {
        mean: a.mean - b.mean,
        std_error: a.std_error.hypot(b.std_error),
        n: a.n.min(b.n),
    }
}

/// Sample covariance of paired samples with the standard error of the
/// product mean.
pub fn covariance(xs: &[f64], ys: &[f64]) -> Estimate {
    let n = xs.len().min(ys.len());
    let mx = compensated_sum(xs[..n].iter().copied()) / n as f64;
    let my = compensated_sum(ys[..n].iter().copied()) / n as f64;
    let prods: Vec<f64> = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let mut e = Estimate::from_samples(&prods);
    e.mean *= n as f64 / (n as f64 - 1.0);
    e
}
