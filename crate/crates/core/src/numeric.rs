//! Small numerical helpers shared across modules.

/// `ln(r!)`. Exact summation below 256, Stirling series above.
pub fn ln_factorial(r: usize) -> f64 {
    if r < 256 {
        (2..=r).map(|k| (k as f64).ln()).sum()
    } else {
        let x = r as f64 + 1.0;
        // ln Γ(x) via Stirling with three correction terms.
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

pub fn poisson_ln_pmf(r: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if r == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + r as f64 * mean.ln() - ln_factorial(r)
}

/// `P(R > r_max)` for `R ~ Poisson(mean)`, summed directly to avoid
/// cancellation.
pub fn poisson_tail(mean: f64, r_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut r = r_max + 1;
    let mut term = poisson_ln_pmf(r, mean).exp();
    let mut total = 0.0;
    loop {
        total += term;
        r += 1;
        term *= mean / r as f64;
        if (r as f64) > mean && term <= total * 1e-17 {
            break;
        }
        if term == 0.0 && (r as f64) > mean {
            break;
        }
    }
    total
}

/// Smallest `r_max` with `P(R > r_max) < tol`.
pub fn poisson_truncation(mean: f64, tol: f64) -> usize {
    let mut r = mean.floor() as usize;
    while poisson_tail(mean, r) >= tol {
        r += 1;
    }
    r
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

/// Sample mean and (n-1)-denominator standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
