//! Kolmogorov–Smirnov tests with the asymptotic Kolmogorov p-value.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use super::{Criterion, TestReport, Verdict};
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 30;

/// Kolmogorov survival function `Q(λ) = P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let s: f64 = (1..=8).map(|k| y.powi((2 * k - 1) * (2 * k - 1))).sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn p_value(d: f64, effective_n: f64) -> f64 {
    let rn = effective_n.sqrt();
    kolmogorov_q((rn + 0.12 + 0.11 / rn) * d)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn report(name: &str, d: f64, n_eff: f64, alpha: f64) -> TestReport {
    let p = p_value(d, n_eff);
    let scale = 1.0 / n_eff.sqrt();
    TestReport {
        name: name.to_string(),
        statistic: d,
        null_scale: scale,
        z_score: d / scale,
        p_value: p,
        criterion: Criterion::Alpha,
        tolerance: alpha,
        verdict: Verdict::from_bool(p > alpha),
    }
}

/// Two-sample KS test of equal distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: s.len(),
                need: MIN_SAMPLES,
            });
        }
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(report("ks_two_sample", d, na * nb / (na + nb), alpha))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// One-sample KS test against the standard normal.
pub fn ks_normal(xs: &[f64], alpha: f64) -> Result<TestReport> {
    if xs.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: xs.len(),
            need: MIN_SAMPLES,
        });
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(report("ks_normal", d, n, alpha))
}
