//! Estimators and hypothesis tests.
//!
//! Every test reduces an ensemble of paths to a [`TestReport`]. Per-path
//! quantities may be computed in parallel but are always summed in path
//! order, so reports are bit-identical regardless of thread count.

use std::borrow::Cow;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::decompose::DdsPath;
use crate::sde::SamplePath;

mod hypothesis;
mod ks;
mod qv;

pub use hypothesis::{
    bm_conformance_test, drift_slope, independence_cross_test, timechange_validators, ConformanceReport,
    CrossPrediction, TimeChangeReport,
};
pub use ks::{kolmogorov_q, ks_normal, ks_two_sample};
pub use qv::{cross_qv_null_se, qv_null_se, realized_cross_qv, realized_qv, QVEstimate};

/// Significance level used throughout.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Minimum ensemble size for the ensemble tests.
pub const MIN_PATHS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        *self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// How a report's verdict is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Pass iff `p_value > tolerance`.
    Alpha,
    /// Pass iff `|statistic| <= tolerance`.
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    /// Standard error of `statistic` under the null.
    pub null_scale: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub criterion: Criterion,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// `statistic / scale`, with a zero scale giving 0 or ±∞.
pub fn z_of(statistic: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        statistic / scale
    } else if statistic == 0.0 {
        0.0
    } else {
        statistic.signum() * f64::INFINITY
    }
}

/// Two-sided normal tail probability `P(|Z| >= |z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / SQRT_2)
}

impl TestReport {
    /// Normal-approximation test of `statistic = 0`.
    pub fn z_test(name: impl Into<String>, statistic: f64, null_scale: f64, alpha: f64) -> Self {
        let z = z_of(statistic, null_scale);
        let p = two_sided_p(z);
        TestReport {
            name: name.into(),
            statistic,
            null_scale,
            z_score: z,
            p_value: p,
            criterion: Criterion::Alpha,
            tolerance: alpha,
            verdict: Verdict::from_bool(p > alpha),
        }
    }

    /// Fixed tolerance band `|statistic| <= tolerance`; z and p are reported
    /// for information.
    pub fn band(name: impl Into<String>, statistic: f64, null_scale: f64, tolerance: f64) -> Self {
        let z = z_of(statistic, null_scale);
        TestReport {
            name: name.into(),
            statistic,
            null_scale,
            z_score: z,
            p_value: two_sided_p(z),
            criterion: Criterion::Band,
            tolerance,
            verdict: Verdict::from_bool(statistic.abs() <= tolerance),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// Standard errors separating the statistic from `value`.
    pub fn distance_from(&self, value: f64) -> f64 {
        z_of(self.statistic - value, self.null_scale).abs()
    }
}

/// A scalar path with strictly increasing (not necessarily even) times.
pub trait Timed {
    fn times(&self) -> Cow<'_, [f64]>;
    fn samples(&self) -> &[f64];
}

impl Timed for SamplePath<f64> {
    fn times(&self) -> Cow<'_, [f64]> {
        Cow::Owned(self.grid.times().collect())
    }
    fn samples(&self) -> &[f64] {
        &self.values
    }
}

impl Timed for DdsPath {
    fn times(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.clock())
    }
    fn samples(&self) -> &[f64] {
        self.values()
    }
}

impl<T: Timed> Timed for &T {
    fn times(&self) -> Cow<'_, [f64]> {
        (*self).times()
    }
    fn samples(&self) -> &[f64] {
        (*self).samples()
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}
