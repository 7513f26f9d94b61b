use rayon::prelude::*;

use super::qv::cross_qv_null_se;
use super::{ks_normal, mean, sample_sd, TestReport, Timed, Verdict, MIN_PATHS};
use crate::decompose::TimeChange;
use crate::error::{Error, Result};
use crate::sde::SamplePath;

fn need_paths(n: usize) -> Result<()> {
    if n < MIN_PATHS {
        return Err(Error::TooFewPaths {
            got: n,
            need: MIN_PATHS,
        });
    }
    Ok(())
}

/// Least-squares slope (with intercept) of `v − v₀` against `t`.
fn ols_slope(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&ti, &vi) in t.iter().zip(v) {
        sxy += (ti - tm) * (vi - vm);
        sxx += (ti - tm) * (ti - tm);
    }
    sxy / sxx
}

/// Ensemble drift rate with H0: slope = 0.
///
/// Each path contributes its own least-squares slope; the statistic is their
/// mean (on a shared grid this equals the slope of the ensemble mean) and the
/// standard error is the spread of per-path slopes over `√n`.
pub fn drift_slope<P: Timed + Sync>(paths: &[P], alpha: f64) -> Result<TestReport> {
    need_paths(paths.len())?;
    let slopes: Vec<f64> = paths.par_iter().map(|p| ols_slope(&p.times(), p.samples())).collect();
    let se = sample_sd(&slopes) / (slopes.len() as f64).sqrt();
    Ok(TestReport::z_test("drift_slope", mean(&slopes), se, alpha))
}

/// The three components of a Brownian conformance check. The overall verdict
/// fails if any component fails.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    /// (a) mean of per-path `QV/T` minus one, inside a fixed band.
    pub qv: TestReport,
    /// (b) KS test of pooled normalized increments `ΔW/√Δt` against N(0,1).
    pub normality: TestReport,
    /// (c) drift slope consistent with 0.
    pub drift: TestReport,
}

impl ConformanceReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::from_bool(self.reports().iter().all(|r| r.passed()))
    }

    pub fn reports(&self) -> [&TestReport; 3] {
        [&self.qv, &self.normality, &self.drift]
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        for r in [&mut self.qv, &mut self.normality, &mut self.drift] {
            r.name = format!("{prefix}.{}", r.name);
        }
        self
    }
}

/// Checks that each path looks like a standard Brownian motion on its own
/// time axis. Times need not be evenly spaced; increments are normalized by
/// the local spacing.
pub fn bm_conformance_test<P: Timed + Sync>(paths: &[P], alpha: f64, qv_band: f64) -> Result<ConformanceReport> {
    need_paths(paths.len())?;
    let per_path: Vec<(f64, Vec<f64>)> = paths
        .par_iter()
        .map(|p| {
            let t = p.times();
            let v = p.samples();
            let qv: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            let span = t[t.len() - 1] - t[0];
            let z = t
                .windows(2)
                .zip(v.windows(2))
                .filter(|(dt, _)| dt[1] > dt[0])
                .map(|(dt, dv)| (dv[1] - dv[0]) / (dt[1] - dt[0]).sqrt())
                .collect();
            (qv / span, z)
        })
        .collect();

    let ratios: Vec<f64> = per_path.iter().map(|(r, _)| *r).collect();
    let qv = TestReport::band(
        "qv_ratio",
        mean(&ratios) - 1.0,
        sample_sd(&ratios) / (ratios.len() as f64).sqrt(),
        qv_band,
    );

    let pooled: Vec<f64> = per_path.into_iter().flat_map(|(_, z)| z).collect();
    let mut normality = ks_normal(&pooled, alpha)?;
    normality.name = "increment_normality".into();

    let drift = drift_slope(paths, alpha)?;
    Ok(ConformanceReport { qv, normality, drift }.prefixed("bm_conformance"))
}

/// What the realized cross-variation is compared against.
#[derive(Debug, Clone, Copy)]
pub enum CrossPrediction<'a> {
    /// H0: `[θ, Y] = 0` (independence), decided at level `alpha`.
    Zero { alpha: f64 },
    /// Per-path predicted totals; pass when the ensemble relative error is
    /// within `relative_tol`.
    PerPath { totals: &'a [f64], relative_tol: f64 },
}

/// Realized cross-variation between each path's angle and a radial
/// component, at the horizon, aggregated over the ensemble.
pub fn independence_cross_test(
    angles: &[SamplePath<f64>],
    radial: &[SamplePath<f64>],
    prediction: CrossPrediction<'_>,
) -> Result<TestReport> {
    if angles.len() != radial.len() {
        return Err(Error::GridMismatch);
    }
    need_paths(angles.len())?;
    let per_path: Vec<(f64, f64)> = angles
        .par_iter()
        .zip(radial)
        .map(|(a, r)| {
            if a.grid != r.grid {
                return Err(Error::GridMismatch);
            }
            let cross: f64 = a
                .values
                .windows(2)
                .zip(r.values.windows(2))
                .map(|(x, y)| (x[1] - x[0]) * (y[1] - y[0]))
                .sum();
            Ok((cross, cross_qv_null_se(&a.values, &r.values)))
        })
        .collect::<Result<_>>()?;
    let n = per_path.len() as f64;
    let total: f64 = per_path.iter().map(|(c, _)| c).sum();
    let se_total = per_path.iter().map(|(_, s)| s * s).sum::<f64>().sqrt();

    match prediction {
        CrossPrediction::Zero { alpha } => Ok(TestReport::z_test("independence_cross", total / n, se_total / n, alpha)),
        CrossPrediction::PerPath { totals, relative_tol } => {
            if totals.len() != per_path.len() {
                return Err(Error::GridMismatch);
            }
            let predicted: f64 = totals.iter().sum();
            Ok(TestReport::band(
                "cross_vs_prediction",
                (total - predicted) / predicted.abs(),
                se_total / predicted.abs(),
                relative_tol,
            ))
        }
    }
}

/// Numerical counterparts of the time-change facts: (i) the quadratic
/// variation of `β∘ρ` is `ρ`; (ii) `γ = ∫ J^{-1/2} d(β∘ρ)` is a Brownian
/// motion; (iv) `γ` has zero cross-variation with a martingale `η` of the
/// clock's filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeReport {
    pub qv: TestReport,
    pub gamma: ConformanceReport,
    pub cross: TestReport,
}

impl TimeChangeReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::from_bool(self.qv.passed() && self.gamma.verdict().passed() && self.cross.passed())
    }
}

/// `gamma_{k+1} = gamma_k + Δξ_k / √J_k` with `J_k` the clock rate.
fn rescale(xi: &SamplePath<f64>, tc: &TimeChange) -> Result<SamplePath<f64>> {
    let mut out = Vec::with_capacity(xi.values.len());
    let mut acc = 0.0;
    out.push(acc);
    for (k, w) in xi.values.windows(2).enumerate() {
        let rate = tc.rate(k);
        if rate <= 0.0 {
            return Err(Error::FlatClock { step: k });
        }
        acc += (w[1] - w[0]) / rate.sqrt();
        out.push(acc);
    }
    Ok(xi.with_values(out))
}

/// `time_changed[p]` is `β_{ρ_t}` sampled on the grid of `clocks[p]`; `eta[p]`
/// is driven independently of `β`.
pub fn timechange_validators(
    time_changed: &[SamplePath<f64>],
    clocks: &[TimeChange],
    eta: &[SamplePath<f64>],
    alpha: f64,
    qv_band: f64,
) -> Result<TimeChangeReport> {
    if time_changed.len() != clocks.len() || time_changed.len() != eta.len() {
        return Err(Error::GridMismatch);
    }
    need_paths(time_changed.len())?;
    for ((x, c), e) in time_changed.iter().zip(clocks).zip(eta) {
        if x.grid != c.grid() || x.grid != e.grid {
            return Err(Error::GridMismatch);
        }
    }

    let ratios: Vec<f64> = time_changed
        .par_iter()
        .zip(clocks)
        .map(|(x, c)| {
            let qv: f64 = x.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            qv / c.total()
        })
        .collect();
    let mut qv = TestReport::band(
        "qv_matches_clock",
        mean(&ratios) - 1.0,
        sample_sd(&ratios) / (ratios.len() as f64).sqrt(),
        qv_band,
    );
    qv.name = "timechange.qv_matches_clock".into();

    let gammas: Vec<SamplePath<f64>> = time_changed
        .par_iter()
        .zip(clocks)
        .map(|(x, c)| rescale(x, c))
        .collect::<Result<_>>()?;
    let gamma = bm_conformance_test(&gammas, alpha, qv_band)?.prefixed("timechange.gamma");

    let mut cross = independence_cross_test(&gammas, eta, CrossPrediction::Zero { alpha })?;
    cross.name = "timechange.gamma_eta_cross".into();
    Ok(TimeChangeReport { qv, gamma, cross })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{stream_id, Grid, WienerBundle};
    use crate::stats::DEFAULT_ALPHA;

    fn grid() -> Grid {
        Grid::new(1e-3, 1000).unwrap()
    }

    fn bms(n: usize, seed: u64, substream: u32) -> Vec<SamplePath<f64>> {
        (0..n)
            .map(|i| WienerBundle::generate(grid(), 1, seed, stream_id(substream, i as u32)).path(0))
            .collect()
    }

    #[test]
    fn drift_slope_cases() {
        let paths = bms(512, 1, 0);
        let r = drift_slope(&paths, DEFAULT_ALPHA).unwrap();
        assert!(r.z_score.abs() < 3.0, "{r:?}");

        let det: Vec<_> = (0..40).map(|_| SamplePath::from_fn(grid(), |t| 2.0 * t)).collect();
        let r = drift_slope(&det, DEFAULT_ALPHA).unwrap();
        assert!((r.statistic - 2.0).abs() < 1e-9);
        assert!(r.null_scale < 1e-9);
        assert!(!r.passed());

        assert!(matches!(
            drift_slope(&paths[..10], DEFAULT_ALPHA),
            Err(Error::TooFewPaths { got: 10, need: 30 })
        ));
    }

    #[test]
    fn conformance_passes_raw_brownian_paths() {
        let r = bm_conformance_test(&bms(512, 2, 0), DEFAULT_ALPHA, 0.05).unwrap();
        assert!(r.verdict().passed(), "{r:#?}");
    }

    #[test]
    fn conformance_catches_drift() {
        let drifted: Vec<_> = bms(512, 3, 0)
            .into_iter()
            .map(|p| {
                let g = p.grid;
                let v = p.values.iter().enumerate().map(|(k, x)| x + g.time(k)).collect();
                p.with_values(v)
            })
            .collect();
        let r = bm_conformance_test(&drifted, DEFAULT_ALPHA, 0.05).unwrap();
        assert!(!r.drift.passed(), "{r:#?}");
        assert!(!r.verdict().passed());
    }

    #[test]
    fn conformance_catches_wrong_clock() {
        // W_{2t} on the unscaled clock: √2 × BM in law.
        let fast: Vec<_> = bms(512, 4, 0).into_iter().map(|p| p.map(|x| x * 2f64.sqrt())).collect();
        let r = bm_conformance_test(&fast, DEFAULT_ALPHA, 0.05).unwrap();
        assert!(!r.qv.passed());
        assert!((r.qv.statistic - 1.0).abs() < 0.05, "QV ratio - 1 = {}", r.qv.statistic);
    }

    #[test]
    fn independence_and_prediction() {
        let a = bms(512, 5, 0);
        let b = bms(512, 5, 1);
        let r = independence_cross_test(&a, &b, CrossPrediction::Zero { alpha: DEFAULT_ALPHA }).unwrap();
        assert!(r.z_score.abs() < 3.0);

        // Y = θ + independent noise: [θ, Y]_1 = [θ]_1 per path.
        let y: Vec<_> = a
            .iter()
            .zip(&b)
            .map(|(x, z)| x.with_values(x.values.iter().zip(&z.values).map(|(p, q)| p + q).collect()))
            .collect();
        let dep = independence_cross_test(&a, &y, CrossPrediction::Zero { alpha: DEFAULT_ALPHA }).unwrap();
        assert!(dep.z_score > 5.0);
        let totals = vec![1.0; 512];
        let pred = independence_cross_test(
            &a,
            &y,
            CrossPrediction::PerPath {
                totals: &totals,
                relative_tol: 0.05,
            },
        )
        .unwrap();
        assert!(pred.passed(), "{pred:?}");
    }

    #[test]
    fn timechange_quarter_clock() {
        let g = grid();
        let clock = TimeChange::from_rates(g, std::iter::repeat(0.25)).unwrap();
        let xi: Vec<_> = bms(512, 6, 0).into_iter().map(|p| p.map(|x| 0.5 * x)).collect();
        let eta = bms(512, 6, 2);
        let clocks = vec![clock; 512];
        let r = timechange_validators(&xi, &clocks, &eta, DEFAULT_ALPHA, 0.05).unwrap();
        assert!(r.qv.passed(), "{:?}", r.qv);
        assert!(r.gamma.verdict().passed(), "{:#?}", r.gamma);
        assert!(r.cross.z_score.abs() < 3.0);

        // Identity clock: (i) reduces to the plain QV check.
        let id = vec![TimeChange::identity(g); 512];
        let r = timechange_validators(&bms(512, 7, 0), &id, &eta, DEFAULT_ALPHA, 0.05).unwrap();
        assert!(r.verdict().passed());
    }

    #[test]
    fn mismatched_inputs() {
        let a = bms(40, 8, 0);
        let short: Vec<_> = (0..40)
            .map(|_| SamplePath::from_fn(Grid::new(1e-3, 10).unwrap(), |t| t))
            .collect();
        assert_eq!(
            independence_cross_test(&a, &short, CrossPrediction::Zero { alpha: 0.01 }).unwrap_err(),
            Error::GridMismatch
        );
    }
}
