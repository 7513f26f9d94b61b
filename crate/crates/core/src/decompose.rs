//! Radial/angular decomposition of simulated paths, the time-changes that
//! drive the angle, and Dambis–Dubins–Schwarz extraction of the angular
//! Brownian motion.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mat2::{f_coeff, qr_decompose, rotation_matrix, Mat2, UpperTri2};
use crate::sde::{Grid, Point2, SamplePath};

/// A radial path paired with the unwrapped angle on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<R> {
    pub radial: SamplePath<R>,
    pub angle: SamplePath<f64>,
}

/// Radius and angle of a planar path.
pub type PolarDecomposition = Decomposition<f64>;

/// `x = Q(θ)·T` along a matrix path.
pub type QrDecomposition = Decomposition<UpperTri2>;

impl PolarDecomposition {
    pub fn log_radius(&self) -> SamplePath<f64> {
        self.radial.map(|r| r.ln())
    }

    pub fn reconstruct(&self, k: usize) -> Point2 {
        let (r, th) = (self.radial.values[k], self.angle.values[k]);
        Point2::new(r * th.cos(), r * th.sin())
    }
}

impl QrDecomposition {
    pub fn reconstruct(&self, k: usize) -> Mat2 {
        rotation_matrix(self.angle.values[k]).matrix() * self.radial.values[k].to_mat2()
    }

    pub fn component(&self, pick: impl Fn(&UpperTri2) -> f64) -> SamplePath<f64> {
        self.radial.map(pick)
    }
}

/// Unwraps the argument of a sequence of nonzero planar vectors by taking,
/// at each step, the branch closest to the previous angle.
fn unwrap_angles(points: impl Iterator<Item = (f64, f64)>, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut prev: Option<(f64, f64)> = None;
    for (step, (x, y)) in points.enumerate() {
        match prev {
            None => out.push(y.atan2(x)),
            Some((px, py)) => {
                let delta = (px * y - py * x).atan2(px * x + py * y);
                if delta.abs() >= PI {
                    return Err(Error::UnwrapJump { step: step - 1, delta });
                }
                let last = *out.last().expect("non-empty");
                out.push(last + delta);
            }
        }
        prev = Some((x, y));
    }
    Ok(out)
}

pub fn polar_decompose(path: &SamplePath<Point2>) -> Result<PolarDecomposition> {
    if let Some(step) = path.values.iter().position(|p| p.norm() == 0.0) {
        return Err(Error::OriginHit { step });
    }
    let angles = unwrap_angles(path.values.iter().map(|p| (p.x(), p.y())), path.values.len())?;
    Ok(Decomposition {
        radial: path.map(Point2::norm),
        angle: path.with_values(angles),
    })
}

pub fn qr_path(path: &SamplePath<Mat2>) -> Result<QrDecomposition> {
    let radial = path
        .values
        .iter()
        .enumerate()
        .map(|(step, m)| {
            qr_decompose(m).map(|(_, t)| t).map_err(|e| match e {
                Error::NonPositiveDeterminant { det } => Error::NonPositiveDeterminantAt { step, det },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let angles = unwrap_angles(path.values.iter().map(|m| (m.a(), m.c())), path.values.len())?;
    Ok(Decomposition {
        radial: path.with_values(radial),
        angle: path.with_values(angles),
    })
}

/// A nondecreasing clock sampled on a grid, starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    grid: Grid,
    values: Vec<f64>,
}

impl TimeChange {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} clock values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidGrid("clock must start at 0".into()));
        }
        if let Some(step) = values.windows(2).position(|w| !w[1].is_finite() || w[1] < w[0]) {
            return Err(Error::InvalidGrid(format!(
                "clock decreases or is not finite after sample {step}"
            )));
        }
        Ok(TimeChange { grid, values })
    }

    /// Left-endpoint Riemann sum `Σ_{j<k} rate_j·dt`.
    pub fn from_rates(grid: Grid, rates: impl Iterator<Item = f64>) -> Result<Self> {
        let dt = grid.dt();
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(acc);
        for rate in rates.take(grid.n_steps()) {
            acc += rate * dt;
            values.push(acc);
        }
        TimeChange::new(grid, values)
    }

    /// The identity clock `t ↦ t`.
    pub fn identity(grid: Grid) -> Self {
        TimeChange {
            grid,
            values: grid.times().collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn total(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    /// Rate `(tc_{k+1} − tc_k)/dt` of step `k`.
    pub fn rate(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / self.grid.dt()
    }

    /// Piecewise-linear inverse: the first `t` with `tc(t) = s`. `None` when
    /// `s` lies outside `[0, total]`.
    pub fn inverse(&self, s: f64) -> Option<f64> {
        if !(0.0..=self.total()).contains(&s) {
            return None;
        }
        let hi = self.values.partition_point(|&v| v < s);
        if hi == 0 {
            return Some(0.0);
        }
        let (v0, v1) = (self.values[hi - 1], self.values[hi]);
        let frac = if v1 > v0 { (s - v0) / (v1 - v0) } else { 0.0 };
        Some(self.grid.time(hi - 1) + frac * self.grid.dt())
    }
}

/// `τ_t = ∫₀ᵗ 1/|x_s|² ds`, left-endpoint sum on the radius path's grid.
pub fn time_change_planar(radial: &SamplePath<f64>) -> Result<TimeChange> {
    if let Some(step) = radial.values.iter().position(|&r| r <= 0.0) {
        return Err(Error::OriginHit { step });
    }
    TimeChange::from_rates(radial.grid, radial.values.iter().map(|r| 1.0 / (r * r)))
}

/// `R_t = ∫₀ᵗ (f(T_s)/T¹¹_s)² ds`, left-endpoint sum.
pub fn time_change_matrix(radial: &SamplePath<UpperTri2>) -> Result<TimeChange> {
    if let Some((step, t)) = radial.values.iter().enumerate().find(|(_, t)| t.t11() <= 0.0) {
        return Err(Error::NonPositiveDiagonal { step, t11: t.t11() });
    }
    TimeChange::from_rates(
        radial.grid,
        radial.values.iter().map(|t| (f_coeff(&t.to_mat2()) / t.t11()).powi(2)),
    )
}

/// Longest run of grid steps the clock may stay flat before inversion is
/// considered ill-posed.
const FLAT_SPAN: usize = 10;
const FLAT_EPS: f64 = 1e-12;

/// The angle read on its own clock: knots `(tc(t_k), θ(t_k))`.
///
/// Between knots `W(s) = θ(tc⁻¹(s))` is linear, since both the inverse clock
/// and the interpolated angle are piecewise linear on the same knots.
#[derive(Debug, Clone, PartialEq)]
pub struct DdsPath {
    clock: Vec<f64>,
    values: Vec<f64>,
}

impl DdsPath {
    pub fn clock(&self) -> &[f64] {
        &self.clock
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.clock.last().expect("non-empty")
    }

    /// `W(s)` for `s ∈ [0, horizon]`.
    pub fn at(&self, s: f64) -> Option<f64> {
        if !(0.0..=self.horizon()).contains(&s) {
            return None;
        }
        let hi = self.clock.partition_point(|&c| c < s);
        if hi == 0 {
            return Some(self.values[0]);
        }
        let (c0, c1) = (self.clock[hi - 1], self.clock[hi]);
        let frac = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        Some(self.values[hi - 1] + frac * (self.values[hi] - self.values[hi - 1]))
    }

    /// Median clock increment over the run.
    pub fn median_step(&self) -> f64 {
        let mut d: Vec<f64> = self.clock.windows(2).map(|w| w[1] - w[0]).collect();
        d.sort_by(f64::total_cmp);
        let n = d.len();
        if n % 2 == 1 {
            d[n / 2]
        } else {
            0.5 * (d[n / 2 - 1] + d[n / 2])
        }
    }

    /// `W` on the even clock grid `s_j = j·step`, `j ≤ horizon/step`.
    ///
    /// Linear interpolation inside a knot interval removes Brownian-bridge
    /// variance, so the realized quadratic variation of the result
    /// underestimates the clock whenever `step` is comparable to the knot
    /// spacing. Statistical tests should use the knots directly.
    pub fn resample(&self, step: f64) -> Result<SamplePath<f64>> {
        let n = (self.horizon() / step).floor() as usize;
        let grid = Grid::new(step, n.max(1))?;
        let values = grid
            .times()
            .map(|s| self.at(s.min(self.horizon())).expect("inside clock range"))
            .collect();
        SamplePath::new(grid, values)
    }
}

/// Reads `angle` on the clock `tc`, returning `W` with `W(tc(t)) = θ(t)`.
pub fn dds_extract(angle: &SamplePath<f64>, tc: &TimeChange) -> Result<DdsPath> {
    if angle.grid != tc.grid {
        return Err(Error::GridMismatch);
    }
    let clock = tc.values();
    if clock.len() > FLAT_SPAN + 1 {
        if let Some(step) = clock
            .windows(FLAT_SPAN + 2)
            .position(|w| w[FLAT_SPAN + 1] - w[0] < FLAT_EPS)
        {
            return Err(Error::FlatClock { step });
        }
    }
    Ok(DdsPath {
        clock: clock.to_vec(),
        values: angle.values.clone(),
    })
}
