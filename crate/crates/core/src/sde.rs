//! Fixed-step Euler–Maruyama integration over seeded Wiener increments.
//!
//! # Random streams
//!
//! Every path draws its increments from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to the 64-bit stream `(substream << 32) | path_index`. ChaCha is
//! counter based, so streams are independent and a path's increments depend
//! only on `(seed, substream, path_index, grid, dim)`, never on scheduling.
//! Increments are drawn step-major: all `dim` drivers of step 0, then step 1,
//! and so on.

use std::ops::{Add, Mul};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;

/// Substream tags. The high 32 bits of the ChaCha stream id.
pub mod substream {
    /// Main scenario paths.
    pub const PATHS: u32 = 0;
    /// Second ensemble for equivariance comparisons.
    pub const EQUIVARIANCE: u32 = 1;
    /// Drivers that must be independent of the main paths.
    pub const INDEPENDENT: u32 = 2;
}

pub fn stream_id(substream: u32, path: u32) -> u64 {
    (u64::from(substream) << 32) | u64::from(path)
}

pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform time grid `t_k = k·dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dt: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Grid { dt, n_steps })
    }

    /// Grid covering `[0, horizon]`; the step count is `horizon/dt` rounded.
    pub fn from_horizon(dt: f64, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= dt) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be >= dt, got horizon={horizon}, dt={dt}"
            )));
        }
        Grid::new(dt, (horizon / dt).round() as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Index of the grid point closest to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// `n_steps × dim` independent `N(0, dt)` increments.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerBundle {
    pub seed: u64,
    pub stream: u64,
    dim: usize,
    grid: Grid,
    increments: Vec<f64>,
}

impl WienerBundle {
    pub fn generate(grid: Grid, dim: usize, seed: u64, stream: u64) -> Self {
        assert!(dim > 0, "driver dimension must be positive");
        let mut rng = path_rng(seed, stream);
        let sd = grid.dt.sqrt();
        let increments = (0..grid.n_steps * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        WienerBundle {
            seed,
            stream,
            dim,
            grid,
            increments,
        }
    }

    /// Wraps caller-supplied increments, e.g. deterministic stubs in tests.
    pub fn from_increments(grid: Grid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.n_steps * dim {
            return Err(Error::NoiseLengthMismatch {
                got: increments.len() / dim.max(1),
                want: grid.n_steps,
            });
        }
        Ok(WienerBundle {
            seed: 0,
            stream: 0,
            dim,
            grid,
            increments,
        })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        WienerBundle {
            seed: 0,
            stream: 0,
            dim,
            grid,
            increments: vec![0.0; grid.n_steps * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.increments.iter().skip(j).step_by(self.dim).copied()
    }

    /// Cumulative sum of column `j` from 0: a discrete Brownian path.
    pub fn path(&self, j: usize) -> SamplePath<f64> {
        let mut values = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        values.push(acc);
        for dw in self.column(j) {
            acc += dw;
            values.push(acc);
        }
        SamplePath {
            grid: self.grid,
            values,
            seed: self.seed,
            stream: self.stream,
        }
    }
}

/// Increments on stream 0 for `seed`.
pub fn wiener_increments(grid: Grid, dim: usize, seed: u64) -> WienerBundle {
    WienerBundle::generate(grid, dim, seed, 0)
}

/// A point of ℝ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2(pub [f64; 2]);

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2([x, y])
    }
    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2([self.0[0] * s, self.0[1] * s])
    }
}

/// A state space the integrator can step in.
pub trait State: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn is_finite(&self) -> bool;
    /// Entries in row-major order, for CSV traces.
    fn flat(&self) -> Vec<f64>;
}

impl State for f64 {
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn flat(&self) -> Vec<f64> {
        vec![*self]
    }
}

impl State for Point2 {
    fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
    fn flat(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

impl State for Mat2 {
    fn is_finite(&self) -> bool {
        Mat2::is_finite(self)
    }
    fn flat(&self) -> Vec<f64> {
        self.entries().to_vec()
    }
}

/// Values on a [`Grid`], with the RNG seed and stream that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<S> {
    pub grid: Grid,
    pub values: Vec<S>,
    pub seed: u64,
    pub stream: u64,
}

impl<S> SamplePath<S> {
    pub fn new(grid: Grid, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(SamplePath {
            grid,
            values,
            seed: 0,
            stream: 0,
        })
    }

    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> SamplePath<T> {
        SamplePath {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
            seed: self.seed,
            stream: self.stream,
        }
    }

    /// Same grid and provenance, new values.
    pub fn with_values<T>(&self, values: Vec<T>) -> SamplePath<T> {
        debug_assert_eq!(values.len(), self.grid.len());
        SamplePath {
            grid: self.grid,
            values,
            seed: self.seed,
            stream: self.stream,
        }
    }

    pub fn terminal(&self) -> &S {
        self.values.last().expect("paths have at least two samples")
    }

    pub fn at_time(&self, t: f64) -> &S {
        &self.values[self.grid.index_of(t)]
    }
}

impl SamplePath<f64> {
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        SamplePath {
            grid,
            values: grid.times().map(f).collect(),
            seed: 0,
            stream: 0,
        }
    }
}

/// `x_{k+1} = x_k + drift(x_k)·dt + diffusion(x_k, ΔW_k)`.
pub fn euler_maruyama<S, D, G>(drift: D, diffusion: G, x0: S, grid: Grid, noise: &WienerBundle) -> Result<SamplePath<S>>
where
    S: State,
    D: Fn(&S) -> S,
    G: Fn(&S, &[f64]) -> S,
{
    if noise.grid.n_steps != grid.n_steps {
        return Err(Error::NoiseLengthMismatch {
            got: noise.grid.n_steps,
            want: grid.n_steps,
        });
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let dt = grid.dt;
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for k in 0..grid.n_steps {
        x = x + drift(&x) * dt + diffusion(&x, noise.step(k));
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        values.push(x);
    }
    Ok(SamplePath {
        grid,
        values,
        seed: noise.seed,
        stream: noise.stream,
    })
}

/// Runs `f(0..n)` in parallel on the current rayon pool and returns results in
/// index order. The first failing index wins, wrapped with its path number.
pub fn run_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i).map_err(|e| e.in_path(i)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
