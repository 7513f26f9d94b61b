//! The three processes: planar Brownian motion, Brownian motion rotated at
//! unit angular speed, and the matrix diffusion `dx = f(x) dA`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{f_coeff, rotation_matrix, Mat2, Rotation};
use crate::sde::{euler_maruyama, run_paths, stream_id, substream, Grid, Point2, SamplePath, WienerBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PlanarBm,
    RotatedBm,
    MatrixDiffusion,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::PlanarBm, Scenario::RotatedBm, Scenario::MatrixDiffusion];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PlanarBm => "planar_bm",
            Scenario::RotatedBm => "rotated_bm",
            Scenario::MatrixDiffusion => "matrix_diffusion",
        }
    }

    /// Number of independent scalar drivers per step.
    pub fn drivers(&self) -> usize {
        match self {
            Scenario::PlanarBm | Scenario::RotatedBm => 2,
            Scenario::MatrixDiffusion => 4,
        }
    }

    pub fn default_start(&self) -> InitialState {
        match self {
            Scenario::PlanarBm | Scenario::RotatedBm => InitialState::Planar(Point2::new(1.0, 0.0)),
            Scenario::MatrixDiffusion => InitialState::Matrix(Mat2::IDENTITY),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown scenario '{}'", self.0)
    }
}

impl std::error::Error for UnknownScenario {}

impl FromStr for Scenario {
    type Err = UnknownScenario;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Planar(Point2),
    Matrix(Mat2),
}

impl InitialState {
    /// Left action of a rotation on the start point.
    pub fn rotated(&self, k: &Rotation) -> InitialState {
        match self {
            InitialState::Planar(p) => InitialState::Planar(Point2(k.apply_vec(p.0))),
            InitialState::Matrix(m) => InitialState::Matrix(k.apply(m)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub x0: InitialState,
    pub grid: Grid,
    pub n_paths: usize,
    pub seed: u64,
    /// High half of the per-path stream id; see [`crate::sde`].
    pub substream: u32,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, grid: Grid, n_paths: usize, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            x0: scenario.default_start(),
            grid,
            n_paths,
            seed,
            substream: substream::PATHS,
        }
    }

    pub fn with_start(mut self, x0: InitialState) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_substream(mut self, substream: u32) -> Self {
        self.substream = substream;
        self
    }

    pub fn noise(&self, path: usize) -> WienerBundle {
        WienerBundle::generate(
            self.grid,
            self.scenario.drivers(),
            self.seed,
            stream_id(self.substream, path as u32),
        )
    }

    fn planar_start(&self) -> Result<Point2> {
        match self.x0 {
            InitialState::Planar(p) if p.norm() > 0.0 => Ok(p),
            InitialState::Planar(_) => Err(Error::OriginStart),
            InitialState::Matrix(_) => Err(Error::WrongInitialState),
        }
    }

    fn matrix_start(&self) -> Result<Mat2> {
        match self.x0 {
            InitialState::Matrix(m) if m.det() > 0.0 => Ok(m),
            InitialState::Matrix(m) => Err(Error::NonPositiveDeterminantStart { det: m.det() }),
            InitialState::Planar(_) => Err(Error::WrongInitialState),
        }
    }
}

fn check_drivers(noise: &WienerBundle, want: usize) -> Result<()> {
    if noise.dim() != want {
        return Err(Error::NoiseDimMismatch { got: noise.dim(), want });
    }
    Ok(())
}

/// Planar Brownian motion `x0 + W` for the given noise.
pub fn planar_bm_path(x0: Point2, grid: Grid, noise: &WienerBundle) -> Result<SamplePath<Point2>> {
    if x0.norm() == 0.0 {
        return Err(Error::OriginStart);
    }
    check_drivers(noise, 2)?;
    euler_maruyama(
        |_: &Point2| Point2::new(0.0, 0.0),
        |_, dw| Point2::new(dw[0], dw[1]),
        x0,
        grid,
        noise,
    )
}

/// `x_t = Θ_t (U_t, V_t)ᵀ` with `(U, V)` a planar Brownian motion from `x0`.
/// The rotation is applied exactly at each grid time.
pub fn rotated_bm_path(x0: Point2, grid: Grid, noise: &WienerBundle) -> Result<SamplePath<Point2>> {
    let base = planar_bm_path(x0, grid, noise)?;
    let values = base
        .values
        .iter()
        .enumerate()
        .map(|(k, uv)| Point2(rotation_matrix(grid.time(k)).apply_vec(uv.0)))
        .collect();
    Ok(base.with_values(values))
}

/// Euler scheme for `dx = f(x) dA` where `A` is a matrix of four independent
/// Brownian motions, columns of `noise` in row-major order
/// `(A¹¹, A¹², A²¹, A²²)`.
///
/// The continuous solution keeps `det(x) > 0`; a discrete step that loses
/// this aborts the path with [`Error::DeterminantCrossedZero`].
pub fn matrix_diffusion_path(x0: Mat2, grid: Grid, noise: &WienerBundle) -> Result<SamplePath<Mat2>> {
    let det0 = x0.det();
    if det0.is_nan() || det0 <= 0.0 {
        return Err(Error::NonPositiveDeterminantStart { det: det0 });
    }
    check_drivers(noise, 4)?;
    let path = euler_maruyama(
        |_: &Mat2| Mat2::ZERO,
        |x, da| Mat2::raw(da[0], da[1], da[2], da[3]) * f_coeff(x),
        x0,
        grid,
        noise,
    )?;
    if let Some((step, det)) = path
        .values
        .iter()
        .map(Mat2::det)
        .enumerate()
        .find(|(_, det)| *det <= 0.0)
    {
        return Err(Error::DeterminantCrossedZero { step, det });
    }
    Ok(path)
}

pub fn planar_bm(config: &ScenarioConfig) -> Result<Vec<SamplePath<Point2>>> {
    let x0 = config.planar_start()?;
    run_paths(config.n_paths, |i| planar_bm_path(x0, config.grid, &config.noise(i)))
}

pub fn rotated_bm(config: &ScenarioConfig) -> Result<Vec<SamplePath<Point2>>> {
    let x0 = config.planar_start()?;
    run_paths(config.n_paths, |i| rotated_bm_path(x0, config.grid, &config.noise(i)))
}

pub fn matrix_diffusion(config: &ScenarioConfig) -> Result<Vec<SamplePath<Mat2>>> {
    let x0 = config.matrix_start()?;
    run_paths(config.n_paths, |i| {
        matrix_diffusion_path(x0, config.grid, &config.noise(i))
    })
}

/// Either kind of simulated ensemble.
#[derive(Debug, Clone)]
pub enum Ensemble {
    Planar(Vec<SamplePath<Point2>>),
    Matrix(Vec<SamplePath<Mat2>>),
}

pub fn simulate(config: &ScenarioConfig) -> Result<Ensemble> {
    Ok(match config.scenario {
        Scenario::PlanarBm => Ensemble::Planar(planar_bm(config)?),
        Scenario::RotatedBm => Ensemble::Planar(rotated_bm(config)?),
        Scenario::MatrixDiffusion => Ensemble::Matrix(matrix_diffusion(config)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1e-3, 1000).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("brownian".parse::<Scenario>().is_err());
    }

    #[test]
    fn zero_noise_paths() {
        let g = grid();
        let z2 = WienerBundle::zeros(g, 2);
        let p = planar_bm_path(Point2::new(1.0, 2.0), g, &z2).unwrap();
        assert!(p.values.iter().all(|v| *v == Point2::new(1.0, 2.0)));

        let r = rotated_bm_path(Point2::new(1.0, 0.0), g, &z2).unwrap();
        assert_eq!(r.values[0], Point2::new(1.0, 0.0));
        for (k, v) in r.values.iter().enumerate() {
            let t = g.time(k);
            assert!((v.x() - t.cos()).abs() < 1e-14 && (v.y() - t.sin()).abs() < 1e-14);
        }

        let z4 = WienerBundle::zeros(g, 4);
        let m = matrix_diffusion_path(Mat2::IDENTITY, g, &z4).unwrap();
        assert!(m.values.iter().all(|v| *v == Mat2::IDENTITY));
    }

    #[test]
    fn one_step_by_hand() {
        let g = Grid::new(0.01, 1).unwrap();
        let h = 0.3;
        let w = WienerBundle::from_increments(g, 2, vec![h, 0.0]).unwrap();
        let p = planar_bm_path(Point2::new(1.0, 0.5), g, &w).unwrap();
        assert_eq!(p.values[1], Point2::new(1.0 + h, 0.5));

        let w = WienerBundle::from_increments(g, 4, vec![h, 0.0, 0.0, h]).unwrap();
        let m = matrix_diffusion_path(Mat2::IDENTITY, g, &w).unwrap();
        let expect = 1.0 + h / 3.0;
        assert!(m.values[1].max_abs_diff(&Mat2::diag(expect, expect).unwrap()) < 1e-15);
    }

    #[test]
    fn start_errors() {
        let g = grid();
        let z2 = WienerBundle::zeros(g, 2);
        assert_eq!(
            planar_bm_path(Point2::new(0.0, 0.0), g, &z2).unwrap_err(),
            Error::OriginStart
        );
        let cfg = ScenarioConfig::new(Scenario::MatrixDiffusion, g, 2, 0)
            .with_start(InitialState::Matrix(Mat2::diag(1.0, -1.0).unwrap()));
        assert!(matches!(
            matrix_diffusion(&cfg),
            Err(Error::NonPositiveDeterminantStart { .. })
        ));
        let cfg = ScenarioConfig::new(Scenario::PlanarBm, g, 2, 0).with_start(InitialState::Matrix(Mat2::IDENTITY));
        assert_eq!(planar_bm(&cfg).unwrap_err(), Error::WrongInitialState);
        assert!(matches!(
            planar_bm_path(Point2::new(1.0, 0.0), g, &WienerBundle::zeros(g, 4)),
            Err(Error::NoiseDimMismatch { got: 4, want: 2 })
        ));
    }

    #[test]
    fn determinant_crossing_is_reported() {
        let g = Grid::new(1.0, 1).unwrap();
        // f(I) = 1/3: x¹¹ goes 1 -> -1 while x²² stays 1.
        let w = WienerBundle::from_increments(g, 4, vec![-6.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            matrix_diffusion_path(Mat2::IDENTITY, g, &w),
            Err(Error::DeterminantCrossedZero { step: 1, .. })
        ));
    }

    #[test]
    fn planar_variance_matches_2t() {
        let cfg = ScenarioConfig::new(Scenario::PlanarBm, grid(), 1000, 5);
        let paths = planar_bm(&cfg).unwrap();
        let msd = paths
            .iter()
            .map(|p| {
                let d = Point2::new(p.terminal().x() - 1.0, p.terminal().y());
                d.norm().powi(2)
            })
            .sum::<f64>()
            / 1000.0;
        assert!((msd / 2.0 - 1.0).abs() < 0.05, "E|x_1 - x_0|^2 = {msd}");
    }

    #[test]
    fn ensembles_are_deterministic() {
        let cfg = ScenarioConfig::new(Scenario::MatrixDiffusion, Grid::new(1e-3, 200).unwrap(), 16, 9);
        assert_eq!(matrix_diffusion(&cfg).unwrap(), matrix_diffusion(&cfg).unwrap());
        let other = cfg.with_substream(substream::EQUIVARIANCE);
        assert_ne!(matrix_diffusion(&cfg).unwrap(), matrix_diffusion(&other).unwrap());
    }
}
