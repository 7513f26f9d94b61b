//! Shared fixtures for the benches in `benches/`.

use skewprod_core::scenarios::{matrix_diffusion_path, Scenario, ScenarioConfig};
use skewprod_core::{Grid, Mat2, SamplePath};

/// `n` matrices with positive determinant, spread over a few orders of
/// magnitude, deterministic.
pub fn positive_det_matrices(n: usize) -> Vec<Mat2> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.618_033_988_75;
            let s = 10f64.powf((t * 7.0).sin() * 2.0);
            let (a, b, c) = (s * (1.0 + t.cos().abs()), s * (t * 3.0).sin(), s * (t * 5.0).cos());
            // d chosen so that det = s².
            let d = (s * s + b * c) / a;
            Mat2::new(a, b, c, d).expect("finite")
        })
        .collect()
}

pub fn matrix_config(n_paths: usize, n_steps: usize) -> ScenarioConfig {
    ScenarioConfig::new(
        Scenario::MatrixDiffusion,
        Grid::new(1.0 / n_steps as f64, n_steps).expect("valid grid"),
        n_paths,
        42,
    )
}

pub fn matrix_path(n_steps: usize) -> SamplePath<Mat2> {
    let cfg = matrix_config(1, n_steps);
    matrix_diffusion_path(Mat2::IDENTITY, cfg.grid, &cfg.noise(0)).expect("no crossing at seed 42")
}
