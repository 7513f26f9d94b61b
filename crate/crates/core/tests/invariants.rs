use skewprod_core::decompose::{polar_decompose, qr_path, time_change_matrix};
use skewprod_core::scenarios::{matrix_diffusion, planar_bm, rotated_bm, Scenario, ScenarioConfig};
use skewprod_core::stats::{cross_qv_null_se, realized_cross_qv};
use skewprod_core::Grid;

fn config(s: Scenario, n: usize) -> ScenarioConfig {
    ScenarioConfig::new(s, Grid::new(1e-3, 1000).unwrap(), n, 11)
}

/// On the same noise, the rotated path is the planar path turned by `t`, so
/// the unwrapped angles differ by exactly `t`.
#[test]
fn rotated_angle_is_planar_angle_plus_time() {
    let planar = planar_bm(&config(Scenario::PlanarBm, 16)).unwrap();
    let rotated = rotated_bm(&config(Scenario::RotatedBm, 16)).unwrap();
    for (p, r) in planar.iter().zip(&rotated) {
        let a = polar_decompose(p).unwrap();
        let b = polar_decompose(r).unwrap();
        for k in 0..p.values.len() {
            let diff = b.angle.values[k] - a.angle.values[k] - p.grid.time(k);
            assert!(diff.abs() < 1e-9, "step {k}: {diff}");
            assert!((a.radial.values[k] - b.radial.values[k]).abs() < 1e-12);
        }
    }
}

/// The angle's cross-variation with `log |x|` stays within 3 null SE on
/// nearly every path.
#[test]
fn planar_angle_and_log_radius_are_orthogonal() {
    let paths = planar_bm(&config(Scenario::PlanarBm, 256)).unwrap();
    let mut outside = 0;
    for p in &paths {
        let d = polar_decompose(p).unwrap();
        let logr = d.log_radius();
        let cross = realized_cross_qv(&d.angle, &logr).unwrap().total();
        if cross.abs() > 3.0 * cross_qv_null_se(&d.angle.values, &logr.values) {
            outside += 1;
        }
    }
    // 3 SE leaves about 0.3% per path under the null.
    assert!(outside <= 5, "{outside} of 256 paths");
}

/// `log T¹¹` and the angle are driven by the same clock `R`.
#[test]
fn matrix_log_t11_and_angle_share_the_clock() {
    let paths = matrix_diffusion(&config(Scenario::MatrixDiffusion, 64)).unwrap();
    let (mut sum_angle, mut sum_log, mut sum_clock) = (0.0, 0.0, 0.0);
    for p in &paths {
        let d = qr_path(p).unwrap();
        let tc = time_change_matrix(&d.radial).unwrap();
        sum_angle += d.angle.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
        let l: Vec<f64> = d.radial.values.iter().map(|t| t.t11().ln()).collect();
        sum_log += l.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
        sum_clock += tc.total();
        for (k, x) in p.values.iter().enumerate() {
            assert!(d.reconstruct(k).max_abs_diff(x) < 1e-10);
        }
    }
    assert!((sum_angle / sum_clock - 1.0).abs() < 0.02, "{sum_angle} vs {sum_clock}");
    assert!((sum_log / sum_clock - 1.0).abs() < 0.02, "{sum_log} vs {sum_clock}");
}

/// Path values do not depend on the thread pool.
#[test]
fn ensembles_are_independent_of_thread_count() {
    let cfg = config(Scenario::MatrixDiffusion, 48);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| matrix_diffusion(&cfg)).unwrap();
    let b = many.install(|| matrix_diffusion(&cfg)).unwrap();
    assert_eq!(a, b);
}
