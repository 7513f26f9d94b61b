use crate::error::{Error, Result};
use crate::sde::{Grid, SamplePath};

/// Running realized (cross-)quadratic variation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QVEstimate {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl QVEstimate {
    pub fn total(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }
}

fn running_sum(grid: Grid, terms: impl Iterator<Item = f64>) -> QVEstimate {
    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    values.push(acc);
    for term in terms {
        acc += term;
        values.push(acc);
    }
    QVEstimate { grid, values }
}

/// `QV_k = Σ_{j<k} (x_{j+1} − x_j)²`.
pub fn realized_qv(path: &SamplePath<f64>) -> QVEstimate {
    running_sum(path.grid, path.values.windows(2).map(|w| (w[1] - w[0]).powi(2)))
}

/// `[X, Y]_k = Σ_{j<k} Δx_j·Δy_j`.
pub fn realized_cross_qv(p1: &SamplePath<f64>, p2: &SamplePath<f64>) -> Result<QVEstimate> {
    if p1.grid != p2.grid {
        return Err(Error::GridMismatch);
    }
    Ok(running_sum(
        p1.grid,
        p1.values
            .windows(2)
            .zip(p2.values.windows(2))
            .map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0])),
    ))
}

/// Standard error of the realized QV of `values`: `√(2·dt·∫σ⁴ ds)`, with the
/// integral estimated by `Σ Δx⁴ / 3`.
pub fn qv_null_se(values: &[f64]) -> f64 {
    let quarticity: f64 = values.windows(2).map(|w| (w[1] - w[0]).powi(4)).sum();
    (2.0 * quarticity / 3.0).sqrt()
}

/// Null standard error of a realized covariation, `√(2·dt·∫σ_x²σ_y² ds)`,
/// with the integral estimated by `Σ Δx²Δy²`.
pub fn cross_qv_null_se(x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| ((a[1] - a[0]) * (b[1] - b[0])).powi(2))
        .sum();
    (2.0 * s).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::wiener_increments;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(1e-3, 1000).unwrap()
    }

    #[test]
    fn linear_path_has_vanishing_qv() {
        let qv = realized_qv(&SamplePath::from_fn(grid(), |t| t));
        assert!((qv.total() - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn bm_qv_near_t() {
        let bm = wiener_increments(grid(), 1, 4).path(0);
        let qv = realized_qv(&bm).total();
        assert!((0.95..=1.05).contains(&qv), "{qv}");
        let scaled = bm.map(|x| 2.0 * x);
        assert!((realized_qv(&scaled).total() / 4.0 - 1.0).abs() < 0.05);
        let se = qv_null_se(&bm.values);
        assert!((se / (2.0 * 1e-3f64).sqrt() - 1.0).abs() < 0.15, "se {se}");
    }

    #[test]
    fn cross_qv_cases() {
        let w = wiener_increments(grid(), 2, 8);
        let (a, b) = (w.path(0), w.path(1));
        assert_eq!(realized_cross_qv(&a, &a).unwrap(), realized_qv(&a));
        let neg = a.map(|x| -x);
        let c = realized_cross_qv(&a, &neg).unwrap();
        let q = realized_qv(&a);
        for k in 0..q.values.len() {
            assert!((c.at(k) + q.at(k)).abs() < 1e-15);
        }
        let ab = realized_cross_qv(&a, &b).unwrap().total();
        assert!(ab.abs() < 3.0 * (2.0 * 1e-3f64).sqrt(), "{ab}");

        let short = SamplePath::from_fn(Grid::new(1e-3, 10).unwrap(), |t| t);
        assert_eq!(realized_cross_qv(&a, &short).unwrap_err(), Error::GridMismatch);
    }

    proptest! {
        #[test]
        fn qv_monotone_and_cauchy_schwarz(
            xs in proptest::collection::vec(-1.0..1.0f64, 21),
            ys in proptest::collection::vec(-1.0..1.0f64, 21),
        ) {
            let g = Grid::new(0.05, 20).unwrap();
            let (x, y) = (SamplePath::new(g, xs).unwrap(), SamplePath::new(g, ys).unwrap());
            let (qx, qy) = (realized_qv(&x), realized_qv(&y));
            let cxy = realized_cross_qv(&x, &y).unwrap();
            prop_assert!(qx.values.windows(2).all(|w| w[1] >= w[0]));
            for k in 0..g.len() {
                prop_assert!(cxy.at(k).abs() <= (qx.at(k) * qy.at(k)).sqrt() * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
