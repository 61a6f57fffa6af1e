use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sde::{Domain, NoiseDriver};
use crate::stats::{linear_fit, sorted_quantile};

const FIT_DOMAIN: Domain = Domain::Auxiliary(0xf17);

/// Least-squares line through `(log N, log value)` with a 95% residual
/// bootstrap band on the slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub band: (f64, f64),
    pub points: usize,
}

impl RateFit {
    pub fn band_contains(&self, slope: f64) -> bool {
        self.band.0 <= slope && slope <= self.band.1
    }
}

/// Fits `log value = intercept + slope · log N`. Values must be positive;
/// callers floor noise-dominated estimates at their stderr first.
pub fn rate_fit(points: &[(f64, f64)], bootstrap: usize, seed: u64) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*v > 0.0 && v.is_finite() && *n > 0.0)) {
        return Err(invalid(format!("rate fit needs positive values, got {v} at N = {n}")));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope) = linear_fit(&x, &y);
    let fitted: Vec<f64> = x.iter().map(|xi| intercept + slope * xi).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let band = if bootstrap == 0 || resid.iter().all(|r| *r == 0.0) {
        (slope, slope)
    } else {
        let mut rng = NoiseDriver::new(seed).stream_in(FIT_DOMAIN, 0, 0, 0);
        let m = resid.len();
        let mut slopes: Vec<f64> = (0..bootstrap)
            .map(|_| {
                let yb: Vec<f64> = fitted
                    .iter()
                    .map(|f| f + resid[((rng.uniform() * m as f64) as usize).min(m - 1)])
                    .collect();
                linear_fit(&x, &yb).1
            })
            .collect();
        slopes.sort_by(f64::total_cmp);
        (sorted_quantile(&slopes, 0.025), sorted_quantile(&slopes, 0.975))
    };
    Ok(RateFit {
        slope,
        intercept,
        band,
        points: points.len(),
    })
}
