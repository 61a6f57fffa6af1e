//! Relative entropy between sampled laws, the Gaussian closed form, and the
//! Pinsker comparison.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::sde::{Domain, NoiseDriver};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EntropyMethod {
    Knn { k: usize },
    Binned,
    AnalyticGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EntropyMethod,
    pub n_p: usize,
    pub n_q: usize,
}

/// Settings of the k-nearest-neighbour estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnOptions {
    pub k: usize,
    /// Bootstrap replicates for the standard error.
    pub replicates: usize,
    /// Replacement for zero radii (duplicate points).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for KnnOptions {
    fn default() -> Self {
        Self {
            k: 5,
            replicates: 50,
            jitter: 1e-12,
            seed: 0,
        }
    }
}

/// k-NN estimate of `Ent(P | Q)` from row-major samples of `P` (n points) and
/// `Q` (m points) in dimension `dim`:
///
/// `(d/n) Σ_i log(ν_k(i) / ρ_k(i)) + log(m / (n - 1))`
///
/// with `ρ_k(i)` the distance from `p_i` to its k-th neighbour among the
/// other `P` samples and `ν_k(i)` its k-th neighbour distance into `Q`.
/// The standard error bootstraps the per-sample log-ratio terms.
pub fn relative_entropy_knn(p: &[f64], q: &[f64], dim: usize, opts: &KnnOptions) -> Result<EntropyEstimate> {
    let terms = knn_log_ratio_terms(p, q, dim, opts.k, opts.jitter)?;
    let value = stats::mean(&terms.terms) + terms.offset;
    let stderr = bootstrap_stderr(&terms.terms, opts.replicates, opts.seed);
    Ok(EntropyEstimate {
        value,
        stderr,
        method: EntropyMethod::Knn { k: opts.k },
        n_p: terms.terms.len(),
        n_q: q.len() / dim,
    })
}

/// Per-sample pieces of the k-NN estimate: the estimate is
/// `mean(terms) + offset`, with `terms[i] = d log(ν_k(i) / ρ_k(i))` in the
/// order of the `P` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnTerms {
    pub terms: Vec<f64>,
    pub offset: f64,
}

pub fn knn_log_ratio_terms(p: &[f64], q: &[f64], dim: usize, k: usize, jitter: f64) -> Result<KnnTerms> {
    if dim == 0 || p.len() % dim != 0 || q.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if dim == 0 { 0 } else { p.len() % dim },
        });
    }
    if k == 0 {
        return Err(invalid("k-NN estimator needs k >= 1"));
    }
    let n = p.len() / dim;
    let m = q.len() / dim;
    if n < k + 1 || m < k + 1 {
        return Err(invalid(format!(
            "k-NN estimator with k = {k} needs more than k samples per side (got {n} and {m})"
        )));
    }
    let (rho, nu) = if dim == 1 {
        knn_radii_1d(p, q, k)
    } else {
        knn_radii_brute(p, q, dim, k)
    };
    let mut jittered = 0usize;
    let mut floor = |r: f64| {
        if r > 0.0 {
            r
        } else {
            jittered += 1;
            jitter
        }
    };
    let d = dim as f64;
    let terms: Vec<f64> = rho
        .iter()
        .zip(&nu)
        .map(|(&r, &v)| {
            let r = floor(r);
            let v = floor(v);
            d * (v / r).ln()
        })
        .collect();
    if jittered > 0 {
        log::warn!("k-NN entropy: {jittered} zero radii replaced by {jitter}");
    }
    Ok(KnnTerms {
        terms,
        offset: (m as f64 / (n as f64 - 1.0)).ln(),
    })
}

fn bootstrap_stderr(terms: &[f64], replicates: usize, seed: u64) -> f64 {
    if replicates < 2 {
        return 0.0;
    }
    let n = terms.len();
    let driver = NoiseDriver::new(seed);
    let means = exec::map_indexed(replicates, |r| {
        let mut s = driver.stream_in(Domain::Resample, 0, 0, r as u32);
        let draw: Vec<f64> = (0..n)
            .map(|_| terms[((s.uniform() * n as f64) as usize).min(n - 1)])
            .collect();
        stats::mean(&draw)
    });
    stats::variance(&means).sqrt()
}

/// k-th order statistic of distances from `x` into the sorted array `s`,
/// starting from the gap between `s[left]` and `s[right]`.
fn kth_gap(s: &[f64], x: f64, mut left: isize, mut right: usize, k: usize) -> f64 {
    let mut r = 0.0;
    for _ in 0..k {
        let dl = if left >= 0 { x - s[left as usize] } else { f64::INFINITY };
        let dr = if right < s.len() { s[right] - x } else { f64::INFINITY };
        if dl <= dr {
            r = dl;
            left -= 1;
        } else {
            r = dr;
            right += 1;
        }
    }
    r
}

fn knn_radii_1d(p: &[f64], q: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ps = p.to_vec();
    ps.sort_by(f64::total_cmp);
    let mut qs = q.to_vec();
    qs.sort_by(f64::total_cmp);
    let pairs = exec::map_indexed(p.len(), |i| {
        let x = p[i];
        // One copy of x sits at `at`; it is the point itself.
        let at = ps.partition_point(|&y| y < x);
        let rho = kth_gap(&ps, x, at as isize - 1, at + 1, k);
        let pos = qs.partition_point(|&y| y < x);
        let nu = kth_gap(&qs, x, pos as isize - 1, pos, k);
        (rho, nu)
    });
    pairs.into_iter().unzip()
}

fn kth_smallest_sq(x: &[f64], cloud: &[f64], dim: usize, k: usize, skip: Option<usize>) -> f64 {
    let mut best = vec![f64::INFINITY; k];
    for (j, y) in cloud.chunks_exact(dim).enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best[k - 1] {
            let mut pos = k - 1;
            while pos > 0 && best[pos - 1] > d2 {
                best[pos] = best[pos - 1];
                pos -= 1;
            }
            best[pos] = d2;
        }
    }
    best[k - 1]
}

fn knn_radii_brute(p: &[f64], q: &[f64], dim: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let pairs = exec::map_indexed(p.len() / dim, |i| {
        let x = &p[i * dim..(i + 1) * dim];
        let rho = kth_smallest_sq(x, p, dim, k, Some(i)).sqrt();
        let nu = kth_smallest_sq(x, q, dim, k, None).sqrt();
        (rho, nu)
    });
    pairs.into_iter().unzip()
}

/// `Ent(N(m1, C1) | N(m2, C2))` for row-major `d × d` covariances.
pub fn relative_entropy_gaussian(m1: &[f64], c1: &[f64], m2: &[f64], c2: &[f64]) -> Result<f64> {
    let d = m1.len();
    if m2.len() != d || c1.len() != d * d || c2.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m2.len(),
        });
    }
    let a = DMatrix::from_row_slice(d, d, c1);
    let b = DMatrix::from_row_slice(d, d, c2);
    for (name, c) in [("C1", &a), ("C2", &b)] {
        if (c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite(format!("{name} is not symmetric")));
        }
    }
    let chol_a = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("C1".into()))?;
    let chol_b = b.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("C2".into()))?;
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol_b.solve(&a).trace();
    let diff = DVector::from_iterator(d, m2.iter().zip(m1).map(|(x, y)| x - y));
    let maha = diff.dot(&chol_b.solve(&diff));
    Ok(0.5 * (trace - d as f64 + maha + logdet(&chol_b.l()) - logdet(&chol_a.l())))
}

/// Pinsker in the doubled-TV convention: `‖P - Q‖²_var ≤ 2 Ent(P | Q)`,
/// accepted up to `slack`.
pub fn pinsker_check(var_sq: f64, ent: f64, slack: f64) -> Result<bool> {
    if var_sq < 0.0 || slack < 0.0 || !var_sq.is_finite() || ent.is_nan() {
        return Err(invalid(format!(
            "pinsker_check needs non-negative inputs (var² = {var_sq}, slack = {slack})"
        )));
    }
    // Sample estimates of Ent may dip below zero; the clamp keeps the
    // comparison about the inequality, not about estimator sign noise.
    Ok(var_sq <= 2.0 * ent.max(0.0) + slack)
}
