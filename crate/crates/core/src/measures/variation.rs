//! Weighted variation distance between binned laws.
//!
//! Variation norms are degenerate between raw empirical clouds (atoms never
//! coincide), so both laws are first histogrammed on a shared grid.

use crate::error::{invalid, Error, Result};
use crate::stats;

pub const DEFAULT_BINS: usize = 200;

/// Regular rectangular grid of `bins^dim` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Binning {
    dim: usize,
    bins: usize,
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl Binning {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || bins == 0 {
            return Err(invalid("binning needs matching non-empty bounds and at least one bin"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(invalid("binning bounds must satisfy lo < hi"));
        }
        let width = lo.iter().zip(&hi).map(|(a, b)| (b - a) / bins as f64).collect();
        Ok(Self {
            dim: lo.len(),
            bins,
            lo,
            width,
        })
    }

    /// Shared grid for two samples: per axis `pooled mean ± 3 pooled stdev`.
    /// Samples outside fall into the edge cells.
    pub fn shared(a: &[f64], b: &[f64], dim: usize, bins: usize) -> Result<Self> {
        if dim == 0 || a.len() % dim != 0 || b.len() % dim != 0 || a.is_empty() || b.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.len().max(1) % dim.max(1),
            });
        }
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for axis in 0..dim {
            let pooled: Vec<f64> = a
                .chunks_exact(dim)
                .chain(b.chunks_exact(dim))
                .map(|p| p[axis])
                .collect();
            let m = stats::mean(&pooled);
            let mut s = stats::variance(&pooled).sqrt();
            if !(s > 0.0) {
                s = 0.5 / 3.0;
            }
            lo.push(m - 3.0 * s);
            hi.push(m + 3.0 * s);
        }
        Self::new(lo, hi, bins)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.bins.pow(self.dim as u32)
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for ((xi, lo), w) in x.iter().zip(&self.lo).zip(&self.width) {
            let k = ((xi - lo) / w).floor();
            let k = (k.max(0.0) as usize).min(self.bins - 1);
            idx = idx * self.bins + k;
        }
        idx
    }

    /// Cell centers, row-major `cells × dim`.
    pub fn centers(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cells() * self.dim);
        for cell in 0..self.cells() {
            let mut rem = cell;
            let mut coords = vec![0.0; self.dim];
            for axis in (0..self.dim).rev() {
                let k = rem % self.bins;
                rem /= self.bins;
                coords[axis] = self.lo[axis] + (k as f64 + 0.5) * self.width[axis];
            }
            out.extend_from_slice(&coords);
        }
        out
    }

    /// Empirical histogram of row-major `samples`.
    pub fn histogram(&self, samples: &[f64]) -> Histogram {
        let n = samples.len() / self.dim;
        let mut masses = vec![0.0; self.cells()];
        for x in samples.chunks_exact(self.dim) {
            masses[self.cell_of(x)] += 1.0;
        }
        masses.iter_mut().for_each(|m| *m /= n as f64);
        Histogram {
            binning: self.clone(),
            masses,
        }
    }
}

/// Probability masses on a [`Binning`].
#[derive(Clone, Debug)]
pub struct Histogram {
    binning: Binning,
    masses: Vec<f64>,
}

impl Histogram {
    /// Histogram from given cell masses (e.g. integrated densities).
    pub fn from_masses(binning: Binning, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != binning.cells() {
            return Err(invalid(format!(
                "{} masses for {} cells",
                masses.len(),
                binning.cells()
            )));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|m| *m < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("histogram not normalized (total {total})")));
        }
        Ok(Self { binning, masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }
}

/// `‖p - q‖_{k,var} = Σ_b |p_b - q_b| (1 + |center_b|^k)`, the exact dual
/// optimum over `|f| ≤ 1 + |·|^k` for the discretized laws. For `k = 0` the
/// weight is 1 (`|f| ≤ 1`), giving twice the total variation distance.
pub fn weighted_variation(p: &Histogram, q: &Histogram, k: f64) -> Result<f64> {
    if p.binning != q.binning {
        return Err(invalid("histograms use different binnings"));
    }
    if !(k >= 0.0) {
        return Err(invalid(format!("variation weight exponent must be >= 0, got {k}")));
    }
    let d = p.binning.dim;
    let centers = p.binning.centers();
    let terms: Vec<f64> = p
        .masses
        .iter()
        .zip(&q.masses)
        .zip(centers.chunks_exact(d))
        .map(|((a, b), c)| {
            let weight = if k == 0.0 { 1.0 } else { 1.0 + crate::sde::norm(c).powf(k) };
            (a - b).abs() * weight
        })
        .collect();
    Ok(stats::pairwise_sum(&terms))
}

/// Binned weighted variation between two samples on their shared grid.
pub fn weighted_variation_samples(a: &[f64], b: &[f64], dim: usize, k: f64, bins: usize) -> Result<f64> {
    let grid = Binning::shared(a, b, dim, bins)?;
    weighted_variation(&grid.histogram(a), &grid.histogram(b), k)
}
