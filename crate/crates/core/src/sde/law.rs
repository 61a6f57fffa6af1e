use serde::{Deserialize, Serialize};

use super::noise::NoiseStream;
use crate::error::{invalid, Result};

/// Samplable initial laws on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleLaw {
    /// Independent coordinates `N(mean_j, std²)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    Dirac { point: Vec<f64> },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint { a: Vec<f64>, b: Vec<f64>, p: f64 },
    /// Independent coordinates uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64, dim: usize },
}

impl SampleLaw {
    pub fn standard_normal(dim: usize) -> Self {
        SampleLaw::Gaussian {
            mean: vec![0.0; dim],
            std: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SampleLaw::Gaussian { mean, .. } => mean.len(),
            SampleLaw::Dirac { point } => point.len(),
            SampleLaw::TwoPoint { a, .. } => a.len(),
            SampleLaw::Uniform { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SampleLaw::Gaussian { mean, std } => !mean.is_empty() && *std >= 0.0,
            SampleLaw::Dirac { point } => !point.is_empty(),
            SampleLaw::TwoPoint { a, b, p } => !a.is_empty() && a.len() == b.len() && (0.0..=1.0).contains(p),
            SampleLaw::Uniform { lo, hi, dim } => *dim > 0 && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed sampling law {self:?}")))
        }
    }

    /// Draws one point into `out` (length `dim`).
    pub fn sample_into(&self, stream: &mut NoiseStream, out: &mut [f64]) {
        match self {
            SampleLaw::Gaussian { mean, std } => {
                stream.fill_normals(out);
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + std * *o;
                }
            }
            SampleLaw::Dirac { point } => out.copy_from_slice(point),
            SampleLaw::TwoPoint { a, b, p } => {
                let u = stream.uniform();
                out.copy_from_slice(if u < *p { a } else { b });
            }
            SampleLaw::Uniform { lo, hi, .. } => {
                for o in out.iter_mut() {
                    *o = lo + (hi - lo) * stream.uniform();
                }
            }
        }
    }

    pub fn sample(&self, stream: &mut NoiseStream) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.sample_into(stream, &mut v);
        v
    }

    /// Draws `n` points, row-major.
    pub fn sample_many(&self, stream: &mut NoiseStream, n: usize) -> Vec<f64> {
        let d = self.dim();
        let mut v = vec![0.0; n * d];
        for row in v.chunks_exact_mut(d) {
            self.sample_into(stream, row);
        }
        v
    }
}
