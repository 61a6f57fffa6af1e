use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finite weighted point cloud in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform measure on the rows of `points` (row-major, `dim` columns).
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not form points of dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        let n = points.len() / dim;
        Ok(Self {
            dim,
            points,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    pub fn weighted(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::uniform(points, dim)?;
        if weights.len() != m.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {} atoms",
                weights.len(),
                m.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        let n = weights.len();
        m.uniform = weights.iter().all(|w| *w == 1.0 / n as f64);
        m.weights = weights;
        Ok(m)
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::uniform(point.to_vec(), point.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every atom carries weight exactly `1/len`.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Coordinate `axis` of every atom.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.points.chunks_exact(self.dim).map(|p| p[axis]).collect()
    }

    /// Product measure `self ⊗ other` on `R^{dim + other.dim}`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let d = self.dim + other.dim;
        let mut pts = Vec::with_capacity(self.len() * other.len() * d);
        let mut w = Vec::with_capacity(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                pts.extend_from_slice(self.point(i));
                pts.extend_from_slice(other.point(j));
                w.push(self.weights[i] * other.weights[j]);
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let mut m = Self::weighted(pts, d, w)?;
        m.uniform = self.uniform && other.uniform;
        if m.uniform {
            let n = m.len();
            m.weights = vec![1.0 / n as f64; n];
        }
        Ok(m)
    }
}
