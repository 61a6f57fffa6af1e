//! Finite-dimensional model specifications.
//!
//! Drift `b_t(x, μ) = b⁰_t(x) + ∫ b¹_t(x, y) μ(dy)` with distribution-free
//! diffusion `σ_t(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::modulus::ModulusFunction;
use super::noise::{Domain, NoiseDriver};
use crate::error::{invalid, Error, Result};
use crate::stats::pairwise_sum;

/// `(t, x, out)`: writes a vector of length `dim` into `out`.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, y, out)`: interaction kernel `b¹_t(x, y)`.
pub type PairFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, out)`: row-major `dim × noise_dim` diffusion matrix.
pub type MatrixFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, features, out)`: combines averaged features into a drift.
pub type CombineFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Diffusion coefficient.
#[derive(Clone)]
pub enum Diffusion {
    /// `σ = s·I`, noise dimension equal to the state dimension.
    Scalar(f64),
    /// State-dependent matrix.
    Matrix { noise_dim: usize, eval: MatrixFn },
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Scalar(s) => write!(f, "Scalar({s})"),
            Diffusion::Matrix { noise_dim, .. } => write!(f, "Matrix {{ noise_dim: {noise_dim} }}"),
        }
    }
}

impl Diffusion {
    pub fn noise_dim(&self, dim: usize) -> usize {
        match self {
            Diffusion::Scalar(_) => dim,
            Diffusion::Matrix { noise_dim, .. } => *noise_dim,
        }
    }

    pub fn matrix(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        match self {
            Diffusion::Scalar(s) => DMatrix::identity(d, d) * *s,
            Diffusion::Matrix { noise_dim, eval } => {
                let mut buf = vec![0.0; d * noise_dim];
                eval(t, x, &mut buf);
                DMatrix::from_row_slice(d, *noise_dim, &buf)
            }
        }
    }

    /// `out += σ_t(x) · dw`.
    pub fn apply(&self, t: f64, x: &[f64], dw: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            Diffusion::Scalar(s) => {
                for (o, w) in out.iter_mut().zip(dw) {
                    *o += s * w;
                }
            }
            Diffusion::Matrix { noise_dim, eval } => {
                let d = x.len();
                scratch.resize(d * noise_dim, 0.0);
                eval(t, x, scratch);
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &scratch[i * noise_dim..(i + 1) * noise_dim];
                    *o += row.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    /// `σ*(σσ*)⁻¹ v`, the noise-space shift realizing a drift change `v`.
    pub fn pseudo_inverse_apply(&self, t: f64, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        match self {
            Diffusion::Scalar(s) => {
                if *s == 0.0 {
                    None
                } else {
                    Some(v.iter().map(|a| a / s).collect())
                }
            }
            Diffusion::Matrix { .. } => {
                let sig = self.matrix(t, x);
                let gram = &sig * sig.transpose();
                let chol = gram.cholesky()?;
                let w = chol.solve(&DVector::from_column_slice(v));
                Some((sig.transpose() * w).as_slice().to_vec())
            }
        }
    }
}

/// What a kernel needs to know about a law to average against it.
#[derive(Clone, Debug)]
pub enum LawSummary<'a> {
    /// The kernel vanishes.
    Zero,
    /// Uniform atoms, row-major.
    Atoms(&'a [f64]),
    /// Averaged feature vector of a separable kernel.
    Features(Vec<f64>),
}

/// Interaction kernel `b¹`.
#[derive(Clone)]
pub enum Interaction {
    None,
    /// Generic kernel; averaging costs one evaluation per atom.
    Pairwise(PairFn),
    /// `b¹_t(x, y) = combine(t, x, g_t(y))` with `combine` linear in its
    /// feature argument, so `∫ b¹_t(x, y) μ(dy) = combine(t, x, ∫ g_t dμ)`.
    Separable {
        features: usize,
        feature: DriftFn,
        combine: CombineFn,
    },
}

impl fmt::Debug for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interaction::None => write!(f, "None"),
            Interaction::Pairwise(_) => write!(f, "Pairwise"),
            Interaction::Separable { features, .. } => write!(f, "Separable {{ features: {features} }}"),
        }
    }
}

impl Interaction {
    pub fn is_none(&self) -> bool {
        matches!(self, Interaction::None)
    }

    pub fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Interaction::None => out.fill(0.0),
            Interaction::Pairwise(k) => k(t, x, y, out),
            Interaction::Separable { features, feature, combine } => {
                let mut g = vec![0.0; *features];
                feature(t, y, &mut g);
                combine(t, x, &g, out);
            }
        }
    }

    /// Prepares the averaging summary for the uniform measure on `cloud`.
    pub fn summarize<'a>(&self, t: f64, cloud: &'a [f64], dim: usize) -> LawSummary<'a> {
        match self {
            Interaction::None => LawSummary::Zero,
            Interaction::Pairwise(_) => LawSummary::Atoms(cloud),
            Interaction::Separable { features, feature, .. } => {
                let n = cloud.len() / dim;
                let k = *features;
                let mut per_atom = vec![0.0; n * k];
                for (y, g) in cloud.chunks_exact(dim).zip(per_atom.chunks_exact_mut(k)) {
                    feature(t, y, g);
                }
                let mut column = vec![0.0; n];
                let mean = (0..k)
                    .map(|j| {
                        for (c, g) in column.iter_mut().zip(per_atom.chunks_exact(k)) {
                            *c = g[j];
                        }
                        pairwise_sum(&column) / n as f64
                    })
                    .collect();
                LawSummary::Features(mean)
            }
        }
    }

    /// `out = ∫ b¹_t(x, y) μ(dy)` for the summarized law.
    pub fn average(&self, t: f64, x: &[f64], law: &LawSummary<'_>, out: &mut [f64], scratch: &mut Vec<f64>) {
        match (self, law) {
            (Interaction::None, _) | (_, LawSummary::Zero) => out.fill(0.0),
            (Interaction::Pairwise(k), LawSummary::Atoms(atoms)) => {
                let d = out.len();
                let n = atoms.len() / d;
                out.fill(0.0);
                scratch.resize(d, 0.0);
                for y in atoms.chunks_exact(d) {
                    k(t, x, y, scratch);
                    for (o, s) in out.iter_mut().zip(scratch.iter()) {
                        *o += s;
                    }
                }
                let inv = 1.0 / n as f64;
                out.iter_mut().for_each(|o| *o *= inv);
            }
            (Interaction::Separable { combine, .. }, LawSummary::Features(g)) => combine(t, x, g, out),
            (Interaction::Separable { features, feature, combine }, LawSummary::Atoms(atoms)) => {
                let d = out.len();
                let n = atoms.len() / d;
                let mut acc = vec![0.0; *features];
                scratch.resize(*features, 0.0);
                for y in atoms.chunks_exact(d) {
                    feature(t, y, scratch);
                    for (a, s) in acc.iter_mut().zip(scratch.iter()) {
                        *a += s;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n as f64);
                combine(t, x, &acc, out);
            }
            (Interaction::Pairwise(_), LawSummary::Features(_)) => {
                unreachable!("pairwise kernels are summarized by their atoms")
            }
        }
    }
}

/// Declared structural constants of a model.
#[derive(Clone, Debug)]
pub struct ModelConstants {
    pub k_b: f64,
    pub k_sigma: f64,
    pub delta: f64,
    pub b1_sup_norm: f64,
    pub phi: Option<ModulusFunction>,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub b0: DriftFn,
    pub b1: Interaction,
    pub sigma: Diffusion,
    pub constants: ModelConstants,
    pub horizon: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("b1", &self.b1)
            .field("sigma", &self.sigma)
            .field("constants", &self.constants)
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// Worst observed ratios from a probe audit.
#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub probes: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    pub max_b1: f64,
    pub max_b0_lipschitz: f64,
    pub max_sigma_lipschitz: f64,
}

impl ModelSpec {
    pub fn noise_dim(&self) -> usize {
        self.sigma.noise_dim(self.dim)
    }

    /// Same model without interaction.
    pub fn without_interaction(&self) -> Self {
        Self {
            b1: Interaction::None,
            name: format!("{} (b1 = 0)", self.name),
            ..self.clone()
        }
    }

    /// Random-probe audit of the declared bounds: `δ⁻¹ ≤ σσ* ≤ δ`, `|b¹| ≤ ‖b¹‖∞`,
    /// Lipschitz constants of `b⁰` and `σ`, and `|b⁰(0)| ≤ K_b`.
    pub fn audit(&self, driver: &NoiseDriver, probes: usize) -> Result<AuditReport> {
        let c = &self.constants;
        if !(c.delta >= 1.0) {
            return Err(invalid(format!("δ must be at least 1, got {}", c.delta)));
        }
        let d = self.dim;
        let mut s = driver.stream_in(Domain::Auxiliary(0xa0d1), 0, 0, 0);
        let mut rep = AuditReport {
            probes,
            min_eig: f64::INFINITY,
            max_eig: 0.0,
            ..Default::default()
        };
        let slack = 1e-9;
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        let mut by = vec![0.0; d];
        let zero = vec![0.0; d];
        self.b0_eval(0.0, &zero, &mut bx);
        let b00 = norm(&bx);
        if b00 > c.k_b * (1.0 + slack) {
            return Err(Error::ModelAudit(format!("|b0(0)| = {b00} exceeds K_b = {}", c.k_b)));
        }
        for _ in 0..probes {
            let t = self.horizon * s.uniform();
            let scale = 4.0 * s.uniform();
            s.fill_normals(&mut x);
            s.fill_normals(&mut y);
            x.iter_mut().for_each(|v| *v *= scale);
            y.iter_mut().for_each(|v| *v *= scale);

            let sig = self.sigma.matrix(t, &x);
            let eig = (&sig * sig.transpose()).symmetric_eigenvalues();
            rep.min_eig = rep.min_eig.min(eig.min());
            rep.max_eig = rep.max_eig.max(eig.max());

            self.b1.eval(t, &x, &y, &mut bx);
            rep.max_b1 = rep.max_b1.max(norm(&bx));

            let dxy = dist(&x, &y);
            if dxy > 0.0 {
                self.b0_eval(t, &x, &mut bx);
                self.b0_eval(t, &y, &mut by);
                rep.max_b0_lipschitz = rep.max_b0_lipschitz.max(dist(&bx, &by) / dxy);
                let hs = (self.sigma.matrix(t, &x) - self.sigma.matrix(t, &y)).norm();
                rep.max_sigma_lipschitz = rep.max_sigma_lipschitz.max(hs / dxy);
            }
        }
        if rep.min_eig < (1.0 / c.delta) * (1.0 - slack) || rep.max_eig > c.delta * (1.0 + slack) {
            return Err(Error::ModelAudit(format!(
                "σσ* spectrum [{}, {}] outside [1/δ, δ] with δ = {}",
                rep.min_eig, rep.max_eig, c.delta
            )));
        }
        if rep.max_b1 > c.b1_sup_norm * (1.0 + slack) {
            return Err(Error::ModelAudit(format!(
                "|b1| reached {} above the declared bound {}",
                rep.max_b1, c.b1_sup_norm
            )));
        }
        if rep.max_b0_lipschitz > c.k_b * (1.0 + slack) {
            return Err(Error::ModelAudit(format!(
                "b0 Lipschitz ratio {} exceeds K_b = {}",
                rep.max_b0_lipschitz, c.k_b
            )));
        }
        if rep.max_sigma_lipschitz > c.k_sigma * (1.0 + slack) {
            return Err(Error::ModelAudit(format!(
                "σ Lipschitz ratio {} exceeds K_σ = {}",
                rep.max_sigma_lipschitz, c.k_sigma
            )));
        }
        Ok(rep)
    }

    pub fn b0_eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.b0)(t, x, out)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_sin(delta_sigma: f64) -> ModelSpec {
        ModelSpec {
            name: "test".into(),
            dim: 1,
            b0: Arc::new(|_, x, o| o[0] = -x[0]),
            b1: Interaction::Pairwise(Arc::new(|_, x, y, o| o[0] = (y[0] - x[0]).sin())),
            sigma: Diffusion::Scalar(delta_sigma),
            constants: ModelConstants {
                k_b: 1.0,
                k_sigma: 0.0,
                delta: 1.0,
                b1_sup_norm: 1.0,
                phi: None,
            },
            horizon: 1.0,
        }
    }

    #[test]
    fn audit_accepts_consistent_model() {
        let rep = ou_sin(1.0).audit(&NoiseDriver::new(1), 500).unwrap();
        assert!(rep.max_b1 <= 1.0);
        assert!((rep.max_b0_lipschitz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_rejects_ellipticity_violation() {
        let err = ou_sin(2.0).audit(&NoiseDriver::new(1), 50).unwrap_err();
        assert!(err.to_string().contains("σσ*"), "{err}");
    }

    #[test]
    fn audit_rejects_understated_kernel_bound() {
        let mut m = ou_sin(1.0);
        m.constants.b1_sup_norm = 0.5;
        assert!(m.audit(&NoiseDriver::new(1), 500).is_err());
    }

    #[test]
    fn separable_average_matches_pairwise() {
        let pair = Interaction::Pairwise(Arc::new(|_, x, y, o| o[0] = (y[0] - x[0]).sin()));
        let sep = Interaction::Separable {
            features: 2,
            feature: Arc::new(|_, y, g| {
                g[0] = y[0].sin();
                g[1] = y[0].cos();
            }),
            combine: Arc::new(|_, x, g, o| o[0] = g[0] * x[0].cos() - g[1] * x[0].sin()),
        };
        let cloud: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
        let x = [0.3];
        let (mut a, mut b) = ([0.0], [0.0]);
        let mut scratch = Vec::new();
        pair.average(0.0, &x, &pair.summarize(0.0, &cloud, 1), &mut a, &mut scratch);
        sep.average(0.0, &x, &sep.summarize(0.0, &cloud, 1), &mut b, &mut scratch);
        assert!((a[0] - b[0]).abs() < 1e-13);
    }

    #[test]
    fn matrix_pseudo_inverse_recovers_shift() {
        let sig = Diffusion::Matrix {
            noise_dim: 2,
            eval: Arc::new(|_, _, o| o.copy_from_slice(&[2.0, 0.5, 0.0, 1.0])),
        };
        let v = [1.0, -1.0];
        let g = sig.pseudo_inverse_apply(0.0, &[0.0, 0.0], &v).unwrap();
        let mut back = vec![0.0; 2];
        let mut scratch = Vec::new();
        sig.apply(0.0, &[0.0, 0.0], &g, &mut back, &mut scratch);
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[1] + 1.0).abs() < 1e-12);
    }
}
