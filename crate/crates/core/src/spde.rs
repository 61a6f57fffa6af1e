//! Spectral-Galerkin truncation of semilinear SPDEs on `(0, 1)` with
//! Dirichlet boundary conditions.
//!
//! The state is the vector of coordinates in the eigenbasis
//! `e_i(z) = √2 sin(iπz)` of the Laplacian. The linear part is
//! `A = -(-Δ)^ε` with eigenvalues `λ_i = (iπ)^{2ε}`, the noise is diagonal,
//! and the interaction acts mode by mode:
//! `⟨b¹(x, y), e_i⟩ = β_i sin(b̃(x_i - y_i))` with `β_i = 1/i`.
//! Each mode is stepped by the exact exponential integrator of its linear
//! part and owns a separate noise lane, so truncating at more modes leaves
//! the leading modes bit-for-bit unchanged.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::meanfield::{
    run_coupled, simulate_ips, solve_mkv_picard, CoupledRun, Dynamics, Ensemble, MeasureFlow, Pairing,
    PicardOptions, StepWork, Trajectory,
};
use crate::sde::{Interaction, ModulusFunction, NoiseDriver, SampleLaw, ScalarFn, TimeGrid};

/// Coordinates of a field in the eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub coefficients: Vec<f64>,
}

impl SpectralField {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        Ok(Self { coefficients })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            coefficients: vec![0.0; modes],
        }
    }

    /// `|x|_H = (Σ x_i²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        crate::sde::norm(&self.coefficients)
    }
}

#[derive(Clone)]
pub struct SpectralModel {
    modes: usize,
    epsilon: f64,
    alpha: f64,
    lambda: Vec<f64>,
    beta: Vec<f64>,
    q: Vec<f64>,
    /// `Σ_{i ≤ modes} λ_i^{α-1}`.
    trace_sum: f64,
    /// Integral-comparison bound on the tail `Σ_{i > modes} λ_i^{α-1}`.
    trace_tail: f64,
    b_tilde: Option<ScalarFn>,
    phi: Option<ModulusFunction>,
    interaction: Interaction,
}

impl std::fmt::Debug for SpectralModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralModel")
            .field("modes", &self.modes)
            .field("epsilon", &self.epsilon)
            .field("alpha", &self.alpha)
            .field("trace_sum", &self.trace_sum)
            .field("trace_tail", &self.trace_tail)
            .field("kernel", &self.b_tilde.is_some())
            .finish()
    }
}

/// Spectrum of `-(-Δ)^ε` truncated at `modes`, with unit noise and no
/// interaction. Refuses `(ε, α)` unless `ε > 1/2`, `α ∈ (0, 1)` and
/// `2ε(1 - α) > 1`, which makes `Σ λ_i^{α-1}` finite.
pub fn build_spectrum(modes: usize, epsilon: f64, alpha: f64) -> Result<SpectralModel> {
    if modes == 0 {
        return Err(invalid("spectral model needs at least one mode"));
    }
    let s = 2.0 * epsilon * (1.0 - alpha);
    if !(epsilon > 0.5) || !(alpha > 0.0 && alpha < 1.0) || !(s > 1.0) {
        return Err(Error::TraceCondition { epsilon, alpha });
    }
    let pi = std::f64::consts::PI;
    let lambda: Vec<f64> = (1..=modes).map(|i| (i as f64 * pi).powf(2.0 * epsilon)).collect();
    let trace_sum = lambda.iter().map(|l| l.powf(alpha - 1.0)).sum();
    // Σ_{i>M} (iπ)^{-s} ≤ ∫_M^∞ (πz)^{-s} dz.
    let trace_tail = pi.powf(-s) * (modes as f64).powf(1.0 - s) / (s - 1.0);
    Ok(SpectralModel {
        modes,
        epsilon,
        alpha,
        lambda,
        beta: (1..=modes).map(|i| 1.0 / i as f64).collect(),
        q: vec![1.0; modes],
        trace_sum,
        trace_tail,
        b_tilde: None,
        phi: None,
        interaction: Interaction::None,
    })
}

impl SpectralModel {
    /// Installs the kernel `⟨b¹(x, y), e_i⟩ = β_i sin(b̃(x_i - y_i))`.
    pub fn with_kernel(mut self, b_tilde: ScalarFn, phi: Option<ModulusFunction>) -> Self {
        let beta = self.beta.clone();
        let bt = b_tilde.clone();
        self.interaction = Interaction::Pairwise(Arc::new(move |_, x, y, out| {
            for i in 0..out.len() {
                out[i] = beta[i] * bt(x[i] - y[i]).sin();
            }
        }));
        self.b_tilde = Some(b_tilde);
        self.phi = phi;
        self
    }

    /// Diagonal noise weights `q_i`; (B2) holds with `δ = max(q_i², q_i⁻²)`.
    pub fn with_noise(mut self, q: Vec<f64>) -> Result<Self> {
        if q.len() != self.modes || q.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("noise weights must be positive, one per mode"));
        }
        self.q = q;
        Ok(self)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mode_bounds(&self) -> &[f64] {
        &self.beta
    }

    pub fn noise_weights(&self) -> &[f64] {
        &self.q
    }

    pub fn trace_sum(&self) -> f64 {
        self.trace_sum
    }

    pub fn trace_tail(&self) -> f64 {
        self.trace_tail
    }

    pub fn phi(&self) -> Option<&ModulusFunction> {
        self.phi.as_ref()
    }

    /// Smallest `δ ≥ 1` with `δ⁻¹ ≤ q_i² ≤ δ`.
    pub fn delta(&self) -> f64 {
        self.q
            .iter()
            .map(|v| (v * v).max(1.0 / (v * v)))
            .fold(1.0, f64::max)
    }

    /// Stationary variance `q_i² / (2λ_i)` of mode `i` (0-based) without
    /// interaction.
    pub fn stationary_variance(&self, i: usize) -> f64 {
        self.q[i] * self.q[i] / (2.0 * self.lambda[i])
    }
}

/// `b¹(x, y)` in coordinates. Zero when no kernel is installed.
pub fn kernel_b1_spectral(x: &SpectralField, y: &SpectralField, model: &SpectralModel) -> Result<SpectralField> {
    let m = model.modes;
    if x.coefficients.len() != m || y.coefficients.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: x.coefficients.len().min(y.coefficients.len()),
        });
    }
    let mut out = vec![0.0; m];
    model.interaction.eval(0.0, &x.coefficients, &y.coefficients, &mut out);
    SpectralField::new(out)
}

impl Dynamics for SpectralModel {
    fn dim(&self) -> usize {
        self.modes
    }

    fn noise_layout(&self) -> (usize, usize) {
        (self.modes, 1)
    }

    fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    fn advance(&self, _t: f64, h: f64, x: &mut [f64], mean_field: &[f64], z: &[f64], _work: &mut StepWork) {
        for i in 0..self.modes {
            let l = self.lambda[i];
            let decay = (-l * h).exp();
            let gain = -(-l * h).exp_m1() / l;
            let spread = (-(-2.0 * l * h).exp_m1() / (2.0 * l)).sqrt();
            x[i] = decay * x[i] + gain * mean_field[i] + self.q[i] * spread * z[i];
        }
    }

    fn free(&self) -> Self {
        Self {
            interaction: Interaction::None,
            b_tilde: None,
            ..self.clone()
        }
    }

    fn gap_coordinates(&self) -> usize {
        self.modes.min(3)
    }
}

/// `N`-particle spectral system from the given initial fields.
pub fn simulate_spde_ips(
    model: &SpectralModel,
    init: &[SpectralField],
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
) -> Result<Trajectory> {
    if init.is_empty() {
        return Err(invalid("need at least one initial field"));
    }
    let states: Vec<f64> = init.iter().flat_map(|f| f.coefficients.iter().copied()).collect();
    let ensemble = Ensemble::new(states, model.modes)?;
    simulate_ips(model, &ensemble, grid, driver, replication)
}

/// Limit law flow over spectral coefficients by Picard iteration.
pub fn mkv_spde_flow(
    model: &SpectralModel,
    init: &SampleLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    opts: &PicardOptions,
) -> Result<MeasureFlow> {
    solve_mkv_picard(model, init, grid, driver, opts)
}

/// Coupled spectral run (particle system, intermediate copies, limit copies).
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_spde(
    model: &SpectralModel,
    init: &SampleLaw,
    pairing: &Pairing,
    n: usize,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
    flow: &MeasureFlow,
) -> Result<CoupledRun> {
    run_coupled(model, init, init, pairing, n, grid, driver, replication, flow)
}

/// `b̃(r) = sign(r) √|r|`.
pub fn signed_sqrt() -> ScalarFn {
    Arc::new(|r: f64| r.signum() * r.abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{make_modulus, ModulusKind};

    #[test]
    fn spectrum_examples() {
        let m = build_spectrum(8, 1.0, 0.25).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((m.eigenvalues()[0] - pi2).abs() < 1e-12);
        assert!((m.eigenvalues()[1] / m.eigenvalues()[0] - 4.0).abs() < 1e-12);
        assert!(m.trace_tail().is_finite() && m.trace_sum() > 0.0);
        let e = 0.7;
        let m = build_spectrum(4, e, 0.1).unwrap();
        assert!((m.eigenvalues()[1] / m.eigenvalues()[0] - 2f64.powf(2.0 * e)).abs() < 1e-12);
    }

    #[test]
    fn trace_gate() {
        assert!(matches!(build_spectrum(8, 0.6, 0.5), Err(Error::TraceCondition { .. })));
        assert!(matches!(build_spectrum(8, 1.0, 0.5), Err(Error::TraceCondition { .. })));
        assert!(build_spectrum(8, 1.0, 0.49).is_ok());
    }

    #[test]
    fn kernel_mode_bound_and_diagonal() {
        let phi = make_modulus(ModulusKind::Power(0.5)).unwrap();
        let m = build_spectrum(6, 1.0, 0.25).unwrap().with_kernel(signed_sqrt(), Some(phi));
        let x = SpectralField::new(vec![0.3, -1.0, 2.0, 0.0, 5.0, -3.0]).unwrap();
        assert!(kernel_b1_spectral(&x, &x, &m).unwrap().coefficients.iter().all(|c| *c == 0.0));
        let y = SpectralField::new(vec![-2.0, 1.0, 0.0, 7.0, 0.1, 3.0]).unwrap();
        let k = kernel_b1_spectral(&x, &y, &m).unwrap();
        for (i, c) in k.coefficients.iter().enumerate() {
            assert!(c.abs() <= 1.0 / (i + 1) as f64);
        }
    }

    #[test]
    fn truncation_keeps_leading_modes() {
        let grid = TimeGrid::new(0.2, 20).unwrap();
        let driver = NoiseDriver::new(3);
        let small = build_spectrum(4, 1.0, 0.25).unwrap().with_kernel(signed_sqrt(), None);
        let large = build_spectrum(8, 1.0, 0.25).unwrap().with_kernel(signed_sqrt(), None);
        let init4 = vec![SpectralField::zeros(4), SpectralField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap()];
        let init8 = vec![
            SpectralField::zeros(8),
            SpectralField::new(vec![0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        ];
        let a = simulate_spde_ips(&small, &init4, &grid, &driver, 0).unwrap();
        let b = simulate_spde_ips(&large, &init8, &grid, &driver, 0).unwrap();
        for i in 0..2 {
            assert_eq!(a.particle(20, i)[..4], b.particle(20, i)[..4]);
        }
    }

    #[test]
    fn drift_free_single_mode_matches_ou_mean() {
        // Noise off: x_i(t) = e^{-λ_i t} x_i(0) exactly.
        let m = build_spectrum(3, 1.0, 0.25).unwrap().with_noise(vec![1e-300; 3]).unwrap();
        let grid = TimeGrid::new(0.05, 7).unwrap();
        let init = vec![SpectralField::new(vec![1.0, 1.0, 1.0]).unwrap()];
        let t = simulate_spde_ips(&m, &init, &grid, &NoiseDriver::new(0), 0).unwrap();
        for i in 0..3 {
            let exact = (-m.eigenvalues()[i] * 0.05).exp();
            assert!((t.particle(7, 0)[i] - exact).abs() < 1e-12);
        }
    }
}
