use crate::sde::{em_update, Interaction, ModelSpec};

/// Scratch buffers reused across steps of one particle.
#[derive(Clone, Debug, Default)]
pub struct StepWork {
    pub(crate) drift: Vec<f64>,
    pub(crate) next: Vec<f64>,
    pub(crate) dw: Vec<f64>,
    pub(crate) scratch: Vec<f64>,
}

/// A particle dynamics `dX = (L X + b⁰(t, X) + ∫ b¹(t, X, y) μ_t(dy)) dt + noise`
/// advanced one grid step at a time.
pub trait Dynamics: Send + Sync {
    /// State dimension.
    fn dim(&self) -> usize;

    /// `(lanes, per_lane)`: a particle owns `lanes` independent noise streams
    /// and draws `per_lane` standard normals from each per step.
    fn noise_layout(&self) -> (usize, usize);

    fn interaction(&self) -> &Interaction;

    /// Advances `x` from `t` to `t + h` given the kernel average `mean_field`
    /// and the step's standard normals `z` (lane-major).
    fn advance(&self, t: f64, h: f64, x: &mut [f64], mean_field: &[f64], z: &[f64], work: &mut StepWork);

    /// The same dynamics with `b¹ ≡ 0`.
    fn free(&self) -> Self
    where
        Self: Sized;

    /// Leading coordinates compared when measuring gaps between flows.
    fn gap_coordinates(&self) -> usize {
        self.dim()
    }
}

impl Dynamics for ModelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_layout(&self) -> (usize, usize) {
        (1, self.noise_dim())
    }

    fn interaction(&self) -> &Interaction {
        &self.b1
    }

    fn advance(&self, t: f64, h: f64, x: &mut [f64], mean_field: &[f64], z: &[f64], work: &mut StepWork) {
        let d = self.dim;
        work.drift.resize(d, 0.0);
        work.next.resize(d, 0.0);
        work.dw.resize(z.len(), 0.0);
        (self.b0)(t, x, &mut work.drift);
        for (b, m) in work.drift.iter_mut().zip(mean_field) {
            *b += m;
        }
        // Same arithmetic as `euler_maruyama`, so a free particle reproduces
        // the single-path integrator exactly.
        let sqrt_h = h.sqrt();
        for (w, zi) in work.dw.iter_mut().zip(z) {
            *w = sqrt_h * zi;
        }
        em_update(t, h, x, &work.drift, &self.sigma, &work.dw, &mut work.next, &mut work.scratch);
    }

    fn free(&self) -> Self {
        self.without_interaction()
    }
}
