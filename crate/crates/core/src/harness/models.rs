use std::sync::Arc;

use super::config::{ModelId, StudyConfig};
use crate::error::Result;
use crate::sde::{
    make_modulus, Diffusion, Interaction, ModelConstants, ModelSpec, ModulusFunction, ModulusKind, SampleLaw,
};
use crate::spde::{build_spectrum, signed_sqrt, SpectralModel};

/// A registered test model.
#[derive(Clone)]
pub enum RegisteredModel {
    Finite(ModelSpec),
    Spectral(SpectralModel),
}

impl RegisteredModel {
    /// Modulus used for the `Ψ_φ` cost; `φ(r) = √r` unless the model
    /// declares its own.
    pub fn phi(&self) -> Result<ModulusFunction> {
        let declared = match self {
            RegisteredModel::Finite(m) => m.constants.phi.clone(),
            RegisteredModel::Spectral(m) => m.phi().cloned(),
        };
        match declared {
            Some(phi) => Ok(phi),
            None => make_modulus(ModulusKind::Power(0.5)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegisteredModel::Finite(m) => m.dim,
            RegisteredModel::Spectral(m) => m.modes(),
        }
    }
}

fn ou_base(name: &str, b1: Interaction, b1_sup_norm: f64, phi: Option<ModulusFunction>) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        dim: 1,
        b0: Arc::new(|_, x, out| out[0] = -x[0]),
        b1,
        sigma: Diffusion::Scalar(1.0),
        constants: ModelConstants {
            k_b: 1.0,
            k_sigma: 0.0,
            delta: 1.0,
            b1_sup_norm,
            phi,
        },
        horizon: 1.0,
    }
}

/// `sin(y - x) = sin y cos x - cos y sin x`, averaged in O(1) per particle.
fn bounded_sine() -> Interaction {
    Interaction::Separable {
        features: 2,
        feature: Arc::new(|_, y, g| {
            let (s, c) = y[0].sin_cos();
            g[0] = s;
            g[1] = c;
        }),
        combine: Arc::new(|_, x, g, out| {
            let (s, c) = x[0].sin_cos();
            out[0] = g[0] * c - g[1] * s;
        }),
    }
}

pub fn build_model(cfg: &StudyConfig) -> Result<RegisteredModel> {
    let horizon = cfg.grid.horizon;
    let model = match cfg.model_id {
        ModelId::BoundedKernel => {
            let mut m = ou_base("bounded_kernel", bounded_sine(), 1.0, None);
            m.horizon = horizon;
            RegisteredModel::Finite(m)
        }
        ModelId::DiniKernel => {
            let phi = make_modulus(ModulusKind::Power(0.5))?;
            let bt = signed_sqrt();
            let kernel = Interaction::Pairwise(Arc::new(move |_, x, y, out| out[0] = bt(y[0] - x[0]).sin()));
            let mut m = ou_base("dini_kernel", kernel, 1.0, Some(phi));
            m.horizon = horizon;
            RegisteredModel::Finite(m)
        }
        ModelId::NoInteraction => {
            let mut m = ou_base("no_interaction", Interaction::None, 0.0, None);
            m.horizon = horizon;
            RegisteredModel::Finite(m)
        }
        ModelId::SpdeSpectral => {
            let s = cfg.spde;
            let phi = make_modulus(ModulusKind::Power(0.5))?;
            RegisteredModel::Spectral(build_spectrum(s.modes, s.epsilon, s.alpha)?.with_kernel(signed_sqrt(), Some(phi)))
        }
    };
    Ok(model)
}

/// Initial law used when the config gives none: standard normal for the
/// finite-dimensional models, the zero field for the SPDE.
pub fn default_init(model: &RegisteredModel) -> SampleLaw {
    match model {
        RegisteredModel::Finite(m) => SampleLaw::standard_normal(m.dim),
        RegisteredModel::Spectral(m) => SampleLaw::Dirac {
            point: vec![0.0; m.modes()],
        },
    }
}
