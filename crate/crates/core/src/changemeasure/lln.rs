use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::sde::{Domain, NoiseDriver, SampleLaw};
use crate::stats;

/// Sup-norm bound `(8e)⁻¹` under which the exponential moment is at most 3.
pub const LLN_SUP_BOUND: f64 = 1.0 / (8.0 * std::f64::consts::E);

const LLN_DOMAIN: Domain = Domain::Auxiliary(0x11a);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpLlnOptions {
    /// Atoms of the frozen cloud standing in for `∫ φ(ξ₁, y) μ(dy)`.
    pub reference_size: usize,
    /// Random probes of the sup-norm audit.
    pub audit_probes: usize,
}

impl Default for ExpLlnOptions {
    fn default() -> Self {
        Self {
            reference_size: 100_000,
            audit_probes: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
    /// Largest `|φ|` seen by the audit.
    pub audited_sup: f64,
}

/// Monte Carlo estimate of
/// `E exp{N |(1/N) Σ_{i=1}^N φ(ξ₁, ξ_i) - ∫ φ(ξ₁, y) μ(dy)|²}`
/// for i.i.d. `ξ_i ~ law` (the `i = 1` term included). The inner integral
/// uses one frozen reference cloud shared by all trials.
pub fn exp_lln_moment(
    phi: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    law: &SampleLaw,
    n: usize,
    trials: usize,
    driver: &NoiseDriver,
    opts: &ExpLlnOptions,
) -> Result<MomentEstimate> {
    law.validate()?;
    if n == 0 || n > 500 {
        return Err(invalid(format!("exponential LLN moment needs 1 <= N <= 500, got {n}")));
    }
    if trials < 2 || opts.reference_size == 0 {
        return Err(invalid("exponential LLN moment needs >= 2 trials and a reference cloud"));
    }
    let d = law.dim();
    let audited_sup = audit_sup(phi, law, driver, opts.audit_probes);
    if audited_sup > LLN_SUP_BOUND * (1.0 + 1e-12) {
        return Err(Error::ModelAudit(format!(
            "|φ| reached {audited_sup} above (8e)^-1 = {LLN_SUP_BOUND}"
        )));
    }
    let reference = law.sample_many(&mut driver.stream_in(LLN_DOMAIN, 1, 0, 0), opts.reference_size);
    let values = exec::map_indexed(trials, |trial| {
        let xi = law.sample_many(&mut driver.stream_in(LLN_DOMAIN, 0, trial as u32, 0), n);
        let x1 = &xi[..d];
        let empirical: Vec<f64> = xi.chunks_exact(d).map(|y| phi(x1, y)).collect();
        let against_ref: Vec<f64> = reference.chunks_exact(d).map(|y| phi(x1, y)).collect();
        let gap = stats::pairwise_sum(&empirical) / n as f64 - stats::pairwise_sum(&against_ref) / opts.reference_size as f64;
        (n as f64 * gap * gap).exp()
    });
    let (estimate, stderr) = stats::mean_stderr(&values);
    Ok(MomentEstimate {
        estimate,
        stderr,
        trials,
        audited_sup,
    })
}

fn audit_sup(phi: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), law: &SampleLaw, driver: &NoiseDriver, probes: usize) -> f64 {
    let d = law.dim();
    let mut s = driver.stream_in(LLN_DOMAIN, 2, 0, 0);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut sup: f64 = 0.0;
    for k in 0..probes {
        law.sample_into(&mut s, &mut x);
        law.sample_into(&mut s, &mut y);
        // Every other probe is spread out to reach beyond the bulk of the law.
        if k % 2 == 1 {
            let scale = 1.0 + 3.0 * s.uniform();
            x.iter_mut().for_each(|v| *v *= scale);
            y.iter_mut().for_each(|v| *v *= scale);
        }
        sup = sup.max(phi(&x, &y).abs());
    }
    sup
}
