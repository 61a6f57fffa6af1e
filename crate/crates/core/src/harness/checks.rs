use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::StudyConfig;
use super::study::run_study;
use crate::changemeasure::{
    dual_entropy_bound_check, exp_lln_moment, gaussian_ratio_moment, gaussian_ratio_samples, girsanov_weight,
    harnack_check, heat_harnack_exponent, ExpLlnOptions, HeatSemigroup, LLN_SUP_BOUND,
};
use crate::entropy::pinsker_check;
use crate::error::{Error, Result};
use crate::exec;
use crate::measures::{joint_product_transport, product_transport, CostFunction, EmpiricalMeasure};
use crate::sde::{
    euler_maruyama_with_increments, make_modulus, Diffusion, Domain, ModulusKind, NoiseDriver, SampleLaw, TimeGrid,
};
use crate::spde::{build_spectrum, kernel_b1_spectral, signed_sqrt, simulate_spde_ips, SpectralField};
use crate::stats::{mean_stderr, variance};

const CHECK_DOMAIN: u32 = 0xc4ec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma21,
    Lemma22,
    Girsanov,
    Harnack,
    Pinsker,
    SpdeOracles,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Lemma21,
        Suite::Lemma22,
        Suite::Girsanov,
        Suite::Harnack,
        Suite::Pinsker,
        Suite::SpdeOracles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma21 => "lemma21",
            Suite::Lemma22 => "lemma22",
            Suite::Girsanov => "girsanov",
            Suite::Harnack => "harnack",
            Suite::Pinsker => "pinsker",
            Suite::SpdeOracles => "spde_oracles",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// One assertion of a suite. `margin` is the signed distance to the
/// threshold in the units of `value`; non-negative means pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub margin: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    /// Passes when `value <= threshold`.
    fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let margin = threshold - value;
        Self {
            name: name.into(),
            value,
            threshold,
            margin,
            passed: margin >= 0.0,
            detail: detail.into(),
        }
    }

    /// Passes when `value >= threshold`.
    fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let margin = value - threshold;
        Self {
            name: name.into(),
            value,
            threshold,
            margin,
            passed: margin >= 0.0,
            detail: detail.into(),
        }
    }

    fn flag(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            margin: if ok { 0.0 } else { -1.0 },
            passed: ok,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub seed: u64,
    pub items: Vec<CheckItem>,
    pub passed: bool,
}

impl CheckReport {
    fn new(suite: Suite, seed: u64, items: Vec<CheckItem>) -> Self {
        let passed = items.iter().all(|i| i.passed);
        Self {
            suite,
            seed,
            items,
            passed,
        }
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

pub fn check_suite(suite: Suite, seed: u64) -> Result<CheckReport> {
    let driver = NoiseDriver::new(seed);
    let items = match suite {
        Suite::Lemma21 => lemma21(&driver)?,
        Suite::Lemma22 => lemma22(&driver)?,
        Suite::Girsanov => girsanov(&driver)?,
        Suite::Harnack => harnack(&driver)?,
        Suite::Pinsker => pinsker(seed)?,
        Suite::SpdeOracles => spde_oracles(&driver, seed)?,
    };
    Ok(CheckReport::new(suite, seed, items))
}

fn lemma21(driver: &NoiseDriver) -> Result<Vec<CheckItem>> {
    let phi = |x: &[f64], y: &[f64]| (x[0] * y[0]).sin() * LLN_SUP_BOUND;
    let trials = 20_000;
    let m = exp_lln_moment(&phi, &SampleLaw::standard_normal(1), 100, trials, driver, &ExpLlnOptions::default())?;
    let detail = format!("N = 100, {trials} trials, stderr {:.2e}", m.stderr);
    Ok(vec![
        CheckItem::at_most("moment_upper", m.estimate, 3.0, detail.clone()),
        CheckItem::at_least("moment_lower", m.estimate, 1.0, detail),
    ])
}

fn random_measure(stream: &mut crate::sde::NoiseStream, atoms: usize, dim: usize) -> Result<EmpiricalMeasure> {
    let points: Vec<f64> = (0..atoms * dim).map(|_| 2.0 * stream.normal()).collect();
    let raw: Vec<f64> = (0..atoms).map(|_| 0.1 + stream.uniform()).collect();
    let total: f64 = raw.iter().sum();
    EmpiricalMeasure::weighted(points, dim, raw.iter().map(|w| w / total).collect())
}

fn lemma22(driver: &NoiseDriver) -> Result<Vec<CheckItem>> {
    let phi = make_modulus(ModulusKind::Power(0.5))?;
    let instances = 50;
    let diffs = exec::try_map_indexed(instances, |j| {
        let mut s = driver.stream_in(Domain::Auxiliary(CHECK_DOMAIN), 0, j as u32, 0);
        let m = 1 + (s.uniform() * 3.0) as usize;
        let mut mus = Vec::new();
        let mut nus = Vec::new();
        let mut costs = Vec::new();
        for _ in 0..m {
            let dim = 1 + (s.uniform() * 2.0) as usize;
            let a = 1 + (s.uniform() * 4.0) as usize;
            let b = 1 + (s.uniform() * 4.0) as usize;
            mus.push(random_measure(&mut s, a, dim)?);
            nus.push(random_measure(&mut s, b, dim)?);
            costs.push(match (s.uniform() * 4.0) as usize {
                0 => CostFunction::EuclideanPower(1.0),
                1 => CostFunction::EuclideanPower(2.0),
                2 => CostFunction::PsiEta(0.25 + 0.5 * s.uniform()),
                _ => CostFunction::PsiPhi(phi.clone()),
            });
        }
        let split = product_transport(&mus, &nus, &costs)?;
        let joint = joint_product_transport(&mus, &nus, &costs)?;
        Ok::<_, Error>((split - joint).abs())
    })?;
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    Ok(vec![CheckItem::at_most(
        "product_equals_joint",
        worst,
        1e-9,
        format!("{instances} instances, up to 3 marginals of up to 4 atoms"),
    )])
}

fn girsanov(driver: &NoiseDriver) -> Result<Vec<CheckItem>> {
    let grid = TimeGrid::new(1.0, 100)?;
    let sigma = Diffusion::Scalar(1.0);
    let paths = 10_000;
    let base = |_: f64, x: &[f64], out: &mut [f64]| out[0] = -x[0];
    let shifted = |_: f64, x: &[f64], out: &mut [f64]| out[0] = -x[0] + 0.5;
    let bent = |_: f64, x: &[f64], out: &mut [f64]| out[0] = -x[0] + 0.8 * (2.0 * x[0]).sin();
    let cases: [(&str, &(dyn Fn(f64, &[f64], &mut [f64]) + Sync)); 2] =
        [("constant_discrepancy", &shifted), ("state_dependent_discrepancy", &bent)];
    let mut items = Vec::new();
    for (lane, (name, other)) in cases.into_iter().enumerate() {
        let weights = exec::try_map_indexed(paths, |j| {
            let inc = driver
                .stream_in(Domain::Auxiliary(CHECK_DOMAIN), 1 + lane as u32, j as u32, 0)
                .increments(&grid, 1);
            let path = euler_maruyama_with_increments(&base, &sigma, &[0.5], &grid, &inc)?;
            girsanov_weight(&path, &base, other, &sigma, &grid, &inc).map(|w| w.weight())
        })?;
        let (m, se) = mean_stderr(&weights);
        items.push(CheckItem::at_most(
            name,
            (m - 1.0).abs(),
            3.0 * se,
            format!("E[R_T] = {m:.5} ± {se:.1e} over {paths} paths"),
        ));
    }
    Ok(items)
}

/// Largest log-normal variance `q² |x - y|² / t` for which the Monte Carlo
/// moment is trusted.
const RATIO_VARIANCE_CAP: f64 = 2.0;

fn harnack(driver: &NoiseDriver) -> Result<Vec<CheckItem>> {
    let logistic = |z: &[f64]| 1.0 / (1.0 + (-4.0 * z[0]).exp());
    let bump = |z: &[f64]| (-z[0] * z[0]).exp();
    let wave = |z: &[f64]| 1.0 + 0.9 * (3.0 * z[0]).sin();
    let functions: [&(dyn Fn(&[f64]) -> f64 + Sync); 3] = [&logistic, &bump, &wave];
    let points = [-1.0, 0.0, 1.0];
    let exponent = |t: f64, x: &[f64], y: &[f64], p: f64| heat_harnack_exponent(t, x, y, p);

    let mut worst = f64::INFINITY;
    let mut count = 0;
    let mut failures = 0;
    let mut moment_err: f64 = 0.0;
    let mut moment_bound_ok = true;
    let mut moments = 0;
    for &t in &[0.25, 1.0] {
        for &p in &[2.0, 4.0] {
            for &x in &points {
                for &y in &points {
                    for f in functions {
                        let o = harnack_check(&HeatSemigroup, f, &[x], &[y], t, p, &exponent)?;
                        worst = worst.min((o.rhs - o.lhs) / o.rhs);
                        count += 1;
                        failures += usize::from(!o.satisfied);
                    }
                    let q = p / (p - 1.0);
                    if q * q * (x - y) * (x - y) / t <= RATIO_VARIANCE_CAP {
                        let exact = gaussian_ratio_moment(&[x], &[y], t, p);
                        let ratios = gaussian_ratio_samples(&[x], &[y], t, 100_000, &driver.child(moments));
                        let mc = dual_entropy_bound_check(&ratios, p, exact)?;
                        moment_err = moment_err.max((mc.moment - exact).abs() / exact);
                        moment_bound_ok &= mc.satisfied;
                        moments += 1;
                    }
                }
            }
        }
    }
    Ok(vec![
        CheckItem::at_least(
            "heat_inequality",
            worst,
            0.0,
            format!("{count} grid points, {failures} violations; value is min (rhs - lhs)/rhs"),
        ),
        CheckItem::at_most(
            "ratio_moment_relative_error",
            moment_err,
            0.05,
            format!("{moments} points with q²|x-y|²/t <= {RATIO_VARIANCE_CAP}"),
        ),
        CheckItem::flag("ratio_moment_within_bound", moment_bound_ok, "moment <= bound + 3 stderr"),
    ])
}

/// Small study used by the Pinsker suite.
pub(crate) fn pinsker_config(seed: u64) -> StudyConfig {
    StudyConfig::from_toml(&format!(
        r#"
model_id = "bounded_kernel"
N_list = [8, 16, 32]
t_checkpoints = [0.25, 0.5, 1.0]
trials = 200
master_seed = {seed}

[grid]
T = 1.0
h = 0.01

[coupling]
kind = "shift"
c = 2.0
a = 0.5

[init]
kind = "gaussian"
mean = [0.0]
std = 1.0

[estimator]
bins = 50
replicates = 30

[flow]
support = 2000
"#
    ))
    .expect("built-in config is valid")
}

fn pinsker(seed: u64) -> Result<Vec<CheckItem>> {
    let result = run_study(&pinsker_config(seed))?;
    let mut items = Vec::new();
    for ent in result.rows.iter().filter(|r| r.metric == "ent") {
        let vsq = result
            .row(ent.n, ent.t, "var_sq")
            .ok_or_else(|| Error::Config("study lacks var_sq rows".into()))?;
        let slack = 3.0 * vsq.stderr.hypot(2.0 * ent.stderr);
        let ok = pinsker_check(vsq.estimate, ent.estimate, slack)?;
        let mut item = CheckItem::at_most(
            format!("pinsker_N{}_t{}", ent.n, ent.t),
            vsq.estimate,
            2.0 * ent.estimate.max(0.0) + slack,
            format!("var² = {:.3e}, Ent = {:.3e}, slack {:.1e}", vsq.estimate, ent.estimate, slack),
        );
        item.passed = ok;
        items.push(item);
    }
    Ok(items)
}

/// Coupled spectral study used by the SPDE suite.
pub(crate) fn spde_config(seed: u64) -> StudyConfig {
    StudyConfig::from_toml(&format!(
        r#"
model_id = "spde_spectral"
N_list = [8, 16, 32, 64]
t_checkpoints = [1.0]
trials = 30
master_seed = {seed}

[grid]
T = 1.0
h = 0.02

[estimator]
replicates = 20
bins = 50

[flow]
support = 1000

[spde]
modes = 4
epsilon = 1.0
alpha = 0.25
"#
    ))
    .expect("built-in config is valid")
}

fn spde_oracles(driver: &NoiseDriver, seed: u64) -> Result<Vec<CheckItem>> {
    let mut items = Vec::new();

    let rejected = [(0.5, 0.1), (0.75, 0.5), (1.0, 0.5), (1.0, 0.6), (2.0, 0.75)];
    let accepted = [(1.0, 0.25), (0.75, 0.3), (2.0, 0.7)];
    let gate = rejected
        .iter()
        .all(|&(e, a)| matches!(build_spectrum(8, e, a), Err(Error::TraceCondition { .. })))
        && accepted.iter().all(|&(e, a)| build_spectrum(8, e, a).is_ok());
    items.push(CheckItem::flag("trace_gate", gate, "2ε(1-α) <= 1 rejected, > 1 accepted"));

    let free = build_spectrum(5, 1.0, 0.25)?;
    let n = 20_000;
    let grid = TimeGrid::new(2.0, 20)?;
    let path = simulate_spde_ips(&free, &vec![SpectralField::zeros(5); n], &grid, &driver.child(1), 0)?;
    let end = path.at(grid.steps());
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let col: Vec<f64> = end.chunks_exact(5).map(|x| x[i]).collect();
        let exact = 1.0 / (2.0 * free.eigenvalues()[i]);
        worst = worst.max((variance(&col) - exact).abs() / exact);
    }
    items.push(CheckItem::at_most(
        "stationary_variance",
        worst,
        0.05,
        format!("max relative error over modes 1..5, {n} fields at t = 2"),
    ));

    let phi = make_modulus(ModulusKind::Power(0.5))?;
    let kernel = build_spectrum(16, 1.0, 0.25)?.with_kernel(signed_sqrt(), Some(phi));
    let mut s = driver.stream_in(Domain::Auxiliary(CHECK_DOMAIN), 3, 0, 0);
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let x = SpectralField::new((0..16).map(|_| 3.0 * s.normal()).collect())?;
        let y = SpectralField::new((0..16).map(|_| 3.0 * s.normal()).collect())?;
        let b = kernel_b1_spectral(&x, &y, &kernel)?;
        for (i, c) in b.coefficients.iter().enumerate() {
            excess = excess.max(c.abs() - 1.0 / (i + 1) as f64);
        }
    }
    items.push(CheckItem::at_most(
        "kernel_mode_bound",
        excess,
        0.0,
        "max of |<b1, e_i>| - 1/i over 1000 probes",
    ));

    let study = run_study(&spde_config(seed))?;
    let gaps: Vec<f64> = study.series("strong_gap", 1.0).iter().map(|r| r.estimate).collect();
    let worst_step = gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    items.push(CheckItem::at_most(
        "strong_gap_decreasing",
        worst_step,
        0.0,
        format!("gaps over N = 8, 16, 32, 64: {gaps:?}"),
    ));
    Ok(items)
}
