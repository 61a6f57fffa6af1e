use serde::{Deserialize, Serialize};

use super::config::StudyConfig;
use super::fit::{rate_fit, RateFit};
use super::models::{build_model, default_init, RegisteredModel};
use super::output::config_hash;
use crate::entropy::knn_log_ratio_terms;
use crate::error::{Error, Result};
use crate::exec;
use crate::meanfield::{run_coupled, solve_mkv_picard, CoupledRun, Dynamics, MeasureFlow};
use crate::measures::{wasserstein_1d_sorted, weighted_variation_samples, CostFunction};
use crate::sde::{Domain, ModulusFunction, NoiseDriver, SampleLaw, TimeGrid};
use crate::stats::{mean, mean_stderr, variance};

/// Child tag of the driver used for the limit flow.
pub const FLOW_TAG: u64 = 0xf10;
const KNN_JITTER: f64 = 1e-12;
/// Largest `k · d` handed to the k-NN estimator directly.
const MAX_ENT_DIM: usize = 4;

pub const FLAG_FLOORED: &str = "floored";
pub const FLAG_PROXY: &str = "upper-bound proxy";
pub const FLAG_PROJECTION: &str = "mode-1 projection";

/// One `(N, t, metric)` estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub metric: String,
    pub estimate: f64,
    pub stderr: f64,
    pub flag: String,
}

impl Row {
    fn new(n: usize, t: f64, metric: &str, estimate: f64, stderr: f64, extra: Option<&str>) -> Self {
        let mut flags = Vec::new();
        if !(estimate > stderr) {
            flags.push(FLAG_FLOORED);
        }
        flags.extend(extra);
        Self {
            n,
            t,
            metric: metric.into(),
            estimate,
            stderr,
            flag: flags.join(";"),
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flag.split(';').any(|f| f == flag)
    }

    /// `max(estimate, stderr)`: the value used for rate fits.
    pub fn floored(&self) -> f64 {
        self.estimate.max(self.stderr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub metric: String,
    pub t: f64,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_gap: f64,
    pub tol: f64,
    pub noise_floor: f64,
    pub gaps: Vec<f64>,
    pub support: usize,
}

impl From<&MeasureFlow> for FlowSummary {
    fn from(f: &MeasureFlow) -> Self {
        Self {
            iterations: f.iteration_count,
            converged: f.converged,
            final_gap: f.final_gap,
            tol: f.tol,
            noise_floor: f.noise_floor,
            gaps: f.gaps.clone(),
            support: f.support,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub version: String,
    pub config_hash: String,
}

impl Fingerprint {
    pub fn of(cfg: &StudyConfig) -> Self {
        Self {
            seed: cfg.master_seed,
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<Row>,
    pub fits: Vec<FitRow>,
    pub fingerprint: Fingerprint,
    pub flow: FlowSummary,
}

impl StudyResult {
    pub fn row(&self, n: usize, t: f64, metric: &str) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.metric == metric && (r.t - t).abs() < 1e-12)
    }

    /// Rows of one metric at one checkpoint, in `N` order.
    pub fn series(&self, metric: &str, t: f64) -> Vec<&Row> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && (r.t - t).abs() < 1e-12)
            .collect()
    }

    pub fn fit(&self, metric: &str, t: f64) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|f| f.metric == metric && (f.t - t).abs() < 1e-12)
            .map(|f| &f.fit)
    }
}

/// What one trial contributes, reduced to the checkpoints.
struct TrialData {
    gaps: Vec<f64>,
    ips: Vec<Vec<f64>>,
    limit: Vec<Vec<f64>>,
    ent: Vec<Vec<f64>>,
    init_eta: f64,
    init_phi: f64,
}

struct Plan {
    checkpoints: Vec<(f64, usize)>,
    grid: TimeGrid,
    init: SampleLaw,
    /// Coordinates handed to the entropy estimator.
    ent_coords: usize,
    /// Particles per entropy sample.
    ent_group: usize,
    /// Multiplier applied to the estimate (sub-additivity proxy).
    ent_scale: f64,
    ent_flag: Option<&'static str>,
}

fn plan(cfg: &StudyConfig, dim: usize, default: SampleLaw) -> Result<Plan> {
    let grid = TimeGrid::with_step(cfg.grid.horizon, cfg.grid.h).map_err(|e| Error::Config(e.to_string()))?;
    if (grid.step() - cfg.grid.h).abs() > 1e-9 * cfg.grid.h {
        return Err(Error::Config(format!(
            "T = {} is not a multiple of h = {}",
            cfg.grid.horizon, cfg.grid.h
        )));
    }
    let checkpoints = cfg
        .t_checkpoints
        .iter()
        .map(|&t| {
            grid.node_at(t)
                .map(|k| (t, k))
                .ok_or_else(|| Error::Config(format!("checkpoint t = {t} is not a grid node")))
        })
        .collect::<Result<Vec<_>>>()?;
    let init = cfg.init.clone().unwrap_or(default);
    if init.dim() != dim {
        return Err(Error::Config(format!(
            "init law has dimension {} but the model has {dim}",
            init.dim()
        )));
    }
    let k = cfg.k_marginal;
    let (ent_coords, ent_flag_proj) = if dim <= MAX_ENT_DIM { (dim, None) } else { (1, Some(FLAG_PROJECTION)) };
    let (ent_group, ent_scale, ent_flag) = if k * ent_coords <= MAX_ENT_DIM {
        (k, 1.0, ent_flag_proj)
    } else {
        (1, k as f64, Some(FLAG_PROXY))
    };
    Ok(Plan {
        checkpoints,
        grid,
        init,
        ent_coords,
        ent_group,
        ent_scale,
        ent_flag,
    })
}

/// Consecutive groups of `group` particles restricted to the first
/// `coords` coordinates, flattened.
fn tuples(states: &[f64], dim: usize, coords: usize, group: usize) -> Vec<f64> {
    let n = states.len() / dim;
    let usable = n - n % group;
    states
        .chunks_exact(dim)
        .take(usable)
        .flat_map(|x| x[..coords].iter().copied())
        .collect()
}

/// Runs the convergence study described by `cfg`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let phi = model.phi()?;
    let default = default_init(&model);
    match &model {
        RegisteredModel::Finite(m) => study_with(m, cfg, &phi, default),
        RegisteredModel::Spectral(m) => study_with(m, cfg, &phi, default),
    }
}

fn study_with<D: Dynamics>(model: &D, cfg: &StudyConfig, phi: &ModulusFunction, default: SampleLaw) -> Result<StudyResult> {
    let d = model.dim();
    let plan = plan(cfg, d, default)?;
    let driver = NoiseDriver::new(cfg.master_seed);
    let flow = solve_mkv_picard(model, &plan.init, &plan.grid, &driver.child(FLOW_TAG), &cfg.flow)
        .map_err(|e| e.with_context("limit flow"))?;
    if !flow.converged {
        log::warn!("limit flow did not converge; rows are reported against the last iterate");
    }
    let psi_eta = CostFunction::PsiEta(cfg.eta);
    let psi_phi = CostFunction::PsiPhi(phi.clone());
    let ent_q: Vec<Vec<f64>> = plan
        .checkpoints
        .iter()
        .map(|&(_, k)| tuples(flow.law(k), d, plan.ent_coords, plan.ent_group))
        .collect();

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        log::info!("N = {n}: {} trials", cfg.trials);
        let trials = exec::try_map_indexed(cfg.trials, |tr| {
            let run = run_coupled(model, &plan.init, &plan.init, &cfg.coupling, n, &plan.grid, &driver, tr as u32, &flow)
                .map_err(|e| e.with_context(format!("N = {n}, trial = {tr}")))?;
            Ok::<_, Error>(reduce_trial(&run, &plan, d, &psi_eta, &psi_phi))
        })?;

        let (m, s) = mean_stderr(&trials.iter().map(|t| t.init_eta).collect::<Vec<_>>());
        rows.push(Row::new(n, 0.0, "init_cost_psi_eta", m, s, None));
        let (m, s) = mean_stderr(&trials.iter().map(|t| t.init_phi).collect::<Vec<_>>());
        rows.push(Row::new(n, 0.0, "init_cost_psi_phi", m, s, None));

        for (ci, &(t, _)) in plan.checkpoints.iter().enumerate() {
            let ctx = |e: Error| e.with_context(format!("N = {n}, t = {t}"));
            let (m, s) = mean_stderr(&trials.iter().map(|tr| tr.gaps[ci]).collect::<Vec<_>>());
            rows.push(Row::new(n, t, "strong_gap", m, s, None));

            let boot = driver.stream_in(Domain::Resample, ci as u32, ni as u32, 0);
            let marg = marginal_metrics(&trials, ci, cfg.estimator.bins, cfg.estimator.replicates, boot).map_err(ctx)?;
            for (name, (est, se)) in ["w1", "w2", "var", "var_sq"].iter().zip(marg) {
                rows.push(Row::new(n, t, name, est, se, None));
            }

            let boot = driver.stream_in(Domain::Resample, ci as u32, ni as u32, 1);
            let (est, se) = entropy_metric(&trials, ci, &ent_q[ci], &plan, cfg, boot).map_err(ctx)?;
            rows.push(Row::new(n, t, "ent", est, se, plan.ent_flag));
        }
    }

    let fits = fit_rows(&rows, cfg);
    Ok(StudyResult {
        rows,
        fits,
        fingerprint: Fingerprint::of(cfg),
        flow: FlowSummary::from(&flow),
    })
}

fn reduce_trial(run: &CoupledRun, plan: &Plan, d: usize, psi_eta: &CostFunction, psi_phi: &CostFunction) -> TrialData {
    let x0 = run.ips.at(0);
    let y0 = run.limit.at(0);
    let cost = |c: &CostFunction| {
        let v: Vec<f64> = x0.chunks_exact(d).zip(y0.chunks_exact(d)).map(|(a, b)| c.eval(a, b)).collect();
        mean(&v)
    };
    TrialData {
        gaps: plan.checkpoints.iter().map(|&(_, k)| run.strong_gap(k)).collect(),
        ips: plan.checkpoints.iter().map(|&(_, k)| run.ips.coordinate(k, 0)).collect(),
        limit: plan.checkpoints.iter().map(|&(_, k)| run.limit.coordinate(k, 0)).collect(),
        ent: plan
            .checkpoints
            .iter()
            .map(|&(_, k)| tuples(run.ips.at(k), d, plan.ent_coords, plan.ent_group))
            .collect(),
        init_eta: cost(psi_eta),
        init_phi: cost(psi_phi),
    }
}

fn resample(stream: &mut crate::sde::NoiseStream, n: usize) -> Vec<usize> {
    (0..n).map(|_| ((stream.uniform() * n as f64) as usize).min(n - 1)).collect()
}

/// W₁, W₂, ‖·‖_var and ‖·‖²_var between the pooled first-coordinate clouds
/// of the particle system and the limit copies, with trial-bootstrap errors.
fn marginal_metrics(
    trials: &[TrialData],
    ci: usize,
    bins: usize,
    replicates: usize,
    mut stream: crate::sde::NoiseStream,
) -> Result<[(f64, f64); 4]> {
    let eval = |idx: &[usize]| -> Result<[f64; 4]> {
        let a: Vec<f64> = idx.iter().flat_map(|&i| trials[i].ips[ci].iter().copied()).collect();
        let b: Vec<f64> = idx.iter().flat_map(|&i| trials[i].limit[ci].iter().copied()).collect();
        let var = weighted_variation_samples(&a, &b, 1, 0.0, bins)?;
        Ok([wasserstein_1d_sorted(&a, &b, 1.0), wasserstein_1d_sorted(&a, &b, 2.0), var, var * var])
    };
    let all: Vec<usize> = (0..trials.len()).collect();
    let point = eval(&all)?;
    let draws: Vec<Vec<usize>> = (0..replicates).map(|_| resample(&mut stream, trials.len())).collect();
    let reps = exec::try_map_indexed(replicates, |r| eval(&draws[r]))?;
    let mut out = [(0.0, 0.0); 4];
    for (j, o) in out.iter_mut().enumerate() {
        let v: Vec<f64> = reps.iter().map(|r| r[j]).collect();
        *o = (point[j], variance(&v).sqrt());
    }
    Ok(out)
}

/// k-NN entropy of the particle-system tuples against tuples of flow atoms;
/// the error bootstraps whole trials.
fn entropy_metric(
    trials: &[TrialData],
    ci: usize,
    q: &[f64],
    plan: &Plan,
    cfg: &StudyConfig,
    mut stream: crate::sde::NoiseStream,
) -> Result<(f64, f64)> {
    let e_dim = plan.ent_coords * plan.ent_group;
    let p: Vec<f64> = trials.iter().flat_map(|t| t.ent[ci].iter().copied()).collect();
    let terms = knn_log_ratio_terms(&p, q, e_dim, cfg.estimator.knn_k, KNN_JITTER)?;
    let per_trial = trials[0].ent[ci].len() / e_dim;
    let block_means: Vec<f64> = terms.terms.chunks_exact(per_trial).map(mean).collect();
    let point = mean(&terms.terms) + terms.offset;
    let reps: Vec<f64> = (0..cfg.estimator.replicates)
        .map(|_| {
            let idx = resample(&mut stream, block_means.len());
            idx.iter().map(|&i| block_means[i]).sum::<f64>() / idx.len() as f64
        })
        .collect();
    let se = variance(&reps).sqrt();
    Ok((plan.ent_scale * point, plan.ent_scale * se))
}

fn fit_rows(rows: &[Row], cfg: &StudyConfig) -> Vec<FitRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, t)| *m == r.metric && *t == r.t) {
            keys.push((r.metric.clone(), r.t));
        }
    }
    let mut fits = Vec::new();
    for (j, (metric, t)) in keys.into_iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.metric == metric && r.t == t)
            .map(|r| (r.n as f64, r.floored()))
            .collect();
        if pts.len() < 3 {
            continue;
        }
        match rate_fit(&pts, cfg.estimator.fit_bootstrap, cfg.master_seed.wrapping_add(j as u64)) {
            Ok(fit) => fits.push(FitRow { metric, t, fit }),
            Err(e) => log::info!("no rate fit for {metric} at t = {t}: {e}"),
        }
    }
    fits
}

/// Particle states of one coupled run per `N` (replication 0).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub system: &'static str,
    pub particle: usize,
    pub coordinate: usize,
    pub value: f64,
}

/// Single coupled run per `N`, recorded at the checkpoints: the first three
/// coordinates of every particle of each system.
pub fn simulate(cfg: &StudyConfig) -> Result<(Vec<SimulationRecord>, FlowSummary)> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let default = default_init(&model);
    match &model {
        RegisteredModel::Finite(m) => simulate_with(m, cfg, default),
        RegisteredModel::Spectral(m) => simulate_with(m, cfg, default),
    }
}

fn simulate_with<D: Dynamics>(model: &D, cfg: &StudyConfig, default: SampleLaw) -> Result<(Vec<SimulationRecord>, FlowSummary)> {
    let d = model.dim();
    let plan = plan(cfg, d, default)?;
    let driver = NoiseDriver::new(cfg.master_seed);
    let flow = solve_mkv_picard(model, &plan.init, &plan.grid, &driver.child(FLOW_TAG), &cfg.flow)
        .map_err(|e| e.with_context("limit flow"))?;
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        let run = run_coupled(model, &plan.init, &plan.init, &cfg.coupling, n, &plan.grid, &driver, 0, &flow)
            .map_err(|e| e.with_context(format!("N = {n}")))?;
        for &(t, k) in &plan.checkpoints {
            for (system, traj) in [("ips", &run.ips), ("xbar", &run.xbar), ("limit", &run.limit)] {
                for i in 0..n {
                    for (c, &value) in traj.particle(k, i).iter().take(3).enumerate() {
                        out.push(SimulationRecord {
                            n,
                            t,
                            system,
                            particle: i,
                            coordinate: c,
                            value,
                        });
                    }
                }
            }
        }
    }
    Ok((out, FlowSummary::from(&flow)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(model: &str) -> StudyConfig {
        StudyConfig::from_toml(&format!(
            r#"
model_id = "{model}"
N_list = [4, 8, 16]
t_checkpoints = [0.5]
trials = 30
master_seed = 3

[grid]
T = 0.5
h = 0.05

[estimator]
replicates = 20
bins = 20
fit_bootstrap = 20

[flow]
support = 200
"#
        ))
        .unwrap()
    }

    #[test]
    fn free_identical_study_has_zero_gaps() {
        let r = run_study(&config("no_interaction")).unwrap();
        for row in r.series("strong_gap", 0.5) {
            assert_eq!(row.estimate, 0.0);
            assert!(row.has_flag(FLAG_FLOORED));
        }
        for row in r.series("w1", 0.5) {
            assert_eq!(row.estimate, 0.0);
        }
        assert!(r.fit("strong_gap", 0.5).is_none());
        assert!(r.fit("ent", 0.5).is_some());
        assert_eq!(r.flow.iterations, 1);
    }

    #[test]
    fn rows_are_finite_and_complete() {
        let cfg = config("bounded_kernel");
        let r = run_study(&cfg).unwrap();
        // 2 initial-cost rows + 6 metrics per checkpoint, per N.
        assert_eq!(r.rows.len(), cfg.n_list.len() * (2 + 6));
        for row in &r.rows {
            assert!(row.estimate.is_finite() && row.stderr.is_finite(), "{row:?}");
            if row.metric != "init_cost_psi_eta" && row.metric != "init_cost_psi_phi" {
                assert!(row.stderr > 0.0, "{row:?}");
            }
        }
        assert_eq!(r, run_study(&cfg).unwrap());
    }

    #[test]
    fn proxy_flag_beyond_four_dimensions() {
        let mut cfg = config("bounded_kernel");
        cfg.k_marginal = 4;
        cfg.n_list = vec![8, 16, 32];
        let direct = plan(&cfg, 1, SampleLaw::standard_normal(1)).unwrap();
        assert_eq!((direct.ent_group, direct.ent_flag), (4, None));
        cfg.k_marginal = 5;
        let proxy = plan(&cfg, 1, SampleLaw::standard_normal(1)).unwrap();
        assert_eq!((proxy.ent_group, proxy.ent_scale, proxy.ent_flag), (1, 5.0, Some(FLAG_PROXY)));
    }

    #[test]
    fn off_grid_checkpoint_is_a_config_error() {
        let mut cfg = config("bounded_kernel");
        cfg.t_checkpoints = vec![0.123];
        assert_eq!(run_study(&cfg).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn tuples_drop_the_remainder() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(tuples(&s, 1, 1, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let s = [1.0, 10.0, 2.0, 20.0];
        assert_eq!(tuples(&s, 2, 1, 1), vec![1.0, 2.0]);
    }
}
