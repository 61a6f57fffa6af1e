//! Exact discrete optimal transport and the distances built on it.

use super::assignment::solve_assignment;
use super::cost::CostFunction;
use super::empirical::EmpiricalMeasure;
use super::flow::solve_transportation;
use crate::error::{invalid, Error, Result};
use crate::sde::ModulusFunction;

/// Size limits of the exact solvers.
#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    /// Largest side handled by the general-marginal transport LP.
    pub lp_cap: usize,
    /// Largest equal-size uniform problem handled by the assignment solver.
    pub assignment_cap: usize,
    /// Whether to materialize the coupling.
    pub want_plan: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            lp_cap: 64,
            assignment_cap: 2500,
            want_plan: false,
        }
    }
}

/// Optimal coupling between `μ` (rows) and `ν` (columns).
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major; empty unless requested.
    pub plan: Vec<f64>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }
}

fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, c: &CostFunction) -> Vec<f64> {
    let (n, m) = (mu.len(), nu.len());
    let mut out = vec![0.0; n * m];
    crate::exec::for_each_chunk_mut(&mut out, m, |i, row| {
        let x = mu.point(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = c.eval(x, nu.point(j));
        }
    });
    out
}

fn sorted_order(m: &EmpiricalMeasure) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
    idx
}

/// Monotone (quantile) coupling on the line; optimal for costs convex in
/// `x - y`. Handles arbitrary weights by walking the two sorted CDFs.
fn monotone_coupling(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    c: &CostFunction,
    want_plan: bool,
) -> TransportPlan {
    let (n, m) = (mu.len(), nu.len());
    let a = sorted_order(mu);
    let b = sorted_order(nu);
    let mut plan = if want_plan { vec![0.0; n * m] } else { Vec::new() };
    let mut cost = 0.0;
    if mu.is_uniform() && nu.is_uniform() && n == m {
        for (&i, &j) in a.iter().zip(&b) {
            cost += c.eval(mu.point(i), nu.point(j));
            if want_plan {
                plan[i * m + j] = 1.0 / n as f64;
            }
        }
        cost /= n as f64;
    } else {
        let (mut p, mut q) = (0usize, 0usize);
        let mut wa = mu.weights()[a[0]];
        let mut wb = nu.weights()[b[0]];
        loop {
            let w = wa.min(wb);
            if w > 0.0 {
                cost += w * c.eval(mu.point(a[p]), nu.point(b[q]));
                if want_plan {
                    plan[a[p] * m + b[q]] += w;
                }
            }
            wa -= w;
            wb -= w;
            let adv_a = wa <= 1e-15 && p + 1 < n;
            let adv_b = wb <= 1e-15 && q + 1 < m;
            if !adv_a && !adv_b {
                break;
            }
            if adv_a {
                p += 1;
                wa = mu.weights()[a[p]];
            }
            if adv_b {
                q += 1;
                wb = nu.weights()[b[q]];
            }
        }
    }
    TransportPlan {
        rows: n,
        cols: m,
        plan,
        cost,
    }
}

/// Solves the discrete transport problem exactly.
///
/// Solver choice: sorted coupling in one dimension for convex costs;
/// Hungarian assignment for equal-size uniform measures; otherwise the
/// transportation LP, limited to `lp_cap` atoms per side.
pub fn solve_transport(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    c: &CostFunction,
    opts: &TransportOptions,
) -> Result<TransportPlan> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (n, m) = (mu.len(), nu.len());
    if mu.dim() == 1 && c.is_convex_1d() {
        return Ok(monotone_coupling(mu, nu, c, opts.want_plan));
    }
    if mu.is_uniform() && nu.is_uniform() && n == m {
        if n > opts.assignment_cap {
            return Err(Error::SolverCap {
                atoms: n,
                cap: opts.assignment_cap,
            });
        }
        let cm = cost_matrix(mu, nu, c);
        let (perm, total) = solve_assignment(&cm, n);
        let mut plan = Vec::new();
        if opts.want_plan {
            plan = vec![0.0; n * n];
            for (i, &j) in perm.iter().enumerate() {
                plan[i * n + j] = 1.0 / n as f64;
            }
        }
        return Ok(TransportPlan {
            rows: n,
            cols: n,
            plan,
            cost: total / n as f64,
        });
    }
    if n.max(m) > opts.lp_cap {
        return Err(Error::SolverCap {
            atoms: n.max(m),
            cap: opts.lp_cap,
        });
    }
    let cm = cost_matrix(mu, nu, c);
    let plan = solve_transportation(&cm, mu.weights(), nu.weights())?;
    let cost = plan.iter().zip(&cm).map(|(p, c)| p * c).sum();
    Ok(TransportPlan {
        rows: n,
        cols: m,
        plan: if opts.want_plan { plan } else { Vec::new() },
        cost,
    })
}

/// `W₁^Ψ(μ, ν) = inf_π ∫ Ψ dπ` (no outer root).
pub fn transport_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, c: &CostFunction) -> Result<f64> {
    Ok(solve_transport(mu, nu, c, &TransportOptions::default())?.cost)
}

/// `W_p(μ, ν) = (inf_π ∫ |x - y|^p dπ)^{1/max(p, 1)}`.
pub fn wasserstein_p(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid(format!("Wasserstein order must be positive, got {p}")));
    }
    let c = transport_cost(mu, nu, &CostFunction::EuclideanPower(p))?;
    Ok(c.max(0.0).powf(1.0 / p.max(1.0)))
}

/// `W_φ(μ, ν)`, the dual norm over functions with `[f]_φ ≤ 1`, computed on the
/// primal side: `φ(|x - y|)` is a metric for concave increasing `φ` with
/// `φ(0) = 0`, so Kantorovich–Rubinstein duality turns the supremum into the
/// transport infimum.
pub fn w_phi(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, phi: &ModulusFunction) -> Result<f64> {
    transport_cost(mu, nu, &CostFunction::PhiDistance(phi.clone()))
}

/// `Σ_i W₁^{Ψⁱ}(μⁱ, νⁱ)`.
pub fn product_transport(
    mu_list: &[EmpiricalMeasure],
    nu_list: &[EmpiricalMeasure],
    costs: &[CostFunction],
) -> Result<f64> {
    check_lists(mu_list, nu_list, costs)?;
    mu_list
        .iter()
        .zip(nu_list)
        .zip(costs)
        .map(|((m, n), c)| transport_cost(m, n, c))
        .sum()
}

/// Transport cost between the product measures `⊗μⁱ` and `⊗νⁱ` under the
/// additive cost `Σ Ψⁱ(xⁱ, yⁱ)`, solved directly on the joint atoms.
pub fn joint_product_transport(
    mu_list: &[EmpiricalMeasure],
    nu_list: &[EmpiricalMeasure],
    costs: &[CostFunction],
) -> Result<f64> {
    check_lists(mu_list, nu_list, costs)?;
    let dims: Vec<usize> = mu_list.iter().map(|m| m.dim()).collect();
    let mut mu = mu_list[0].clone();
    let mut nu = nu_list[0].clone();
    for (m, n) in mu_list.iter().zip(nu_list).skip(1) {
        mu = mu.product(m)?;
        nu = nu.product(n)?;
    }
    let costs = costs.to_vec();
    let joint = CostFunction::custom(move |x, y| {
        let mut off = 0;
        let mut total = 0.0;
        for (c, &d) in costs.iter().zip(&dims) {
            total += c.eval(&x[off..off + d], &y[off..off + d]);
            off += d;
        }
        total
    });
    transport_cost(&mu, &nu, &joint)
}

fn check_lists(mu: &[EmpiricalMeasure], nu: &[EmpiricalMeasure], c: &[CostFunction]) -> Result<()> {
    if mu.is_empty() || mu.len() != nu.len() || mu.len() != c.len() {
        return Err(invalid(format!(
            "product transport needs equal non-empty lists, got {}, {}, {}",
            mu.len(),
            nu.len(),
            c.len()
        )));
    }
    for (m, n) in mu.iter().zip(nu) {
        if m.dim() != n.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                found: n.dim(),
            });
        }
    }
    Ok(())
}

/// Exact `W_p` between two equal-size uniform clouds on the line by sorting;
/// convenience for large samples.
pub fn wasserstein_1d_sorted(a: &[f64], b: &[f64], p: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let terms: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(p)).collect();
    let c = crate::stats::mean(&terms);
    c.powf(1.0 / p.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{make_modulus, ModulusKind};

    fn u(points: &[f64], dim: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(points.to_vec(), dim).unwrap()
    }

    #[test]
    fn identity_and_two_point_examples() {
        let d = u(&[0.7], 1);
        for p in [0.5, 1.0, 2.0, 3.0] {
            assert_eq!(wasserstein_p(&d, &d, p).unwrap(), 0.0);
        }
        // Only two couplings: {0→1, 1→2} cost 1 and {0→2, 1→1} cost 1.
        assert!((wasserstein_p(&u(&[0.0, 1.0], 1), &u(&[1.0, 2.0], 1), 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_eta_forced_coupling() {
        let c = transport_cost(&u(&[0.0], 1), &u(&[1.0], 1), &CostFunction::PsiEta(0.5)).unwrap();
        assert_eq!(c, 2.0);
    }

    #[test]
    fn w_phi_examples() {
        let sqrt = make_modulus(ModulusKind::Power(0.5)).unwrap();
        assert_eq!(w_phi(&u(&[0.0], 1), &u(&[4.0], 1), &sqrt).unwrap(), 2.0);
        let a = u(&[0.0, 0.0, 1.0, 2.0, 3.0, 1.0], 2);
        let b = u(&[1.0, 1.0, 0.0, 3.0, 2.0, 2.0], 2);
        let w1 = wasserstein_p(&a, &b, 1.0).unwrap();
        let wid = w_phi(&a, &b, &ModulusFunction::identity()).unwrap();
        assert!((w1 - wid).abs() < 1e-12);
    }

    #[test]
    fn product_examples() {
        let c = [CostFunction::EuclideanPower(1.0), CostFunction::EuclideanPower(1.0)];
        let mus = [u(&[0.0], 1), u(&[0.0], 1)];
        let nus = [u(&[1.0], 1), u(&[1.0], 1)];
        assert_eq!(product_transport(&mus, &nus, &c).unwrap(), 2.0);
        assert_eq!(joint_product_transport(&mus, &nus, &c).unwrap(), 2.0);
        assert!(product_transport(&mus[..1], &nus, &c).is_err());
    }

    #[test]
    fn dimension_mismatch_and_cap() {
        let err = transport_cost(&u(&[0.0], 1), &u(&[0.0, 1.0], 2), &CostFunction::EuclideanPower(1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let pts: Vec<f64> = (0..130).map(f64::from).collect();
        let w: Vec<f64> = (0..65).map(|i| if i == 0 { 1.0 - 64.0 / 65.0 / 2.0 } else { 1.0 / 65.0 / 2.0 }).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let a = EmpiricalMeasure::weighted(pts, 2, w).unwrap();
        let b = u(&[0.0, 0.0], 2);
        let err = transport_cost(&a, &b, &CostFunction::EuclideanPower(0.5)).unwrap_err();
        assert!(matches!(err, Error::SolverCap { .. }));
    }

    #[test]
    fn weighted_one_dimensional_matches_lp() {
        let a = EmpiricalMeasure::weighted(vec![0.0, 1.0, 3.0], 1, vec![0.2, 0.5, 0.3]).unwrap();
        let b = EmpiricalMeasure::weighted(vec![0.5, 2.5], 1, vec![0.6, 0.4]).unwrap();
        let mono = transport_cost(&a, &b, &CostFunction::EuclideanPower(2.0)).unwrap();
        let lp = transport_cost(&a, &b, &CostFunction::custom(|x, y| (x[0] - y[0]).powi(2))).unwrap();
        assert!((mono - lp).abs() < 1e-12, "{mono} vs {lp}");
    }

    #[test]
    fn sorted_pairing_matches_assignment() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 41) as f64 * 0.13).collect();
        let ys: Vec<f64> = (0..40).map(|i| ((i * 11) % 43) as f64 * 0.09 - 0.5).collect();
        let (a, b) = (u(&xs, 1), u(&ys, 1));
        for p in [1.0, 1.5, 2.0] {
            let sorted = transport_cost(&a, &b, &CostFunction::EuclideanPower(p)).unwrap();
            let hungarian = transport_cost(&a, &b, &CostFunction::custom(move |x, y| (x[0] - y[0]).abs().powf(p))).unwrap();
            assert!((sorted - hungarian).abs() < 1e-9);
        }
    }
}
