//! Brute-force checks of synthesized certificates and closed-loop runs.
//!
//! Nothing here calls the SDP solver: every check is an eigenvalue
//! evaluation or a direct simulation over sampled consistent systems.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controller::{stage_cost, ClosedLoopRun};
use crate::linalg::{max_eigenvalue, min_eigenvalue, quad_form, spd_inv_sqrt, symmetrize};
use crate::synthesis::{ConstraintSets, CostWeights};

pub const DECREASE_TOL: f64 = 1e-6;
pub const RPI_TOL: f64 = 1e-8;
pub const COST_TOL: f64 = 1e-6;
pub const LYAPUNOV_TOL: f64 = 1e-8;
pub const RPI_DEPTH: usize = 20;
pub const DIVERGENCE_NORM: f64 = 1e6;
pub const SETTLED_NORM: f64 = 1e-10;
pub const MAX_COST_HORIZON: usize = 1_000_000;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    /// Largest value of the checked quantity (its meaning depends on the check).
    pub worst: f64,
    /// Index of the sample attaining `worst`, when meaningful.
    pub worst_index: Option<usize>,
    pub detail: String,
}

impl CheckReport {
    fn from_values(name: &'static str, values: &[f64], limit: f64, detail: String) -> Self {
        let mut worst = f64::NEG_INFINITY;
        let mut worst_index = None;
        let mut violations = 0;
        for (i, v) in values.iter().enumerate() {
            if !(*v <= limit) {
                violations += 1;
            }
            if *v > worst || v.is_nan() {
                worst = *v;
                worst_index = Some(i);
            }
        }
        Self {
            name,
            passed: violations == 0,
            checked: values.len(),
            violations,
            worst: if values.is_empty() { 0.0 } else { worst },
            worst_index,
            detail,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: checked {}, violations {}, worst {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.violations,
            self.worst
        )?;
        if let Some(i) = self.worst_index {
            write!(f, " (index {i})")?;
        }
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

/// Largest eigenvalue of `(A+BF)ᵀP(A+BF) − P + FᵀRF + Q`.
pub fn decrease_margin(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    f: &DMatrix<f64>,
    p: &DMatrix<f64>,
    weights: &CostWeights,
) -> f64 {
    let acl = a + b * f;
    let m = acl.transpose() * p * &acl - p + f.transpose() * weights.r() * f + weights.q();
    max_eigenvalue(&symmetrize(&m))
}

/// Passes iff every sample has decrease margin `≤ 1e-6`.
pub fn check_decrease(
    f: &DMatrix<f64>,
    p: &DMatrix<f64>,
    weights: &CostWeights,
    samples: &[(DMatrix<f64>, DMatrix<f64>)],
) -> CheckReport {
    let values: Vec<f64> = samples
        .par_iter()
        .map(|(a, b)| decrease_margin(a, b, f, p, weights))
        .collect();
    CheckReport::from_values("decrease", &values, DECREASE_TOL, String::new())
}

/// `count` points on `{x : xᵀPx = γ}` as `√γ P^{-1/2} v`, `v` uniform on the sphere.
pub fn boundary_states<R: Rng + ?Sized>(p: &DMatrix<f64>, gamma: f64, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let n = p.nrows();
    let Some(root) = spd_inv_sqrt(p) else {
        return Vec::new();
    };
    (0..count)
        .map(|_| {
            let mut v: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            while v.norm() == 0.0 {
                v = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            }
            v /= v.norm();
            &root * v * gamma.max(0.0).sqrt()
        })
        .collect()
}

/// Iterates `x ← (A+BF)x` for `depth` steps from each trial state under each
/// sample and checks `xᵀPx ≤ γ(1 + 1e-8)` at every step.
///
/// `worst` is the largest `xᵀPx / γ` seen.
pub fn check_rpi(
    f: &DMatrix<f64>,
    p: &DMatrix<f64>,
    gamma: f64,
    samples: &[(DMatrix<f64>, DMatrix<f64>)],
    trial_states: &[DVector<f64>],
    depth: usize,
) -> CheckReport {
    let limit = gamma * (1.0 + RPI_TOL);
    let per_sample: Vec<(usize, f64)> = samples
        .par_iter()
        .map(|(a, b)| {
            let acl = a + b * f;
            let mut violations = 0;
            let mut worst = f64::NEG_INFINITY;
            for x0 in trial_states {
                let mut x = x0.clone();
                let mut bad = false;
                for _ in 0..depth {
                    x = &acl * x;
                    let v = quad_form(p, &x);
                    worst = worst.max(if gamma > 0.0 { v / gamma } else { v });
                    bad |= !(v <= limit);
                }
                violations += bad as usize;
            }
            (violations, worst)
        })
        .collect();
    let violations = per_sample.iter().map(|(v, _)| v).sum();
    let (worst_index, worst) =
        per_sample
            .iter()
            .enumerate()
            .map(|(i, (_, w))| (i, *w))
            .fold((None, f64::NEG_INFINITY), |acc, (i, w)| {
                if w > acc.1 || w.is_nan() {
                    (Some(i), w)
                } else {
                    acc
                }
            });
    CheckReport {
        name: "rpi",
        passed: violations == 0,
        checked: samples.len() * trial_states.len(),
        violations,
        worst: if worst_index.is_some() && !trial_states.is_empty() {
            worst
        } else {
            0.0
        },
        worst_index: worst_index.filter(|_| !trial_states.is_empty()),
        detail: format!(
            "depth {depth}, {} samples x {} states",
            samples.len(),
            trial_states.len()
        ),
    }
}

/// Infinite-horizon cost of `x ← (A+BF)x` from `x0`, simulated until the
/// state settles below `1e-10`. `None` on divergence or non-settling.
pub fn simulated_cost(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    f: &DMatrix<f64>,
    x0: &DVector<f64>,
    weights: &CostWeights,
    max_horizon: usize,
) -> Option<f64> {
    let acl = a + b * f;
    let mut x = x0.clone();
    let mut total = 0.0;
    for _ in 0..max_horizon {
        let norm = x.norm();
        if norm < SETTLED_NORM {
            return Some(total);
        }
        if !(norm <= DIVERGENCE_NORM) {
            return None;
        }
        total += stage_cost(&(f * &x), &x, weights);
        x = &acl * x;
    }
    None
}

/// Passes iff every sampled closed loop from `x_t` accumulates at most `γ(1 + 1e-6)`.
///
/// `worst` is the largest accumulated cost (infinite for diverging samples).
pub fn check_cost_bound(
    f: &DMatrix<f64>,
    gamma: f64,
    x_t: &DVector<f64>,
    samples: &[(DMatrix<f64>, DMatrix<f64>)],
    weights: &CostWeights,
    max_horizon: usize,
) -> CheckReport {
    let costs: Vec<f64> = samples
        .par_iter()
        .map(|(a, b)| simulated_cost(a, b, f, x_t, weights, max_horizon).unwrap_or(f64::INFINITY))
        .collect();
    let diverged = costs.iter().filter(|c| c.is_infinite()).count();
    let detail = format!("gamma {gamma:.6e}, diverged or unsettled {diverged}");
    CheckReport::from_values("cost-bound", &costs, gamma * (1.0 + COST_TOL), detail)
}

/// `x_tᵀPx_t ≤ γ(1 + 1e-8)`: the queried state lies in the certified ellipsoid.
pub fn check_initial(p: &DMatrix<f64>, gamma: f64, x_t: &DVector<f64>) -> CheckReport {
    let v = quad_form(p, x_t);
    let ratio = if gamma > 0.0 { v / gamma } else { v };
    CheckReport::from_values("initial", &[ratio], 1.0 + RPI_TOL, "x_t'P x_t / gamma".into())
}

/// `max { xᵀWx : xᵀPx ≤ γ } = γ λ_max(P^{-1/2} W P^{-1/2})`.
pub fn ellipsoid_peak(p: &DMatrix<f64>, gamma: f64, w: &DMatrix<f64>) -> f64 {
    match spd_inv_sqrt(p) {
        Some(r) => gamma * max_eigenvalue(&symmetrize(&(&r * w * &r))),
        None => f64::INFINITY,
    }
}

/// Input and state constraints over the whole certified ellipsoid:
/// `‖Fx‖²_{S_u} ≤ 1` and `‖x‖²_{S_x} ≤ 1` for every `xᵀPx ≤ γ`.
pub fn check_constraint_bounds(
    f: &DMatrix<f64>,
    p: &DMatrix<f64>,
    gamma: f64,
    cons: &ConstraintSets,
) -> [CheckReport; 2] {
    let input = ellipsoid_peak(p, gamma, &(f.transpose() * cons.s_u() * f));
    let state = ellipsoid_peak(p, gamma, cons.s_x());
    [
        CheckReport::from_values(
            "input-bound",
            &[input],
            1.0 + RPI_TOL,
            "peak |Fx|^2_Su on the ellipsoid".into(),
        ),
        CheckReport::from_values(
            "state-bound",
            &[state],
            1.0 + RPI_TOL,
            "peak |x|^2_Sx on the ellipsoid".into(),
        ),
    ]
}

/// Per-clause result of [`check_closed_loop_guarantees`].
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub feasibility: CheckReport,
    pub constraints: CheckReport,
    /// `x_{t+1}ᵀP_{t+1}x_{t+1} ≤ x_{t+1}ᵀP_t x_{t+1} + 1e-8`.
    pub candidate: CheckReport,
    /// `x_{t+1}ᵀP_{t+1}x_{t+1} − x_tᵀP_tx_t ≤ −λ_min(Q)‖x_t‖² + 1e-8`.
    pub lyapunov: CheckReport,
}

impl GuaranteeReport {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn checks(&self) -> [&CheckReport; 4] {
        [&self.feasibility, &self.constraints, &self.candidate, &self.lyapunov]
    }
}

impl fmt::Display for GuaranteeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.checks() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn lyapunov_value(p: Option<&DMatrix<f64>>, x: &DVector<f64>) -> f64 {
    p.map_or(0.0, |p| quad_form(p, x))
}

/// Checks the closed-loop claims on a logged noise-free run.
///
/// Steps that short-circuited at the origin have `V = 0`. The final state
/// has no logged `P`, so the last transition uses only the candidate side.
pub fn check_closed_loop_guarantees(run: &ClosedLoopRun, weights: &CostWeights) -> GuaranteeReport {
    let feasible: Vec<f64> = run
        .records
        .iter()
        .map(|r| if r.feasible() { 0.0 } else { 1.0 })
        .collect();
    let feasibility = CheckReport::from_values("feasibility", &feasible, 0.0, String::new());

    let norms: Vec<f64> = run.records.iter().map(|r| r.input_norm.max(r.state_norm)).collect();
    let constraints = CheckReport::from_values("constraints", &norms, 1.0 + 1e-8, "max of |u|_Su, |x|_Sx".into());

    let lam_q = min_eigenvalue(weights.q());
    let mut candidate = Vec::new();
    let mut decrease = Vec::new();
    for t in 0..run.lyapunov.len().saturating_sub(1) {
        let x_t = &run.states[t];
        let x_next = &run.states[t + 1];
        let p_t = run.lyapunov[t].as_ref();
        let p_next = run.lyapunov[t + 1].as_ref();
        let v_next = lyapunov_value(p_next, x_next);
        if p_t.is_some() {
            candidate.push(v_next - lyapunov_value(p_t, x_next));
        }
        decrease.push(v_next - lyapunov_value(p_t, x_t) + lam_q * x_t.norm_squared());
    }
    GuaranteeReport {
        feasibility,
        constraints,
        candidate: CheckReport::from_values("candidate-suboptimality", &candidate, LYAPUNOV_TOL, String::new()),
        lyapunov: CheckReport::from_values("lyapunov-decrease", &decrease, LYAPUNOV_TOL, format!("c = {lam_q:.3e}")),
    }
}

/// Collection of check results with a plain-text and a key-value rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<CheckReport>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn push(&mut self, c: CheckReport) {
        self.checks.push(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `key = value` lines, one group per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "passed = {}", self.passed());
        for c in &self.checks {
            let _ = writeln!(s, "{}.passed = {}", c.name, c.passed);
            let _ = writeln!(s, "{}.checked = {}", c.name, c.checked);
            let _ = writeln!(s, "{}.violations = {}", c.name, c.violations);
            let _ = writeln!(s, "{}.worst = {:.16e}", c.name, c.worst);
        }
        s
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        writeln!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_weights(n: usize, m: usize) -> CostWeights {
        CostWeights::new(DMatrix::identity(n, n), DMatrix::identity(m, m)).unwrap()
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn riccati(a: f64, b: f64) -> (f64, f64) {
        let mut p = 1.0;
        for _ in 0..10_000 {
            p = 1.0 + a * a * p - (a * b * p).powi(2) / (1.0 + b * b * p);
        }
        (p, -a * b * p / (1.0 + b * b * p))
    }

    #[test]
    fn open_loop_unstable_fails_decrease() {
        let samples = vec![(scalar(1.2), scalar(1.0))];
        let r = check_decrease(&scalar(0.0), &scalar(1.0), &unit_weights(1, 1), &samples);
        assert!(!r.passed);
        // 1.44 - 1 + 0 + 1
        assert!((r.worst - 1.44).abs() < 1e-12);
        assert_eq!(r.worst_index, Some(0));
    }

    #[test]
    fn lqr_certificate_passes_decrease_with_equality() {
        let (p, f) = riccati(0.5, 1.0);
        let r = check_decrease(
            &scalar(f),
            &scalar(p),
            &unit_weights(1, 1),
            &[(scalar(0.5), scalar(1.0))],
        );
        assert!(r.passed);
        assert!(r.worst.abs() < 1e-10);
        let r = check_decrease(
            &scalar(f),
            &scalar(0.5 * p),
            &unit_weights(1, 1),
            &[(scalar(0.5), scalar(1.0))],
        );
        assert!(!r.passed);
    }

    #[test]
    fn boundary_states_lie_on_ellipsoid() {
        let p = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in boundary_states(&p, 0.7, 50, &mut rng) {
            assert!((quad_form(&p, &x) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rpi_zero_state_and_contraction() {
        let samples = vec![(scalar(0.5), scalar(1.0))];
        let r = check_rpi(&scalar(0.0), &scalar(1.0), 1.0, &samples, &[DVector::zeros(1)], 20);
        assert!(r.passed);
        let r = check_rpi(
            &scalar(0.0),
            &scalar(1.0),
            1.0,
            &samples,
            &[DVector::from_element(1, 0.9)],
            20,
        );
        assert!(r.passed);
        let r = check_rpi(
            &scalar(0.0),
            &scalar(1.0),
            1.0,
            &[(scalar(1.1), scalar(1.0))],
            &[DVector::from_element(1, 1.0)],
            20,
        );
        assert!(!r.passed);
        assert_eq!(r.violations, 1);
    }

    #[test]
    fn cost_bound_matches_riccati() {
        let (p, f) = riccati(0.5, 1.0);
        let x = DVector::from_element(1, 1.0);
        let w = unit_weights(1, 1);
        let c = simulated_cost(&scalar(0.5), &scalar(1.0), &scalar(f), &x, &w, 10_000).unwrap();
        assert!((c - p).abs() <= 1e-9 * p);
        assert!(check_cost_bound(&scalar(f), p * 1.01, &x, &[(scalar(0.5), scalar(1.0))], &w, 10_000).passed);
        assert!(!check_cost_bound(&scalar(f), p * 0.9, &x, &[(scalar(0.5), scalar(1.0))], &w, 10_000).passed);
    }

    #[test]
    fn cost_bound_zero_state_and_divergence() {
        let w = unit_weights(1, 1);
        let r = check_cost_bound(
            &scalar(0.0),
            0.0,
            &DVector::zeros(1),
            &[(scalar(2.0), scalar(1.0))],
            &w,
            100,
        );
        assert!(r.passed);
        assert_eq!(r.worst, 0.0);
        let r = check_cost_bound(
            &scalar(0.0),
            1e3,
            &DVector::from_element(1, 1.0),
            &[(scalar(2.0), scalar(1.0))],
            &w,
            100,
        );
        assert!(!r.passed);
        assert!(r.worst.is_infinite());
    }

    #[test]
    fn ellipsoid_peak_diagonal() {
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        // Semi-axes √(γ/4), √γ with γ = 2: peak max(2/4, 0.5·2) = 1.
        assert!((ellipsoid_peak(&p, 2.0, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_bounds_detect_large_ellipsoid() {
        let cons = ConstraintSets::new(scalar(1.0), scalar(1.0)).unwrap();
        let [u, x] = check_constraint_bounds(&scalar(0.5), &scalar(1.0), 1.0, &cons);
        assert!(u.passed && x.passed);
        let [u, x] = check_constraint_bounds(&scalar(0.4), &scalar(1.0), 4.1, &cons);
        assert!(u.passed);
        assert!(!x.passed);
    }

    #[test]
    fn summary_is_key_value() {
        let mut rep = VerificationReport::default();
        rep.push(CheckReport::from_values("x", &[0.0, 2.0], 1.0, String::new()));
        let s = rep.summary();
        assert!(s.contains("passed = false"));
        assert!(s.contains("x.violations = 1"));
    }
}
