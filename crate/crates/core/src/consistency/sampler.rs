//! Sampling system matrices from the consistency set.
//!
//! The set is an intersection of convex quadratic constraints in the
//! parameter `Θ = [A B]`, so a strictly interior analytic center can be
//! found by Newton's method, and exact chords through it are available in
//! closed form. The default sampler is hit-and-run along those chords,
//! which reaches the boundary of the set. A Gaussian rejection sampler is
//! kept for comparison.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{contains, RESIDUAL_SLACK};
use crate::linalg::{spd_inv_sqrt, symmetrize};
use crate::lti::DataSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    HitAndRun,
    Rejection,
}

impl std::str::FromStr for SamplerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "hit-and-run" => Ok(Self::HitAndRun),
            "rejection" => Ok(Self::Rejection),
            other => Err(crate::Error::Invalid(format!("unknown sampler '{other}'"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HitAndRun => "hit-and-run",
            Self::Rejection => "rejection",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SamplerOptions {
    pub count: usize,
    pub kind: SamplerKind,
    /// Hit-and-run moves discarded before the first sample.
    pub burn_in: usize,
    /// Hit-and-run moves between retained samples.
    pub thinning: usize,
    /// Proposal budget of the rejection sampler, per requested sample.
    pub proposals_per_sample: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            count: 1000,
            kind: SamplerKind::HitAndRun,
            burn_in: 100,
            thinning: 5,
            proposals_per_sample: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsistentSamples {
    pub pairs: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    pub proposals: usize,
    /// The set has no interior (e.g. exact data), only the center is returned.
    pub singleton: bool,
    /// Fewer pairs than requested, or the acceptance rate collapsed.
    pub undersampled: bool,
}

impl ConsistentSamples {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.pairs.len() as f64 / self.proposals as f64
        }
    }
}

/// Regressor and target matrices: `Z = [X_-; U_-]`, `X_+`.
fn regressors(data: &DataSet) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.n();
    let m = data.m();
    let t = data.len();
    let mut z = DMatrix::zeros(n + m, t);
    z.view_mut((0, 0), (n, t)).copy_from(&data.states().columns(0, t));
    z.view_mut((n, 0), (m, t)).copy_from(data.inputs());
    let xp = data.states().columns(1, t).into_owned();
    (z, xp)
}

fn split(theta: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = theta.columns(0, n).into_owned();
    let b = theta.columns(n, theta.ncols() - n).into_owned();
    (a, b)
}

fn weighted_ls(z: &DMatrix<f64>, xp: &DMatrix<f64>, w: Option<&DVector<f64>>) -> Option<DMatrix<f64>> {
    let zw = match w {
        Some(w) => z * DMatrix::from_diagonal(w),
        None => z.clone(),
    };
    let gram = symmetrize(&(&zw * z.transpose()));
    let rhs = xp * zw.transpose();
    let tol = 1e-14 * gram.norm().max(1e-300);
    let pinv = gram.pseudo_inverse(tol).ok()?;
    Some(rhs * pinv)
}

/// Least-squares estimate `[A B] = X_+ Zᵀ (Z Zᵀ)^†`.
pub fn least_squares(data: &DataSet) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let (z, xp) = regressors(data);
    weighted_ls(&z, &xp, None).map(|t| split(&t, data.n()))
}

fn residual_sq(z: &DMatrix<f64>, xp: &DMatrix<f64>, theta: &DMatrix<f64>) -> DVector<f64> {
    let r = xp - theta * z;
    DVector::from_iterator(r.ncols(), r.column_iter().map(|c| c.norm_squared()))
}

/// Barrier value, gradient and Hessian of `Σ log(ε - ‖r_i‖²)` in `vec(Θ)`.
fn barrier(
    z: &DMatrix<f64>,
    xp: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    eps: f64,
) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    let n = theta.nrows();
    let p = theta.len();
    let r = xp - theta * z;
    let mut val = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    let eye = DMatrix::<f64>::identity(n, n);
    for i in 0..z.ncols() {
        let ri = r.column(i);
        let s = eps - ri.norm_squared();
        if s <= 0.0 {
            return None;
        }
        val += s.ln();
        let zi = z.column(i);
        // ∇‖r‖² = -2 vec(r zᵀ); ∇²‖r‖² = 2 (z zᵀ ⊗ I)
        let g = (ri * zi.transpose()) * 2.0;
        let gv = DVector::from_column_slice(g.as_slice());
        grad += &gv / s;
        let zz = zi * zi.transpose();
        hess -= zz.kronecker(&eye) * (2.0 / s);
        hess -= &gv * gv.transpose() / (s * s);
    }
    Some((val, grad, hess))
}

/// Strictly interior analytic center of the consistency set, or `None` when
/// no strictly interior point was found.
pub fn analytic_center(data: &DataSet) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let (z, xp) = regressors(data);
    find_center(&z, &xp, data.eps()).map(|(t, _)| split(&t, data.n()))
}

/// Returns the center and the negated barrier Hessian there.
fn find_center(z: &DMatrix<f64>, xp: &DMatrix<f64>, eps: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if eps <= 0.0 {
        return None;
    }
    let t = z.ncols();
    let mut theta = weighted_ls(z, xp, None)?;
    let target = eps * (1.0 - 1e-3);

    // Lawson-type reweighting toward the min-max residual solution.
    if residual_sq(z, xp, &theta).max() >= target {
        let mut w = DVector::from_element(t, 1.0 / t as f64);
        for _ in 0..5000 {
            let rs = residual_sq(z, xp, &theta);
            if rs.max() < target {
                break;
            }
            let norms = rs.map(f64::sqrt);
            w = w.component_mul(&norms);
            let s = w.sum();
            if s <= 0.0 {
                return None;
            }
            w /= s;
            theta = weighted_ls(z, xp, Some(&w))?;
        }
        if residual_sq(z, xp, &theta).max() >= eps {
            return None;
        }
    }

    // Damped Newton on the log barrier.
    let (mut val, mut grad, mut hess) = barrier(z, xp, &theta, eps)?;
    for _ in 0..100 {
        let neg = -&hess;
        let chol = nalgebra::Cholesky::new(symmetrize(&neg))?;
        let step = chol.solve(&grad);
        let decrement = grad.dot(&step);
        if decrement < 1e-18 {
            break;
        }
        let step_m = DMatrix::from_column_slice(theta.nrows(), theta.ncols(), step.as_slice());
        let mut alpha = 1.0;
        loop {
            let cand = &theta + &step_m * alpha;
            if let Some((v, g, h)) = barrier(z, xp, &cand, eps) {
                if v >= val + 0.25 * alpha * decrement {
                    theta = cand;
                    val = v;
                    grad = g;
                    hess = h;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break;
            }
        }
        if alpha < 1e-12 {
            break;
        }
    }
    Some((theta, -hess))
}

/// Interval of `t` with `θ + t d` consistent, intersected over samples.
fn chord(z: &DMatrix<f64>, xp: &DMatrix<f64>, theta: &DMatrix<f64>, dir: &DMatrix<f64>, eps: f64) -> (f64, f64) {
    let r = xp - theta * z;
    let v = dir * z;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..z.ncols() {
        let ri = r.column(i);
        let vi = v.column(i);
        let a = vi.norm_squared();
        if a == 0.0 {
            continue;
        }
        let b = ri.dot(&vi);
        let c = ri.norm_squared() - eps;
        let disc = (b * b - a * c).max(0.0).sqrt();
        lo = lo.max((b - disc) / a);
        hi = hi.min((b + disc) / a);
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Samples with default options.
pub fn sample_consistent<R: Rng + ?Sized>(data: &DataSet, count: usize, rng: &mut R) -> ConsistentSamples {
    sample_consistent_with(
        data,
        &SamplerOptions {
            count,
            ..SamplerOptions::default()
        },
        rng,
    )
}

/// Returns up to `opts.count` pairs `(A, B)`, each passing [`contains`]. The
/// least-squares estimate comes first when it is consistent.
pub fn sample_consistent_with<R: Rng + ?Sized>(
    data: &DataSet,
    opts: &SamplerOptions,
    rng: &mut R,
) -> ConsistentSamples {
    let n = data.n();
    let (z, xp) = regressors(data);
    let eps = data.eps();
    let mut pairs = Vec::with_capacity(opts.count);

    let is_member = |theta: &DMatrix<f64>| {
        let (a, b) = split(theta, n);
        contains(data, &a, &b).unwrap_or(false)
    };

    let ls = weighted_ls(&z, &xp, None);
    if let Some(t) = &ls {
        if is_member(t) && opts.count > 0 {
            pairs.push(split(t, n));
        }
    }

    let Some((center, hess)) = find_center(&z, &xp, eps) else {
        // No interior: either exact data (singleton) or nothing found.
        let singleton = !pairs.is_empty();
        return ConsistentSamples {
            undersampled: pairs.len() < opts.count,
            pairs,
            proposals: 1,
            singleton,
        };
    };
    let p = center.len();
    let shape = (center.nrows(), center.ncols());
    // Directions are whitened by the barrier Hessian at the center.
    let whiten = spd_inv_sqrt(&hess).unwrap_or_else(|| DMatrix::identity(p, p));
    let draw_dir = |rng: &mut R| {
        let g = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let d = &whiten * g;
        DMatrix::from_column_slice(shape.0, shape.1, d.as_slice())
    };

    let mut proposals = pairs.len();
    let mut undersampled = false;
    match opts.kind {
        SamplerKind::HitAndRun => {
            let mut theta = center;
            let mut moves = 0usize;
            let max_moves = opts.burn_in + opts.thinning.max(1) * opts.count * 4;
            while pairs.len() < opts.count && moves < max_moves {
                let dir = draw_dir(rng);
                let (lo, hi) = chord(&z, &xp, &theta, &dir, eps);
                if !(lo.is_finite() && hi.is_finite()) {
                    // Unbounded direction: the data do not pin down every parameter.
                    undersampled = true;
                    break;
                }
                let t = lo + (hi - lo) * rng.random::<f64>();
                let cand = &theta + &dir * t;
                moves += 1;
                if residual_sq(&z, &xp, &cand).max() < eps {
                    theta = cand;
                }
                if moves > opts.burn_in && (moves - opts.burn_in).is_multiple_of(opts.thinning.max(1)) {
                    proposals += 1;
                    if is_member(&theta) {
                        pairs.push(split(&theta, n));
                    }
                }
            }
        }
        SamplerKind::Rejection => {
            let budget = opts.proposals_per_sample * opts.count;
            let base = match &ls {
                Some(t) if is_member(t) => t.clone(),
                _ => center,
            };
            let mut scale = 1.0;
            let mut window = (0usize, 0usize);
            while pairs.len() < opts.count && proposals < budget {
                let cand = &base + draw_dir(rng) * scale;
                proposals += 1;
                window.0 += 1;
                if is_member(&cand) {
                    pairs.push(split(&cand, n));
                    window.1 += 1;
                }
                if window.0 == 100 {
                    let rate = window.1 as f64 / 100.0;
                    if rate > 0.5 {
                        scale *= 1.5;
                    } else if rate < 0.1 {
                        scale /= 1.5;
                    }
                    window = (0, 0);
                }
            }
            if (pairs.len() as f64) < 1e-4 * proposals as f64 {
                undersampled = true;
            }
        }
    }
    debug_assert!(pairs
        .iter()
        .all(|(a, b)| { (0..data.len()).all(|i| data.residual(i, a, b).norm_squared() <= eps + RESIDUAL_SLACK) }));
    ConsistentSamples {
        undersampled: undersampled || pairs.len() < opts.count,
        pairs,
        proposals,
        singleton: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstr;
    use crate::lti::{generate_dataset, uniform_inputs, NoiseModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cstr_data(seed: u64, eps: f64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = uniform_inputs(1, 200, -10.0, 10.0, &mut rng);
        let noise = if eps > 0.0 {
            NoiseModel::uniform(eps).unwrap()
        } else {
            NoiseModel::zero()
        };
        generate_dataset(&cstr::system(), &DVector::zeros(2), &u, &noise, &mut rng).unwrap()
    }

    #[test]
    fn exact_data_gives_single_least_squares_pair() {
        let data = cstr_data(1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_consistent(&data, 50, &mut rng);
        assert!(s.singleton);
        assert_eq!(s.pairs.len(), 1);
        let (a, b) = &s.pairs[0];
        assert!((a - cstr::a()).norm() < 1e-9);
        assert!((b - cstr::b()).norm() < 1e-9);
    }

    #[test]
    fn analytic_center_is_strictly_interior() {
        let data = cstr_data(3, 1e-6);
        let (a, b) = analytic_center(&data).expect("interior exists");
        for i in 0..data.len() {
            assert!(data.residual(i, &a, &b).norm_squared() < 1e-6);
        }
    }

    #[test]
    fn hit_and_run_on_cstr_data() {
        let data = cstr_data(5, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sample_consistent(&data, 200, &mut rng);
        assert!(!s.undersampled);
        assert_eq!(s.pairs.len(), 200);
        for (a, b) in &s.pairs {
            assert!(contains(&data, a, b).unwrap());
        }
        let distinct = s
            .pairs
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                s.pairs[..*i]
                    .iter()
                    .all(|q| (&q.0 - &p.0).norm() + (&q.1 - &p.1).norm() > 0.0)
            })
            .count();
        assert!(distinct >= 100);
    }

    #[test]
    fn rejection_sampler_returns_members() {
        let data = cstr_data(5, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = SamplerOptions {
            count: 150,
            kind: SamplerKind::Rejection,
            ..SamplerOptions::default()
        };
        let s = sample_consistent_with(&data, &opts, &mut rng);
        assert!(s.pairs.len() >= 100, "{} pairs", s.pairs.len());
        assert!(s.acceptance_rate() > 1e-4);
        for (a, b) in &s.pairs {
            assert!(contains(&data, a, b).unwrap());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let data = cstr_data(5, 1e-6);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            sample_consistent(&data, 20, &mut rng).pairs
        };
        assert_eq!(run(), run());
    }
}
