//! True plant, bounded noise and offline data generation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, check_shape, Error, Result};

/// Discrete-time plant `x⁺ = A x + B u + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || b.ncols() == 0 {
            return Err(Error::Invalid("state and input dimensions must be at least 1".into()));
        }
        check_shape("A", (n, n), a.shape())?;
        check_shape("B", (n, b.ncols()), b.shape())?;
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// One plant step `A x + B u + w`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("state x", self.n(), x.len())?;
        check_len("input u", self.m(), u.len())?;
        check_len("noise w", self.n(), w.len())?;
        Ok(&self.a * x + &self.b * u + w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDistribution {
    /// Uniform in the ball `‖w‖₂ ≤ √ε`.
    UniformBall,
    /// Uniform direction on the sphere `‖w‖₂ = √ε`.
    Boundary,
    Zero,
}

impl std::str::FromStr for NoiseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform-ball" => Ok(Self::UniformBall),
            "boundary" => Ok(Self::Boundary),
            "zero" | "none" => Ok(Self::Zero),
            other => Err(Error::Invalid(format!("unknown noise distribution '{other}'"))),
        }
    }
}

impl std::fmt::Display for NoiseDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UniformBall => "uniform-ball",
            Self::Boundary => "boundary",
            Self::Zero => "zero",
        })
    }
}

/// Additive noise with squared 2-norm bounded by `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub eps: f64,
    pub distribution: NoiseDistribution,
}

impl NoiseModel {
    pub fn new(eps: f64, distribution: NoiseDistribution) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise bound must be finite and >= 0, got {eps}"
            )));
        }
        Ok(Self { eps, distribution })
    }

    pub fn zero() -> Self {
        Self {
            eps: 0.0,
            distribution: NoiseDistribution::Zero,
        }
    }

    pub fn uniform(eps: f64) -> Result<Self> {
        Self::new(eps, NoiseDistribution::UniformBall)
    }

    pub fn is_zero(&self) -> bool {
        self.eps == 0.0 || self.distribution == NoiseDistribution::Zero
    }

    /// Draws `w ∈ ℝⁿ` with `‖w‖₂² ≤ eps`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        if self.is_zero() || n == 0 {
            return DVector::zeros(n);
        }
        let mut dir: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let mut norm = dir.norm();
        while norm == 0.0 {
            dir = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            norm = dir.norm();
        }
        let radius = self.eps.sqrt()
            * match self.distribution {
                NoiseDistribution::UniformBall => rng.random::<f64>().powf(1.0 / n as f64),
                _ => 1.0,
            };
        let mut w = dir * (radius / norm);
        // Rounding can push a boundary draw one ulp outside the bound.
        while w.norm_squared() > self.eps {
            w *= 1.0 - 1e-15;
        }
        w
    }
}

/// Offline input-state trajectory together with the declared noise bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    eps: f64,
}

impl DataSet {
    /// `x` holds states `x_0..x_T` as columns, `u` holds `u_0..u_{T-1}`.
    pub fn new(x: DMatrix<f64>, u: DMatrix<f64>, eps: f64) -> Result<Self> {
        if u.ncols() == 0 {
            return Err(Error::Invalid("data set needs at least one input sample".into()));
        }
        if x.nrows() == 0 || u.nrows() == 0 {
            return Err(Error::Invalid("state and input dimensions must be at least 1".into()));
        }
        check_shape("state data X", (x.nrows(), u.ncols() + 1), x.shape())?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise bound must be finite and >= 0, got {eps}"
            )));
        }
        Ok(Self { x, u, eps })
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Same trajectory with a different declared noise bound.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.u.clone(), eps)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    pub fn state(&self, i: usize) -> DVector<f64> {
        self.x.column(i).into_owned()
    }

    pub fn input(&self, i: usize) -> DVector<f64> {
        self.u.column(i).into_owned()
    }

    /// `x_{i+1} - A x_i - B u_i`.
    pub fn residual(&self, i: usize, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
        self.x.column(i + 1) - a * self.x.column(i) - b * self.u.column(i)
    }
}

/// I.i.d. inputs uniform on `[lo, hi]`, one column per step.
pub fn uniform_inputs<R: Rng + ?Sized>(m: usize, t: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(m, t, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

/// Simulates the plant from `x0` under `inputs` with bounded noise and
/// records the trajectory. The noise realization is discarded.
pub fn generate_dataset<R: Rng + ?Sized>(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DataSet> {
    check_len("initial state x0", sys.n(), x0.len())?;
    check_shape("inputs", (sys.m(), inputs.ncols()), inputs.shape())?;
    let t = inputs.ncols();
    if t == 0 {
        return Err(Error::Invalid("data length T must be at least 1".into()));
    }
    let mut x = DMatrix::zeros(sys.n(), t + 1);
    x.set_column(0, x0);
    for i in 0..t {
        let w = noise.sample(sys.n(), rng);
        let next = sys.step(&x.column(i).into_owned(), &inputs.column(i).into_owned(), &w)?;
        x.set_column(i + 1, &next);
    }
    DataSet::new(x, inputs.clone(), noise.eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_dynamics_step() {
        let sys = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let next = sys.step(&x, &DVector::from_vec(vec![7.0]), &DVector::zeros(2)).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn step_rejects_wrong_noise_dimension() {
        let sys = LtiSystem::new(DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap();
        let err = sys
            .step(
                &DVector::from_vec(vec![1.0]),
                &DVector::from_vec(vec![3.0]),
                &DVector::from_vec(vec![0.5, 0.0]),
            )
            .unwrap_err();
        match err {
            Error::Dimension { operand, .. } => assert_eq!(operand, "noise w"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cstr_step_matches_hand_arithmetic() {
        let sys = cstr::system();
        let x = DVector::from_vec(vec![-0.01, -0.04]);
        let next = sys.step(&x, &DVector::zeros(1), &DVector::zeros(2)).unwrap();
        // 0.9749(-0.01) - 0.0135(-0.04) = -0.009209; 0.0004(-0.01) + 0.9888(-0.04) = -0.039556
        assert!((next[0] + 0.009209).abs() < 1e-15);
        assert!((next[1] + 0.039556).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_is_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = NoiseModel::uniform(0.0).unwrap().sample(3, &mut rng);
        assert_eq!(w, DVector::zeros(3));
    }

    #[test]
    fn uniform_ball_fills_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = NoiseModel::uniform(1e-6).unwrap();
        let mut max = 0.0f64;
        for _ in 0..10_000 {
            let w = model.sample(2, &mut rng);
            assert!(w.norm_squared() <= 1e-6);
            max = max.max(w.norm_squared());
        }
        assert!(max >= 0.5e-6, "max {max}");
    }

    #[test]
    fn boundary_draws_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = NoiseModel::new(1e-6, NoiseDistribution::Boundary).unwrap();
        for _ in 0..1000 {
            let w = model.sample(3, &mut rng);
            assert!(w.norm_squared() <= 1e-6);
            assert!(w.norm_squared() >= 1e-6 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn noise_free_data_has_zero_residuals() {
        let sys = cstr::system();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = uniform_inputs(1, 50, -10.0, 10.0, &mut rng);
        let data = generate_dataset(&sys, &DVector::zeros(2), &u, &NoiseModel::zero(), &mut rng).unwrap();
        for i in 0..data.len() {
            // Zero up to the rounding of recomputing A x + B u in another order.
            let scale = data.state(i + 1).norm() + 1e-300;
            assert!(data.residual(i, sys.a(), sys.b()).norm() <= 1e-15 * scale);
        }
    }

    #[test]
    fn cstr_dataset_shape_and_consistency() {
        let sys = cstr::system();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = uniform_inputs(1, 200, -10.0, 10.0, &mut rng);
        let data = generate_dataset(
            &sys,
            &DVector::zeros(2),
            &u,
            &NoiseModel::uniform(1e-6).unwrap(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(data.states().ncols(), 201);
        assert_eq!(data.inputs().ncols(), 200);
        for i in 0..200 {
            assert!(data.residual(i, sys.a(), sys.b()).norm_squared() <= 1e-6 + 1e-18);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sys = cstr::system();
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let u = uniform_inputs(1, 20, -10.0, 10.0, &mut rng);
            generate_dataset(
                &sys,
                &DVector::zeros(2),
                &u,
                &NoiseModel::uniform(1e-6).unwrap(),
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn dataset_rejects_bad_shapes() {
        assert!(DataSet::new(DMatrix::zeros(2, 3), DMatrix::zeros(1, 3), 0.0).is_err());
        assert!(DataSet::new(DMatrix::zeros(2, 1), DMatrix::zeros(1, 0), 0.0).is_err());
        assert!(DataSet::new(DMatrix::zeros(2, 2), DMatrix::zeros(1, 1), -1.0).is_err());
    }
}
