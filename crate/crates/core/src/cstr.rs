//! Linearized continuous stirred-tank reactor benchmark (sampling time 0.5 s).

use nalgebra::{DMatrix, DVector};

use crate::lti::LtiSystem;

pub const DATA_LENGTH: usize = 200;
pub const NOISE_BOUND: f64 = 1e-6;
pub const INPUT_RANGE: (f64, f64) = (-10.0, 10.0);
pub const CLOSED_LOOP_STEPS: usize = 300;

/// Reported total stage cost of the noise-free closed loop with `R = 1e-4`.
pub const REPORTED_COST_NOISE_FREE: f64 = 0.0369;
/// Reported total stage cost with online noise and `R = 1e-4`.
pub const REPORTED_COST_ONLINE_NOISE: f64 = 0.0411;

pub fn a() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.9749, -0.0135, 0.0004, 0.9888])
}

pub fn b() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 1, &[0.041e-4, 5.934e-4])
}

pub fn system() -> LtiSystem {
    LtiSystem::new(a(), b()).expect("preset matrices are well-formed")
}

pub fn s_u() -> DMatrix<f64> {
    DMatrix::from_element(1, 1, 0.01)
}

pub fn s_x() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1000.0, 0.0, 0.0, 500.0])
}

pub fn q() -> DMatrix<f64> {
    DMatrix::identity(2, 2)
}

/// The two input weightings compared in the benchmark.
pub fn r_values() -> [f64; 2] {
    [1.0, 1e-4]
}

pub fn initial_state() -> DVector<f64> {
    DVector::from_vec(vec![-0.01, -0.04])
}
