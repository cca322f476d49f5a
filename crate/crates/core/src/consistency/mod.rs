//! The set of system matrices consistent with noisy data and its
//! multiplier-weighted quadratic matrix inequality.
//!
//! Each sample `(x_i, u_i, x_{i+1})` contributes
//!
//! ```text
//! Π_i = D_i diag(ε I, -1) D_iᵀ,   D_i = [[I, x_{i+1}], [0, -x_i], [0, -u_i]]
//! ```
//!
//! so that `[I A B] Π_i [I A B]ᵀ = ε I - r_i r_iᵀ` with the residual
//! `r_i = x_{i+1} - A x_i - B u_i`.

mod sampler;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, check_shape, Error, Result};
use crate::linalg::{is_psd, symmetrize};
use crate::lti::DataSet;

pub use sampler::{
    analytic_center, least_squares, sample_consistent, sample_consistent_with, ConsistentSamples, SamplerKind,
    SamplerOptions,
};

/// Absolute slack on the residual test `‖r_i‖² ≤ ε`.
pub const RESIDUAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PiBlocks {
    n: usize,
    m: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl PiBlocks {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of samples `T`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Side length `2n + m`.
    pub fn dim(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.blocks.iter()
    }

    /// Plain-text dump, one matrix per block separated by blank lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "# block {i}");
            for r in 0..b.nrows() {
                let row: Vec<String> = (0..b.ncols()).map(|c| format!("{:.16e}", b[(r, c)])).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierMode {
    /// One multiplier per sample.
    #[default]
    PerSample,
    /// A single multiplier shared by all samples.
    Common,
}

impl std::str::FromStr for MultiplierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-sample" => Ok(Self::PerSample),
            "common" => Ok(Self::Common),
            other => Err(Error::Invalid(format!("unknown multiplier mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for MultiplierMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerSample => "per-sample",
            Self::Common => "common",
        })
    }
}

/// Nonnegative weights `τ_0..τ_{T-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    tau: DVector<f64>,
    mode: MultiplierMode,
}

impl Multipliers {
    pub fn per_sample(tau: DVector<f64>) -> Result<Self> {
        if let Some((index, &value)) = tau.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeMultiplier { index, value });
        }
        Ok(Self {
            tau,
            mode: MultiplierMode::PerSample,
        })
    }

    pub fn common(value: f64, len: usize) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::NegativeMultiplier { index: 0, value });
        }
        Ok(Self {
            tau: DVector::from_element(len, value),
            mode: MultiplierMode::Common,
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            tau: DVector::zeros(len),
            mode: MultiplierMode::PerSample,
        }
    }

    /// `τ = e_j`.
    pub fn unit(j: usize, len: usize) -> Self {
        let mut tau = DVector::zeros(len);
        tau[j] = 1.0;
        Self {
            tau,
            mode: MultiplierMode::PerSample,
        }
    }

    pub fn tau(&self) -> &DVector<f64> {
        &self.tau
    }

    pub fn mode(&self) -> MultiplierMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// `D_i diag(ε I, -1) D_iᵀ` for every sample, symmetrized.
pub fn build_pi_blocks(data: &DataSet) -> PiBlocks {
    let n = data.n();
    let m = data.m();
    let eps = data.eps();
    let blocks = (0..data.len())
        .map(|i| {
            let mut d = DMatrix::zeros(2 * n + m, n + 1);
            for k in 0..n {
                d[(k, k)] = 1.0;
            }
            let next = data.state(i + 1);
            let cur = data.state(i);
            let inp = data.input(i);
            for k in 0..n {
                d[(k, n)] = next[k];
                d[(n + k, n)] = -cur[k];
            }
            for k in 0..m {
                d[(2 * n + k, n)] = -inp[k];
            }
            let mut w = DMatrix::zeros(n + 1, n + 1);
            for k in 0..n {
                w[(k, k)] = eps;
            }
            w[(n, n)] = -1.0;
            symmetrize(&(&d * w * d.transpose()))
        })
        .collect();
    PiBlocks { n, m, blocks }
}

/// `Π(τ) = Σ_i τ_i Π_i`.
pub fn assemble_pi(blocks: &PiBlocks, mult: &Multipliers) -> Result<DMatrix<f64>> {
    check_len("multipliers tau", blocks.len(), mult.len())?;
    if let Some((index, &value)) = mult.tau.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeMultiplier { index, value });
    }
    let d = blocks.dim();
    let mut out = DMatrix::zeros(d, d);
    for (b, t) in blocks.iter().zip(mult.tau.iter()) {
        if *t != 0.0 {
            out += b * *t;
        }
    }
    Ok(out)
}

fn check_pair(n: usize, m: usize, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    check_shape("A", (n, n), a.shape())?;
    check_shape("B", (n, m), b.shape())
}

/// Residual test for a single sample: `‖x_{i+1} - A x_i - B u_i‖² ≤ ε`.
pub fn sample_consistent_at(data: &DataSet, i: usize, a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    data.residual(i, a, b).norm_squared() <= data.eps() + RESIDUAL_SLACK
}

/// Membership of `(A, B)` in the consistency set, by the residual test on
/// every sample.
pub fn contains(data: &DataSet, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    check_pair(data.n(), data.m(), a, b)?;
    Ok((0..data.len()).all(|i| sample_consistent_at(data, i, a, b)))
}

/// `[I A B]` stacked horizontally.
pub fn stacked_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut s = DMatrix::zeros(n, 2 * n + m);
    s.view_mut((0, 0), (n, n)).fill_with_identity();
    s.view_mut((0, n), (n, n)).copy_from(a);
    s.view_mut((0, 2 * n), (n, m)).copy_from(b);
    s
}

/// `[I A B] Π(τ) [I A B]ᵀ`.
pub fn qmi_matrix(blocks: &PiBlocks, mult: &Multipliers, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_pair(blocks.n, blocks.m, a, b)?;
    let pi = assemble_pi(blocks, mult)?;
    let s = stacked_pair(a, b);
    Ok(symmetrize(&(&s * pi * s.transpose())))
}

/// Whether `[I A B] Π(τ) [I A B]ᵀ ⪰ 0` up to the PSD tolerance.
pub fn qmi_membership(blocks: &PiBlocks, mult: &Multipliers, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    Ok(is_psd(&qmi_matrix(blocks, mult, a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;

    fn one_sample(x: f64, u: f64, xn: f64, eps: f64) -> DataSet {
        DataSet::new(
            DMatrix::from_row_slice(1, 2, &[x, xn]),
            DMatrix::from_row_slice(1, 1, &[u]),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn scalar_block_by_hand() {
        let blocks = build_pi_blocks(&one_sample(1.0, 0.0, 0.0, 1.0));
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(blocks.block(0), &expected);
    }

    #[test]
    fn zero_sample_zero_eps_gives_zero_block() {
        let blocks = build_pi_blocks(&one_sample(0.0, 0.0, 0.0, 0.0));
        assert_eq!(blocks.block(0), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn blocks_have_at_most_n_positive_eigenvalues() {
        let x = DMatrix::from_row_slice(2, 4, &[0.3, -1.0, 2.0, 0.5, 1.5, 0.2, -0.7, 0.1]);
        let u = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let data = DataSet::new(x, u, 0.04).unwrap();
        let blocks = build_pi_blocks(&data);
        for b in blocks.iter() {
            let ev = sym_eigenvalues(b);
            let pos = ev.iter().filter(|&&v| v > 1e-12 * b.norm()).count();
            assert!(pos <= 2, "{ev}");
            assert!((b - b.transpose()).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn assemble_edge_cases() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, -0.2]);
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let blocks = build_pi_blocks(&DataSet::new(x, u, 0.1).unwrap());
        assert_eq!(
            assemble_pi(&blocks, &Multipliers::zeros(2)).unwrap(),
            DMatrix::zeros(3, 3)
        );
        assert_eq!(
            &assemble_pi(&blocks, &Multipliers::unit(1, 2)).unwrap(),
            blocks.block(1)
        );
        assert!(matches!(
            Multipliers::per_sample(DVector::from_vec(vec![1.0, -0.5])),
            Err(Error::NegativeMultiplier { index: 1, .. })
        ));
        assert!(assemble_pi(&blocks, &Multipliers::zeros(3)).is_err());
    }

    #[test]
    fn exact_data_excludes_perturbed_system() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let mut x = DMatrix::zeros(2, 6);
        x.set_column(0, &DVector::from_vec(vec![1.0, -1.0]));
        let u = DMatrix::from_row_slice(1, 5, &[1.0, -0.5, 0.3, 0.9, -1.2]);
        for i in 0..5 {
            let next = &a * x.column(i) + &b * u.column(i);
            x.set_column(i + 1, &next);
        }
        let data = DataSet::new(x, u, 0.0).unwrap();
        assert!(contains(&data, &a, &b).unwrap());
        let shifted = &a + DMatrix::identity(2, 2) * 0.01;
        assert!(!contains(&data, &shifted, &b).unwrap());
    }

    #[test]
    fn zero_multiplier_accepts_anything() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, -0.2]);
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let blocks = build_pi_blocks(&DataSet::new(x, u, 0.0).unwrap());
        let a = DMatrix::from_element(1, 1, 100.0);
        let b = DMatrix::from_element(1, 1, -3.0);
        assert!(qmi_membership(&blocks, &Multipliers::zeros(2), &a, &b).unwrap());
    }

    #[test]
    fn qmi_matrix_equals_eps_minus_residual_outer_product() {
        let x = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 1.5, 0.2]);
        let u = DMatrix::from_row_slice(1, 1, &[0.7]);
        let data = DataSet::new(x, u, 0.5).unwrap();
        let blocks = build_pi_blocks(&data);
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let r = data.residual(0, &a, &b);
        let expected = DMatrix::identity(2, 2) * 0.5 - &r * r.transpose();
        let got = qmi_matrix(&blocks, &Multipliers::unit(0, 1), &a, &b).unwrap();
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn dump_has_one_section_per_block() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, -0.2]);
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let text = build_pi_blocks(&DataSet::new(x, u, 0.1).unwrap()).to_text();
        assert_eq!(text.matches("# block").count(), 2);
    }
}
