//! Small dense linear-algebra helpers shared by the solver, synthesis and
//! the verification checks.

use nalgebra::{DMatrix, DVector};

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut ev = symmetrize(m).symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Absolute tolerance used for floating-point PSD tests: `1e-10 (1 + ‖M‖_F)`.
pub fn psd_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-10 * (1.0 + m.norm())
}

/// `λ_min(M) ≥ -1e-10 (1 + ‖M‖_F)`. Empty matrices are PSD.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || min_eigenvalue(m) >= -psd_tolerance(m)
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 2-norm condition number of a symmetric positive-definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `M^{-1/2}` for symmetric positive-definite `M`.
pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = symmetrize(m).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Some(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Quadratic form `xᵀ M x`.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Frobenius inner product `⟨A, B⟩ = Σ A_ij B_ij`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Copies `src` into `dst` at offset `(r, c)`.
pub fn put_block(dst: &mut DMatrix<f64>, r: usize, c: usize, src: &DMatrix<f64>) {
    dst.view_mut((r, c), (src.nrows(), src.ncols())).copy_from(src);
}

/// Places `src` at `(r, c)` and its transpose at `(c, r)`.
pub fn put_sym_block(dst: &mut DMatrix<f64>, r: usize, c: usize, src: &DMatrix<f64>) {
    put_block(dst, r, c, src);
    put_block(dst, c, r, &src.transpose());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_are_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = sym_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn psd_tolerance_accepts_rounding_noise() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-13]);
        assert!(is_psd(&m));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-6]);
        assert!(!is_psd(&m));
    }

    #[test]
    fn spectral_radius_of_rotation_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_root() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = spd_inv_sqrt(&m).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((r[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
        assert!(spd_inv_sqrt(&(-m)).is_none());
    }
}
