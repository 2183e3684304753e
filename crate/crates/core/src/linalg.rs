//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Orthonormal basis of the column space of `a` (thin SVD), failing on rank
/// deficiency.
pub fn column_basis(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if rows < cols {
        return Err(Error::RankDeficient { column: rows });
    }
    let svd = a.clone().svd(true, false);
    let s_max = svd.singular_values.max();
    if let Some((k, _)) = svd
        .singular_values
        .iter()
        .enumerate()
        .find(|(_, &s)| !(s > 1e-10 * s_max) || !s.is_finite())
    {
        return Err(Error::RankDeficient { column: k });
    }
    Ok(svd.u.expect("requested U"))
}

/// Frobenius distance between the projections onto the column spaces of `a`
/// and `b` (both with T rows).
///
/// Uses `‖P_a − P_b‖² = d_a + d_b − 2 tr(P_a P_b)`, evaluated as
/// `‖(I − P_a) Q_b‖² + ‖(I − P_b) Q_a‖²` with orthonormal bases `Q`, which
/// avoids both T×T matrices and cancellation when the spans nearly agree.
/// An empty factor block projects onto the zero matrix.
pub fn projection_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            axis: "rows (T)",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let qa = column_basis(a)?;
    let qb = column_basis(b)?;
    let resid = |q: &DMatrix<f64>, other: &DMatrix<f64>| -> f64 {
        if q.ncols() == 0 {
            return other.norm_squared();
        }
        let proj = q * (q.transpose() * other);
        (other - proj).norm_squared()
    };
    Ok((resid(&qa, &qb) + resid(&qb, &qa)).sqrt())
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from rounding are clipped at zero.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric matrix, falling back to the pseudo-inverse when it
/// is singular. The flag reports whether the fallback was used.
pub fn sym_inverse_or_pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = a.nrows();
    if n == 0 {
        return (a.clone(), false);
    }
    let scale = a.amax();
    if scale > 0.0 {
        if let Some(ch) = a.clone().cholesky() {
            let inv = ch.inverse();
            // Cholesky can succeed on numerically singular input.
            let diag_min = ch.l().diagonal().min();
            if diag_min * diag_min > 1e-12 * scale && inv.iter().all(|v| v.is_finite()) {
                return (inv, false);
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let tol = 1e-12 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let d = eig.eigenvalues.map(|v| if v.abs() > tol { 1.0 / v } else { 0.0 });
    (
        &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose(),
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_axes_are_sqrt2_apart() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((projection_distance(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_spans_are_zero_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0));
        let mix = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        assert!(projection_distance(&a, &(&a * mix)).unwrap() < 1e-12);
    }

    #[test]
    fn empty_block_is_zero_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0));
        let empty = DMatrix::zeros(10, 0);
        assert!((projection_distance(&empty, &a).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(projection_distance(&empty, &empty).unwrap(), 0.0);
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(projection_distance(&a, &b).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let s = DMatrix::from_fn(5, 5, |i, j| 0.3f64.powi((i as i32 - j as i32).abs()));
        let r = sym_sqrt(&s);
        assert!((&r * &r - &s).amax() < 1e-12);
        assert!((&r - r.transpose()).amax() < 1e-14);
    }

    #[test]
    fn pinv_fallback_on_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, flagged) = sym_inverse_or_pinv(&a);
        assert!(flagged);
        assert!((&a * &p * &a - &a).amax() < 1e-12);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let (q, flagged) = sym_inverse_or_pinv(&b);
        assert!(!flagged);
        assert!((q[(1, 1)] - 0.25).abs() < 1e-15);
    }
}
