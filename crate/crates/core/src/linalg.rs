use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{NceError, Result};

/// Eigenvalues below this magnitude count as zero in PSD and rank checks.
pub const EIG_CLAMP: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(NceError::Numeric { index: 0, what: "non-finite matrix entry".into() });
    }
    Ok(SymmetricEigen::new(symmetrize(m)).eigenvalues)
}

/// (λ_min, λ_max) of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let ev = eigenvalues(m)?;
    Ok((ev.min(), ev.max()))
}

pub fn clamp_eig(x: f64) -> f64 {
    if x.abs() < EIG_CLAMP {
        0.0
    } else {
        x
    }
}

/// Smallest eigenvalue after clamping tiny magnitudes to zero.
pub fn min_eig_clamped(m: &DMatrix<f64>) -> Result<f64> {
    Ok(clamp_eig(eig_extremes(m)?.0))
}

/// Inverse of a symmetric matrix via its eigendecomposition.
///
/// With `pinv`, eigenvalues below `EIG_CLAMP·λ_max` are dropped (Moore–Penrose);
/// the flag in the result reports whether that happened.
pub fn sym_inverse(m: &DMatrix<f64>, pinv: bool) -> Result<(DMatrix<f64>, bool)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(NceError::Numeric { index: 0, what: "non-finite matrix entry".into() });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.abs().max().max(f64::MIN_POSITIVE);
    let cut = 1e-10 * scale;
    let singular = eig.eigenvalues.iter().any(|l| l.abs() <= cut);
    if singular && !pinv {
        return Err(NceError::Rank(format!(
            "matrix is singular to tolerance {cut:e} (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let inv: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l.abs() <= cut { 0.0 } else { 1.0 / l }).collect();
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_vec(inv));
    Ok((q * d * q.transpose(), singular))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// log Σ exp(x_i), stable.
pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_pinv() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (inv, sing) = sym_inverse(&m, false).unwrap();
        assert!(!sing);
        assert!(((&inv * &m) - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(sym_inverse(&s, false), Err(NceError::Rank(_))));
        let (p, sing) = sym_inverse(&s, true).unwrap();
        assert!(sing);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn lse() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(v.iter().copied()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }
}
