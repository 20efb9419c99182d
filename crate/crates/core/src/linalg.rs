//! Small dense linear algebra helpers on top of `nalgebra`.
//!
//! Every inverse in the crate goes through one of these solves; nothing forms
//! an explicit inverse except where a covariance matrix is itself the output.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::error::{Error, Result};

/// Matrices whose condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factor of a symmetric positive definite matrix.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors `m`, rejecting non-PD or ill-conditioned input.
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        check_square(m, context)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context.to_string()));
        }
        let cond = spd_condition(m, context)?;
        if cond > MAX_CONDITION {
            return Err(Error::IllConditioned {
                condition: cond,
                context: context.to_string(),
            });
        }
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(context.to_string()))?;
        Ok(Self { chol })
    }

    /// Factors without the eigenvalue-based condition check. Used in hot loops
    /// where the caller has already validated the matrix family.
    pub fn new_unchecked(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(context.to_string()))?;
        Ok(Self { chol })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Lower-triangular factor `L` with `m = L Lᵀ`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// LU factor of a general square matrix with positive determinant.
///
/// Products such as `Ω̂` and `Σ̂ = Var·Ω̂` are not symmetric at finite sample
/// sizes, so they cannot go through Cholesky.
pub struct GeneralFactor {
    lu: LU<f64, Dyn, Dyn>,
    log_det: f64,
}

impl GeneralFactor {
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        check_square(m, context)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context.to_string()));
        }
        let lu = m.clone().lu();
        let det = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular(context.to_string()));
        }
        if det < 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "{context}: determinant is negative"
            )));
        }
        let cond = general_condition(m);
        if cond > MAX_CONDITION {
            return Err(Error::IllConditioned {
                condition: cond,
                context: context.to_string(),
            });
        }
        Ok(Self {
            log_det: det.ln(),
            lu,
        })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("factor checked nonsingular")
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu.solve(b).expect("factor checked nonsingular")
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

fn check_square(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{context}: expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Ratio of extreme eigenvalues of a symmetric matrix. Errors when the
/// smallest eigenvalue is not positive.
pub fn spd_condition(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo.is_nan() || lo <= 0.0 {
        return Err(Error::NotPositiveDefinite(context.to_string()));
    }
    Ok(hi / lo)
}

/// 2-norm condition number from singular values.
pub fn general_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let hi = sv.max();
    let lo = sv.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `½(m + mᵀ)`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Copies the lower triangle onto the upper triangle so the result is
/// bit-for-bit symmetric.
pub fn mirror_lower(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulates `w · x xᵀ` into the lower triangle of `acc`.
#[inline]
pub fn add_outer_lower(acc: &mut DMatrix<f64>, x: &[f64], w: f64) {
    let p = x.len();
    for i in 0..p {
        let wi = w * x[i];
        for j in 0..=i {
            acc[(i, j)] += wi * x[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_det_of_scaled_identity() {
        let m = DMatrix::<f64>::identity(3, 3) * 2.0;
        let f = SpdFactor::new(&m, "test").unwrap();
        assert_relative_eq!(f.log_det(), 3.0 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            SpdFactor::new(&m, "test"),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn rejects_ill_conditioned() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        assert!(matches!(
            SpdFactor::new(&m, "test"),
            Err(Error::IllConditioned { .. })
        ));
        assert!(matches!(
            GeneralFactor::new(&m, "test"),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn general_factor_handles_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let f = GeneralFactor::new(&m, "test").unwrap();
        assert_relative_eq!(f.log_det(), 6f64.ln(), epsilon = 1e-14);
        let x = f.solve_vec(&DVector::from_vec(vec![3.0, 3.0]));
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn negative_determinant_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(GeneralFactor::new(&m, "test").is_err());
    }

    #[test]
    fn mirror_makes_exactly_symmetric() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 9.0, 0.5, 2.0]);
        mirror_lower(&mut m);
        assert_eq!(m, m.transpose());
        assert_eq!(m[(0, 1)], 0.5);
    }
}
