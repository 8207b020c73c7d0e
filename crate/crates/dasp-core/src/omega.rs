//! Construction of the coefficient dependence matrix from the design matrix.
//!
//! The pipeline is: estimate the predictor covariance (sample estimator, or
//! Ledoit-Wolf linear shrinkage when p is large relative to n), invert it,
//! and standardize the precision to a correlation matrix. Off-diagonals of
//! the result equal the negated partial correlations of the predictors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corr::{self, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// How to obtain the dependence matrix for a fit.
#[derive(Debug, Clone)]
pub enum OmegaSpec {
    /// No dependence: identity matrix.
    Identity,
    /// Known predictor covariance, standardized from its inverse.
    Known(DMatrix<f64>),
    /// Sample covariance of the design (requires n > p, full rank).
    SampleCov,
    /// Ledoit-Wolf linear shrinkage estimate of the covariance.
    LedoitWolf,
    /// Caller-provided correlation matrix, validated then passed through.
    UserMatrix(DMatrix<f64>),
}

/// Mode label recorded in manifests and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaMode {
    Identity,
    True,
    SampleCov,
    LedoitWolf,
    User,
}

impl OmegaSpec {
    pub fn mode(&self) -> OmegaMode {
        match self {
            Self::Identity => OmegaMode::Identity,
            Self::Known(_) => OmegaMode::True,
            Self::SampleCov => OmegaMode::SampleCov,
            Self::LedoitWolf => OmegaMode::LedoitWolf,
            Self::UserMatrix(_) => OmegaMode::User,
        }
    }
}

impl std::fmt::Display for OmegaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Identity => "identity",
            Self::True => "true",
            Self::SampleCov => "sample",
            Self::LedoitWolf => "ledoit-wolf",
            Self::User => "user",
        };
        f.write_str(s)
    }
}

/// Ledoit-Wolf shrinkage estimate with its intermediate statistics.
#[derive(Debug, Clone)]
pub struct LedoitWolfResult {
    /// Grand mean of the sample eigenvalues, tr(S)/p.
    pub m_n: f64,
    /// Squared scaled-Frobenius dispersion of S around m_n I.
    pub d_n2: f64,
    /// Estimated squared error of S (capped at d_n2).
    pub b_n2: f64,
    /// d_n2 - b_n2.
    pub a_n2: f64,
    /// The shrunk covariance (b_n2/d_n2) m_n I + (a_n2/d_n2) S.
    pub s_star: DMatrix<f64>,
    /// Set when the spread d_n2 was numerically zero and s_star fell back to
    /// m_n I.
    pub degenerate_spread: bool,
}

/// Squared scaled Frobenius norm tr(A'A)/p.
fn frob2_scaled(a: &DMatrix<f64>) -> f64 {
    let p = a.ncols() as f64;
    a.iter().map(|x| x * x).sum::<f64>() / p
}

fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Sample covariance S = X'X/(n-1) after optional column centering.
pub fn sample_covariance(x: &DMatrix<f64>, center: bool) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample covariance needs n >= 2 rows, got {n}"
        )));
    }
    let xc = if center { center_columns(x) } else { x.clone() };
    let mut s = xc.transpose() * &xc / (n as f64 - 1.0);
    s = linalg::symmetrize(&s);
    Ok(s)
}

/// Linear shrinkage of the sample covariance toward a scaled identity.
///
/// Shrinkage weights come from the plug-in estimators
/// m_n = tr(S)/p, d_n^2 = ||S - m_n I||^2 and
/// b_n^2 = min(n^-2 sum_k ||x_k x_k' - S||^2, d_n^2), with the squared norm
/// scaled by 1/p. The result keeps the eigenvectors of S and is positive
/// definite whenever m_n > 0, including when p > n.
pub fn ledoit_wolf(x: &DMatrix<f64>, center: bool) -> Result<LedoitWolfResult> {
    let (n, p) = (x.nrows(), x.ncols());
    let s = sample_covariance(x, center)?;
    let xc = if center { center_columns(x) } else { x.clone() };

    let m_n = s.trace() / p as f64;
    let centered_s = &s - DMatrix::identity(p, p) * m_n;
    let d_n2 = frob2_scaled(&centered_s);

    if d_n2 <= 1e-12 * m_n * m_n {
        return Ok(LedoitWolfResult {
            m_n,
            d_n2,
            b_n2: 0.0,
            a_n2: 0.0,
            s_star: DMatrix::identity(p, p) * m_n,
            degenerate_spread: true,
        });
    }

    let mut b_bar2 = 0.0;
    for k in 0..n {
        let row = xc.row(k).transpose();
        let outer = &row * row.transpose();
        b_bar2 += frob2_scaled(&(outer - &s));
    }
    b_bar2 /= (n * n) as f64;

    let b_n2 = b_bar2.min(d_n2);
    let a_n2 = d_n2 - b_n2;
    let s_star = DMatrix::identity(p, p) * (b_n2 / d_n2 * m_n) + &s * (a_n2 / d_n2);

    Ok(LedoitWolfResult {
        m_n,
        d_n2,
        b_n2,
        a_n2,
        s_star,
        degenerate_spread: false,
    })
}

/// Standardize a symmetric positive definite matrix to unit diagonal:
/// out_ij = theta_ij / sqrt(theta_ii theta_jj).
pub fn cor_standardize(theta: &DMatrix<f64>) -> Result<CorrelationMatrix> {
    let p = linalg::ensure_square(theta, "matrix to standardize")?;
    for i in 0..p {
        if theta[(i, i)] <= 0.0 {
            return Err(Error::NonPositiveDiagonal {
                index: i,
                value: theta[(i, i)],
            });
        }
    }
    let scale: Vec<f64> = (0..p).map(|i| theta[(i, i)].sqrt()).collect();
    let mut out = linalg::symmetrize(theta);
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] /= scale[i] * scale[j];
        }
        out[(i, i)] = 1.0;
    }
    CorrelationMatrix::checked(out)
}

/// Build the dependence matrix from the design and the chosen mode.
pub fn build_omega(x: &DMatrix<f64>, spec: &OmegaSpec) -> Result<CorrelationMatrix> {
    let (n, p) = (x.nrows(), x.ncols());
    match spec {
        OmegaSpec::Identity => Ok(CorrelationMatrix::identity(p)),
        OmegaSpec::Known(sigma_x) => {
            if sigma_x.nrows() != p || sigma_x.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "known covariance is {}x{}, design has p = {p}",
                    sigma_x.nrows(),
                    sigma_x.ncols()
                )));
            }
            let theta = linalg::spd_inverse(sigma_x, "known covariance")
                .map_err(|_| Error::SingularCovariance("known covariance".into()))?;
            cor_standardize(&theta)
        }
        OmegaSpec::SampleCov => {
            if n <= p {
                return Err(Error::SingularCovariance(format!(
                    "sample covariance mode needs n > p, got n = {n}, p = {p}"
                )));
            }
            let s = sample_covariance(x, true)?;
            let theta = linalg::spd_inverse(&s, "sample covariance")
                .map_err(|_| Error::SingularCovariance("sample covariance".into()))?;
            cor_standardize(&theta)
        }
        OmegaSpec::LedoitWolf => {
            let lw = ledoit_wolf(x, true)?;
            let theta = linalg::spd_inverse(&lw.s_star, "shrunk covariance")
                .map_err(|_| Error::SingularCovariance("shrunk covariance".into()))?;
            cor_standardize(&theta)
        }
        OmegaSpec::UserMatrix(m) => corr::validate(m, 1e-8),
    }
}

/// Partial correlation of variables i and j given the rest, computed from
/// the covariance by block regression (Schur complement of the pair).
///
/// Independent of the precision-matrix route; used as a test oracle for
/// [`build_omega`].
pub fn partial_correlation(sigma: &DMatrix<f64>, i: usize, j: usize) -> Result<f64> {
    let p = linalg::ensure_square(sigma, "covariance")?;
    assert!(i < p && j < p && i != j);
    let rest: Vec<usize> = (0..p).filter(|&k| k != i && k != j).collect();
    let pair = [i, j];
    let s_pp = DMatrix::from_fn(2, 2, |a, b| sigma[(pair[a], pair[b])]);
    if rest.is_empty() {
        return Ok(s_pp[(0, 1)] / (s_pp[(0, 0)] * s_pp[(1, 1)]).sqrt());
    }
    let s_pr = DMatrix::from_fn(2, rest.len(), |a, b| sigma[(pair[a], rest[b])]);
    let s_rr = DMatrix::from_fn(rest.len(), rest.len(), |a, b| sigma[(rest[a], rest[b])]);
    let chol = linalg::spd_cholesky(&s_rr, "conditioning block")?;
    let solved = chol.solve(&s_pr.transpose());
    let cond = s_pp - s_pr * solved;
    Ok(cond[(0, 1)] / (cond[(0, 0)] * cond[(1, 1)]).sqrt())
}

/// Population covariance of a mean-zero design with correlation `corr` and
/// per-coordinate standard deviations `sd`.
pub fn scale_correlation(corr: &CorrelationMatrix, sd: &DVector<f64>) -> DMatrix<f64> {
    let p = corr.dim();
    DMatrix::from_fn(p, p, |i, j| corr.entries()[(i, j)] * sd[i] * sd[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_covariance_direct_formula() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let s = sample_covariance(&x, false).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_covariance_zero_rows() {
        let x = DMatrix::zeros(5, 3);
        let s = sample_covariance(&x, false).unwrap();
        assert_eq!(s, DMatrix::zeros(3, 3));
    }

    #[test]
    fn sample_covariance_needs_two_rows() {
        let x = DMatrix::zeros(1, 3);
        assert!(sample_covariance(&x, true).is_err());
    }

    #[test]
    fn ledoit_wolf_zero_spread_returns_scaled_identity() {
        // Orthogonal design with equal column norms: S is exactly c * I.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let lw = ledoit_wolf(&x, false).unwrap();
        assert!(lw.degenerate_spread);
        assert_abs_diff_eq!(lw.m_n, 2.0, epsilon = 1e-12);
        assert_eq!(lw.s_star, DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn cor_standardize_two_by_two() {
        let theta = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]);
        let omega = cor_standardize(&theta).unwrap();
        assert_abs_diff_eq!(omega.entries()[(0, 1)], 0.5, epsilon = 1e-15);
        assert_eq!(omega.entries()[(0, 0)], 1.0);
    }

    #[test]
    fn cor_standardize_diagonal_gives_identity() {
        let theta = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 0.1]));
        let omega = cor_standardize(&theta).unwrap();
        assert!(omega.is_identity());
    }

    #[test]
    fn cor_standardize_rejects_nonpositive_diagonal() {
        let theta = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cor_standardize(&theta),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn build_omega_identity_mode() {
        let x = DMatrix::zeros(4, 3);
        let omega = build_omega(&x, &OmegaSpec::Identity).unwrap();
        assert!(omega.is_identity());
    }

    #[test]
    fn build_omega_known_equicorrelation() {
        // Sigma = [[1, .5], [.5, 1]]; inverse is (1/.75) [[1, -.5], [-.5, 1]],
        // standardizing gives off-diagonal -0.5.
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let x = DMatrix::zeros(10, 2);
        let omega = build_omega(&x, &OmegaSpec::Known(sigma)).unwrap();
        assert_abs_diff_eq!(omega.entries()[(0, 1)], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn build_omega_sample_mode_requires_tall_design() {
        let x = DMatrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64);
        assert!(matches!(
            build_omega(&x, &OmegaSpec::SampleCov),
            Err(Error::SingularCovariance(_))
        ));
    }

    #[test]
    fn partial_correlation_matches_inverse_route() {
        // AR1(0.5), p = 3: partial correlation of (0, 2) given 1 is zero.
        let spec = crate::corr::StructureSpec::new(crate::corr::StructureKind::Ar1, 0.5);
        let sigma = crate::corr::make_structure(&spec, 3).unwrap();
        let pc = partial_correlation(sigma.entries(), 0, 2).unwrap();
        assert_abs_diff_eq!(pc, 0.0, epsilon = 1e-12);
    }
}
