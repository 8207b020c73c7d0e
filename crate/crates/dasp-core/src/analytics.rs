//! Closed-form and Monte Carlo analytics of the dependency-aware prior and
//! its conditional posterior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::priors::{self, PriorSpec};
use crate::rng::{substream, StreamTag};

/// Positive scale state (lambda, tau, sigma) conditioning the posterior.
#[derive(Debug, Clone)]
pub struct ScaleState {
    pub lambda: Vec<f64>,
    pub tau: f64,
    pub sigma: f64,
}

impl ScaleState {
    pub fn new(lambda: Vec<f64>, tau: f64, sigma: f64) -> Result<Self> {
        if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter(
                "local scales must be positive and finite".into(),
            ));
        }
        if !(tau.is_finite() && tau > 0.0) || !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "tau and sigma must be positive and finite".into(),
            ));
        }
        Ok(Self { lambda, tau, sigma })
    }

    pub fn constant(p: usize, lambda: f64, tau: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![lambda; p], tau, sigma)
    }
}

/// Conditional posterior of the coefficients given scales and dependence.
#[derive(Debug, Clone)]
pub struct ConditionalPosterior {
    pub mean: DVector<f64>,
    /// sigma^2 Q^-1.
    pub covariance: DMatrix<f64>,
    /// Q = X'X + tau^-2 D^-1 Omega^-1 D^-1.
    pub q_matrix: DMatrix<f64>,
}

/// Q_Omega = X'X + tau^-2 D_lambda^-1 Omega^-1 D_lambda^-1.
pub fn q_matrix(
    xtx: &DMatrix<f64>,
    state: &ScaleState,
    omega_inv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let p = xtx.nrows();
    let t2 = state.tau * state.tau;
    DMatrix::from_fn(p, p, |i, j| {
        xtx[(i, j)] + omega_inv[(i, j)] / (t2 * state.lambda[i] * state.lambda[j])
    })
}

fn omega_inverse(omega: &CorrelationMatrix) -> Result<DMatrix<f64>> {
    linalg::spd_inverse(omega.entries(), "Omega")
        .map_err(|_| Error::NumericalSingularity("Omega is numerically singular".into()))
}

/// Exact conditional posterior mean and covariance of the coefficients.
pub fn conditional_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    state: &ScaleState,
    omega: &CorrelationMatrix,
) -> Result<ConditionalPosterior> {
    let p = x.ncols();
    if y.len() != x.nrows() || state.lambda.len() != p || omega.dim() != p {
        return Err(Error::DimensionMismatch(
            "conditional_posterior inputs".into(),
        ));
    }
    let xtx = x.transpose() * x;
    let omega_inv = omega_inverse(omega)?;
    let q = q_matrix(&xtx, state, &omega_inv);
    let chol = nalgebra::Cholesky::new(q.clone())
        .ok_or_else(|| Error::NumericalSingularity("Q factorization failed".into()))?;
    let mean = chol.solve(&(x.transpose() * y));
    let covariance = chol.inverse() * (state.sigma * state.sigma);
    Ok(ConditionalPosterior {
        mean,
        covariance,
        q_matrix: q,
    })
}

/// Posterior mean written as shrinkage applied to the MLE:
/// tau^2 D Omega D (tau^2 D Omega D + (X'X)^-1)^-1 bhat.
///
/// Algebraically identical to [`conditional_posterior`] on full-rank designs.
pub fn posterior_mean_via_mle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    state: &ScaleState,
    omega: &CorrelationMatrix,
) -> Result<DVector<f64>> {
    let xtx = x.transpose() * x;
    let chol = nalgebra::Cholesky::new(xtx.clone()).ok_or(Error::RankDeficient)?;
    let bhat = chol.solve(&(x.transpose() * y));
    let xtx_inv = chol.inverse();
    let prior_cov = prior_covariance_unit_sigma(state, omega);
    let sum = &prior_cov + &xtx_inv;
    let sum_chol = nalgebra::Cholesky::new(sum)
        .ok_or_else(|| Error::NumericalSingularity("prior + (X'X)^-1".into()))?;
    Ok(&prior_cov * sum_chol.solve(&bhat))
}

/// tau^2 D_lambda Omega D_lambda (the coefficient prior covariance at
/// sigma = 1).
pub fn prior_covariance_unit_sigma(state: &ScaleState, omega: &CorrelationMatrix) -> DMatrix<f64> {
    let p = omega.dim();
    let t2 = state.tau * state.tau;
    DMatrix::from_fn(p, p, |i, j| {
        t2 * state.lambda[i] * state.lambda[j] * omega.entries()[(i, j)]
    })
}

/// Difference between the posterior means under Omega and under independence.
pub fn mean_shift(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    state: &ScaleState,
    omega: &CorrelationMatrix,
) -> Result<DVector<f64>> {
    let with = conditional_posterior(x, y, state, omega)?;
    let without = conditional_posterior(x, y, state, &CorrelationMatrix::identity(omega.dim()))?;
    Ok(with.mean - without.mean)
}

/// Two-sided bounds on ||Q_Omega^-1 - Q_I^-1||_2 together with the exact
/// value, at the tau = 1 convention.
#[derive(Debug, Clone)]
pub struct SpectralBoundReport {
    pub lower: f64,
    pub actual: f64,
    pub upper: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub nu_max: f64,
    pub nu_min: f64,
    pub omega_max: f64,
    pub omega_min: f64,
}

/// Bound the spectral norm of the posterior precision difference from the
/// extreme eigenvalues of the three ingredients, and compute the exact norm
/// by an eigensolve of the explicit difference.
pub fn spectral_bounds(
    x: &DMatrix<f64>,
    lambda: &[f64],
    omega: &CorrelationMatrix,
) -> Result<SpectralBoundReport> {
    let p = x.ncols();
    if lambda.len() != p || omega.dim() != p {
        return Err(Error::DimensionMismatch("spectral_bounds inputs".into()));
    }
    let state = ScaleState::new(lambda.to_vec(), 1.0, 1.0)?;
    let xtx = x.transpose() * x;
    let omega_inv = omega_inverse(omega)?;

    let q_omega = q_matrix(&xtx, &state, &omega_inv);
    let q_ident = q_matrix(&xtx, &state, &DMatrix::identity(p, p));
    let inv_omega = linalg::spd_inverse(&q_omega, "Q_Omega")?;
    let inv_ident = linalg::spd_inverse(&q_ident, "Q_I")?;
    let actual = linalg::spectral_norm_sym(&(inv_omega - inv_ident));

    let xtx_eigs = linalg::sym_eigenvalues(&xtx);
    let omega_eigs = linalg::sym_eigenvalues(omega.entries());
    let (nu_min, nu_max) = (xtx_eigs[0].max(0.0), xtx_eigs[p - 1]);
    let (omega_min, omega_max) = (omega_eigs[0], omega_eigs[p - 1]);
    let lambda_max = lambda.iter().cloned().fold(f64::MIN, f64::max);
    let lambda_min = lambda.iter().cloned().fold(f64::MAX, f64::min);

    let dev = linalg::spectral_norm_sym(&(&omega_inv - DMatrix::identity(p, p)));
    let l1s = lambda_max * lambda_max;
    let lps = lambda_min * lambda_min;
    let lower = dev / (l1s * (nu_max + 1.0 / (lps * omega_min)) * (nu_max + 1.0 / lps));
    let upper = dev / (lps * (nu_min + 1.0 / (l1s * omega_max)) * (nu_min + 1.0 / l1s));

    Ok(SpectralBoundReport {
        lower,
        actual,
        upper,
        lambda_max,
        lambda_min,
        nu_max,
        nu_min,
        omega_max,
        omega_min,
    })
}

/// KL divergence between two multivariate normals.
pub fn kl_gaussian(
    mean_p: &DVector<f64>,
    cov_p: &DMatrix<f64>,
    mean_q: &DVector<f64>,
    cov_q: &DMatrix<f64>,
) -> Result<f64> {
    let p = mean_p.len();
    if mean_q.len() != p || cov_p.nrows() != p || cov_q.nrows() != p {
        return Err(Error::DimensionMismatch("kl_gaussian inputs".into()));
    }
    let chol_q = nalgebra::Cholesky::new(cov_q.clone()).ok_or(Error::NonPositiveDefinite {
        min_eigenvalue: linalg::sym_eigenvalues(cov_q)[0],
    })?;
    let chol_p = nalgebra::Cholesky::new(cov_p.clone()).ok_or(Error::NonPositiveDefinite {
        min_eigenvalue: linalg::sym_eigenvalues(cov_p)[0],
    })?;
    let diff = mean_q - mean_p;
    let quad = diff.dot(&chol_q.solve(&diff));
    let trace = chol_q.solve(cov_p).trace();
    let log_det_p = linalg::log_det_from_cholesky(&chol_p);
    let log_det_q = linalg::log_det_from_cholesky(&chol_q);
    Ok(0.5 * (quad + trace - (log_det_p - log_det_q) - p as f64))
}

/// Divergence between the conditional coefficient priors with and without
/// dependence: tr(Omega^-1) + ln|Omega| - p. The scales cancel.
pub fn kl_prior(omega: &CorrelationMatrix) -> Result<f64> {
    let p = omega.dim();
    let chol =
        nalgebra::Cholesky::new(omega.entries().clone()).ok_or(Error::NonPositiveDefinite {
            min_eigenvalue: linalg::sym_eigenvalues(omega.entries())[0],
        })?;
    let trace_inv = chol.inverse().trace();
    let log_det = linalg::log_det_from_cholesky(&chol);
    Ok(trace_inv + log_det - p as f64)
}

/// Matrix-valued shrinkage factor
/// kappa = I - tau^2 D Omega D (tau^2 D Omega D + (X'X)^-1)^-1.
pub fn shrinkage_matrix(
    x: &DMatrix<f64>,
    state: &ScaleState,
    omega: &CorrelationMatrix,
) -> Result<DMatrix<f64>> {
    let p = x.ncols();
    let xtx = x.transpose() * x;
    let chol = nalgebra::Cholesky::new(xtx).ok_or(Error::RankDeficient)?;
    let xtx_inv = chol.inverse();
    let prior_cov = prior_covariance_unit_sigma(state, omega);
    let sum = &prior_cov + &xtx_inv;
    let sum_chol = nalgebra::Cholesky::new(sum)
        .ok_or_else(|| Error::NumericalSingularity("prior + (X'X)^-1".into()))?;
    // kappa = I - prior_cov * (prior_cov + xtx_inv)^-1; solve on the right.
    let applied = sum_chol.solve(&prior_cov.transpose()).transpose();
    Ok(DMatrix::identity(p, p) - applied)
}

/// Effective number of parameters tr(I - kappa).
pub fn effective_parameters(kappa: &DMatrix<f64>) -> f64 {
    kappa.nrows() as f64 - kappa.trace()
}

/// Effective model size for one prior scale draw on the identity design:
/// p - tr((A + I)^-1) with A = tau^2 D Omega D.
fn meff_of_scales(lambda: &[f64], tau: f64, omega: &CorrelationMatrix) -> Result<f64> {
    let p = omega.dim();
    let t2 = tau * tau;
    let a_plus_i = DMatrix::from_fn(p, p, |i, j| {
        let a = t2 * lambda[i] * lambda[j] * omega.entries()[(i, j)];
        if i == j {
            a + 1.0
        } else {
            a
        }
    });
    let chol = nalgebra::Cholesky::new(a_plus_i)
        .ok_or_else(|| Error::NumericalSingularity("A + I".into()))?;
    Ok(p as f64 - chol.inverse().trace())
}

/// Monte Carlo draws of the prior effective model size on the identity
/// design. Draws are partitioned into fixed blocks with derived substreams,
/// so the output is independent of worker count.
pub fn mc_meff_prior(
    prior: &PriorSpec,
    omega: &CorrelationMatrix,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = omega.dim();
    const BLOCK: usize = 256;
    let blocks = n_draws.div_ceil(BLOCK);
    let chunks: Vec<Result<Vec<f64>>> = exec::map_indexed(blocks, |b| {
        let mut rng = substream(seed, StreamTag::McBlock, b as u64, 0);
        let count = BLOCK.min(n_draws - b * BLOCK);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let draw = priors::sample_scales(prior, p, &mut rng);
            let lam: Vec<f64> = draw.lambda.iter().map(|l| l.clamp(1e-8, 1e8)).collect();
            out.push(meff_of_scales(&lam, draw.tau, omega)?);
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(n_draws);
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// Histogram grid for the bivariate prior contours.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub bins: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bins: 200,
            min: -6.0,
            max: 6.0,
        }
    }
}

impl GridSpec {
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !v.is_finite() || v < self.min || v >= self.max {
            return None;
        }
        let w = (self.max - self.min) / self.bins as f64;
        Some(((v - self.min) / w) as usize)
    }

    pub fn center(&self, bin: usize) -> f64 {
        let w = (self.max - self.min) / self.bins as f64;
        self.min + (bin as f64 + 0.5) * w
    }
}

/// Monte Carlo approximation of the bivariate joint marginal prior.
#[derive(Debug, Clone)]
pub struct PriorGrid {
    pub grid: GridSpec,
    /// counts[i][j]: draws falling in bin (i, j) of (b1, b2).
    pub counts: Vec<Vec<u64>>,
    /// Raw coefficient draws, in draw order.
    pub draws: Vec<[f64; 2]>,
}

/// Sample the joint marginal prior of a coefficient pair by integrating the
/// scale ladder by Monte Carlo: draw scales, then b | scales at sigma = 1.
pub fn mc_prior_grid(
    prior: &PriorSpec,
    omega: &CorrelationMatrix,
    n_draws: usize,
    grid: GridSpec,
    seed: u64,
) -> Result<PriorGrid> {
    if omega.dim() != 2 {
        return Err(Error::InvalidParameter(
            "contour grids require a 2x2 dependence matrix".into(),
        ));
    }
    let chol = nalgebra::Cholesky::new(omega.entries().clone())
        .ok_or_else(|| Error::NumericalSingularity("Omega".into()))?;
    let l = chol.l();

    const BLOCK: usize = 4096;
    let blocks = n_draws.div_ceil(BLOCK);
    let chunks: Vec<Vec<[f64; 2]>> = exec::map_indexed(blocks, |bi| {
        let mut rng = substream(seed, StreamTag::McBlock, bi as u64, 0);
        let count = BLOCK.min(n_draws - bi * BLOCK);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let s = priors::sample_scales(prior, 2, &mut rng);
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let u0 = l[(0, 0)] * z0;
            let u1 = l[(1, 0)] * z0 + l[(1, 1)] * z1;
            out.push([
                s.tau * s.lambda[0] * u0,
                s.tau * s.lambda[1] * u1,
            ]);
        }
        out
    });

    let mut draws = Vec::with_capacity(n_draws);
    for c in chunks {
        draws.extend(c);
    }
    let mut counts = vec![vec![0u64; grid.bins]; grid.bins];
    for d in &draws {
        if let (Some(i), Some(j)) = (grid.bin_of(d[0]), grid.bin_of(d[1])) {
            counts[i][j] += 1;
        }
    }
    Ok(PriorGrid {
        grid,
        counts,
        draws,
    })
}

impl PriorGrid {
    /// Histogram of b1 conditional on b2 falling in a window around `b2`.
    /// The window is +/- `tol_frac` of the grid range.
    pub fn conditional_slice(&self, b2: f64, tol_frac: f64) -> Result<Vec<u64>> {
        let tol = tol_frac * (self.grid.max - self.grid.min);
        let selected: Vec<f64> = self
            .draws
            .iter()
            .filter(|d| (d[1] - b2).abs() < tol)
            .map(|d| d[0])
            .collect();
        if selected.len() < 100 {
            return Err(Error::InsufficientDraws {
                needed: 100,
                available: selected.len(),
            });
        }
        let mut hist = vec![0u64; self.grid.bins];
        for v in selected {
            if let Some(b) = self.grid.bin_of(v) {
                hist[b] += 1;
            }
        }
        Ok(hist)
    }

    /// Fraction of draws with |b1 - b2| below `band`.
    pub fn diagonal_band_mass(&self, band: f64) -> f64 {
        let hits = self
            .draws
            .iter()
            .filter(|d| (d[0] - d[1]).abs() < band)
            .count();
        hits as f64 / self.draws.len() as f64
    }
}

/// Draw one multivariate normal vector with covariance
/// sigma^2 tau^2 D Omega D given the Cholesky factor of Omega.
pub fn sample_coefficients<R: Rng>(
    state: &ScaleState,
    omega_chol_l: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let p = state.lambda.len();
    let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
    let u = omega_chol_l * z;
    DVector::from_fn(p, |i, _| state.sigma * state.tau * state.lambda[i] * u[i])
}
