//! Shrinkage prior hierarchies: defaults, prior sampling and log densities.
//!
//! Each hierarchy is reduced to the common scale form used by the rest of the
//! crate: effective local scales lambda entering D_lambda and an effective
//! global scale tau, so the conditional coefficient prior is always
//! N(0, sigma^2 tau^2 D_lambda Omega D_lambda). Conventions per kind:
//!
//! * `hs`   - lambda_j ~ C+(0,1), tau ~ C+(0,1).
//! * `rhs`  - regularized horseshoe: raw lambda_j ~ C+(0,1), tau ~ C+(0,tau0),
//!   slab c^2 ~ InvGamma(c2_shape, c2_scale); effective
//!   lambda_j^2 = c^2 lambda_j^2 / (c^2 + tau^2 lambda_j^2).
//! * `dl`   - psi_j ~ Exp(1/2), phi ~ Dirichlet(a_pi), tau ~ Gamma(n a_pi, 1/2);
//!   effective lambda_j = sqrt(psi_j) phi_j.
//! * `ng`   - psi_j^2 ~ Gamma(shape, shape/nu), nu ~ InvGamma(2, M),
//!   shape ~ Exp(1); effective lambda_j = psi_j, tau = 1.
//! * `bp`   - lambda_j^2 ~ BetaPrime(alpha, beta), alpha ~ Gamma(1, 2) on
//!   (0, alpha_max]; tau = 1.
//! * `r2d2` - phi ~ Dirichlet(a_pi), omega^2 ~ BetaPrime(a1, a2); effective
//!   lambda_j = sqrt(phi_j omega^2), tau = 1.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Cauchy, Distribution, Exp, Gamma, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod dens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Bp,
    Dl,
    Hs,
    Rhs,
    Ng,
    R2d2,
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Bp => "bp",
            Self::Dl => "dl",
            Self::Hs => "hs",
            Self::Rhs => "rhs",
            Self::Ng => "ng",
            Self::R2d2 => "r2d2",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(Self::Bp),
            "dl" => Ok(Self::Dl),
            "hs" => Ok(Self::Hs),
            "rhs" => Ok(Self::Rhs),
            "ng" => Ok(Self::Ng),
            "r2d2" | "d2" => Ok(Self::R2d2),
            other => Err(Error::InvalidParameter(format!(
                "unknown prior kind '{other}'"
            ))),
        }
    }
}

/// Half Student-t prior on the residual scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfStudentT {
    pub nu: f64,
    pub eta: f64,
}

/// Kind-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum KindParams {
    Bp {
        /// Shape/rate of the Gamma hyperprior on alpha.
        alpha_shape: f64,
        alpha_rate: f64,
        /// Upper bound keeping the marginal heavy-tailed.
        alpha_max: f64,
        beta: f64,
        /// Pin alpha instead of sampling it.
        alpha_fixed: Option<f64>,
    },
    Dl {
        a_pi: f64,
        tau_shape: f64,
        tau_rate: f64,
    },
    Hs {},
    Rhs {
        tau0: f64,
        c2_shape: f64,
        c2_scale: f64,
    },
    Ng {
        m: f64,
    },
    R2d2 {
        a_pi: f64,
        a1: f64,
        a2: f64,
    },
}

/// A fully resolved shrinkage prior for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub params: KindParams,
    pub sigma_prior: HalfStudentT,
}

/// One exact draw from a prior ladder, latent layers included.
#[derive(Debug, Clone)]
pub struct ScaleDraw {
    /// Effective local scales entering D_lambda.
    pub lambda: Vec<f64>,
    /// Effective global scale.
    pub tau: f64,
    pub aux: AuxDraw,
}

#[derive(Debug, Clone)]
pub enum AuxDraw {
    Bp { lambda2: Vec<f64>, alpha: f64 },
    Dl { psi: Vec<f64>, phi: Vec<f64>, tau: f64 },
    Hs { lambda_raw: Vec<f64>, tau: f64 },
    Rhs { lambda_raw: Vec<f64>, tau: f64, c2: f64 },
    Ng { psi2: Vec<f64>, shape: f64, nu: f64 },
    R2d2 { phi: Vec<f64>, omega2: f64 },
}

fn sample_sd(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    var.sqrt()
}

/// Minimum-norm least squares solution: the MLE when X'X is invertible, the
/// shortest solution of the normal equations otherwise.
pub fn least_squares_min_norm(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    if n >= p {
        if let Some(chol) = nalgebra::Cholesky::new(x.transpose() * x) {
            return chol.solve(&(x.transpose() * y));
        }
    } else if let Some(chol) = nalgebra::Cholesky::new(x * x.transpose()) {
        return x.transpose() * chol.solve(y);
    }
    // Rank-deficient fallback.
    x.clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .expect("svd solve")
}

/// Default hyperparameters for a kind, resolved against the data at hand.
pub fn default_spec(
    kind: PriorKind,
    n: usize,
    p: usize,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
) -> PriorSpec {
    let eta = sample_sd(y).max(1e-12);
    let sigma_prior = HalfStudentT { nu: 3.0, eta };
    let params = match kind {
        PriorKind::Bp => KindParams::Bp {
            alpha_shape: 1.0,
            alpha_rate: 2.0,
            alpha_max: 0.5,
            beta: 1.0,
            alpha_fixed: None,
        },
        PriorKind::Dl => {
            let a_pi = 0.5;
            KindParams::Dl {
                a_pi,
                tau_shape: n as f64 * a_pi,
                tau_rate: 0.5,
            }
        }
        PriorKind::Hs => KindParams::Hs {},
        PriorKind::Rhs => {
            let p0 = (p as f64 / 10.0).max(1.0);
            let denom = (p as f64 - p0).max(1.0);
            KindParams::Rhs {
                tau0: p0 / (denom * (n as f64).sqrt()),
                c2_shape: 2.0,
                c2_scale: 8.0,
            }
        }
        PriorKind::Ng => {
            let bhat = least_squares_min_norm(x, y);
            let m = (bhat.iter().map(|b| b * b).sum::<f64>() / p as f64).max(1e-12);
            KindParams::Ng { m }
        }
        PriorKind::R2d2 => {
            let a_pi = 0.25;
            KindParams::R2d2 {
                a_pi,
                a1: p as f64 * a_pi,
                a2: 0.5,
            }
        }
    };
    PriorSpec {
        kind,
        params,
        sigma_prior,
    }
}

impl PriorSpec {
    /// Override one hyperparameter by name (CLI `--set key=value`).
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let unknown = || {
            Err(Error::InvalidParameter(format!(
                "prior {} has no hyperparameter '{key}'",
                self.kind
            )))
        };
        match (&mut self.params, key) {
            (_, "sigma.nu") => self.sigma_prior.nu = value,
            (_, "sigma.eta") => self.sigma_prior.eta = value,
            (KindParams::Bp { alpha_fixed, .. }, "alpha") => *alpha_fixed = Some(value),
            (KindParams::Bp { alpha_max, .. }, "alpha_max") => *alpha_max = value,
            (KindParams::Bp { beta, .. }, "beta") => *beta = value,
            (KindParams::Dl { a_pi, tau_shape, .. }, "a_pi") => {
                let n_eff = *tau_shape / *a_pi;
                *a_pi = value;
                *tau_shape = n_eff * value;
            }
            (KindParams::Dl { tau_shape, .. }, "tau_shape") => *tau_shape = value,
            (KindParams::Dl { tau_rate, .. }, "tau_rate") => *tau_rate = value,
            (KindParams::Rhs { tau0, .. }, "tau0") => *tau0 = value,
            (KindParams::Rhs { c2_shape, .. }, "c2_shape") => *c2_shape = value,
            (KindParams::Rhs { c2_scale, .. }, "c2_scale") => *c2_scale = value,
            (KindParams::Ng { m }, "m") => *m = value,
            (KindParams::R2d2 { a_pi, .. }, "a_pi") => *a_pi = value,
            (KindParams::R2d2 { a1, .. }, "a1") => *a1 = value,
            (KindParams::R2d2 { a2, .. }, "a2") => *a2 = value,
            _ => return unknown(),
        }
        Ok(())
    }

    /// Effective hyperparameters for the run manifest.
    pub fn echo(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("sigma.nu".to_string(), self.sigma_prior.nu),
            ("sigma.eta".to_string(), self.sigma_prior.eta),
        ];
        match &self.params {
            KindParams::Bp {
                alpha_shape,
                alpha_rate,
                alpha_max,
                beta,
                alpha_fixed,
            } => {
                out.push(("alpha_shape".into(), *alpha_shape));
                out.push(("alpha_rate".into(), *alpha_rate));
                out.push(("alpha_max".into(), *alpha_max));
                out.push(("beta".into(), *beta));
                if let Some(a) = alpha_fixed {
                    out.push(("alpha".into(), *a));
                }
            }
            KindParams::Dl {
                a_pi,
                tau_shape,
                tau_rate,
            } => {
                out.push(("a_pi".into(), *a_pi));
                out.push(("tau_shape".into(), *tau_shape));
                out.push(("tau_rate".into(), *tau_rate));
            }
            KindParams::Hs {} => {}
            KindParams::Rhs {
                tau0,
                c2_shape,
                c2_scale,
            } => {
                out.push(("tau0".into(), *tau0));
                out.push(("c2_shape".into(), *c2_shape));
                out.push(("c2_scale".into(), *c2_scale));
            }
            KindParams::Ng { m } => out.push(("m".into(), *m)),
            KindParams::R2d2 { a_pi, a1, a2 } => {
                out.push(("a_pi".into(), *a_pi));
                out.push(("a1".into(), *a1));
                out.push(("a2".into(), *a2));
            }
        }
        out
    }
}

fn half_cauchy<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    let c = Cauchy::new(0.0, scale).expect("cauchy scale");
    loop {
        let v: f64 = c.sample(rng).abs();
        if v.is_finite() && v > 0.0 {
            return v;
        }
    }
}

fn gamma_rate<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("gamma params").sample(rng)
}

fn inv_gamma<R: Rng>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    1.0 / gamma_rate(shape, scale, rng).max(f64::MIN_POSITIVE)
}

fn beta_prime<R: Rng>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = Beta::new(a, b).expect("beta params").sample(rng);
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
    u / (1.0 - u)
}

/// Dirichlet(a, ..., a) via normalized i.i.d. gammas.
///
/// The largest component is swapped to the last slot (the vector is
/// exchangeable) and assigned the residual 1 - sum(rest), so the weights sum
/// to exactly 1.0 when added in index order.
fn dirichlet_symmetric<R: Rng>(a: f64, p: usize, rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = (0..p).map(|_| gamma_rate(a, 1.0, rng).max(1e-300)).collect();
    let argmax = g
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    g.swap(argmax, p - 1);
    let total: f64 = g.iter().sum();
    let mut phi: Vec<f64> = g.iter().map(|v| v / total).collect();
    let partial: f64 = phi[..p - 1].iter().sum();
    phi[p - 1] = 1.0 - partial;
    phi
}

/// Draw sigma from its half Student-t prior.
pub fn sample_sigma<R: Rng>(prior: &HalfStudentT, rng: &mut R) -> f64 {
    let t = StudentT::new(prior.nu).expect("HalfStudentT nu");
    loop {
        let v: f64 = t.sample(rng);
        let s = v.abs() * prior.eta;
        if s.is_finite() && s > 0.0 {
            return s;
        }
    }
}

/// One exact draw of the scale ladder of `spec` for dimension `p`.
pub fn sample_scales<R: Rng>(spec: &PriorSpec, p: usize, rng: &mut R) -> ScaleDraw {
    match &spec.params {
        KindParams::Hs {} => {
            let lambda_raw: Vec<f64> = (0..p).map(|_| half_cauchy(1.0, rng)).collect();
            let tau = half_cauchy(1.0, rng);
            ScaleDraw {
                lambda: lambda_raw.clone(),
                tau,
                aux: AuxDraw::Hs { lambda_raw, tau },
            }
        }
        KindParams::Rhs {
            tau0,
            c2_shape,
            c2_scale,
        } => {
            let lambda_raw: Vec<f64> = (0..p).map(|_| half_cauchy(1.0, rng)).collect();
            let tau = half_cauchy(*tau0, rng);
            let c2 = inv_gamma(*c2_shape, *c2_scale, rng);
            let lambda = lambda_raw
                .iter()
                .map(|&l| (c2 * l * l / (c2 + tau * tau * l * l)).sqrt())
                .collect();
            ScaleDraw {
                lambda,
                tau,
                aux: AuxDraw::Rhs {
                    lambda_raw,
                    tau,
                    c2,
                },
            }
        }
        KindParams::Dl {
            a_pi,
            tau_shape,
            tau_rate,
        } => {
            let psi: Vec<f64> = (0..p).map(|_| gamma_rate(1.0, 0.5, rng)).collect();
            let phi = dirichlet_symmetric(*a_pi, p, rng);
            let tau = gamma_rate(*tau_shape, *tau_rate, rng);
            let lambda = psi
                .iter()
                .zip(&phi)
                .map(|(&ps, &ph)| ps.sqrt() * ph)
                .collect();
            ScaleDraw {
                lambda,
                tau,
                aux: AuxDraw::Dl { psi, phi, tau },
            }
        }
        KindParams::Ng { m } => {
            let shape: f64 = Exp::new(1.0).unwrap().sample(rng);
            let shape = shape.max(1e-8);
            let nu = inv_gamma(2.0, *m, rng);
            let psi2: Vec<f64> = (0..p)
                .map(|_| gamma_rate(shape, shape / nu, rng).max(1e-300))
                .collect();
            let lambda = psi2.iter().map(|v| v.sqrt()).collect();
            ScaleDraw {
                lambda,
                tau: 1.0,
                aux: AuxDraw::Ng { psi2, shape, nu },
            }
        }
        KindParams::Bp {
            alpha_shape,
            alpha_rate,
            alpha_max,
            beta,
            alpha_fixed,
        } => {
            let alpha = alpha_fixed.unwrap_or_else(|| loop {
                let a = gamma_rate(*alpha_shape, *alpha_rate, rng);
                if a > 0.0 && a <= *alpha_max {
                    break a;
                }
            });
            let lambda2: Vec<f64> = (0..p).map(|_| beta_prime(alpha, *beta, rng)).collect();
            let lambda = lambda2.iter().map(|v| v.sqrt()).collect();
            ScaleDraw {
                lambda,
                tau: 1.0,
                aux: AuxDraw::Bp { lambda2, alpha },
            }
        }
        KindParams::R2d2 { a_pi, a1, a2 } => {
            let phi = dirichlet_symmetric(*a_pi, p, rng);
            let omega2 = beta_prime(*a1, *a2, rng);
            let lambda = phi.iter().map(|&ph| (ph * omega2).sqrt()).collect();
            ScaleDraw {
                lambda,
                tau: 1.0,
                aux: AuxDraw::R2d2 { phi, omega2 },
            }
        }
    }
}

/// Joint log density of all latent layers of a draw plus the sigma prior,
/// up to additive constants that do not depend on the latents.
pub fn log_prior_density(spec: &PriorSpec, draw: &ScaleDraw, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::OutOfSupport(format!("sigma = {sigma}")));
    }
    let mut total = dens::ln_half_student_t(sigma, spec.sigma_prior.nu, spec.sigma_prior.eta)?;
    match (&spec.params, &draw.aux) {
        (KindParams::Hs {}, AuxDraw::Hs { lambda_raw, tau }) => {
            for &l in lambda_raw {
                total += dens::ln_half_cauchy(l, 1.0)?;
            }
            total += dens::ln_half_cauchy(*tau, 1.0)?;
        }
        (
            KindParams::Rhs {
                tau0,
                c2_shape,
                c2_scale,
            },
            AuxDraw::Rhs {
                lambda_raw,
                tau,
                c2,
            },
        ) => {
            for &l in lambda_raw {
                total += dens::ln_half_cauchy(l, 1.0)?;
            }
            total += dens::ln_half_cauchy(*tau, *tau0)?;
            total += dens::ln_inv_gamma(*c2, *c2_shape, *c2_scale)?;
        }
        (
            KindParams::Dl {
                a_pi,
                tau_shape,
                tau_rate,
            },
            AuxDraw::Dl { psi, phi, tau },
        ) => {
            for &ps in psi {
                total += dens::ln_exp(ps, 0.5)?;
            }
            total += dens::ln_dirichlet_symmetric(phi, *a_pi)?;
            total += dens::ln_gamma_pdf(*tau, *tau_shape, *tau_rate)?;
        }
        (KindParams::Ng { m }, AuxDraw::Ng { psi2, shape, nu }) => {
            for &p2 in psi2 {
                total += dens::ln_gamma_pdf(p2, *shape, *shape / *nu)?;
            }
            total += dens::ln_exp(*shape, 1.0)?;
            total += dens::ln_inv_gamma(*nu, 2.0, *m)?;
        }
        (
            KindParams::Bp {
                alpha_shape,
                alpha_rate,
                alpha_max,
                beta,
                ..
            },
            AuxDraw::Bp { lambda2, alpha },
        ) => {
            if !(*alpha > 0.0 && *alpha <= *alpha_max) {
                return Err(Error::OutOfSupport(format!(
                    "alpha = {alpha} outside (0, {alpha_max}]"
                )));
            }
            for &l2 in lambda2 {
                total += dens::ln_beta_prime(l2, *alpha, *beta)?;
            }
            total += dens::ln_gamma_pdf(*alpha, *alpha_shape, *alpha_rate)?;
        }
        (KindParams::R2d2 { a_pi, a1, a2 }, AuxDraw::R2d2 { phi, omega2 }) => {
            total += dens::ln_dirichlet_symmetric(phi, *a_pi)?;
            total += dens::ln_beta_prime(*omega2, *a1, *a2)?;
        }
        _ => {
            return Err(Error::InvalidParameter(
                "scale draw does not match prior kind".into(),
            ))
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteTarget("log prior density".into()));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamTag};
    use approx::assert_abs_diff_eq;

    fn toy_data(n: usize, p: usize) -> (DVector<f64>, DMatrix<f64>) {
        let y = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin() * 2.0);
        let x = DMatrix::from_fn(n, p, |i, j| ((i * p + j) as f64 * 0.3).cos());
        (y, x)
    }

    #[test]
    fn dl_default_tau_shape_tracks_sample_size() {
        let (y, x) = toy_data(100, 4);
        let spec = default_spec(PriorKind::Dl, 100, 4, &y, &x);
        match spec.params {
            KindParams::Dl {
                tau_shape,
                tau_rate,
                ..
            } => {
                assert_eq!(tau_shape, 50.0);
                assert_eq!(tau_rate, 0.5);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn hs_has_no_tunables_beyond_sigma() {
        let (y, x) = toy_data(10, 3);
        let spec = default_spec(PriorKind::Hs, 10, 3, &y, &x);
        assert_eq!(spec.echo().len(), 2);
    }

    #[test]
    fn ng_m_is_mean_square_of_identity_design_mle() {
        // With X = I the MLE is y itself.
        let p = 6;
        let y = DVector::from_fn(p, |i, _| i as f64 + 1.0);
        let x = DMatrix::identity(p, p);
        let spec = default_spec(PriorKind::Ng, p, p, &y, &x);
        let expect = y.iter().map(|v| v * v).sum::<f64>() / p as f64;
        match spec.params {
            KindParams::Ng { m } => assert_abs_diff_eq!(m, expect, epsilon = 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn simplex_weights_sum_to_one_exactly() {
        let mut rng = substream(7, StreamTag::PriorSample, 0, 0);
        for _ in 0..2000 {
            let phi = dirichlet_symmetric(0.25, 40, &mut rng);
            let total: f64 = phi.iter().sum();
            assert_eq!(total, 1.0);
            assert!(phi.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn dl_draw_support() {
        let (y, x) = toy_data(20, 8);
        let spec = default_spec(PriorKind::Dl, 20, 8, &y, &x);
        let mut rng = substream(3, StreamTag::PriorSample, 0, 0);
        for _ in 0..200 {
            let d = sample_scales(&spec, 8, &mut rng);
            match &d.aux {
                AuxDraw::Dl { psi, phi, tau } => {
                    assert!(psi.iter().all(|&v| v > 0.0));
                    assert_eq!(phi.iter().sum::<f64>(), 1.0);
                    assert!(*tau > 0.0);
                }
                _ => unreachable!(),
            }
            assert!(d.lambda.iter().all(|&v| v > 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn hs_lambda_median_is_one() {
        let (y, x) = toy_data(10, 1);
        let spec = default_spec(PriorKind::Hs, 10, 1, &y, &x);
        let mut rng = substream(11, StreamTag::PriorSample, 0, 0);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_scales(&spec, 1, &mut rng).lambda[0])
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = draws[draws.len() / 2];
        assert!((median - 1.0).abs() < 0.02, "median {median}");
    }

    #[test]
    fn half_cauchy_log_density_at_one() {
        let v = dens::ln_half_cauchy(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, (1.0 / std::f64::consts::PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn gamma_log_density_peaks_at_mode() {
        // Gamma(50, rate 1/2): mode at (50 - 1)/0.5 = 98.
        let at_mode = dens::ln_gamma_pdf(98.0, 50.0, 0.5).unwrap();
        for x in [60.0, 80.0, 90.0, 97.0, 99.0, 110.0, 140.0] {
            assert!(dens::ln_gamma_pdf(x, 50.0, 0.5).unwrap() < at_mode);
        }
    }

    #[test]
    fn out_of_support_rejected() {
        assert!(dens::ln_half_cauchy(0.0, 1.0).is_err());
        assert!(dens::ln_half_cauchy(-1.0, 1.0).is_err());
        assert!(dens::ln_gamma_pdf(-2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sigma_prior_scales_with_eta() {
        let median = |eta: f64| {
            let prior = HalfStudentT { nu: 3.0, eta };
            let mut rng = substream(5, StreamTag::PriorSample, 0, 0);
            let mut draws: Vec<f64> = (0..100_000).map(|_| sample_sigma(&prior, &mut rng)).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            draws[draws.len() / 2]
        };
        let m1 = median(1.0);
        let m2 = median(2.0);
        assert!((m2 / m1 - 2.0).abs() < 0.04, "ratio {}", m2 / m1);
        assert!(m1 > 0.0);
    }

    #[test]
    fn log_prior_density_is_finite_for_sampled_draws() {
        let (y, x) = toy_data(30, 6);
        for kind in [
            PriorKind::Bp,
            PriorKind::Dl,
            PriorKind::Hs,
            PriorKind::Rhs,
            PriorKind::Ng,
            PriorKind::R2d2,
        ] {
            let spec = default_spec(kind, 30, 6, &y, &x);
            let mut rng = substream(9, StreamTag::PriorSample, kind as u64, 0);
            for _ in 0..100 {
                let d = sample_scales(&spec, 6, &mut rng);
                let lp = log_prior_density(&spec, &d, 1.3).unwrap();
                assert!(lp.is_finite(), "{kind}: {lp}");
            }
        }
    }
}
