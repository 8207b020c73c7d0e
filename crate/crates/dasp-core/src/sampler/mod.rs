//! Blocked Gibbs sampler for the linear model under any shrinkage prior,
//! with or without a coefficient dependence matrix.
//!
//! The coefficient block is conjugate: b | rest is multivariate normal with
//! precision proportional to Q = X'X + tau^-2 D^-1 Omega^-1 D^-1 and is drawn
//! exactly through one Cholesky factorization per iteration. The intercept
//! has a flat prior and a conjugate normal update, sigma moves by adaptive
//! random-walk Metropolis on the log scale, and all scale latents are updated
//! by univariate slice sampling (see [`kinds`]).
//!
//! Chains are independent; each derives its RNG substream from
//! (seed, chain index), so a run is bit-reproducible and indifferent to how
//! chains are scheduled.

mod diagnostics;
mod kinds;
mod slice;

pub use diagnostics::{ess, rhat};
pub use slice::slice_sample_log;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytics::q_matrix;
use crate::analytics::ScaleState;
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::omega::OmegaSpec;
use crate::priors::{self, dens, PriorSpec};
use crate::rng::{substream, StreamTag};
use crate::sim::RegressionDataset;

/// Numerical floor applied to local scales before forming D_lambda^-1.
pub const LAMBDA_FLOOR: f64 = 1e-8;
pub const LAMBDA_CEIL: f64 = 1e8;

/// Clamp the scale state during sampling: every latent is held at the given
/// values and only the coefficient block is drawn. Used to check the sampler
/// against the closed-form conditional posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedScales {
    pub lambda: Vec<f64>,
    pub tau: f64,
    pub sigma: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub thin: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fixed_scales: Option<FixedScales>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            draws: 1000,
            seed: 0,
            thin: 1,
            fixed_scales: None,
        }
    }
}

/// Per-chain retained draws.
#[derive(Debug, Clone)]
pub struct ChainDraws {
    /// draws x p coefficient draws.
    pub b: Vec<Vec<f64>>,
    /// draws x p effective local scales.
    pub lambda: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    pub intercept: Vec<f64>,
    /// draws x n pointwise log likelihood.
    pub log_lik: Vec<Vec<f64>>,
}

/// Echo of every effective setting of a fit, enough to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitManifest {
    pub prior_kind: String,
    pub hyperparameters: Vec<(String, f64)>,
    pub omega_mode: String,
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub thin: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub fixed_scales: bool,
    /// Iterations x coordinates where the numerical floor on lambda was hit.
    pub lambda_floor_hits: u64,
    pub sigma_accept_rate: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub n: usize,
    pub p: usize,
    pub chains: Vec<ChainDraws>,
    pub manifest: FitManifest,
}

impl PosteriorDraws {
    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.b.len()).sum()
    }

    /// Pooled draws of coefficient k across chains, chain-major order.
    pub fn b_pooled(&self, k: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.b.iter().map(move |row| row[k]))
            .collect()
    }

    /// Per-chain draws of coefficient k.
    pub fn b_chains(&self, k: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.b.iter().map(|row| row[k]).collect())
            .collect()
    }

    pub fn scalar_chains(&self, which: ScalarParam) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| match which {
                ScalarParam::Sigma => c.sigma.clone(),
                ScalarParam::Tau => c.tau.clone(),
                ScalarParam::Intercept => c.intercept.clone(),
            })
            .collect()
    }

    pub fn posterior_mean_b(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.p);
        let mut count = 0.0;
        for c in &self.chains {
            for row in &c.b {
                for (k, v) in row.iter().enumerate() {
                    acc[k] += v;
                }
                count += 1.0;
            }
        }
        acc / count
    }

    /// Visit every retained draw as (b, intercept, sigma), chain-major.
    pub fn for_each_draw(&self, mut f: impl FnMut(&[f64], f64, f64)) {
        for c in &self.chains {
            for (i, row) in c.b.iter().enumerate() {
                f(row, c.intercept[i], c.sigma[i]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ScalarParam {
    Sigma,
    Tau,
    Intercept,
}

/// Convergence summary over all monitored parameters.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub parameter: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    /// Chains with a zero-variance monitored parameter (the Gibbs analogue
    /// of a divergence flag).
    pub stuck_chains: usize,
}

struct ChainResult {
    draws: ChainDraws,
    floor_hits: u64,
    sigma_accepted: u64,
    sigma_proposed: u64,
}

fn sd(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// Posterior inference for `dataset` under `prior` with dependence built
/// from `omega_spec`.
pub fn fit(
    dataset: &RegressionDataset,
    prior: &PriorSpec,
    omega_spec: &OmegaSpec,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    let x = &dataset.x;
    let y = &dataset.y;
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch("response length".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2 observations".into()));
    }
    if config.chains == 0 || config.draws == 0 || config.thin == 0 {
        return Err(Error::InvalidParameter(
            "chains, draws and thin must be positive".into(),
        ));
    }
    if let Some(fx) = &config.fixed_scales {
        if fx.lambda.len() != p {
            return Err(Error::DimensionMismatch("fixed_scales.lambda".into()));
        }
    }

    let mut warnings = Vec::new();
    if config.draws < 100 {
        warnings.push(format!(
            "only {} retained draws per chain; diagnostics will be unreliable",
            config.draws
        ));
    }

    let omega = crate::omega::build_omega(x, omega_spec)?;
    let omega_inv = linalg::spd_inverse(omega.entries(), "Omega")
        .map_err(|_| Error::NumericalSingularity("Omega inverse".into()))?;
    let xtx = x.transpose() * x;

    let results: Vec<Result<ChainResult>> = exec::map_indexed(config.chains, |chain| {
        run_chain(
            x, y, &xtx, &omega_inv, prior, config, chain as u64,
        )
    });

    let mut chains = Vec::with_capacity(config.chains);
    let mut floor_hits = 0;
    let mut acc = 0;
    let mut prop = 0;
    for r in results {
        let r = r?;
        floor_hits += r.floor_hits;
        acc += r.sigma_accepted;
        prop += r.sigma_proposed;
        chains.push(r.draws);
    }

    let manifest = FitManifest {
        prior_kind: prior.kind.to_string(),
        hyperparameters: prior.echo(),
        omega_mode: omega_spec.mode().to_string(),
        chains: config.chains,
        warmup: config.warmup,
        draws: config.draws,
        thin: config.thin,
        seed: config.seed,
        n,
        p,
        fixed_scales: config.fixed_scales.is_some(),
        lambda_floor_hits: floor_hits,
        sigma_accept_rate: if prop > 0 {
            acc as f64 / prop as f64
        } else {
            f64::NAN
        },
        warnings,
    };

    Ok(PosteriorDraws {
        n,
        p,
        chains,
        manifest,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    xtx: &DMatrix<f64>,
    omega_inv: &DMatrix<f64>,
    prior: &PriorSpec,
    config: &McmcConfig,
    chain: u64,
) -> Result<ChainResult> {
    let (n, p) = (x.nrows(), x.ncols());
    let mut rng = substream(config.seed, StreamTag::Chain, chain, 0);

    let fixed = config.fixed_scales.as_ref();
    let mut state = match fixed {
        Some(_) => None,
        None => {
            let draw = priors::sample_scales(prior, p, &mut rng);
            Some(kinds::KindState::init(&draw))
        }
    };

    let mut sigma = fixed.map(|f| f.sigma).unwrap_or_else(|| sd(y).max(1e-6));
    let mut alpha = fixed.map(|f| f.intercept).unwrap_or_else(|| y.mean());
    let mut b: DVector<f64>;

    // Adaptive random-walk step for log sigma.
    let mut sigma_step = 0.3_f64;
    let mut sigma_accepted = 0u64;
    let mut sigma_proposed = 0u64;
    let mut floor_hits = 0u64;

    let total_iters = config.warmup + config.draws * config.thin;
    let mut out = ChainDraws {
        b: Vec::with_capacity(config.draws),
        lambda: Vec::with_capacity(config.draws),
        tau: Vec::with_capacity(config.draws),
        sigma: Vec::with_capacity(config.draws),
        intercept: Vec::with_capacity(config.draws),
        log_lik: Vec::with_capacity(config.draws),
    };

    for iter in 0..total_iters {
        let adapt = iter < config.warmup;

        let (lambda_eff, tau) = match (fixed, &state) {
            (Some(f), _) => (f.lambda.clone(), f.tau),
            (None, Some(st)) => {
                let eff = st.effective();
                (eff.lambda, eff.tau)
            }
            _ => unreachable!(),
        };
        let mut lambda_sys = lambda_eff.clone();
        for l in &mut lambda_sys {
            let clamped = l.clamp(LAMBDA_FLOOR, LAMBDA_CEIL);
            if clamped != *l {
                floor_hits += 1;
            }
            *l = clamped;
        }

        // Conjugate coefficient block.
        let sys_state = ScaleState::new(lambda_sys, tau, sigma)?;
        let q = q_matrix(xtx, &sys_state, omega_inv);
        let chol = nalgebra::Cholesky::new(q).ok_or_else(|| {
            Error::NumericalSingularity(format!(
                "Q factorization failed at iteration {iter} of chain {chain}"
            ))
        })?;
        let y_c = DVector::from_fn(n, |i, _| y[i] - alpha);
        let mean = chol.solve(&(x.transpose() * &y_c));
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let scaled = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NumericalSingularity("triangular solve".into()))?;
        b = &mean + scaled * sigma;

        if fixed.is_none() {
            // Intercept under a flat prior.
            let resid_mean = (y - x * &b).mean();
            let z: f64 = StandardNormal.sample(&mut rng);
            alpha = resid_mean + sigma / (n as f64).sqrt() * z;

            // sigma by Metropolis on the log scale; the coefficient prior
            // carries sigma^2 as well, hence the extra p log terms.
            let resid = y - x * &b - DVector::from_element(n, alpha);
            let rss = resid.norm_squared();
            let st = state.as_ref().unwrap();
            let eff = st.effective();
            let u = DVector::from_fn(p, |j, _| b[j] / eff.lambda[j].clamp(LAMBDA_FLOOR, LAMBDA_CEIL));
            let quad = u.dot(&(omega_inv * &u)) / (eff.tau * eff.tau);
            let np = (n + p) as f64;
            let log_target = |s_log: f64| -> f64 {
                if s_log.abs() > 30.0 {
                    return f64::NEG_INFINITY;
                }
                let s = s_log.exp();
                let prior_term = match dens::ln_half_student_t(
                    s,
                    prior.sigma_prior.nu,
                    prior.sigma_prior.eta,
                ) {
                    Ok(v) => v,
                    Err(_) => return f64::NEG_INFINITY,
                };
                prior_term + s_log - np * s_log - (rss + quad) / (2.0 * s * s)
            };
            let cur = sigma.ln();
            let zs: f64 = StandardNormal.sample(&mut rng);
            let cand = cur + sigma_step * zs;
            let log_ratio = log_target(cand) - log_target(cur);
            sigma_proposed += 1;
            let accepted = rng.gen::<f64>().ln() < log_ratio;
            if accepted {
                sigma = cand.exp();
                sigma_accepted += 1;
            }
            if adapt {
                let gamma = ((iter + 1) as f64).powf(-0.6);
                let a = if accepted { 1.0 } else { 0.0 };
                sigma_step = (sigma_step * ((a - 0.44) * gamma).exp()).clamp(1e-3, 10.0);
            }

            // Scale latents.
            state
                .as_mut()
                .unwrap()
                .sweep(&b, sigma, omega_inv, prior, adapt, &mut rng);
        }

        if iter >= config.warmup && (iter - config.warmup) % config.thin == 0 {
            let (lambda_now, tau_now) = match (fixed, &state) {
                (Some(f), _) => (f.lambda.clone(), f.tau),
                (None, Some(st)) => {
                    let eff = st.effective();
                    (eff.lambda, eff.tau)
                }
                _ => unreachable!(),
            };
            let fitted = x * &b;
            let ll: Vec<f64> = (0..n)
                .map(|i| dens::ln_normal(y[i], alpha + fitted[i], sigma))
                .collect();
            out.b.push(b.iter().copied().collect());
            out.lambda.push(lambda_now);
            out.tau.push(tau_now);
            out.sigma.push(sigma);
            out.intercept.push(alpha);
            out.log_lik.push(ll);
        }
    }

    Ok(ChainResult {
        draws: out,
        floor_hits,
        sigma_accepted,
        sigma_proposed,
    })
}

/// Convergence diagnostics over coefficients, sigma, tau and the intercept.
pub fn diagnostics(draws: &PosteriorDraws) -> Result<Diagnostics> {
    let mut parameter = Vec::new();
    let mut rhats = Vec::new();
    let mut esses = Vec::new();

    let mut push = |name: String, chains: Vec<Vec<f64>>| -> Result<()> {
        rhats.push(rhat(&chains)?);
        esses.push(ess(&chains)?);
        parameter.push(name);
        Ok(())
    };

    for k in 0..draws.p {
        push(format!("b[{k}]"), draws.b_chains(k))?;
    }
    push("sigma".into(), draws.scalar_chains(ScalarParam::Sigma))?;
    push("tau".into(), draws.scalar_chains(ScalarParam::Tau))?;
    push(
        "intercept".into(),
        draws.scalar_chains(ScalarParam::Intercept),
    )?;

    let mut stuck = 0;
    for c in &draws.chains {
        let constant = |v: &Vec<f64>| v.windows(2).all(|w| w[0] == w[1]);
        let b_stuck = (0..draws.p).any(|k| {
            let col: Vec<f64> = c.b.iter().map(|row| row[k]).collect();
            constant(&col)
        });
        if b_stuck || constant(&c.sigma) {
            stuck += 1;
        }
    }

    Ok(Diagnostics {
        parameter,
        rhat: rhats,
        ess_bulk: esses,
        stuck_chains: stuck,
    })
}
