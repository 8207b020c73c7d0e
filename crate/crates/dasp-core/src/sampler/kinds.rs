//! Scale updates for each prior hierarchy inside the Gibbs sweep.
//!
//! Given the coefficient block b and sigma, every latent scale is updated by
//! univariate slice sampling on the log scale against
//!
//!   log p(latent) - sum_j ln lambda_j - u' Omega^-1 u / (2 sigma^2 tau^2),
//!
//! with u_j = b_j / lambda_j. Coordinate moves only touch one entry of u (or
//! of a rescaled w for the simplex-backed kinds), so each candidate
//! evaluation costs O(1) given cached products with Omega^-1; hyperlatents
//! one level up (alpha for the beta-prime kind, the shape and nu for the
//! normal-gamma kind) use random-walk Metropolis with cached sufficient
//! statistics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::priors::dens;
use crate::priors::{AuxDraw, KindParams, PriorSpec, ScaleDraw};

use super::slice::slice_sample_log;

/// Hard window for log-scale slice positions; the numerical floor for the
/// system matrix is applied separately when D_lambda is formed.
const LOG_WINDOW: f64 = 30.0;
const SLICE_WIDTH: f64 = 1.0;
const SLICE_MAX_STEPS: u32 = 16;

/// Quadratic form u' A u with O(1) single-coordinate what-if evaluation.
struct QuadCoord<'a> {
    a: &'a DMatrix<f64>,
    u: DVector<f64>,
    au: DVector<f64>,
    quad: f64,
}

impl<'a> QuadCoord<'a> {
    fn new(a: &'a DMatrix<f64>, u: DVector<f64>) -> Self {
        let au = a * &u;
        let quad = u.dot(&au);
        Self { a, u, au, quad }
    }

    fn eval_with(&self, j: usize, uj: f64) -> f64 {
        let d = uj - self.u[j];
        self.quad + 2.0 * d * self.au[j] + d * d * self.a[(j, j)]
    }

    fn commit(&mut self, j: usize, uj: f64) {
        let d = uj - self.u[j];
        self.quad = self.eval_with(j, uj);
        self.au.axpy(d, &self.a.column(j).into_owned(), 1.0);
        self.u[j] = uj;
    }
}

fn windowed(x: f64, f: impl Fn(f64) -> f64) -> f64 {
    if x.abs() > LOG_WINDOW {
        f64::NEG_INFINITY
    } else {
        f(x)
    }
}

/// Random-walk Metropolis state for one positive hyperlatent on log scale.
pub(super) struct MhStep {
    step: f64,
    accepted: u64,
    proposed: u64,
}

impl MhStep {
    fn new() -> Self {
        Self {
            step: 0.5,
            accepted: 0,
            proposed: 0,
        }
    }

    /// One proposal; `log_target` evaluated in log-space (Jacobian included
    /// by the caller).
    fn update<R: Rng>(
        &mut self,
        x_log: f64,
        log_target: impl Fn(f64) -> f64,
        adapt: bool,
        rng: &mut R,
    ) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let prop = x_log + self.step * z;
        let cur_lt = log_target(x_log);
        let prop_lt = log_target(prop);
        let accept = prop_lt.is_finite() && rng.gen::<f64>().ln() < prop_lt - cur_lt;
        self.proposed += 1;
        if accept {
            self.accepted += 1;
        }
        if adapt {
            let gamma = (self.proposed as f64).powf(-0.6);
            let a = if accept { 1.0 } else { 0.0 };
            self.step = (self.step * ((a - 0.44) * gamma).exp()).clamp(1e-3, 10.0);
        }
        if accept {
            prop
        } else {
            x_log
        }
    }
}

pub(super) struct SweepOutcome {
    pub lambda: Vec<f64>,
    pub tau: f64,
}

/// Kind-specific latent state for one chain.
pub(super) enum KindState {
    Hs {
        lambda: Vec<f64>,
        tau: f64,
    },
    Rhs {
        lambda_raw: Vec<f64>,
        tau: f64,
        c2: f64,
    },
    Dl {
        psi: Vec<f64>,
        g: Vec<f64>,
        tau: f64,
    },
    Ng {
        psi2: Vec<f64>,
        shape: f64,
        nu: f64,
        mh_shape: MhStep,
    },
    Bp {
        lambda2: Vec<f64>,
        alpha: f64,
        mh_alpha: MhStep,
    },
    R2d2 {
        g: Vec<f64>,
        omega2: f64,
    },
}

impl KindState {
    pub fn init(draw: &ScaleDraw) -> Self {
        match &draw.aux {
            AuxDraw::Hs { lambda_raw, tau } => Self::Hs {
                lambda: lambda_raw.clone(),
                tau: *tau,
            },
            AuxDraw::Rhs {
                lambda_raw,
                tau,
                c2,
            } => Self::Rhs {
                lambda_raw: lambda_raw.clone(),
                tau: *tau,
                c2: *c2,
            },
            AuxDraw::Dl { psi, phi, tau } => Self::Dl {
                psi: psi.clone(),
                g: phi.clone(),
                tau: *tau,
            },
            AuxDraw::Ng { psi2, shape, nu } => Self::Ng {
                psi2: psi2.clone(),
                shape: *shape,
                nu: *nu,
                mh_shape: MhStep::new(),
            },
            AuxDraw::Bp { lambda2, alpha } => Self::Bp {
                lambda2: lambda2.clone(),
                alpha: *alpha,
                mh_alpha: MhStep::new(),
            },
            AuxDraw::R2d2 { phi, omega2 } => Self::R2d2 {
                g: phi.clone(),
                omega2: *omega2,
            },
        }
    }

    /// Effective local scales entering D_lambda, and the effective tau.
    pub fn effective(&self) -> SweepOutcome {
        match self {
            Self::Hs { lambda, tau } => SweepOutcome {
                lambda: lambda.clone(),
                tau: *tau,
            },
            Self::Rhs {
                lambda_raw,
                tau,
                c2,
            } => SweepOutcome {
                lambda: lambda_raw
                    .iter()
                    .map(|&l| (c2 * l * l / (c2 + tau * tau * l * l)).sqrt())
                    .collect(),
                tau: *tau,
            },
            Self::Dl { psi, g, tau } => {
                let total: f64 = g.iter().sum();
                SweepOutcome {
                    lambda: psi
                        .iter()
                        .zip(g)
                        .map(|(&ps, &gj)| ps.sqrt() * (gj / total))
                        .collect(),
                    tau: *tau,
                }
            }
            Self::Ng { psi2, .. } => SweepOutcome {
                lambda: psi2.iter().map(|v| v.sqrt()).collect(),
                tau: 1.0,
            },
            Self::Bp { lambda2, .. } => SweepOutcome {
                lambda: lambda2.iter().map(|v| v.sqrt()).collect(),
                tau: 1.0,
            },
            Self::R2d2 { g, omega2 } => {
                let total: f64 = g.iter().sum();
                SweepOutcome {
                    lambda: g.iter().map(|&gj| (gj / total * omega2).sqrt()).collect(),
                    tau: 1.0,
                }
            }
        }
    }

    /// One full sweep over the latents given the coefficient block.
    pub fn sweep(
        &mut self,
        b: &DVector<f64>,
        sigma: f64,
        omega_inv: &DMatrix<f64>,
        spec: &PriorSpec,
        adapt: bool,
        rng: &mut ChaCha20Rng,
    ) {
        let p = b.len();
        let s2 = sigma * sigma;
        match self {
            Self::Hs { lambda, tau } => {
                let inv = 1.0 / (2.0 * s2 * *tau * *tau);
                let u = DVector::from_fn(p, |j, _| b[j] / lambda[j]);
                let mut qc = QuadCoord::new(omega_inv, u);
                for j in 0..p {
                    let bj = b[j];
                    let x0 = lambda[j].ln();
                    let x1 = slice_sample_log(
                        x0,
                        |x| {
                            windowed(x, |x| {
                                let lam = x.exp();
                                -(1.0 + lam * lam).ln() - inv * qc.eval_with(j, bj * (-x).exp())
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    lambda[j] = x1.exp();
                    qc.commit(j, bj * (-x1).exp());
                }
                let quad = qc.quad;
                let t1 = slice_sample_log(
                    tau.ln(),
                    |t| {
                        windowed(t, |t| {
                            let tv = t.exp();
                            -(1.0 + tv * tv).ln() + t - p as f64 * t
                                - quad / (2.0 * s2 * tv * tv)
                        })
                    },
                    SLICE_WIDTH,
                    SLICE_MAX_STEPS,
                    rng,
                );
                *tau = t1.exp();
            }
            Self::Rhs {
                lambda_raw,
                tau,
                c2,
            } => {
                let (tau0, c2_shape, c2_scale) = match &spec.params {
                    KindParams::Rhs {
                        tau0,
                        c2_shape,
                        c2_scale,
                    } => (*tau0, *c2_shape, *c2_scale),
                    _ => unreachable!(),
                };
                let eff = |l: f64, tau: f64, c2: f64| (c2 * l * l / (c2 + tau * tau * l * l)).sqrt();
                let inv = 1.0 / (2.0 * s2 * *tau * *tau);
                let u = DVector::from_fn(p, |j, _| b[j] / eff(lambda_raw[j], *tau, *c2));
                let mut qc = QuadCoord::new(omega_inv, u);
                for j in 0..p {
                    let bj = b[j];
                    let (tv, cv) = (*tau, *c2);
                    let x1 = slice_sample_log(
                        lambda_raw[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let lam = x.exp();
                                let lt = eff(lam, tv, cv);
                                -(1.0 + lam * lam).ln() + x
                                    - lt.ln()
                                    - inv * qc.eval_with(j, bj / lt)
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    lambda_raw[j] = x1.exp();
                    qc.commit(j, bj / eff(lambda_raw[j], tv, cv));
                }

                // tau and c2 change every effective scale; evaluate fully.
                let full = |tau: f64, c2: f64| -> f64 {
                    let mut logdet = 0.0;
                    let u = DVector::from_fn(p, |j, _| {
                        let lt = eff(lambda_raw[j], tau, c2);
                        logdet += lt.ln();
                        b[j] / lt
                    });
                    let quad = u.dot(&(omega_inv * &u));
                    -logdet - quad / (2.0 * s2 * tau * tau) - p as f64 * tau.ln()
                };
                let t1 = slice_sample_log(
                    tau.ln(),
                    |t| {
                        windowed(t, |t| {
                            let tv = t.exp();
                            match dens::ln_half_cauchy(tv, tau0) {
                                Ok(lp) => lp + t + full(tv, *c2),
                                Err(_) => f64::NEG_INFINITY,
                            }
                        })
                    },
                    SLICE_WIDTH,
                    SLICE_MAX_STEPS,
                    rng,
                );
                *tau = t1.exp();
                let c1 = slice_sample_log(
                    c2.ln(),
                    |x| {
                        windowed(x, |x| {
                            let cv = x.exp();
                            match dens::ln_inv_gamma(cv, c2_shape, c2_scale) {
                                Ok(lp) => lp + x + full(*tau, cv),
                                Err(_) => f64::NEG_INFINITY,
                            }
                        })
                    },
                    SLICE_WIDTH,
                    SLICE_MAX_STEPS,
                    rng,
                );
                *c2 = c1.exp();
            }
            Self::Dl { psi, g, tau } => {
                let (a_pi, tau_shape, tau_rate) = match &spec.params {
                    KindParams::Dl {
                        a_pi,
                        tau_shape,
                        tau_rate,
                    } => (*a_pi, *tau_shape, *tau_rate),
                    _ => unreachable!(),
                };
                let inv = 1.0 / (2.0 * s2 * *tau * *tau);
                let total: f64 = g.iter().sum();

                // psi sweep on u coordinates (phi fixed).
                let u = DVector::from_fn(p, |j, _| b[j] / (psi[j].sqrt() * (g[j] / total)));
                let mut qc = QuadCoord::new(omega_inv, u);
                for j in 0..p {
                    let bj = b[j];
                    let phi_j = g[j] / total;
                    let x1 = slice_sample_log(
                        psi[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let ps = x.exp();
                                let lam = ps.sqrt() * phi_j;
                                -0.5 * ps + x - lam.ln()
                                    - inv * qc.eval_with(j, bj / lam)
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    psi[j] = x1.exp();
                    qc.commit(j, bj / (psi[j].sqrt() * phi_j));
                }

                // g sweep on w = b_j / (sqrt(psi_j) g_j); u = T w.
                let w = DVector::from_fn(p, |j, _| b[j] / (psi[j].sqrt() * g[j]));
                let mut qw = QuadCoord::new(omega_inv, w);
                let mut total: f64 = g.iter().sum();
                for j in 0..p {
                    let bj = b[j];
                    let rest = total - g[j];
                    let sp = psi[j].sqrt();
                    let x1 = slice_sample_log(
                        g[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let gj = x.exp();
                                let t_new = rest + gj;
                                let wj = bj / (sp * gj);
                                // Jacobian +x cancels the -ln g_j determinant term.
                                (a_pi - 1.0) * x - gj + p as f64 * t_new.ln()
                                    - inv * t_new * t_new * qw.eval_with(j, wj)
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    g[j] = x1.exp();
                    total = rest + g[j];
                    qw.commit(j, bj / (sp * g[j]));
                }

                let quad = total * total * qw.quad;
                let t1 = slice_sample_log(
                    tau.ln(),
                    |t| {
                        windowed(t, |t| {
                            let tv = t.exp();
                            (tau_shape - 1.0) * t - tau_rate * tv + t - p as f64 * t
                                - quad / (2.0 * s2 * tv * tv)
                        })
                    },
                    SLICE_WIDTH,
                    SLICE_MAX_STEPS,
                    rng,
                );
                *tau = t1.exp();
            }
            Self::Ng {
                psi2,
                shape,
                nu,
                mh_shape,
            } => {
                let m = match &spec.params {
                    KindParams::Ng { m } => *m,
                    _ => unreachable!(),
                };
                let inv = 1.0 / (2.0 * s2);
                let u = DVector::from_fn(p, |j, _| b[j] / psi2[j].sqrt());
                let mut qc = QuadCoord::new(omega_inv, u);
                for j in 0..p {
                    let bj = b[j];
                    let (sh, rate) = (*shape, *shape / *nu);
                    let x1 = slice_sample_log(
                        psi2[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let p2 = x.exp();
                                (sh - 1.0) * x - rate * p2 + x - 0.5 * x
                                    - inv * qc.eval_with(j, bj * (-0.5 * x).exp())
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    psi2[j] = x1.exp();
                    qc.commit(j, bj * (-0.5 * x1).exp());
                }

                // nu | shape, psi2 is conjugate inverse gamma.
                let sum_psi2: f64 = psi2.iter().sum();
                let ig_shape = 2.0 + p as f64 * *shape;
                let ig_scale = m + *shape * sum_psi2;
                let gamma = rand_distr::Gamma::new(ig_shape, 1.0 / ig_scale).unwrap();
                *nu = 1.0 / gamma.sample(rng).max(f64::MIN_POSITIVE);

                // shape | psi2, nu by Metropolis with cached sufficient stats.
                let sum_ln_psi2: f64 = psi2.iter().map(|v| v.ln()).sum();
                let nu_v = *nu;
                let pf = p as f64;
                let new_ln = mh_shape.update(
                    shape.ln(),
                    |x| {
                        if x.abs() > LOG_WINDOW {
                            return f64::NEG_INFINITY;
                        }
                        let s = x.exp();
                        pf * (s * (s / nu_v).ln() - statrs::function::gamma::ln_gamma(s))
                            + (s - 1.0) * sum_ln_psi2
                            - s / nu_v * sum_psi2
                            - s
                            + x
                    },
                    adapt,
                    rng,
                );
                *shape = new_ln.exp();
            }
            Self::Bp {
                lambda2,
                alpha,
                mh_alpha,
            } => {
                let (alpha_shape, alpha_rate, alpha_max, beta, alpha_fixed) = match &spec.params {
                    KindParams::Bp {
                        alpha_shape,
                        alpha_rate,
                        alpha_max,
                        beta,
                        alpha_fixed,
                    } => (*alpha_shape, *alpha_rate, *alpha_max, *beta, *alpha_fixed),
                    _ => unreachable!(),
                };
                let inv = 1.0 / (2.0 * s2);
                let u = DVector::from_fn(p, |j, _| b[j] / lambda2[j].sqrt());
                let mut qc = QuadCoord::new(omega_inv, u);
                for j in 0..p {
                    let bj = b[j];
                    let av = *alpha;
                    let x1 = slice_sample_log(
                        lambda2[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let l2 = x.exp();
                                (av - 1.0) * x - (av + beta) * (1.0 + l2).ln() + x - 0.5 * x
                                    - inv * qc.eval_with(j, bj * (-0.5 * x).exp())
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    lambda2[j] = x1.exp();
                    qc.commit(j, bj * (-0.5 * x1).exp());
                }

                if alpha_fixed.is_none() {
                    let sum_ln: f64 = lambda2.iter().map(|v| v.ln()).sum();
                    let sum_ln1p: f64 = lambda2.iter().map(|v| v.ln_1p()).sum();
                    let pf = p as f64;
                    let new_ln = mh_alpha.update(
                        alpha.ln(),
                        |x| {
                            let a = x.exp();
                            if !(a > 0.0 && a <= alpha_max) {
                                return f64::NEG_INFINITY;
                            }
                            let ln_beta_fn = statrs::function::gamma::ln_gamma(a)
                                + statrs::function::gamma::ln_gamma(beta)
                                - statrs::function::gamma::ln_gamma(a + beta);
                            (a - 1.0) * sum_ln - (a + beta) * sum_ln1p - pf * ln_beta_fn
                                + (alpha_shape - 1.0) * x
                                - alpha_rate * a
                                + x
                        },
                        adapt,
                        rng,
                    );
                    *alpha = new_ln.exp();
                }
            }
            Self::R2d2 { g, omega2 } => {
                let a_pi = match &spec.params {
                    KindParams::R2d2 { a_pi, .. } => *a_pi,
                    _ => unreachable!(),
                };
                let (a1, a2) = match &spec.params {
                    KindParams::R2d2 { a1, a2, .. } => (*a1, *a2),
                    _ => unreachable!(),
                };
                let inv = 1.0 / (2.0 * s2);

                // g sweep on w = b_j / sqrt(g_j omega2); u = sqrt(T) w.
                let w = DVector::from_fn(p, |j, _| b[j] / (g[j] * *omega2).sqrt());
                let mut qw = QuadCoord::new(omega_inv, w);
                let mut total: f64 = g.iter().sum();
                let om = *omega2;
                for j in 0..p {
                    let bj = b[j];
                    let rest = total - g[j];
                    let x1 = slice_sample_log(
                        g[j].ln(),
                        |x| {
                            windowed(x, |x| {
                                let gj = x.exp();
                                let t_new = rest + gj;
                                let wj = bj / (gj * om).sqrt();
                                (a_pi - 1.0) * x - gj + x - 0.5 * x
                                    + 0.5 * p as f64 * t_new.ln()
                                    - inv * t_new * qw.eval_with(j, wj)
                            })
                        },
                        SLICE_WIDTH,
                        SLICE_MAX_STEPS,
                        rng,
                    );
                    g[j] = x1.exp();
                    total = rest + g[j];
                    qw.commit(j, bj / (g[j] * om).sqrt());
                }

                // omega2: w scales as 1/sqrt(omega2); reduce to quadV.
                let quad_v = om * total * qw.quad;
                let x1 = slice_sample_log(
                    omega2.ln(),
                    |x| {
                        windowed(x, |x| {
                            let ov = x.exp();
                            match dens::ln_beta_prime(ov, a1, a2) {
                                Ok(lp) => {
                                    lp + x - 0.5 * p as f64 * x - inv * quad_v * (-x).exp()
                                }
                                Err(_) => f64::NEG_INFINITY,
                            }
                        })
                    },
                    SLICE_WIDTH,
                    SLICE_MAX_STEPS,
                    rng,
                );
                *omega2 = x1.exp();
            }
        }
    }
}

