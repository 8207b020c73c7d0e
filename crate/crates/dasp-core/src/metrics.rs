//! Evaluation metrics over posterior draws: predictive density, parameter
//! recovery, interval coverage and selection operating characteristics.
//!
//! Every function here is a pure function of (draws, data); recomputation is
//! bit-identical.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::sim::{log_mean_exp, RegressionDataset};

/// Interpolated sample quantile (type 7) of an unsorted slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let h = q.clamp(0.0, 1.0) * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Expected log pointwise predictive density on a held-out set.
pub fn elpd(draws: &PosteriorDraws, test: &RegressionDataset) -> f64 {
    let n = test.x.nrows();
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(draws.total_draws());
    for i in 0..n {
        terms.clear();
        let xi = test.x.row(i);
        draws.for_each_draw(|b, alpha, sigma| {
            let mean = alpha + xi.iter().zip(b).map(|(x, c)| x * c).sum::<f64>();
            terms.push(crate::priors::dens::ln_normal(test.y[i], mean, sigma));
        });
        total += log_mean_exp(&terms);
    }
    total
}

/// Posterior root mean squared error split by the truth pattern.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RmseSplit {
    pub all: f64,
    /// NaN when there are no truly zero coefficients.
    pub zero: f64,
    /// NaN when there are no truly nonzero coefficients.
    pub nonzero: f64,
}

/// Per-coefficient root mean squared posterior error, averaged over the full
/// index set and over the truly zero / truly nonzero subsets.
pub fn rmse_split(draws: &PosteriorDraws, b_true: &DVector<f64>) -> Result<RmseSplit> {
    let p = b_true.len();
    if p != draws.p {
        return Err(Error::DimensionMismatch("b_true length".into()));
    }
    let per_coef: Vec<f64> = (0..p)
        .map(|k| {
            let pooled = draws.b_pooled(k);
            let mse = pooled
                .iter()
                .map(|v| (v - b_true[k]).powi(2))
                .sum::<f64>()
                / pooled.len() as f64;
            mse.sqrt()
        })
        .collect();

    let mean_over = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            f64::NAN
        } else {
            idx.iter().map(|&k| per_coef[k]).sum::<f64>() / idx.len() as f64
        }
    };
    let zeros: Vec<usize> = (0..p).filter(|&k| b_true[k] == 0.0).collect();
    let nonzeros: Vec<usize> = (0..p).filter(|&k| b_true[k] != 0.0).collect();
    Ok(RmseSplit {
        all: mean_over(&(0..p).collect::<Vec<_>>()),
        zero: mean_over(&zeros),
        nonzero: mean_over(&nonzeros),
    })
}

/// Marginal interval coverage and selection summary at one credibility level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub level: f64,
    pub coverage: f64,
    pub avg_width: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub coverage_zero: f64,
    pub coverage_nonzero: f64,
}

/// Equal-tailed marginal credible intervals; a coefficient is selected when
/// its interval excludes zero.
pub fn coverage_metrics(
    draws: &PosteriorDraws,
    b_true: &DVector<f64>,
    level: f64,
) -> Result<CoverageRecord> {
    let p = b_true.len();
    if p != draws.p {
        return Err(Error::DimensionMismatch("b_true length".into()));
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    let tail = (1.0 - level) / 2.0;

    let mut covered = 0usize;
    let mut covered_zero = 0usize;
    let mut covered_nonzero = 0usize;
    let mut selected_nonzero = 0usize;
    let mut excluded_zero = 0usize;
    let mut width_sum = 0.0;
    let mut n_zero = 0usize;
    let mut n_nonzero = 0usize;

    for k in 0..p {
        let pooled = draws.b_pooled(k);
        let lo = quantile(&pooled, tail);
        let hi = quantile(&pooled, 1.0 - tail);
        width_sum += hi - lo;
        let truth = b_true[k];
        let covers = lo <= truth && truth <= hi;
        let selects = !(lo <= 0.0 && 0.0 <= hi);
        if covers {
            covered += 1;
        }
        if truth == 0.0 {
            n_zero += 1;
            if covers {
                covered_zero += 1;
            }
            if !selects {
                excluded_zero += 1;
            }
        } else {
            n_nonzero += 1;
            if covers {
                covered_nonzero += 1;
            }
            if selects {
                selected_nonzero += 1;
            }
        }
    }

    let frac = |num: usize, den: usize| {
        if den == 0 {
            f64::NAN
        } else {
            num as f64 / den as f64
        }
    };
    Ok(CoverageRecord {
        level,
        coverage: covered as f64 / p as f64,
        avg_width: width_sum / p as f64,
        sensitivity: frac(selected_nonzero, n_nonzero),
        specificity: frac(excluded_zero, n_zero),
        coverage_zero: frac(covered_zero, n_zero),
        coverage_nonzero: frac(covered_nonzero, n_nonzero),
    })
}

/// Receiver operating characteristic swept over interval levels:
/// (false positive rate, true positive rate) sorted by fpr.
pub fn roc_curve(
    draws: &PosteriorDraws,
    b_true: &DVector<f64>,
    levels: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::with_capacity(levels.len());
    for &level in levels {
        let rec = coverage_metrics(draws, b_true, level)?;
        pts.push((1.0 - rec.specificity, rec.sensitivity));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("non-finite roc point"));
    Ok(pts)
}

/// Paired metric difference, dependency-aware minus standard.
///
/// Positive favors the dependency-aware fit for ELPD; negative favors it for
/// RMSE.
pub fn delta(metric_with_omega: f64, metric_without: f64) -> f64 {
    metric_with_omega - metric_without
}

/// Full per-fit metric bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub elpd: f64,
    pub rmse_all: f64,
    pub rmse_zero: f64,
    pub rmse_nonzero: f64,
    pub coverage: f64,
    pub avg_width: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub coverage_zero: f64,
    pub coverage_nonzero: f64,
    pub meff_posterior_mean: f64,
}

/// Evaluate all metrics of one fit against the truth and a held-out set.
pub fn evaluate(
    draws: &PosteriorDraws,
    test: &RegressionDataset,
    b_true: &DVector<f64>,
) -> Result<MetricsReport> {
    let rmse = rmse_split(draws, b_true)?;
    let cov = coverage_metrics(draws, b_true, 0.95)?;
    Ok(MetricsReport {
        elpd: elpd(draws, test),
        rmse_all: rmse.all,
        rmse_zero: rmse.zero,
        rmse_nonzero: rmse.nonzero,
        coverage: cov.coverage,
        avg_width: cov.avg_width,
        sensitivity: cov.sensitivity,
        specificity: cov.specificity,
        coverage_zero: cov.coverage_zero,
        coverage_nonzero: cov.coverage_nonzero,
        meff_posterior_mean: posterior_mean_meff(draws),
    })
}

/// Posterior mean of the effective model size via the classical per-draw
/// count sum_j lambda_j^2 tau^2 / (1 + lambda_j^2 tau^2) on the stored
/// scales.
pub fn posterior_mean_meff(draws: &PosteriorDraws) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for c in &draws.chains {
        for (i, lam) in c.lambda.iter().enumerate() {
            let t2 = c.tau[i] * c.tau[i];
            total += lam
                .iter()
                .map(|l| {
                    let v = l * l * t2;
                    v / (1.0 + v)
                })
                .sum::<f64>();
            count += 1.0;
        }
    }
    total / count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{ChainDraws, FitManifest, PosteriorDraws};

    fn draws_from_rows(rows: Vec<Vec<f64>>, sigma: f64) -> PosteriorDraws {
        let p = rows[0].len();
        let k = rows.len();
        PosteriorDraws {
            n: 1,
            p,
            chains: vec![ChainDraws {
                lambda: vec![vec![1.0; p]; k],
                tau: vec![1.0; k],
                sigma: vec![sigma; k],
                intercept: vec![0.0; k],
                log_lik: vec![vec![0.0]; k],
                b: rows,
            }],
            manifest: FitManifest {
                prior_kind: "hs".into(),
                hyperparameters: vec![],
                omega_mode: "identity".into(),
                chains: 1,
                warmup: 0,
                draws: k,
                thin: 1,
                seed: 0,
                n: 1,
                p,
                fixed_scales: true,
                lambda_floor_hits: 0,
                sigma_accept_rate: f64::NAN,
                warnings: vec![],
            },
        }
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn rmse_zero_when_draws_equal_truth() {
        let truth = DVector::from_vec(vec![1.0, 0.0, -2.0]);
        let d = draws_from_rows(vec![vec![1.0, 0.0, -2.0]; 10], 1.0);
        let r = rmse_split(&d, &truth).unwrap();
        assert_eq!(r.all, 0.0);
        assert_eq!(r.zero, 0.0);
        assert_eq!(r.nonzero, 0.0);
    }

    #[test]
    fn rmse_nonzero_sentinel_when_truth_all_zero() {
        let truth = DVector::zeros(2);
        let d = draws_from_rows(vec![vec![0.1, -0.1]; 5], 1.0);
        let r = rmse_split(&d, &truth).unwrap();
        assert!(r.nonzero.is_nan());
        assert!(r.zero.is_finite());
    }

    #[test]
    fn point_mass_draws_cover_with_zero_width() {
        let truth = DVector::from_vec(vec![2.0, 0.0]);
        let d = draws_from_rows(vec![vec![2.0, 0.0]; 20], 1.0);
        let c = coverage_metrics(&d, &truth, 0.95).unwrap();
        assert_eq!(c.coverage, 1.0);
        assert_eq!(c.avg_width, 0.0);
    }

    #[test]
    fn wide_intervals_select_nothing() {
        let truth = DVector::from_vec(vec![2.0, 0.0]);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let v = (i as f64 - 49.5) * 100.0;
                vec![v, -v]
            })
            .collect();
        let d = draws_from_rows(rows, 1.0);
        let c = coverage_metrics(&d, &truth, 0.95).unwrap();
        assert_eq!(c.sensitivity, 0.0);
        assert_eq!(c.specificity, 1.0);
    }

    #[test]
    fn roc_endpoints_and_level_consistency() {
        let truth = DVector::from_vec(vec![5.0, 0.0, -5.0, 0.0]);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let e = (i as f64 / 200.0 - 0.5) * 0.4;
                vec![5.0 + e, e, -5.0 + e, -e]
            })
            .collect();
        let d = draws_from_rows(rows, 1.0);
        // Perfect separation passes through (0, 1).
        let pts = roc_curve(&d, &truth, &[0.95]).unwrap();
        assert_eq!(pts[0], (0.0, 1.0));
        let rec = coverage_metrics(&d, &truth, 0.95).unwrap();
        assert_eq!(pts[0], (1.0 - rec.specificity, rec.sensitivity));
        // Near-degenerate level selects everything.
        let pts = roc_curve(&d, &truth, &[1e-9]).unwrap();
        assert_eq!(pts[0], (1.0, 1.0));
    }

    #[test]
    fn delta_sign_convention() {
        assert_eq!(delta(-100.0, -110.0), 10.0);
        assert_eq!(delta(1.0, 1.0), 0.0);
    }

    #[test]
    fn elpd_single_draw_at_predicted_mean() {
        let d = draws_from_rows(vec![vec![0.0]], 1.0);
        let test = RegressionDataset::new(
            nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![0.0]),
        )
        .unwrap();
        let v = elpd(&d, &test);
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn elpd_invariant_under_draw_duplication() {
        let rows = vec![vec![0.3], vec![-0.2], vec![0.1]];
        let mut doubled = rows.clone();
        doubled.extend(rows.clone());
        let test = RegressionDataset::new(
            nalgebra::DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.5, 0.2]),
        )
        .unwrap();
        let a = elpd(&draws_from_rows(rows, 0.7), &test);
        let b = elpd(&draws_from_rows(doubled, 0.7), &test);
        assert!((a - b).abs() < 1e-12);
    }
}
