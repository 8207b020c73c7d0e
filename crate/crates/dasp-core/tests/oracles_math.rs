//! Oracle-backed checks of the correlation generators, covariance
//! estimation and prior/posterior analytics. Expected values come from
//! independent routes: entrywise definitions, symbolic 2x2 inverses, Monte
//! Carlo estimates and eigenvalue closed forms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use dasp_core::analytics::{
    conditional_posterior, kl_gaussian, kl_prior, mc_prior_grid, mean_shift,
    posterior_mean_via_mle, shrinkage_matrix, spectral_bounds, GridSpec, ScaleState,
};
use dasp_core::corr::{
    make_structure, nearest_pd, validate, CorrelationMatrix, StructureKind, StructureSpec,
};
use dasp_core::error::Error;
use dasp_core::linalg;
use dasp_core::omega::{
    build_omega, cor_standardize, ledoit_wolf, partial_correlation, sample_covariance, OmegaSpec,
};
use dasp_core::priors::{default_spec, PriorKind};
use dasp_core::rng::{substream, StreamTag};

type TestRng = rand_chacha::ChaCha20Rng;

fn rng_for(tag: u64) -> TestRng {
    substream(0xDA5B, StreamTag::PriorSample, tag, 0)
}

fn equi(rho: f64, p: usize) -> CorrelationMatrix {
    make_structure(&StructureSpec::new(StructureKind::Equicorrelation, rho), p).unwrap()
}

fn random_matrix(n: usize, p: usize, rng: &mut TestRng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// Random correlation matrix from a standardized Wishart-style draw.
fn random_correlation(p: usize, rng: &mut TestRng) -> CorrelationMatrix {
    let w = random_matrix(p, p + 2, rng);
    let gram = &w * w.transpose() + DMatrix::identity(p, p) * 0.5;
    cor_standardize(&gram).unwrap()
}

fn mvn_rows(n: usize, sigma: &DMatrix<f64>, rng: &mut TestRng) -> DMatrix<f64> {
    let l = nalgebra::Cholesky::new(sigma.clone()).unwrap().l();
    let p = sigma.nrows();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let row = &l * z;
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    x
}

// ---------------------------------------------------------------- corr

#[test]
fn structures_validate_wherever_rho_is_admissible() {
    let rho_grid: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).chain([0.95]).collect();
    let kinds = [
        StructureKind::Ar1,
        StructureKind::Ma1,
        StructureKind::Ma2,
        StructureKind::Bar1,
        StructureKind::Bma1,
        StructureKind::Bma2,
        StructureKind::Equicorrelation,
    ];
    for kind in kinds {
        for dim in [1, 2, 5, 12, 27, 50] {
            for &rho in &rho_grid {
                match make_structure(&StructureSpec::new(kind, rho), dim) {
                    Ok(m) => {
                        validate(m.entries(), 1e-8).unwrap_or_else(|e| {
                            panic!("{kind} rho={rho} dim={dim} failed validate: {e}")
                        });
                    }
                    Err(Error::NonPositiveDefinite { .. }) => {
                        assert!(
                            matches!(
                                kind,
                                StructureKind::Ma1
                                    | StructureKind::Ma2
                                    | StructureKind::Bma1
                                    | StructureKind::Bma2
                            ),
                            "{kind} unexpectedly indefinite at rho={rho}, dim={dim}"
                        );
                    }
                    Err(e) => panic!("{kind} rho={rho} dim={dim}: unexpected error {e}"),
                }
            }
        }
    }
}

#[test]
fn entrywise_agreement_with_piecewise_definitions() {
    let mut rng = rng_for(1);
    for _ in 0..200 {
        // Banded MA templates stop being positive definite near 0.5 as the
        // dimension grows; stay inside the always-valid slice.
        let dim: usize = rng.gen_range(2..40);
        let rho = rng.gen_range(0.0..0.45);
        let i: usize = rng.gen_range(0..dim);
        let j: usize = rng.gen_range(0..dim);
        let lag = i.abs_diff(j);

        let ar1 = make_structure(&StructureSpec::new(StructureKind::Ar1, rho), dim).unwrap();
        assert!((ar1.entries()[(i, j)] - rho.powi(lag as i32)).abs() < 1e-15);

        let ma1 = make_structure(&StructureSpec::new(StructureKind::Ma1, rho), dim).unwrap();
        let expect = match lag {
            0 => 1.0,
            1 => rho,
            _ => 0.0,
        };
        assert_eq!(ma1.entries()[(i, j)], expect);

        let ma2 = make_structure(&StructureSpec::new(StructureKind::Ma2, rho), dim).unwrap();
        let expect = match lag {
            0 => 1.0,
            1 => rho,
            2 => (1.0 - rho) * rho,
            _ => 0.0,
        };
        assert_eq!(ma2.entries()[(i, j)], expect);
    }
}

#[test]
fn blocked_structures_have_bit_exact_zero_off_blocks() {
    let mut rng = rng_for(2);
    for kind in [StructureKind::Bar1, StructureKind::Bma1, StructureKind::Bma2] {
        for _ in 0..20 {
            let dim = rng.gen_range(6..45);
            let rho = rng.gen_range(0.0..0.5);
            let m = make_structure(&StructureSpec::new(kind, rho), dim).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    if i / 5 != j / 5 {
                        assert_eq!(m.entries()[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn nearest_pd_output_is_valid_and_close() {
    // Indefinite 10-dim blocked MA1(0.95) template.
    let raw = {
        let mut m = DMatrix::identity(10, 10);
        for b in 0..2 {
            for i in 0..4 {
                let k = b * 5 + i;
                m[(k, k + 1)] = 0.95;
                m[(k + 1, k)] = 0.95;
            }
        }
        m
    };
    let fixed = nearest_pd(&raw, 1e-6).unwrap();
    validate(fixed.entries(), 1e-8).unwrap();
    // Banded pattern survives: strong first band, weak off-block entries.
    assert!(fixed.entries()[(0, 1)] > 0.75);
    assert!(fixed.entries()[(0, 7)].abs() < 0.1);
}

// ---------------------------------------------------------------- omega

#[test]
fn sample_covariance_is_unbiased_monte_carlo() {
    let sigma = make_structure(&StructureSpec::new(StructureKind::Ar1, 0.5), 5)
        .unwrap()
        .into_entries();
    let reps = 1000;
    let n = 100;
    let mut rng = rng_for(3);
    let mut mean: DMatrix<f64> = DMatrix::zeros(5, 5);
    let mut m2: DMatrix<f64> = DMatrix::zeros(5, 5);
    for r in 0..reps {
        let x = mvn_rows(n, &sigma, &mut rng);
        let s = sample_covariance(&x, true).unwrap();
        let delta = &s - &mean;
        mean += &delta / (r as f64 + 1.0);
        let delta2 = &s - &mean;
        for i in 0..5 {
            for j in 0..5 {
                m2[(i, j)] += delta[(i, j)] * delta2[(i, j)];
            }
        }
    }
    for i in 0..5 {
        for j in 0..5 {
            let se = (m2[(i, j)] / (reps as f64 - 1.0) / reps as f64).sqrt();
            let err = (mean[(i, j)] - sigma[(i, j)]).abs();
            assert!(
                err <= 3.0 * se + 1e-12,
                "entry ({i},{j}): err {err:.2e} > 3 se {se:.2e}"
            );
        }
    }
}

#[test]
fn ledoit_wolf_spectral_identity_on_random_designs() {
    let mut rng = rng_for(4);
    for trial in 0..50 {
        let n = rng.gen_range(10..40);
        let p = rng.gen_range(3..12);
        let x = random_matrix(n, p, &mut rng);
        let lw = ledoit_wolf(&x, true).unwrap();
        let s = sample_covariance(&x, true).unwrap();
        let w = lw.b_n2 / lw.d_n2;
        assert!((0.0..=1.0).contains(&w), "trial {trial}: weight {w}");
        assert!((lw.a_n2 / lw.d_n2 + w - 1.0).abs() < 1e-12);
        assert!(lw.b_n2 <= lw.d_n2);

        // Shared eigenvectors: V' S* V must be diagonal with the convex
        // combination of eigenvalues.
        let eig = s.clone().symmetric_eigen();
        let rotated = eig.eigenvectors.transpose() * &lw.s_star * &eig.eigenvectors;
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    let expect = w * lw.m_n + (1.0 - w) * eig.eigenvalues[i];
                    assert!(
                        (rotated[(i, j)] - expect).abs() < 1e-10,
                        "trial {trial}: eigenvalue identity off by {:.2e}",
                        (rotated[(i, j)] - expect).abs()
                    );
                } else {
                    assert!(
                        rotated[(i, j)].abs() < 1e-10,
                        "trial {trial}: eigenvectors not shared"
                    );
                }
            }
        }
    }
}

#[test]
fn ledoit_wolf_is_positive_definite_when_singular_sample() {
    let mut rng = rng_for(5);
    let x = random_matrix(20, 120, &mut rng);
    let lw = ledoit_wolf(&x, true).unwrap();
    let s = sample_covariance(&x, true).unwrap();
    let s_eigs = linalg::sym_eigenvalues(&s);
    assert!(s_eigs[0].abs() < 1e-10, "sample covariance should be singular");
    let star_eigs = linalg::sym_eigenvalues(&lw.s_star);
    assert!(star_eigs[0] > 0.1, "smallest {}", star_eigs[0]);
    assert!(star_eigs[119] < 5.0, "largest {}", star_eigs[119]);
}

#[test]
fn ledoit_wolf_error_shrinks_with_sample_size() {
    let sigma = make_structure(&StructureSpec::new(StructureKind::Ar1, 0.5), 5)
        .unwrap()
        .into_entries();
    let mut medians = Vec::new();
    for (tag, n) in [(10u64, 20usize), (11, 80), (12, 320)] {
        let mut errs: Vec<f64> = Vec::new();
        let mut rng = rng_for(tag);
        for _ in 0..21 {
            let x = mvn_rows(n, &sigma, &mut rng);
            let lw = ledoit_wolf(&x, true).unwrap();
            errs.push((&lw.s_star - &sigma).norm());
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(errs[errs.len() / 2]);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "medians {medians:?}"
    );
}

#[test]
fn omega_off_diagonals_are_negated_partial_correlations() {
    let mut cases: Vec<DMatrix<f64>> = vec![
        make_structure(&StructureSpec::new(StructureKind::Ar1, 0.5), 4)
            .unwrap()
            .into_entries(),
        make_structure(&StructureSpec::new(StructureKind::Ma1, 0.4), 5)
            .unwrap()
            .into_entries(),
        equi(0.5, 3).into_entries(),
    ];
    let mut rng = rng_for(6);
    cases.push(random_correlation(6, &mut rng).into_entries());
    for sigma in cases {
        let p = sigma.nrows();
        let x = DMatrix::zeros(4, p);
        let omega = build_omega(&x, &OmegaSpec::Known(sigma.clone())).unwrap();
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    let pc = partial_correlation(&sigma, i, j).unwrap();
                    assert!(
                        (omega.entries()[(i, j)] + pc).abs() < 1e-10,
                        "({i},{j}): omega {} vs -partial {}",
                        omega.entries()[(i, j)],
                        -pc
                    );
                }
            }
        }
    }
}

#[test]
fn build_omega_wide_design_needs_shrinkage() {
    let mut rng = rng_for(7);
    let x = random_matrix(15, 145, &mut rng);
    assert!(matches!(
        build_omega(&x, &OmegaSpec::SampleCov),
        Err(Error::SingularCovariance(_))
    ));
    let omega = build_omega(&x, &OmegaSpec::LedoitWolf).unwrap();
    validate(omega.entries(), 1e-8).unwrap();
}

#[test]
fn build_omega_output_always_validates() {
    let mut rng = rng_for(8);
    for _ in 0..10 {
        let n = rng.gen_range(10..60);
        let p = rng.gen_range(2..9);
        let x = random_matrix(n, p, &mut rng);
        for spec in [OmegaSpec::Identity, OmegaSpec::SampleCov, OmegaSpec::LedoitWolf] {
            if matches!(spec, OmegaSpec::SampleCov) && n <= p {
                continue;
            }
            let omega = build_omega(&x, &spec).unwrap();
            validate(omega.entries(), 1e-8).unwrap();
        }
    }
}

// ------------------------------------------------------------ analytics

#[test]
fn posterior_mean_routes_agree_on_full_rank_designs() {
    let mut rng = rng_for(9);
    for trial in 0..100 {
        let p = rng.gen_range(2..=10);
        let n = 2 * p;
        let x = random_matrix(n, p, &mut rng);
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let lambda: Vec<f64> = (0..p).map(|_| f64::exp(rng.gen_range(-1.5..1.5))).collect();
        let tau = f64::exp(rng.gen_range(-1.0..1.0));
        let sigma = f64::exp(rng.gen_range(-0.5..0.5));
        let state = ScaleState::new(lambda, tau, sigma).unwrap();
        let omega = random_correlation(p, &mut rng);

        let direct = conditional_posterior(&x, &y, &state, &omega).unwrap().mean;
        let via_mle = posterior_mean_via_mle(&x, &y, &state, &omega).unwrap();
        for k in 0..p {
            let rel = (direct[k] - via_mle[k]).abs() / direct[k].abs().max(1e-8);
            assert!(rel < 1e-8, "trial {trial}, coef {k}: rel err {rel:.2e}");
        }
    }
}

/// Exact 2x2 conditional posterior mean at X = I, tau = sigma = 1 from the
/// symbolic inverse of Q.
fn two_dim_closed_form(l1: f64, l2: f64, rho: f64, y1: f64, y2: f64) -> (f64, f64) {
    let den = 1.0 + l1 * l1 + l2 * l2 + l1 * l1 * l2 * l2 * (1.0 - rho * rho);
    let m1 = (l1 * l1 * (1.0 + l2 * l2 * (1.0 - rho * rho)) * y1 + rho * l1 * l2 * y2) / den;
    let m2 = (l2 * l2 * (1.0 + l1 * l1 * (1.0 - rho * rho)) * y2 + rho * l1 * l2 * y1) / den;
    (m1, m2)
}

#[test]
fn two_dim_closed_form_matches_conditional_posterior() {
    let mut rng = rng_for(10);
    let x = DMatrix::identity(2, 2);
    for trial in 0..100 {
        let l1 = f64::exp(rng.gen_range(-2.0..2.0));
        let l2 = f64::exp(rng.gen_range(-2.0..2.0));
        let rho = rng.gen_range(-0.9..0.9);
        let y = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        let state = ScaleState::new(vec![l1, l2], 1.0, 1.0).unwrap();
        let omega = equi(rho, 2);
        let post = conditional_posterior(&x, &y, &state, &omega).unwrap();
        let (m1, m2) = two_dim_closed_form(l1, l2, rho, y[0], y[1]);
        assert!(
            (post.mean[0] - m1).abs() < 1e-10 && (post.mean[1] - m2).abs() < 1e-10,
            "trial {trial}: ({}, {}) vs ({m1}, {m2})",
            post.mean[0],
            post.mean[1]
        );
    }
}

#[test]
fn shrinkage_matrix_reproduces_two_dim_posterior_mean() {
    let mut rng = rng_for(11);
    let x = DMatrix::identity(2, 2);
    for _ in 0..50 {
        let l1 = f64::exp(rng.gen_range(-1.5..1.5));
        let l2 = f64::exp(rng.gen_range(-1.5..1.5));
        let rho = rng.gen_range(-0.8..0.8);
        let bhat = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        let state = ScaleState::new(vec![l1, l2], 1.0, 1.0).unwrap();
        let kappa = shrinkage_matrix(&x, &state, &equi(rho, 2)).unwrap();
        let applied = (DMatrix::identity(2, 2) - kappa) * &bhat;
        let (m1, m2) = two_dim_closed_form(l1, l2, rho, bhat[0], bhat[1]);
        assert!((applied[0] - m1).abs() < 1e-10);
        assert!((applied[1] - m2).abs() < 1e-10);
    }
}

#[test]
fn mean_shift_is_definitionally_consistent_and_pools() {
    let mut rng = rng_for(12);
    for _ in 0..30 {
        let p = rng.gen_range(2..8);
        let n = 3 * p;
        let x = random_matrix(n, p, &mut rng);
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let state = ScaleState::constant(p, 0.8, 1.1, 0.9).unwrap();
        let omega = random_correlation(p, &mut rng);
        let shift = mean_shift(&x, &y, &state, &omega).unwrap();
        let with = conditional_posterior(&x, &y, &state, &omega).unwrap().mean;
        let without = conditional_posterior(&x, &y, &state, &CorrelationMatrix::identity(p))
            .unwrap()
            .mean;
        for k in 0..p {
            assert!((shift[k] - (with[k] - without[k])).abs() < 1e-10);
        }
    }

    // Strong correlation pools a large coefficient into a zero one.
    let x = DMatrix::identity(2, 2);
    let y = DVector::from_vec(vec![5.0, 0.0]);
    let state = ScaleState::constant(2, 1.0, 1.0, 1.0).unwrap();
    let shift = mean_shift(&x, &y, &state, &equi(0.95, 2)).unwrap();
    assert!(shift[1] > 0.1, "no pooling: {shift:?}");
}

#[test]
fn spectral_sandwich_holds_on_random_instances() {
    let mut rng = rng_for(13);
    let mut nontrivial = 0;
    for trial in 0..200 {
        let p = rng.gen_range(2..=20);
        let n = rng.gen_range(p..3 * p + 2);
        let x = random_matrix(n, p, &mut rng);
        let lambda: Vec<f64> =
            (0..p).map(|_| f64::exp(rng.gen_range(0.1_f64.ln()..10.0_f64.ln()))).collect();
        let omega = random_correlation(p, &mut rng);
        let rep = spectral_bounds(&x, &lambda, &omega).unwrap();
        assert!(
            rep.lower <= rep.actual * (1.0 + 1e-12) + 1e-300,
            "trial {trial}: lower {:.6e} > actual {:.6e}",
            rep.lower,
            rep.actual
        );
        assert!(
            rep.actual <= rep.upper * (1.0 + 1e-12),
            "trial {trial}: actual {:.6e} > upper {:.6e}",
            rep.actual,
            rep.upper
        );
        if rep.actual > 1e-12 {
            nontrivial += 1;
        }
    }
    assert!(nontrivial > 150, "only {nontrivial} informative instances");
}

#[test]
fn spectral_bounds_equicorrelation_closed_form() {
    let p = 6;
    let rho = 0.6;
    let ell: f64 = 1.7;
    let x = DMatrix::identity(p, p);
    let rep = spectral_bounds(&x, &vec![ell; p], &equi(rho, p)).unwrap();

    let omega_max = 1.0 + (p as f64 - 1.0) * rho;
    let omega_min = 1.0 - rho;
    let dev = ((1.0 / omega_min) - 1.0).max(1.0 - 1.0 / omega_max);
    let l2 = ell * ell;
    let lower = dev / (l2 * (1.0 + 1.0 / (l2 * omega_min)) * (1.0 + 1.0 / l2));
    let upper = dev / (l2 * (1.0 + 1.0 / (l2 * omega_max)) * (1.0 + 1.0 / l2));
    assert!((rep.lower - lower).abs() < 1e-12);
    assert!((rep.upper - upper).abs() < 1e-12);
    assert!((rep.omega_max - omega_max).abs() < 1e-10);
    assert!((rep.omega_min - omega_min).abs() < 1e-10);
}

#[test]
fn kl_gaussian_agrees_with_monte_carlo() {
    let mut rng = rng_for(14);
    let p = 3;
    let mean_p = DVector::from_vec(vec![0.2, -0.4, 1.0]);
    let mean_q = DVector::from_vec(vec![0.0, 0.3, 0.5]);
    let cov_p = {
        let c = random_correlation(p, &mut rng);
        c.into_entries() * 0.8
    };
    let cov_q = {
        let c = random_correlation(p, &mut rng);
        c.into_entries() * 1.3
    };
    let exact = kl_gaussian(&mean_p, &cov_p, &mean_q, &cov_q).unwrap();

    // Monte Carlo estimate of E_P[ln p - ln q].
    let lp = nalgebra::Cholesky::new(cov_p.clone()).unwrap();
    let lq = nalgebra::Cholesky::new(cov_q.clone()).unwrap();
    let logdet_p: f64 = 2.0 * lp.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let logdet_q: f64 = 2.0 * lq.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let draws = 1_000_000;
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..draws {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let xv = &mean_p + lp.l() * z;
        let dp = &xv - &mean_p;
        let dq = &xv - &mean_q;
        let quad_p = dp.dot(&lp.solve(&dp));
        let quad_q = dq.dot(&lq.solve(&dq));
        let term = 0.5 * (quad_q - quad_p + logdet_q - logdet_p);
        acc += term;
        acc2 += term * term;
    }
    let mc = acc / draws as f64;
    let se = ((acc2 / draws as f64 - mc * mc) / draws as f64).sqrt();
    assert!(
        (mc - exact).abs() < 4.0 * se + 1e-6,
        "mc {mc:.6} vs exact {exact:.6} (se {se:.2e})"
    );
}

#[test]
fn kl_prior_monotone_in_rho_and_dimension() {
    for kind in [StructureKind::Ar1, StructureKind::Equicorrelation] {
        let mut last = -1.0;
        for k in 0..=9 {
            let rho = k as f64 * 0.1;
            let v = kl_prior(&make_structure(&StructureSpec::new(kind, rho), 12).unwrap()).unwrap();
            assert!(v > last, "{kind} not increasing at rho={rho}");
            last = v;
        }
    }
    let v10 = kl_prior(&make_structure(&StructureSpec::new(StructureKind::Ar1, 0.8), 10).unwrap())
        .unwrap();
    let v20 = kl_prior(&make_structure(&StructureSpec::new(StructureKind::Ar1, 0.8), 20).unwrap())
        .unwrap();
    assert!(v20 > v10);
}

#[test]
fn kl_prior_positive_unless_identity() {
    assert_eq!(kl_prior(&CorrelationMatrix::identity(7)).unwrap(), 0.0);
    let mut rng = rng_for(15);
    for _ in 0..20 {
        let omega = random_correlation(5, &mut rng);
        if omega.is_identity() {
            continue;
        }
        assert!(kl_prior(&omega).unwrap() > 0.0);
    }
}

#[test]
fn joint_prior_grid_symmetry_and_conditional_slice() {
    // Only the beta-prime ladder with pinned alpha has fully independent
    // coordinates at rho = 0; every other kind shares a global latent, so
    // conditioning on b2 would tilt the b1 margin.
    let y = DVector::from_fn(20, |i, _| (i as f64 * 0.37).sin());
    let x = DMatrix::identity(20, 2);
    let mut prior = default_spec(PriorKind::Bp, 20, 2, &y, &x);
    prior.set("alpha", 0.4).unwrap();
    let grid = GridSpec {
        bins: 40,
        min: -6.0,
        max: 6.0,
    };
    let pg = mc_prior_grid(&prior, &equi(0.0, 2), 200_000, grid, 99).unwrap();

    // Exchangeability: mass above and below the diagonal agrees.
    let (mut upper, mut lower) = (0u64, 0u64);
    for i in 0..grid.bins {
        for j in 0..grid.bins {
            if i < j {
                upper += pg.counts[i][j];
            }
            if i > j {
                lower += pg.counts[i][j];
            }
        }
    }
    let imbalance = (upper as f64 - lower as f64).abs() / (upper + lower) as f64;
    assert!(imbalance < 0.02, "imbalance {imbalance}");

    // Sign-flip symmetry of the b1 margin.
    let m1: Vec<u64> = (0..grid.bins)
        .map(|i| (0..grid.bins).map(|j| pg.counts[i][j]).sum())
        .collect();
    let total: u64 = m1.iter().sum();
    for k in 0..grid.bins / 2 {
        let a = m1[k] as f64;
        let b = m1[grid.bins - 1 - k] as f64;
        assert!(
            (a - b).abs() < 6.0 * ((a + b).sqrt() + 1.0),
            "bins {k} vs {}: {a} vs {b}",
            grid.bins - 1 - k
        );
    }

    // Conditioning on b2 = 0 at rho = 0 recovers the b1 margin shape.
    let slice = pg.conditional_slice(0.0, 0.02).unwrap();
    let slice_total: u64 = slice.iter().sum();
    assert!(slice_total >= 100);
    let mid_frac_joint = m1[grid.bins / 2 - 1] as f64 / total as f64
        + m1[grid.bins / 2] as f64 / total as f64;
    let mid_frac_slice = slice[grid.bins / 2 - 1] as f64 / slice_total as f64
        + slice[grid.bins / 2] as f64 / slice_total as f64;
    assert!(
        (mid_frac_joint - mid_frac_slice).abs() < 0.05,
        "joint {mid_frac_joint} vs slice {mid_frac_slice}"
    );

    // A slice far outside the draw range has too few points.
    assert!(matches!(
        pg.conditional_slice(5.9, 0.0001),
        Err(Error::InsufficientDraws { .. })
    ));
}

#[test]
fn diagonal_band_mass_grows_with_correlation() {
    let y = DVector::from_fn(20, |i, _| (i as f64 * 0.37).sin());
    let x = DMatrix::identity(20, 2);
    let prior = default_spec(PriorKind::Hs, 20, 2, &y, &x);
    let grid = GridSpec::default();
    let at = |rho: f64| {
        mc_prior_grid(&prior, &equi(rho, 2), 100_000, grid, 7)
            .unwrap()
            .diagonal_band_mass(0.5)
    };
    let m0 = at(0.0);
    let m9 = at(0.9);
    assert!(m9 > m0 + 0.01, "band mass {m0} -> {m9}");
}

#[test]
fn mc_grid_is_reproducible() {
    let y = DVector::from_fn(10, |i, _| i as f64);
    let x = DMatrix::identity(10, 2);
    let prior = default_spec(PriorKind::R2d2, 10, 2, &y, &x);
    let g = GridSpec::default();
    let a = mc_prior_grid(&prior, &equi(0.5, 2), 30_000, g, 5).unwrap();
    let b = mc_prior_grid(&prior, &equi(0.5, 2), 30_000, g, 5).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.counts, b.counts);
}
