use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_core::channel::{ChannelSampler, Purpose, TrialRandomness};
use ris_core::combining::{combining_q, mmse_combiner, HardeningSample};
use ris_core::estimation::{EstimatorKind, LinearEstimator};
use ris_core::geometry::{AngleCoordinate, ArrayGeometry};
use ris_core::linalg::{c, hermitian_eigen, random_psd, standard_complex_normal, CMat};
use ris_core::statistics::{
    derive_scenario, CorrelationMatrix, PhaseConfiguration, Powers, ScenarioStatistics,
};

fn scenario(seed: u64, m: usize, n: usize, rank: usize, powers: Powers) -> ScenarioStatistics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rh = CorrelationMatrix::new(random_psd(&mut rng, m, rank)).unwrap();
    let rg = CorrelationMatrix::new(random_psd(&mut rng, m, m)).unwrap();
    let rgp = CorrelationMatrix::new(random_psd(&mut rng, n, n)).unwrap();
    let re = CorrelationMatrix::new(random_psd(&mut rng, m, m)).unwrap();
    derive_scenario(rh, rg, rgp, re, powers).unwrap()
}

#[test]
fn lmmse_error_is_orthogonal_to_estimate() {
    let s = scenario(1, 4, 1, 4, Powers::from_db(5.0, 3.0));
    let phi = PhaseConfiguration::dft(3, 4).unwrap();
    let est = LinearEstimator::lmmse(&phi, &s).unwrap();
    let sampler = ChannelSampler::new(&s).unwrap();
    let trials = 100_000u64;
    let (mut sum, mut sq) = (CMat::zeros(4, 4), CMat::zeros(4, 4));
    for t in 0..trials {
        let tr = TrialRandomness::new(3, t);
        let real = sampler.sample(&mut tr.rng(Purpose::Channel));
        let y = sampler
            .training(&phi, &real, &s, &mut tr.rng(Purpose::Training))
            .unwrap();
        let xhat = est.apply(&y).unwrap();
        let outer = (&real.x - &xhat) * xhat.adjoint();
        sq += outer.map(|z| c(z.norm_sqr(), 0.0));
        sum += outer;
    }
    let d = trials as f64;
    for (m, v) in sum.iter().zip(sq.iter()) {
        let se = (v.re / d).sqrt() / d.sqrt();
        assert!(
            (m / d).norm() < 3.0 * se * 2f64.sqrt(),
            "{} vs {se}",
            (m / d).norm()
        );
    }
}

#[test]
fn empirical_rmse_matches_analytic_in_db() {
    let s = scenario(2, 4, 1, 4, Powers::from_db(10.0, 5.0));
    let phi = PhaseConfiguration::dft(4, 4).unwrap();
    let est = LinearEstimator::lmmse(&phi, &s).unwrap();
    let sampler = ChannelSampler::new(&s).unwrap();
    let errs: Vec<f64> = (0..100_000u64)
        .map(|t| {
            let tr = TrialRandomness::new(4, t);
            let real = sampler.sample(&mut tr.rng(Purpose::Channel));
            let y = sampler
                .training(&phi, &real, &s, &mut tr.rng(Purpose::Training))
                .unwrap();
            (&real.x - est.apply(&y).unwrap()).norm_squared()
        })
        .collect();
    let emp = ris_core::estimation::empirical_rmse(&errs, 4).unwrap();
    let analytic = ris_core::estimation::to_db(est.analytic_mse() / 4.0);
    assert!((emp - analytic).abs() < 0.15, "{emp} vs {analytic}");
}

#[test]
fn perfect_csi_dominates_estimated_csi() {
    let s = scenario(5, 4, 2, 4, Powers::from_db(10.0, 5.0));
    let phi_tr = PhaseConfiguration::dft(4, 4).unwrap();
    let est = LinearEstimator::lmmse(&phi_tr, &s).unwrap();
    let err = est.error_covariance().unwrap().clone();
    let phi = phi_tr.row(0);
    let sampler = ChannelSampler::new(&s).unwrap();
    let (mut perfect, mut estimated) = (Vec::new(), Vec::new());
    for t in 0..1000u64 {
        let tr = TrialRandomness::new(8, t);
        let real = sampler.sample(&mut tr.rng(Purpose::Channel));
        let y = sampler
            .training(&phi_tr, &real, &s, &mut tr.rng(Purpose::Training))
            .unwrap();
        let xhat = est.apply(&y).unwrap();
        let zero = CMat::zeros(8, 8);
        perfect.push(mmse_combiner(&phi, &real.x, &zero, &s).unwrap().sinr);
        let v = mmse_combiner(&phi, &xhat, &err, &s).unwrap().v;
        estimated.push(HardeningSample::new(&phi, &v, &real.x, &s).unwrap());
    }
    let a = ris_core::combining::se_perfect(&perfect, 4, 40).unwrap();
    let b = ris_core::combining::se_hardening(&estimated, &s, 4, 40).unwrap();
    assert!(a.value >= b.value, "{} < {}", a.value, b.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn response_has_unit_modulus(mh in 1usize..7, mv in 1usize..7, az in -1.5f64..1.5, el in -1.5f64..1.5) {
        let geom = ArrayGeometry::new(mh, mv, 0.5).unwrap();
        let a = geom.array_response(AngleCoordinate::new(az, el).unwrap());
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn estimator_mse_ordering(seed in 0u64..5_000, rank in 1usize..5, tau in 4usize..7, snr in -5.0f64..25.0, sir in -5.0f64..20.0) {
        let s = scenario(seed, 4, 1, rank, Powers::from_db(snr, sir));
        let phi = PhaseConfiguration::dft(tau, 4).unwrap();
        let lmmse = LinearEstimator::new(EstimatorKind::Lmmse, &phi, &s).unwrap();
        let rsls = LinearEstimator::new(EstimatorKind::Rsls, &phi, &s).unwrap();
        let ls = LinearEstimator::new(EstimatorKind::Ls, &phi, &s).unwrap();
        let tr = s.r_x.matrix().trace().re;
        prop_assert!(lmmse.analytic_mse() >= 0.0);
        prop_assert!(lmmse.analytic_mse() <= tr * (1.0 + 1e-12));
        prop_assert!(lmmse.analytic_mse() <= rsls.analytic_mse() * (1.0 + 1e-9) + 1e-14);
        prop_assert!(rsls.analytic_mse() <= ls.analytic_mse() * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn combiner_mse_in_unit_interval(seed in 0u64..5_000, m in 2usize..6, n in 1usize..4, snr in -10.0f64..30.0) {
        let s = scenario(seed, m, n, m, Powers::from_db(snr, 5.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = PhaseConfiguration::random(&mut rng, 1, m);
        let xhat = standard_complex_normal(&mut rng, m * n);
        let err = random_psd(&mut rng, m * n, m * n) * c(0.1, 0.0);
        let comb = mmse_combiner(&phi, &xhat, &err, &s).unwrap();
        prop_assert!(comb.e_s > 0.0 && comb.e_s <= 1.0);
        prop_assert!(comb.sinr >= 0.0);
        let q = combining_q(&phi, &xhat, &err, &s).unwrap();
        let (ev, _) = hermitian_eigen(&q);
        prop_assert!(ev.iter().all(|&e| e >= -1e-10 * ev.iter().cloned().fold(1.0, f64::max)));
    }

    #[test]
    fn sinr_quotient_is_scale_invariant(seed in 0u64..5_000, m in 2usize..6, n in 1usize..4, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let s = scenario(seed, m, n, m, Powers::from_db(10.0, 5.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let phi = PhaseConfiguration::random(&mut rng, 1, m);
        let x = standard_complex_normal(&mut rng, m * n);
        let v = standard_complex_normal(&mut rng, n);
        let a = HardeningSample::new(&phi, &v, &x, &s).unwrap();
        let b = HardeningSample::new(&phi, &(&v * c(re, im)), &x, &s).unwrap();
        let p = &s.powers;
        let quotient = |h: &HardeningSample| p.rho * h.gain.norm_sqr() / (p.sigma_e2 * h.emi + p.sigma2 * h.noise);
        prop_assert!((quotient(&a) - quotient(&b)).abs() <= 1e-10 * quotient(&a).max(1.0));
    }

    #[test]
    fn correlations_are_psd(mh in 1usize..5, mv in 1usize..5, az in -80.0f64..80.0, el in -80.0f64..80.0, spread in 2.0f64..40.0) {
        let geom = ArrayGeometry::new(mh, mv, 0.5).unwrap();
        let center = AngleCoordinate::from_degrees(az, el).unwrap();
        let spec = ris_core::statistics::ScatteringSpec::gaussian(center, spread.to_radians(), 1.0).unwrap();
        let r = ris_core::statistics::build_correlation(&geom, &spec).unwrap();
        let (ev, _) = hermitian_eigen(r.matrix());
        let tr = r.matrix().trace().re;
        prop_assert!(ev.iter().all(|&e| e >= -1e-10 * tr));
        prop_assert!(r.matrix().diagonal().iter().all(|d| (d.re - 1.0).abs() < 1e-8 && d.im.abs() < 1e-12));
    }
}
