//! Monte-Carlo draws of the cascaded channel, the EMI and the noise, and
//! synthesis of the received training and data signals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, standard_complex_normal, CMat, CVec};
use crate::statistics::{psd_factor, PhaseConfiguration, ScenarioStatistics};

/// Independent random streams per purpose. Keeping channels, training
/// noise and data noise on separate streams gives every method the same
/// draws at a given trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Channel = 0,
    Training = 1,
    Data = 2,
    Phase = 3,
}

/// `(seed, stream)` pair; the stream is the trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRandomness {
    pub seed: u64,
    pub stream: u64,
}

impl TrialRandomness {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut rng =
            ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(purpose as u64 + 1)));
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// UE→RIS channel (M).
    pub h: CVec,
    /// RIS→BS channel, row `n` is `g_nᵀ` (N × M).
    pub g: CMat,
    /// Cascaded channel; block `n` is `g_n ⊙ h` (MN).
    pub x: CVec,
}

impl ChannelRealization {
    pub fn from_parts(h: CVec, g: CMat) -> Result<Self> {
        let m = h.len();
        if g.ncols() != m {
            return Err(Error::Shape(format!(
                "G has {} columns, h has {m} entries",
                g.ncols()
            )));
        }
        let n = g.nrows();
        let x = CVec::from_fn(n * m, |k, _| g[(k / m, k % m)] * h[k % m]);
        Ok(Self { h, g, x })
    }
}

/// Correlation square roots for one scenario, shared across trials.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    l_h: CMat,
    /// Factor of `R_g' ⊗ R_g` for the stacked `[g_1; …; g_N]`.
    l_g: CMat,
    l_e: CMat,
    m: usize,
    n: usize,
}

impl ChannelSampler {
    pub fn new(stats: &ScenarioStatistics) -> Result<Self> {
        let l_h = psd_factor(stats.r_h.matrix())?;
        let l_g = psd_factor(stats.r_gp.matrix())?.kronecker(&psd_factor(stats.r_g.matrix())?);
        let l_e = psd_factor(stats.r_e.matrix())?;
        Ok(Self {
            l_h,
            l_g,
            l_e,
            m: stats.m(),
            n: stats.n(),
        })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let h = &self.l_h * standard_complex_normal(rng, self.m);
        let gs = &self.l_g * standard_complex_normal(rng, self.m * self.n);
        let g = CMat::from_fn(self.n, self.m, |n, m| gs[n * self.m + m]);
        ChannelRealization::from_parts(h, g).expect("consistent shapes")
    }

    /// One EMI draw `e ~ CN(0, R_e)` (unit power; scaled by the caller).
    fn emi<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        &self.l_e * standard_complex_normal(rng, self.m)
    }

    /// `yᵗʳ = √ρᵗʳ Φ_{Nτ} x + wᵗʳ + zᵗʳ`, where `w_n(i) = φ(i)ᵀ(g_n ⊙ e(i))`
    /// with a fresh `e(i) ~ CN(0, σ_e² R_e)` per channel use. Index `n·τ + i`.
    pub fn training<R: rand::Rng + ?Sized>(
        &self,
        phi: &PhaseConfiguration,
        real: &ChannelRealization,
        stats: &ScenarioStatistics,
        rng: &mut R,
    ) -> Result<CVec> {
        self.check(phi, real)?;
        Ok(self.synthesize(phi, real, c(stats.powers.rho_tr.sqrt(), 0.0), stats, rng))
    }

    /// `y = √ρ Φ_N x s + w + z` with `w_n = φᵀ(g_n ⊙ e)`.
    pub fn data<R: rand::Rng + ?Sized>(
        &self,
        phi: &PhaseConfiguration,
        real: &ChannelRealization,
        s: num_complex::Complex64,
        stats: &ScenarioStatistics,
        rng: &mut R,
    ) -> Result<CVec> {
        self.check(phi, real)?;
        if phi.tau() != 1 {
            return Err(Error::Shape(format!(
                "data phase must be a single row, got {}",
                phi.tau()
            )));
        }
        Ok(self.synthesize(phi, real, s * stats.powers.rho.sqrt(), stats, rng))
    }

    fn synthesize<R: rand::Rng + ?Sized>(
        &self,
        phi: &PhaseConfiguration,
        real: &ChannelRealization,
        scale: num_complex::Complex64,
        stats: &ScenarioStatistics,
        rng: &mut R,
    ) -> CVec {
        let p = &stats.powers;
        let tau = phi.tau();
        let (se, sz) = (p.sigma_e2.sqrt(), p.sigma2.sqrt());
        let mut y = CVec::zeros(self.n * tau);
        for i in 0..tau {
            let e = self.emi(rng) * c(se, 0.0);
            let z = standard_complex_normal(rng, self.n) * c(sz, 0.0);
            let row = phi.matrix().row(i);
            for n in 0..self.n {
                let mut sig = c(0.0, 0.0);
                let mut w = c(0.0, 0.0);
                for m in 0..self.m {
                    sig += row[m] * real.x[n * self.m + m];
                    w += row[m] * real.g[(n, m)] * e[m];
                }
                y[n * tau + i] = sig * scale + w + z[n];
            }
        }
        y
    }

    fn check(&self, phi: &PhaseConfiguration, real: &ChannelRealization) -> Result<()> {
        if phi.m() != self.m || real.h.len() != self.m || real.g.nrows() != self.n {
            return Err(Error::Shape(format!(
                "phase has {} columns, realization is {}x{}, scenario is N={} M={}",
                phi.m(),
                real.g.nrows(),
                real.h.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

pub fn sample_channel_realization(
    stats: &ScenarioStatistics,
    rng: &TrialRandomness,
) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(stats)?.sample(&mut rng.rng(Purpose::Channel)))
}

pub fn simulate_training(
    phi: &PhaseConfiguration,
    real: &ChannelRealization,
    stats: &ScenarioStatistics,
    rng: &TrialRandomness,
) -> Result<CVec> {
    ChannelSampler::new(stats)?.training(phi, real, stats, &mut rng.rng(Purpose::Training))
}

pub fn simulate_data(
    phi: &PhaseConfiguration,
    real: &ChannelRealization,
    s: num_complex::Complex64,
    stats: &ScenarioStatistics,
    rng: &TrialRandomness,
) -> Result<CVec> {
    ChannelSampler::new(stats)?.data(phi, real, s, stats, &mut rng.rng(Purpose::Data))
}

/// Unit-power circularly symmetric Gaussian symbol.
pub fn data_symbol<R: rand::Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    standard_complex_normal(rng, 1)[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_psd;
    use crate::statistics::{derive_scenario, CorrelationMatrix, Powers};

    fn scenario(seed: u64, m: usize, n: usize, powers: Powers) -> ScenarioStatistics {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mk = |d| CorrelationMatrix::new(random_psd(&mut rng, d, d)).unwrap();
        let (rh, rg, rgp, re) = (mk(m), mk(m), mk(n), mk(m));
        derive_scenario(rh, rg, rgp, re, powers).unwrap()
    }

    #[test]
    fn zero_ue_correlation_gives_zero_channel() {
        let mut s = scenario(1, 4, 2, Powers::from_db(10.0, 10.0));
        s.r_h = CorrelationMatrix::zeros(4);
        let real = sample_channel_realization(&s, &TrialRandomness::new(5, 0)).unwrap();
        assert_eq!(real.h.norm(), 0.0);
        assert_eq!(real.x.norm(), 0.0);
    }

    #[test]
    fn same_seed_and_stream_reproduce() {
        let s = scenario(2, 4, 2, Powers::from_db(10.0, 10.0));
        let a = sample_channel_realization(&s, &TrialRandomness::new(42, 0)).unwrap();
        let b = sample_channel_realization(&s, &TrialRandomness::new(42, 0)).unwrap();
        let other = sample_channel_realization(&s, &TrialRandomness::new(42, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn cascade_blocks_are_exact_products() {
        let s = scenario(3, 5, 3, Powers::from_db(10.0, 10.0));
        let real = sample_channel_realization(&s, &TrialRandomness::new(9, 4)).unwrap();
        for n in 0..3 {
            for m in 0..5 {
                assert_eq!(real.x[n * 5 + m], real.g[(n, m)] * real.h[m]);
            }
        }
    }

    #[test]
    fn empirical_cascade_covariance() {
        let s = scenario(4, 4, 2, Powers::from_db(10.0, 10.0));
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut acc = CMat::zeros(8, 8);
        for _ in 0..draws {
            let x = sampler.sample(&mut rng).x;
            acc += &x * x.adjoint();
        }
        acc /= c(draws as f64, 0.0);
        let rel = (&acc - s.r_x.matrix()).norm() / s.r_x.matrix().norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn noiseless_training_is_exact() {
        let s = scenario(
            5,
            4,
            2,
            Powers {
                rho_tr: 2.0,
                rho: 1.0,
                sigma2: 0.0,
                sigma_e2: 0.0,
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = PhaseConfiguration::random(&mut rng, 3, 4);
        let real = sample_channel_realization(&s, &TrialRandomness::new(1, 1)).unwrap();
        let y = simulate_training(&phi, &real, &s, &TrialRandomness::new(1, 1)).unwrap();
        let expected = phi.stacked(2) * &real.x * c(2f64.sqrt(), 0.0);
        assert!((y - expected).norm() < 1e-12);
    }

    #[test]
    fn noiseless_data_is_scaled_gain() {
        let s = scenario(
            6,
            4,
            1,
            Powers {
                rho_tr: 1.0,
                rho: 3.0,
                sigma2: 0.0,
                sigma_e2: 0.0,
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = PhaseConfiguration::random(&mut rng, 1, 4);
        let real = sample_channel_realization(&s, &TrialRandomness::new(2, 0)).unwrap();
        let sym = c(0.3, -0.8);
        let y = simulate_data(&phi, &real, sym, &s, &TrialRandomness::new(2, 0)).unwrap();
        let expected = (phi.matrix().row(0) * &real.x)[(0, 0)] * sym * 3f64.sqrt();
        assert!((y[0] - expected).norm() < 1e-12);
        let zero =
            simulate_data(&phi, &real, c(0.0, 0.0), &s, &TrialRandomness::new(2, 0)).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn single_use_emi_variance() {
        let s = scenario(
            7,
            4,
            1,
            Powers {
                rho_tr: 1.0,
                rho: 1.0,
                sigma2: 0.0,
                sigma_e2: 0.5,
            },
        );
        let sampler = ChannelSampler::new(&s).unwrap();
        let phi = PhaseConfiguration::new(CMat::from_element(1, 4, c(1.0, 0.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let mut real = sampler.sample(&mut rng);
            real.x.fill(c(0.0, 0.0));
            acc += sampler.training(&phi, &real, &s, &mut rng).unwrap()[0].norm_sqr();
        }
        let expected = 0.5 * s.r_q.matrix().iter().map(|z| z.re).sum::<f64>();
        assert!((acc / draws as f64 - expected).abs() / expected < 0.03);
    }

    #[test]
    fn data_emi_covariance_matches_model() {
        let s = scenario(
            8,
            4,
            2,
            Powers {
                rho_tr: 1.0,
                rho: 1.0,
                sigma2: 0.0,
                sigma_e2: 1.0,
            },
        );
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = PhaseConfiguration::random(&mut rng, 1, 4);
        let draws = 100_000;
        let mut acc = CMat::zeros(2, 2);
        for _ in 0..draws {
            let real = sampler.sample(&mut rng);
            let w = sampler
                .data(&phi, &real, c(0.0, 0.0), &s, &mut rng)
                .unwrap();
            acc += &w * w.adjoint();
        }
        acc /= c(draws as f64, 0.0);
        let model = crate::statistics::data_emi_covariance(&phi, &s).unwrap();
        assert!((&acc - &model).norm() / model.norm() < 0.03);
    }

    #[test]
    fn channels_are_uncorrelated_and_emi_white() {
        let s = scenario(
            9,
            3,
            1,
            Powers {
                rho_tr: 1.0,
                rho: 1.0,
                sigma2: 0.0,
                sigma_e2: 1.0,
            },
        );
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 100_000;
        let (mut cross, mut cross_sq) = (CMat::zeros(3, 3), CMat::zeros(3, 3));
        let (mut ee, mut ee_sq) = (CMat::zeros(3, 3), CMat::zeros(3, 3));
        for _ in 0..draws {
            let real = sampler.sample(&mut rng);
            let (e1, e2) = (sampler.emi(&mut rng), sampler.emi(&mut rng));
            let g = real.g.row(0).transpose();
            let hg = &real.h * g.adjoint();
            let e12 = &e1 * e2.adjoint();
            cross += &hg;
            cross_sq += hg.map(|z| c(z.norm_sqr(), 0.0));
            ee += &e12;
            ee_sq += e12.map(|z| c(z.norm_sqr(), 0.0));
        }
        let d = draws as f64;
        for (sum, sq) in [(cross, cross_sq), (ee, ee_sq)] {
            for (m, v) in sum.iter().zip(sq.iter()) {
                let se = (v.re / d).sqrt() / d.sqrt();
                assert!((m / d).norm() < 3.0 * se * 2f64.sqrt());
            }
        }
    }
}
