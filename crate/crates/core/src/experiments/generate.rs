use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{DimSpec, ExperimentConfig, LambdaSpec, NSpec, NoiseKind};
use crate::basis::{Frequency, HypothesisSpace};
use crate::error::{Error, Result};
use crate::estimator::{Dataset, DatasetMeta};
use crate::spectral::SpectralFunction;

/// Independent stream for run `index`, determined by the master seed alone.
pub fn run_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A drawn regression function together with its hypothesis space.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub f_rho: SpectralFunction,
    pub hs: HypothesisSpace,
    pub lambda: f64,
}

fn draw_lambda<R: Rng + ?Sized>(spec: LambdaSpec, rng: &mut R) -> f64 {
    match spec {
        LambdaSpec::Fixed(l) => l,
        LambdaSpec::Uniform(lo, hi) => loop {
            let l = rng.random_range(lo..hi);
            if l > 0.0 {
                break l;
            }
        },
    }
}

pub fn gen_regression_function<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<Scenario> {
    let lambda = draw_lambda(cfg.lambda, rng);
    let sd = lambda.sqrt();
    let pairs: Vec<u32> = index::sample(rng, cfg.pool.size(), cfg.n_pairs)
        .into_iter()
        .map(|i| cfg.pool.lo + i as u32)
        .collect();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut terms = Vec::with_capacity(2 * pairs.len());
    for &q in &pairs {
        terms.push((Frequency::sin(q), normal.sample(rng)));
        terms.push((Frequency::cos(q), normal.sample(rng)));
    }
    let f_rho = SpectralFunction::from_terms(cfg.domain_width, terms)?;
    let half = match cfg.dim {
        DimSpec::Fixed(e) => e / 2,
        DimSpec::UniformHalf(lo, hi) => rng.random_range(lo..=hi),
    };
    let freqs: Vec<u32> = index::sample(rng, pairs.len(), half)
        .into_iter()
        .map(|i| pairs[i])
        .collect();
    let hs = HypothesisSpace::uniform(cfg.domain_width, freqs, lambda)?;
    Ok(Scenario { f_rho, hs, lambda })
}

pub fn draw_n<R: Rng + ?Sized>(spec: NSpec, hs: &HypothesisSpace, rng: &mut R) -> usize {
    match spec {
        NSpec::Fixed(n) => n,
        NSpec::Range { lo, hi, step } => lo + step * rng.random_range(0..=(hi - lo) / step),
        NSpec::UpToHalfDim { min } => rng.random_range(min..=hs.half_dim().max(min)),
    }
}

/// Noise variance for a target signal-to-noise ratio: `σ² = ‖f‖²/SNR`.
pub fn noise_variance(f_rho: &SpectralFunction, snr: f64) -> f64 {
    f_rho.l2_norm().powi(2) / snr
}

pub fn draw_noise<R: Rng + ?Sized>(kind: NoiseKind, sigma: f64, rng: &mut R) -> f64 {
    match kind {
        NoiseKind::Uniform => {
            let a = sigma * 3f64.sqrt();
            if a == 0.0 {
                0.0
            } else {
                rng.random_range(-a..=a)
            }
        }
        NoiseKind::Gaussian => sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
    }
}

pub fn gen_dataset<R: Rng + ?Sized>(
    f_rho: &SpectralFunction,
    cfg: &ExperimentConfig,
    n: usize,
    seed: u64,
    rng: &mut R,
) -> Result<Dataset> {
    let h = f_rho.width() / 2.0;
    let sigma = noise_variance(f_rho, cfg.snr).sqrt();
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-h..=h)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| f_rho.eval_unchecked(x) + draw_noise(cfg.noise, sigma, rng))
        .collect();
    Ok(Dataset::new(xs, ys)?.with_meta(DatasetMeta {
        noise_std: sigma,
        snr: cfg.snr,
        seed,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentName;

    #[test]
    fn deterministic_scenarios() {
        let cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        let a = gen_regression_function(&cfg, &mut run_rng(7, 3)).unwrap();
        let b = gen_regression_function(&cfg, &mut run_rng(7, 3)).unwrap();
        assert_eq!(a.f_rho, b.f_rho);
        assert_eq!(a.hs, b.hs);
        let c = gen_regression_function(&cfg, &mut run_rng(7, 4)).unwrap();
        assert_ne!(a.f_rho, c.f_rho);
    }

    #[test]
    fn scenario_structure() {
        let cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        let s = gen_regression_function(&cfg, &mut run_rng(1, 0)).unwrap();
        assert_eq!(s.f_rho.num_terms(), 40);
        assert_eq!(s.hs.dim(), 20);
        assert!(s.f_rho.terms().all(|(f, _)| (1..=30).contains(&f.q())));
        for &q in s.hs.freqs() {
            assert_ne!(s.f_rho.coeff(Frequency::sin(q)), 0.0);
        }
        assert!(s.f_rho.project(&s.hs).tail_energy > 0.0);
        assert!(s.hs.lambdas().iter().all(|l| *l == s.lambda));
    }

    #[test]
    fn full_cover_has_no_tail() {
        let mut cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        cfg.dim = DimSpec::Fixed(40);
        let s = gen_regression_function(&cfg, &mut run_rng(1, 0)).unwrap();
        assert_eq!(s.f_rho.project(&s.hs).tail_energy, 0.0);
    }

    #[test]
    fn uniform_lambda_mean() {
        let cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        let mean = (0..500)
            .map(|i| {
                gen_regression_function(&cfg, &mut run_rng(2, i))
                    .unwrap()
                    .lambda
            })
            .sum::<f64>()
            / 500.0;
        assert!((2.2..=2.8).contains(&mean), "{mean}");
    }

    #[test]
    fn uniform_noise_variance() {
        let mut rng = run_rng(3, 0);
        let sigma = 1.7;
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| draw_noise(NoiseKind::Uniform, sigma, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01);
        assert!(draws.iter().all(|d| d.abs() <= sigma * 3f64.sqrt()));
    }

    #[test]
    fn empirical_snr() {
        let cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        let mut rng = run_rng(4, 0);
        let s = gen_regression_function(&cfg, &mut rng).unwrap();
        let d = gen_dataset(&s.f_rho, &cfg, 100_000, 0, &mut rng).unwrap();
        let signal: Vec<f64> = d.xs().iter().map(|&x| s.f_rho.eval(x).unwrap()).collect();
        let noise: Vec<f64> = d.ys().iter().zip(&signal).map(|(y, f)| y - f).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let snr = var(&signal) / var(&noise);
        assert!((snr / cfg.snr - 1.0).abs() < 0.05, "{snr}");
    }

    #[test]
    fn noiseless_limit() {
        let mut cfg = ExperimentConfig::preset(ExperimentName::SzCompare);
        cfg.snr = f64::INFINITY;
        let mut rng = run_rng(5, 0);
        let s = gen_regression_function(&cfg, &mut rng).unwrap();
        let d = gen_dataset(&s.f_rho, &cfg, 50, 0, &mut rng).unwrap();
        for (x, y) in d.xs().iter().zip(d.ys()) {
            assert_eq!(*y, s.f_rho.eval(*x).unwrap());
        }
    }

    #[test]
    fn n_draws_respect_spec() {
        let hs = HypothesisSpace::uniform(1.0, vec![1, 2, 3, 4, 5, 6, 7], 1.0).unwrap();
        let mut rng = run_rng(6, 0);
        for _ in 0..200 {
            let n = draw_n(
                NSpec::Range {
                    lo: 300,
                    hi: 6990,
                    step: 15,
                },
                &hs,
                &mut rng,
            );
            assert!((300..=6990).contains(&n) && (n - 300).is_multiple_of(15));
            let n = draw_n(NSpec::UpToHalfDim { min: 5 }, &hs, &mut rng);
            assert!((5..=7).contains(&n));
        }
        assert_eq!(draw_n(NSpec::Fixed(9), &hs, &mut rng), 9);
    }
}
