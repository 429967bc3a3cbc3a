//! Empirical-Bayes view of the ridge estimator.
//!
//! With prior `α ~ N(0, Σ/N)` and noise variance `γ`, the posterior mean of
//! `α` is the ridge solution. This module provides the marginal-likelihood
//! objective, a two-block Gibbs sampler over `(α, γ)`, and the exact expected
//! coefficient error `ℳ(γ)` of the ridge estimator.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::HypothesisSpace;
use crate::error::{Error, Result};
use crate::estimator::{Dataset, PINV_RTOL};
use crate::spectral::SpectralFunction;

/// Precomputed pieces of the marginal likelihood for one dataset.
#[derive(Debug, Clone)]
pub struct EvidenceModel {
    phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    phi_ty: DVector<f64>,
    y: DVector<f64>,
    lambdas: Vec<f64>,
}

impl EvidenceModel {
    pub fn new(hs: &HypothesisSpace, d: &Dataset) -> Result<Self> {
        let phi = hs.design_matrix(d.xs())?;
        let y = DVector::from_column_slice(d.ys());
        Ok(EvidenceModel {
            gram: phi.tr_mul(&phi),
            phi_ty: phi.tr_mul(&y),
            phi,
            y,
            lambdas: hs.lambdas().to_vec(),
        })
    }

    fn n(&self) -> usize {
        self.phi.nrows()
    }

    fn check(gamma: f64, sigma2: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "gamma",
                reason: format!("must be positive, got {gamma}"),
            });
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "sigma2",
                reason: format!("must be positive, got {sigma2}"),
            });
        }
        Ok(())
    }

    fn finite(v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("negative log evidence is {v}")))
        }
    }

    /// `YᵀΣ_Y⁻¹Y + log det Σ_Y`, picking the cheaper of the two exact routes.
    pub fn neg_log_evidence(&self, gamma: f64, sigma2: f64) -> Result<f64> {
        if self.n() <= self.lambdas.len() {
            self.dense(gamma, sigma2)
        } else {
            self.woodbury(gamma, sigma2)
        }
    }

    /// `E × E` route through `M = NγΣ⁻¹ + ΦᵀΦ`.
    pub fn woodbury(&self, gamma: f64, sigma2: f64) -> Result<f64> {
        Self::check(gamma, sigma2)?;
        let n = self.n() as f64;
        let e = self.lambdas.len() as f64;
        let mut m = self.gram.clone();
        for (i, l) in self.lambdas.iter().enumerate() {
            m[(i, i)] += n * gamma / l;
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Numeric("evidence matrix is not positive definite".into()))?;
        let logdet_m: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let sum_log_lambda: f64 = self.lambdas.iter().map(|l| l.ln()).sum();
        let logdet = n * sigma2.ln() - e * (n * gamma).ln() + sum_log_lambda + logdet_m;
        let proj = self.phi_ty.dot(&chol.solve(&self.phi_ty));
        let quad = (self.y.dot(&self.y) - proj) / sigma2;
        Self::finite(quad + logdet)
    }

    /// Direct `N × N` route.
    pub fn dense(&self, gamma: f64, sigma2: f64) -> Result<f64> {
        Self::check(gamma, sigma2)?;
        let n = self.n();
        let scale = sigma2 / (n as f64 * gamma);
        let mut weighted = self.phi.clone();
        for (i, l) in self.lambdas.iter().enumerate() {
            weighted.column_mut(i).scale_mut(l * scale);
        }
        let mut cov = &weighted * self.phi.transpose();
        for t in 0..n {
            cov[(t, t)] += sigma2;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Numeric("output covariance is not positive definite".into()))?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let quad = self.y.dot(&chol.solve(&self.y));
        Self::finite(quad + logdet)
    }
}

pub fn neg_log_evidence(hs: &HypothesisSpace, d: &Dataset, gamma: f64, sigma2: f64) -> Result<f64> {
    EvidenceModel::new(hs, d)?.neg_log_evidence(gamma, sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsConfig {
    pub total_samples: usize,
    pub keep_last: usize,
    pub init_gamma: f64,
    pub seed: u64,
    /// Known noise variance used when scoring samples by evidence.
    pub sigma2: f64,
}

impl GibbsConfig {
    pub fn new(seed: u64, sigma2: f64) -> Self {
        GibbsConfig {
            total_samples: 1500,
            keep_last: 1000,
            init_gamma: 1.0,
            seed,
            sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_samples == 0 || self.keep_last == 0 || self.keep_last > self.total_samples {
            return Err(Error::InvalidArgument {
                name: "keep_last",
                reason: format!(
                    "need 1 <= keep_last <= total_samples, got {} and {}",
                    self.keep_last, self.total_samples
                ),
            });
        }
        if !(self.init_gamma > 0.0 && self.init_gamma.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "init_gamma",
                reason: format!("must be positive, got {}", self.init_gamma),
            });
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "sigma2",
                reason: format!("must be positive, got {}", self.sigma2),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GibbsTrace {
    pub gamma_samples: Vec<f64>,
    pub alpha_samples: Vec<Vec<f64>>,
    pub neg_log_evidence: Vec<f64>,
}

impl GibbsTrace {
    pub fn len(&self) -> usize {
        self.gamma_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_samples.is_empty()
    }

    /// Delimited trace: `sample_index,gamma,neg_log_evidence` plus `alpha_<i>` columns on request.
    pub fn write_csv<W: std::io::Write>(&self, w: W, include_alpha: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let e = self.alpha_samples.first().map_or(0, Vec::len);
        let mut header = vec![
            "sample_index".to_string(),
            "gamma".into(),
            "neg_log_evidence".into(),
        ];
        if include_alpha {
            header.extend((0..e).map(|i| format!("alpha_{i}")));
        }
        out.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![
                k.to_string(),
                self.gamma_samples[k].to_string(),
                self.neg_log_evidence[k].to_string(),
            ];
            if include_alpha {
                row.extend(self.alpha_samples[k].iter().map(f64::to_string));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Exact draws from the two full conditionals.
pub struct GibbsSampler<'a> {
    model: &'a EvidenceModel,
    prior_precision: Vec<f64>,
    /// `ΦΛΦᵀ/N`, kept when `N < E` so draws go through the `N × N` system.
    dual_gram: Option<DMatrix<f64>>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(model: &'a EvidenceModel) -> Self {
        let n = model.n() as f64;
        let dual_gram = (model.n() < model.lambdas.len()).then(|| {
            let mut scaled = model.phi.clone();
            for (j, l) in model.lambdas.iter().enumerate() {
                scaled.column_mut(j).scale_mut(l / n);
            }
            &scaled * model.phi.transpose()
        });
        GibbsSampler {
            prior_precision: model.lambdas.iter().map(|l| n / l).collect(),
            model,
            dual_gram,
        }
    }

    /// Mean and Cholesky factor of the precision of `α | γ`.
    pub fn alpha_conditional(&self, gamma: f64) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
        let mut prec = &self.model.gram / gamma;
        for (i, p) in self.prior_precision.iter().enumerate() {
            prec[(i, i)] += p;
        }
        let chol = prec.cholesky().ok_or_else(|| {
            Error::Numeric(format!(
                "alpha precision not positive definite at gamma={gamma}"
            ))
        })?;
        let mean = chol.solve(&(&self.model.phi_ty / gamma));
        Ok((mean, chol))
    }

    pub fn draw_alpha<R: Rng + ?Sized>(&self, gamma: f64, rng: &mut R) -> Result<DVector<f64>> {
        if let Some(k) = &self.dual_gram {
            return self.draw_alpha_dual(k, gamma, rng);
        }
        let (mean, chol) = self.alpha_conditional(gamma)?;
        let e = mean.len();
        let z = DVector::from_iterator(e, (0..e).map(|_| rng.sample::<f64, _>(StandardNormal)));
        // Lᵀ u = z gives u ~ N(0, (LLᵀ)⁻¹)
        let u = chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        Ok(mean + u)
    }

    /// Prior draw corrected through the data: exact for the same Gaussian, and stable as `γ → 0`
    /// when `ΦᵀΦ` is rank deficient.
    fn draw_alpha_dual<R: Rng + ?Sized>(
        &self,
        k: &DMatrix<f64>,
        gamma: f64,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let e = self.prior_precision.len();
        let n = self.model.n();
        let prior = DVector::from_iterator(
            e,
            self.prior_precision
                .iter()
                .map(|p| rng.sample::<f64, _>(StandardNormal) / p.sqrt()),
        );
        let noise = DVector::from_iterator(
            n,
            (0..n).map(|_| gamma.sqrt() * rng.sample::<f64, _>(StandardNormal)),
        );
        let mut s = k.clone();
        for i in 0..n {
            s[(i, i)] += gamma;
        }
        let chol = s.cholesky().ok_or_else(|| {
            Error::Numeric(format!(
                "dual system not positive definite at gamma={gamma}"
            ))
        })?;
        let w = chol.solve(&(&self.model.y - &self.model.phi * &prior - noise));
        let mut correction = self.model.phi.tr_mul(&w);
        for (c, p) in correction.iter_mut().zip(&self.prior_precision) {
            *c /= p;
        }
        Ok(prior + correction)
    }

    /// Shape `N/2`, rate `‖Y − Φα‖²/2`.
    pub fn gamma_conditional(&self, alpha: &DVector<f64>) -> Result<(f64, f64)> {
        let resid = &self.model.y - &self.model.phi * alpha;
        let r2 = resid.norm_squared();
        if r2 == 0.0 {
            return Err(Error::Degenerate(
                "zero residual makes the gamma conditional improper".into(),
            ));
        }
        Ok((self.model.n() as f64 / 2.0, r2 / 2.0))
    }

    pub fn draw_gamma<R: Rng + ?Sized>(&self, alpha: &DVector<f64>, rng: &mut R) -> Result<f64> {
        let (shape, rate) = self.gamma_conditional(alpha)?;
        let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Numeric(e.to_string()))?;
        let g = dist.sample(rng);
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Numeric(format!(
                "gamma draw {g} is not positive and finite"
            )));
        }
        Ok(g)
    }
}

pub fn gibbs_run(hs: &HypothesisSpace, d: &Dataset, cfg: &GibbsConfig) -> Result<GibbsTrace> {
    let model = EvidenceModel::new(hs, d)?;
    gibbs_run_model(&model, cfg)
}

pub fn gibbs_run_model(model: &EvidenceModel, cfg: &GibbsConfig) -> Result<GibbsTrace> {
    cfg.validate()?;
    let sampler = GibbsSampler::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gamma = cfg.init_gamma;
    let mut trace = GibbsTrace {
        gamma_samples: Vec::with_capacity(cfg.total_samples),
        alpha_samples: Vec::with_capacity(cfg.total_samples),
        neg_log_evidence: Vec::with_capacity(cfg.total_samples),
    };
    for _ in 0..cfg.total_samples {
        let alpha = sampler.draw_alpha(gamma, &mut rng)?;
        gamma = sampler.draw_gamma(&alpha, &mut rng)?;
        trace
            .neg_log_evidence
            .push(model.neg_log_evidence(gamma, cfg.sigma2)?);
        trace.gamma_samples.push(gamma);
        trace.alpha_samples.push(alpha.iter().copied().collect());
    }
    Ok(trace)
}

/// The kept sample with the smallest negative log evidence.
pub fn gamma_hat_gibbs(trace: &GibbsTrace, cfg: &GibbsConfig) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument {
            name: "trace",
            reason: "empty trace".into(),
        });
    }
    let keep = cfg.keep_last.min(trace.len());
    let start = trace.len() - keep;
    let best = (start..trace.len())
        .min_by(|&a, &b| trace.neg_log_evidence[a].total_cmp(&trace.neg_log_evidence[b]))
        .expect("nonempty range");
    Ok(trace.gamma_samples[best])
}

/// `ℳ(γ) = 𝔼‖α̂(γ) − ᾱ^π‖²` over the noise, for fixed inputs.
pub fn expected_param_mse(
    hs: &HypothesisSpace,
    xs: &[f64],
    f_rho: &SpectralFunction,
    sigma2: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "gamma",
            reason: format!("must be nonnegative, got {gamma}"),
        });
    }
    let phi = hs.design_matrix(xs)?;
    let n = xs.len() as f64;
    let e = hs.dim();
    let alpha_pi = DVector::from_vec(f_rho.project(hs).alpha_pi);
    let fx = DVector::from_iterator(xs.len(), xs.iter().map(|&x| f_rho.eval_unchecked(x)));
    let r = fx - &phi * &alpha_pi;

    let gram = phi.tr_mul(&phi);
    if gamma == 0.0 {
        let sv = gram.clone().svd(false, false).singular_values;
        let tol = PINV_RTOL * sv.max();
        let rank = sv.iter().filter(|s| **s > tol).count();
        if rank < e {
            return Err(Error::RankDeficient { rank, dim: e });
        }
    }
    let mut w_inv = gram.clone();
    let prior_prec: Vec<f64> = hs.lambdas().iter().map(|l| n / l).collect();
    for (i, p) in prior_prec.iter().enumerate() {
        w_inv[(i, i)] += gamma * p;
    }
    let w = w_inv
        .cholesky()
        .ok_or_else(|| Error::Numeric("ℳ system is not positive definite".into()))?
        .inverse();

    let s = DVector::from_iterator(
        e,
        prior_prec.iter().zip(alpha_pi.iter()).map(|(p, a)| p * a),
    );
    let phi_r = phi.tr_mul(&r);
    let mut big_r = gram * sigma2;
    big_r += (&s * s.transpose()) * (gamma * gamma);
    big_r += &phi_r * phi_r.transpose();
    let cross = &s * phi_r.transpose();
    big_r -= (&cross + cross.transpose()) * gamma;
    Ok((&w * big_r * &w).trace())
}
