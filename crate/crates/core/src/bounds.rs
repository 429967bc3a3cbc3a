//! Error bounds and regularization selectors.
//!
//! Everything here is a closed-form function of a [`BoundContext`]: the
//! high-probability sample-error bound, the two deterministic approximation
//! bounds, the selectors that minimize their sums, and three benchmark bounds
//! from the literature (Smale-Zhou, Lin-Guo-Zhou, Wang-Zhou).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::HypothesisSpace;
use crate::error::{Error, Result};
use crate::spectral::SpectralFunction;

/// Which kernel constant feeds the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CkSource {
    #[default]
    ClosedForm,
    /// Grid supremum of `√K(x,x)` with this many points.
    Numeric(usize),
}

/// Constants consumed by every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundContext {
    #[serde(rename = "B_f")]
    pub b_f: f64,
    #[serde(rename = "B_sigma")]
    pub b_sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "C_K")]
    pub c_k: f64,
    pub lambda_min: f64,
    pub lambdas: Vec<f64>,
    pub alpha_pi: Vec<f64>,
    pub tail_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    A,
    B,
}

/// Outcome of the variant-(a) selector; `gamma` is `None` when no finite minimizer exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaHatA {
    pub condition_met: bool,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgzBound {
    pub expectation: f64,
    pub probability_bound: f64,
}

impl BoundContext {
    /// Context built from simulation truth: `B_f = ‖f_ρ‖`, `B_σ = noise_std`.
    pub fn from_truth(
        hs: &HypothesisSpace,
        f_rho: &SpectralFunction,
        noise_std: f64,
        n: usize,
        delta: f64,
        ck: CkSource,
    ) -> Result<Self> {
        let split = f_rho.project(hs);
        let c_k = match ck {
            CkSource::ClosedForm => hs.ck_closed_form(),
            CkSource::Numeric(points) => hs.ck_numeric(points)?,
        };
        let ctx = BoundContext {
            b_f: f_rho.l2_norm(),
            b_sigma: noise_std,
            n,
            delta,
            c_k,
            lambda_min: hs.lambda_min(),
            lambdas: hs.lambdas().to_vec(),
            alpha_pi: split.alpha_pi,
            tail_energy: split.tail_energy,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidArgument { name, reason });
        if !(self.b_f >= 0.0 && self.b_f.is_finite()) {
            return bad("B_f", format!("must be finite and >= 0, got {}", self.b_f));
        }
        if !(self.b_sigma >= 0.0 && self.b_sigma.is_finite()) {
            return bad(
                "B_sigma",
                format!("must be finite and >= 0, got {}", self.b_sigma),
            );
        }
        if self.n == 0 {
            return bad("N", "must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("must lie in (0,1), got {}", self.delta));
        }
        if !(self.c_k > 0.0 && self.c_k.is_finite()) {
            return bad("C_K", format!("must be positive, got {}", self.c_k));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad(
                "lambdas",
                "must be a nonempty list of positive reals".into(),
            );
        }
        if !(self.lambda_min > 0.0) {
            return bad(
                "lambda_min",
                format!("must be positive, got {}", self.lambda_min),
            );
        }
        if self.alpha_pi.len() != self.lambdas.len() {
            return bad(
                "alpha_pi",
                format!(
                    "length {} differs from lambdas length {}",
                    self.alpha_pi.len(),
                    self.lambdas.len()
                ),
            );
        }
        if !(self.tail_energy >= 0.0) {
            return bad(
                "tail_energy",
                format!("must be >= 0, got {}", self.tail_energy),
            );
        }
        Ok(())
    }

    fn log_term(&self) -> f64 {
        (4.0 / self.delta).ln()
    }

    pub fn alpha_pi_l2(&self) -> f64 {
        self.alpha_pi.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn alpha_pi_sup(&self) -> f64 {
        self.alpha_pi.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `A = C_K³ √((B_f² + B_σ²)/(N δ λ̆))`.
    pub fn a_coeff(&self) -> f64 {
        let energy = self.b_f * self.b_f + self.b_sigma * self.b_sigma;
        self.c_k.powi(3) * (energy / (self.n as f64 * self.delta * self.lambda_min)).sqrt()
    }

    /// `D = ‖ᾱ^π‖_∞ Σ 1/λ_i`.
    pub fn d_coeff(&self) -> f64 {
        self.alpha_pi_sup() * self.lambdas.iter().map(|l| 1.0 / l).sum::<f64>()
    }

    pub fn sample_bound_theorem1(&self, gamma: f64) -> f64 {
        self.a_coeff() / gamma
    }

    pub fn approx_bound_a(&self, gamma: f64) -> f64 {
        gamma / (self.lambda_min + gamma) * self.alpha_pi_l2() + self.tail_energy
    }

    pub fn approx_bound_b(&self, gamma: f64) -> f64 {
        self.d_coeff() * gamma + self.tail_energy
    }

    pub fn combined_bound(&self, gamma: f64, variant: Variant) -> f64 {
        self.sample_bound_theorem1(gamma)
            + match variant {
                Variant::A => self.approx_bound_a(gamma),
                Variant::B => self.approx_bound_b(gamma),
            }
    }

    pub fn gamma_hat_a(&self) -> GammaHatA {
        let a = self.a_coeff();
        let b = self.lambda_min;
        let big_b = self.alpha_pi_l2();
        let denom = big_b * b - a;
        if denom > 0.0 {
            GammaHatA {
                condition_met: true,
                gamma: Some(b * (a + (a * big_b * b).sqrt()) / denom),
            }
        } else {
            GammaHatA {
                condition_met: false,
                gamma: None,
            }
        }
    }

    pub fn gamma_hat_b(&self) -> Result<f64> {
        let d = self.d_coeff();
        if d <= 0.0 {
            return Err(Error::Degenerate(
                "projected coefficients are all zero (D = 0)".into(),
            ));
        }
        Ok((self.a_coeff() / d).sqrt())
    }

    /// Smallest admissible γ for the Smale-Zhou bound: `8 C_K² log(4/δ)/√N`.
    pub fn sz_min_gamma(&self) -> f64 {
        8.0 * self.c_k * self.c_k * self.log_term() / (self.n as f64).sqrt()
    }

    /// `12 C_K M log(4/δ)/√(Nγ)` for outputs bounded by `m`.
    pub fn sz_bound(&self, m: f64, gamma: f64) -> Result<f64> {
        let min = self.sz_min_gamma();
        // relative slack so that γ = sz_min_gamma itself is accepted after round-off
        if gamma < min * (1.0 - 1e-12) {
            return Err(Error::SzValidity { gamma, min });
        }
        Ok(12.0 * self.c_k * m * self.log_term() / (self.n as f64 * gamma).sqrt())
    }

    /// Output bound above which the sample bound beats Smale-Zhou at this γ.
    pub fn sz_crossover_m(&self, gamma: f64) -> f64 {
        let energy = self.b_f * self.b_f + self.b_sigma * self.b_sigma;
        self.c_k * self.c_k / 12.0 * (energy / (self.lambda_min * gamma)).sqrt()
            / (self.delta.sqrt() * self.log_term())
    }

    /// Lin-Guo-Zhou expectation bound with `p = 2`.
    ///
    /// `sigma_norm` is `‖σ_ρ²‖₂`, which equals the noise variance for homoskedastic noise.
    pub fn lgz_bound(&self, gamma: f64, approx_error: f64, sigma_norm: f64) -> LgzBound {
        let ck = self.c_k;
        let n = self.n as f64;
        let ng = n * gamma;
        let neff = effective_dimension(&self.lambdas, gamma);
        let lead = 2.0 + 56.0 * ck.powi(4) + 57.0 * ck * ck;
        let growth = 1.0 + 1.0 / (ng * ng) + neff / ng;
        let variance = ck.sqrt() * sigma_norm.sqrt() * (neff / n).powf(0.25) * ng.powf(-0.25);
        let bias = ck * approx_error / ng.sqrt();
        let expectation = lead * growth * (variance + bias);
        LgzBound {
            expectation,
            probability_bound: expectation / self.delta,
        }
    }
}

/// `𝒩(γ) = Σ λ_i/(λ_i + γ)`.
pub fn effective_dimension(lambdas: &[f64], gamma: f64) -> f64 {
    lambdas.iter().map(|l| l / (l + gamma)).sum()
}

/// How the user-facing ε maps to the ε inside the Wang-Zhou constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WzEpsMode {
    /// Use ε unchanged.
    #[default]
    Direct,
    /// Use ε/2, undoing the `2ε → ε` rescaling.
    Halved,
}

impl WzEpsMode {
    pub fn internal(self, eps: f64) -> f64 {
        match self {
            WzEpsMode::Direct => eps,
            WzEpsMode::Halved => eps / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WzConstants {
    pub c: f64,
    pub m_tilde: f64,
    pub c_beta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c_tilde_eps: f64,
    pub s: f64,
    pub eps: f64,
    pub eps_internal: f64,
}

/// `G(s) = ((1−s)/s)^{1−s}`, continued by its limit 1 for `s ≥ 1`.
pub fn wz_g(s: f64) -> f64 {
    if s >= 1.0 {
        1.0
    } else {
        ((1.0 - s) / s).powf(1.0 - s)
    }
}

/// Moment-hypothesis constant `C`.
pub const WZ_MOMENT_C: f64 = 4.0;

pub fn wz_constants(
    ctx: &BoundContext,
    b_inf: f64,
    eps: f64,
    mode: WzEpsMode,
) -> Result<WzConstants> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument {
            name: "eps",
            reason: format!("must lie in (0,1), got {eps}"),
        });
    }
    let beta = 1.0;
    let c = WZ_MOMENT_C;
    let ck = ctx.c_k;
    let e = ctx.lambdas.len() as f64;
    let ei = mode.internal(eps);
    let s = ei / (1.0 - ei);
    let m_tilde = ctx.b_sigma.max(b_inf);
    let c_beta = ctx.b_f * ctx.b_f / ctx.lambda_min;
    let c0 = 2.0 * e * wz_g(s);
    let c1 = 6.0 * ck
        + 6.0 * c
        + 8.0 * (1.0 + (2.0 * c).sqrt()) / m_tilde
        + 520.0 * (ck + c + 2.0 * (c + 1.0)).powi(2) * (c0 + 1.0);
    let core = c1 + 32f64.powi(2) * (c + 1.0).powi(2);
    let c2 = (2.0 * core).sqrt();
    let c3 = (38.0 * c_beta).sqrt() + (ck + 1.0) * (480.0 * c_beta).sqrt() + m_tilde;
    let c4 = m_tilde * (2.0 * ck * (c + (1.0 + 2.0 * (2.0 * c).sqrt()) + 1.0)) + c3;
    let c5 = 38.0 * c_beta
        + 2.0 * core * c4 * c4 * (2.0 / (s + 1.0)).powi(2)
        + 480.0 * (ck + 1.0).powi(2) * c_beta;
    let es = ei * (s + 1.0);
    let c_tilde_eps = c5 / (ei * ei)
        * c2.powf(4.0 * beta / es)
        * (1.0 + (1.0 + 2.0 / es).ln()).powf(beta * (1.0 + beta) / es + 2.0);
    Ok(WzConstants {
        c,
        m_tilde,
        c_beta,
        c0,
        c1,
        c2,
        c3,
        c4,
        c5,
        c_tilde_eps,
        s,
        eps,
        eps_internal: ei,
    })
}

/// Square root of `C̃ N^{ε−1} log(4/δ)^{4/ε+2}`; evaluated in linear scale so overflow shows as `inf`.
pub fn wz_bound(wc: &WzConstants, n: usize, delta: f64) -> f64 {
    let eps = wc.eps;
    let l = (4.0 / delta).ln();
    (wc.c_tilde_eps * (n as f64).powf(eps - 1.0) * l.powf(4.0 / eps + 2.0)).sqrt()
}

/// Flat bound report with fixed keys; absent values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundReport {
    pub theorem1: Option<f64>,
    pub approx_a: Option<f64>,
    pub approx_b: Option<f64>,
    pub combined_a: Option<f64>,
    pub combined_b: Option<f64>,
    pub sz: Option<f64>,
    pub lgz: Option<f64>,
    pub wz: Option<f64>,
    pub gamma_hat_a: Option<f64>,
    pub gamma_hat_b: Option<f64>,
    pub condition_a_met: bool,
}

pub const REPORT_KEYS: [&str; 11] = [
    "theorem1",
    "approx_a",
    "approx_b",
    "combined_a",
    "combined_b",
    "sz",
    "lgz",
    "wz",
    "gamma_hat_a",
    "gamma_hat_b",
    "condition_a_met",
];

impl BoundReport {
    /// Every bound that needs only the context, at the given γ.
    pub fn at_gamma(ctx: &BoundContext, gamma: f64) -> Self {
        let ga = ctx.gamma_hat_a();
        BoundReport {
            theorem1: Some(ctx.sample_bound_theorem1(gamma)),
            approx_a: Some(ctx.approx_bound_a(gamma)),
            approx_b: Some(ctx.approx_bound_b(gamma)),
            combined_a: Some(ctx.combined_bound(gamma, Variant::A)),
            combined_b: Some(ctx.combined_bound(gamma, Variant::B)),
            sz: None,
            lgz: None,
            wz: None,
            gamma_hat_a: ga.gamma,
            gamma_hat_b: ctx.gamma_hat_b().ok(),
            condition_a_met: ga.condition_met,
        }
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, Option<f64>> {
        let vals = [
            self.theorem1,
            self.approx_a,
            self.approx_b,
            self.combined_a,
            self.combined_b,
            self.sz,
            self.lgz,
            self.wz,
            self.gamma_hat_a,
            self.gamma_hat_b,
            Some(if self.condition_a_met { 1.0 } else { 0.0 }),
        ];
        REPORT_KEYS.iter().copied().zip(vals).collect()
    }
}

impl Serialize for BoundReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(REPORT_KEYS.len()))?;
        let map = self.to_map();
        for k in REPORT_KEYS {
            let v = map[k];
            match v {
                Some(x) if x.is_finite() => m.serialize_entry(k, &x)?,
                Some(x) => m.serialize_entry(k, &x.to_string())?,
                None => m.serialize_entry(k, &Option::<f64>::None)?,
            }
        }
        m.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[allow(clippy::too_many_arguments)]
    fn ctx(
        b_f: f64,
        b_sigma: f64,
        n: usize,
        delta: f64,
        c_k: f64,
        lambdas: Vec<f64>,
        alpha_pi: Vec<f64>,
        tail: f64,
    ) -> BoundContext {
        let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        BoundContext {
            b_f,
            b_sigma,
            n,
            delta,
            c_k,
            lambda_min,
            lambdas,
            alpha_pi,
            tail_energy: tail,
        }
    }

    fn base() -> BoundContext {
        ctx(
            2.0f64.sqrt(),
            2.0f64.sqrt(),
            400,
            0.25,
            1.0,
            vec![1.0, 1.0],
            vec![3.0, 0.0],
            4.0,
        )
    }

    /// Context with prescribed `A`, `b = λ̆`, `‖ᾱ^π‖₂` via `C_K`.
    fn with_abb(a: f64, b: f64, big_b: f64) -> BoundContext {
        let mut c = ctx(1.0, 0.0, 1, 0.5, 1.0, vec![b, b], vec![big_b, 0.0], 0.0);
        // A = C_K³ √(1/(0.5 b)) → solve for C_K
        c.c_k = (a / (1.0 / (0.5 * b)).sqrt()).cbrt();
        c
    }

    #[test]
    fn theorem1_examples() {
        let c = base();
        assert_abs_diff_eq!(c.sample_bound_theorem1(0.5), 0.4, epsilon = 1e-15);
        let mut c4 = c.clone();
        c4.n *= 4;
        assert_relative_eq!(
            c4.sample_bound_theorem1(0.7),
            c.sample_bound_theorem1(0.7) / 2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            c.sample_bound_theorem1(0.35),
            2.0 * c.sample_bound_theorem1(0.7),
            max_relative = 1e-14
        );
    }

    #[test]
    fn approx_examples() {
        let c = base();
        assert_eq!(c.approx_bound_a(0.0), 4.0);
        assert_abs_diff_eq!(c.approx_bound_a(1.0), 5.5);
        assert_abs_diff_eq!(c.approx_bound_a(1e12), 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.approx_bound_b(1.0), 10.0);
        assert_eq!(c.approx_bound_b(0.0), 4.0);
    }

    #[test]
    fn gamma_hat_a_example() {
        let c = with_abb(1.0, 1.0, 2.0);
        assert_relative_eq!(c.a_coeff(), 1.0, max_relative = 1e-14);
        let g = c.gamma_hat_a();
        assert!(g.condition_met);
        assert_relative_eq!(g.gamma.unwrap(), 1.0 + 2f64.sqrt(), max_relative = 1e-12);
        // grid oracle on F_a(γ) = 1/γ + 2γ/(1+γ)
        let best = (0..100_000)
            .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 99_999.0))
            .min_by(|x, y| {
                (1.0 / x + 2.0 * x / (1.0 + x)).total_cmp(&(1.0 / y + 2.0 * y / (1.0 + y)))
            })
            .unwrap();
        assert_relative_eq!(best, 1.0 + 2f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn gamma_hat_a_absent() {
        let g = with_abb(3.0, 1.0, 2.0).gamma_hat_a();
        assert!(!g.condition_met);
        assert!(g.gamma.is_none());
        let mut c = with_abb(3.0, 1.0, 2.0);
        c.n *= 4;
        assert_relative_eq!(c.a_coeff(), 1.5, max_relative = 1e-12);
        assert!(c.gamma_hat_a().condition_met);
    }

    #[test]
    fn gamma_hat_b_examples() {
        let mut c = with_abb(4.0, 1.0, 1.0);
        c.lambdas = vec![1.0];
        c.alpha_pi = vec![1.0];
        assert_relative_eq!(c.gamma_hat_b().unwrap(), 2.0, max_relative = 1e-12);
        let mut c = with_abb(1.0, 1.0, 1.0);
        c.lambdas = vec![1.0, 1.0];
        c.alpha_pi = vec![2.0, 0.0];
        assert_relative_eq!(c.gamma_hat_b().unwrap(), 0.5, max_relative = 1e-12);
        c.alpha_pi = vec![0.0, 0.0];
        assert!(matches!(c.gamma_hat_b(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn combined_limits() {
        let c = with_abb(1.0, 1.0, 2.0);
        let g = c.gamma_hat_a().gamma.unwrap();
        let at = c.combined_bound(g, Variant::A);
        assert!(at <= c.combined_bound(2.0 * g, Variant::A));
        assert!(at <= c.combined_bound(g / 2.0, Variant::A));
        let mut c = base();
        c.n = 1 << 40;
        assert_abs_diff_eq!(c.combined_bound(1e9, Variant::A), 3.0 + 4.0, epsilon = 1e-6);
        assert!(c.combined_bound(1e-300, Variant::A) > 1e200);
        assert!(c.combined_bound(1e-300, Variant::B) > 1e200);
    }

    #[test]
    fn sz_examples() {
        // log(4/δ) = 4
        let delta = 4.0 * (-4.0f64).exp();
        let c = ctx(
            1.0,
            1.0,
            64,
            delta,
            1.0,
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            0.0,
        );
        assert_relative_eq!(c.sz_min_gamma(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(c.sz_bound(1.0, 4.0).unwrap(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(c.sz_bound(2.5, 4.0).unwrap(), 7.5, max_relative = 1e-12);
        assert!(matches!(
            c.sz_bound(1.0, 3.9),
            Err(Error::SzValidity { .. })
        ));
        assert!(c.sz_bound(1.0, c.sz_min_gamma()).is_ok());
    }

    #[test]
    fn crossover_makes_bounds_equal() {
        let c = base();
        let g = 2.0 * c.sz_min_gamma();
        let m = c.sz_crossover_m(g);
        assert_relative_eq!(
            c.sz_bound(m, g).unwrap(),
            c.sample_bound_theorem1(g),
            max_relative = 1e-12
        );
    }

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(effective_dimension(&[1.0, 2.0, 3.0, 4.0], 0.0), 4.0);
        assert_abs_diff_eq!(effective_dimension(&[1.0, 1.0, 3.0, 3.0], 1.0), 2.5);
        assert!(effective_dimension(&[1.0, 2.0], 1e15) < 1e-14);
    }

    #[test]
    fn lgz_properties() {
        let mut c = base();
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000, 100_000] {
            c.n = n;
            let v = c.lgz_bound(0.1, 0.3, 2.0).expectation;
            assert!(v < last);
            last = v;
        }
        let no_bias = c.lgz_bound(0.1, 0.0, 2.0);
        let ck: f64 = 1.0;
        let n = c.n as f64;
        let neff = effective_dimension(&c.lambdas, 0.1);
        let expect = (2.0 + 56.0 + 57.0)
            * (1.0 + 1.0 / (n * 0.1_f64).powi(2) + neff / (n * 0.1))
            * ck.sqrt()
            * 2f64.sqrt()
            * (neff / n).powf(0.25)
            * (n * 0.1).powf(-0.25);
        assert_relative_eq!(no_bias.expectation, expect, max_relative = 1e-13);
        assert_relative_eq!(
            no_bias.probability_bound,
            expect / c.delta,
            max_relative = 1e-13
        );
    }

    #[test]
    fn wz_g_values() {
        assert_eq!(wz_g(0.5), 1.0);
        assert_relative_eq!(wz_g(0.2), 4f64.powf(0.8), max_relative = 1e-14);
        assert_relative_eq!(wz_g(0.2), 3.0314331330207964, max_relative = 1e-12);
        assert_eq!(wz_g(1.0), 1.0);
        assert_eq!(wz_g(3.0), 1.0);
    }

    #[test]
    fn wz_c0_and_shape() {
        let mut c = base();
        c.lambdas = vec![1.0; 4];
        c.alpha_pi = vec![1.0, 0.0, 0.0, 0.0];
        // eps_internal = 1/3 gives s = 0.5
        let wc = wz_constants(&c, 1.0, 2.0 / 3.0, WzEpsMode::Halved).unwrap();
        assert_relative_eq!(wc.s, 0.5, max_relative = 1e-14);
        assert_relative_eq!(wc.c0, 8.0, max_relative = 1e-14);
        let wc = wz_constants(&c, 1.0, 1.0 / 3.0, WzEpsMode::Direct).unwrap();
        assert_relative_eq!(wc.c0, 8.0, max_relative = 1e-14);
        assert!(wz_constants(&c, 1.0, 1.0, WzEpsMode::Direct).is_err());
        assert!(wz_constants(&c, 1.0, 0.0, WzEpsMode::Direct).is_err());
    }

    #[test]
    fn wz_chain_by_hand() {
        let c = base();
        let wc = wz_constants(&c, 2.0, 0.4, WzEpsMode::Direct).unwrap();
        let (ck, cc, e) = (1.0f64, 4.0f64, 2.0f64);
        let s: f64 = 0.4 / 0.6;
        let m = 2.0f64;
        let cb = 2.0f64;
        let c0 = 2.0 * e * ((1.0 - s) / s).powf(1.0 - s);
        let c1 = 6.0 * ck
            + 6.0 * cc
            + 8.0 * (1.0 + 8f64.sqrt()) / m
            + 520.0 * (ck + cc + 10.0).powi(2) * (c0 + 1.0);
        let c2 = (2.0 * (c1 + 1024.0 * 25.0)).sqrt();
        let c3 = (38.0 * cb).sqrt() + (ck + 1.0) * (480.0 * cb).sqrt() + m;
        let c4 = m * (2.0 * ck * (cc + 1.0 + 2.0 * 8f64.sqrt() + 1.0)) + c3;
        let c5 = 38.0 * cb
            + 2.0 * (c1 + 25600.0) * c4 * c4 * (2.0 / (s + 1.0)).powi(2)
            + 480.0 * 4.0 * cb;
        let k = 0.4 * (s + 1.0);
        let ct = c5 / 0.16 * c2.powf(4.0 / k) * (1.0 + (1.0 + 2.0 / k).ln()).powf(2.0 / k + 2.0);
        assert_relative_eq!(wc.c0, c0, max_relative = 1e-14);
        assert_relative_eq!(wc.c5, c5, max_relative = 1e-13);
        assert_relative_eq!(wc.c_tilde_eps, ct, max_relative = 1e-12);
        assert_eq!(wc.m_tilde, 2.0);
        assert_relative_eq!(wc.c_beta, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn wz_overflow_is_infinite() {
        let mut c = base();
        c.lambdas = vec![10.0; 20];
        c.alpha_pi = vec![1.0; 20];
        c.c_k = 10.0;
        let wc = wz_constants(&c, 30.0, 0.05, WzEpsMode::Direct).unwrap();
        assert!(wz_bound(&wc, 300, 0.1).is_infinite());
    }

    #[test]
    fn report_keys_and_nulls() {
        let c = with_abb(3.0, 1.0, 2.0);
        let r = BoundReport::at_gamma(&c, 0.5);
        let v = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 11);
        for k in REPORT_KEYS {
            assert!(obj.contains_key(k));
        }
        assert!(obj["gamma_hat_a"].is_null());
        assert_eq!(obj["condition_a_met"], 0.0);
    }

    fn arb_ctx() -> impl Strategy<Value = BoundContext> {
        (
            1usize..20,
            prop::collection::vec(0.05f64..10.0, 40),
            prop::collection::vec(-5.0f64..5.0, 40),
            0.0f64..5.0,
            0.0f64..3.0,
            10usize..100_000,
            0.01f64..0.99,
        )
            .prop_map(|(h, l, a, tail, bs, n, delta)| {
                let lambdas = l[..2 * h].to_vec();
                let alpha_pi = a[..2 * h].to_vec();
                let c_k = (0..h)
                    .map(|j| lambdas[j].max(lambdas[j + h]))
                    .sum::<f64>()
                    .sqrt();
                let b_f = (alpha_pi.iter().map(|x| x * x).sum::<f64>() + tail * tail).sqrt();
                ctx(b_f, bs, n, delta, c_k, lambdas, alpha_pi, tail)
            })
    }

    proptest! {
        #[test]
        fn bound_b_dominates_a(c in arb_ctx(), g in 1e-4f64..1e3) {
            prop_assert!(c.approx_bound_b(g) >= c.approx_bound_a(g) - 1e-12 * (1.0 + c.approx_bound_a(g)));
        }

        #[test]
        fn gamma_hat_a_is_stationary(c in arb_ctx()) {
            if let Some(g) = c.gamma_hat_a().gamma {
                let (a, b, bb) = (c.a_coeff(), c.lambda_min, c.alpha_pi_l2());
                let terms = [g * g * (bb * b - a), 2.0 * a * b * g, a * b * b];
                let res = terms[0] - terms[1] - terms[2];
                let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
                prop_assert!(res.abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn f_a_unimodal(c in arb_ctx()) {
            if let Some(g) = c.gamma_hat_a().gamma {
                let f = |x: f64| c.combined_bound(x, Variant::A);
                let grid: Vec<f64> = (0..200).map(|k| g * 10f64.powf(-3.0 + 3.0 * k as f64 / 199.0)).collect();
                for w in grid.windows(2) {
                    prop_assert!(f(w[0]) >= f(w[1]) - 1e-12 * f(w[1]));
                }
                let grid: Vec<f64> = (0..200).map(|k| g * 10f64.powf(k as f64 / 199.0)).collect();
                for w in grid.windows(2) {
                    prop_assert!(f(w[1]) >= f(w[0]) - 1e-12 * f(w[0]));
                }
            }
        }

        #[test]
        fn wz_rate(c in arb_ctx(), eps in 0.3f64..0.95, n1 in 100usize..1000, k in 2usize..50) {
            let wc = wz_constants(&c, c.b_f * 2.0 + 0.1, eps, WzEpsMode::Direct).unwrap();
            let n2 = n1 * k;
            let (b1, b2) = (wz_bound(&wc, n1, c.delta), wz_bound(&wc, n2, c.delta));
            prop_assume!(b1.is_finite() && b2.is_finite() && b2 > 0.0);
            let slope = (b2 / b1).ln() / (n2 as f64 / n1 as f64).ln();
            prop_assert!((slope - (eps - 1.0) / 2.0).abs() <= 1e-9);
        }
    }
}
