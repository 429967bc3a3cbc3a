//! Functions with finitely many nonzero trigonometric coefficients.
//!
//! Because the basis is orthonormal, norms, projections and operator powers
//! reduce to coefficient arithmetic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::{check_domain, Frequency, HypothesisSpace, Parity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    width: f64,
    coeffs: BTreeMap<Frequency, f64>,
}

/// Output of [`SpectralFunction::project`]: `ᾱ^π` in feature order plus the out-of-space energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSplit {
    pub alpha_pi: Vec<f64>,
    pub tail_energy: f64,
}

/// Grid maximum of `|f|` together with the analytic bound `√2 Σ|c|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorm {
    pub grid_max: f64,
    pub analytic_bound: f64,
}

impl SpectralFunction {
    pub fn zero(width: f64) -> Self {
        SpectralFunction {
            width,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_terms<I>(width: f64, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Frequency, f64)>,
    {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument {
                name: "X",
                reason: format!("must be positive, got {width}"),
            });
        }
        let mut f = Self::zero(width);
        for (freq, c) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidArgument {
                    name: "coeff",
                    reason: format!("non-finite coefficient at q={}", freq.q()),
                });
            }
            *f.coeffs.entry(freq).or_insert(0.0) += c;
        }
        f.coeffs.retain(|_, c| *c != 0.0);
        Ok(f)
    }

    /// Function with coefficient vector `alpha` laid out over `hs`.
    pub fn from_features(hs: &HypothesisSpace, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != hs.dim() {
            return Err(Error::InvalidArgument {
                name: "alpha",
                reason: format!("expected {} coefficients, got {}", hs.dim(), alpha.len()),
            });
        }
        Self::from_terms(
            hs.width(),
            alpha
                .iter()
                .enumerate()
                .map(|(i, &a)| (hs.feature_frequency(i), a)),
        )
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn coeff(&self, f: Frequency) -> f64 {
        self.coeffs.get(&f).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Frequency, f64)> + '_ {
        self.coeffs.iter().map(|(f, c)| (*f, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_domain(self.width, x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(f, c)| c * f.eval(self.width, x))
            .sum()
    }

    /// Parseval: `‖f‖_{L²} = ‖coeffs‖₂`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn check_width(&self, hs: &HypothesisSpace) -> Result<()> {
        if self.width != hs.width() {
            return Err(Error::WidthMismatch(self.width, hs.width()));
        }
        Ok(())
    }

    fn first_outside(&self, hs: &HypothesisSpace) -> Option<Frequency> {
        self.coeffs
            .keys()
            .copied()
            .find(|f| hs.feature_index(*f).is_none())
    }

    /// RKHS norm `√(Σ α_i²/λ_i)`; fails if `f` is not in the span of `hs`.
    pub fn h_norm(&self, hs: &HypothesisSpace) -> Result<f64> {
        self.check_width(hs)?;
        if let Some(f) = self.first_outside(hs) {
            return Err(Error::NotInSpace {
                q: f.q(),
                parity: f.parity().as_str(),
            });
        }
        let lam = hs.lambdas();
        Ok(self
            .coeffs
            .iter()
            .map(|(f, c)| c * c / lam[hs.feature_index(*f).unwrap()])
            .sum::<f64>()
            .sqrt())
    }

    pub fn project(&self, hs: &HypothesisSpace) -> ProjectionSplit {
        let mut alpha_pi = vec![0.0; hs.dim()];
        let mut tail = 0.0;
        for (f, c) in &self.coeffs {
            match hs.feature_index(*f) {
                Some(i) => alpha_pi[i] = *c,
                None => tail += c * c,
            }
        }
        ProjectionSplit {
            alpha_pi,
            tail_energy: tail.sqrt(),
        }
    }

    /// `L_K^r f`: scales feature `i` by `λ_i^r` and drops everything outside `hs`.
    pub fn integral_operator_power(&self, hs: &HypothesisSpace, r: f64) -> Result<Self> {
        self.check_width(hs)?;
        let split = self.project(hs);
        if r < 0.0 && split.tail_energy > 0.0 {
            return Err(Error::OutsideRange {
                r,
                tail: split.tail_energy,
            });
        }
        let scaled: Vec<f64> = split
            .alpha_pi
            .iter()
            .zip(hs.lambdas())
            .map(|(a, l)| if r == 0.0 { *a } else { a * l.powf(r) })
            .collect();
        Self::from_features(hs, &scaled)
    }

    pub fn sup_norm_numeric(&self, grid_points: usize) -> Result<SupNorm> {
        if grid_points < 1000 {
            return Err(Error::InvalidArgument {
                name: "grid_points",
                reason: format!("need at least 1000, got {grid_points}"),
            });
        }
        let step = self.width / (grid_points - 1) as f64;
        let grid_max = (0..grid_points)
            .map(|k| {
                self.eval_unchecked(-self.width / 2.0 + k as f64 * step)
                    .abs()
            })
            .fold(0.0, f64::max);
        let analytic_bound =
            std::f64::consts::SQRT_2 * self.coeffs.values().map(|c| c.abs()).sum::<f64>();
        Ok(SupNorm {
            grid_max,
            analytic_bound,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|c| *c *= s);
        out.coeffs.retain(|_, c| *c != 0.0);
        out
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if self.width != other.width {
            return Err(Error::WidthMismatch(self.width, other.width));
        }
        let mut out = self.clone();
        for (f, c) in &other.coeffs {
            *out.coeffs.entry(*f).or_insert(0.0) += sign * c;
        }
        out.coeffs.retain(|_, c| *c != 0.0);
        Ok(out)
    }

    /// `‖self − other‖_{L²}` without building the difference.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    q: u32,
    parity: Parity,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionRecord {
    #[serde(rename = "X")]
    x: f64,
    terms: Vec<TermRecord>,
}

impl Serialize for SpectralFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FunctionRecord {
            x: self.width,
            terms: self
                .terms()
                .map(|(f, coeff)| TermRecord {
                    q: f.q(),
                    parity: f.parity(),
                    coeff,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = FunctionRecord::deserialize(d)?;
        let mut terms = Vec::with_capacity(rec.terms.len());
        for t in rec.terms {
            terms.push((
                Frequency::new(t.q, t.parity).map_err(D::Error::custom)?,
                t.coeff,
            ));
        }
        SpectralFunction::from_terms(rec.x, terms).map_err(D::Error::custom)
    }
}
