//! Trigonometric feature system on the uniform-measure interval `[-X/2, X/2]`.
//!
//! Features come in sine/cosine pairs scaled by `√2`, which makes them
//! orthonormal under the uniform probability measure. A [`HypothesisSpace`]
//! selects `E/2` frequencies and weights each of the resulting `E` features
//! with a positive `λ_i`; the first half of the feature vector holds the
//! sines in frequency order, the second half the matching cosines.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack on the domain boundary, absorbs samplers that land a few ulps outside.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Sin,
    Cos,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Sin => "sin",
            Parity::Cos => "cos",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One basis element: `√2 sin(2π q x / X)` or `√2 cos(2π q x / X)` with `q ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frequency {
    q: u32,
    parity: Parity,
}

impl Frequency {
    pub fn new(q: u32, parity: Parity) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument {
                name: "q",
                reason: "frequencies start at 1".into(),
            });
        }
        Ok(Frequency { q, parity })
    }

    pub fn sin(q: u32) -> Self {
        Self::new(q, Parity::Sin).expect("q >= 1")
    }

    pub fn cos(q: u32) -> Self {
        Self::new(q, Parity::Cos).expect("q >= 1")
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Value of the basis element at `x` for domain width `width`.
    #[inline]
    pub fn eval(&self, width: f64, x: f64) -> f64 {
        let arg = 2.0 * PI * f64::from(self.q) * x / width;
        match self.parity {
            Parity::Sin => SQRT_2 * arg.sin(),
            Parity::Cos => SQRT_2 * arg.cos(),
        }
    }
}

/// `φ(x)` for one input, length `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Check `x ∈ [-X/2, X/2]` up to [`DOMAIN_TOLERANCE`].
pub fn check_domain(width: f64, x: f64) -> Result<()> {
    let half = width / 2.0;
    if !x.is_finite() || x.abs() > half + DOMAIN_TOLERANCE * width {
        return Err(Error::Domain { x, half });
    }
    Ok(())
}

/// Finite-dimensional RKHS spanned by the sine/cosine pairs at `Q`, with feature weights `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRecord", into = "SpaceRecord")]
pub struct HypothesisSpace {
    width: f64,
    freqs: Vec<u32>,
    lambdas: Vec<f64>,
}

/// On-disk form `{X, Q, lambdas}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceRecord {
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Q")]
    q: Vec<u32>,
    lambdas: Vec<f64>,
}

impl TryFrom<SpaceRecord> for HypothesisSpace {
    type Error = Error;

    fn try_from(r: SpaceRecord) -> Result<Self> {
        HypothesisSpace::new(r.x, r.q, r.lambdas)
    }
}

impl From<HypothesisSpace> for SpaceRecord {
    fn from(hs: HypothesisSpace) -> Self {
        SpaceRecord {
            x: hs.width,
            q: hs.freqs,
            lambdas: hs.lambdas,
        }
    }
}

impl HypothesisSpace {
    pub fn new(width: f64, freqs: Vec<u32>, lambdas: Vec<f64>) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidSpace(format!(
                "X must be positive, got {width}"
            )));
        }
        if freqs.is_empty() {
            return Err(Error::InvalidSpace("Q must not be empty".into()));
        }
        if !lambdas.len().is_multiple_of(2) {
            return Err(Error::InvalidSpace(format!(
                "lambdas: E must be even, got {}",
                lambdas.len()
            )));
        }
        if lambdas.len() != 2 * freqs.len() {
            return Err(Error::InvalidSpace(format!(
                "lambdas: expected E = 2|Q| = {} entries, got {}",
                2 * freqs.len(),
                lambdas.len()
            )));
        }
        if let Some(q) = freqs.iter().find(|&&q| q == 0) {
            return Err(Error::InvalidSpace(format!("Q: frequency {q} is not >= 1")));
        }
        let mut sorted = freqs.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpace(format!(
                "Q: duplicate frequency {}",
                w[0]
            )));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidSpace(format!("lambdas: {l} is not positive")));
        }
        Ok(HypothesisSpace {
            width,
            freqs,
            lambdas,
        })
    }

    /// Same weight `lambda` on every feature.
    pub fn uniform(width: f64, freqs: Vec<u32>, lambda: f64) -> Result<Self> {
        let e = 2 * freqs.len();
        Self::new(width, freqs, vec![lambda; e])
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Number of features `E`.
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn half_dim(&self) -> usize {
        self.freqs.len()
    }

    /// Basis element carried by feature `i` (sines first, then cosines).
    pub fn feature_frequency(&self, i: usize) -> Frequency {
        let h = self.half_dim();
        if i < h {
            Frequency::sin(self.freqs[i])
        } else {
            Frequency::cos(self.freqs[i - h])
        }
    }

    /// Index of `f` in the feature vector, if the space contains it.
    pub fn feature_index(&self, f: Frequency) -> Option<usize> {
        let j = self.freqs.iter().position(|&q| q == f.q())?;
        Some(match f.parity() {
            Parity::Sin => j,
            Parity::Cos => j + self.half_dim(),
        })
    }

    /// Fill `out` with `φ(x)` without the domain check.
    #[inline]
    pub fn fill_features(&self, x: f64, out: &mut [f64]) {
        let h = self.half_dim();
        for (j, &q) in self.freqs.iter().enumerate() {
            let arg = 2.0 * PI * f64::from(q) * x / self.width;
            let (s, c) = arg.sin_cos();
            out[j] = SQRT_2 * s;
            out[j + h] = SQRT_2 * c;
        }
    }

    pub fn eval_features(&self, x: f64) -> Result<FeatureVector> {
        check_domain(self.width, x)?;
        let mut v = vec![0.0; self.dim()];
        self.fill_features(x, &mut v);
        Ok(FeatureVector(v))
    }

    /// `𝒦(xa, xb) = φ(xa)ᵀ Σ_α φ(xb)`.
    pub fn kernel(&self, xa: f64, xb: f64) -> Result<f64> {
        let a = self.eval_features(xa)?;
        let b = self.eval_features(xb)?;
        Ok(self.weighted_dot(a.values(), b.values()))
    }

    fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lambdas)
            .map(|((u, v), l)| l * u * v)
            .sum()
    }

    /// `N × E` matrix stacking `φ(x_t)ᵀ`.
    pub fn design_matrix(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let e = self.dim();
        let mut phi = DMatrix::zeros(xs.len(), e);
        let mut row = vec![0.0; e];
        for (t, &x) in xs.iter().enumerate() {
            check_domain(self.width, x)?;
            self.fill_features(x, &mut row);
            for (i, v) in row.iter().enumerate() {
                phi[(t, i)] = *v;
            }
        }
        Ok(phi)
    }

    /// Closed-form kernel constant `√(Σ_j max{λ_j, λ_{j+E/2}})`.
    pub fn ck_closed_form(&self) -> f64 {
        let h = self.half_dim();
        (0..h)
            .map(|j| self.lambdas[j].max(self.lambdas[j + h]))
            .sum::<f64>()
            .sqrt()
    }

    /// `max √𝒦(x,x)` over a uniform grid; for a PSD kernel the diagonal dominates.
    pub fn ck_numeric(&self, grid_points: usize) -> Result<f64> {
        if grid_points < 100 {
            return Err(Error::InvalidArgument {
                name: "grid_points",
                reason: format!("need at least 100, got {grid_points}"),
            });
        }
        let mut row = vec![0.0; self.dim()];
        let step = self.width / (grid_points - 1) as f64;
        let mut best = 0.0_f64;
        for k in 0..grid_points {
            let x = -self.width / 2.0 + k as f64 * step;
            self.fill_features(x, &mut row);
            best = best.max(self.weighted_dot(&row, &row));
        }
        Ok(best.sqrt())
    }

    /// `λ̆ = min_i λ_i`.
    pub fn lambda_min(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
