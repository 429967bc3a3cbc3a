//! Regularized least squares in the trigonometric RKHS.
//!
//! [`fit_ridge`] solves the `E × E` coordinate system and is the route used
//! everywhere else; [`fit_kernel_oracle`] solves the equivalent `N × N`
//! representer system and exists to cross-check it.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::HypothesisSpace;
use crate::error::{Error, Result};
use crate::spectral::SpectralFunction;

/// Largest `N` accepted by the kernel route unless the caller raises it.
pub const DEFAULT_KERNEL_CAP: usize = 5000;

/// Relative singular-value cutoff for the unregularized pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub noise_std: f64,
    pub snr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
    pub meta: Option<DatasetMeta>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidArgument {
                name: "dataset",
                reason: format!("{} inputs but {} outputs", xs.len(), ys.len()),
            });
        }
        if xs.is_empty() {
            return Err(Error::InvalidArgument {
                name: "dataset",
                reason: "needs at least one point".into(),
            });
        }
        if let Some(v) = xs.iter().chain(&ys).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "dataset",
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(Dataset { xs, ys, meta: None })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Read the two-column `x,y` format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::Parse(format!(
                "expected header `x,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
            xs.push(row.x);
            ys.push(row.y);
        }
        Dataset::new(xs, ys)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            w.serialize(Row { x, y })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub alpha_hat: Vec<f64>,
    pub gamma: f64,
    pub f_z: SpectralFunction,
}

/// Serialized form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub gamma: f64,
    pub alpha_hat: Vec<f64>,
}

impl From<&FitResult> for FitRecord {
    fn from(r: &FitResult) -> Self {
        FitRecord {
            gamma: r.gamma,
            alpha_hat: r.alpha_hat.clone(),
        }
    }
}

impl FitResult {
    fn new(hs: &HypothesisSpace, alpha_hat: Vec<f64>, gamma: f64) -> Result<Self> {
        if let Some(a) = alpha_hat.iter().find(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("non-finite coefficient {a}")));
        }
        let f_z = SpectralFunction::from_features(hs, &alpha_hat)?;
        Ok(FitResult {
            alpha_hat,
            gamma,
            f_z,
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    Ok(())
}

/// Solve `(ΦᵀΦ/N + γΣ⁻¹) α = ΦᵀY/N`.
pub fn fit_ridge(hs: &HypothesisSpace, d: &Dataset, gamma: f64) -> Result<FitResult> {
    check_gamma(gamma)?;
    let phi = hs.design_matrix(d.xs())?;
    let alpha = ridge_solve(&phi, d.ys(), hs.lambdas(), gamma)?;
    FitResult::new(hs, alpha, gamma)
}

/// Ridge solve on a precomputed design matrix.
pub fn ridge_solve(
    phi: &DMatrix<f64>,
    ys: &[f64],
    lambdas: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = phi.nrows() as f64;
    let y = DVector::from_column_slice(ys);
    let mut a = phi.tr_mul(phi) / n;
    for (i, l) in lambdas.iter().enumerate() {
        a[(i, i)] += gamma / l;
    }
    let rhs = phi.tr_mul(&y) / n;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("ridge system is not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Representer route: `(K + NγI)c = Y`, then `α = ΣΦᵀc`.
pub fn fit_kernel_oracle(hs: &HypothesisSpace, d: &Dataset, gamma: f64) -> Result<FitResult> {
    fit_kernel_oracle_capped(hs, d, gamma, DEFAULT_KERNEL_CAP)
}

pub fn fit_kernel_oracle_capped(
    hs: &HypothesisSpace,
    d: &Dataset,
    gamma: f64,
    cap: usize,
) -> Result<FitResult> {
    check_gamma(gamma)?;
    let n = d.len();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let phi = hs.design_matrix(d.xs())?;
    let mut weighted = phi.clone();
    for (i, l) in hs.lambdas().iter().enumerate() {
        weighted.column_mut(i).scale_mut(*l);
    }
    let mut k = &weighted * phi.transpose();
    for t in 0..n {
        k[(t, t)] += n as f64 * gamma;
    }
    let c = k
        .cholesky()
        .ok_or_else(|| Error::Numeric("kernel system is not positive definite".into()))?
        .solve(&DVector::from_column_slice(d.ys()));
    let alpha = weighted.tr_mul(&c);
    FitResult::new(hs, alpha.iter().copied().collect(), gamma)
}

/// Minimum-norm least squares (`γ = 0`).
pub fn fit_unregularized(hs: &HypothesisSpace, d: &Dataset) -> Result<FitResult> {
    let phi = hs.design_matrix(d.xs())?;
    let alpha = min_norm_solve(&phi, d.ys())?;
    FitResult::new(hs, alpha, 0.0)
}

pub fn min_norm_solve(phi: &DMatrix<f64>, ys: &[f64]) -> Result<Vec<f64>> {
    let svd = phi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(vec![0.0; phi.ncols()]);
    }
    let x = svd
        .solve(&DVector::from_column_slice(ys), PINV_RTOL * smax)
        .map_err(|e| Error::Numeric(e.into()))?;
    Ok(x.iter().copied().collect())
}

/// `f_H`: coefficient `i` is `λ_i/(λ_i+γ)·ᾱ_i^π`.
pub fn data_free_solution(
    hs: &HypothesisSpace,
    f_rho: &SpectralFunction,
    gamma: f64,
) -> Result<SpectralFunction> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument {
            name: "gamma",
            reason: format!("must be nonnegative, got {gamma}"),
        });
    }
    let split = f_rho.project(hs);
    let coeffs: Vec<f64> = split
        .alpha_pi
        .iter()
        .zip(hs.lambdas())
        .map(|(a, l)| l / (l + gamma) * a)
        .collect();
    SpectralFunction::from_features(hs, &coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueErrors {
    pub sample: f64,
    pub approx: f64,
    pub overall: f64,
}

pub fn true_errors(
    f_z: &SpectralFunction,
    f_h: &SpectralFunction,
    f_rho: &SpectralFunction,
) -> Result<TrueErrors> {
    Ok(TrueErrors {
        sample: f_z.l2_distance(f_h)?,
        approx: f_h.l2_distance(f_rho)?,
        overall: f_z.l2_distance(f_rho)?,
    })
}

/// Empirical risk plus RKHS penalty: `(1/N)Σ(y_t − f(x_t))² + γ Σ α_i²/λ_i`.
pub fn ridge_objective(
    hs: &HypothesisSpace,
    d: &Dataset,
    alpha: &[f64],
    gamma: f64,
) -> Result<f64> {
    let phi = hs.design_matrix(d.xs())?;
    let fit = &phi * DVector::from_column_slice(alpha);
    let risk = fit
        .iter()
        .zip(d.ys())
        .map(|(f, y)| (y - f).powi(2))
        .sum::<f64>()
        / d.len() as f64;
    let pen: f64 = alpha.iter().zip(hs.lambdas()).map(|(a, l)| a * a / l).sum();
    Ok(risk + gamma * pen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Frequency;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn unit() -> HypothesisSpace {
        HypothesisSpace::uniform(2.0, vec![1], 1.0).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (HypothesisSpace, Dataset, f64) {
        let h = rng.random_range(1..=20);
        let mut freqs: Vec<u32> = (1..=60).collect();
        for i in 0..h {
            let j = rng.random_range(i..freqs.len());
            freqs.swap(i, j);
        }
        freqs.truncate(h);
        let lambdas = (0..2 * h).map(|_| rng.random_range(0.1..5.0)).collect();
        let width = rng.random_range(1.0..10.0);
        let hs = HypothesisSpace::new(width, freqs, lambdas).unwrap();
        let n = rng.random_range(5..=200);
        let xs = (0..n)
            .map(|_| rng.random_range(-width / 2.0..width / 2.0))
            .collect();
        let ys = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        (
            hs,
            Dataset::new(xs, ys).unwrap(),
            10f64.powf(rng.random_range(-4.0..1.0)),
        )
    }

    #[test]
    fn single_point_ridge() {
        let d = Dataset::new(vec![0.0], vec![3.0]).unwrap();
        let fit = fit_ridge(&unit(), &d, 1.0).unwrap();
        assert_abs_diff_eq!(fit.alpha_hat[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.alpha_hat[1], SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.f_z.eval(0.0).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn single_point_kernel() {
        let d = Dataset::new(vec![0.0], vec![3.0]).unwrap();
        let fit = fit_kernel_oracle(&unit(), &d, 1.0).unwrap();
        assert_abs_diff_eq!(fit.f_z.eval(0.0).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_outputs_give_zero_fit() {
        let d = Dataset::new(vec![0.1, -0.4, 0.7], vec![0.0; 3]).unwrap();
        assert!(fit_ridge(&unit(), &d, 0.5)
            .unwrap()
            .alpha_hat
            .iter()
            .all(|a| *a == 0.0));
        assert!(fit_kernel_oracle(&unit(), &d, 0.5)
            .unwrap()
            .alpha_hat
            .iter()
            .all(|a| *a == 0.0));
    }

    #[test]
    fn shrinks_as_gamma_grows() {
        let d = Dataset::new(vec![0.1, -0.4, 0.7], vec![1.0, 2.0, -1.0]).unwrap();
        let norms: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|g| {
                fit_ridge(&unit(), &d, *g)
                    .unwrap()
                    .f_z
                    .h_norm(&unit())
                    .unwrap()
            })
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2]);
        assert!(norms[2] < 1e-5);
    }

    #[test]
    fn ridge_matches_kernel_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (hs, d, g) = random_instance(&mut rng);
            let a = fit_ridge(&hs, &d, g).unwrap().alpha_hat;
            let b = fit_kernel_oracle(&hs, &d, g).unwrap().alpha_hat;
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = a
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-8 * (1.0 + norm), "diff {diff}");
        }
    }

    #[test]
    fn kernel_cap() {
        let d = Dataset::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        assert!(matches!(
            fit_kernel_oracle_capped(&unit(), &d, 1.0, 3),
            Err(Error::TooLarge { n: 4, cap: 3 })
        ));
    }

    #[test]
    fn ridge_solution_is_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (hs, d, g) = random_instance(&mut rng);
        let fit = fit_ridge(&hs, &d, g).unwrap();
        let best = ridge_objective(&hs, &d, &fit.alpha_hat, g).unwrap();
        for _ in 0..20 {
            let moved: Vec<f64> = fit
                .alpha_hat
                .iter()
                .map(|a| a + 1e-4 * rng.random_range(-1.0..1.0))
                .collect();
            assert!(best <= ridge_objective(&hs, &d, &moved, g).unwrap());
        }
    }

    #[test]
    fn unregularized_single_point_min_norm() {
        let d = Dataset::new(vec![0.0], vec![3.0]).unwrap();
        let fit = fit_unregularized(&unit(), &d).unwrap();
        assert_eq!(fit.gamma, 0.0);
        assert_abs_diff_eq!(fit.alpha_hat[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.alpha_hat[1], 3.0 / SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn unregularized_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let hs = HypothesisSpace::uniform(4.0, vec![1, 3, 4], 1.0).unwrap();
        let xs: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta = [0.5, -1.0, 2.0, 0.3, 0.0, -0.7];
        let phi = hs.design_matrix(&xs).unwrap();
        let clean: Vec<f64> = (&phi * DVector::from_column_slice(&beta))
            .iter()
            .copied()
            .collect();
        let fit = fit_unregularized(&hs, &Dataset::new(xs.clone(), clean).unwrap()).unwrap();
        for (a, b) in fit.alpha_hat.iter().zip(beta) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
        let noisy: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = fit_unregularized(&hs, &Dataset::new(xs, noisy.clone()).unwrap()).unwrap();
        let r =
            DVector::from_column_slice(&noisy) - &phi * DVector::from_column_slice(&fit.alpha_hat);
        let ynorm = noisy.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(phi.tr_mul(&r).amax() <= 1e-8 * ynorm);
    }

    #[test]
    fn data_free_examples() {
        let hs = unit();
        let f = SpectralFunction::from_terms(2.0, [(Frequency::sin(1), 3.0)]).unwrap();
        let fh = data_free_solution(&hs, &f, 1.0).unwrap();
        assert_eq!(fh.coeff(Frequency::sin(1)), 1.5);
        assert_eq!(fh.coeff(Frequency::cos(1)), 0.0);
        assert_abs_diff_eq!(
            data_free_solution(&hs, &f, 1e-12)
                .unwrap()
                .coeff(Frequency::sin(1)),
            3.0,
            epsilon = 1e-10
        );
        assert!(data_free_solution(&hs, &f, 1e12).unwrap().l2_norm() < 1e-10);
    }

    #[test]
    fn true_error_example() {
        let hs = unit();
        let f =
            SpectralFunction::from_terms(2.0, [(Frequency::sin(1), 3.0), (Frequency::cos(2), 4.0)])
                .unwrap();
        let fh = data_free_solution(&hs, &f, 1.0).unwrap();
        let e = true_errors(&fh, &fh, &f).unwrap();
        assert_eq!(e.sample, 0.0);
        assert_abs_diff_eq!(e.approx, 18.25f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (hs, d, g) = random_instance(&mut rng);
            let f = SpectralFunction::from_terms(
                hs.width(),
                (1..=30).map(|q| (Frequency::cos(q), rng.random_range(-1.0..1.0))),
            )
            .unwrap();
            let fit = fit_ridge(&hs, &d, g).unwrap();
            let fh = data_free_solution(&hs, &f, g).unwrap();
            let e = true_errors(&fit.f_z, &fh, &f).unwrap();
            assert!(e.overall <= e.sample + e.approx + 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![0.1, -0.30000000000000004], vec![1e-300, 2.5]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,y\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("x,y\n1,oops\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("x,y\n".as_bytes()).is_err());
    }
}
