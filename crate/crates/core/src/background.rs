//! Background statistics and the whitened spectral matched filter.

use alloc::vec;
use alloc::vec::Vec;

use crate::bags::Spectrum;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

/// Signatures whose whitened norm falls below this are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Diagonal loading applied to the covariance before factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `eps = factor * trace(cov) / D`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Relative(1e-6)
    }
}

impl Regularization {
    fn epsilon(self, cov: &Matrix) -> Result<f64> {
        let eps = match self {
            Regularization::Relative(f) => f * cov.trace() / cov.dim() as f64,
            Regularization::Absolute(e) => e,
        };
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "regularization must be finite and nonnegative, got {eps}"
            )));
        }
        Ok(eps)
    }
}

/// Background mean and covariance with a cached Cholesky factor of the
/// regularized covariance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    mean: Spectrum,
    covariance: Matrix,
    factor: Cholesky,
    regularization: f64,
}

/// Estimates mean and sample covariance (N-1 normalization) from `pixels`.
pub fn fit_background<'a, I>(pixels: I, regularization: Regularization) -> Result<BackgroundModel>
where
    I: IntoIterator<Item = &'a Spectrum>,
{
    let pixels: Vec<&Spectrum> = pixels.into_iter().collect();
    if pixels.len() < 2 {
        return Err(Error::InsufficientPixels {
            needed: 2,
            available: pixels.len(),
        });
    }
    let d = pixels[0].bands();
    let n = pixels.len() as f64;
    let mut mean = vec![0.0; d];
    for p in &pixels {
        if p.bands() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.bands(),
            });
        }
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = Matrix::zeros(d);
    let mut centered = vec![0.0; d];
    for p in &pixels {
        for ((c, v), m) in centered.iter_mut().zip(p.iter()).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            for j in 0..=i {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    BackgroundModel::from_parts(Spectrum::new(mean)?, cov, regularization)
}

impl BackgroundModel {
    /// Builds a model from known statistics.
    pub fn from_parts(
        mean: Spectrum,
        covariance: Matrix,
        regularization: Regularization,
    ) -> Result<Self> {
        if covariance.dim() != mean.bands() {
            return Err(Error::DimensionMismatch {
                expected: mean.bands(),
                actual: covariance.dim(),
            });
        }
        if covariance.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        if !covariance.is_symmetric(1e-10) {
            return Err(Error::InvalidParameter(
                "covariance is not symmetric".into(),
            ));
        }
        let eps = regularization.epsilon(&covariance)?;
        let mut loaded = covariance.clone();
        loaded.add_to_diagonal(eps);
        let factor = Cholesky::factor(&loaded).map_err(|_| Error::SingularBackground)?;
        Ok(BackgroundModel {
            mean,
            covariance,
            factor,
            regularization: eps,
        })
    }

    pub fn mean(&self) -> &Spectrum {
        &self.mean
    }

    /// The unregularized covariance estimate.
    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// The diagonal loading actually applied.
    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn bands(&self) -> usize {
        self.mean.bands()
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.bands() {
            return Err(Error::DimensionMismatch {
                expected: self.bands(),
                actual: s.len(),
            });
        }
        Ok(())
    }

    /// Returns `w = L^-1 (s - mean)`, so that `w'w = (s-mean)' S^-1 (s-mean)`.
    pub fn whiten(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check(s)?;
        let mut w = vec![0.0; s.len()];
        self.whiten_into(s, &mut w);
        Ok(w)
    }

    /// Unchecked variant of [`whiten`](Self::whiten); `out` must have `D` entries.
    pub(crate) fn whiten_into(&self, s: &[f64], out: &mut [f64]) {
        for ((o, v), m) in out.iter_mut().zip(s).zip(self.mean.iter()) {
            *o = v - m;
        }
        self.factor.solve_lower_in_place(out);
    }

    /// Whitens a candidate signature and caches its norm.
    pub fn prepare_signature(&self, signature: &[f64]) -> Result<PreparedSignature> {
        let whitened = self.whiten(signature)?;
        let norm = libm::sqrt(dot(&whitened, &whitened));
        if !(norm >= DEGENERATE_NORM) {
            return Err(Error::DegenerateSignature(norm));
        }
        Ok(PreparedSignature { whitened, norm })
    }

    /// Matched-filter response of `pixel` to `signature`.
    pub fn matched_filter(&self, signature: &[f64], pixel: &[f64]) -> Result<f64> {
        let prepared = self.prepare_signature(signature)?;
        self.check(pixel)?;
        let w = self.whiten(pixel)?;
        Ok(prepared.response(&w))
    }
}

/// A signature mapped into whitened space, ready for repeated scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSignature {
    pub whitened: Vec<f64>,
    pub norm: f64,
}

impl PreparedSignature {
    /// Response to an already-whitened pixel.
    #[inline]
    pub fn response(&self, whitened_pixel: &[f64]) -> f64 {
        dot(&self.whitened, whitened_pixel) / self.norm
    }
}

/// A per-instance detection statistic where larger means more target-like.
pub trait InstanceScorer {
    type Prepared;

    fn bands(&self) -> usize;

    fn prepare(&self, signature: &Spectrum) -> Result<Self::Prepared>;

    fn score(&self, prepared: &Self::Prepared, pixel: &Spectrum) -> Result<f64>;
}

impl InstanceScorer for BackgroundModel {
    type Prepared = PreparedSignature;

    fn bands(&self) -> usize {
        self.mean.bands()
    }

    fn prepare(&self, signature: &Spectrum) -> Result<PreparedSignature> {
        self.prepare_signature(signature)
    }

    fn score(&self, prepared: &PreparedSignature, pixel: &Spectrum) -> Result<f64> {
        Ok(prepared.response(&self.whiten(pixel)?))
    }
}
