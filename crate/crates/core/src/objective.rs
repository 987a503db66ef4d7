//! The bag-level objective.
//!
//! For a candidate signature `x`, each positive bag contributes the largest
//! response among its pixels and each negative bag contributes minus the
//! mean response of its pixels:
//!
//! ```text
//! total = alpha * sum_j max_i f(x, P_ji) - beta * sum_j mean_i f(x, N_ji)
//! ```
//!
//! The generic functions work with any [`InstanceScorer`]. [`Objective`] is
//! the matched-filter fast path: it whitens every bag pixel once so each
//! evaluation costs one triangular solve plus one dot product per pixel. Both
//! routes perform the same floating-point operations in the same order and
//! agree bit for bit.

use alloc::vec::Vec;

use crate::background::{BackgroundModel, InstanceScorer, PreparedSignature};
use crate::bags::{Bag, BagSet, Label, Spectrum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Weight {
    /// One over the number of bags of that sign.
    #[default]
    Mean,
    Custom(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveConfig {
    pub alpha: Weight,
    pub beta: Weight,
}

impl ObjectiveConfig {
    /// Resolves `(alpha, beta)` for the given bag counts. With no negative
    /// bags and mean weighting, beta is 0 and unused.
    pub fn weights(&self, n_positive: usize, n_negative: usize) -> Result<(f64, f64)> {
        if n_positive == 0 {
            return Err(Error::NoPositiveBags);
        }
        let alpha = match self.alpha {
            Weight::Mean => 1.0 / n_positive as f64,
            Weight::Custom(a) => a,
        };
        let beta = match self.beta {
            Weight::Mean if n_negative == 0 => 0.0,
            Weight::Mean => 1.0 / n_negative as f64,
            Weight::Custom(b) => b,
        };
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(
                "objective weights must be finite".into(),
            ));
        }
        Ok((alpha, beta))
    }
}

/// Per-bag diagnostics behind one objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    /// Max response in each positive bag.
    pub positive_terms: Vec<f64>,
    /// Mean response in each negative bag (enters the total with a minus sign).
    pub negative_terms: Vec<f64>,
    /// Index of the maximizing pixel in each positive bag.
    pub argmax_pixels: Vec<usize>,
}

fn combine(
    alpha: f64,
    beta: f64,
    positive: impl Iterator<Item = f64>,
    negative_means: impl Iterator<Item = f64>,
) -> f64 {
    let mut pos_sum = 0.0;
    for t in positive {
        pos_sum += t;
    }
    let mut neg_sum = 0.0;
    let mut any_negative = false;
    for m in negative_means {
        neg_sum += m;
        any_negative = true;
    }
    if any_negative {
        alpha * pos_sum - beta * neg_sum
    } else {
        alpha * pos_sum
    }
}

fn require_label(bag: &Bag, label: Label) -> Result<()> {
    if bag.label != label {
        return Err(Error::WrongLabel(bag.id.clone()));
    }
    if bag.is_empty() {
        return Err(Error::Empty("bag"));
    }
    Ok(())
}

fn max_score<S: InstanceScorer>(
    scorer: &S,
    prepared: &S::Prepared,
    bag: &Bag,
) -> Result<(f64, usize)> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, px) in bag.pixels.iter().enumerate() {
        let v = scorer.score(prepared, &px.spectrum)?;
        if i == 0 || v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

fn mean_score<S: InstanceScorer>(scorer: &S, prepared: &S::Prepared, bag: &Bag) -> Result<f64> {
    let mut sum = 0.0;
    for px in &bag.pixels {
        sum += scorer.score(prepared, &px.spectrum)?;
    }
    Ok(sum / bag.len() as f64)
}

/// Largest response in a positive bag and the first pixel index attaining it.
pub fn positive_bag_term<S: InstanceScorer>(
    scorer: &S,
    signature: &Spectrum,
    bag: &Bag,
) -> Result<(f64, usize)> {
    require_label(bag, Label::Positive)?;
    let prepared = scorer.prepare(signature)?;
    max_score(scorer, &prepared, bag)
}

/// Minus the mean response over a negative bag.
pub fn negative_bag_term<S: InstanceScorer>(
    scorer: &S,
    signature: &Spectrum,
    bag: &Bag,
) -> Result<f64> {
    require_label(bag, Label::Negative)?;
    let prepared = scorer.prepare(signature)?;
    Ok(-mean_score(scorer, &prepared, bag)?)
}

/// Full objective with per-bag breakdown.
pub fn objective<S: InstanceScorer>(
    scorer: &S,
    signature: &Spectrum,
    bags: &BagSet,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    let (alpha, beta) = cfg.weights(bags.n_positive(), bags.n_negative())?;
    let prepared = scorer.prepare(signature)?;
    let mut positive_terms = Vec::with_capacity(bags.n_positive());
    let mut argmax_pixels = Vec::with_capacity(bags.n_positive());
    for bag in &bags.positive {
        require_label(bag, Label::Positive)?;
        let (v, i) = max_score(scorer, &prepared, bag)?;
        positive_terms.push(v);
        argmax_pixels.push(i);
    }
    let mut negative_terms = Vec::with_capacity(bags.n_negative());
    for bag in &bags.negative {
        require_label(bag, Label::Negative)?;
        negative_terms.push(mean_score(scorer, &prepared, bag)?);
    }
    let total = combine(
        alpha,
        beta,
        positive_terms.iter().copied(),
        negative_terms.iter().copied(),
    );
    Ok(ObjectiveBreakdown {
        total,
        positive_terms,
        negative_terms,
        argmax_pixels,
    })
}

/// Bag pixels in whitened coordinates, stored contiguously.
#[derive(Debug, Clone)]
struct WhitenedBag {
    data: Vec<f64>,
}

impl WhitenedBag {
    fn new(model: &BackgroundModel, bag: &Bag) -> Result<Self> {
        let d = model.bands();
        let mut data = alloc::vec![0.0; bag.len() * d];
        for (px, out) in bag.pixels.iter().zip(data.chunks_exact_mut(d)) {
            if px.spectrum.bands() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: px.spectrum.bands(),
                });
            }
            model.whiten_into(&px.spectrum, out);
        }
        Ok(WhitenedBag { data })
    }

    fn pixels(&self, d: usize) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(d)
    }

    fn len(&self, d: usize) -> usize {
        self.data.len() / d
    }

    fn max(&self, sig: &PreparedSignature, d: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, w) in self.pixels(d).enumerate() {
            let v = sig.response(w);
            if i == 0 || v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    fn mean(&self, sig: &PreparedSignature, d: usize) -> f64 {
        let mut sum = 0.0;
        for w in self.pixels(d) {
            sum += sig.response(w);
        }
        sum / self.len(d) as f64
    }
}

/// Matched-filter objective with bag pixels pre-whitened.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    model: &'a BackgroundModel,
    alpha: f64,
    beta: f64,
    positive: Vec<WhitenedBag>,
    negative: Vec<WhitenedBag>,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a BackgroundModel, bags: &BagSet, cfg: &ObjectiveConfig) -> Result<Self> {
        let (alpha, beta) = cfg.weights(bags.n_positive(), bags.n_negative())?;
        let positive = bags
            .positive
            .iter()
            .map(|b| {
                require_label(b, Label::Positive)?;
                WhitenedBag::new(model, b)
            })
            .collect::<Result<Vec<_>>>()?;
        let negative = bags
            .negative
            .iter()
            .map(|b| {
                require_label(b, Label::Negative)?;
                WhitenedBag::new(model, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Objective {
            model,
            alpha,
            beta,
            positive,
            negative,
        })
    }

    pub fn model(&self) -> &BackgroundModel {
        self.model
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Scalar objective value.
    pub fn value(&self, signature: &[f64]) -> Result<f64> {
        let sig = self.model.prepare_signature(signature)?;
        let d = self.model.bands();
        Ok(combine(
            self.alpha,
            self.beta,
            self.positive.iter().map(|b| b.max(&sig, d).0),
            self.negative.iter().map(|b| b.mean(&sig, d)),
        ))
    }

    /// Like [`value`](Self::value) but maps a degenerate signature to `-inf`.
    pub fn fitness(&self, signature: &[f64]) -> Result<f64> {
        match self.value(signature) {
            Err(Error::DegenerateSignature(_)) => Ok(f64::NEG_INFINITY),
            other => other,
        }
    }

    pub fn evaluate(&self, signature: &[f64]) -> Result<ObjectiveBreakdown> {
        let sig = self.model.prepare_signature(signature)?;
        let d = self.model.bands();
        let (positive_terms, argmax_pixels) = self
            .positive
            .iter()
            .map(|b| b.max(&sig, d))
            .unzip::<_, _, Vec<_>, Vec<_>>();
        let negative_terms: Vec<f64> = self.negative.iter().map(|b| b.mean(&sig, d)).collect();
        let total = combine(
            self.alpha,
            self.beta,
            positive_terms.iter().copied(),
            negative_terms.iter().copied(),
        );
        Ok(ObjectiveBreakdown {
            total,
            positive_terms,
            negative_terms,
            argmax_pixels,
        })
    }
}
