//! Spectra, pixels and bag-labeled training data.
//!
//! A positive bag asserts that at least one member pixel contains some
//! target material; a negative bag asserts that none does. The labels are a
//! data contract and cannot be checked against raw spectra.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};

/// A vector of band values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Builds a spectrum, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(Spectrum(values))
    }

    /// Wraps `values` without checking them. `validate` will still report
    /// non-finite entries in bags built from such spectra.
    pub fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Spectrum(values)
    }

    pub fn zeros(bands: usize) -> Self {
        Spectrum(alloc::vec![0.0; bands])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn bands(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.0
    }
}

/// Image coordinates of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub spectrum: Spectrum,
    pub location: Option<Location>,
}

impl Pixel {
    pub fn new(spectrum: Spectrum) -> Self {
        Pixel {
            spectrum,
            location: None,
        }
    }

    pub fn at(spectrum: Spectrum, row: usize, col: usize) -> Self {
        Pixel {
            spectrum,
            location: Some(Location { row, col }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub id: String,
    pub label: Label,
    pub pixels: Vec<Pixel>,
}

impl Bag {
    pub fn new(id: impl Into<String>, label: Label, pixels: Vec<Pixel>) -> Self {
        Bag {
            id: id.into(),
            label,
            pixels,
        }
    }

    /// Convenience constructor for bags without image locations.
    pub fn from_spectra(id: impl Into<String>, label: Label, spectra: Vec<Spectrum>) -> Self {
        Bag::new(id, label, spectra.into_iter().map(Pixel::new).collect())
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn spectra(&self) -> impl Iterator<Item = &Spectrum> + '_ {
        self.pixels.iter().map(|p| &p.spectrum)
    }
}

/// Positive and negative training bags.
///
/// Fields are public so that malformed sets can be inspected with
/// [`validate`]; use [`BagSet::new`] at input boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BagSet {
    pub positive: Vec<Bag>,
    pub negative: Vec<Bag>,
}

impl BagSet {
    /// Builds a bag set and rejects it unless [`validate`] finds no issues.
    pub fn new(positive: Vec<Bag>, negative: Vec<Bag>) -> Result<Self> {
        let set = BagSet { positive, negative };
        let report = validate(&set);
        match report.issues.first() {
            None => Ok(set),
            Some(ValidationIssue::NoPositiveBags) => Err(Error::NoPositiveBags),
            Some(ValidationIssue::DimensionMismatch {
                expected, found, ..
            }) => Err(Error::DimensionMismatch {
                expected: *expected,
                actual: *found,
            }),
            Some(ValidationIssue::EmptyBag { .. }) => Err(Error::Empty("bag")),
            Some(ValidationIssue::NonFinite { .. }) => Err(Error::NonFinite("bag pixel")),
            Some(issue) => Err(Error::InvalidParameter(alloc::format!("{issue:?}"))),
        }
    }

    pub fn n_positive(&self) -> usize {
        self.positive.len()
    }

    pub fn n_negative(&self) -> usize {
        self.negative.len()
    }

    /// Band count of the first pixel found, if any.
    pub fn bands(&self) -> Option<usize> {
        self.positive
            .iter()
            .chain(&self.negative)
            .flat_map(|b| b.pixels.first())
            .map(|p| p.spectrum.bands())
            .next()
    }

    /// All positive-bag pixels in (bag, pixel) order.
    pub fn positive_spectra(&self) -> impl Iterator<Item = &Spectrum> + '_ {
        self.positive.iter().flat_map(|b| b.spectra())
    }

    pub fn all_spectra(&self) -> impl Iterator<Item = &Spectrum> + '_ {
        self.positive
            .iter()
            .chain(&self.negative)
            .flat_map(|b| b.spectra())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    NoPositiveBags,
    EmptyBag {
        id: String,
    },
    DimensionMismatch {
        id: String,
        pixel: usize,
        expected: usize,
        found: usize,
    },
    NonFinite {
        id: String,
        pixel: usize,
    },
    WrongLabel {
        id: String,
        expected: Label,
    },
    DuplicateId {
        id: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Lists every structural problem in `bags`. The reference band count is
/// taken from the first pixel of the first non-empty bag.
pub fn validate(bags: &BagSet) -> ValidationReport {
    let mut issues = Vec::new();
    if bags.positive.is_empty() {
        issues.push(ValidationIssue::NoPositiveBags);
    }
    let reference = bags.bands();
    let mut seen = BTreeSet::new();
    let tagged = bags
        .positive
        .iter()
        .map(|b| (b, Label::Positive))
        .chain(bags.negative.iter().map(|b| (b, Label::Negative)));
    for (bag, expected) in tagged {
        if !seen.insert(bag.id.as_str()) {
            issues.push(ValidationIssue::DuplicateId { id: bag.id.clone() });
        }
        if bag.label != expected {
            issues.push(ValidationIssue::WrongLabel {
                id: bag.id.clone(),
                expected,
            });
        }
        if bag.pixels.is_empty() {
            issues.push(ValidationIssue::EmptyBag { id: bag.id.clone() });
        }
        for (i, px) in bag.pixels.iter().enumerate() {
            if let Some(expected) = reference {
                if px.spectrum.bands() != expected {
                    issues.push(ValidationIssue::DimensionMismatch {
                        id: bag.id.clone(),
                        pixel: i,
                        expected,
                        found: px.spectrum.bands(),
                    });
                }
            }
            if !px.spectrum.is_finite() {
                issues.push(ValidationIssue::NonFinite {
                    id: bag.id.clone(),
                    pixel: i,
                });
            }
        }
    }
    ValidationReport { issues }
}
