//! Synthetic scenes: Gaussian background with sub-pixel targets mixed in
//! linearly, plus bag sampling with known ground truth.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bags::{Bag, BagSet, Label, Pixel, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Row-major image of spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    rows: usize,
    cols: usize,
    bands: usize,
    pixels: Vec<Spectrum>,
}

impl Scene {
    pub fn new(rows: usize, cols: usize, pixels: Vec<Spectrum>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("scene"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "scene of {rows}x{cols} needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        let bands = pixels[0].bands();
        for p in &pixels {
            if p.bands() != bands {
                return Err(Error::DimensionMismatch {
                    expected: bands,
                    actual: p.bands(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("scene"));
            }
        }
        Ok(Scene {
            rows,
            cols,
            bands,
            pixels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> &[Spectrum] {
        &self.pixels
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&Spectrum> {
        (row < self.rows && col < self.cols).then(|| &self.pixels[self.index(row, col)])
    }

    /// Pixel with its image location attached.
    pub fn pixel_at(&self, row: usize, col: usize) -> Option<Pixel> {
        self.get(row, col).map(|s| Pixel::at(s.clone(), row, col))
    }
}

/// Per-pixel target abundance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rows: usize,
    pub cols: usize,
    pub abundance: Vec<f64>,
    pub target: Spectrum,
}

impl GroundTruth {
    pub fn is_target(&self, index: usize) -> bool {
        self.abundance[index] > 0.0
    }

    pub fn target_count(&self) -> usize {
        self.abundance.iter().filter(|a| **a > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetLayout {
    /// Rows and columns `start, start + spacing, ...` inside the image.
    Grid {
        start: usize,
        spacing: usize,
    },
    Explicit(Vec<(usize, usize)>),
}

impl TargetLayout {
    pub fn locations(&self, rows: usize, cols: usize) -> Result<Vec<(usize, usize)>> {
        match self {
            TargetLayout::Grid { start, spacing } => {
                if *spacing == 0 {
                    return Err(Error::InvalidParameter(
                        "grid spacing must be positive".into(),
                    ));
                }
                let rs = (*start..rows).step_by(*spacing);
                Ok(rs
                    .flat_map(|r| (*start..cols).step_by(*spacing).map(move |c| (r, c)))
                    .collect())
            }
            TargetLayout::Explicit(locs) => {
                if let Some(&(r, c)) = locs.iter().find(|(r, c)| *r >= rows || *c >= cols) {
                    return Err(Error::InvalidParameter(format!(
                        "target location ({r}, {c}) outside {rows}x{cols} scene"
                    )));
                }
                Ok(locs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub cols: usize,
    pub bg_mean: Spectrum,
    pub bg_cov: Matrix,
    pub target: Spectrum,
    pub target_locations: TargetLayout,
    pub proportion_range: (f64, f64),
    pub n_pos_bags: usize,
    pub pos_bag_size: usize,
    pub n_neg_bags: usize,
    pub neg_bag_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 100x100 two-band scene, background N((5,5), [[1,.5],[.5,1]]), target
    /// (10,3) on a 10x10 grid at 25-50% abundance, three positive bags of 30
    /// and three negative bags of 80 pixels.
    fn default() -> Self {
        SyntheticConfig {
            rows: 100,
            cols: 100,
            bg_mean: Spectrum::from_vec_unchecked(alloc::vec![5.0, 5.0]),
            bg_cov: Matrix::from_row_major(2, alloc::vec![1.0, 0.5, 0.5, 1.0]).expect("2x2"),
            target: Spectrum::from_vec_unchecked(alloc::vec![10.0, 3.0]),
            target_locations: TargetLayout::Grid {
                start: 5,
                spacing: 10,
            },
            proportion_range: (0.25, 0.5),
            n_pos_bags: 3,
            pos_bag_size: 30,
            n_neg_bags: 3,
            neg_bag_size: 80,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn check(&self) -> Result<()> {
        let d = self.bg_mean.bands();
        if self.bg_cov.dim() != d || self.target.bands() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: if self.bg_cov.dim() != d {
                    self.bg_cov.dim()
                } else {
                    self.target.bands()
                },
            });
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Empty("scene"));
        }
        let (lo, hi) = self.proportion_range;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "proportion range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        if self.pos_bag_size == 0 || self.neg_bag_size == 0 {
            return Err(Error::InvalidParameter("bag sizes must be positive".into()));
        }
        Ok(())
    }
}

/// `proportion * target + (1 - proportion) * background`.
pub fn mix_pixel(background: &[f64], target: &[f64], proportion: f64) -> Result<Spectrum> {
    if background.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: background.len(),
            actual: target.len(),
        });
    }
    if !(0.0..=1.0).contains(&proportion) {
        return Err(Error::InvalidParameter(format!(
            "proportion {proportion} outside [0, 1]"
        )));
    }
    Spectrum::new(
        background
            .iter()
            .zip(target)
            .map(|(b, t)| proportion * t + (1.0 - proportion) * b)
            .collect(),
    )
}

/// Draws the background, then replaces each target location by a linear
/// mixture with abundance uniform on `proportion_range`.
pub fn generate_scene(cfg: &SyntheticConfig) -> Result<(Scene, GroundTruth)> {
    cfg.check()?;
    let chol = Cholesky::factor(&cfg.bg_cov)?;
    let d = cfg.bg_mean.bands();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.rows * cfg.cols;
    let mut pixels = Vec::with_capacity(n);
    let mut z = alloc::vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x: Vec<f64> = chol
            .mul_lower(&z)
            .iter()
            .zip(cfg.bg_mean.iter())
            .map(|(a, m)| a + m)
            .collect();
        pixels.push(Spectrum::from_vec_unchecked(x));
    }
    let mut abundance = alloc::vec![0.0; n];
    let (lo, hi) = cfg.proportion_range;
    for (r, c) in cfg.target_locations.locations(cfg.rows, cfg.cols)? {
        let i = r * cfg.cols + c;
        let p = rng.random_range(lo..=hi);
        pixels[i] = mix_pixel(&pixels[i], &cfg.target, p)?;
        abundance[i] = p;
    }
    let scene = Scene::new(cfg.rows, cfg.cols, pixels)?;
    let truth = GroundTruth {
        rows: cfg.rows,
        cols: cfg.cols,
        abundance,
        target: cfg.target.clone(),
    };
    Ok((scene, truth))
}

/// Samples disjoint bags: each positive bag gets one target pixel and
/// `pos_bag_size - 1` target-free pixels; negative bags are target-free.
/// Uses its own random stream so it does not perturb scene generation.
pub fn sample_bags(scene: &Scene, truth: &GroundTruth, cfg: &SyntheticConfig) -> Result<BagSet> {
    cfg.check()?;
    if truth.rows != scene.rows()
        || truth.cols != scene.cols()
        || truth.abundance.len() != scene.pixels().len()
    {
        return Err(Error::InvalidParameter(
            "ground truth does not match scene extent".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut targets: Vec<usize> = (0..truth.abundance.len())
        .filter(|&i| truth.is_target(i))
        .collect();
    let mut clutter: Vec<usize> = (0..truth.abundance.len())
        .filter(|&i| !truth.is_target(i))
        .collect();
    if targets.len() < cfg.n_pos_bags {
        return Err(Error::InsufficientPixels {
            needed: cfg.n_pos_bags,
            available: targets.len(),
        });
    }
    let clutter_needed =
        cfg.n_pos_bags * (cfg.pos_bag_size - 1) + cfg.n_neg_bags * cfg.neg_bag_size;
    if clutter.len() < clutter_needed {
        return Err(Error::InsufficientPixels {
            needed: clutter_needed,
            available: clutter.len(),
        });
    }
    targets.shuffle(&mut rng);
    clutter.shuffle(&mut rng);
    let mut clutter = clutter.into_iter();
    let pixel = |i: usize| {
        Pixel::at(
            scene.pixels()[i].clone(),
            i / scene.cols(),
            i % scene.cols(),
        )
    };

    let mut positive = Vec::with_capacity(cfg.n_pos_bags);
    for (j, &t) in targets.iter().take(cfg.n_pos_bags).enumerate() {
        let mut members: Vec<usize> = clutter.by_ref().take(cfg.pos_bag_size - 1).collect();
        let at = rng.random_range(0..=members.len());
        members.insert(at, t);
        positive.push(Bag::new(
            format!("pos-{j}"),
            Label::Positive,
            members.into_iter().map(pixel).collect(),
        ));
    }
    let mut negative = Vec::with_capacity(cfg.n_neg_bags);
    for j in 0..cfg.n_neg_bags {
        let members = clutter.by_ref().take(cfg.neg_bag_size).map(pixel).collect();
        negative.push(Bag::new(format!("neg-{j}"), Label::Negative, members));
    }
    BagSet::new(positive, negative)
}
