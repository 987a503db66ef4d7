//! Detection maps, ROC scoring and the exhaustive 2-band grid search.

use alloc::format;
use alloc::vec::Vec;

use crate::background::BackgroundModel;
use crate::bags::{BagSet, Spectrum};
use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveConfig};
use crate::synth::{GroundTruth, Scene};

/// Per-pixel detector output, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    pub rows: usize,
    pub cols: usize,
    pub scores: Vec<f64>,
}

/// Matched-filter response of every scene pixel to `signature`.
pub fn detection_map(
    scene: &Scene,
    model: &BackgroundModel,
    signature: &[f64],
) -> Result<DetectionMap> {
    if scene.bands() != model.bands() {
        return Err(Error::DimensionMismatch {
            expected: model.bands(),
            actual: scene.bands(),
        });
    }
    let sig = model.prepare_signature(signature)?;
    let mut w = alloc::vec![0.0; model.bands()];
    let scores = scene
        .pixels()
        .iter()
        .map(|p| {
            model.whiten_into(p, &mut w);
            sig.response(&w)
        })
        .collect();
    Ok(DetectionMap {
        rows: scene.rows(),
        cols: scene.cols(),
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Pixels scoring at or above this value are declared detections.
    pub threshold: f64,
    /// False alarms per unit area.
    pub far: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub area_per_pixel: f64,
}

impl RocCurve {
    /// Best detection rate reachable without exceeding `far`.
    pub fn pd_at(&self, far: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.far <= far)
            .last()
            .map_or(0.0, |p| p.pd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocOptions {
    pub area_per_pixel: f64,
    pub max_far: f64,
    /// Chebyshev radius in pixels. A target scores the max over its halo and
    /// pixels inside any target halo are left out of the false-alarm pool.
    /// Zero gives plain pixel-level scoring.
    pub halo: usize,
}

impl RocOptions {
    pub fn new(area_per_pixel: f64, max_far: f64) -> Self {
        RocOptions {
            area_per_pixel,
            max_far,
            halo: 0,
        }
    }
}

/// Pixel-level ROC truncated at `max_far`.
pub fn roc(
    map: &DetectionMap,
    truth: &GroundTruth,
    area_per_pixel: f64,
    max_far: f64,
) -> Result<RocCurve> {
    roc_with_options(map, truth, &RocOptions::new(area_per_pixel, max_far))
}

/// Threshold sweep over the distinct scores, highest first. Only the best
/// detection rate at each false-alarm level is kept, so the curve is a
/// staircase with strictly increasing `far`.
pub fn roc_with_options(
    map: &DetectionMap,
    truth: &GroundTruth,
    opts: &RocOptions,
) -> Result<RocCurve> {
    if map.rows != truth.rows || map.cols != truth.cols || map.scores.len() != truth.abundance.len()
    {
        return Err(Error::InvalidParameter(format!(
            "map {}x{} does not match truth {}x{}",
            map.rows, map.cols, truth.rows, truth.cols
        )));
    }
    if map.scores.len() != map.rows * map.cols {
        return Err(Error::InvalidParameter(
            "map score count does not match its extent".into(),
        ));
    }
    if !(opts.area_per_pixel > 0.0) || !opts.area_per_pixel.is_finite() {
        return Err(Error::InvalidParameter(
            "area per pixel must be positive".into(),
        ));
    }
    if !(opts.max_far >= 0.0) {
        return Err(Error::InvalidParameter(
            "max FAR must be nonnegative".into(),
        ));
    }
    if map.scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("detection map"));
    }

    let (rows, cols, h) = (map.rows, map.cols, opts.halo);
    let mut near_target = alloc::vec![false; rows * cols];
    let mut entries: Vec<(f64, bool)> = Vec::new();
    for i in (0..rows * cols).filter(|&i| truth.is_target(i)) {
        let (r, c) = (i / cols, i % cols);
        let mut best = f64::NEG_INFINITY;
        for rr in r.saturating_sub(h)..=(r + h).min(rows - 1) {
            for cc in c.saturating_sub(h)..=(c + h).min(cols - 1) {
                near_target[rr * cols + cc] = true;
                best = best.max(map.scores[rr * cols + cc]);
            }
        }
        entries.push((best, true));
    }
    let n_targets = entries.len();
    if n_targets == 0 {
        return Err(Error::NoTargets);
    }
    entries.extend(
        (0..rows * cols)
            .filter(|&i| !near_target[i])
            .map(|i| (map.scores[i], false)),
    );
    let n_background = entries.len() - n_targets;
    if n_background == 0 {
        return Err(Error::InvalidParameter(
            "no background pixels to count false alarms on".into(),
        ));
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));

    let denom = n_background as f64 * opts.area_per_pixel;
    let mut points: Vec<RocPoint> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < entries.len() {
        let threshold = entries[i].0;
        while i < entries.len() && entries[i].0 == threshold {
            if entries[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let far = fp as f64 / denom;
        if far > opts.max_far {
            break;
        }
        let point = RocPoint {
            threshold,
            far,
            pd: tp as f64 / n_targets as f64,
        };
        match points.last_mut() {
            Some(last) if last.far == far => *last = point,
            _ => points.push(point),
        }
    }
    Ok(RocCurve {
        points,
        area_per_pixel: opts.area_per_pixel,
    })
}

/// Dense objective field over a 2-band lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub bounds: [(f64, f64); 2],
    pub step: f64,
    /// Lattice size along each band.
    pub shape: [usize; 2],
    /// `values[i * shape[1] + j]` is the objective at
    /// `(lo0 + i * step, lo1 + j * step)`; degenerate points hold `-inf`.
    pub values: Vec<f64>,
    pub argmax: Spectrum,
    pub argmax_value: f64,
}

impl GridSearchResult {
    pub fn coordinate(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.bounds[0].0 + i as f64 * self.step,
            self.bounds[1].0 + j as f64 * self.step,
        ]
    }
}

fn axis_len(lo: f64, hi: f64, step: f64) -> Result<usize> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "invalid grid bounds [{lo}, {hi}]"
        )));
    }
    // Tolerate rounding so that e.g. 11 / 0.01 keeps its last lattice point.
    Ok(libm::floor((hi - lo) / step + 1e-9) as usize + 1)
}

/// Evaluates the objective at every lattice point of `bounds` with spacing
/// `step`. The first maximum in row-major (lexicographic) order wins.
pub fn grid_search_2d(
    model: &BackgroundModel,
    bags: &BagSet,
    obj_cfg: &ObjectiveConfig,
    bounds: [(f64, f64); 2],
    step: f64,
) -> Result<GridSearchResult> {
    if model.bands() != 2 {
        return Err(Error::NotTwoDimensional(model.bands()));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let objective = Objective::new(model, bags, obj_cfg)?;
    let shape = [
        axis_len(bounds[0].0, bounds[0].1, step)?,
        axis_len(bounds[1].0, bounds[1].1, step)?,
    ];
    let mut values = Vec::with_capacity(shape[0] * shape[1]);
    let mut best = (f64::NEG_INFINITY, [bounds[0].0, bounds[1].0]);
    for i in 0..shape[0] {
        let x = bounds[0].0 + i as f64 * step;
        for j in 0..shape[1] {
            let y = bounds[1].0 + j as f64 * step;
            let v = objective.fitness(&[x, y])?;
            if v > best.0 {
                best = (v, [x, y]);
            }
            values.push(v);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::DegenerateSignature(0.0));
    }
    Ok(GridSearchResult {
        bounds,
        step,
        shape,
        values,
        argmax: Spectrum::new(best.1.to_vec())?,
        argmax_value: best.0,
    })
}
