//! JSON run configuration. Every field is optional; the defaults reproduce
//! the two-band synthetic experiment end to end.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "synthetic": { "rows": 100, "cols": 100, "bg_mean": [5, 5],
//!                  "bg_cov": [[1, 0.5], [0.5, 1]], "target": [10, 3],
//!                  "target_grid": { "start": 5, "spacing": 10 },
//!                  "proportion_range": [0.25, 0.5],
//!                  "n_pos_bags": 3, "pos_bag_size": 30,
//!                  "n_neg_bags": 3, "neg_bag_size": 80 },
//!   "ea": { "n_pop": 50, "n_iter": 500, "w_n": 0.8,
//!           "narrow_fraction": 0.01, "wide_ratio": 10, "init": [[1, 7]] },
//!   "objective": { "alpha": "mean", "beta": "mean" },
//!   "background": { "regularization": { "relative": 1e-6 }, "source": "scene" },
//!   "roc": { "area_per_pixel": 1, "max_far": 0.001, "halo": 0 },
//!   "band_average": 4,
//!   "paths": { "scene": "scene.misig", "bags": "bags.json" }
//! }
//! ```

use std::path::{Path, PathBuf};

use misig_core::{
    EAConfig, InitMode, Matrix, MutationParams, MutationSetting, ObjectiveConfig, Regularization,
    RocOptions, Spectrum, SyntheticConfig, TargetLayout, Weight,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::read_file;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synthetic: SyntheticSection,
    pub ea: EaSection,
    pub objective: ObjectiveSection,
    pub background: BackgroundSection,
    pub roc: RocSection,
    pub band_average: Option<usize>,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scene: Option<PathBuf>,
    pub bags: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLayout {
    pub start: usize,
    pub spacing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub rows: usize,
    pub cols: usize,
    pub bg_mean: Vec<f64>,
    pub bg_cov: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub target_grid: Option<GridLayout>,
    /// Explicit `[row, col]` target locations; overrides `target_grid`.
    pub target_locations: Option<Vec<[usize; 2]>>,
    pub proportion_range: [f64; 2],
    pub n_pos_bags: usize,
    pub pos_bag_size: usize,
    pub n_neg_bags: usize,
    pub neg_bag_size: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection {
            rows: 100,
            cols: 100,
            bg_mean: vec![5.0, 5.0],
            bg_cov: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
            target: vec![10.0, 3.0],
            target_grid: Some(GridLayout {
                start: 5,
                spacing: 10,
            }),
            target_locations: None,
            proportion_range: [0.25, 0.5],
            n_pos_bags: 3,
            pos_bag_size: 30,
            n_neg_bags: 3,
            neg_bag_size: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaSection {
    pub n_pop: usize,
    pub n_iter: usize,
    pub w_n: f64,
    /// Narrow std as a fraction of each band's spread over positive pixels.
    pub narrow_fraction: f64,
    pub wide_ratio: f64,
    /// Absolute scales; when both are set they replace the data-scaled ones.
    pub sigma_n: Option<f64>,
    pub sigma_w: Option<f64>,
    /// Starting spectra; omitted means best positive pixel plus random ones.
    pub init: Option<Vec<Vec<f64>>>,
    pub plateau_stop: Option<usize>,
    /// Overrides the top-level seed for the search only.
    pub seed: Option<u64>,
}

impl Default for EaSection {
    fn default() -> Self {
        EaSection {
            n_pop: 50,
            n_iter: 500,
            w_n: 0.8,
            narrow_fraction: 0.01,
            wide_ratio: 10.0,
            sigma_n: None,
            sigma_w: None,
            init: None,
            plateau_stop: None,
            seed: None,
        }
    }
}

/// `"mean"` or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightValue {
    Value(f64),
    Name(String),
}

impl Default for WeightValue {
    fn default() -> Self {
        WeightValue::Name("mean".into())
    }
}

impl WeightValue {
    fn to_weight(&self) -> Result<Weight> {
        match self {
            WeightValue::Value(v) => Ok(Weight::Custom(*v)),
            WeightValue::Name(n) if n == "mean" => Ok(Weight::Mean),
            WeightValue::Name(n) => Err(Error::Input(format!(
                "unknown weight `{n}`, expected \"mean\" or a number"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub alpha: WeightValue,
    pub beta: WeightValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RegularizationValue {
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundSource {
    /// Every scene pixel, targets included.
    #[default]
    Scene,
    NegativeBags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    pub regularization: RegularizationValue,
    pub source: BackgroundSource,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        BackgroundSection {
            regularization: RegularizationValue::Relative(1e-6),
            source: BackgroundSource::Scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocSection {
    pub area_per_pixel: f64,
    pub max_far: f64,
    pub halo: usize,
}

impl Default for RocSection {
    fn default() -> Self {
        RocSection {
            area_per_pixel: 1.0,
            max_far: 1e-3,
            halo: 0,
        }
    }
}

impl RunConfig {
    /// Reads and validates a config without touching the paths it names.
    pub fn parse(path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_slice(&read_file(path)?)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Like [`parse`](Self::parse), and also checks that every referenced
    /// input path exists.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = RunConfig::parse(path)?;
        for p in [&cfg.paths.scene, &cfg.paths.bags, &cfg.paths.truth]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::Input(format!(
                    "configured path {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn check(&self) -> Result<()> {
        self.synthetic_config()?.check()?;
        self.ea_config()?.check()?;
        self.objective_config()?;
        self.roc_options()?;
        if self.band_average == Some(0) {
            return Err(Error::Input("band_average must be at least 1".into()));
        }
        Ok(())
    }

    pub fn synthetic_config(&self) -> Result<SyntheticConfig> {
        let s = &self.synthetic;
        let d = s.bg_mean.len();
        let flat: Vec<f64> = s.bg_cov.iter().flatten().copied().collect();
        if s.bg_cov.len() != d || s.bg_cov.iter().any(|r| r.len() != d) {
            return Err(Error::Input(format!("bg_cov must be {d}x{d}")));
        }
        let target_locations = match (&s.target_locations, s.target_grid) {
            (Some(locs), _) => TargetLayout::Explicit(locs.iter().map(|[r, c]| (*r, *c)).collect()),
            (None, Some(g)) => TargetLayout::Grid {
                start: g.start,
                spacing: g.spacing,
            },
            (None, None) => TargetLayout::Explicit(Vec::new()),
        };
        Ok(SyntheticConfig {
            rows: s.rows,
            cols: s.cols,
            bg_mean: Spectrum::new(s.bg_mean.clone())?,
            bg_cov: Matrix::from_row_major(d, flat)?,
            target: Spectrum::new(s.target.clone())?,
            target_locations,
            proportion_range: (s.proportion_range[0], s.proportion_range[1]),
            n_pos_bags: s.n_pos_bags,
            pos_bag_size: s.pos_bag_size,
            n_neg_bags: s.n_neg_bags,
            neg_bag_size: s.neg_bag_size,
            seed: self.seed,
        })
    }

    pub fn ea_config(&self) -> Result<EAConfig> {
        let e = &self.ea;
        let mutation = match (e.sigma_n, e.sigma_w) {
            (Some(n), Some(w)) => MutationSetting::Fixed(MutationParams::new(e.w_n, n, w)?),
            (None, None) => {
                // Validate the shape of the mixture up front.
                MutationParams::new(e.w_n, e.narrow_fraction, e.narrow_fraction * e.wide_ratio)?;
                MutationSetting::Auto {
                    w_n: e.w_n,
                    narrow_fraction: e.narrow_fraction,
                    wide_ratio: e.wide_ratio,
                }
            }
            _ => {
                return Err(Error::Input(
                    "set both ea.sigma_n and ea.sigma_w, or neither".into(),
                ))
            }
        };
        let init = match &e.init {
            None => InitMode::BestPlusRandom,
            Some(list) => InitMode::Custom(
                list.iter()
                    .map(|v| Spectrum::new(v.clone()))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            ),
        };
        let cfg = EAConfig {
            n_pop: e.n_pop,
            n_iter: e.n_iter,
            mutation,
            seed: e.seed.unwrap_or(self.seed),
            init,
            plateau_stop: e.plateau_stop,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn objective_config(&self) -> Result<ObjectiveConfig> {
        Ok(ObjectiveConfig {
            alpha: self.objective.alpha.to_weight()?,
            beta: self.objective.beta.to_weight()?,
        })
    }

    pub fn regularization(&self) -> Regularization {
        match self.background.regularization {
            RegularizationValue::Relative(f) => Regularization::Relative(f),
            RegularizationValue::Absolute(e) => Regularization::Absolute(e),
        }
    }

    pub fn roc_options(&self) -> Result<RocOptions> {
        let r = &self.roc;
        if !(r.area_per_pixel > 0.0 && r.area_per_pixel.is_finite()) {
            return Err(Error::Input("roc.area_per_pixel must be positive".into()));
        }
        if !(r.max_far >= 0.0) {
            return Err(Error::Input("roc.max_far must be nonnegative".into()));
        }
        Ok(RocOptions {
            area_per_pixel: r.area_per_pixel,
            max_far: r.max_far,
            halo: r.halo,
        })
    }
}
