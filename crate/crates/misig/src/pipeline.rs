//! The steps behind each subcommand, usable without the command line.

use misig_core::eval::roc_with_options;
use misig_core::evo::{best_positive_pixel, run_with};
use misig_core::{
    detection_map, fit_background, generate_scene, grid_search_2d, sample_bags, BackgroundModel,
    BagSet, DetectionMap, GridSearchResult, GroundTruth, Objective, RocCurve, Scene,
};
use serde::{Deserialize, Serialize};

use crate::config::{BackgroundSource, RunConfig};
use crate::error::{Error, Result};
use crate::transform::band_average;

/// Applies the configured band averaging, if any.
pub fn prepare_scene(scene: Scene, cfg: &RunConfig) -> Result<Scene> {
    match cfg.band_average {
        Some(f) if f > 1 => band_average(&scene, f),
        _ => Ok(scene),
    }
}

pub fn fit_model(scene: &Scene, bags: Option<&BagSet>, cfg: &RunConfig) -> Result<BackgroundModel> {
    let model = match (cfg.background.source, bags) {
        (BackgroundSource::Scene, _) => fit_background(scene.pixels(), cfg.regularization())?,
        (BackgroundSource::NegativeBags, Some(b)) => fit_background(
            b.negative.iter().flat_map(|bag| bag.spectra()),
            cfg.regularization(),
        )?,
        (BackgroundSource::NegativeBags, None) => {
            return Err(Error::Input(
                "background.source = negative-bags needs a bag file".into(),
            ))
        }
    };
    Ok(model)
}

pub struct Generated {
    pub scene: Scene,
    pub truth: GroundTruth,
    pub bags: BagSet,
}

pub fn generate(cfg: &RunConfig) -> Result<Generated> {
    let syn = cfg.synthetic_config()?;
    let (scene, truth) = generate_scene(&syn)?;
    let bags = sample_bags(&scene, &truth, &syn)?;
    Ok(Generated { scene, truth, bags })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSummary {
    pub mean: Vec<f64>,
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub signature: Vec<f64>,
    pub objective: f64,
    pub bag: String,
    pub pixel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownSummary {
    pub positive_bags: Vec<String>,
    pub positive_terms: Vec<f64>,
    pub argmax_pixels: Vec<usize>,
    pub negative_bags: Vec<String>,
    pub negative_means: Vec<f64>,
}

/// Everything `estimate` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub best_signature: Vec<f64>,
    pub best_objective: f64,
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub seed: u64,
    pub n_pop: usize,
    pub n_iter: usize,
    pub background: BackgroundSummary,
    /// The positive-bag pixel with the highest objective.
    pub baseline: BaselineSummary,
    pub breakdown: BreakdownSummary,
}

impl EstimateReport {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}

pub fn estimate(scene: &Scene, bags: &BagSet, cfg: &RunConfig) -> Result<EstimateReport> {
    if bags.bands() != Some(scene.bands()) {
        return Err(Error::Input(format!(
            "bags have {:?} bands, scene has {}",
            bags.bands(),
            scene.bands()
        )));
    }
    let model = fit_model(scene, Some(bags), cfg)?;
    let ea = cfg.ea_config()?;
    let objective = Objective::new(&model, bags, &cfg.objective_config()?)?;
    let result = run_with(&objective, bags, &ea)?;
    if !result.best_objective.is_finite() {
        return Err(misig_core::Error::DegenerateInitialization.into());
    }
    let (at, baseline, _) = best_positive_pixel(&objective, bags)?;
    let breakdown = objective.evaluate(&result.best_signature)?;
    Ok(EstimateReport {
        best_signature: result.best_signature.to_vec(),
        best_objective: result.best_objective,
        trace: result.trace,
        evaluations: result.evaluations,
        seed: ea.seed,
        n_pop: ea.n_pop,
        n_iter: ea.n_iter,
        background: BackgroundSummary {
            mean: model.mean().to_vec(),
            regularization: model.regularization(),
        },
        baseline: BaselineSummary {
            signature: baseline.signature.to_vec(),
            objective: baseline.objective,
            bag: bags.positive[at.bag].id.clone(),
            pixel: at.pixel,
        },
        breakdown: BreakdownSummary {
            positive_bags: bags.positive.iter().map(|b| b.id.clone()).collect(),
            positive_terms: breakdown.positive_terms,
            argmax_pixels: breakdown.argmax_pixels,
            negative_bags: bags.negative.iter().map(|b| b.id.clone()).collect(),
            negative_means: breakdown.negative_terms,
        },
    })
}

pub fn detect(scene: &Scene, signature: &[f64], cfg: &RunConfig) -> Result<DetectionMap> {
    if signature.len() != scene.bands() {
        return Err(Error::Input(format!(
            "signature has {} bands, scene has {}",
            signature.len(),
            scene.bands()
        )));
    }
    let model = fit_model(scene, None, cfg)?;
    Ok(detection_map(scene, &model, signature)?)
}

pub fn roc_curve(map: &DetectionMap, truth: &GroundTruth, cfg: &RunConfig) -> Result<RocCurve> {
    Ok(roc_with_options(map, truth, &cfg.roc_options()?)?)
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,far,pd\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.pd));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub bounds: [[f64; 2]; 2],
    pub step: f64,
    pub shape: [usize; 2],
    pub evaluations: usize,
    pub argmax: Vec<f64>,
    pub argmax_value: f64,
    pub background_mean: Vec<f64>,
}

pub fn grid(
    scene: &Scene,
    bags: &BagSet,
    cfg: &RunConfig,
    bounds: [(f64, f64); 2],
    step: f64,
) -> Result<(GridSearchResult, GridReport)> {
    let model = fit_model(scene, Some(bags), cfg)?;
    let g = grid_search_2d(&model, bags, &cfg.objective_config()?, bounds, step)?;
    let report = GridReport {
        bounds: [[bounds[0].0, bounds[0].1], [bounds[1].0, bounds[1].1]],
        step,
        shape: g.shape,
        evaluations: g.values.len(),
        argmax: g.argmax.to_vec(),
        argmax_value: g.argmax_value,
        background_mean: model.mean().to_vec(),
    };
    Ok((g, report))
}
