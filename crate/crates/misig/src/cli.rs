//! Command-line front end. Every subcommand writes its outputs atomically.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use misig_core::DetectionMap;

use crate::bagspec::{load_bags, BagSpecFile};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::{
    load_map, load_scene, load_truth, read_file, save_map, save_scene, save_truth, write_atomic,
};
use crate::pipeline::{self, EstimateReport};

#[derive(Debug, Parser)]
#[command(
    name = "misig",
    version,
    about = "Estimate target signatures from labeled bags of pixels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Best,
    Baseline,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scene with implanted targets and sample bags from it.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_scene: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
        #[arg(long)]
        out_bags: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the evolutionary search and write the result as JSON.
    Estimate {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        bags: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score every pixel of a scene against an estimated signature.
    Detect {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// An `estimate` result, or a bare JSON array of band values.
        #[arg(long)]
        signature: PathBuf,
        #[arg(long, value_enum, default_value = "best")]
        which: Which,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a ROC curve from a detection map and ground truth.
    Roc {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        area: Option<f64>,
        #[arg(long)]
        max_far: Option<f64>,
        /// Background pixels within this Chebyshev distance of a target are ignored.
        #[arg(long)]
        halo: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the objective on a dense lattice over a two-band space.
    Grid {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        bags: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `LO HI` for both bands, or `LO0 HI0 LO1 HI1`.
        #[arg(long, num_args = 2..=4, allow_negative_numbers = true, default_values_t = [0.0, 11.0])]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Objective field as a one-band native cube.
        #[arg(long)]
        out: PathBuf,
        /// Summary JSON; defaults to the field path with `.json` appended.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

fn required(
    flag: Option<PathBuf>,
    fallback: &Option<PathBuf>,
    flag_name: &str,
    key: &str,
) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| {
        Error::Input(format!(
            "--{flag_name} is required (or set paths.{key} in the config)"
        ))
    })
}

fn with_seed(mut cfg: RunConfig, seed: Option<u64>) -> RunConfig {
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.ea.seed = None;
    }
    cfg
}

fn load_bag_set(path: &Path, scene: &misig_core::Scene) -> Result<misig_core::BagSet> {
    let (bags, warnings) = load_bags(&BagSpecFile::load(path)?, scene)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(bags)
}

fn read_signature(path: &Path, which: Which) -> Result<Vec<f64>> {
    let bytes = read_file(path)?;
    if let Ok(v) = serde_json::from_slice::<Vec<f64>>(&bytes) {
        return Ok(v);
    }
    let report: EstimateReport = serde_json::from_slice(&bytes)?;
    Ok(match which {
        Which::Best => report.best_signature,
        Which::Baseline => report.baseline.signature,
    })
}

fn grid_bounds(b: &[f64]) -> Result<[(f64, f64); 2]> {
    match *b {
        [lo, hi] => Ok([(lo, hi), (lo, hi)]),
        [lo0, hi0, lo1, hi1] => Ok([(lo0, hi0), (lo1, hi1)]),
        _ => Err(Error::Input("--bounds takes 2 or 4 values".into())),
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            config,
            out_scene,
            out_truth,
            out_bags,
            seed,
        } => {
            let cfg = match config {
                Some(p) => RunConfig::parse(&p)?,
                None => RunConfig::default(),
            };
            let cfg = with_seed(cfg, seed);
            let g = pipeline::generate(&cfg)?;
            let spec = BagSpecFile::from_bag_set(&g.bags)?;
            save_scene(&out_scene, &g.scene)?;
            save_truth(&out_truth, &g.truth)?;
            spec.save(&out_bags)
        }
        Command::Estimate {
            scene,
            bags,
            config,
            out,
            seed,
        } => {
            let cfg = with_seed(RunConfig::load_or_default(config.as_deref())?, seed);
            let scene_path = required(scene, &cfg.paths.scene, "scene", "scene")?;
            let bags_path = required(bags, &cfg.paths.bags, "bags", "bags")?;
            let out = required(out, &cfg.paths.output, "out", "output")?;
            let scene = pipeline::prepare_scene(load_scene(&scene_path)?, &cfg)?;
            let bags = load_bag_set(&bags_path, &scene)?;
            let report = pipeline::estimate(&scene, &bags, &cfg)?;
            write_atomic(&out, &report.to_json()?)
        }
        Command::Detect {
            scene,
            signature,
            which,
            config,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let scene_path = required(scene, &cfg.paths.scene, "scene", "scene")?;
            let scene = pipeline::prepare_scene(load_scene(&scene_path)?, &cfg)?;
            let sig = read_signature(&signature, which)?;
            let map = pipeline::detect(&scene, &sig, &cfg)?;
            save_map(&out, &map)
        }
        Command::Roc {
            map,
            truth,
            area,
            max_far,
            halo,
            config,
            out,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(a) = area {
                cfg.roc.area_per_pixel = a;
            }
            if let Some(f) = max_far {
                cfg.roc.max_far = f;
            }
            if let Some(h) = halo {
                cfg.roc.halo = h;
            }
            let map = load_map(&map)?;
            let truth = load_truth(&truth)?;
            let curve = pipeline::roc_curve(&map, &truth, &cfg)?;
            write_atomic(&out, pipeline::roc_csv(&curve).as_bytes())
        }
        Command::Grid {
            scene,
            bags,
            config,
            bounds,
            step,
            out,
            out_json,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let bounds = grid_bounds(&bounds)?;
            let scene_path = required(scene, &cfg.paths.scene, "scene", "scene")?;
            let bags_path = required(bags, &cfg.paths.bags, "bags", "bags")?;
            let scene = pipeline::prepare_scene(load_scene(&scene_path)?, &cfg)?;
            let bags = load_bag_set(&bags_path, &scene)?;
            let (g, report) = pipeline::grid(&scene, &bags, &cfg, bounds, step)?;
            let field = DetectionMap {
                rows: g.shape[0],
                cols: g.shape[1],
                scores: g.values,
            };
            let json_path = out_json.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".json");
                PathBuf::from(p)
            });
            save_map(&out, &field)?;
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            write_atomic(&json_path, &json)
        }
    }
}
