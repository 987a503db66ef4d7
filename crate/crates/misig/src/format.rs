//! On-disk formats.
//!
//! Native cube layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       6     magic "MISIG1"
//! 6       2     reserved, zero
//! 8       4     rows   (u32)
//! 12      4     cols   (u32)
//! 16      4     bands  (u32)
//! 20      4*N   f32 payload, band-interleaved by pixel, rows major
//! ```
//!
//! Detection maps and grid fields use the same layout with one band.
//! Text scenes are CSV with one pixel per line and an optional
//! `# rows=R cols=C` header line; without it the scene is one column tall.

use std::fs;
use std::io::Write;
use std::path::Path;

use misig_core::{DetectionMap, GroundTruth, Scene, Spectrum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"MISIG1";
pub const HEADER_LEN: usize = 20;

/// Dimensions and payload of a native file.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub data: Vec<f32>,
}

fn dim_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Input(format!("{name} {v} does not fit the native header")))
}

impl Cube {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&dim_u32(self.rows, "rows")?.to_le_bytes());
        out.extend_from_slice(&dim_u32(self.cols, "cols")?.to_le_bytes());
        out.extend_from_slice(&dim_u32(self.bands, "bands")?.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
            return Err(Error::Format("missing MISIG1 header".into()));
        }
        let field =
            |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let (rows, cols, bands) = (field(8), field(12), field(16));
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::Format(format!(
                "zero dimension in header {rows}x{cols}x{bands}"
            )));
        }
        let expected = (HEADER_LEN as u64) + 4 * (rows as u64) * (cols as u64) * (bands as u64);
        if bytes.len() as u64 != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Cube {
            rows,
            cols,
            bands,
            data,
        })
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn scene_to_cube(scene: &Scene) -> Cube {
    Cube {
        rows: scene.rows(),
        cols: scene.cols(),
        bands: scene.bands(),
        data: scene
            .pixels()
            .iter()
            .flat_map(|p| p.iter().map(|v| *v as f32))
            .collect(),
    }
}

pub fn cube_to_scene(cube: &Cube) -> Result<Scene> {
    if cube.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite value in scene payload".into()));
    }
    let pixels = cube
        .data
        .chunks_exact(cube.bands)
        .map(|c| Spectrum::new(c.iter().map(|v| *v as f64).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Scene::new(cube.rows, cube.cols, pixels)?)
}

/// Parses CSV pixels. `extent` overrides any header line.
pub fn parse_scene_csv(text: &str, extent: Option<(usize, usize)>) -> Result<Scene> {
    let mut header = None;
    let mut pixels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                header = parse_extent(rest);
            }
            continue;
        }
        let values = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let spectrum = Spectrum::new(values)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        pixels.push(spectrum);
    }
    if pixels.is_empty() {
        return Err(Error::Format("CSV scene has no pixels".into()));
    }
    let (rows, cols) = extent.or(header).unwrap_or((pixels.len(), 1));
    if rows * cols != pixels.len() {
        return Err(Error::Format(format!(
            "extent {rows}x{cols} needs {} pixels, CSV has {}",
            rows * cols,
            pixels.len()
        )));
    }
    Ok(Scene::new(rows, cols, pixels)?)
}

fn parse_extent(header: &str) -> Option<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for part in header.split_whitespace() {
        match part.split_once('=') {
            Some(("rows", v)) => rows = v.parse().ok(),
            Some(("cols", v)) => cols = v.parse().ok(),
            _ => {}
        }
    }
    Some((rows?, cols?))
}

pub fn scene_to_csv(scene: &Scene) -> String {
    let mut out = format!("# rows={} cols={}\n", scene.rows(), scene.cols());
    for p in scene.pixels() {
        let fields: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Loads a native cube, or falls back to CSV when the magic is absent.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = read_file(path)?;
    if bytes.starts_with(MAGIC) {
        cube_to_scene(&Cube::decode(&bytes)?)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("scene is neither MISIG1 nor text".into()))?;
        parse_scene_csv(&text, None)
    }
}

/// Writes CSV when the path ends in `.csv`, the native format otherwise.
pub fn save_scene(path: &Path, scene: &Scene) -> Result<()> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        write_atomic(path, scene_to_csv(scene).as_bytes())
    } else {
        write_atomic(path, &scene_to_cube(scene).encode()?)
    }
}

pub fn map_to_cube(map: &DetectionMap) -> Cube {
    Cube {
        rows: map.rows,
        cols: map.cols,
        bands: 1,
        data: map.scores.iter().map(|v| *v as f32).collect(),
    }
}

pub fn load_map(path: &Path) -> Result<DetectionMap> {
    let cube = Cube::decode(&read_file(path)?)?;
    if cube.bands != 1 {
        return Err(Error::Format(format!(
            "detection map must have 1 band, found {}",
            cube.bands
        )));
    }
    if cube.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite detection score".into()));
    }
    Ok(DetectionMap {
        rows: cube.rows,
        cols: cube.cols,
        scores: cube.data.iter().map(|v| *v as f64).collect(),
    })
}

pub fn save_map(path: &Path, map: &DetectionMap) -> Result<()> {
    write_atomic(path, &map_to_cube(map).encode()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rows: usize,
    pub cols: usize,
    pub target: Vec<f64>,
    pub abundance: Vec<f64>,
}

impl From<&GroundTruth> for TruthFile {
    fn from(t: &GroundTruth) -> Self {
        TruthFile {
            rows: t.rows,
            cols: t.cols,
            target: t.target.to_vec(),
            abundance: t.abundance.clone(),
        }
    }
}

impl TryFrom<TruthFile> for GroundTruth {
    type Error = Error;

    fn try_from(t: TruthFile) -> Result<Self> {
        if t.abundance.len() != t.rows * t.cols {
            return Err(Error::Format(format!(
                "truth extent {}x{} needs {} abundances, got {}",
                t.rows,
                t.cols,
                t.rows * t.cols,
                t.abundance.len()
            )));
        }
        if t.abundance.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Format("abundances must lie in [0, 1]".into()));
        }
        Ok(GroundTruth {
            rows: t.rows,
            cols: t.cols,
            abundance: t.abundance,
            target: Spectrum::new(t.target)?,
        })
    }
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    let file: TruthFile = serde_json::from_slice(&read_file(path)?)?;
    file.try_into()
}

pub fn save_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_atomic(path, &serde_json::to_vec(&TruthFile::from(truth))?)
}
