//! Spectral band reduction.

use misig_core::{Scene, Spectrum};

use crate::error::{Error, Result};

/// Averages contiguous groups of `factor` bands. When `factor` does not
/// divide the band count, the trailing remainder joins the last group.
pub fn band_average(scene: &Scene, factor: usize) -> Result<Scene> {
    if factor < 1 {
        return Err(Error::Input(
            "band-averaging factor must be at least 1".into(),
        ));
    }
    if factor == 1 {
        return Ok(scene.clone());
    }
    let d = scene.bands();
    let groups = (d / factor).max(1);
    let pixels = scene
        .pixels()
        .iter()
        .map(|p| {
            let out = (0..groups)
                .map(|g| {
                    let start = g * factor;
                    let end = if g + 1 == groups { d } else { start + factor };
                    p[start..end].iter().sum::<f64>() / (end - start) as f64
                })
                .collect();
            Spectrum::new(out)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Scene::new(scene.rows(), scene.cols(), pixels)?)
}
