//! JSON bag specifications.
//!
//! ```json
//! { "bags": [
//!     { "id": "p1", "label": "positive", "region": { "row0": 3, "col0": 4, "row1": 8, "col1": 9 } },
//!     { "id": "n1", "label": "negative", "pixels": [[0, 0], [0, 1]] }
//! ] }
//! ```
//!
//! Region bounds are inclusive. Bags may overlap; overlaps are reported as
//! warnings.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use misig_core::{Bag, BagSet, Label, Scene};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{read_file, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelName {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    Region { region: Region },
    Pixels { pixels: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagEntry {
    pub id: String,
    pub label: LabelName,
    #[serde(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BagSpecFile {
    pub bags: Vec<BagEntry>,
}

impl BagSpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&read_file(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    /// Describes an in-memory bag set by its pixel locations. Every pixel
    /// must carry a location.
    pub fn from_bag_set(bags: &BagSet) -> Result<Self> {
        let entries = bags
            .positive
            .iter()
            .chain(&bags.negative)
            .map(|b| {
                let pixels = b
                    .pixels
                    .iter()
                    .map(|p| {
                        p.location.map(|l| [l.row, l.col]).ok_or_else(|| {
                            Error::Input(format!("bag `{}` has a pixel without a location", b.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BagEntry {
                    id: b.id.clone(),
                    label: match b.label {
                        Label::Positive => LabelName::Positive,
                        Label::Negative => LabelName::Negative,
                    },
                    selection: Selection::Pixels { pixels },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BagSpecFile { bags: entries })
    }
}

/// Expands every entry against `scene`. Returns the bag set and any
/// overlap warnings.
pub fn load_bags(spec: &BagSpecFile, scene: &Scene) -> Result<(BagSet, Vec<String>)> {
    let mut ids = BTreeSet::new();
    let mut owners: BTreeMap<(usize, usize), Vec<&str>> = BTreeMap::new();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for entry in &spec.bags {
        if !ids.insert(entry.id.as_str()) {
            return Err(Error::Input(format!("duplicate bag id `{}`", entry.id)));
        }
        let coords: Vec<(usize, usize)> = match &entry.selection {
            Selection::Region { region: r } => {
                if r.row0 > r.row1 || r.col0 > r.col1 {
                    return Err(Error::Input(format!(
                        "bag `{}`: region corners are reversed",
                        entry.id
                    )));
                }
                (r.row0..=r.row1)
                    .flat_map(|row| (r.col0..=r.col1).map(move |col| (row, col)))
                    .collect()
            }
            Selection::Pixels { pixels } => pixels.iter().map(|[r, c]| (*r, *c)).collect(),
        };
        if coords.is_empty() {
            return Err(Error::Input(format!(
                "bag `{}` selects no pixels",
                entry.id
            )));
        }
        let mut pixels = Vec::with_capacity(coords.len());
        for (row, col) in coords {
            let px = scene.pixel_at(row, col).ok_or_else(|| {
                Error::Input(format!(
                    "bag `{}`: pixel ({row}, {col}) outside {}x{} scene",
                    entry.id,
                    scene.rows(),
                    scene.cols()
                ))
            })?;
            owners.entry((row, col)).or_default().push(&entry.id);
            pixels.push(px);
        }
        let label = match entry.label {
            LabelName::Positive => Label::Positive,
            LabelName::Negative => Label::Negative,
        };
        let bag = Bag::new(entry.id.clone(), label, pixels);
        match label {
            Label::Positive => positive.push(bag),
            Label::Negative => negative.push(bag),
        }
    }
    let mut overlaps: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
    for mut who in owners.into_values().filter(|w| w.len() > 1) {
        who.dedup();
        *overlaps.entry(who).or_default() += 1;
    }
    let warnings = overlaps
        .into_iter()
        .map(|(who, n)| format!("bags {} share {n} pixel(s)", who.join(", ")))
        .collect();
    Ok((BagSet::new(positive, negative)?, warnings))
}
