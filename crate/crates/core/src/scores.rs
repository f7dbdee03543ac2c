//! Per-feature score maps and their file formats.
//!
//! JSON: `{"method": ..., "shape": [H, W, C], "per_feature": [...]}`, plus
//! `"per_group"` and `"delta"` for invariant-perturbation scores.
//! CSV: `feature,score`, one row per feature.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Shape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    pub per_feature: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_group: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl AttributionMap {
    pub fn new(method: impl Into<String>, per_feature: Vec<f64>, shape: Option<Shape>) -> Self {
        Self {
            method: method.into(),
            shape,
            per_feature,
            per_group: None,
            delta: None,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.per_feature.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.per_feature.len() != dim {
            return Err(Error::Dimension {
                what: "score map",
                expected: dim,
                got: self.per_feature.len(),
            });
        }
        if self.per_feature.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("{} scores contain non-finite values", self.method)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["feature", "score"])?;
        for (i, s) in self.per_feature.iter().enumerate() {
            writer.write_record([i.to_string(), s.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }
}

/// Loads precomputed score maps for a whole dataset: a JSON array of
/// score objects (as written by `to_json`), in dataset order.
pub fn load_score_list(path: &Path) -> Result<Vec<AttributionMap>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
