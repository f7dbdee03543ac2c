//! Input points, image shapes and datasets, with their JSON/CSV loaders.
//!
//! Images are flattened in `[H, W, C]` row-major order: feature
//! `(row * W + col) * C + channel`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl TryFrom<[usize; 3]> for Shape {
    type Error = Error;

    fn try_from([height, width, channels]: [usize; 3]) -> Result<Self> {
        Shape::new(height, width, channels)
    }
}

impl From<Shape> for [usize; 3] {
    fn from(s: Shape) -> Self {
        [s.height, s.width, s.channels]
    }
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidInput(format!(
                "shape [{height}, {width}, {channels}] has a zero extent"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    pub fn check_len(&self, d: usize) -> Result<()> {
        if self.len() != d {
            return Err(Error::Dimension {
                what: "shape metadata",
                expected: d,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// One input vector `x`, optionally tagged with its image shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPoint {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputJson {
    Bare(Vec<f64>),
    Tagged {
        values: Vec<f64>,
        #[serde(default)]
        shape: Option<Shape>,
    },
}

impl InputPoint {
    pub fn new(values: Vec<f64>, shape: Option<Shape>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty input vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input value".into()));
        }
        if let Some(s) = shape {
            s.check_len(values.len())?;
        }
        Ok(Self { values, shape })
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Parses a bare JSON array or `{"values": [...], "shape": [H, W, C]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str(text)? {
            InputJson::Bare(values) => Self::new(values, None),
            InputJson::Tagged { values, shape } => Self::new(values, shape),
        }
    }

    /// Parses the first CSV record as the input vector (no header).
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = read_csv_rows(text)?;
        let values = rows
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidInput("empty CSV input".into()))?;
        Self::new(values, None)
    }

    /// Loads by extension: `.csv` is CSV, anything else JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if is_csv(path) {
            Self::from_csv(&text)
        } else {
            Self::from_json(&text)
        }
    }
}

impl std::ops::Deref for InputPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    pub inputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, shape: Option<Shape>, labels: Option<Vec<usize>>) -> Result<Self> {
        let ds = Self {
            shape,
            inputs,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.inputs.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidInput("dataset inputs are empty vectors".into()));
        }
        for (i, x) in self.inputs.iter().enumerate() {
            if x.len() != d {
                return Err(Error::InvalidInput(format!(
                    "dataset input {i} has length {}, expected {d}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("dataset input {i} has a non-finite value")));
            }
        }
        if let Some(s) = self.shape {
            s.check_len(d)?;
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.inputs.len() {
                return Err(Error::Dimension {
                    what: "dataset labels",
                    expected: self.inputs.len(),
                    got: labels.len(),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// One input per CSV record, no header, no shape.
    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(read_csv_rows(text)?, None, None)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if is_csv(path) {
            Self::from_csv(&text)
        } else {
            Self::from_json(&text)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number {field:?} in CSV")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
