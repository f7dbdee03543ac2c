//! Disjoint feature groups whose perturbation bounds are tied together.

use crate::data::Shape;
use crate::error::{Error, Result};

/// Non-overlapping `patch_height x patch_width` tiles, one grid per channel.
/// Edge tiles are truncated when the patch size does not divide the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub shape: Shape,
    pub patch_height: usize,
    pub patch_width: usize,
}

impl PatchGrid {
    pub fn rows(&self) -> usize {
        self.shape.height.div_ceil(self.patch_height)
    }

    pub fn cols(&self) -> usize {
        self.shape.width.div_ceil(self.patch_width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturePartition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    grid: Option<PatchGrid>,
}

impl FeaturePartition {
    /// Validates that `groups` are nonempty, disjoint and cover `0..dim`.
    pub fn new(groups: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidConfig("partition needs at least one group".into()));
        }
        let mut group_of = vec![usize::MAX; dim];
        for (m, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidConfig(format!("partition group {m} is empty")));
            }
            for &i in group {
                let slot = group_of.get_mut(i).ok_or_else(|| {
                    Error::InvalidConfig(format!("feature {i} out of range for dimension {dim}"))
                })?;
                if *slot != usize::MAX {
                    return Err(Error::InvalidConfig(format!(
                        "feature {i} appears in groups {} and {m}",
                        *slot
                    )));
                }
                *slot = m;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidConfig(format!("feature {i} is not covered by the partition")));
        }
        Ok(Self {
            groups,
            group_of,
            grid: None,
        })
    }

    /// One group per feature (no sharing).
    pub fn singletons(dim: usize) -> Self {
        Self {
            groups: (0..dim).map(|i| vec![i]).collect(),
            group_of: (0..dim).collect(),
            grid: None,
        }
    }

    /// Every feature in a single group.
    pub fn whole(dim: usize) -> Self {
        Self {
            groups: vec![(0..dim).collect()],
            group_of: vec![0; dim],
            grid: None,
        }
    }

    /// Square-ish image patches, laid out channel by channel, then row-major
    /// over the patch grid.
    pub fn patches(shape: Shape, patch_height: usize, patch_width: usize) -> Result<Self> {
        if patch_height == 0 || patch_width == 0 {
            return Err(Error::InvalidConfig("patch size must be positive".into()));
        }
        let grid = PatchGrid {
            shape,
            patch_height,
            patch_width,
        };
        let mut groups = Vec::with_capacity(grid.rows() * grid.cols() * shape.channels);
        for ch in 0..shape.channels {
            for pr in 0..grid.rows() {
                for pc in 0..grid.cols() {
                    let rows = pr * patch_height..((pr + 1) * patch_height).min(shape.height);
                    let group = rows
                        .flat_map(|r| {
                            let cols = pc * patch_width..((pc + 1) * patch_width).min(shape.width);
                            cols.map(move |c| shape.index(r, c, ch))
                        })
                        .collect();
                    groups.push(group);
                }
            }
        }
        let mut partition = Self::new(groups, shape.len())?;
        partition.grid = Some(grid);
        Ok(partition)
    }

    #[inline]
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.group_of.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    #[inline]
    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    pub fn grid(&self) -> Option<&PatchGrid> {
        self.grid.as_ref()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::Dimension {
                what: "feature partition",
                expected: d,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// Copies each group's value to all of its features.
    pub fn broadcast(&self, per_group: &[f64]) -> Vec<f64> {
        debug_assert_eq!(per_group.len(), self.num_groups());
        self.group_of.iter().map(|&m| per_group[m]).collect()
    }
}

/// How to group features, resolved per input: `"HxW"` patches or `"none"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionSpec {
    Singletons,
    Patches { height: usize, width: usize },
}

impl PartitionSpec {
    /// Patches need shape metadata; without it this is an error.
    pub fn resolve(&self, dim: usize, shape: Option<Shape>) -> Result<FeaturePartition> {
        match (*self, shape) {
            (PartitionSpec::Singletons, _) => Ok(FeaturePartition::singletons(dim)),
            (PartitionSpec::Patches { height, width }, Some(shape)) => {
                shape.check_len(dim)?;
                FeaturePartition::patches(shape, height, width)
            }
            (PartitionSpec::Patches { .. }, None) => Err(Error::InvalidConfig(
                "patch partition needs shape metadata [H, W, C] on the input".into(),
            )),
        }
    }
}

impl std::str::FromStr for PartitionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(PartitionSpec::Singletons);
        }
        let parsed = s
            .split_once(['x', 'X'])
            .and_then(|(h, w)| Some((h.trim().parse().ok()?, w.trim().parse().ok()?)));
        match parsed {
            Some((height, width)) if height > 0 && width > 0 => Ok(PartitionSpec::Patches { height, width }),
            _ => Err(Error::InvalidConfig(format!("bad patch spec {s:?}, expected HxW or none"))),
        }
    }
}

impl std::fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionSpec::Singletons => f.write_str("none"),
            PartitionSpec::Patches { height, width } => write!(f, "{height}x{width}"),
        }
    }
}
