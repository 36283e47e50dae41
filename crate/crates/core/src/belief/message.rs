use serde::{Deserialize, Serialize};

use crate::belief::values_match;
use crate::error::{Error, Result};

/// The message shown to the human: a sorted set of feature indices together
/// with the realized values at those indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightSet {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl HighlightSet {
    /// Builds a message from strictly increasing indices and matching values.
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                actual: values.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "highlight indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices, values })
    }

    /// The message that reveals nothing.
    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Reveals `indices` (any order, distinct) of the instance `x`.
    pub fn reveal(indices: &[usize], x: &[f64]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "highlight indices must be distinct".into(),
            ));
        }
        if let Some(&last) = sorted.last() {
            if last >= x.len() {
                return Err(Error::InvalidArgument(format!(
                    "index {last} out of range for dimension {}",
                    x.len()
                )));
            }
        }
        let values = sorted.iter().map(|&j| x[j]).collect();
        Ok(Self {
            indices: sorted,
            values,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Pairs of (index, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Whether `x` agrees with the message on every revealed index.
    pub fn matches(&self, x: &[f64]) -> bool {
        self.iter()
            .all(|(j, v)| j < x.len() && values_match(x[j], v))
    }

    /// Checks that every index is below `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= dim => Err(Error::InvalidArgument(format!(
                "index {last} out of range for dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    /// Replaces each revealed value by its snapped code.
    pub fn snapped(&self, snapper: &Snapper) -> Self {
        let values = self
            .iter()
            .map(|(j, v)| snapper.snap_value(j, v))
            .collect();
        Self {
            indices: self.indices.clone(),
            values,
        }
    }

    /// Hashable key: indices plus the bit patterns of the values.
    pub(crate) fn key(&self) -> (Vec<usize>, Vec<u64>) {
        (
            self.indices.clone(),
            self.values.iter().map(|v| normalize_zero(*v).to_bits()).collect(),
        )
    }
}

fn normalize_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Maps coordinates onto finite alphabets of observed codes.
///
/// Coordinates without an alphabet pass through unchanged. Snapping picks
/// the nearest code; a value exactly halfway between two codes goes to the
/// smaller one.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapper {
    alphabets: Vec<Option<Vec<f64>>>,
}

impl Snapper {
    /// A snapper that leaves all `dim` coordinates unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            alphabets: vec![None; dim],
        }
    }

    /// Uses the given per-coordinate alphabets (sorted and deduplicated here).
    pub fn new(alphabets: Vec<Option<Vec<f64>>>) -> Result<Self> {
        let mut cleaned = Vec::with_capacity(alphabets.len());
        for alphabet in alphabets {
            cleaned.push(match alphabet {
                None => None,
                Some(mut codes) => {
                    if codes.is_empty() || codes.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidArgument(
                            "snapping alphabets must be nonempty and finite".into(),
                        ));
                    }
                    codes.sort_by(f64::total_cmp);
                    codes.dedup();
                    Some(codes)
                }
            });
        }
        Ok(Self { alphabets: cleaned })
    }

    /// Builds alphabets from the values observed in `rows` on `coords`.
    pub fn from_observed(rows: &[Vec<f64>], dim: usize, coords: &[usize]) -> Result<Self> {
        let mut alphabets: Vec<Option<Vec<f64>>> = vec![None; dim];
        for &j in coords {
            if j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {j} out of range for dimension {dim}"
                )));
            }
            let codes: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            alphabets[j] = Some(codes);
        }
        Self::new(alphabets)
    }

    pub fn dim(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabet(&self, coord: usize) -> Option<&[f64]> {
        self.alphabets.get(coord).and_then(|a| a.as_deref())
    }

    /// Snaps a single value of coordinate `coord`.
    pub fn snap_value(&self, coord: usize, value: f64) -> f64 {
        let Some(codes) = self.alphabet(coord) else {
            return value;
        };
        let pos = codes.partition_point(|&c| c < value);
        if pos == 0 {
            return codes[0];
        }
        if pos == codes.len() {
            return codes[pos - 1];
        }
        let (lo, hi) = (codes[pos - 1], codes[pos]);
        if hi - value < value - lo {
            hi
        } else {
            lo
        }
    }

    /// Snaps every coordinate of `x`.
    pub fn snap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| self.snap_value(j, v))
            .collect()
    }
}
