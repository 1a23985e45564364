use std::io::{Read, Write};
use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::StochasticLabelMap;
use crate::error::{Error, Result};

/// Per-class traversal cost. Infinite entries are untraversable and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Option<f64>>", into = "Vec<Option<f64>>")]
pub struct LabelCosts(Vec<f64>);

impl LabelCosts {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::input("label cost table is empty"));
        }
        if let Some(c) = costs.iter().find(|c| !(**c >= 0.0)) {
            return Err(Error::input(format!("label cost {c} must be non-negative or infinite")));
        }
        Ok(LabelCosts(costs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for LabelCosts {
    type Output = f64;

    fn index(&self, class: usize) -> &f64 {
        &self.0[class]
    }
}

impl TryFrom<Vec<Option<f64>>> for LabelCosts {
    type Error = Error;

    fn try_from(v: Vec<Option<f64>>) -> Result<Self> {
        LabelCosts::new(v.into_iter().map(|c| c.unwrap_or(f64::INFINITY)).collect())
    }
}

impl From<LabelCosts> for Vec<Option<f64>> {
    fn from(c: LabelCosts) -> Self {
        c.0.into_iter().map(|v| v.is_finite().then_some(v)).collect()
    }
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| c.is_finite().then_some(*c)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<Option<f64>>::deserialize(d)?;
        Ok(v.into_iter().map(|c| c.unwrap_or(f64::INFINITY)).collect())
    }
}

/// Writes the sample stack: four little-endian `u32` header words
/// (width, height, classes, n_samples) then every probability as `f32`.
pub fn write_label_stack<W: Write>(map: &StochasticLabelMap, mut out: W) -> std::io::Result<()> {
    for v in [map.width(), map.height(), map.classes(), map.n_samples()] {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("dimension exceeds u32"))?;
        out.write_all(&v.to_le_bytes())?;
    }
    for p in map.probs() {
        out.write_all(&p.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_label_stack<R: Read>(mut input: R, label_costs: LabelCosts) -> Result<StochasticLabelMap> {
    let read_err = |e: std::io::Error| Error::input(format!("label stack: {e}"));
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(read_err)?;
    let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (width, height, classes, n_samples) = (word(0), word(1), word(2), word(3));
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(classes))
        .and_then(|v| v.checked_mul(n_samples))
        .ok_or_else(|| Error::input("label stack header overflows"))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(read_err)?;
    if bytes.len() != count * 4 {
        return Err(Error::input(format!("label stack has {} payload bytes, expected {}", bytes.len(), count * 4)));
    }
    let probs = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    StochasticLabelMap::new(width, height, classes, n_samples, probs, label_costs)
}
