//! Fixed-width features for the Q-network.
//!
//! Every relation row, whatever its block count, is reduced to `width`
//! cells. Longer rows are split into `width` contiguous windows whose sizes
//! differ by at most one (the trailing windows take the remainder) and each
//! window becomes its arithmetic mean. Shorter rows are copied into the
//! leading cells and zero padded.

use std::ops::Deref;

use crate::catalog::BlockMatrix;
use crate::error::{Error, Result};

pub fn downsample(row: &[f64], width: usize) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::validation("cannot downsample an empty row"));
    }
    if width == 0 {
        return Err(Error::validation("target width must be positive"));
    }
    let n = row.len();
    if n == width {
        return Ok(row.to_vec());
    }
    if n < width {
        let mut out = row.to_vec();
        out.resize(width, 0.0);
        return Ok(out);
    }
    let base = n / width;
    let long_from = width - n % width;
    let mut out = Vec::with_capacity(width);
    let mut start = 0;
    for w in 0..width {
        let size = if w < long_from { base } else { base + 1 };
        let window = &row[start..start + size];
        out.push(window.iter().sum::<f64>() / size as f64);
        start += size;
    }
    debug_assert_eq!(start, n);
    Ok(out)
}

/// Dense `rows x width` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self {
            rows,
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::validation("feature rows must share one width"));
        }
        Ok(Self {
            rows: rows.len(),
            width,
            data: rows.concat(),
        })
    }

    fn downsized(matrix: &BlockMatrix, width: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(matrix.row_count() * width);
        for row in matrix.rows() {
            data.extend(downsample(row, width)?);
        }
        Ok(Self {
            rows: matrix.row_count(),
            width,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Downsized buffer occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(FeatureMatrix);

/// Downsized per-block access probabilities of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatrix(FeatureMatrix);

impl Deref for StateMatrix {
    type Target = FeatureMatrix;

    fn deref(&self) -> &FeatureMatrix {
        &self.0
    }
}

impl Deref for ActionMatrix {
    type Target = FeatureMatrix;

    fn deref(&self) -> &FeatureMatrix {
        &self.0
    }
}

impl StateMatrix {
    pub fn new(features: FeatureMatrix) -> Self {
        Self(features)
    }

    pub fn into_inner(self) -> FeatureMatrix {
        self.0
    }
}

impl ActionMatrix {
    pub fn new(features: FeatureMatrix) -> Self {
        Self(features)
    }

    pub fn into_inner(self) -> FeatureMatrix {
        self.0
    }
}

pub fn encode_buffer_state(snapshot: &BlockMatrix, width: usize) -> Result<StateMatrix> {
    FeatureMatrix::downsized(snapshot, width).map(StateMatrix)
}

pub fn encode_query_action(access: &BlockMatrix, width: usize) -> Result<ActionMatrix> {
    FeatureMatrix::downsized(access, width).map(ActionMatrix)
}

/// Network input: state cells row-major, then action cells row-major.
pub fn feature_vector(state: &StateMatrix, action: &ActionMatrix) -> Result<Vec<f64>> {
    if state.rows() != action.rows() || state.width() != action.width() {
        return Err(Error::shape(
            format!("{}x{}", state.rows(), state.width()),
            format!("{}x{}", action.rows(), action.width()),
        ));
    }
    let mut out = Vec::with_capacity(2 * state.data.len());
    out.extend_from_slice(state.as_slice());
    out.extend_from_slice(action.as_slice());
    Ok(out)
}
