//! The image type every stage of the pipeline operates on: a dense
//! height x width x channels grid of intensities in [0, 1].

use crate::error::{Error, Result};
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Image dimensions as (height, width, channels).
///
/// Serialized as a 3-element array `[H, W, C]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, usize)", into = "(usize, usize, usize)")]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Dims {
            height,
            width,
            channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::InvalidDims {
                height: self.height,
                width: self.width,
                channels: self.channels,
                reason: "all dimensions must be nonzero".into(),
            });
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl From<(usize, usize, usize)> for Dims {
    fn from((h, w, c): (usize, usize, usize)) -> Self {
        Dims::new(h, w, c)
    }
}

impl From<Dims> for (usize, usize, usize) {
    fn from(d: Dims) -> Self {
        (d.height, d.width, d.channels)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// A validated image: finite intensities in [0, 1], laid out as (H, W, C).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array3<f32>,
}

impl Image {
    /// Wraps a raw array, rejecting non-finite or out-of-range intensities.
    pub fn from_array(data: Array3<f32>) -> Result<Self> {
        let (h, w, c) = data.dim();
        Dims::new(h, w, c).validate()?;
        for ((row, col, channel), &value) in data.indexed_iter() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPixel {
                    value,
                    row,
                    col,
                    channel,
                });
            }
        }
        Ok(Image { data })
    }

    /// A constant-intensity image, mostly useful in tests and previews.
    pub fn constant(dims: Dims, value: f32) -> Result<Self> {
        dims.validate()?;
        Image::from_array(Array3::from_elem(
            (dims.height, dims.width, dims.channels),
            value,
        ))
    }

    pub fn dims(&self) -> Dims {
        let (h, w, c) = self.data.dim();
        Dims::new(h, w, c)
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[[row, col, channel]]
    }

    /// Byte view of the raw intensities, used for content hashing.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in self.data.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    /// Internal constructor for transform outputs whose range is already
    /// guaranteed by clipping; still debug-asserted.
    pub(crate) fn from_array_unchecked(data: Array3<f32>) -> Self {
        debug_assert!(data
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        Image { data }
    }
}
