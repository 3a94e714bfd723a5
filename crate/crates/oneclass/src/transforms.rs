//! Transformation sets: affine intensity transforms (contrast/brightness)
//! and lossless geometric transforms (pixel shifts, right-angle rotations).
//!
//! A [`TransformSet`] is an ordered family of n specs with class labels
//! 1..n fixed by position; exactly one member is the identity. Sets are
//! homogeneous: all intensity or all geometric. The named presets cover
//! the standard parameter grids; user-defined sets load from a small
//! TOML description file (see [`parse_transform_set`]).

use crate::error::{Error, Result};
use crate::image::Image;
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// The valid preset names, as accepted by [`preset`].
pub const PRESET_NAMES: [&str; 7] = [
    "LM(5,0)", "S(4,0)", "R(4,0)", "LM(5,1)", "LM(5,2)", "LM(3,0)", "LM(7,0)",
];

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Affine intensity transform: out = clip(contrast * in + brightness, 0, 1).
///
/// `contrast == 1, brightness == 0` is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMagnification {
    contrast: f64,
    brightness: f64,
}

impl LinearMagnification {
    /// Builds a spec; the contrast coefficient must be finite and positive,
    /// the brightness offset finite.
    pub fn new(contrast: f64, brightness: f64) -> Result<Self> {
        if !contrast.is_finite() || contrast <= 0.0 {
            return Err(Error::InvalidTransform(format!(
                "contrast coefficient must be finite and > 0, got {contrast}"
            )));
        }
        if !brightness.is_finite() {
            return Err(Error::InvalidTransform(format!(
                "brightness offset must be finite, got {brightness}"
            )));
        }
        Ok(LinearMagnification {
            contrast,
            brightness,
        })
    }

    pub fn contrast(&self) -> f64 {
        self.contrast
    }

    pub fn brightness(&self) -> f64 {
        self.brightness
    }

    pub fn is_identity(&self) -> bool {
        self.contrast == 1.0 && self.brightness == 0.0
    }

    /// Applies the transform pixel-wise, with the same (contrast, brightness)
    /// on every channel, clipping results into [0, 1].
    pub fn apply(&self, image: &Image) -> Image {
        let out = image
            .data()
            .mapv(|p| (self.contrast * f64::from(p) + self.brightness).clamp(0.0, 1.0) as f32);
        Image::from_array_unchecked(out)
    }
}

/// Lossless geometric transform on the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometricTransform {
    /// Translate content by (dx, dy) pixels; dx moves columns rightward,
    /// dy moves rows downward. Vacated pixels are zero-filled.
    Shift { dx: i64, dy: i64 },
    /// Clockwise rotation by a right angle; requires a square image.
    Rotation { angle: u32 },
}

impl GeometricTransform {
    pub fn shift(dx: i64, dy: i64) -> Self {
        GeometricTransform::Shift { dx, dy }
    }

    /// Rotation angle in degrees, restricted to {0, 90, 180, 270}.
    pub fn rotation(angle: u32) -> Result<Self> {
        if !matches!(angle, 0 | 90 | 180 | 270) {
            return Err(Error::InvalidTransform(format!(
                "rotation angle must be one of 0, 90, 180, 270 degrees, got {angle}"
            )));
        }
        Ok(GeometricTransform::Rotation { angle })
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GeometricTransform::Shift { dx, dy } => *dx == 0 && *dy == 0,
            GeometricTransform::Rotation { angle } => *angle == 0,
        }
    }

    /// Applies the transform. Rotation permutes pixels on a square grid;
    /// shift zero-fills vacated pixels. Output dimensions equal input
    /// dimensions.
    pub fn apply(&self, image: &Image) -> Result<Image> {
        let dims = image.dims();
        let (h, w, c) = (dims.height, dims.width, dims.channels);
        let src = image.data();
        match *self {
            GeometricTransform::Shift { dx, dy } => {
                if dx.unsigned_abs() as usize >= w || dy.unsigned_abs() as usize >= h {
                    return Err(Error::InvalidTransform(format!(
                        "shift ({dx}, {dy}) out of range for a {h}x{w} image"
                    )));
                }
                let mut out = Array3::<f32>::zeros((h, w, c));
                for r in 0..h {
                    let sr = r as i64 - dy;
                    if sr < 0 || sr >= h as i64 {
                        continue;
                    }
                    for col in 0..w {
                        let sc = col as i64 - dx;
                        if sc < 0 || sc >= w as i64 {
                            continue;
                        }
                        for ch in 0..c {
                            out[[r, col, ch]] = src[[sr as usize, sc as usize, ch]];
                        }
                    }
                }
                Ok(Image::from_array_unchecked(out))
            }
            GeometricTransform::Rotation { angle } => {
                if angle != 0 && h != w {
                    return Err(Error::InvalidTransform(format!(
                        "rotation requires a square image, got {h}x{w}"
                    )));
                }
                let out = match angle {
                    0 => src.clone(),
                    // clockwise quarter turns on a square grid
                    90 => {
                        Array3::from_shape_fn((h, w, c), |(r, col, ch)| src[[h - 1 - col, r, ch]])
                    }
                    180 => Array3::from_shape_fn((h, w, c), |(r, col, ch)| {
                        src[[h - 1 - r, w - 1 - col, ch]]
                    }),
                    270 => {
                        Array3::from_shape_fn((h, w, c), |(r, col, ch)| src[[col, w - 1 - r, ch]])
                    }
                    _ => unreachable!("constructor restricts angles"),
                };
                Ok(Image::from_array_unchecked(out))
            }
        }
    }
}

/// One member of a transform set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformSpec {
    Linear(LinearMagnification),
    Geometric(GeometricTransform),
}

impl TransformSpec {
    pub fn is_identity(&self) -> bool {
        match self {
            TransformSpec::Linear(s) => s.is_identity(),
            TransformSpec::Geometric(s) => s.is_identity(),
        }
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        match self {
            TransformSpec::Linear(s) => Ok(s.apply(image)),
            TransformSpec::Geometric(s) => s.apply(image),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            TransformSpec::Linear(_) => "intensity",
            TransformSpec::Geometric(_) => "geometric",
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Linear(s) => {
                write!(f, "linear c={} b={}", s.contrast(), s.brightness())
            }
            TransformSpec::Geometric(GeometricTransform::Shift { dx, dy }) => {
                write!(f, "shift dx={dx} dy={dy}")
            }
            TransformSpec::Geometric(GeometricTransform::Rotation { angle }) => {
                write!(f, "rotation angle={angle}")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Transform sets
// ---------------------------------------------------------------------------

/// Ordered list of n transformation specs with class labels 1..n fixed by
/// position (`specs[i]` carries label `i + 1`). Exactly one member is the
/// identity, and all members belong to one family.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSet {
    name: String,
    specs: Vec<TransformSpec>,
}

impl TransformSet {
    pub fn new(name: impl Into<String>, specs: Vec<TransformSpec>) -> Result<Self> {
        let name = name.into();
        if specs.len() < 2 {
            return Err(Error::InvalidTransformSet {
                name,
                reason: format!("a set needs at least 2 specs, got {}", specs.len()),
            });
        }
        let identities = specs.iter().filter(|s| s.is_identity()).count();
        if identities != 1 {
            return Err(Error::InvalidTransformSet {
                name,
                reason: format!("a set needs exactly one identity member, got {identities}"),
            });
        }
        let family = specs[0].family();
        if specs.iter().any(|s| s.family() != family) {
            return Err(Error::InvalidTransformSet {
                name,
                reason: "specs must all be intensity or all geometric".into(),
            });
        }
        Ok(TransformSet { name, specs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of transforms (and classifier classes) in the set.
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[TransformSpec] {
        &self.specs
    }

    /// 1-based class label of the member at (0-based) position `index`.
    pub fn label_of(&self, index: usize) -> u32 {
        (index + 1) as u32
    }

    /// Position of the identity member (0-based).
    pub fn identity_index(&self) -> usize {
        self.specs
            .iter()
            .position(|s| s.is_identity())
            .expect("constructor guarantees one identity")
    }
}

/// Applies every member of `set` to `image`, returning the n pairs
/// (transformed image, 1-based label) in spec order.
pub fn expand(image: &Image, set: &TransformSet) -> Result<Vec<(Image, u32)>> {
    set.specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let out = spec.apply(image).map_err(|e| Error::TransformFailed {
                set: set.name().to_string(),
                index: i,
                source: Box::new(e),
            })?;
            Ok((out, set.label_of(i)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Builds one of the named presets.
///
/// `side` is the image side length in pixels; only the shift preset
/// S(4,0) uses it (shift amount is side/3, integer division), the
/// intensity and rotation presets ignore it.
pub fn preset(name: &str, side: usize) -> Result<TransformSet> {
    let lm_set = |name: &str, cs: &[f64], bs: &[f64]| -> Result<TransformSet> {
        let specs = cs
            .iter()
            .zip(bs)
            .map(|(&c, &b)| Ok(TransformSpec::Linear(LinearMagnification::new(c, b)?)))
            .collect::<Result<Vec<_>>>()?;
        TransformSet::new(name, specs)
    };
    match name {
        "LM(5,0)" => lm_set(name, &[0.2, 0.6, 1.0, 1.4, 1.8], &[0.0; 5]),
        "LM(5,1)" => lm_set(
            name,
            &[0.6, 0.8, 1.0, 1.2, 1.4],
            &[0.2, -0.2, 0.0, 0.2, -0.2],
        ),
        "LM(5,2)" => lm_set(
            name,
            &[0.6, 0.8, 1.0, 1.2, 1.4],
            &[0.4, -0.4, 0.0, 0.4, -0.4],
        ),
        "LM(3,0)" => lm_set(name, &[0.8, 1.0, 1.2], &[-0.2, 0.0, 0.2]),
        "LM(7,0)" => lm_set(name, &[0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6], &[0.0; 7]),
        "S(4,0)" => {
            let step = (side / 3) as i64;
            let specs = [(0, 0), (step, 0), (0, step), (step, step)]
                .into_iter()
                .map(|(dx, dy)| TransformSpec::Geometric(GeometricTransform::shift(dx, dy)))
                .collect();
            TransformSet::new(name, specs)
        }
        "R(4,0)" => {
            let specs = [0u32, 90, 180, 270]
                .into_iter()
                .map(|a| Ok(TransformSpec::Geometric(GeometricTransform::rotation(a)?)))
                .collect::<Result<Vec<_>>>()?;
            TransformSet::new(name, specs)
        }
        _ => Err(Error::UnknownPreset {
            name: name.to_string(),
            valid: PRESET_NAMES.join(", "),
        }),
    }
}

// ---------------------------------------------------------------------------
// Set description files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SetFile {
    name: String,
    #[serde(rename = "spec", default)]
    specs: Vec<SpecEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecEntry {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dx: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dy: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle: Option<u32>,
}

/// Parses a transform-set description from TOML text:
///
/// ```toml
/// name = "custom"
///
/// [[spec]]
/// kind = "linear"
/// c = 1.0
/// b = 0.0
///
/// [[spec]]
/// kind = "shift"   # or "rotation" with `angle`
/// dx = 4
/// dy = 0
/// ```
pub fn parse_transform_set(text: &str) -> Result<TransformSet> {
    let file: SetFile = toml::from_str(text).map_err(|e| Error::InvalidTransformSet {
        name: "<file>".into(),
        reason: e.to_string(),
    })?;
    let specs = file
        .specs
        .iter()
        .enumerate()
        .map(|(i, entry)| spec_from_entry(entry, i))
        .collect::<Result<Vec<_>>>()?;
    TransformSet::new(file.name, specs)
}

fn spec_from_entry(entry: &SpecEntry, index: usize) -> Result<TransformSpec> {
    let reject_extras = |allowed: &str, has_extra: bool| -> Result<()> {
        if has_extra {
            return Err(Error::InvalidTransform(format!(
                "spec {index}: kind `{}` takes only {allowed}",
                entry.kind
            )));
        }
        Ok(())
    };
    match entry.kind.as_str() {
        "linear" => {
            reject_extras(
                "c and b",
                entry.dx.is_some() || entry.dy.is_some() || entry.angle.is_some(),
            )?;
            let c = entry.c.ok_or_else(|| {
                Error::InvalidTransform(format!("spec {index}: linear needs field c"))
            })?;
            let b = entry.b.unwrap_or(0.0);
            Ok(TransformSpec::Linear(LinearMagnification::new(c, b)?))
        }
        "shift" => {
            reject_extras(
                "dx and dy",
                entry.c.is_some() || entry.b.is_some() || entry.angle.is_some(),
            )?;
            Ok(TransformSpec::Geometric(GeometricTransform::shift(
                entry.dx.unwrap_or(0),
                entry.dy.unwrap_or(0),
            )))
        }
        "rotation" => {
            reject_extras(
                "angle",
                entry.c.is_some() || entry.b.is_some() || entry.dx.is_some() || entry.dy.is_some(),
            )?;
            let angle = entry.angle.ok_or_else(|| {
                Error::InvalidTransform(format!("spec {index}: rotation needs field angle"))
            })?;
            Ok(TransformSpec::Geometric(GeometricTransform::rotation(
                angle,
            )?))
        }
        other => Err(Error::InvalidTransform(format!(
            "spec {index}: unknown kind `{other}` (expected linear, shift, or rotation)"
        ))),
    }
}

/// Loads a transform set from a TOML description file.
pub fn load_transform_set(path: &Path) -> Result<TransformSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_transform_set(&text)
}

/// Renders a set back to the TOML description format.
pub fn transform_set_to_toml(set: &TransformSet) -> String {
    let specs = set
        .specs()
        .iter()
        .map(|s| match s {
            TransformSpec::Linear(lm) => SpecEntry {
                kind: "linear".into(),
                c: Some(lm.contrast()),
                b: Some(lm.brightness()),
                dx: None,
                dy: None,
                angle: None,
            },
            TransformSpec::Geometric(GeometricTransform::Shift { dx, dy }) => SpecEntry {
                kind: "shift".into(),
                c: None,
                b: None,
                dx: Some(*dx),
                dy: Some(*dy),
                angle: None,
            },
            TransformSpec::Geometric(GeometricTransform::Rotation { angle }) => SpecEntry {
                kind: "rotation".into(),
                c: None,
                b: None,
                dx: None,
                dy: None,
                angle: Some(*angle),
            },
        })
        .collect();
    let file = SetFile {
        name: set.name().to_string(),
        specs,
    };
    toml::to_string(&file).expect("set file serializes")
}
