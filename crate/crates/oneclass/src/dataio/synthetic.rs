//! Synthetic dataset generation: desk-scale stand-ins for the private
//! clinical datasets, small enough to train on in seconds.
//!
//! Majority images are smooth random textures (a seeded 4x4 coarse grid
//! of uniform values in [0.2, 0.7], bilinearly upsampled). Minority
//! images come from the same texture family with intensities remapped by
//! `clip(contrast_shift * p + brightness_shift)`, so the two classes
//! differ exactly the way the transform-prediction method is sensitive
//! to. Generation is deterministic given the texture seed.

use crate::dataio::manifest::{
    load_manifest, manifest_to_string, DatasetManifest, ManifestEntry, Split,
};
use crate::dataio::preprocess::resize_bilinear;
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Intensity range of the majority texture's coarse grid. Headroom on
/// both sides keeps moderate shifts clip-free.
const TEXTURE_LO: f64 = 0.2;
const TEXTURE_HI: f64 = 0.7;
const COARSE: usize = 4;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Majority samples in the train split.
    pub train_majority: usize,
    /// Majority samples in the test split.
    pub test_majority: usize,
    /// Minority samples in the test split.
    pub test_minority: usize,
    pub dims: Dims,
    /// Additive intensity offset distinguishing minority from majority.
    pub brightness_shift: f64,
    /// Multiplicative intensity factor distinguishing minority from majority.
    pub contrast_shift: f64,
    pub texture_seed: u64,
}

/// The default split shape mirrors the skin dataset: 1500 train
/// majority, 522 + 978 test.
impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train_majority: 1500,
            test_majority: 522,
            test_minority: 978,
            dims: Dims::new(32, 32, 1),
            brightness_shift: 0.2,
            contrast_shift: 1.2,
            texture_seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::InvalidSyntheticConfig(reason.into()));
        if self.train_majority < 1 || self.test_majority < 1 || self.test_minority < 1 {
            return fail("all sample counts must be at least 1");
        }
        self.dims.validate()?;
        if !matches!(self.dims.channels, 1 | 3) {
            return fail("image files support 1 or 3 channels");
        }
        if !self.contrast_shift.is_finite() || self.contrast_shift <= 0.0 {
            return fail("contrast_shift must be finite and > 0");
        }
        if !self.brightness_shift.is_finite() {
            return fail("brightness_shift must be finite");
        }
        Ok(())
    }
}

/// What [`synthesize`] materialized.
#[derive(Debug, Clone)]
pub struct SynthesisReport {
    pub manifest_path: PathBuf,
    pub images_written: usize,
    /// Fraction of minority pixels pushed outside [0, 1] before clipping.
    pub minority_clipped_fraction: f64,
    pub warnings: Vec<String>,
}

/// One texture from the majority family, for previews and probes.
pub fn sample_texture(seed: u64, dims: Dims) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority_texture(&mut rng, dims)
}

fn majority_texture(rng: &mut ChaCha8Rng, dims: Dims) -> Image {
    let coarse = Array3::from_shape_fn((COARSE, COARSE, dims.channels), |_| {
        rng.gen_range(TEXTURE_LO..TEXTURE_HI) as f32
    });
    let full = resize_bilinear(&coarse, dims.height, dims.width);
    Image::from_array_unchecked(full)
}

/// Applies the minority intensity remap, counting pixels the clip touched.
fn minority_from(texture: &Image, contrast: f64, brightness: f64) -> (Image, usize) {
    let mut clipped = 0usize;
    let out = texture.data().mapv(|p| {
        let v = contrast * f64::from(p) + brightness;
        if !(0.0..=1.0).contains(&v) {
            clipped += 1;
        }
        v.clamp(0.0, 1.0) as f32
    });
    (Image::from_array_unchecked(out), clipped)
}

fn quantize(v: f32) -> u8 {
    (v * 255.0).round() as u8
}

pub(crate) fn write_png(path: &Path, image: &Image) -> Result<()> {
    let d = image.dims();
    let (w, h) = (d.width as u32, d.height as u32);
    let save = |buf: ::image::DynamicImage| {
        buf.save(path)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))
    };
    match d.channels {
        1 => save(::image::DynamicImage::ImageLuma8(
            ::image::GrayImage::from_fn(w, h, |x, y| {
                ::image::Luma([quantize(image.get(y as usize, x as usize, 0))])
            }),
        )),
        3 => save(::image::DynamicImage::ImageRgb8(
            ::image::RgbImage::from_fn(w, h, |x, y| {
                let px = std::array::from_fn(|ch| quantize(image.get(y as usize, x as usize, ch)));
                ::image::Rgb(px)
            }),
        )),
        other => Err(Error::InvalidSyntheticConfig(format!(
            "cannot write {other}-channel image files"
        ))),
    }
}

/// Generates the dataset under `out_dir`: image files in `images/` plus a
/// `manifest.csv` describing them. Returns the report with the manifest
/// location and any signal-quality warnings.
pub fn synthesize(config: &SyntheticConfig, out_dir: &Path) -> Result<SynthesisReport> {
    config.validate()?;
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.texture_seed);
    let mut entries = Vec::new();
    let mut clipped = 0usize;
    let mut minority_pixels = 0usize;

    // fixed generation order keeps output byte-identical per seed
    let groups: [(&str, usize, Split, bool); 3] = [
        ("maj_train", config.train_majority, Split::Train, false),
        ("maj_test", config.test_majority, Split::Test, false),
        ("min_test", config.test_minority, Split::Test, true),
    ];
    for (stem, count, split, is_minority) in groups {
        for i in 0..count {
            let texture = majority_texture(&mut rng, config.dims);
            let image = if is_minority {
                let (image, n) =
                    minority_from(&texture, config.contrast_shift, config.brightness_shift);
                clipped += n;
                minority_pixels += config.dims.pixel_count();
                image
            } else {
                texture
            };
            let rel = PathBuf::from(format!("images/{stem}_{i:04}.png"));
            write_png(&out_dir.join(&rel), &image)?;
            entries.push(ManifestEntry {
                path: rel,
                class_id: if is_minority { "minority" } else { "majority" }.to_string(),
                split,
            });
        }
    }

    let images_written = entries.len();
    let manifest = DatasetManifest::new(config.dims, entries, out_dir.to_path_buf())?;
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest_to_string(&manifest))
        .map_err(|e| Error::io(&manifest_path, e))?;

    let minority_clipped_fraction = clipped as f64 / minority_pixels as f64;
    let mut warnings = Vec::new();
    if minority_clipped_fraction > 0.5 {
        warnings.push(format!(
            "{:.0}% of minority pixels clipped; the class signal is mostly destroyed",
            minority_clipped_fraction * 100.0
        ));
    }
    if config.contrast_shift == 1.0 && config.brightness_shift == 0.0 {
        warnings.push(
            "contrast_shift=1 and brightness_shift=0: classes are identically distributed"
                .to_string(),
        );
    }

    Ok(SynthesisReport {
        manifest_path,
        images_written,
        minority_clipped_fraction,
        warnings,
    })
}

/// Convenience: synthesize then load the generated manifest back.
pub fn synthesize_and_load(
    config: &SyntheticConfig,
    out_dir: &Path,
) -> Result<(SynthesisReport, DatasetManifest)> {
    let report = synthesize(config, out_dir)?;
    let manifest = load_manifest(&report.manifest_path)?;
    Ok((report, manifest))
}
