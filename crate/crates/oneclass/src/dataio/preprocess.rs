//! Image decoding and preprocessing: normalize integer samples by their
//! type's maximum, convert channel counts, and resize with bilinear
//! interpolation to the manifest's target dimensions.

use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use ::image::DynamicImage;
use ndarray::Array3;
use std::path::Path;

/// Rec. 601 luminance weights for color-to-gray reduction.
const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

/// Decodes an image file to a (H, W, C) float array in [0, 1], C = 1 or 3.
/// Integer samples are scaled by their type's maximum; alpha is dropped.
/// Decodes an image from raw bytes, sniffing the format from content.
pub fn decode_image_bytes(bytes: &[u8]) -> Result<Array3<f32>> {
    let img = ::image::load_from_memory(bytes).map_err(|e| Error::ImageDecode {
        path: "<memory>".into(),
        source: e,
    })?;
    Ok(dynamic_to_array(&img))
}

pub fn decode_image_file(path: &Path) -> Result<Array3<f32>> {
    let img = ::image::open(path).map_err(|e| match e {
        ::image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::MissingFile {
                path: path.to_path_buf(),
            }
        }
        other => Error::ImageDecode {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    Ok(dynamic_to_array(&img))
}

/// Normalizes any decoded image to float channels, keeping its native
/// gray/color layout.
pub fn dynamic_to_array(img: &DynamicImage) -> Array3<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray =
        |get: &dyn Fn(usize, usize) -> f32| Array3::from_shape_fn((h, w, 1), |(r, c, _)| get(r, c));
    let color = |get: &dyn Fn(usize, usize, usize) -> f32| {
        Array3::from_shape_fn((h, w, 3), |(r, c, ch)| get(r, c, ch))
    };
    const U8: f32 = u8::MAX as f32;
    const U16: f32 = u16::MAX as f32;
    match img {
        DynamicImage::ImageLuma8(b) => {
            gray(&|r, c| b.get_pixel(c as u32, r as u32).0[0] as f32 / U8)
        }
        DynamicImage::ImageLumaA8(b) => {
            gray(&|r, c| b.get_pixel(c as u32, r as u32).0[0] as f32 / U8)
        }
        DynamicImage::ImageLuma16(b) => {
            gray(&|r, c| b.get_pixel(c as u32, r as u32).0[0] as f32 / U16)
        }
        DynamicImage::ImageLumaA16(b) => {
            gray(&|r, c| b.get_pixel(c as u32, r as u32).0[0] as f32 / U16)
        }
        DynamicImage::ImageRgb8(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch] as f32 / U8)
        }
        DynamicImage::ImageRgba8(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch] as f32 / U8)
        }
        DynamicImage::ImageRgb16(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch] as f32 / U16)
        }
        DynamicImage::ImageRgba16(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch] as f32 / U16)
        }
        DynamicImage::ImageRgb32F(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch].clamp(0.0, 1.0))
        }
        DynamicImage::ImageRgba32F(b) => {
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch].clamp(0.0, 1.0))
        }
        other => {
            let b = other.to_rgb8();
            color(&|r, c, ch| b.get_pixel(c as u32, r as u32).0[ch] as f32 / U8)
        }
    }
}

/// Converts channel count: pass-through, gray replicated to many, or
/// color reduced to luminance.
fn convert_channels(arr: Array3<f32>, target: usize) -> Result<Array3<f32>> {
    let (h, w, c) = arr.dim();
    if c == target {
        return Ok(arr);
    }
    if c == 1 {
        return Ok(Array3::from_shape_fn((h, w, target), |(r, col, _)| {
            arr[[r, col, 0]]
        }));
    }
    if c == 3 && target == 1 {
        return Ok(Array3::from_shape_fn((h, w, 1), |(r, col, _)| {
            (0..3).map(|ch| LUMA[ch] * arr[[r, col, ch]]).sum()
        }));
    }
    Err(Error::DimensionMismatch {
        expected: format!("{target} channels (or a convertible 1/3-channel source)"),
        actual: format!("{c} channels"),
    })
}

/// Center-aligned bilinear resample to (out_h, out_w). Images already at
/// the target size pass through untouched, which makes preprocessing
/// idempotent.
pub(crate) fn resize_bilinear(arr: &Array3<f32>, out_h: usize, out_w: usize) -> Array3<f32> {
    let (h, w, c) = arr.dim();
    if h == out_h && w == out_w {
        return arr.clone();
    }
    let scale_r = h as f32 / out_h as f32;
    let scale_c = w as f32 / out_w as f32;
    // src coordinate of a dst pixel's center, clamped to the valid grid
    let src_coord = |dst: usize, scale: f32, size: usize| -> (usize, usize, f32) {
        let x = ((dst as f32 + 0.5) * scale - 0.5).clamp(0.0, (size - 1) as f32);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(size - 1);
        (lo, hi, x - lo as f32)
    };
    Array3::from_shape_fn((out_h, out_w, c), |(r, col, ch)| {
        let (r0, r1, fr) = src_coord(r, scale_r, h);
        let (c0, c1, fc) = src_coord(col, scale_c, w);
        let top = arr[[r0, c0, ch]] * (1.0 - fc) + arr[[r0, c1, ch]] * fc;
        let bottom = arr[[r1, c0, ch]] * (1.0 - fc) + arr[[r1, c1, ch]] * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

/// Full preprocessing: channel conversion, bilinear resize to target
/// dimensions, and validation into an [`Image`].
pub fn preprocess(raw: Array3<f32>, target: Dims) -> Result<Image> {
    let (h, w, _) = raw.dim();
    if h == 0 || w == 0 {
        return Err(Error::InvalidDims {
            height: h,
            width: w,
            channels: raw.dim().2,
            reason: "zero-area image".into(),
        });
    }
    target.validate()?;
    let converted = convert_channels(raw, target.channels)?;
    let resized = resize_bilinear(&converted, target.height, target.width);
    // interpolation between in-range values cannot leave [0, 1]; the clamp
    // only absorbs float rounding at the boundaries
    Image::from_array(resized.mapv(|v| v.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr3;
    use proptest::prelude::*;

    #[test]
    fn u8_max_scales_to_one() {
        let buf = ::image::GrayImage::from_pixel(2, 2, ::image::Luma([255]));
        let arr = dynamic_to_array(&DynamicImage::ImageLuma8(buf));
        assert_eq!(arr[[0, 0, 0]], 1.0);
        let buf = ::image::GrayImage::from_pixel(1, 1, ::image::Luma([128]));
        let arr = dynamic_to_array(&DynamicImage::ImageLuma8(buf));
        assert_abs_diff_eq!(arr[[0, 0, 0]], 128.0 / 255.0, epsilon = 1e-7);
    }

    #[test]
    fn u16_max_scales_to_one() {
        let buf = ::image::ImageBuffer::from_pixel(1, 1, ::image::Luma([65535u16]));
        let arr = dynamic_to_array(&DynamicImage::ImageLuma16(buf));
        assert_eq!(arr[[0, 0, 0]], 1.0);
    }

    #[test]
    fn alpha_is_dropped() {
        let buf = ::image::RgbaImage::from_pixel(1, 1, ::image::Rgba([255, 0, 0, 7]));
        let arr = dynamic_to_array(&DynamicImage::ImageRgba8(buf));
        assert_eq!(arr.dim(), (1, 1, 3));
        assert_eq!(arr[[0, 0, 0]], 1.0);
        assert_eq!(arr[[0, 0, 1]], 0.0);
    }

    #[test]
    fn luminance_reduction_hand_patch() {
        // 0.299 R + 0.587 G + 0.114 B on a hand-computed 2x2 color patch
        let raw = arr3(&[
            [[1.0f32, 0.5, 0.0], [0.0, 1.0, 1.0]],
            [[0.2, 0.4, 0.6], [0.0, 0.0, 0.0]],
        ]);
        let img = preprocess(raw, Dims::new(2, 2, 1)).unwrap();
        assert_abs_diff_eq!(img.get(0, 0, 0), 0.5925, epsilon = 1e-6);
        assert_abs_diff_eq!(img.get(0, 1, 0), 0.701, epsilon = 1e-6);
        assert_abs_diff_eq!(img.get(1, 0, 0), 0.363, epsilon = 1e-6);
        assert_abs_diff_eq!(img.get(1, 1, 0), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn gray_replicates_to_color() {
        let raw = arr3(&[[[0.25f32], [0.75]]]);
        let img = preprocess(raw, Dims::new(1, 2, 3)).unwrap();
        for ch in 0..3 {
            assert_eq!(img.get(0, 0, ch), 0.25);
            assert_eq!(img.get(0, 1, ch), 0.75);
        }
    }

    #[test]
    fn unconvertible_channel_counts_are_rejected() {
        let raw = Array3::<f32>::zeros((2, 2, 3));
        assert!(matches!(
            preprocess(raw, Dims::new(2, 2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn downsample_2x2_to_1x1_averages() {
        let raw = arr3(&[[[0.0f32], [0.2]], [[0.4], [0.6]]]);
        let img = preprocess(raw, Dims::new(1, 1, 1)).unwrap();
        assert_abs_diff_eq!(img.get(0, 0, 0), 0.3, epsilon = 1e-6);
    }

    #[test]
    fn upsample_2x2_to_3x3_hand_grid() {
        let raw = arr3(&[[[0.0f32], [0.4]], [[0.8], [1.0]]]);
        let img = preprocess(raw, Dims::new(3, 3, 1)).unwrap();
        let expected = [[0.0, 0.2, 0.4], [0.4, 0.55, 0.7], [0.8, 0.9, 1.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(img.get(r, c, 0), expected[r][c], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn preprocess_at_target_dims_is_identity() {
        let raw = arr3(&[[[0.1f32], [0.9]], [[0.3], [0.7]]]);
        let once = preprocess(raw, Dims::new(2, 2, 1)).unwrap();
        let twice = preprocess(once.data().clone(), Dims::new(2, 2, 1)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn zero_area_rejected() {
        let raw = Array3::<f32>::zeros((0, 4, 1));
        assert!(preprocess(raw, Dims::new(2, 2, 1)).is_err());
    }

    #[test]
    fn png_round_trip_preserves_values_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let buf =
            ::image::GrayImage::from_fn(4, 4, |x, y| ::image::Luma([(x * 40 + y * 23) as u8]));
        buf.save(&path).unwrap();
        let arr = decode_image_file(&path).unwrap();
        assert_eq!(arr.dim(), (4, 4, 1));
        assert_abs_diff_eq!(
            arr[[2, 3, 0]],
            (3.0 * 40.0 + 2.0 * 23.0) / 255.0,
            epsilon = 1e-7
        );
        assert!(matches!(
            decode_image_file(&dir.path().join("absent.png")),
            Err(Error::MissingFile { .. })
        ));
    }

    proptest! {
        // Bilinear interpolation of a constant image is that constant at
        // any output size.
        #[test]
        fn resize_preserves_constants(
            v in 0.0f32..=1.0,
            h in 1usize..12,
            w in 1usize..12,
            out_h in 1usize..12,
            out_w in 1usize..12,
        ) {
            let raw = Array3::from_elem((h, w, 1), v);
            let img = preprocess(raw, Dims::new(out_h, out_w, 1)).unwrap();
            for val in img.data().iter() {
                prop_assert!((val - v).abs() < 1e-6);
            }
        }

        // Resampled values stay inside the source's value range.
        #[test]
        fn resize_stays_in_unit_range(
            pixels in proptest::collection::vec(0.0f32..=1.0, 36..=36),
            out_h in 1usize..10,
            out_w in 1usize..10,
        ) {
            let raw = Array3::from_shape_vec((6, 6, 1), pixels).unwrap();
            let img = preprocess(raw, Dims::new(out_h, out_w, 1)).unwrap();
            prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
