//! Image datasets: IDX files, roto-translation, and conversion of images to
//! weighted histograms on [−1, 1]² or to flat vectors.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::GridHistogram;
use crate::measures::EmpiricalMeasure;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
/// Side length after padding for roto-translation.
pub const PADDED_SIDE: usize = 34;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                got: pixels.len(),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn total_intensity(&self) -> u64 {
        self.pixels.iter().map(|&p| u64::from(p)).sum()
    }
}

/// Reads a file, transparently inflating gzip content (sniffed by magic).
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                offset: 0,
                message: format!("gzip stream: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::Format {
            offset: offset as u64,
            message: "truncated IDX header".into(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("magic {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let needed = 16 + count * size;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated payload: {count} images of {rows}×{cols} need {needed} bytes"),
        });
    }
    Ok(bytes[16..needed]
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| GrayImage {
            height: rows,
            width: cols,
            pixels: px.to_vec(),
        })
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated payload: {count} labels need {needed} bytes"),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn load_idx_images(path: &Path) -> Result<Vec<GrayImage>> {
    parse_idx_images(&read_maybe_gz(path)?)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_maybe_gz(path)?)
}

/// Loads an image file and its label file, requiring equal counts.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<(Vec<GrayImage>, Vec<u8>)> {
    let imgs = load_idx_images(images)?;
    let labs = load_idx_labels(labels)?;
    if imgs.len() != labs.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} images but {} labels", imgs.len(), labs.len()),
        });
    }
    Ok((imgs, labs))
}

pub fn encode_idx_images(images: &[GrayImage]) -> Result<Vec<u8>> {
    let (h, w) = images.first().map_or((0, 0), |i| (i.height, i.width));
    if images.iter().any(|i| (i.height, i.width) != (h, w)) {
        return Err(Error::invalid("images differ in size"));
    }
    let mut out = Vec::with_capacity(16 + images.len() * h * w);
    for v in [IMAGES_MAGIC, images.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(&img.pixels);
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_images(path: &Path, images: &[GrayImage]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_idx_images(images)?)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_idx_labels(labels))?;
    Ok(())
}

/// Centers `image` in a `side × side` zero canvas.
pub fn pad_centered(image: &GrayImage, side: usize) -> Result<GrayImage> {
    if image.height > side || image.width > side {
        return Err(Error::invalid(format!(
            "{}×{} image does not fit in {side}×{side}",
            image.height, image.width
        )));
    }
    let top = (side - image.height) / 2;
    let left = (side - image.width) / 2;
    let mut pixels = vec![0u8; side * side];
    for r in 0..image.height {
        let dst = (top + r) * side + left;
        pixels[dst..dst + image.width].copy_from_slice(&image.pixels[r * image.width..(r + 1) * image.width]);
    }
    GrayImage::new(side, side, pixels)
}

/// Rotation angle (radians) about the canvas center followed by an integer
/// translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotoTranslation {
    pub angle: f64,
    pub shift_rows: i32,
    pub shift_cols: i32,
}

impl RotoTranslation {
    pub const IDENTITY: Self = Self {
        angle: 0.0,
        shift_rows: 0,
        shift_cols: 0,
    };
}

/// Angle `~ U(−max, max)`; shifts uniform on `±slack/2` per axis where the
/// slack is the padding margin.
pub fn sample_roto_translation<R: Rng + ?Sized>(
    max_angle_rad: f64,
    image_side: usize,
    rng: &mut R,
) -> RotoTranslation {
    let angle = if max_angle_rad > 0.0 {
        rng.random_range(-max_angle_rad..=max_angle_rad)
    } else {
        0.0
    };
    let half = (PADDED_SIDE.saturating_sub(image_side) / 2) as i32;
    RotoTranslation {
        angle,
        shift_rows: rng.random_range(-half..=half),
        shift_cols: rng.random_range(-half..=half),
    }
}

/// Pads to 34 × 34 and applies `t` with bilinear resampling.
pub fn apply_roto_translation(image: &GrayImage, t: RotoTranslation) -> Result<GrayImage> {
    let padded = pad_centered(image, PADDED_SIDE)?;
    let side = PADDED_SIDE;
    let center = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = t.angle.sin_cos();
    let sample = |r: f64, c: f64| -> f64 {
        let (r0, c0) = (r.floor(), c.floor());
        let (fr, fc) = (r - r0, c - c0);
        let px = |rr: f64, cc: f64| -> f64 {
            if rr < 0.0 || cc < 0.0 || rr >= side as f64 || cc >= side as f64 {
                0.0
            } else {
                f64::from(padded.get(rr as usize, cc as usize))
            }
        };
        let top = px(r0, c0) * (1.0 - fc) + if fc > 0.0 { px(r0, c0 + 1.0) * fc } else { 0.0 };
        if fr > 0.0 {
            let bottom = px(r0 + 1.0, c0) * (1.0 - fc) + if fc > 0.0 { px(r0 + 1.0, c0 + 1.0) * fc } else { 0.0 };
            top * (1.0 - fr) + bottom * fr
        } else {
            top
        }
    };
    let mut pixels = vec![0u8; side * side];
    for r in 0..side {
        for c in 0..side {
            // undo translation, then undo rotation
            let y = (r as f64 - f64::from(t.shift_rows)) - center;
            let x = (c as f64 - f64::from(t.shift_cols)) - center;
            let src_r = cos * y - sin * x + center;
            let src_c = sin * y + cos * x + center;
            pixels[r * side + c] = sample(src_r, src_c).round().clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::new(side, side, pixels)
}

/// Random roto-translation with angle `~ U(−max, max)`.
pub fn roto_translate<R: Rng + ?Sized>(image: &GrayImage, max_angle_rad: f64, rng: &mut R) -> Result<GrayImage> {
    if !(max_angle_rad >= 0.0) {
        return Err(Error::invalid("maximum angle must be nonnegative"));
    }
    let t = sample_roto_translation(max_angle_rad, image.height.max(image.width), rng);
    apply_roto_translation(image, t)
}

/// Intensity histogram over the full pixel grid.
pub fn image_to_grid_histogram(image: &GrayImage) -> Result<GridHistogram> {
    let intensities: Vec<f64> = image.pixels.iter().map(|&p| f64::from(p)).collect();
    GridHistogram::from_intensities(image.height, image.width, &intensities)
}

/// Weighted point cloud over active pixels (intensity > 0), positions mapped
/// affinely to [−1, 1]².
pub fn image_to_histogram(image: &GrayImage) -> Result<EmpiricalMeasure> {
    image_to_grid_histogram(image)?.to_measure()
}

/// Row-major intensities scaled to [0, 1].
pub fn flatten_image(image: &GrayImage) -> Vec<f64> {
    image.pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn digit_like(seed: u8) -> GrayImage {
        // blob confined to the 20×20 center, like MNIST digits
        let mut px = vec![0u8; 28 * 28];
        for r in 6..22 {
            for c in 8..20 {
                if (r * 7 + c * 3 + seed as usize) % 5 != 0 {
                    px[r * 28 + c] = ((r * 13 + c * 29 + seed as usize * 7) % 255) as u8 + 1;
                }
            }
        }
        GrayImage::new(28, 28, px).unwrap()
    }

    #[test]
    fn idx_round_trip_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = vec![digit_like(1), digit_like(2), digit_like(3)];
        let labels = vec![1u8, 2, 9];
        let ip = dir.path().join("img.idx");
        let lp = dir.path().join("lab.idx");
        write_idx_images(&ip, &imgs).unwrap();
        write_idx_labels(&lp, &labels).unwrap();
        let (back, lb) = load_idx_pair(&ip, &lp).unwrap();
        assert_eq!(back, imgs);
        assert_eq!(lb, labels);
        assert_eq!(encode_idx_images(&back).unwrap(), fs::read(&ip).unwrap());

        let gz = dir.path().join("img.idx.gz");
        let mut enc = flate2::write::GzEncoder::new(fs::File::create(&gz).unwrap(), flate2::Compression::fast());
        enc.write_all(&fs::read(&ip).unwrap()).unwrap();
        enc.finish().unwrap();
        assert_eq!(load_idx_images(&gz).unwrap(), imgs);
    }

    #[test]
    fn idx_errors() {
        let mut bytes = encode_idx_images(&[digit_like(0)]).unwrap();
        bytes[3] = 0x01;
        let err = parse_idx_images(&bytes).unwrap_err().to_string();
        assert!(err.contains("0x00000803"), "{err}");
        let good = encode_idx_images(&[digit_like(0)]).unwrap();
        assert!(matches!(parse_idx_images(&good[..100]), Err(Error::Format { .. })));
        assert!(parse_idx_labels(&encode_idx_labels(&[1, 2])[..9]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        write_idx_images(&ip, &[digit_like(0)]).unwrap();
        write_idx_labels(&lp, &[1, 2]).unwrap();
        assert!(load_idx_pair(&ip, &lp).is_err());
    }

    #[test]
    fn identity_transform_is_padding() {
        let img = digit_like(4);
        let out = apply_roto_translation(&img, RotoTranslation::IDENTITY).unwrap();
        assert_eq!(out, pad_centered(&img, 34).unwrap());
        let zero = roto_translate(&img, 0.0, &mut rng::seeded(1)).unwrap();
        assert_eq!(zero.total_intensity(), img.total_intensity());
    }

    #[test]
    fn translation_preserves_mass() {
        let img = digit_like(5);
        let mut r = rng::seeded(2);
        for _ in 0..50 {
            let t = RotoTranslation {
                angle: 0.0,
                ..sample_roto_translation(0.0, 28, &mut r)
            };
            assert!(t.shift_rows.abs() <= 3 && t.shift_cols.abs() <= 3);
            let out = apply_roto_translation(&img, t).unwrap();
            let (a, b) = (out.total_intensity() as f64, img.total_intensity() as f64);
            assert!((a - b).abs() <= 0.02 * b);
        }
    }

    #[test]
    fn rotation_keeps_mass_roughly() {
        let img = digit_like(6);
        let out = roto_translate(&img, std::f64::consts::FRAC_PI_6, &mut rng::seeded(3)).unwrap();
        assert_eq!((out.height, out.width), (34, 34));
        let (a, b) = (out.total_intensity() as f64, img.total_intensity() as f64);
        assert!((a - b).abs() <= 0.1 * b, "{a} vs {b}");
    }

    #[test]
    fn angles_are_uniform() {
        let max = 0.5;
        let mut r = rng::seeded(4);
        let mut angles: Vec<f64> = (0..10_000).map(|_| sample_roto_translation(max, 28, &mut r).angle).collect();
        angles.sort_by(f64::total_cmp);
        let n = angles.len() as f64;
        let ks = angles
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let cdf = (a + max) / (2.0 * max);
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // α = 0.001 critical value
        assert!(ks < 1.95 / n.sqrt(), "KS = {ks}");
        assert!(angles.iter().all(|a| a.abs() <= max));
    }

    #[test]
    fn histogram_weights_and_positions() {
        let mut px = vec![0u8; 28 * 28];
        px[5 * 28 + 7] = 200;
        let one = image_to_histogram(&GrayImage::new(28, 28, px.clone()).unwrap()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.weights(), &[1.0]);

        px[5 * 28 + 7] = 100;
        px[9 * 28 + 2] = 50;
        let two = image_to_histogram(&GrayImage::new(28, 28, px).unwrap()).unwrap();
        let mut w = two.weights().to_vec();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);

        let mut corners = vec![0u8; 28 * 28];
        corners[0] = 1;
        corners[27] = 1;
        corners[27 * 28] = 1;
        corners[28 * 28 - 1] = 1;
        let m = image_to_histogram(&GrayImage::new(28, 28, corners).unwrap()).unwrap();
        let mut xs: Vec<f64> = m.points().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = m.points().map(|p| p[1]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        assert_eq!((xs[0], xs[3]), (-1.0, 1.0));
        assert_eq!((ys[0], ys[3]), (-1.0, 1.0));

        assert!(image_to_histogram(&GrayImage::new(28, 28, vec![0; 784]).unwrap()).is_err());
    }

    #[test]
    fn histogram_invariants_on_transformed_images() {
        let mut r = rng::seeded(7);
        for s in 0..20 {
            let img = roto_translate(&digit_like(s), 0.5, &mut r).unwrap();
            let h = image_to_histogram(&img).unwrap();
            assert!((h.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(h.flat_points().iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn flatten() {
        assert!(flatten_image(&GrayImage::new(2, 2, vec![0; 4]).unwrap()).iter().all(|&x| x == 0.0));
        let padded = pad_centered(&digit_like(0), 34).unwrap();
        assert_eq!(flatten_image(&padded).len(), 1156);
        assert_eq!(flatten_image(&GrayImage::new(1, 2, vec![255, 0]).unwrap())[0], 1.0);
    }
}
