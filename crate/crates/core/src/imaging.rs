//! Pixel containers and dataset ingestion.
//!
//! Angiogram frames are held as real-valued grids in [0, 255] so that filter
//! outputs keep fractional precision; quantization happens only when a result
//! is exported as PNG. All windowed operations share one border policy:
//! mirror reflection about the edge without repeating the border pixel
//! (coordinate -1 maps to 1, coordinate `width` maps to `width - 2`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::error::{Error, Result};

/// Reflect an arbitrary coordinate into `[0, n)` without repeating the border
/// sample. The reflection has period `2n - 2`.
pub fn reflect_coord(i: i64, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = (2 * n - 2) as i64;
    let mut m = i.rem_euclid(period);
    if m >= n as i64 {
        m = period - m;
    }
    m as usize
}

/// A 2-D grid of intensities confined to [0.0, 255.0], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// All-zero image.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        GrayImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::Param(format!("intensity {v} outside [0, 255]")));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_data(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with the shared mirror-reflection border policy; `x` and `y`
    /// may lie anywhere.
    #[inline]
    pub fn sample_reflected(&self, x: i64, y: i64) -> f64 {
        let rx = reflect_coord(x, self.width);
        let ry = reflect_coord(y, self.height);
        self.data[ry * self.width + rx]
    }

    /// Copy into an unconstrained plane.
    pub fn to_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }
}

/// A real-valued plane with no range constraint; filter outputs that feed the
/// classifier (Hessian planes in particular) are not clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn sample_reflected(&self, x: i64, y: i64) -> f64 {
        let rx = reflect_coord(x, self.width);
        let ry = reflect_coord(y, self.height);
        self.data[ry * self.width + rx]
    }

    /// Min-max normalize to 8-bit for visual inspection. A constant plane
    /// maps to mid-grey 0.
    pub fn to_normalized_u8(&self) -> Vec<u8> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        self.data
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Per-pixel vessel/background mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// One angiogram frame paired with its annotated ground truth.
#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub image_id: String,
    pub image: GrayImage,
    pub truth: BinaryMask,
}

const BT601_R: f64 = 0.299;
const BT601_G: f64 = 0.587;
const BT601_B: f64 = 0.114;

/// Decode a PNG or PGM file into a grayscale image. Multi-channel input is
/// reduced with the BT.601 luminance weights; 16-bit samples are linearly
/// rescaled to [0, 255].
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "zero-sized image".into(),
        });
    }

    let scale16 = 255.0 / 65535.0;
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw().iter().map(|&v| v as f64).collect(),
        DynamicImage::ImageLuma16(img) => {
            img.into_raw().iter().map(|&v| v as f64 * scale16).collect()
        }
        DynamicImage::ImageLumaA8(img) => {
            img.into_raw().chunks_exact(2).map(|p| p[0] as f64).collect()
        }
        DynamicImage::ImageLumaA16(img) => img
            .into_raw()
            .chunks_exact(2)
            .map(|p| p[0] as f64 * scale16)
            .collect(),
        DynamicImage::ImageRgb8(img) => img
            .into_raw()
            .chunks_exact(3)
            .map(|p| BT601_R * p[0] as f64 + BT601_G * p[1] as f64 + BT601_B * p[2] as f64)
            .collect(),
        DynamicImage::ImageRgba8(img) => img
            .into_raw()
            .chunks_exact(4)
            .map(|p| BT601_R * p[0] as f64 + BT601_G * p[1] as f64 + BT601_B * p[2] as f64)
            .collect(),
        DynamicImage::ImageRgb16(img) => img
            .into_raw()
            .chunks_exact(3)
            .map(|p| {
                (BT601_R * p[0] as f64 + BT601_G * p[1] as f64 + BT601_B * p[2] as f64) * scale16
            })
            .collect(),
        DynamicImage::ImageRgba16(img) => img
            .into_raw()
            .chunks_exact(4)
            .map(|p| {
                (BT601_R * p[0] as f64 + BT601_G * p[1] as f64 + BT601_B * p[2] as f64) * scale16
            })
            .collect(),
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported pixel layout {:?}", other.color()),
            })
        }
    };

    // Weighted sums of in-range u8/u16 samples stay within [0, 255], so this
    // cannot fail on decoder output.
    GrayImage::from_data(width, height, data)
}

/// Write a mask as an 8-bit grayscale PNG, vessel = 255, background = 0.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, pixels)
            .expect("mask buffer length matches dimensions");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    buf.write_to(&mut BufWriter::new(file), image::ImageFormat::Png)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Write an already-quantized 8-bit plane as grayscale PNG.
pub fn save_gray_u8(pixels: &[u8], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, pixels.to_vec())
            .expect("buffer length matches dimensions");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    buf.write_to(&mut BufWriter::new(file), image::ImageFormat::Png)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Write a probability plane (values in [0, 1]) as a 16-bit PNG scaled by 65535.
pub fn save_proba_png(proba: &Plane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels: Vec<u16> = proba
        .data()
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(proba.width() as u32, proba.height() as u32, pixels)
            .expect("buffer length matches dimensions");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    buf.write_to(&mut BufWriter::new(file), image::ImageFormat::Png)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Threshold a grayscale image into a mask at `cut` (inclusive).
pub fn threshold_mask(img: &GrayImage, cut: f64) -> BinaryMask {
    BinaryMask {
        width: img.width(),
        height: img.height(),
        data: img.data().iter().map(|&v| v >= cut).collect(),
    }
}

/// Load a dataset directory laid out as `<id>.png` + `<id>_gt.png` pairs.
/// Ground truth is binarized at >= 128. Entries come back sorted by id.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let dir = dir.as_ref();
    let mut images: BTreeMap<String, std::path::PathBuf> = BTreeMap::new();
    let mut truths: BTreeMap<String, std::path::PathBuf> = BTreeMap::new();

    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(id) = stem.strip_suffix("_gt") {
            truths.insert(id.to_string(), path);
        } else {
            images.insert(stem.to_string(), path);
        }
    }

    for id in truths.keys() {
        if !images.contains_key(id) {
            return Err(Error::Pairing(format!("{id}_gt.png has no {id}.png")));
        }
    }

    let mut out = Vec::with_capacity(images.len());
    for (id, img_path) in images {
        let Some(gt_path) = truths.get(&id) else {
            return Err(Error::Pairing(format!("{id}.png has no {id}_gt.png")));
        };
        let image = load_gray(&img_path)?;
        let truth_img = load_gray(gt_path)?;
        if image.width() != truth_img.width() || image.height() != truth_img.height() {
            return Err(Error::Dimension(format!(
                "{id}: image is {}x{} but ground truth is {}x{}",
                image.width(),
                image.height(),
                truth_img.width(),
                truth_img.height()
            )));
        }
        let truth = threshold_mask(&truth_img, 128.0);
        out.push(DatasetEntry {
            image_id: id,
            image,
            truth,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use std::io::Write;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn reflect_basics() {
        assert_eq!(reflect_coord(-1, 512), 1);
        assert_eq!(reflect_coord(512, 512), 510);
        assert_eq!(reflect_coord(-3, 512), 3);
        assert_eq!(reflect_coord(513, 512), 509);
        assert_eq!(reflect_coord(0, 1), 0);
        assert_eq!(reflect_coord(-5, 1), 0);
        // In-bounds coordinates are untouched.
        for i in 0..16 {
            assert_eq!(reflect_coord(i, 16), i as usize);
        }
    }

    #[test]
    fn reflect_always_in_bounds() {
        for n in 1..12usize {
            for i in -40..40i64 {
                assert!(reflect_coord(i, n) < n, "i={i} n={n}");
            }
        }
    }

    #[test]
    fn sample_reflected_identity_in_bounds() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 13 + y * 31) % 256) as f64).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                assert_eq!(img.sample_reflected(x as i64, y as i64), img.get(x, y));
            }
        }
    }

    #[test]
    fn sample_reflected_ramp() {
        // I(x, y) = x + y, so (-3, -2) must read the value at (3, 2).
        let img = GrayImage::from_fn(16, 16, |x, y| (x + y) as f64).unwrap();
        assert_eq!(img.sample_reflected(-3, -2), 5.0);
        assert_eq!(img.sample_reflected(-1, 0), 1.0);
        assert_eq!(img.sample_reflected(16, 0), 14.0);
    }

    #[test]
    fn pgm_binary_decode_identity() {
        let dir = tmpdir();
        let path = dir.path().join("tiny.pgm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0u8, 64, 128, 255]).unwrap();
        drop(f);

        let img = load_gray(&path).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0.0, 64.0, 128.0, 255.0]);
    }

    #[test]
    fn pgm_ascii_decode_identity() {
        let dir = tmpdir();
        let path = dir.path().join("tiny_ascii.pgm");
        std::fs::write(&path, b"P2\n2 2\n255\n0 64\n128 255\n").unwrap();
        let img = load_gray(&path).unwrap();
        assert_eq!(img.data(), &[0.0, 64.0, 128.0, 255.0]);
    }

    #[test]
    fn rgb_png_luminance() {
        let dir = tmpdir();
        let path = dir.path().join("red.png");
        let mut rgb = image::RgbImage::new(1, 1);
        rgb.put_pixel(0, 0, image::Rgb([255, 0, 0]));
        rgb.save(&path).unwrap();

        let img = load_gray(&path).unwrap();
        assert!((img.get(0, 0) - 76.245).abs() < 1e-9);
    }

    #[test]
    fn luma16_rescaled() {
        let dir = tmpdir();
        let path = dir.path().join("wide.png");
        let mut img16 = image::ImageBuffer::<Luma<u16>, Vec<u16>>::new(2, 1);
        img16.put_pixel(0, 0, Luma([0u16]));
        img16.put_pixel(1, 0, Luma([65535u16]));
        img16.save(&path).unwrap();

        let img = load_gray(&path).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert!((img.get(1, 0) - 255.0).abs() < 1e-12);
    }

    #[test]
    fn missing_path_is_io_error() {
        let err = load_gray("/nonexistent/definitely_not_here.png").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn mask_save_constant() {
        let dir = tmpdir();
        for (name, fill, expect) in [("black.png", false, 0.0), ("white.png", true, 255.0)] {
            let mask = BinaryMask::from_fn(4, 4, |_, _| fill);
            let path = dir.path().join(name);
            save_mask(&mask, &path).unwrap();
            let back = load_gray(&path).unwrap();
            assert!(back.data().iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn mask_roundtrip_random() {
        let dir = tmpdir();
        let mut rng = SplitMix64::new(2024);
        for i in 0..100 {
            let mask = BinaryMask::from_fn(32, 32, |_, _| rng.next_f64() < 0.5);
            let path = dir.path().join(format!("m{i}.png"));
            save_mask(&mask, &path).unwrap();
            let back = threshold_mask(&load_gray(&path).unwrap(), 128.0);
            assert_eq!(back, mask);
        }
    }

    #[test]
    fn loaded_intensities_in_range() {
        let dir = tmpdir();
        let path = dir.path().join("noise.png");
        let mut rng = SplitMix64::new(5);
        let mut img8 = image::GrayImage::new(16, 16);
        for p in img8.pixels_mut() {
            *p = Luma([rng.next_below(256) as u8]);
        }
        img8.save(&path).unwrap();
        let img = load_gray(&path).unwrap();
        assert!(img.data().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    fn write_pair(dir: &Path, id: &str, w: u32, h: u32) {
        let img = image::GrayImage::from_pixel(w, h, Luma([100]));
        img.save(dir.join(format!("{id}.png"))).unwrap();
        let gt = image::GrayImage::from_pixel(w, h, Luma([0]));
        gt.save(dir.join(format!("{id}_gt.png"))).unwrap();
    }

    #[test]
    fn dataset_sorted_pairs() {
        let dir = tmpdir();
        write_pair(dir.path(), "img2", 8, 8);
        write_pair(dir.path(), "img1", 8, 8);
        write_pair(dir.path(), "img3", 8, 8);
        let entries = load_dataset(dir.path()).unwrap();
        let ids: Vec<&str> = entries.iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(ids, ["img1", "img2", "img3"]);
    }

    #[test]
    fn dataset_empty_dir() {
        let dir = tmpdir();
        assert!(load_dataset(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn dataset_unpaired_image() {
        let dir = tmpdir();
        let img = image::GrayImage::from_pixel(4, 4, Luma([9]));
        img.save(dir.path().join("lonely.png")).unwrap();
        assert!(matches!(
            load_dataset(dir.path()).unwrap_err(),
            Error::Pairing(_)
        ));
    }

    #[test]
    fn dataset_unpaired_truth() {
        let dir = tmpdir();
        let img = image::GrayImage::from_pixel(4, 4, Luma([9]));
        img.save(dir.path().join("ghost_gt.png")).unwrap();
        assert!(matches!(
            load_dataset(dir.path()).unwrap_err(),
            Error::Pairing(_)
        ));
    }

    #[test]
    fn dataset_dimension_mismatch() {
        let dir = tmpdir();
        let img = image::GrayImage::from_pixel(8, 8, Luma([9]));
        img.save(dir.path().join("a.png")).unwrap();
        let gt = image::GrayImage::from_pixel(4, 4, Luma([0]));
        gt.save(dir.path().join("a_gt.png")).unwrap();
        assert!(matches!(
            load_dataset(dir.path()).unwrap_err(),
            Error::Dimension(_)
        ));
    }

    #[test]
    fn proba_png_16bit() {
        let dir = tmpdir();
        let path = dir.path().join("p.png");
        let mut plane = Plane::new(2, 1);
        plane.set(0, 0, 0.0);
        plane.set(1, 0, 1.0);
        save_proba_png(&plane, &path).unwrap();
        let back = load_gray(&path).unwrap();
        assert_eq!(back.get(0, 0), 0.0);
        assert!((back.get(1, 0) - 255.0).abs() < 1e-12);
    }
}
