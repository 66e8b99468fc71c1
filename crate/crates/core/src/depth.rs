//! Depth acquisition and normalization: per-pixel relative depth in
//! `[0, 1]` (1 = nearest, 0 = farthest), aligned to a source image.
//!
//! Depth rasters come from grayscale PNG (8/16-bit) or 32-bit PFM files.
//! A model provider slot exists for plugging in external monocular-depth
//! inference; this build resolves it to [`DepthError::ProviderUnavailable`]
//! so the core pipeline stays hermetic.

use std::fs;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("depth input contains a non-finite value")]
    NonFiniteValue,
    #[error("depth input is empty")]
    EmptyInput,
    #[error("depth buffer length {got} does not match {width}x{height}")]
    BufferSizeMismatch { width: u32, height: u32, got: usize },
    #[error("depth provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot read depth input {path}: {reason}")]
    UnreadableInput { path: String, reason: String },
    #[error("cannot load depth model: {0}")]
    ModelLoadFailure(String),
}

/// Normalized relative depth aligned to an image. Every value is finite
/// and within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::EmptyInput);
        }
        if values.len() != width as usize * height as usize {
            return Err(DepthError::BufferSizeMismatch { width, height, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(DepthError::NonFiniteValue);
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Result<Self, DepthError> {
        Self::from_values(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Flip the depth convention: near becomes far and vice versa.
    pub fn inverted(&self) -> DepthMap {
        DepthMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }

    /// Bilinear resample to new dimensions; values stay within the input
    /// range by convexity.
    pub fn resampled(&self, width: u32, height: u32) -> Result<DepthMap, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::EmptyInput);
        }
        let values = resample_raw(self.width, self.height, &self.values, width, height);
        Ok(DepthMap { width, height, values })
    }
}

/// Affine rescale of a raw matrix to `[0, 1]`; a constant input maps to 0.5
/// everywhere (a flat scene, not an error).
pub fn normalize_depth(
    width: u32,
    height: u32,
    raw: &[f32],
    invert: bool,
) -> Result<DepthMap, DepthError> {
    if width == 0 || height == 0 || raw.is_empty() {
        return Err(DepthError::EmptyInput);
    }
    if raw.len() != width as usize * height as usize {
        return Err(DepthError::BufferSizeMismatch { width, height, got: raw.len() });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(DepthError::NonFiniteValue);
    }
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &v in raw {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let values = if hi == lo {
        vec![0.5; raw.len()]
    } else {
        let scale = 1.0 / (hi - lo);
        raw.iter()
            .map(|&v| {
                let s = ((v - lo) * scale).clamp(0.0, 1.0);
                if invert {
                    1.0 - s
                } else {
                    s
                }
            })
            .collect()
    };
    Ok(DepthMap { width, height, values })
}

fn resample_raw(sw: u32, sh: u32, src: &[f32], dw: u32, dh: u32) -> Vec<f32> {
    let axis = |d: u32, s: u32, p: u32| -> f32 {
        if d <= 1 || s <= 1 {
            0.0
        } else {
            p as f32 * (s - 1) as f32 / (d - 1) as f32
        }
    };
    let sample = |x: f32, y: f32| -> f32 {
        let x0 = (x.floor() as u32).min(sw - 1);
        let y0 = (y.floor() as u32).min(sh - 1);
        let x1 = (x0 + 1).min(sw - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let dx = x - x0 as f32;
        let dy = y - y0 as f32;
        let at = |xx: u32, yy: u32| src[yy as usize * sw as usize + xx as usize];
        at(x0, y0) * (1.0 - dx) * (1.0 - dy)
            + at(x1, y0) * dx * (1.0 - dy)
            + at(x0, y1) * (1.0 - dx) * dy
            + at(x1, y1) * dx * dy
    };
    let mut out = Vec::with_capacity(dw as usize * dh as usize);
    for y in 0..dh {
        for x in 0..dw {
            out.push(sample(axis(dw, sw, x), axis(dh, sh, y)));
        }
    }
    out
}

/// Descriptor for an external ONNX-format depth network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub path: PathBuf,
    pub input_width: u32,
    pub input_height: u32,
}

/// Where depth comes from: a raster on disk or a model-inference backend.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthProvider {
    File(PathBuf),
    Model(ModelDescriptor),
}

/// Resolve a provider into a depth map resampled to the target dimensions
/// and normalized to `[0, 1]`.
pub fn load_depth(
    provider: &DepthProvider,
    target_width: u32,
    target_height: u32,
) -> Result<DepthMap, DepthError> {
    if target_width == 0 || target_height == 0 {
        return Err(DepthError::EmptyInput);
    }
    match provider {
        DepthProvider::File(path) => {
            let (w, h, raw) = read_depth_raster(path)?;
            let resampled = resample_raw(w, h, &raw, target_width, target_height);
            normalize_depth(target_width, target_height, &resampled, false)
        }
        DepthProvider::Model(_descriptor) => Err(DepthError::ProviderUnavailable(
            "model inference is not compiled into this build; pass a depth raster file instead"
                .into(),
        )),
    }
}

fn read_depth_raster(path: &PathBuf) -> Result<(u32, u32, Vec<f32>), DepthError> {
    let unreadable = |reason: String| DepthError::UnreadableInput {
        path: path.display().to_string(),
        reason,
    };
    let is_pfm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    if is_pfm {
        let bytes = fs::read(path).map_err(|e| unreadable(e.to_string()))?;
        return parse_pfm(&bytes).map_err(unreadable);
    }
    let dyn_img = image::open(path).map_err(|e| unreadable(e.to_string()))?;
    let gray = dyn_img.to_luma32f();
    let (w, h) = gray.dimensions();
    if w == 0 || h == 0 {
        return Err(DepthError::EmptyInput);
    }
    Ok((w, h, gray.into_raw()))
}

/// Minimal grayscale PFM reader. Scanlines are stored bottom-to-top; a
/// negative scale marks little-endian samples.
fn pfm_token(bytes: &[u8], pos: &mut usize) -> Result<String, String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err("truncated PFM header".into());
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).map_err(|_| "non-ASCII PFM header")?;
    *pos += 1; // single whitespace terminates each header token
    Ok(text.to_string())
}

fn parse_pfm(bytes: &[u8]) -> Result<(u32, u32, Vec<f32>), String> {
    let mut pos = 0usize;
    let magic = pfm_token(bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(format!("unsupported PFM magic {magic:?}, only grayscale \"Pf\" is accepted"));
    }
    let width: u32 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM width")?;
    let height: u32 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM height")?;
    let scale: f32 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM scale")?;
    if width == 0 || height == 0 {
        return Err("zero PFM dimensions".into());
    }
    let little_endian = scale < 0.0;
    let count = width as usize * height as usize;
    let data = &bytes[pos..];
    if data.len() < count * 4 {
        return Err(format!("PFM data truncated: need {} bytes, got {}", count * 4, data.len()));
    }

    let mut values = vec![0.0f32; count];
    for row in 0..height as usize {
        // bottom row is stored first
        let dst_row = height as usize - 1 - row;
        for col in 0..width as usize {
            let o = (row * width as usize + col) * 4;
            let raw: [u8; 4] = data[o..o + 4].try_into().expect("length checked");
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            values[dst_row * width as usize + col] = v;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("PFM contains non-finite samples".into());
    }
    Ok((width, height, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_affine_rescale() {
        let d = normalize_depth(3, 1, &[2.0, 4.0, 6.0], false).unwrap();
        assert_eq!(d.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_maps_to_half() {
        let d = normalize_depth(2, 2, &[7.0; 4], false).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn normalize_invert_flips() {
        let d = normalize_depth(2, 1, &[0.0, 1.0], true).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(matches!(
            normalize_depth(2, 1, &[f32::NAN, 0.0], false),
            Err(DepthError::NonFiniteValue)
        ));
    }

    #[test]
    fn normalize_invariant_under_positive_affine() {
        let raw = [0.3f32, 1.7, 0.9, 5.5, 2.2, 4.1];
        let base = normalize_depth(3, 2, &raw, false).unwrap();
        let mapped: Vec<f32> = raw.iter().map(|v| 3.5 * v + 11.0).collect();
        let transformed = normalize_depth(3, 2, &mapped, false).unwrap();
        for (a, b) in base.values().iter().zip(transformed.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn resample_preserves_range() {
        let d = normalize_depth(4, 4, &(0..16).map(|v| v as f32).collect::<Vec<_>>(), false)
            .unwrap();
        let r = d.resampled(9, 7).unwrap();
        assert_eq!(r.dimensions(), (9, 7));
        for &v in r.values() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn file_provider_full_range_and_target_dims() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.png");
        // 2x1 gray PNG holding {0, 255}
        image::GrayImage::from_raw(2, 1, vec![0, 255])
            .unwrap()
            .save(&path)
            .unwrap();
        let d = load_depth(&DepthProvider::File(path), 2, 1).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0]);
    }

    #[test]
    fn file_provider_resamples_to_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.png");
        let raw: Vec<u8> = (0..256 * 192).map(|i| (i % 256) as u8).collect();
        image::GrayImage::from_raw(256, 192, raw).unwrap().save(&path).unwrap();
        let d = load_depth(&DepthProvider::File(path), 560, 420).unwrap();
        assert_eq!(d.dimensions(), (560, 420));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_depth(&DepthProvider::File(PathBuf::from("/nonexistent/depth.png")), 4, 4)
            .unwrap_err();
        assert!(matches!(err, DepthError::UnreadableInput { .. }));
    }

    #[test]
    fn model_provider_unavailable_in_this_build() {
        let provider = DepthProvider::Model(ModelDescriptor {
            path: PathBuf::from("model-small.onnx"),
            input_width: 256,
            input_height: 256,
        });
        assert!(matches!(
            load_depth(&provider, 8, 8),
            Err(DepthError::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn pfm_little_endian_bottom_up() {
        // 2x2 grayscale, negative scale = little-endian, rows bottom-first
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [10.0f32, 20.0, 30.0, 40.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let (w, h, values) = parse_pfm(&bytes).unwrap();
        assert_eq!((w, h), (2, 2));
        // file rows (10,20),(30,40) bottom-up -> raster top row is (30,40)
        assert_eq!(values, vec![30.0, 40.0, 10.0, 20.0]);
    }

    #[test]
    fn pfm_loads_through_provider() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.pfm");
        let mut bytes = b"Pf\n3 1\n-1.0\n".to_vec();
        for v in [1.0f32, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let d = load_depth(&DepthProvider::File(path), 3, 1).unwrap();
        assert_eq!(d.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn pfm_color_rejected() {
        let bytes = b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0".to_vec();
        assert!(parse_pfm(&bytes).is_err());
    }
}
