//! Raster primitives shared by the whole pipeline: 8-bit RGB images,
//! coordinate remapping with bilinear interpolation, border policies and
//! a median spatial filter.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image must have non-zero dimensions")]
    EmptyImage,
    #[error("pixel buffer length {got} does not match {width}x{height}x3")]
    BufferSizeMismatch { width: u32, height: u32, got: usize },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Row-major 8-bit RGB raster. Immutable in all pipeline stages once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    /// Black image of the given size.
    pub fn new(width: u32, height: u32) -> Result<Self, RasterError> {
        Self::filled(width, height, [0, 0, 0])
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&rgb);
        }
        Ok(Self { width, height, data })
    }

    /// Build an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn<F: FnMut(u32, u32) -> [u8; 3]>(
        width: u32,
        height: u32,
        mut f: F,
    ) -> Result<Self, RasterError> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(RasterError::BufferSizeMismatch { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
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
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize * 3;
        let start = y as usize * w;
        &self.data[start..start + w]
    }

    pub fn row_mut(&mut self, y: u32) -> &mut [u8] {
        let w = self.width as usize * 3;
        let start = y as usize * w;
        &mut self.data[start..start + w]
    }

    /// Disjoint mutable row slices, for row-partitioned parallel writers.
    pub fn rows_mut(&mut self) -> impl IndexedParallelIterator<Item = &mut [u8]> {
        self.data.par_chunks_mut(self.width as usize * 3)
    }

    pub fn load_png<P: AsRef<Path>>(path: P) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let dyn_img = image::open(path).map_err(|source| RasterError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let rgb = dyn_img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::from_raw(w, h, rgb.into_raw())
    }

    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<(), RasterError> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.data,
            self.width,
            self.height,
            image::ColorType::Rgb8,
        )
        .map_err(|source| RasterError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Per-destination source coordinates for [`remap`]. Indexed by destination
/// pixel; `src_x`/`src_y` hold the real-valued column/row to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordMap {
    width: u32,
    height: u32,
    src_x: Vec<f32>,
    src_y: Vec<f32>,
}

impl CoordMap {
    pub fn from_fn<F: FnMut(u32, u32) -> (f32, f32)>(
        width: u32,
        height: u32,
        mut f: F,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let n = width as usize * height as usize;
        let mut src_x = Vec::with_capacity(n);
        let mut src_y = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = f(x, y);
                src_x.push(sx);
                src_y.push(sy);
            }
        }
        Ok(Self { width, height, src_x, src_y })
    }

    /// Map that samples every destination pixel from itself.
    pub fn identity(width: u32, height: u32) -> Result<Self, RasterError> {
        Self::from_fn(width, height, |x, y| (x as f32, y as f32))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn source(&self, x: u32, y: u32) -> (f32, f32) {
        let i = y as usize * self.width as usize + x as usize;
        (self.src_x[i], self.src_y[i])
    }
}

/// How samples outside the source raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderPolicy {
    /// Out-of-range taps read the given color.
    Constant([u8; 3]),
    /// Out-of-range taps clamp to the nearest edge pixel.
    Replicate,
}

#[inline]
fn tap(src: &Image, x: i64, y: i64, border: BorderPolicy) -> [u8; 3] {
    let w = src.width() as i64;
    let h = src.height() as i64;
    if x >= 0 && x < w && y >= 0 && y < h {
        return src.pixel(x as u32, y as u32);
    }
    match border {
        BorderPolicy::Constant(c) => c,
        BorderPolicy::Replicate => {
            src.pixel(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32)
        }
    }
}

/// Bilinear sample of `src` at real coordinates `(x, y)`, returned per channel
/// before quantization. Taps outside the raster follow the border policy.
#[inline]
pub fn bilinear_sample(src: &Image, x: f32, y: f32, border: BorderPolicy) -> [f32; 3] {
    let x0 = x.floor();
    let y0 = y.floor();
    let dx = x - x0;
    let dy = y - y0;
    let xi = x0 as i64;
    let yi = y0 as i64;

    let p00 = tap(src, xi, yi, border);
    let p10 = tap(src, xi + 1, yi, border);
    let p01 = tap(src, xi, yi + 1, border);
    let p11 = tap(src, xi + 1, yi + 1, border);

    let w00 = (1.0 - dx) * (1.0 - dy);
    let w10 = dx * (1.0 - dy);
    let w01 = (1.0 - dx) * dy;
    let w11 = dx * dy;

    let mut out = [0.0f32; 3];
    for c in 0..3 {
        out[c] = p00[c] as f32 * w00
            + p10[c] as f32 * w10
            + p01[c] as f32 * w01
            + p11[c] as f32 * w11;
    }
    out
}

#[inline]
pub(crate) fn quantize(v: f32) -> u8 {
    // round half away from zero, then clamp into 8 bits
    v.round().clamp(0.0, 255.0) as u8
}

/// Inverse-mapping warp: `output(y, x)` is the bilinear sample of `src` at
/// `map.source(x, y)`. Output dimensions are the map dimensions.
pub fn remap(src: &Image, map: &CoordMap, border: BorderPolicy) -> Image {
    let width = map.width();
    let mut out = Image::new(width, map.height()).expect("map dims validated on construction");
    out.rows_mut().enumerate().for_each(|(y, row)| {
        for x in 0..width {
            let (sx, sy) = map.source(x, y as u32);
            let s = bilinear_sample(src, sx, sy, border);
            let i = x as usize * 3;
            row[i] = quantize(s[0]);
            row[i + 1] = quantize(s[1]);
            row[i + 2] = quantize(s[2]);
        }
    });
    out
}

/// Per-channel median over a `(2*radius+1)^2` window with replicated borders.
pub fn median_filter(src: &Image, radius: u32) -> Image {
    assert!(radius >= 1, "median radius must be >= 1");
    let (width, height) = src.dimensions();
    let r = radius as i64;
    let mut out = Image::new(width, height).expect("source dims are non-zero");
    out.rows_mut().enumerate().for_each(|(y, row)| {
        let mut window = [
            Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize),
            Vec::new(),
            Vec::new(),
        ];
        window[1] = Vec::with_capacity(window[0].capacity());
        window[2] = Vec::with_capacity(window[0].capacity());
        for x in 0..width {
            for ch in window.iter_mut() {
                ch.clear();
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    let p = tap(src, x as i64 + dx, y as i64 + dy, BorderPolicy::Replicate);
                    window[0].push(p[0]);
                    window[1].push(p[1]);
                    window[2].push(p[2]);
                }
            }
            let mid = window[0].len() / 2;
            let i = x as usize * 3;
            for c in 0..3 {
                window[c].sort_unstable();
                row[i + c] = window[c][mid];
            }
        }
    });
    out
}
