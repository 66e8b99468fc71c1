//! Per-subpixel lookup table: precomputes, serializes and reloads the
//! mapping from every native-image subpixel to its source coordinate in
//! the quilt, so rendering reduces to array indexing.
//!
//! The mapping itself assigns subpixel `(i, j)` the fractional view number
//!
//! ```text
//! total_views * mod_euclid(i - center_offset - subp * j * slope, pitch) / pitch
//! ```
//!
//! which is quantized by floor to a view index, located in the quilt grid,
//! and resolved to a tile-interior pixel by proportional nearest-integer
//! mapping.

use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::quilt::QuiltSpec;

/// First 8 bytes of every `.map` file.
pub const LUT_MAGIC: &[u8; 8] = b"A3DLUT01";

/// Header: magic plus six little-endian u32 fields.
pub const LUT_HEADER_LEN: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum LutError {
    #[error("quilt raster {width}x{height} exceeds the 16-bit coordinate range")]
    QuiltTooLarge { width: u32, height: u32 },
    #[error("bad magic: not a lookup-table file")]
    BadMagic,
    #[error("lookup-table data truncated: need {needed} bytes, got {got}")]
    TruncatedFile { needed: usize, got: usize },
    #[error("lookup-table dimensions are inconsistent: {0}")]
    DimensionMismatch(String),
}

/// What to precompute: a device profile plus the quilt layout it will map.
#[derive(Debug, Clone, PartialEq)]
pub struct LutBuildRequest {
    pub profile: CalibrationProfile,
    pub quilt: QuiltSpec,
}

/// Three per-channel matrices of quilt source coordinates, one `(x, y)`
/// pair per native pixel. Immutable once built; share freely across
/// threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    native_width_px: u32,
    native_height_px: u32,
    quilt_width_px: u32,
    quilt_height_px: u32,
    grid_cols: u32,
    grid_rows: u32,
    /// R, G, B matrices, row-major, interleaved x,y per native pixel.
    channels: [Vec<u16>; 3],
}

impl LookupTable {
    pub fn native_width_px(&self) -> u32 {
        self.native_width_px
    }

    pub fn native_height_px(&self) -> u32 {
        self.native_height_px
    }

    pub fn quilt_width_px(&self) -> u32 {
        self.quilt_width_px
    }

    pub fn quilt_height_px(&self) -> u32 {
        self.quilt_height_px
    }

    pub fn grid_cols(&self) -> u32 {
        self.grid_cols
    }

    pub fn grid_rows(&self) -> u32 {
        self.grid_rows
    }

    /// Quilt source coordinate for channel `c` of native pixel `(x, y)`.
    #[inline]
    pub fn entry(&self, c: usize, x: u32, y: u32) -> (u16, u16) {
        let i = (y as usize * self.native_width_px as usize + x as usize) * 2;
        let ch = &self.channels[c];
        (ch[i], ch[i + 1])
    }

    pub fn channel(&self, c: usize) -> &[u16] {
        &self.channels[c]
    }

    /// Reconstruct the quilt layout recorded in the header.
    pub fn quilt_spec(&self) -> QuiltSpec {
        QuiltSpec::new(
            self.grid_cols,
            self.grid_rows,
            self.quilt_width_px / self.grid_cols,
            self.quilt_height_px / self.grid_rows,
        )
    }
}

/// Fractional view number of subpixel `(i, j)`, in `[0, total_views)`.
///
/// Uses the Euclidean (always non-negative) modulo so that negative phases
/// from the slant term wrap back into `[0, pitch)`.
pub fn view_fraction(i: u64, j: u32, profile: &CalibrationProfile, total_views: u32) -> f64 {
    let phase = i as f64
        - profile.center_offset
        - profile.subpixels_per_pixel as f64 * j as f64 * profile.slope;
    let mut m = phase.rem_euclid(profile.pitch_px);
    if m >= profile.pitch_px {
        // rem_euclid can round up to the modulus itself; that phase is 0
        m = 0.0;
    }
    let vf = total_views as f64 * m / profile.pitch_px;
    if vf >= total_views as f64 {
        0.0
    } else {
        vf
    }
}

/// Proportional nearest-integer mapping of `p` in a `src`-long axis onto a
/// `dst`-long axis, endpoints to endpoints, clamped to the target range.
#[inline]
fn proportional(p: u32, src: u32, dst: u32) -> u32 {
    if src <= 1 || dst <= 1 {
        return 0;
    }
    let t = p as f64 * (dst - 1) as f64 / (src - 1) as f64;
    (t.round() as u32).min(dst - 1)
}

/// Steps (a)-(d) for one subpixel: view fraction, floor quantization, tile
/// lookup, tile-interior mapping. Shared by the table builder and the
/// direct renderer so both realize the identical mapping.
pub(crate) fn quilt_source_for_subpixel(
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    x_n: u32,
    y_n: u32,
    c: u32,
) -> (u16, u16) {
    let total = spec.total_views();
    let j = if profile.flip_y {
        profile.screen_height_px - 1 - y_n
    } else {
        y_n
    };
    let i = profile.subpixels_per_pixel as u64 * x_n as u64 + c as u64;
    let vf = view_fraction(i, j, profile, total);
    let mut k = (vf.floor() as i64).clamp(0, total as i64 - 1) as u32;
    if profile.flip_x {
        k = total - 1 - k;
    }
    let (ox, oy) = spec.tile_origin(k);
    let xt = proportional(x_n, profile.screen_width_px, spec.tile_width_px);
    let yt = proportional(j, profile.screen_height_px, spec.tile_height_px);
    ((ox + xt) as u16, (oy + yt) as u16)
}

/// Precompute the full table for one device/quilt configuration. Built once
/// and reused for every frame rendered to that device.
pub fn build_lut(request: &LutBuildRequest) -> Result<LookupTable, LutError> {
    let profile = &request.profile;
    let spec = &request.quilt;
    let quilt_w = spec.quilt_width_px();
    let quilt_h = spec.quilt_height_px();
    if quilt_w >= 1 << 16 || quilt_h >= 1 << 16 {
        return Err(LutError::QuiltTooLarge { width: quilt_w, height: quilt_h });
    }

    let nw = profile.screen_width_px as usize;
    let nh = profile.screen_height_px as usize;
    let channels = [0u32, 1, 2].map(|c| {
        let mut matrix = vec![0u16; nh * nw * 2];
        matrix
            .par_chunks_mut(nw * 2)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..nw {
                    let (qx, qy) =
                        quilt_source_for_subpixel(profile, spec, x as u32, y as u32, c);
                    row[x * 2] = qx;
                    row[x * 2 + 1] = qy;
                }
            });
        matrix
    });

    Ok(LookupTable {
        native_width_px: profile.screen_width_px,
        native_height_px: profile.screen_height_px,
        quilt_width_px: quilt_w,
        quilt_height_px: quilt_h,
        grid_cols: spec.grid_cols,
        grid_rows: spec.grid_rows,
        channels,
    })
}

/// Fixed little-endian binary encoding of a table, independent of host
/// endianness.
pub fn serialize_lut(table: &LookupTable) -> Vec<u8> {
    let per_channel = table.channels[0].len();
    let mut out = Vec::with_capacity(LUT_HEADER_LEN + 3 * per_channel * 2);
    out.extend_from_slice(LUT_MAGIC);
    for v in [
        table.native_width_px,
        table.native_height_px,
        table.quilt_width_px,
        table.quilt_height_px,
        table.grid_cols,
        table.grid_rows,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for channel in &table.channels {
        for &entry in channel {
            out.extend_from_slice(&entry.to_le_bytes());
        }
    }
    out
}

fn read_u32_le(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("bounds checked"))
}

pub fn deserialize_lut(bytes: &[u8]) -> Result<LookupTable, LutError> {
    if bytes.len() < LUT_MAGIC.len() || &bytes[..LUT_MAGIC.len()] != LUT_MAGIC {
        return Err(LutError::BadMagic);
    }
    if bytes.len() < LUT_HEADER_LEN {
        return Err(LutError::TruncatedFile { needed: LUT_HEADER_LEN, got: bytes.len() });
    }
    let native_width_px = read_u32_le(bytes, 8);
    let native_height_px = read_u32_le(bytes, 12);
    let quilt_width_px = read_u32_le(bytes, 16);
    let quilt_height_px = read_u32_le(bytes, 20);
    let grid_cols = read_u32_le(bytes, 24);
    let grid_rows = read_u32_le(bytes, 28);

    if native_width_px == 0
        || native_height_px == 0
        || quilt_width_px == 0
        || quilt_height_px == 0
        || grid_cols == 0
        || grid_rows == 0
    {
        return Err(LutError::DimensionMismatch("zero dimension in header".into()));
    }
    if quilt_width_px >= 1 << 16 || quilt_height_px >= 1 << 16 {
        return Err(LutError::DimensionMismatch(
            "quilt dimensions exceed the 16-bit coordinate range".into(),
        ));
    }
    if !quilt_width_px.is_multiple_of(grid_cols) || !quilt_height_px.is_multiple_of(grid_rows) {
        return Err(LutError::DimensionMismatch(
            "quilt raster is not divisible by the grid".into(),
        ));
    }

    let per_channel = native_width_px as usize * native_height_px as usize * 2;
    let needed = LUT_HEADER_LEN + 3 * per_channel * 2;
    if bytes.len() < needed {
        return Err(LutError::TruncatedFile { needed, got: bytes.len() });
    }
    if bytes.len() > needed {
        return Err(LutError::DimensionMismatch(format!(
            "{} trailing bytes after the channel matrices",
            bytes.len() - needed
        )));
    }

    let mut channels: [Vec<u16>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut offset = LUT_HEADER_LEN;
    for channel in channels.iter_mut() {
        let mut matrix = Vec::with_capacity(per_channel);
        for n in 0..per_channel {
            let lo = bytes[offset + n * 2] as u16;
            let hi = bytes[offset + n * 2 + 1] as u16;
            matrix.push(lo | (hi << 8));
        }
        offset += per_channel * 2;
        matrix.chunks_exact(2).try_for_each(|pair| {
            if (pair[0] as u32) < quilt_width_px && (pair[1] as u32) < quilt_height_px {
                Ok(())
            } else {
                Err(LutError::DimensionMismatch(format!(
                    "entry ({}, {}) outside the {}x{} quilt",
                    pair[0], pair[1], quilt_width_px, quilt_height_px
                )))
            }
        })?;
        *channel = matrix;
    }

    Ok(LookupTable {
        native_width_px,
        native_height_px,
        quilt_width_px,
        quilt_height_px,
        grid_cols,
        grid_rows,
        channels,
    })
}
