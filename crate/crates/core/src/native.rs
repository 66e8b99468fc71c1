//! Native-image rendering: map a quilt onto the panel raster either through
//! the precomputed lookup table (the production path) or by evaluating the
//! subpixel mapping on the fly (the reference path and benchmark baseline).

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::lut::{quilt_source_for_subpixel, LookupTable};
use crate::quilt::QuiltSpec;
use crate::raster::Image;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("quilt is {got_w}x{got_h} but the mapping expects {want_w}x{want_h}")]
    DimensionMismatch { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
}

/// Render through the lookup table: every output subpixel is one indexed
/// read from the quilt.
pub fn render_native_lut(quilt: &Image, table: &LookupTable) -> Result<Image, RenderError> {
    if quilt.dimensions() != (table.quilt_width_px(), table.quilt_height_px()) {
        return Err(RenderError::DimensionMismatch {
            got_w: quilt.width(),
            got_h: quilt.height(),
            want_w: table.quilt_width_px(),
            want_h: table.quilt_height_px(),
        });
    }
    let width = table.native_width_px();
    let mut out = Image::new(width, table.native_height_px())
        .expect("table dimensions are positive");
    out.rows_mut().enumerate().for_each(|(y, row)| {
        for x in 0..width {
            let i = x as usize * 3;
            let mut px = [0u8; 3];
            for (c, slot) in px.iter_mut().enumerate() {
                let (qx, qy) = table.entry(c, x, y as u32);
                *slot = quilt.pixel(qx as u32, qy as u32)[c];
            }
            row[i..i + 3].copy_from_slice(&px);
        }
    });
    Ok(out)
}

/// Render by evaluating the subpixel mapping per pixel, no precomputation.
/// Semantically identical to the table path; kept as its oracle and as the
/// benchmark baseline.
pub fn render_native_direct(
    quilt: &Image,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
) -> Result<Image, RenderError> {
    if quilt.dimensions() != (spec.quilt_width_px(), spec.quilt_height_px()) {
        return Err(RenderError::DimensionMismatch {
            got_w: quilt.width(),
            got_h: quilt.height(),
            want_w: spec.quilt_width_px(),
            want_h: spec.quilt_height_px(),
        });
    }
    let width = profile.screen_width_px;
    let mut out = Image::new(width, profile.screen_height_px)
        .expect("profile dimensions are positive");
    out.rows_mut().enumerate().for_each(|(y, row)| {
        for x in 0..width {
            let i = x as usize * 3;
            for c in 0..3u32 {
                let (qx, qy) = quilt_source_for_subpixel(profile, spec, x, y as u32, c);
                row[i + c as usize] = quilt.pixel(qx as u32, qy as u32)[c as usize];
            }
        }
    });
    Ok(out)
}

/// Median wall times of the two render paths and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub lut_ms: f64,
    pub direct_ms: f64,
    /// direct over lut; above 1 means the table is paying off.
    pub ratio: f64,
}

impl BenchReport {
    pub fn csv_line(&self) -> String {
        format!("{:.3},{:.3},{:.3}", self.lut_ms, self.direct_ms, self.ratio)
    }
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    samples[samples.len() / 2]
}

/// Time both render paths over `iterations` runs each and report medians.
pub fn benchmark_render(
    quilt: &Image,
    table: &LookupTable,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    iterations: u32,
) -> Result<BenchReport, RenderError> {
    assert!(iterations >= 3, "need at least 3 iterations for a stable median");
    let mut lut_times = Vec::with_capacity(iterations as usize);
    let mut direct_times = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        let start = Instant::now();
        let rendered = render_native_lut(quilt, table)?;
        lut_times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(&rendered);

        let start = Instant::now();
        let rendered = render_native_direct(quilt, profile, spec)?;
        direct_times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(&rendered);
    }
    let lut_ms = median(&mut lut_times);
    let direct_ms = median(&mut direct_times);
    let ratio = direct_ms / lut_ms.max(1e-6);
    Ok(BenchReport { lut_ms, direct_ms, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::{build_lut, LutBuildRequest};

    fn profile(pitch: f64, slope: f64, center: f64, w: u32, h: u32) -> CalibrationProfile {
        CalibrationProfile {
            pitch_px: pitch,
            slope,
            center_offset: center,
            screen_width_px: w,
            screen_height_px: h,
            subpixels_per_pixel: 3,
            flip_x: false,
            flip_y: false,
        }
    }

    fn noise_quilt(spec: &QuiltSpec) -> Image {
        Image::from_fn(spec.quilt_width_px(), spec.quilt_height_px(), |x, y| {
            [
                ((x * 31 + y * 17) % 256) as u8,
                ((x * 7 + y * 3) % 256) as u8,
                ((x + y * 11) % 256) as u8,
            ]
        })
        .unwrap()
    }

    #[test]
    fn lut_and_direct_paths_agree() {
        let p = profile(5.37, -0.42, 0.8, 32, 24);
        let spec = QuiltSpec::new(3, 2, 10, 8);
        let quilt = noise_quilt(&spec);
        let table = build_lut(&LutBuildRequest { profile: p.clone(), quilt: spec }).unwrap();
        let via_lut = render_native_lut(&quilt, &table).unwrap();
        let direct = render_native_direct(&quilt, &p, &spec).unwrap();
        assert_eq!(via_lut, direct);
    }

    #[test]
    fn single_view_renders_resampled_tile() {
        let p = profile(6.0, 0.3, 0.1, 16, 12);
        let spec = QuiltSpec::new(1, 1, 8, 6);
        let quilt = noise_quilt(&spec);
        let table = build_lut(&LutBuildRequest { profile: p.clone(), quilt: spec }).unwrap();
        let native = render_native_lut(&quilt, &table).unwrap();
        assert_eq!(native, render_native_direct(&quilt, &p, &spec).unwrap());
        // corners of the native sample the tile corners
        assert_eq!(native.pixel(0, 0), quilt.pixel(0, 0));
        assert_eq!(native.pixel(15, 11), quilt.pixel(7, 5));
    }

    #[test]
    fn zero_slope_integer_pitch_makes_vertical_stripes() {
        // pitch spans exactly total_views subpixels: with slope 0 each
        // subpixel column belongs to view (i mod total) and the native
        // decomposes into vertical view stripes
        let p = profile(4.0, 0.0, 0.0, 12, 6);
        let spec = QuiltSpec::new(2, 2, 12, 6);
        let quilt = noise_quilt(&spec);
        let native = render_native_direct(&quilt, &p, &spec).unwrap();
        for y in 0..6u32 {
            for x in 0..12u32 {
                for c in 0..3u32 {
                    let i = 3 * x + c;
                    let k = i % 4;
                    let (ox, oy) = spec.tile_origin(k);
                    let tx = (x as f64 * 11.0 / 11.0).round() as u32;
                    let ty = (y as f64 * 5.0 / 5.0).round() as u32;
                    let expected = quilt.pixel(ox + tx, oy + ty)[c as usize];
                    assert_eq!(native.pixel(x, y)[c as usize], expected);
                }
            }
        }
    }

    #[test]
    fn quilt_dimension_mismatch_rejected() {
        let p = profile(5.0, 0.0, 0.0, 8, 8);
        let spec = QuiltSpec::new(2, 2, 4, 4);
        let table = build_lut(&LutBuildRequest { profile: p.clone(), quilt: spec }).unwrap();
        let wrong = Image::new(9, 8).unwrap();
        assert!(matches!(
            render_native_lut(&wrong, &table),
            Err(RenderError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            render_native_direct(&wrong, &p, &spec),
            Err(RenderError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rendering_is_deterministic_across_worker_counts() {
        let p = profile(7.13, 0.21, 0.45, 20, 16);
        let spec = QuiltSpec::new(2, 3, 6, 4);
        let quilt = noise_quilt(&spec);
        let table = build_lut(&LutBuildRequest { profile: p, quilt: spec }).unwrap();
        let parallel = render_native_lut(&quilt, &table).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| render_native_lut(&quilt, &table).unwrap());
        assert_eq!(parallel, single);
    }

    #[test]
    fn benchmark_reports_finite_ratio_on_tiny_config() {
        let p = profile(3.5, 0.2, 0.0, 8, 8);
        let spec = QuiltSpec::new(2, 1, 4, 8);
        let quilt = noise_quilt(&spec);
        let table = build_lut(&LutBuildRequest { profile: p.clone(), quilt: spec }).unwrap();
        let report = benchmark_render(&quilt, &table, &p, &spec, 3).unwrap();
        assert!(report.ratio.is_finite());
        assert!(report.lut_ms >= 0.0 && report.direct_ms >= 0.0);
        let line = report.csv_line();
        assert_eq!(line.split(',').count(), 3);
    }
}
