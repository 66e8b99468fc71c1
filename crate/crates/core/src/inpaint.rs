//! Dis-occlusion hole filling: fast-marching inpainting in the style of
//! Telea. Arrival times propagate from the hole boundary inward by solving
//! `|grad T| = 1`; each hole pixel is filled with a convex weighted average
//! of nearby known pixels, weighted by direction, distance and level-set
//! proximity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::raster::{quantize, Image};

#[derive(Debug, Error, PartialEq)]
pub enum InpaintError {
    #[error("mask is {mask_w}x{mask_h} but image is {img_w}x{img_h}")]
    DimensionMismatch { mask_w: u32, mask_h: u32, img_w: u32, img_h: u32 },
    #[error("mask covers the whole image, nothing known to propagate from")]
    MaskCoversEverything,
    #[error("eikonal update has no known neighbor")]
    NoKnownNeighbor,
}

/// Per-pixel missing-data flags; `true` marks a pixel to fill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleMask {
    width: u32,
    height: u32,
    flags: Vec<bool>,
}

impl HoleMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, flags: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn<F: FnMut(u32, u32) -> bool>(width: u32, height: u32, mut f: F) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                mask.set(x, y, f(x, y));
            }
        }
        mask
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
    pub fn is_hole(&self, x: u32, y: u32) -> bool {
        self.flags[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, hole: bool) {
        self.flags[y as usize * self.width as usize + x as usize] = hole;
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// White-on-black visualization, for debugging dumps.
    pub fn to_image(&self) -> Image {
        Image::from_fn(self.width, self.height, |x, y| {
            if self.is_hole(x, y) {
                [255, 255, 255]
            } else {
                [0, 0, 0]
            }
        })
        .expect("mask dimensions are positive")
    }
}

/// Fast-marching label of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelLabel {
    /// Value known and arrival time frozen.
    Known,
    /// On the moving front, in the priority queue.
    Band,
    /// Hole interior, not yet reached.
    Inside,
}

/// One eikonal update from up to four neighbor samples ordered
/// `[left, right, up, down]`. Solves the two-axis quadratic upwind form of
/// `|grad T| = 1`, falling back to `min(T) + 1` when the discriminant is
/// negative or the quadratic root is not upwind.
pub fn solve_eikonal_step(
    neighbors: [Option<(f64, PixelLabel)>; 4],
) -> Result<f64, InpaintError> {
    let usable = |n: Option<(f64, PixelLabel)>| match n {
        Some((t, PixelLabel::Known)) | Some((t, PixelLabel::Band)) => Some(t),
        _ => None,
    };
    let axis_min = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    };
    let tx = axis_min(usable(neighbors[0]), usable(neighbors[1]));
    let ty = axis_min(usable(neighbors[2]), usable(neighbors[3]));

    match (tx, ty) {
        (Some(tx), Some(ty)) => {
            let diff = tx - ty;
            let disc = 2.0 - diff * diff;
            if disc >= 0.0 && diff.abs() <= 1.0 {
                Ok((tx + ty + disc.sqrt()) / 2.0)
            } else {
                Ok(tx.min(ty) + 1.0)
            }
        }
        (Some(t), None) | (None, Some(t)) => Ok(t + 1.0),
        (None, None) => Err(InpaintError::NoKnownNeighbor),
    }
}

struct FrontPixel {
    time: f64,
    x: u32,
    y: u32,
}

impl PartialEq for FrontPixel {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time
    }
}

impl Eq for FrontPixel {}

impl PartialOrd for FrontPixel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FrontPixel {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we need smallest time first
        other.time.partial_cmp(&self.time).unwrap_or(Ordering::Equal)
    }
}

/// Fast-marching state over one image: labels, arrival times and the
/// priority queue of front pixels.
struct FmmState {
    width: u32,
    height: u32,
    label: Vec<PixelLabel>,
    time: Vec<f64>,
    front: BinaryHeap<FrontPixel>,
}

impl FmmState {
    fn seed(mask: &HoleMask) -> Self {
        let (width, height) = mask.dimensions();
        let n = width as usize * height as usize;
        let mut label = vec![PixelLabel::Known; n];
        let mut time = vec![0.0f64; n];
        for y in 0..height {
            for x in 0..width {
                if mask.is_hole(x, y) {
                    label[(y * width + x) as usize] = PixelLabel::Inside;
                    time[(y * width + x) as usize] = f64::INFINITY;
                }
            }
        }
        let mut state = Self { width, height, label, time, front: BinaryHeap::new() };
        // known pixels touching a hole form the initial front at T = 0
        for y in 0..height {
            for x in 0..width {
                if mask.is_hole(x, y) {
                    continue;
                }
                let touches_hole = state
                    .neighbors(x, y)
                    .into_iter()
                    .flatten()
                    .any(|(nx, ny)| mask.is_hole(nx, ny));
                if touches_hole {
                    state.label[(y * width + x) as usize] = PixelLabel::Band;
                    state.front.push(FrontPixel { time: 0.0, x, y });
                }
            }
        }
        state
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    /// 4-neighborhood ordered [left, right, up, down].
    fn neighbors(&self, x: u32, y: u32) -> [Option<(u32, u32)>; 4] {
        [
            (x > 0).then(|| (x - 1, y)),
            (x + 1 < self.width).then(|| (x + 1, y)),
            (y > 0).then(|| (x, y - 1)),
            (y + 1 < self.height).then(|| (x, y + 1)),
        ]
    }

    fn solve_at(&self, x: u32, y: u32) -> Result<f64, InpaintError> {
        let samples = self
            .neighbors(x, y)
            .map(|n| n.map(|(nx, ny)| (self.time[self.idx(nx, ny)], self.label[self.idx(nx, ny)])));
        solve_eikonal_step(samples)
    }

    /// Arrival-time gradient at a pixel, using frozen neighbors only:
    /// central differences where both sides are known, one-sided otherwise,
    /// zero where isolated.
    fn time_gradient(&self, x: u32, y: u32) -> (f64, f64) {
        let t_here = self.time[self.idx(x, y)];
        let known = |n: Option<(u32, u32)>| -> Option<f64> {
            let (nx, ny) = n?;
            (self.label[self.idx(nx, ny)] == PixelLabel::Known)
                .then(|| self.time[self.idx(nx, ny)])
        };
        let [left, right, up, down] = self.neighbors(x, y);
        let component = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(l), Some(h)) => (h - l) / 2.0,
            (None, Some(h)) => h - t_here,
            (Some(l), None) => t_here - l,
            (None, None) => 0.0,
        };
        (component(known(left), known(right)), component(known(up), known(down)))
    }
}

/// Fill masked pixels by marching inward from the hole boundary. Unmasked
/// pixels are preserved bit-exactly; every filled channel is a convex
/// combination of known samples within `radius`.
pub fn telea_inpaint(
    image: &Image,
    mask: &HoleMask,
    radius: u32,
) -> Result<Image, InpaintError> {
    assert!(radius >= 1, "inpaint radius must be >= 1");
    if mask.dimensions() != image.dimensions() {
        return Err(InpaintError::DimensionMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            img_w: image.width(),
            img_h: image.height(),
        });
    }
    if !mask.any() {
        return Ok(image.clone());
    }
    if mask.count() == image.width() as usize * image.height() as usize {
        return Err(InpaintError::MaskCoversEverything);
    }

    let mut out = image.clone();
    let mut state = FmmState::seed(mask);
    let mut last_popped = 0.0f64;

    while let Some(FrontPixel { time, x, y }) = state.front.pop() {
        let here = state.idx(x, y);
        if state.label[here] != PixelLabel::Band || time > state.time[here] + 1e-12 {
            continue; // stale queue entry
        }
        debug_assert!(
            time + 1e-9 >= last_popped,
            "fast-marching front must advance monotonically: {time} after {last_popped}"
        );
        last_popped = last_popped.max(time);
        state.label[here] = PixelLabel::Known;

        for neighbor in state.neighbors(x, y).into_iter().flatten() {
            let (nx, ny) = neighbor;
            let ni = state.idx(nx, ny);
            if state.label[ni] == PixelLabel::Known {
                continue;
            }
            let solved = state.solve_at(nx, ny).expect("popped neighbor is known");
            if state.label[ni] == PixelLabel::Inside {
                state.time[ni] = solved;
                fill_pixel(&mut out, &state, nx, ny, radius);
                state.label[ni] = PixelLabel::Band;
                state.front.push(FrontPixel { time: solved, x: nx, y: ny });
            } else if solved < state.time[ni] - 1e-12 {
                state.time[ni] = solved;
                state.front.push(FrontPixel { time: solved, x: nx, y: ny });
            }
        }
    }
    Ok(out)
}

/// Telea weighted average over known pixels within `radius` of `(x, y)`.
fn fill_pixel(out: &mut Image, state: &FmmState, x: u32, y: u32, radius: u32) {
    let (gx, gy) = state.time_gradient(x, y);
    let g_norm = (gx * gx + gy * gy).sqrt();
    let t_here = state.time[state.idx(x, y)];
    let r = radius as i64;

    let mut weight_sum = 0.0f64;
    let mut color_sum = [0.0f64; 3];
    for dy in -r..=r {
        for dx in -r..=r {
            if dx == 0 && dy == 0 {
                continue;
            }
            let sx = x as i64 + dx;
            let sy = y as i64 + dy;
            if sx < 0 || sy < 0 || sx >= state.width as i64 || sy >= state.height as i64 {
                continue;
            }
            let dist_sq = (dx * dx + dy * dy) as f64;
            if dist_sq > (r * r) as f64 {
                continue;
            }
            let si = state.idx(sx as u32, sy as u32);
            if state.label[si] == PixelLabel::Inside {
                // unfilled hole pixels carry no usable value yet; banded
                // boundary pixels and already-filled pixels do
                continue;
            }
            let dist = dist_sq.sqrt();
            // vector from the sample toward the pixel being filled
            let vx = -dx as f64;
            let vy = -dy as f64;
            let direction = if g_norm > 1e-6 {
                ((vx * gx + vy * gy) / (g_norm * dist)).abs().max(1e-6)
            } else {
                1.0
            };
            let distance = 1.0 / dist_sq.max(1e-6);
            let level = 1.0 / (1.0 + (state.time[si] - t_here).abs());
            let w = direction * distance * level;
            let rgb = out.pixel(sx as u32, sy as u32);
            for c in 0..3 {
                color_sum[c] += w * rgb[c] as f64;
            }
            weight_sum += w;
        }
    }

    debug_assert!(weight_sum > 0.0, "a promoted pixel always has a known neighbor in range");
    let mut filled = [0u8; 3];
    for c in 0..3 {
        filled[c] = quantize((color_sum[c] / weight_sum) as f32);
    }
    out.set_pixel(x, y, filled);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eikonal_one_sided_update() {
        let t = solve_eikonal_step([Some((0.0, PixelLabel::Known)), None, None, None]).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn eikonal_two_axis_quadratic() {
        let t = solve_eikonal_step([
            Some((0.0, PixelLabel::Known)),
            None,
            Some((0.0, PixelLabel::Known)),
            None,
        ])
        .unwrap();
        assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn eikonal_ignores_inside_neighbors() {
        let t = solve_eikonal_step([
            Some((f64::INFINITY, PixelLabel::Inside)),
            Some((2.0, PixelLabel::Band)),
            None,
            None,
        ])
        .unwrap();
        assert_eq!(t, 3.0);
    }

    #[test]
    fn eikonal_no_neighbor_errors() {
        assert_eq!(
            solve_eikonal_step([None; 4]).unwrap_err(),
            InpaintError::NoKnownNeighbor
        );
        assert_eq!(
            solve_eikonal_step([Some((1.0, PixelLabel::Inside)), None, None, None]).unwrap_err(),
            InpaintError::NoKnownNeighbor
        );
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = Image::from_fn(8, 8, |x, y| [(x * 30) as u8, (y * 30) as u8, 99]).unwrap();
        let out = telea_inpaint(&img, &HoleMask::new(8, 8), 3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_restored_exactly() {
        let img = Image::filled(16, 16, [120, 45, 201]).unwrap();
        let mask = HoleMask::from_fn(16, 16, |x, y| (4..10).contains(&x) && (5..11).contains(&y));
        let out = telea_inpaint(&img, &mask, 3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn ramp_fill_stays_within_contributing_band() {
        // horizontal ramp with a 3x3 hole, radius 3: every fill is a convex
        // combination, so it stays inside the range of the known pixels the
        // fill can draw from (the band within the sampling radius)
        let img = Image::from_fn(16, 16, |x, _| [(x * 15) as u8; 3]).unwrap();
        let mask = HoleMask::from_fn(16, 16, |x, y| (6..9).contains(&x) && (6..9).contains(&y));
        let radius = 3u32;
        let out = telea_inpaint(&img, &mask, radius).unwrap();

        let mut band_min = 255u8;
        let mut band_max = 0u8;
        for y in 0..16i64 {
            for x in 0..16i64 {
                if mask.is_hole(x as u32, y as u32) {
                    continue;
                }
                let near_hole = (6..9i64).any(|hx| {
                    (6..9i64).any(|hy| {
                        let (dx, dy) = (x - hx, y - hy);
                        dx * dx + dy * dy <= (radius * radius) as i64
                    })
                });
                if near_hole {
                    let v = img.pixel(x as u32, y as u32)[0];
                    band_min = band_min.min(v);
                    band_max = band_max.max(v);
                }
            }
        }
        for y in 6..9 {
            for x in 6..9 {
                let v = out.pixel(x, y)[0];
                assert!(
                    v >= band_min && v <= band_max,
                    "fill {v} outside contributing band [{band_min}, {band_max}]"
                );
            }
        }
        // the hole center should land near the true ramp value
        let center = out.pixel(7, 7)[0] as i32;
        assert!((center - 105).abs() <= 25, "center fill {center} far from ramp value 105");
    }

    #[test]
    fn unmasked_pixels_preserved_bit_exactly() {
        let img = Image::from_fn(20, 14, |x, y| {
            [((x * 13 + y * 7) % 256) as u8, ((x * 31) % 256) as u8, ((y * 17) % 256) as u8]
        })
        .unwrap();
        let mask = HoleMask::from_fn(20, 14, |x, y| (x * 5 + y * 3) % 11 == 0);
        let out = telea_inpaint(&img, &mask, 2).unwrap();
        for y in 0..14 {
            for x in 0..20 {
                if !mask.is_hole(x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn full_mask_rejected() {
        let img = Image::new(4, 4).unwrap();
        let mask = HoleMask::from_fn(4, 4, |_, _| true);
        assert_eq!(
            telea_inpaint(&img, &mask, 1).unwrap_err(),
            InpaintError::MaskCoversEverything
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let img = Image::new(4, 4).unwrap();
        let mask = HoleMask::new(5, 4);
        assert!(matches!(
            telea_inpaint(&img, &mask, 1),
            Err(InpaintError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mask_visualization_marks_holes_white() {
        let mask = HoleMask::from_fn(3, 2, |x, _| x == 1);
        let img = mask.to_image();
        assert_eq!(img.pixel(1, 0), [255, 255, 255]);
        assert_eq!(img.pixel(0, 0), [0, 0, 0]);
    }
}
