//! Intermediate-view synthesis from one image plus depth.
//!
//! Two paths: a fast depth-proportional horizontal remap (each destination
//! pixel samples `column - depth * offset` of the input), and a real
//! camera model that back-projects through the intrinsics, translates the
//! camera along the baseline, forward-splats with z-buffering and hands
//! dis-occlusion holes to the inpainter.

use rayon::prelude::*;
use thiserror::Error;

use crate::depth::DepthMap;
use crate::inpaint::{telea_inpaint, HoleMask, InpaintError};
use crate::raster::{median_filter, remap, BorderPolicy, CoordMap, Image};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("image is {img_w}x{img_h} but depth is {depth_w}x{depth_h}")]
    DimensionMismatch { img_w: u32, img_h: u32, depth_w: u32, depth_h: u32 },
    #[error("field of view {0} degrees is outside (0, 180)")]
    InvalidFov(f64),
    #[error("depth range [{z_near}, {z_far}] is invalid: need 0 < z_near < z_far")]
    InvalidDepthRange { z_near: f64, z_far: f64 },
    #[error("focal lengths must be positive and finite, got fx={fx} fy={fy}")]
    InvalidIntrinsics { fx: f64, fy: f64 },
    #[error("pose rotation is not a proper orthonormal matrix")]
    InvalidPose,
    #[error("hole filling failed: {0}")]
    Inpaint(#[from] InpaintError),
}

/// Pinhole projection parameters, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, SynthError> {
        if fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0 && cx.is_finite() && cy.is_finite()
        {
            Ok(Self { fx, fy, cx, cy })
        } else {
            Err(SynthError::InvalidIntrinsics { fx, fy })
        }
    }

    /// Symmetric intrinsics for an image, from a horizontal field of view.
    pub fn from_fov(fov_deg: f64, width: u32, height: u32) -> Result<Self, SynthError> {
        let f = estimate_focal(fov_deg, width)?;
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0)
    }
}

/// Camera pose: world-to-camera rotation and translation in scene units.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Validates orthonormality and unit positive determinant to 1e-9.
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, SynthError> {
        const TOL: f64 = 1e-9;
        for row in 0..3 {
            for col in 0..3 {
                // (R^T R)[row][col]
                let dot: f64 = (0..3).map(|k| rotation[k][row] * rotation[k][col]).sum();
                let expected = if row == col { 1.0 } else { 0.0 };
                if (dot - expected).abs() > TOL {
                    return Err(SynthError::InvalidPose);
                }
            }
        }
        let det = rotation[0][0] * (rotation[1][1] * rotation[2][2] - rotation[1][2] * rotation[2][1])
            - rotation[0][1] * (rotation[1][0] * rotation[2][2] - rotation[1][2] * rotation[2][0])
            + rotation[0][2] * (rotation[1][0] * rotation[2][1] - rotation[1][1] * rotation[2][0]);
        if (det - 1.0).abs() > TOL {
            return Err(SynthError::InvalidPose);
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(SynthError::InvalidPose);
        }
        Ok(Self { rotation, translation })
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> &[f64; 3] {
        &self.translation
    }
}

/// Linear map from relative depth to metric Z: depth 1 lands on `z_near`,
/// depth 0 on `z_far`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRange {
    pub z_near: f64,
    pub z_far: f64,
}

impl DepthRange {
    pub fn new(z_near: f64, z_far: f64) -> Result<Self, SynthError> {
        if z_near.is_finite() && z_far.is_finite() && z_near > 0.0 && z_near < z_far {
            Ok(Self { z_near, z_far })
        } else {
            Err(SynthError::InvalidDepthRange { z_near, z_far })
        }
    }

    #[inline]
    fn metric_z(&self, depth: f32) -> f64 {
        self.z_far + depth as f64 * (self.z_near - self.z_far)
    }
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { z_near: 1.0, z_far: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    Fast,
    Real,
}

/// How many views to synthesize and how far apart. `max_offset` is the
/// peak pixel disparity at depth 1 for the fast path, and the scene-unit
/// camera baseline for the real path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRequest {
    pub total_views: u32,
    pub max_offset: f64,
    pub mode: SynthesisMode,
}

/// Signed per-view offsets: a linear ramp symmetric about the center, so
/// the input image sits in the middle of the view fan. A single view gets
/// offset zero.
pub fn view_offsets(total_views: u32, max_offset: f64) -> Vec<f64> {
    assert!(total_views >= 1);
    if total_views == 1 {
        return vec![0.0];
    }
    let half = (total_views - 1) as f64 / 2.0;
    (0..total_views).map(|v| (v as f64 - half) / half * max_offset).collect()
}

/// Destination-indexed map realizing the fast path: rows pass through,
/// columns shift left by `depth * offset`.
pub fn fast_map_from_depth(depth: &DepthMap, offset: f64) -> CoordMap {
    let (w, h) = depth.dimensions();
    CoordMap::from_fn(w, h, |x, y| {
        (x as f32 - depth.value(x, y) * offset as f32, y as f32)
    })
    .expect("depth dimensions are positive")
}

fn check_dims(image: &Image, depth: &DepthMap) -> Result<(), SynthError> {
    if image.dimensions() != depth.dimensions() {
        return Err(SynthError::DimensionMismatch {
            img_w: image.width(),
            img_h: image.height(),
            depth_w: depth.width(),
            depth_h: depth.height(),
        });
    }
    Ok(())
}

/// Fast view fan: one remap per offset, replicate borders. The zero-offset
/// view is the input itself, bit-exact.
pub fn synthesize_fast(
    image: &Image,
    depth: &DepthMap,
    request: &ViewRequest,
) -> Result<Vec<Image>, SynthError> {
    debug_assert_eq!(request.mode, SynthesisMode::Fast);
    check_dims(image, depth)?;
    let offsets = view_offsets(request.total_views, request.max_offset);
    Ok(offsets
        .par_iter()
        .map(|&offset| {
            if offset == 0.0 {
                image.clone()
            } else {
                remap(image, &fast_map_from_depth(depth, offset), BorderPolicy::Replicate)
            }
        })
        .collect())
}

/// Pinhole focal length from a horizontal field of view and image width.
pub fn estimate_focal(fov_deg: f64, image_width_px: u32) -> Result<f64, SynthError> {
    if !(fov_deg.is_finite() && fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(SynthError::InvalidFov(fov_deg));
    }
    Ok(image_width_px as f64 / 2.0 / (fov_deg * std::f64::consts::PI / 360.0).tan())
}

/// One DIBR view: back-project through `k_o`, translate the camera by
/// `offset` along x (virtual rotation stays identity, so the original
/// pose composes away), project through `k_v`, forward-splat with
/// nearest-Z-wins z-buffering. Unwritten pixels come back as the hole
/// mask.
pub fn real_view(
    image: &Image,
    depth: &DepthMap,
    offset: f64,
    k_o: &Intrinsics,
    _r_o: &Pose,
    k_v: &Intrinsics,
    depth_range: DepthRange,
) -> Result<(Image, HoleMask), SynthError> {
    check_dims(image, depth)?;
    DepthRange::new(depth_range.z_near, depth_range.z_far)?;
    let (w, h) = image.dimensions();

    let mut out = Image::new(w, h).expect("image dimensions are positive");
    let mut mask = HoleMask::from_fn(w, h, |_, _| true);
    let mut zbuf = vec![f64::INFINITY; w as usize * h as usize];

    for v in 0..h {
        for u in 0..w {
            let z = depth_range.metric_z(depth.value(u, v));
            let x_cam = z * (u as f64 - k_o.cx) / k_o.fx;
            let y_cam = z * (v as f64 - k_o.cy) / k_o.fy;
            // virtual camera frame: pure translation along the baseline
            let u_virt = k_v.fx * (x_cam + offset) / z + k_v.cx;
            let v_virt = k_v.fy * y_cam / z + k_v.cy;
            let du = u_virt.round();
            let dv = v_virt.round();
            if du < 0.0 || dv < 0.0 || du >= w as f64 || dv >= h as f64 {
                continue;
            }
            let (du, dv) = (du as u32, dv as u32);
            let zi = dv as usize * w as usize + du as usize;
            if z < zbuf[zi] {
                zbuf[zi] = z;
                out.set_pixel(du, dv, image.pixel(u, v));
                mask.set(du, dv, false);
            }
        }
    }
    Ok((out, mask))
}

/// Real-path view fan: symmetric offset pairs around the input view, each
/// hole-filled and median-cleaned when the splat left any gaps, ordered
/// left-to-right by signed offset. For an odd count the center view is the
/// input itself.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_real(
    image: &Image,
    depth: &DepthMap,
    request: &ViewRequest,
    k_o: &Intrinsics,
    r_o: &Pose,
    k_v: &Intrinsics,
    depth_range: DepthRange,
    inpaint_radius: u32,
) -> Result<Vec<Image>, SynthError> {
    let detailed =
        synthesize_real_with_masks(image, depth, request, k_o, r_o, k_v, depth_range, inpaint_radius)?;
    Ok(detailed.into_iter().map(|(view, _)| view).collect())
}

/// Like [`synthesize_real`] but also returns each view's pre-fill hole
/// mask, for debugging dumps.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_real_with_masks(
    image: &Image,
    depth: &DepthMap,
    request: &ViewRequest,
    k_o: &Intrinsics,
    r_o: &Pose,
    k_v: &Intrinsics,
    depth_range: DepthRange,
    inpaint_radius: u32,
) -> Result<Vec<(Image, HoleMask)>, SynthError> {
    debug_assert_eq!(request.mode, SynthesisMode::Real);
    check_dims(image, depth)?;
    DepthRange::new(depth_range.z_near, depth_range.z_far)?;
    let offsets = view_offsets(request.total_views, request.max_offset);
    offsets
        .par_iter()
        .map(|&offset| {
            if offset == 0.0 {
                return Ok((image.clone(), HoleMask::new(image.width(), image.height())));
            }
            let (view, holes) = real_view(image, depth, offset, k_o, r_o, k_v, depth_range)?;
            if holes.any() {
                let filled = telea_inpaint(&view, &holes, inpaint_radius)?;
                Ok((median_filter(&filled, 1), holes))
            } else {
                Ok((view, holes))
            }
        })
        .collect()
}
