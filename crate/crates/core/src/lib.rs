//! Convert a single RGB image (or frame sequence) plus a depth map into a
//! quilt of synthesized viewpoints and render it into a native light-field
//! image for slanted lenticular displays.
//!
//! The crate is organized along the processing stages:
//!
//! - [`calibration`]: per-device lenticular geometry files
//! - [`raster`]: RGB images, bilinear remapping, median filter, PNG I/O
//! - [`depth`]: depth-map loading and normalization
//! - [`viewsynth`]: fast and real (DIBR) intermediate-view synthesis
//! - [`inpaint`]: fast-marching hole filling for the real path
//! - [`quilt`]: view grid assembly and extraction
//! - [`lut`]: the per-subpixel quilt-coordinate lookup table and its
//!   `.map` binary format
//! - [`native`]: quilt to native rendering, table-driven or direct
//! - [`pipeline`]: end-to-end photo/views/quilt/frames conversions

pub mod calibration;
pub mod depth;
pub mod inpaint;
pub mod lut;
pub mod native;
pub mod pipeline;
pub mod quilt;
pub mod raster;
pub mod viewsynth;

pub use calibration::{parse_calibration, serialize_calibration, CalibrationProfile};
pub use depth::{load_depth, normalize_depth, DepthMap, DepthProvider, ModelDescriptor};
pub use inpaint::{solve_eikonal_step, telea_inpaint, HoleMask};
pub use lut::{build_lut, deserialize_lut, serialize_lut, view_fraction, LookupTable, LutBuildRequest};
pub use native::{benchmark_render, render_native_direct, render_native_lut, BenchReport};
pub use quilt::{assemble_quilt, extract_tile, QuiltSpec};
pub use raster::{median_filter, remap, BorderPolicy, CoordMap, Image};
pub use viewsynth::{
    estimate_focal, fast_map_from_depth, real_view, synthesize_fast, synthesize_real, DepthRange,
    Intrinsics, Pose, SynthesisMode, ViewRequest,
};
