//! End-to-end conversions composing all stages: photo to native, sorted
//! views to native, quilt to native, and frame-sequence (video) variants.
//! Every stage failure is tagged with the stage name and the input it
//! choked on.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error as ThisError;

use crate::calibration::{serialize_calibration, CalibrationProfile};
use crate::depth::{load_depth, DepthProvider};
use crate::lut::{build_lut, deserialize_lut, serialize_lut, LookupTable, LutBuildRequest};
use crate::native::render_native_lut;
use crate::quilt::{assemble_quilt, extract_tile, QuiltSpec};
use crate::raster::Image;
use crate::viewsynth::{
    synthesize_fast, synthesize_real_with_masks, DepthRange, Intrinsics, Pose, SynthesisMode,
    ViewRequest,
};

#[derive(Debug, ThisError)]
pub enum PipelineError {
    #[error("no lookup table at {expected}; build one first or enable map building")]
    MapNotFound { expected: PathBuf },
    #[error("lookup table {path} does not match this calibration/quilt configuration: {reason}")]
    StaleMap { path: PathBuf, reason: String },
    #[error("no PNG frames found in {dir}")]
    NoFrames { dir: PathBuf },
    #[error("{stage} stage failed on {input}: {source}")]
    Stage {
        stage: &'static str,
        input: String,
        #[source]
        source: Box<dyn Error + Send + Sync>,
    },
}

fn stage<E: Error + Send + Sync + 'static>(
    name: &'static str,
    input: impl Into<String>,
) -> impl FnOnce(E) -> PipelineError {
    let input = input.into();
    move |source| PipelineError::Stage { stage: name, input, source: Box::new(source) }
}

/// Knobs shared by the photo and frame pipelines.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub mode: SynthesisMode,
    /// Peak disparity in pixels (fast) or camera baseline in scene units (real).
    pub max_offset: f64,
    /// Horizontal field of view used to estimate intrinsics for the real path.
    pub fov_deg: f64,
    pub depth_range: DepthRange,
    pub inpaint_radius: u32,
    /// Treat loaded depth as inverse (near = dark) and flip it.
    pub invert_depth: bool,
    /// Also write the assembled quilt here.
    pub write_quilt: Option<PathBuf>,
    /// Write per-view hole masks into this directory (real mode).
    pub dump_masks: Option<PathBuf>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            mode: SynthesisMode::Fast,
            max_offset: 5.0,
            fov_deg: 60.0,
            depth_range: DepthRange::default(),
            inpaint_radius: 3,
            invert_depth: false,
            write_quilt: None,
            dump_masks: None,
        }
    }
}

/// Where the lookup table comes from: an explicit `.map` file, or a cache
/// directory keyed by a content hash of (calibration, quilt spec).
#[derive(Debug, Clone)]
pub struct MapPolicy {
    pub explicit_path: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub build_if_missing: bool,
}

impl MapPolicy {
    pub fn explicit(path: impl Into<PathBuf>) -> Self {
        Self { explicit_path: Some(path.into()), cache_dir: default_map_dir(), build_if_missing: false }
    }

    pub fn cache(dir: impl Into<PathBuf>, build_if_missing: bool) -> Self {
        Self { explicit_path: None, cache_dir: dir.into(), build_if_missing }
    }
}

/// `A3D_MAP_DIR` if set, otherwise `./a3d-maps`.
pub fn default_map_dir() -> PathBuf {
    std::env::var_os("A3D_MAP_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("a3d-maps"))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Cache file name for one (calibration, quilt) configuration.
pub fn map_file_name(profile: &CalibrationProfile, spec: &QuiltSpec) -> String {
    let mut key = serialize_calibration(profile);
    key.push_str(&format!(
        "|{}x{} tiles {}x{}",
        spec.grid_cols, spec.grid_rows, spec.tile_width_px, spec.tile_height_px
    ));
    format!(
        "a3d-{:016x}_{}x{}.map",
        fnv1a64(key.as_bytes()),
        spec.grid_cols,
        spec.grid_rows
    )
}

fn verify_table(
    table: &LookupTable,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    path: &Path,
) -> Result<(), PipelineError> {
    let mut mismatches = Vec::new();
    if (table.native_width_px(), table.native_height_px())
        != (profile.screen_width_px, profile.screen_height_px)
    {
        mismatches.push(format!(
            "native raster {}x{} vs profile {}x{}",
            table.native_width_px(),
            table.native_height_px(),
            profile.screen_width_px,
            profile.screen_height_px
        ));
    }
    if (table.quilt_width_px(), table.quilt_height_px())
        != (spec.quilt_width_px(), spec.quilt_height_px())
        || (table.grid_cols(), table.grid_rows()) != (spec.grid_cols, spec.grid_rows)
    {
        mismatches.push(format!(
            "quilt {}x{} grid {}x{} vs spec {}x{} grid {}x{}",
            table.quilt_width_px(),
            table.quilt_height_px(),
            table.grid_cols(),
            table.grid_rows(),
            spec.quilt_width_px(),
            spec.quilt_height_px(),
            spec.grid_cols,
            spec.grid_rows
        ));
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::StaleMap { path: path.to_path_buf(), reason: mismatches.join("; ") })
    }
}

fn load_table_file(path: &Path) -> Result<LookupTable, PipelineError> {
    let bytes = fs::read(path).map_err(stage("map", path.display().to_string()))?;
    deserialize_lut(&bytes).map_err(stage("map", path.display().to_string()))
}

/// Resolve the lookup table per policy: reuse a verified file when present,
/// build (and cache) when allowed, error otherwise.
pub fn resolve_lut(
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    policy: &MapPolicy,
) -> Result<LookupTable, PipelineError> {
    if let Some(path) = &policy.explicit_path {
        let table = load_table_file(path)?;
        verify_table(&table, profile, spec, path)?;
        return Ok(table);
    }

    let path = policy.cache_dir.join(map_file_name(profile, spec));
    if path.exists() {
        let table = load_table_file(&path)?;
        verify_table(&table, profile, spec, &path)?;
        return Ok(table);
    }
    if !policy.build_if_missing {
        return Err(PipelineError::MapNotFound { expected: path });
    }
    let table = build_lut(&LutBuildRequest { profile: profile.clone(), quilt: *spec })
        .map_err(stage("map", path.display().to_string()))?;
    fs::create_dir_all(&policy.cache_dir).map_err(stage("map", path.display().to_string()))?;
    fs::write(&path, serialize_lut(&table)).map_err(stage("map", path.display().to_string()))?;
    Ok(table)
}

fn synthesize_views(
    image: &Image,
    provider: &DepthProvider,
    spec: &QuiltSpec,
    params: &PipelineParams,
    input_name: &str,
) -> Result<Vec<Image>, PipelineError> {
    let mut depth = load_depth(provider, image.width(), image.height())
        .map_err(stage("depth", input_name))?;
    if params.invert_depth {
        depth = depth.inverted();
    }
    let request = ViewRequest {
        total_views: spec.total_views(),
        max_offset: params.max_offset,
        mode: params.mode,
    };
    match params.mode {
        SynthesisMode::Fast => {
            synthesize_fast(image, &depth, &request).map_err(stage("synthesize", input_name))
        }
        SynthesisMode::Real => {
            let k = Intrinsics::from_fov(params.fov_deg, image.width(), image.height())
                .map_err(stage("synthesize", input_name))?;
            let detailed = synthesize_real_with_masks(
                image,
                &depth,
                &request,
                &k,
                &Pose::identity(),
                &k,
                params.depth_range,
                params.inpaint_radius,
            )
            .map_err(stage("synthesize", input_name))?;
            if let Some(dir) = &params.dump_masks {
                fs::create_dir_all(dir)
                    .map_err(stage("write", dir.display().to_string()))?;
                for (v, (_, mask)) in detailed.iter().enumerate() {
                    let path = dir.join(format!("mask_{v:03}.png"));
                    mask.to_image()
                        .save_png(&path)
                        .map_err(stage("write", path.display().to_string()))?;
                }
            }
            Ok(detailed.into_iter().map(|(view, _)| view).collect())
        }
    }
}

fn photo_to_native_with_table(
    image_path: &Path,
    provider: &DepthProvider,
    spec: &QuiltSpec,
    params: &PipelineParams,
    table: &LookupTable,
    out_path: &Path,
) -> Result<(), PipelineError> {
    let input_name = image_path.display().to_string();
    let image = Image::load_png(image_path).map_err(stage("load", input_name.clone()))?;
    let views = synthesize_views(&image, provider, spec, params, &input_name)?;
    let quilt = assemble_quilt(&views, spec).map_err(stage("assemble", input_name.clone()))?;
    if let Some(quilt_path) = &params.write_quilt {
        quilt
            .save_png(quilt_path)
            .map_err(stage("write", quilt_path.display().to_string()))?;
    }
    let native = render_native_lut(&quilt, table).map_err(stage("render", input_name))?;
    native.save_png(out_path).map_err(stage("write", out_path.display().to_string()))?;
    Ok(())
}

/// Photo to native: load, depth, synthesize, assemble, render, write.
pub fn photo_to_native(
    image_path: &Path,
    provider: &DepthProvider,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    params: &PipelineParams,
    map_policy: &MapPolicy,
    out_path: &Path,
) -> Result<(), PipelineError> {
    let table = resolve_lut(profile, spec, map_policy)?;
    photo_to_native_with_table(image_path, provider, spec, params, &table, out_path)
}

/// Sorted pre-rendered views to native; no synthesis stage. Views are taken
/// in lexicographic file-name order.
pub fn views_to_native(
    views_dir: &Path,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    map_policy: &MapPolicy,
    out_path: &Path,
) -> Result<(), PipelineError> {
    let dir_name = views_dir.display().to_string();
    let files = sorted_pngs(views_dir).map_err(stage("load", dir_name.clone()))?;
    let mut views = Vec::with_capacity(files.len());
    for file in &files {
        views.push(Image::load_png(file).map_err(stage("load", file.display().to_string()))?);
    }
    let quilt = assemble_quilt(&views, spec).map_err(stage("assemble", dir_name.clone()))?;
    let table = resolve_lut(profile, spec, map_policy)?;
    let native = render_native_lut(&quilt, &table).map_err(stage("render", dir_name))?;
    native.save_png(out_path).map_err(stage("write", out_path.display().to_string()))?;
    Ok(())
}

/// Quilt PNG plus `.map` file to native; a thin wrapper over the table
/// renderer.
pub fn quilt_to_native(
    quilt_path: &Path,
    map_path: &Path,
    out_path: &Path,
) -> Result<(), PipelineError> {
    let quilt =
        Image::load_png(quilt_path).map_err(stage("load", quilt_path.display().to_string()))?;
    let table = load_table_file(map_path)?;
    let native = render_native_lut(&quilt, &table)
        .map_err(stage("render", quilt_path.display().to_string()))?;
    native.save_png(out_path).map_err(stage("write", out_path.display().to_string()))?;
    Ok(())
}

/// Frames-per-second summary of a frame-sequence conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub frames: usize,
    pub elapsed_s: f64,
    pub fps: f64,
}

impl std::fmt::Display for ThroughputReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} frames in {:.2}s ({:.2} fps)",
            self.frames, self.elapsed_s, self.fps
        )
    }
}

/// Convert every numbered PNG frame in `input_dir`, preserving file names
/// in `output_dir`, and report throughput. A directory depth provider is
/// resolved per frame by file name; a single file or model provider is
/// shared by all frames.
pub fn frames_to_native_frames(
    input_dir: &Path,
    provider: &DepthProvider,
    profile: &CalibrationProfile,
    spec: &QuiltSpec,
    params: &PipelineParams,
    map_policy: &MapPolicy,
    output_dir: &Path,
) -> Result<ThroughputReport, PipelineError> {
    let frames = sorted_pngs(input_dir).map_err(stage("load", input_dir.display().to_string()))?;
    if frames.is_empty() {
        return Err(PipelineError::NoFrames { dir: input_dir.to_path_buf() });
    }
    let table = resolve_lut(profile, spec, map_policy)?;
    fs::create_dir_all(output_dir).map_err(stage("write", output_dir.display().to_string()))?;

    let start = Instant::now();
    for (index, frame) in frames.iter().enumerate() {
        let name = frame.file_name().expect("listed entries have names");
        let frame_provider = provider_for_frame(provider, frame);
        let out_path = output_dir.join(name);
        photo_to_native_with_table(frame, &frame_provider, spec, params, &table, &out_path)
            .map_err(|e| match e {
                PipelineError::Stage { stage: s, input, source } => PipelineError::Stage {
                    stage: s,
                    input: format!("frame {index} ({input})"),
                    source,
                },
                other => other,
            })?;
    }
    let elapsed_s = start.elapsed().as_secs_f64();
    let frames_done = frames.len();
    Ok(ThroughputReport {
        frames: frames_done,
        elapsed_s,
        fps: frames_done as f64 / elapsed_s.max(1e-9),
    })
}

fn provider_for_frame(provider: &DepthProvider, frame: &Path) -> DepthProvider {
    match provider {
        DepthProvider::File(path) if path.is_dir() => {
            let stem = frame.file_stem().unwrap_or_default();
            let png = path.join(frame.file_name().unwrap_or_default());
            if png.exists() {
                return DepthProvider::File(png);
            }
            let mut pfm = PathBuf::from(stem);
            pfm.set_extension("pfm");
            DepthProvider::File(path.join(pfm.file_name().unwrap_or_default()))
        }
        other => other.clone(),
    }
}

/// Explode a quilt into a numbered view-frame sequence.
pub fn quilt_views_to_video_frames(
    quilt_path: &Path,
    spec: &QuiltSpec,
    output_dir: &Path,
) -> Result<usize, PipelineError> {
    let quilt =
        Image::load_png(quilt_path).map_err(stage("load", quilt_path.display().to_string()))?;
    fs::create_dir_all(output_dir).map_err(stage("write", output_dir.display().to_string()))?;
    for v in 0..spec.total_views() {
        let tile = extract_tile(&quilt, spec, v)
            .map_err(stage("extract", quilt_path.display().to_string()))?;
        let path = output_dir.join(format!("frame_{v:06}.png"));
        tile.save_png(&path).map_err(stage("write", path.display().to_string()))?;
    }
    Ok(spec.total_views() as usize)
}

/// PNG files in a directory, lexicographically ordered by file name.
fn sorted_pngs(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}
