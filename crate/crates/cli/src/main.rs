//! `a3d`: photo / quilt / frame-sequence to native light-field conversion
//! for slanted lenticular displays.
//!
//! Exit codes: 0 success, 2 usage error, 3 stage failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use a3d_core::depth::{DepthProvider, ModelDescriptor};
use a3d_core::lut::{build_lut, deserialize_lut, serialize_lut, LutBuildRequest};
use a3d_core::native::benchmark_render;
use a3d_core::pipeline::{
    default_map_dir, frames_to_native_frames, photo_to_native, quilt_to_native,
    quilt_views_to_video_frames, views_to_native, MapPolicy, PipelineParams,
};
use a3d_core::quilt::{parse_quilt_file_name, QuiltSpec};
use a3d_core::raster::Image;
use a3d_core::viewsynth::{DepthRange, SynthesisMode};
use a3d_core::{parse_calibration, CalibrationProfile};

#[derive(Parser)]
#[command(name = "a3d", version, about = "Light-field conversion for slanted lenticular displays")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Print per-stage progress to stderr
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute the subpixel lookup table for one display and quilt layout
    Lut(LutCmd),
    /// Convert a photo plus depth into a native image
    Photo(PhotoCmd),
    /// Assemble sorted view images from a directory into a native image
    Views(ViewsCmd),
    /// Render an existing quilt PNG to a native image
    #[command(visible_alias = "native")]
    Quilt(QuiltCmd),
    /// Convert a numbered PNG frame sequence into native frames
    Frames(FramesCmd),
    /// Explode a quilt into a numbered frame sequence of its views
    Quilt2frames(Quilt2FramesCmd),
    /// Benchmark table-driven vs direct rendering (CSV: lut_ms,direct_ms,ratio)
    Bench(BenchCmd),
}

#[derive(Args)]
struct CalibrationArgs {
    /// Calibration JSON file
    #[arg(long)]
    calibration: PathBuf,

    /// Interpret the calibration "slope" value as an angle in degrees
    /// instead of a tangent
    #[arg(long)]
    slope_degrees: bool,
}

impl CalibrationArgs {
    fn load(&self) -> Result<CalibrationProfile> {
        let text = fs::read_to_string(&self.calibration)
            .with_context(|| format!("reading {}", self.calibration.display()))?;
        let mut profile = parse_calibration(&text)
            .with_context(|| format!("parsing {}", self.calibration.display()))?;
        if self.slope_degrees {
            profile.slope = (profile.slope * std::f64::consts::PI / 180.0).tan();
        }
        Ok(profile)
    }
}

#[derive(Args)]
struct GridArgs {
    /// Quilt grid columns
    #[arg(long, default_value_t = 6)]
    quilt_cols: u32,

    /// Quilt grid rows
    #[arg(long, default_value_t = 8)]
    quilt_rows: u32,

    /// Tile width in pixels
    #[arg(long)]
    tile_w: Option<u32>,

    /// Tile height in pixels
    #[arg(long)]
    tile_h: Option<u32>,

    /// Total view count; must equal cols * rows when given
    #[arg(long)]
    views: Option<u32>,
}

impl GridArgs {
    fn spec_with_tiles(&self, tile_w: u32, tile_h: u32) -> Result<QuiltSpec> {
        if self.quilt_cols == 0 || self.quilt_rows == 0 || tile_w == 0 || tile_h == 0 {
            return Err(usage_error("quilt grid and tile dimensions must be positive"));
        }
        if let Some(views) = self.views {
            if views != self.quilt_cols * self.quilt_rows {
                return Err(usage_error(format!(
                    "--views {views} does not match the {}x{} quilt grid ({} views)",
                    self.quilt_cols,
                    self.quilt_rows,
                    self.quilt_cols * self.quilt_rows
                )));
            }
        }
        Ok(QuiltSpec::new(self.quilt_cols, self.quilt_rows, tile_w, tile_h))
    }

    fn spec_required(&self) -> Result<QuiltSpec> {
        match (self.tile_w, self.tile_h) {
            (Some(w), Some(h)) => self.spec_with_tiles(w, h),
            _ => Err(usage_error("--tile-w and --tile-h are required here")),
        }
    }
}

#[derive(Args)]
#[command(group = ArgGroup::new("depth-source").required(true).args(["depth", "model"]))]
struct DepthArgs {
    /// Depth raster: 8/16-bit grayscale PNG or 32-bit PFM. For frame
    /// sequences a directory may be given, resolved per frame by file name.
    #[arg(long)]
    depth: Option<PathBuf>,

    /// ONNX depth-model file (requires an inference-enabled build)
    #[arg(long)]
    model: Option<PathBuf>,

    /// Model input width
    #[arg(long, default_value_t = 256)]
    model_width: u32,

    /// Model input height
    #[arg(long, default_value_t = 256)]
    model_height: u32,

    /// Flip the loaded depth convention (near becomes far)
    #[arg(long)]
    invert_depth: bool,
}

impl DepthArgs {
    fn provider(&self) -> Result<DepthProvider> {
        match (&self.depth, &self.model) {
            (Some(path), None) => Ok(DepthProvider::File(path.clone())),
            (None, Some(path)) => Ok(DepthProvider::Model(ModelDescriptor {
                path: path.clone(),
                input_width: self.model_width,
                input_height: self.model_height,
            })),
            _ => Err(usage_error("exactly one of --depth or --model is required")),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// View synthesis mode
    #[arg(long, value_parser = parse_mode, default_value = "fast")]
    mode: SynthesisMode,

    /// Peak pixel disparity (fast) or camera baseline in scene units (real)
    #[arg(long, default_value_t = 5.0)]
    max_offset: f64,

    /// Horizontal field of view in degrees, for real-mode intrinsics
    #[arg(long, default_value_t = 60.0)]
    fov: f64,

    /// Near plane of the relative-to-metric depth mapping (real mode)
    #[arg(long, default_value_t = 1.0)]
    znear: f64,

    /// Far plane of the relative-to-metric depth mapping (real mode)
    #[arg(long, default_value_t = 10.0)]
    zfar: f64,

    /// Hole-filling radius in pixels (real mode)
    #[arg(long, default_value_t = 3)]
    inpaint_radius: u32,
}

fn parse_mode(s: &str) -> Result<SynthesisMode, String> {
    match s {
        "fast" => Ok(SynthesisMode::Fast),
        "real" => Ok(SynthesisMode::Real),
        other => Err(format!("unknown mode '{other}', use fast or real")),
    }
}

#[derive(Args)]
struct MapArgs {
    /// Use this .map file instead of the cache
    #[arg(long)]
    map: Option<PathBuf>,

    /// Build (and cache) the lookup table when it is missing
    #[arg(long)]
    build_map: bool,

    /// Map cache directory (default: $A3D_MAP_DIR or ./a3d-maps)
    #[arg(long)]
    map_dir: Option<PathBuf>,
}

impl MapArgs {
    fn policy(&self) -> MapPolicy {
        match &self.map {
            Some(path) => MapPolicy::explicit(path),
            None => MapPolicy::cache(
                self.map_dir.clone().unwrap_or_else(default_map_dir),
                self.build_map,
            ),
        }
    }
}

#[derive(Args)]
struct LutCmd {
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output .map path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhotoCmd {
    /// Input RGB image (PNG)
    input: PathBuf,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    depth: DepthArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    map: MapArgs,
    /// Also write the assembled quilt PNG here
    #[arg(long)]
    write_quilt: Option<PathBuf>,
    /// Write per-view hole masks into this directory (real mode)
    #[arg(long)]
    dump_masks: Option<PathBuf>,
    /// Output native PNG
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ViewsCmd {
    /// Directory of lexicographically sorted view PNGs
    input: PathBuf,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    map: MapArgs,
    /// Output native PNG
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = ArgGroup::new("quilt-input").required(true).args(["input", "quilt"]))]
struct QuiltCmd {
    /// Quilt PNG
    input: Option<PathBuf>,
    /// Quilt PNG (flag form)
    #[arg(long)]
    quilt: Option<PathBuf>,
    /// Lookup table (.map) matching the quilt layout
    #[arg(long)]
    map: PathBuf,
    /// Output native PNG
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FramesCmd {
    /// Directory of numbered input frames (PNG)
    input: PathBuf,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    depth: DepthArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    map: MapArgs,
    /// Output directory for native frames
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Quilt2FramesCmd {
    /// Quilt PNG; grid may be encoded in the name as `..._qsNxM.png`
    input: PathBuf,
    /// Quilt grid columns (default: from the file name)
    #[arg(long)]
    quilt_cols: Option<u32>,
    /// Quilt grid rows (default: from the file name)
    #[arg(long)]
    quilt_rows: Option<u32>,
    /// Output directory for view frames
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchCmd {
    /// Quilt PNG to render
    #[arg(long)]
    quilt: PathBuf,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Optional prebuilt .map (otherwise built in memory)
    #[arg(long)]
    map: Option<PathBuf>,
    /// Timed iterations per path
    #[arg(long, default_value_t = 5)]
    iterations: u32,
}

/// Marker for operator errors that should exit with code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("a3d: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("a3d: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Lut(cmd) => run_lut(cmd, verbose),
        Command::Photo(cmd) => run_photo(cmd, verbose),
        Command::Views(cmd) => run_views(cmd, verbose),
        Command::Quilt(cmd) => run_quilt(cmd, verbose),
        Command::Frames(cmd) => run_frames(cmd, verbose),
        Command::Quilt2frames(cmd) => run_quilt2frames(cmd, verbose),
        Command::Bench(cmd) => run_bench(cmd, verbose),
    }
}

fn run_lut(cmd: LutCmd, verbose: bool) -> Result<()> {
    let profile = cmd.calibration.load()?;
    let spec = cmd.grid.spec_required()?;
    if verbose {
        eprintln!(
            "building {}x{} table for a {}x{} quilt of {}x{} tiles",
            profile.screen_width_px,
            profile.screen_height_px,
            spec.grid_cols,
            spec.grid_rows,
            spec.tile_width_px,
            spec.tile_height_px
        );
    }
    let table = build_lut(&LutBuildRequest { profile, quilt: spec })?;
    fs::write(&cmd.out, serialize_lut(&table))
        .with_context(|| format!("writing {}", cmd.out.display()))?;
    if verbose {
        eprintln!("wrote {}", cmd.out.display());
    }
    Ok(())
}

fn pipeline_params(synth: &SynthArgs, depth: &DepthArgs) -> Result<PipelineParams> {
    Ok(PipelineParams {
        mode: synth.mode,
        max_offset: synth.max_offset,
        fov_deg: synth.fov,
        depth_range: DepthRange::new(synth.znear, synth.zfar)
            .map_err(|e| usage_error(e.to_string()))?,
        inpaint_radius: synth.inpaint_radius,
        invert_depth: depth.invert_depth,
        write_quilt: None,
        dump_masks: None,
    })
}

fn input_tile_dims(grid: &GridArgs, input: &Path) -> Result<(u32, u32)> {
    match (grid.tile_w, grid.tile_h) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => {
            let img = Image::load_png(input)?;
            Ok(img.dimensions())
        }
    }
}

fn run_photo(cmd: PhotoCmd, verbose: bool) -> Result<()> {
    let profile = cmd.calibration.load()?;
    let (tile_w, tile_h) = input_tile_dims(&cmd.grid, &cmd.input)?;
    let spec = cmd.grid.spec_with_tiles(tile_w, tile_h)?;
    let provider = cmd.depth.provider()?;
    let mut params = pipeline_params(&cmd.synth, &cmd.depth)?;
    params.write_quilt = cmd.write_quilt.clone();
    params.dump_masks = cmd.dump_masks.clone();
    if verbose {
        eprintln!(
            "photo {} -> {} ({} views, {:?} mode)",
            cmd.input.display(),
            cmd.out.display(),
            spec.total_views(),
            cmd.synth.mode
        );
    }
    photo_to_native(&cmd.input, &provider, &profile, &spec, &params, &cmd.map.policy(), &cmd.out)?;
    if verbose {
        eprintln!("wrote {}", cmd.out.display());
    }
    Ok(())
}

fn run_views(cmd: ViewsCmd, verbose: bool) -> Result<()> {
    let profile = cmd.calibration.load()?;
    let (tile_w, tile_h) = match (cmd.grid.tile_w, cmd.grid.tile_h) {
        (Some(w), Some(h)) => (w, h),
        _ => first_png_dims(&cmd.input)?,
    };
    let spec = cmd.grid.spec_with_tiles(tile_w, tile_h)?;
    if verbose {
        eprintln!("assembling {} views from {}", spec.total_views(), cmd.input.display());
    }
    views_to_native(&cmd.input, &profile, &spec, &cmd.map.policy(), &cmd.out)?;
    if verbose {
        eprintln!("wrote {}", cmd.out.display());
    }
    Ok(())
}

fn first_png_dims(dir: &Path) -> Result<(u32, u32)> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    names.sort();
    let first = names
        .first()
        .ok_or_else(|| usage_error(format!("no PNG views found in {}", dir.display())))?;
    Ok(Image::load_png(first)?.dimensions())
}

fn run_quilt(cmd: QuiltCmd, verbose: bool) -> Result<()> {
    let input = cmd
        .input
        .or(cmd.quilt)
        .ok_or_else(|| usage_error("a quilt PNG is required"))?;
    if verbose {
        eprintln!("rendering {} through {}", input.display(), cmd.map.display());
    }
    quilt_to_native(&input, &cmd.map, &cmd.out)?;
    if verbose {
        eprintln!("wrote {}", cmd.out.display());
    }
    Ok(())
}

fn run_frames(cmd: FramesCmd, verbose: bool) -> Result<()> {
    let profile = cmd.calibration.load()?;
    let (tile_w, tile_h) = match (cmd.grid.tile_w, cmd.grid.tile_h) {
        (Some(w), Some(h)) => (w, h),
        _ => first_png_dims(&cmd.input)?,
    };
    let spec = cmd.grid.spec_with_tiles(tile_w, tile_h)?;
    let provider = cmd.depth.provider()?;
    let params = pipeline_params(&cmd.synth, &cmd.depth)?;
    let report = frames_to_native_frames(
        &cmd.input,
        &provider,
        &profile,
        &spec,
        &params,
        &cmd.map.policy(),
        &cmd.out_dir,
    )?;
    // throughput summary is part of the run contract, always printed
    println!("{report}");
    if verbose {
        eprintln!("wrote {} frames to {}", report.frames, cmd.out_dir.display());
    }
    Ok(())
}

fn run_quilt2frames(cmd: Quilt2FramesCmd, verbose: bool) -> Result<()> {
    let from_name = cmd
        .input
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(parse_quilt_file_name);
    let (cols, rows) = match (cmd.quilt_cols, cmd.quilt_rows) {
        (Some(c), Some(r)) => (c, r),
        (None, None) => from_name.ok_or_else(|| {
            usage_error("pass --quilt-cols/--quilt-rows or name the quilt `..._qsNxM.png`")
        })?,
        _ => return Err(usage_error("--quilt-cols and --quilt-rows must be given together")),
    };
    let quilt = Image::load_png(&cmd.input)?;
    if quilt.width() % cols != 0 || quilt.height() % rows != 0 {
        return Err(usage_error(format!(
            "quilt {}x{} is not divisible by a {cols}x{rows} grid",
            quilt.width(),
            quilt.height()
        )));
    }
    let spec = QuiltSpec::new(cols, rows, quilt.width() / cols, quilt.height() / rows);
    let count = quilt_views_to_video_frames(&cmd.input, &spec, &cmd.out_dir)?;
    if verbose {
        eprintln!("wrote {count} frames to {}", cmd.out_dir.display());
    }
    Ok(())
}

fn run_bench(cmd: BenchCmd, verbose: bool) -> Result<()> {
    if cmd.iterations < 3 {
        return Err(usage_error("--iterations must be at least 3"));
    }
    let profile = cmd.calibration.load()?;
    let quilt = Image::load_png(&cmd.quilt)?;
    let (cols, rows) = (cmd.grid.quilt_cols, cmd.grid.quilt_rows);
    if quilt.width() % cols != 0 || quilt.height() % rows != 0 {
        return Err(usage_error(format!(
            "quilt {}x{} is not divisible by a {cols}x{rows} grid",
            quilt.width(),
            quilt.height()
        )));
    }
    let spec = cmd.grid.spec_with_tiles(quilt.width() / cols, quilt.height() / rows)?;
    let table = match &cmd.map {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            deserialize_lut(&bytes)?
        }
        None => build_lut(&LutBuildRequest { profile: profile.clone(), quilt: spec })?,
    };
    if verbose {
        eprintln!("benchmarking {} iterations per path", cmd.iterations);
    }
    let report = benchmark_render(&quilt, &table, &profile, &spec, cmd.iterations)?;
    println!("{}", report.csv_line());
    Ok(())
}
