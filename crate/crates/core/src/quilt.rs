//! Quilt assembly and extraction: an N x M grid collage of sequential
//! views, ordered left-to-right then bottom-to-top so that view 0 sits in
//! the bottom-left tile.

use thiserror::Error;

use crate::raster::Image;

#[derive(Debug, Error, PartialEq)]
pub enum QuiltError {
    #[error("expected {expected} views, got {got}")]
    WrongViewCount { expected: u32, got: usize },
    #[error("view {index} is {got_w}x{got_h}, tiles must be {tile_w}x{tile_h}")]
    TileDimensionMismatch { index: usize, got_w: u32, got_h: u32, tile_w: u32, tile_h: u32 },
    #[error("view index {index} out of range, quilt holds {total} views")]
    IndexOutOfRange { index: u32, total: u32 },
    #[error("quilt raster is {got_w}x{got_h}, spec requires {want_w}x{want_h}")]
    DimensionMismatch { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
}

/// Grid and tile geometry of a quilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuiltSpec {
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub tile_width_px: u32,
    pub tile_height_px: u32,
}

impl QuiltSpec {
    pub fn new(grid_cols: u32, grid_rows: u32, tile_width_px: u32, tile_height_px: u32) -> Self {
        assert!(
            grid_cols > 0 && grid_rows > 0 && tile_width_px > 0 && tile_height_px > 0,
            "quilt spec dimensions must be positive"
        );
        Self { grid_cols, grid_rows, tile_width_px, tile_height_px }
    }

    pub fn total_views(&self) -> u32 {
        self.grid_cols * self.grid_rows
    }

    pub fn quilt_width_px(&self) -> u32 {
        self.grid_cols * self.tile_width_px
    }

    pub fn quilt_height_px(&self) -> u32 {
        self.grid_rows * self.tile_height_px
    }

    /// Raster origin (left, top) of view `v`'s tile. View indices grow
    /// left-to-right, bottom-to-top.
    pub fn tile_origin(&self, v: u32) -> (u32, u32) {
        debug_assert!(v < self.total_views());
        let col = v % self.grid_cols;
        let row_from_bottom = v / self.grid_cols;
        let x = col * self.tile_width_px;
        let y = (self.grid_rows - 1 - row_from_bottom) * self.tile_height_px;
        (x, y)
    }
}

/// Paste `views[v]` into its grid cell; view 0 lands bottom-left.
pub fn assemble_quilt(views: &[Image], spec: &QuiltSpec) -> Result<Image, QuiltError> {
    let total = spec.total_views();
    if views.len() != total as usize {
        return Err(QuiltError::WrongViewCount { expected: total, got: views.len() });
    }
    for (index, view) in views.iter().enumerate() {
        if view.dimensions() != (spec.tile_width_px, spec.tile_height_px) {
            return Err(QuiltError::TileDimensionMismatch {
                index,
                got_w: view.width(),
                got_h: view.height(),
                tile_w: spec.tile_width_px,
                tile_h: spec.tile_height_px,
            });
        }
    }

    let mut quilt = Image::new(spec.quilt_width_px(), spec.quilt_height_px())
        .expect("spec dimensions are positive");
    for (v, view) in views.iter().enumerate() {
        let (x0, y0) = spec.tile_origin(v as u32);
        for ty in 0..spec.tile_height_px {
            let dst = quilt.row_mut(y0 + ty);
            let start = x0 as usize * 3;
            let len = spec.tile_width_px as usize * 3;
            dst[start..start + len].copy_from_slice(view.row(ty));
        }
    }
    Ok(quilt)
}

/// Cut view `v`'s tile back out of a quilt, bit-exact.
pub fn extract_tile(quilt: &Image, spec: &QuiltSpec, v: u32) -> Result<Image, QuiltError> {
    let total = spec.total_views();
    if v >= total {
        return Err(QuiltError::IndexOutOfRange { index: v, total });
    }
    if quilt.dimensions() != (spec.quilt_width_px(), spec.quilt_height_px()) {
        return Err(QuiltError::DimensionMismatch {
            got_w: quilt.width(),
            got_h: quilt.height(),
            want_w: spec.quilt_width_px(),
            want_h: spec.quilt_height_px(),
        });
    }
    let (x0, y0) = spec.tile_origin(v);
    let mut tile = Image::new(spec.tile_width_px, spec.tile_height_px)
        .expect("spec dimensions are positive");
    for ty in 0..spec.tile_height_px {
        let src = quilt.row(y0 + ty);
        let start = x0 as usize * 3;
        let len = spec.tile_width_px as usize * 3;
        tile.row_mut(ty).copy_from_slice(&src[start..start + len]);
    }
    Ok(tile)
}

/// `<name>_qsNxM.png` naming convention for quilt files.
pub fn quilt_file_name(stem: &str, spec: &QuiltSpec) -> String {
    format!("{stem}_qs{}x{}.png", spec.grid_cols, spec.grid_rows)
}

/// Recover `(cols, rows)` from a `..._qsNxM.png` file name, if present.
pub fn parse_quilt_file_name(name: &str) -> Option<(u32, u32)> {
    let stem = name.strip_suffix(".png").unwrap_or(name);
    let (_, dims) = stem.rsplit_once("_qs")?;
    let (cols, rows) = dims.split_once('x')?;
    let cols: u32 = cols.parse().ok()?;
    let rows: u32 = rows.parse().ok()?;
    if cols > 0 && rows > 0 {
        Some((cols, rows))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RED: [u8; 3] = [255, 0, 0];
    const GREEN: [u8; 3] = [0, 255, 0];
    const BLUE: [u8; 3] = [0, 0, 255];
    const WHITE: [u8; 3] = [255, 255, 255];

    fn solid(c: [u8; 3]) -> Image {
        Image::filled(4, 3, c).unwrap()
    }

    #[test]
    fn two_by_two_ordering_starts_bottom_left() {
        let spec = QuiltSpec::new(2, 2, 4, 3);
        let views = vec![solid(RED), solid(GREEN), solid(BLUE), solid(WHITE)];
        let quilt = assemble_quilt(&views, &spec).unwrap();
        assert_eq!(quilt.dimensions(), (8, 6));
        assert_eq!(quilt.pixel(0, 5), RED, "bottom-left");
        assert_eq!(quilt.pixel(7, 5), GREEN, "bottom-right");
        assert_eq!(quilt.pixel(0, 0), BLUE, "top-left");
        assert_eq!(quilt.pixel(7, 0), WHITE, "top-right");
    }

    #[test]
    fn portrait_quilt_dimensions() {
        let spec = QuiltSpec::new(6, 8, 560, 420);
        assert_eq!(spec.total_views(), 48);
        assert_eq!((spec.quilt_width_px(), spec.quilt_height_px()), (3360, 3360));
    }

    #[test]
    fn extract_inverts_assemble() {
        let spec = QuiltSpec::new(3, 2, 5, 4);
        let views: Vec<Image> = (0..6)
            .map(|v| {
                Image::from_fn(5, 4, |x, y| [(v * 40) as u8, (x * 50) as u8, (y * 60) as u8])
                    .unwrap()
            })
            .collect();
        let quilt = assemble_quilt(&views, &spec).unwrap();
        for v in 0..6 {
            assert_eq!(extract_tile(&quilt, &spec, v).unwrap(), views[v as usize]);
        }
    }

    #[test]
    fn first_and_last_tiles_sit_in_expected_corners() {
        let spec = QuiltSpec::new(3, 2, 5, 4);
        assert_eq!(spec.tile_origin(0), (0, 4), "view 0 bottom-left");
        assert_eq!(spec.tile_origin(5), (10, 0), "last view top-right");
    }

    #[test]
    fn changing_one_view_touches_exactly_one_tile() {
        let spec = QuiltSpec::new(3, 2, 5, 4);
        let views: Vec<Image> =
            (0..6).map(|v| Image::filled(5, 4, [v * 30, 10, 20]).unwrap()).collect();
        let base = assemble_quilt(&views, &spec).unwrap();
        let mut altered = views.clone();
        altered[4] = Image::filled(5, 4, [255, 255, 255]).unwrap();
        let changed = assemble_quilt(&altered, &spec).unwrap();

        let (ox, oy) = spec.tile_origin(4);
        for y in 0..changed.height() {
            for x in 0..changed.width() {
                let inside_tile = x >= ox && x < ox + 5 && y >= oy && y < oy + 4;
                if inside_tile {
                    assert_eq!(changed.pixel(x, y), [255, 255, 255]);
                } else {
                    assert_eq!(changed.pixel(x, y), base.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn wrong_view_count_rejected() {
        let spec = QuiltSpec::new(2, 2, 4, 3);
        let views = vec![solid(RED); 3];
        assert_eq!(
            assemble_quilt(&views, &spec).unwrap_err(),
            QuiltError::WrongViewCount { expected: 4, got: 3 }
        );
    }

    #[test]
    fn tile_dims_checked() {
        let spec = QuiltSpec::new(1, 2, 4, 3);
        let views = vec![solid(RED), Image::filled(5, 3, RED).unwrap()];
        assert!(matches!(
            assemble_quilt(&views, &spec),
            Err(QuiltError::TileDimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_view_rejected() {
        let spec = QuiltSpec::new(2, 2, 4, 3);
        let quilt = Image::new(8, 6).unwrap();
        assert_eq!(
            extract_tile(&quilt, &spec, 4).unwrap_err(),
            QuiltError::IndexOutOfRange { index: 4, total: 4 }
        );
    }

    #[test]
    fn quilt_name_round_trip() {
        let spec = QuiltSpec::new(6, 8, 560, 420);
        let name = quilt_file_name("scene", &spec);
        assert_eq!(name, "scene_qs6x8.png");
        assert_eq!(parse_quilt_file_name(&name), Some((6, 8)));
        assert_eq!(parse_quilt_file_name("scene.png"), None);
    }
}
