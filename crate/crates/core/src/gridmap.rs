//! 2D occupancy grids: projection from an octree, PGM persistence and
//! footprint collision tests.
//!
//! Cell `(x, y)` has world-space lower-left corner
//! `origin + (x, y) * cell_size`; `y` grows upward. In the PGM raster the
//! first row is the top of the map (`y = height - 1`).

use std::fmt::Write as _;

use thiserror::Error;

use crate::octree::OctoMap;

pub const PIXEL_OCCUPIED: u8 = 0;
pub const PIXEL_UNKNOWN: u8 = 205;
pub const PIXEL_FREE: u8 = 254;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

impl CellState {
    pub fn pixel(self) -> u8 {
        match self {
            CellState::Occupied => PIXEL_OCCUPIED,
            CellState::Free => PIXEL_FREE,
            CellState::Unknown => PIXEL_UNKNOWN,
        }
    }

    /// Nearest of the three canonical pixel values.
    pub fn from_pixel(v: u8) -> Self {
        let d = |c: u8| (i16::from(v) - i16::from(c)).abs();
        [CellState::Occupied, CellState::Unknown, CellState::Free]
            .into_iter()
            .min_by_key(|s| d(s.pixel()))
            .unwrap()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("bad PGM magic (expected P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("metadata is missing key `{0}`")]
    MissingMetadataKey(String),
    #[error("bad metadata value for `{key}`: {value}")]
    BadMetadataValue { key: String, value: String },
    #[error("invalid height band: z_min {z_min} must be below z_max {z_max}")]
    InvalidBand { z_min: f64, z_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    origin: (f64, f64),
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn filled(
        width: usize,
        height: usize,
        cell_size: f64,
        origin: (f64, f64),
        state: CellState,
    ) -> Result<Self, GridError> {
        Self::from_cells(
            width,
            height,
            cell_size,
            origin,
            vec![state; width * height],
        )
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cell_size: f64,
        origin: (f64, f64),
        cells: Vec<CellState>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidGrid(
                "width and height must be positive".into(),
            ));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(GridError::InvalidGrid(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(GridError::InvalidGrid("origin must be finite".into()));
        }
        if cells.len() != width * height {
            return Err(GridError::DimensionMismatch(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(OccupancyGrid {
            width,
            height,
            cell_size,
            origin,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> Option<CellState> {
        (x < self.width && y < self.height).then(|| self.cells[y * self.width + x])
    }

    pub fn set(&mut self, x: usize, y: usize, state: CellState) {
        assert!(
            x < self.width && y < self.height,
            "cell ({x}, {y}) out of range"
        );
        self.cells[y * self.width + x] = state;
    }

    /// Marks the cells of `[x0, x1) x [y0, y1)` (clipped to the grid).
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, state: CellState) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.cells[y * self.width + x] = state;
            }
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// True iff `[x, x+w) x [y, y+h)` leaves the grid or touches a cell that
    /// is not Free. Unknown space counts as blocked.
    pub fn footprint_collides(&self, x: i64, y: i64, w: usize, h: usize) -> bool {
        assert!(w >= 1 && h >= 1, "footprint must be at least 1x1");
        if x < 0 || y < 0 {
            return true;
        }
        let (x, y) = (x as usize, y as usize);
        if x + w > self.width || y + h > self.height {
            return true;
        }
        (y..y + h).any(|row| {
            self.cells[row * self.width + x..row * self.width + x + w]
                .iter()
                .any(|&c| c != CellState::Free)
        })
    }
}

/// Height slab kept during projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZBand {
    z_min: f64,
    z_max: f64,
}

impl ZBand {
    pub fn new(z_min: f64, z_max: f64) -> Result<Self, GridError> {
        if z_min.is_nan() || z_max.is_nan() || z_min >= z_max {
            return Err(GridError::InvalidBand { z_min, z_max });
        }
        Ok(ZBand { z_min, z_max })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    fn intersects(&self, lo: f64, hi: f64) -> bool {
        lo <= self.z_max && hi > self.z_min
    }
}

/// Flattens the octree onto the xy plane.
///
/// A cell is Occupied if an occupied resolution-sized voxel whose z-range
/// meets the band overlaps it; Free if it touches the xy bounding box of
/// the in-band points; Unknown otherwise. Coarse leaves are refined to
/// voxels first, so a lone point never blots out a whole octant.
pub fn project_octree(
    map: &OctoMap,
    band: ZBand,
    cell_size: f64,
) -> Result<OccupancyGrid, GridError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(GridError::InvalidGrid(format!(
            "cell_size must be positive, got {cell_size}"
        )));
    }
    let root = map.root_bounds();
    let origin = (root.min.x, root.min.y);
    let width = ((root.max.x - root.min.x) / cell_size).ceil().max(1.0) as usize;
    let height = ((root.max.y - root.min.y) / cell_size).ceil().max(1.0) as usize;
    let mut grid = OccupancyGrid::filled(width, height, cell_size, origin, CellState::Unknown)?;

    // Cell index range whose boxes overlap the half-open interval [lo, hi).
    let span = |lo: f64, hi: f64, o: f64, n: usize| -> (usize, usize) {
        let first = ((lo - o) / cell_size).floor().max(0.0) as usize;
        let last = ((hi - o) / cell_size).ceil().max(0.0) as usize;
        (first.min(n), last.min(n))
    };

    let res = map.config().resolution;
    let corner = |i: u64, o: f64| o + i as f64 * res;
    let hits: Vec<(f64, f64, f64, f64)> = map
        .occupied_voxels()
        .into_iter()
        .filter(|v| band.intersects(corner(v[2], root.min.z), corner(v[2] + 1, root.min.z)))
        .map(|v| {
            let (x0, y0) = (corner(v[0], root.min.x), corner(v[1], root.min.y));
            (x0, x0 + res, y0, y0 + res)
        })
        .collect();

    let mut seen: Option<[f64; 4]> = None;
    for leaf in map.occupied_leaves() {
        for p in leaf
            .points
            .iter()
            .filter(|p| p.z >= band.z_min && p.z <= band.z_max)
        {
            let bb = seen.get_or_insert([p.x, p.x, p.y, p.y]);
            bb[0] = bb[0].min(p.x);
            bb[1] = bb[1].max(p.x);
            bb[2] = bb[2].min(p.y);
            bb[3] = bb[3].max(p.y);
        }
    }

    if let Some([x0, x1, y0, y1]) = seen {
        let (cx0, _) = span(x0, x0, origin.0, width);
        let cx1 = (((x1 - origin.0) / cell_size).floor() as usize + 1).min(width);
        let (cy0, _) = span(y0, y0, origin.1, height);
        let cy1 = (((y1 - origin.1) / cell_size).floor() as usize + 1).min(height);
        grid.fill_rect(cx0, cy0, cx1, cy1, CellState::Free);
    }
    for (x0, x1, y0, y1) in hits {
        let (cx0, cx1) = span(x0, x1, origin.0, width);
        let (cy0, cy1) = span(y0, y1, origin.1, height);
        grid.fill_rect(cx0, cy0, cx1, cy1, CellState::Occupied);
    }
    Ok(grid)
}

/// Encodes the grid as a binary PGM plus its metadata text.
///
/// `image_name` is the file name recorded under the `image` key.
pub fn write_grid(grid: &OccupancyGrid, image_name: &str) -> (Vec<u8>, String) {
    let header = format!("P5\n{} {}\n255\n", grid.width, grid.height);
    let mut pgm = Vec::with_capacity(header.len() + grid.cells.len());
    pgm.extend_from_slice(header.as_bytes());
    for row in grid.cells.chunks(grid.width).rev() {
        pgm.extend(row.iter().map(|c| c.pixel()));
    }
    let mut meta = String::new();
    let _ = writeln!(meta, "image: {image_name}");
    let _ = writeln!(meta, "resolution: {}", grid.cell_size);
    let _ = writeln!(meta, "origin_x: {}", grid.origin.0);
    let _ = writeln!(meta, "origin_y: {}", grid.origin.1);
    let _ = writeln!(meta, "negate: 0");
    (pgm, meta)
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Result<usize, GridError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(GridError::BadHeader(format!(
            "expected a number at byte {start}"
        )));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GridError::BadHeader("number out of range".into()))
}

fn meta_value(meta: &str, key: &str) -> Result<String, GridError> {
    meta.lines()
        .filter_map(|l| l.split_once(':'))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim().to_string())
        .ok_or_else(|| GridError::MissingMetadataKey(key.to_string()))
}

fn meta_f64(meta: &str, key: &str) -> Result<f64, GridError> {
    let value = meta_value(meta, key)?;
    value.parse().map_err(|_| GridError::BadMetadataValue {
        key: key.to_string(),
        value,
    })
}

pub fn read_grid(pgm: &[u8], meta: &str) -> Result<OccupancyGrid, GridError> {
    if pgm.len() < 2 || &pgm[..2] != b"P5" {
        return Err(GridError::BadMagic);
    }
    let mut pos = 2;
    let width = header_token(pgm, &mut pos)?;
    let height = header_token(pgm, &mut pos)?;
    let maxval = header_token(pgm, &mut pos)?;
    if maxval != 255 {
        return Err(GridError::BadHeader(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    if pos >= pgm.len() || !pgm[pos].is_ascii_whitespace() {
        return Err(GridError::BadHeader(
            "missing separator after maxval".into(),
        ));
    }
    let payload = &pgm[pos + 1..];
    if payload.len() != width * height {
        return Err(GridError::DimensionMismatch(format!(
            "{}x{} header but {} pixel bytes",
            width,
            height,
            payload.len()
        )));
    }

    meta_value(meta, "image")?;
    let cell_size = meta_f64(meta, "resolution")?;
    let origin = (meta_f64(meta, "origin_x")?, meta_f64(meta, "origin_y")?);
    meta_value(meta, "negate")?;

    let mut cells = vec![CellState::Unknown; width * height];
    if width > 0 {
        for (r, row) in payload.chunks(width).enumerate() {
            let y = height - 1 - r;
            for (x, &v) in row.iter().enumerate() {
                cells[y * width + x] = CellState::from_pixel(v);
            }
        }
    }
    OccupancyGrid::from_cells(width, height, cell_size, origin, cells)
}
