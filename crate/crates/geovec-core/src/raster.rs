//! ESRI ASCII grids and label extraction by nearest-pixel averaging.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use crate::geo::Coordinate;

/// Number of nearest pixel centers averaged per coordinate.
pub const SAMPLE_PIXELS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("raster header: {0}")]
    Header(String),
    #[error("raster body: {0}")]
    Body(String),
    #[error("coordinate {0} is outside the grid")]
    OutOfBounds(Coordinate),
    #[error("all sampled pixels are nodata")]
    AllNoData,
}

/// North-up grid: row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    ncols: usize,
    nrows: usize,
    xllcorner: f64,
    yllcorner: f64,
    cellsize: f64,
    nodata: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if ncols == 0 || nrows == 0 {
            return Err(RasterError::Header(String::from("ncols and nrows must be positive")));
        }
        if !(cellsize.is_finite() && cellsize > 0.0) {
            return Err(RasterError::Header(String::from("cellsize must be positive")));
        }
        if !(xllcorner.is_finite() && yllcorner.is_finite()) {
            return Err(RasterError::Header(String::from("corner must be finite")));
        }
        if values.len() != ncols * nrows {
            return Err(RasterError::Body(format!(
                "expected {} values, found {}",
                ncols * nrows,
                values.len()
            )));
        }
        Ok(RasterGrid { ncols, nrows, xllcorner, yllcorner, cellsize, nodata, values })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || v.is_nan()
    }

    /// `(lon, lat)` of a pixel center.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xllcorner + (col as f64 + 0.5) * self.cellsize,
            self.yllcorner + ((self.nrows - row) as f64 - 0.5) * self.cellsize,
        )
    }

    pub fn contains(&self, c: Coordinate) -> bool {
        let x1 = self.xllcorner + self.ncols as f64 * self.cellsize;
        let y1 = self.yllcorner + self.nrows as f64 * self.cellsize;
        (self.xllcorner..=x1).contains(&c.lon()) && (self.yllcorner..=y1).contains(&c.lat())
    }
}

/// Parses an ESRI ASCII grid (`ncols`, `nrows`, `xllcorner`/`xllcenter`,
/// `yllcorner`/`yllcenter`, `cellsize`, optional `NODATA_value`, then rows
/// north to south).
pub fn parse_ascii_grid(text: &str) -> Result<RasterGrid, RasterError> {
    let mut tokens = text.split_whitespace().peekable();
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut centered = (false, false);
    let mut cellsize = None;
    let mut nodata = -9999.0;
    while let Some(&tok) = tokens.peek() {
        if !tok.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let key = tok.to_ascii_lowercase();
        tokens.next();
        let raw = tokens
            .next()
            .ok_or_else(|| RasterError::Header(format!("missing value for `{key}`")))?;
        let num: f64 = raw
            .parse()
            .map_err(|_| RasterError::Header(format!("bad value `{raw}` for `{key}`")))?;
        let count = |v: f64| -> Result<usize, RasterError> {
            if v >= 1.0 && libm::trunc(v) == v {
                Ok(v as usize)
            } else {
                Err(RasterError::Header(format!("`{key}` must be a positive integer")))
            }
        };
        match key.as_str() {
            "ncols" => ncols = Some(count(num)?),
            "nrows" => nrows = Some(count(num)?),
            "xllcorner" => x = Some(num),
            "yllcorner" => y = Some(num),
            "xllcenter" => {
                x = Some(num);
                centered.0 = true;
            }
            "yllcenter" => {
                y = Some(num);
                centered.1 = true;
            }
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = num,
            _ => return Err(RasterError::Header(format!("unknown key `{key}`"))),
        }
    }
    let missing = |k: &str| RasterError::Header(format!("missing `{k}`"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut x = x.ok_or_else(|| missing("xllcorner"))?;
    let mut y = y.ok_or_else(|| missing("yllcorner"))?;
    if centered.0 {
        x -= cellsize / 2.0;
    }
    if centered.1 {
        y -= cellsize / 2.0;
    }
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| RasterError::Body(format!("bad value `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    RasterGrid::new(ncols, nrows, x, y, cellsize, nodata, values)
}

/// Serializes with `xllcorner`/`yllcorner` and shortest round-trip floats.
pub fn to_ascii_grid(grid: &RasterGrid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ncols {}", grid.ncols);
    let _ = writeln!(s, "nrows {}", grid.nrows);
    let _ = writeln!(s, "xllcorner {:?}", grid.xllcorner);
    let _ = writeln!(s, "yllcorner {:?}", grid.yllcorner);
    let _ = writeln!(s, "cellsize {:?}", grid.cellsize);
    let _ = writeln!(s, "NODATA_value {:?}", grid.nodata);
    for r in 0..grid.nrows {
        let row: Vec<String> = (0..grid.ncols).map(|c| format!("{:?}", grid.value(r, c))).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Mean of the [`SAMPLE_PIXELS`] pixels whose centers are nearest to `coord`
/// in degree space, ties broken by row-major index. Nodata pixels count
/// towards the twelve but are left out of the mean.
pub fn sample_raster(grid: &RasterGrid, coord: Coordinate) -> Result<f64, RasterError> {
    if !grid.contains(coord) {
        return Err(RasterError::OutOfBounds(coord));
    }
    let cs = grid.cellsize;
    let (lon, lat) = (coord.lon(), coord.lat());
    let col0 = (((lon - grid.xllcorner) / cs) as isize).clamp(0, grid.ncols as isize - 1);
    let row0 = ((((grid.yllcorner + grid.nrows as f64 * cs) - lat) / cs) as isize).clamp(0, grid.nrows as isize - 1);
    let want = SAMPLE_PIXELS.min(grid.ncols * grid.nrows);

    let mut radius: isize = 3;
    loop {
        let mut cands: Vec<(f64, usize)> = Vec::new();
        let r_lo = (row0 - radius).max(0) as usize;
        let r_hi = (row0 + radius).min(grid.nrows as isize - 1) as usize;
        let c_lo = (col0 - radius).max(0) as usize;
        let c_hi = (col0 + radius).min(grid.ncols as isize - 1) as usize;
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let (cx, cy) = grid.center(r, c);
                let d2 = (lon - cx) * (lon - cx) + (lat - cy) * (lat - cy);
                cands.push((d2, r * grid.ncols + c));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let covers_all = r_lo == 0 && c_lo == 0 && r_hi == grid.nrows - 1 && c_hi == grid.ncols - 1;
        // Anything outside the window is at least (radius - 0.5) cells away.
        let bound = (radius as f64 - 0.5) * cs;
        if covers_all || (cands.len() >= want && cands[want - 1].0 < bound * bound) {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &(_, idx) in &cands[..want] {
                let v = grid.values[idx];
                if !grid.is_nodata(v) {
                    sum += v;
                    count += 1;
                }
            }
            return if count == 0 { Err(RasterError::AllNoData) } else { Ok(sum / count as f64) };
        }
        radius *= 2;
    }
}
