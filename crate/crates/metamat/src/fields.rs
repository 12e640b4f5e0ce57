//! Spatial/frequency grids and sampled fields.
//!
//! Every quantity the toolkit manipulates lives on a regular voxel grid,
//! optionally crossed with a frequency grid:
//!
//! - [`SampledField`]: one complex value per (voxel, frequency) pair; holds
//!   the refraction coefficients n₀²(x,ω), n²(x,ω), the susceptibility
//!   perturbation p(x,ω) and the impedance factor h(x,ω).
//! - [`DensityField`]: one nonnegative real value per voxel; holds the
//!   particle density N(x), which is frequency-independent by construction.
//!
//! Voxel enumeration order is x-fastest: flat index = ix + nx·(iy + ny·iz).
//! Sampled fields are stored voxel-major, frequency-minor, so all
//! frequencies of one voxel are contiguous. Units are the caller's
//! responsibility; the toolkit only assumes one consistent length unit and
//! one consistent time unit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid descriptor {path}: {reason}")]
    Descriptor { path: PathBuf, reason: String },
    #[error("invalid spatial grid: {0}")]
    Grid(String),
    #[error("invalid frequency grid: {0}")]
    Frequencies(String),
    #[error("expected {expected} rows, got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("value at voxel {voxel}, frequency {freq} is not finite")]
    NonFinite { voxel: usize, freq: usize },
    #[error("density at voxel {voxel} is {value}, must be finite and nonnegative")]
    Density { voxel: usize, value: f64 },
    #[error("value array has length {got}, grid requires {expected}")]
    Length { expected: usize, got: usize },
    #[error("medium wave speed must be positive and finite, got {0}")]
    WaveSpeed(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regular 3D voxel grid. The grid's bounding box is the design domain D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    origin: [f64; 3],
    spacing: [f64; 3],
    dims: [usize; 3],
}

impl SpatialGrid {
    pub fn new(origin: [f64; 3], spacing: [f64; 3], dims: [usize; 3]) -> Result<Self, FieldError> {
        for axis in 0..3 {
            if !origin[axis].is_finite() {
                return Err(FieldError::Grid(format!(
                    "origin[{axis}] = {} is not finite",
                    origin[axis]
                )));
            }
            if !(spacing[axis].is_finite() && spacing[axis] > 0.0) {
                return Err(FieldError::Grid(format!(
                    "spacing[{axis}] = {} must be positive",
                    spacing[axis]
                )));
            }
            if dims[axis] < 1 {
                return Err(FieldError::Grid(format!("dims[{axis}] must be >= 1")));
            }
        }
        Ok(Self { origin, spacing, dims })
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Extent of the bounding box along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    /// Lower corner of the bounding box (equals the origin).
    pub fn min_corner(&self) -> [f64; 3] {
        self.origin
    }

    /// Upper corner of the bounding box.
    pub fn max_corner(&self) -> [f64; 3] {
        let e = self.extent();
        [self.origin[0] + e[0], self.origin[1] + e[1], self.origin[2] + e[2]]
    }

    /// Center of the voxel at integer coordinates (ix, iy, iz):
    /// origin + (index + ½)·spacing.
    pub fn voxel_center(&self, coords: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + (coords[0] as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (coords[1] as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (coords[2] as f64 + 0.5) * self.spacing[2],
        ]
    }

    /// Integer coordinates of the flat voxel index (x-fastest order).
    pub fn voxel_coords(&self, flat: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    /// Flat index of integer voxel coordinates (x-fastest order).
    pub fn voxel_index(&self, coords: [usize; 3]) -> usize {
        coords[0] + self.dims[0] * (coords[1] + self.dims[1] * coords[2])
    }

    /// Center of the voxel with the given flat index.
    pub fn center_of(&self, flat: usize) -> [f64; 3] {
        self.voxel_center(self.voxel_coords(flat))
    }

    /// Flat index of the voxel whose center is nearest to `point`
    /// (clamped to the grid).
    pub fn nearest_voxel(&self, point: [f64; 3]) -> usize {
        let mut coords = [0usize; 3];
        for axis in 0..3 {
            let rel = (point[axis] - self.origin[axis]) / self.spacing[axis] - 0.5;
            let idx = rel.round().max(0.0) as usize;
            coords[axis] = idx.min(self.dims[axis] - 1);
        }
        self.voxel_index(coords)
    }

    /// Euclidean diagonal of the bounding box: L, the diameter of the
    /// design domain.
    pub fn domain_diameter(&self) -> f64 {
        box_diagonal(self.extent())
    }
}

/// Euclidean diagonal of a box with the given per-axis extents.
pub fn box_diagonal(extent: [f64; 3]) -> f64 {
    (extent[0] * extent[0] + extent[1] * extent[1] + extent[2] * extent[2]).sqrt()
}

/// Strictly increasing list of positive angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    samples: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(samples: Vec<f64>) -> Result<Self, FieldError> {
        if samples.is_empty() {
            return Err(FieldError::Frequencies("at least one frequency required".into()));
        }
        for (i, &w) in samples.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(FieldError::Frequencies(format!(
                    "sample {i} = {w} must be positive and finite"
                )));
            }
            if i > 0 && w <= samples[i - 1] {
                return Err(FieldError::Frequencies(format!(
                    "samples must be strictly increasing ({} followed by {w})",
                    samples[i - 1]
                )));
            }
        }
        Ok(Self { samples })
    }

    /// Uniformly spaced band of `count` samples spanning [lo, hi].
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self, FieldError> {
        if count < 1 {
            return Err(FieldError::Frequencies("at least one sample required".into()));
        }
        if count == 1 {
            return Self::new(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Self::new((0..count).map(|i| lo + i as f64 * step).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Complex samples over (voxel, frequency) pairs, voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: SpatialGrid,
    freqs: FrequencyGrid,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(
        grid: SpatialGrid,
        freqs: FrequencyGrid,
        values: Vec<Complex64>,
    ) -> Result<Self, FieldError> {
        let expected = grid.voxel_count() * freqs.len();
        if values.len() != expected {
            return Err(FieldError::Length { expected, got: values.len() });
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(FieldError::NonFinite {
                    voxel: i / freqs.len(),
                    freq: i % freqs.len(),
                });
            }
        }
        Ok(Self { grid, freqs, values })
    }

    /// Builds a field by evaluating `f(voxel, freq)` over the full grid.
    pub fn from_fn(
        grid: SpatialGrid,
        freqs: FrequencyGrid,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self, FieldError> {
        let nf = freqs.len();
        let values = (0..grid.voxel_count() * nf)
            .map(|i| f(i / nf, i % nf))
            .collect();
        Self::new(grid, freqs, values)
    }

    /// Constant field over the given grids.
    pub fn constant(
        grid: SpatialGrid,
        freqs: FrequencyGrid,
        value: Complex64,
    ) -> Result<Self, FieldError> {
        let len = grid.voxel_count() * freqs.len();
        Self::new(grid, freqs, vec![value; len])
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, voxel: usize, freq: usize) -> Complex64 {
        self.values[voxel * self.freqs.len() + freq]
    }

    /// All frequency samples of one voxel, contiguous.
    pub fn voxel_slice(&self, voxel: usize) -> &[Complex64] {
        let nf = self.freqs.len();
        &self.values[voxel * nf..(voxel + 1) * nf]
    }
}

/// Nonnegative real samples over voxels only (frequency-independent).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.voxel_count() {
            return Err(FieldError::Length {
                expected: grid.voxel_count(),
                got: values.len(),
            });
        }
        for (voxel, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(FieldError::Density { voxel, value });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SpatialGrid, value: f64) -> Result<Self, FieldError> {
        let len = grid.voxel_count();
        Self::new(grid, vec![value; len])
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, voxel: usize) -> f64 {
        self.values[voxel]
    }
}

/// Free-space medium constants. Only the wave speed c enters the
/// construction, through k = ω/c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumConstants {
    wave_speed: f64,
}

impl MediumConstants {
    pub fn new(wave_speed: f64) -> Result<Self, FieldError> {
        if !(wave_speed.is_finite() && wave_speed > 0.0) {
            return Err(FieldError::WaveSpeed(wave_speed));
        }
        Ok(Self { wave_speed })
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    /// Wave number k = ω/c.
    pub fn wave_number(&self, omega: f64) -> f64 {
        omega / self.wave_speed
    }
}

/// On-disk grid descriptor: JSON {origin, spacing, dims, frequencies}.
/// For frequency-independent (density) fields, `frequencies` is empty.
#[derive(Debug, Serialize, Deserialize)]
struct GridDescriptor {
    origin: [f64; 3],
    spacing: [f64; 3],
    dims: [usize; 3],
    #[serde(default)]
    frequencies: Vec<f64>,
}

fn read_descriptor(path: &Path) -> Result<(SpatialGrid, Vec<f64>), FieldError> {
    let text = fs::read_to_string(path)?;
    let desc: GridDescriptor =
        serde_json::from_str(&text).map_err(|e| FieldError::Descriptor {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let grid = SpatialGrid::new(desc.origin, desc.spacing, desc.dims)?;
    Ok((grid, desc.frequencies))
}

fn write_descriptor(
    path: &Path,
    grid: &SpatialGrid,
    frequencies: &[f64],
) -> Result<(), FieldError> {
    let desc = GridDescriptor {
        origin: grid.origin(),
        spacing: grid.spacing(),
        dims: grid.dims(),
        frequencies: frequencies.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&desc).expect("descriptor serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn parse_f64(token: &str, row: usize, what: &str) -> Result<f64, FieldError> {
    token.trim().parse::<f64>().map_err(|_| FieldError::Row {
        row,
        reason: format!("cannot parse {what} from {token:?}"),
    })
}

fn parse_usize(token: &str, row: usize, what: &str) -> Result<usize, FieldError> {
    token.trim().parse::<usize>().map_err(|_| FieldError::Row {
        row,
        reason: format!("cannot parse {what} from {token:?}"),
    })
}

/// Loads a complex field from a grid descriptor (JSON) and a values file
/// (CSV `voxel_index,freq_index,re,im`). Rows must appear in enumeration
/// order: voxel-major, frequency-minor. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn load_field(descriptor_path: &Path, values_path: &Path) -> Result<SampledField, FieldError> {
    let (grid, frequencies) = read_descriptor(descriptor_path)?;
    let freqs = FrequencyGrid::new(frequencies)?;
    let nf = freqs.len();
    let expected = grid.voxel_count() * nf;

    let text = fs::read_to_string(values_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "voxel_index,freq_index,re,im" => {}
        other => {
            return Err(FieldError::Row {
                row: 0,
                reason: format!(
                    "expected header \"voxel_index,freq_index,re,im\", got {:?}",
                    other.unwrap_or("")
                ),
            })
        }
    }

    let rows: Vec<&str> = lines.filter(|line| !line.trim().is_empty()).collect();
    if rows.len() != expected {
        return Err(FieldError::RowCount { expected, got: rows.len() });
    }

    let mut values = Vec::with_capacity(expected);
    for (i, line) in rows.into_iter().enumerate() {
        let row = i + 1;
        let mut parts = line.split(',');
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| FieldError::Row { row, reason: format!("missing {what} column") })
        };
        let voxel = parse_usize(next("voxel_index")?, row, "voxel_index")?;
        let freq = parse_usize(next("freq_index")?, row, "freq_index")?;
        let re = parse_f64(next("re")?, row, "re")?;
        let im = parse_f64(next("im")?, row, "im")?;

        let (want_voxel, want_freq) = (i / nf, i % nf);
        if voxel != want_voxel || freq != want_freq {
            return Err(FieldError::Row {
                row,
                reason: format!(
                    "out of order: expected voxel {want_voxel}, freq {want_freq}, got voxel {voxel}, freq {freq}"
                ),
            });
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(FieldError::Row {
                row,
                reason: format!("non-finite value {re},{im}"),
            });
        }
        values.push(Complex64::new(re, im));
    }
    SampledField::new(grid, freqs, values)
}

/// Saves a complex field as a grid descriptor plus a values CSV. Floats are
/// written in shortest round-trip form, so save → load reproduces the field
/// bit-exactly.
pub fn save_field(
    field: &SampledField,
    descriptor_path: &Path,
    values_path: &Path,
) -> Result<(), FieldError> {
    write_descriptor(descriptor_path, field.grid(), field.freqs().samples())?;
    let nf = field.freqs().len();
    let mut out = String::from("voxel_index,freq_index,re,im\n");
    for (i, v) in field.values().iter().enumerate() {
        writeln!(out, "{},{},{:?},{:?}", i / nf, i % nf, v.re, v.im).expect("string write");
    }
    fs::write(values_path, out)?;
    Ok(())
}

/// Loads a density field from a grid descriptor and a values CSV
/// (`voxel_index,value`). Any `frequencies` entry in the descriptor is
/// ignored: densities are frequency-independent.
pub fn load_density(
    descriptor_path: &Path,
    values_path: &Path,
) -> Result<DensityField, FieldError> {
    let (grid, _) = read_descriptor(descriptor_path)?;
    let expected = grid.voxel_count();

    let text = fs::read_to_string(values_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "voxel_index,value" => {}
        other => {
            return Err(FieldError::Row {
                row: 0,
                reason: format!(
                    "expected header \"voxel_index,value\", got {:?}",
                    other.unwrap_or("")
                ),
            })
        }
    }

    let rows: Vec<&str> = lines.filter(|line| !line.trim().is_empty()).collect();
    if rows.len() != expected {
        return Err(FieldError::RowCount { expected, got: rows.len() });
    }

    let mut values = Vec::with_capacity(expected);
    for (i, line) in rows.into_iter().enumerate() {
        let row = i + 1;
        let mut parts = line.split(',');
        let voxel_tok = parts
            .next()
            .ok_or_else(|| FieldError::Row { row, reason: "missing voxel_index".into() })?;
        let value_tok = parts
            .next()
            .ok_or_else(|| FieldError::Row { row, reason: "missing value".into() })?;
        let voxel = parse_usize(voxel_tok, row, "voxel_index")?;
        if voxel != i {
            return Err(FieldError::Row {
                row,
                reason: format!("out of order: expected voxel {i}, got {voxel}"),
            });
        }
        let value = parse_f64(value_tok, row, "value")?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(FieldError::Row {
                row,
                reason: format!("density must be finite and nonnegative, got {value}"),
            });
        }
        values.push(value);
    }
    DensityField::new(grid, values)
}

/// Saves a density field (descriptor with empty `frequencies` plus a
/// `voxel_index,value` CSV).
pub fn save_density(
    density: &DensityField,
    descriptor_path: &Path,
    values_path: &Path,
) -> Result<(), FieldError> {
    write_descriptor(descriptor_path, density.grid(), &[])?;
    let mut out = String::from("voxel_index,value\n");
    for (i, v) in density.values().iter().enumerate() {
        writeln!(out, "{},{:?}", i, v).expect("string write");
    }
    fs::write(values_path, out)?;
    Ok(())
}
