//! Embedding plan: from (N, h) to concrete ball positions and impedances.
//!
//! The domain (the grid's bounding box) is partitioned into non-overlapping
//! cubes Q_j of side `cube_side`. Each cube receives
//!
//! ```text
//! ν_j = [ ∫_{Q_j} N(x) dx / a ]
//! ```
//!
//! balls of radius a ([·] = nearest integer, ties round up), placed on a
//! simple-cubic sub-lattice of pitch d = κ·a^{1/3} centered in the cube and
//! filled in lexicographic order. Ball m in cube j carries the boundary
//! impedance ζ_j(ω) = h(x_j, ω)/a, with h read at the voxel center nearest
//! to the cube center x_j.
//!
//! The density integral treats N as constant on each voxel, so it is exact
//! for voxel-aligned cubes. [`verify_manifest`] re-derives the invariant
//! that a·(ball count) approximates ∫N dx to within the nearest-integer
//! rounding bound, and re-checks the pairwise spacing.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{DensityField, SampledField, SpatialGrid};

/// Relative slack for floating-point geometry comparisons.
const GEOM_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("spacing factor kappa must be positive and finite, got {0}")]
    BadKappa(f64),
    #[error("ball diameter 2a = {diameter} must be smaller than the lattice spacing d = {spacing}")]
    SpacingVsRadius { diameter: f64, spacing: f64 },
    #[error("cube side {cube_side} must exceed the lattice spacing d = {spacing}")]
    CubeVsSpacing { cube_side: f64, spacing: f64 },
    #[error("cube side {cube_side} does not tile the domain extent {extent} along axis {axis}")]
    Tiling { axis: usize, extent: f64, cube_side: f64 },
    #[error("cube [{min:?}, {max:?}] lies outside the grid bounding box")]
    CubeOutsideGrid { min: [f64; 3], max: [f64; 3] },
    #[error(
        "capacity exceeded in cube {cube}: {needed} balls required but only {capacity} lattice \
         sites fit at spacing {spacing}{hint}"
    )]
    CapacityExceeded {
        cube: usize,
        needed: u64,
        capacity: u64,
        spacing: f64,
        hint: String,
    },
    #[error("nearest integer undefined for {0}; input must be finite and nonnegative")]
    BadRound(f64),
    #[error("density and impedance fields are on different grids")]
    GridMismatch,
    #[error("manifest i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest parse: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Nearest integer to b ≥ 0; ties at .5 round up.
pub fn nearest_integer(b: f64) -> Result<u64, PlacementError> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(PlacementError::BadRound(b));
    }
    Ok((b + 0.5).floor() as u64)
}

/// Axis-aligned cube bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// One cube of the partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub index: usize,
    pub center: [f64; 3],
    pub bounds: CubeBounds,
}

/// Exact tiling of the grid's bounding box by cubes of one side length,
/// enumerated x-fastest like voxels.
#[derive(Debug, Clone)]
pub struct CubePartition {
    pub cube_side: f64,
    pub counts: [usize; 3],
    pub cubes: Vec<Cube>,
}

/// Partitions the grid bounding box into cubes of side `cube_side`. The
/// side must divide every axis extent (relative tolerance 1e-9); partial
/// boundary cubes are not supported.
pub fn partition_for(grid: &SpatialGrid, cube_side: f64) -> Result<CubePartition, PlacementError> {
    if !(cube_side.is_finite() && cube_side > 0.0) {
        return Err(PlacementError::Tiling { axis: 0, extent: 0.0, cube_side });
    }
    let extent = grid.extent();
    let origin = grid.min_corner();
    let mut counts = [0usize; 3];
    for axis in 0..3 {
        let ratio = extent[axis] / cube_side;
        let count = ratio.round();
        if count < 1.0 || (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
            return Err(PlacementError::Tiling { axis, extent: extent[axis], cube_side });
        }
        counts[axis] = count as usize;
    }
    let mut cubes = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
    let mut index = 0;
    for iz in 0..counts[2] {
        for iy in 0..counts[1] {
            for ix in 0..counts[0] {
                let idx = [ix, iy, iz];
                let mut min = [0.0; 3];
                let mut max = [0.0; 3];
                let mut center = [0.0; 3];
                for axis in 0..3 {
                    min[axis] = origin[axis] + idx[axis] as f64 * cube_side;
                    max[axis] = min[axis] + cube_side;
                    center[axis] = min[axis] + 0.5 * cube_side;
                }
                cubes.push(Cube { index, center, bounds: CubeBounds { min, max } });
                index += 1;
            }
        }
    }
    Ok(CubePartition { cube_side, counts, cubes })
}

/// ∫ N dx over the cube, treating N as constant on each voxel (overlap
/// volumes per axis). Exact when N is piecewise constant on voxels, in
/// particular for cubes aligned with voxel boundaries.
pub fn cube_integral(density: &DensityField, bounds: &CubeBounds) -> Result<f64, PlacementError> {
    let grid = density.grid();
    let lo = grid.min_corner();
    let hi = grid.max_corner();
    for axis in 0..3 {
        let tol = 1e-9 * (hi[axis] - lo[axis]).abs().max(1.0);
        if bounds.min[axis] < lo[axis] - tol || bounds.max[axis] > hi[axis] + tol {
            return Err(PlacementError::CubeOutsideGrid { min: bounds.min, max: bounds.max });
        }
    }

    // Per-axis voxel index ranges overlapping the cube, and per-axis overlap
    // lengths; the voxel-cube overlap volume is their product.
    let spacing = grid.spacing();
    let dims = grid.dims();
    let mut ranges: [(usize, usize); 3] = [(0, 0); 3];
    for axis in 0..3 {
        let first = ((bounds.min[axis] - lo[axis]) / spacing[axis]).floor().max(0.0) as usize;
        let last = (((bounds.max[axis] - lo[axis]) / spacing[axis]).ceil() as usize)
            .min(dims[axis]);
        ranges[axis] = (first.min(dims[axis]), last);
    }

    let overlap = |axis: usize, i: usize| -> f64 {
        let v_lo = lo[axis] + i as f64 * spacing[axis];
        let v_hi = v_lo + spacing[axis];
        (v_hi.min(bounds.max[axis]) - v_lo.max(bounds.min[axis])).max(0.0)
    };

    let mut integral = 0.0;
    for iz in ranges[2].0..ranges[2].1 {
        let wz = overlap(2, iz);
        if wz == 0.0 {
            continue;
        }
        for iy in ranges[1].0..ranges[1].1 {
            let wy = overlap(1, iy);
            if wy == 0.0 {
                continue;
            }
            for ix in ranges[0].0..ranges[0].1 {
                let wx = overlap(0, ix);
                if wx == 0.0 {
                    continue;
                }
                integral += density.at(grid.voxel_index([ix, iy, iz])) * wx * wy * wz;
            }
        }
    }
    Ok(integral)
}

/// Impedance table entry ζ = h(x_j, ω)/a at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaEntry {
    pub omega: f64,
    pub re: f64,
    pub im: f64,
}

/// Balls and impedances assigned to one cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeEmbedding {
    pub index: usize,
    pub center: [f64; 3],
    pub nu: u64,
    pub balls: Vec<[f64; 3]>,
    pub zeta: Vec<ZetaEntry>,
}

/// The concrete embedding: radius, spacing, and per-cube ball data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub radius_a: f64,
    pub spacing_d: f64,
    pub kappa: f64,
    pub cube_side: f64,
    pub cubes: Vec<CubeEmbedding>,
}

impl EmbeddingManifest {
    pub fn total_balls(&self) -> u64 {
        self.cubes.iter().map(|c| c.nu).sum()
    }

    /// Deterministic JSON serialization (stable field order, shortest
    /// round-trip floats): identical manifests are byte-identical.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<(), PlacementError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PlacementError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Flat geometry-only CSV: `cube,ball,x,y,z`.
    pub fn geometry_csv(&self) -> String {
        let mut out = String::from("cube,ball,x,y,z\n");
        for cube in &self.cubes {
            for (m, b) in cube.balls.iter().enumerate() {
                writeln!(out, "{},{},{:?},{:?},{:?}", cube.index, m, b[0], b[1], b[2])
                    .expect("string write");
            }
        }
        out
    }
}

/// Number of pitch-`spacing` lattice sites per axis that fit strictly
/// inside a segment of length `side`: the largest m with (m−1)·spacing <
/// side. (`floor(side/spacing)` undercounts by one site whenever
/// side/spacing is not an integer.)
fn lattice_sites_per_axis(side: f64, spacing: f64) -> u64 {
    ((side * (1.0 - GEOM_EPS)) / spacing).floor() as u64 + 1
}

fn smallest_feasible_radius(integral: f64, cube_side: f64, kappa: f64, radius_a: f64) -> Option<f64> {
    let feasible = |a: f64| -> bool {
        let d = kappa * a.cbrt();
        if 2.0 * a >= d || cube_side <= d {
            return false;
        }
        let capacity = lattice_sites_per_axis(cube_side, d).pow(3);
        match nearest_integer(integral / a) {
            Ok(nu) => nu <= capacity,
            Err(_) => false,
        }
    };
    // Geometric scan upward from the requested radius, then bisect the
    // feasibility boundary.
    let mut lo = radius_a;
    let mut hi = radius_a;
    let cap = (cube_side / kappa).powi(3).min((kappa / 2.0).powf(1.5));
    for _ in 0..2000 {
        hi *= 1.02;
        if hi >= cap {
            return None;
        }
        if feasible(hi) {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        lo = hi;
    }
    None
}

/// Plans the embedding: cube partition, per-cube ball count
/// ν_j = [∫N/a], centered pitch-d lattice positions filled in
/// lexicographic order, and per-frequency impedance tables
/// ζ_j(ω) = h(x_j,ω)/a.
pub fn plan_embedding(
    density: &DensityField,
    impedance: &SampledField,
    radius_a: f64,
    kappa: f64,
    cube_side: f64,
) -> Result<EmbeddingManifest, PlacementError> {
    if !(radius_a.is_finite() && radius_a > 0.0) {
        return Err(PlacementError::BadRadius(radius_a));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(PlacementError::BadKappa(kappa));
    }
    if density.grid() != impedance.grid() {
        return Err(PlacementError::GridMismatch);
    }
    let spacing_d = kappa * radius_a.cbrt();
    if 2.0 * radius_a >= spacing_d {
        return Err(PlacementError::SpacingVsRadius { diameter: 2.0 * radius_a, spacing: spacing_d });
    }
    if cube_side <= spacing_d {
        return Err(PlacementError::CubeVsSpacing { cube_side, spacing: spacing_d });
    }

    let partition = partition_for(density.grid(), cube_side)?;
    let sites_per_axis = lattice_sites_per_axis(cube_side, spacing_d);
    let capacity = sites_per_axis.pow(3);
    let omegas = impedance.freqs().samples();

    let mut cubes = Vec::with_capacity(partition.cubes.len());
    for cube in &partition.cubes {
        let integral = cube_integral(density, &cube.bounds)?;
        let nu = nearest_integer(integral / radius_a)?;
        if nu > capacity {
            let hint = match smallest_feasible_radius(integral, cube_side, kappa, radius_a) {
                Some(a) => format!("; smallest feasible radius_a ~ {a:.6e}"),
                None => String::new(),
            };
            return Err(PlacementError::CapacityExceeded {
                cube: cube.index,
                needed: nu,
                capacity,
                spacing: spacing_d,
                hint,
            });
        }

        // Centered lattice: site i at center − (m−1)/2·d + i·d per axis,
        // filled x-fastest.
        let m = sites_per_axis as usize;
        let mut balls = Vec::with_capacity(nu as usize);
        'fill: for iz in 0..m {
            for iy in 0..m {
                for ix in 0..m {
                    if balls.len() == nu as usize {
                        break 'fill;
                    }
                    let idx = [ix, iy, iz];
                    let mut point = [0.0; 3];
                    for axis in 0..3 {
                        point[axis] = cube.center[axis]
                            + (idx[axis] as f64 - 0.5 * (m as f64 - 1.0)) * spacing_d;
                    }
                    balls.push(point);
                }
            }
        }

        let nearest = density.grid().nearest_voxel(cube.center);
        let zeta = omegas
            .iter()
            .enumerate()
            .map(|(f, &omega)| {
                let h = impedance.at(nearest, f);
                ZetaEntry { omega, re: h.re / radius_a, im: h.im / radius_a }
            })
            .collect();

        cubes.push(CubeEmbedding {
            index: cube.index,
            center: cube.center,
            nu,
            balls,
            zeta,
        });
    }

    Ok(EmbeddingManifest { radius_a, spacing_d, kappa, cube_side, cubes })
}

/// Per-cube verification row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeCheck {
    pub index: usize,
    /// ∫_{Q_j} N dx
    pub integral: f64,
    /// a · (ball count)
    pub count_mass: f64,
    /// |count_mass − integral|
    pub deviation: f64,
    /// deviation / integral; null when the integral vanishes
    pub relative_deviation: Option<f64>,
    /// listed balls match ν_j
    pub count_matches: bool,
    /// min pairwise distance within the cube, when ≥ 2 balls
    pub min_spacing: Option<f64>,
    pub spacing_ok: bool,
}

/// Whole-manifest verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub per_cube: Vec<CubeCheck>,
    pub total_integral: f64,
    pub total_count_mass: f64,
    /// |a·Σν − ∫_D N dx|
    pub total_deviation: f64,
    /// (number of cubes)·a/2: the nearest-integer rounding bound
    pub deviation_bound: f64,
    pub within_bound: bool,
    pub spacing_ok: bool,
    pub counts_match: bool,
    pub min_spacing: Option<f64>,
}

impl VerificationReport {
    pub fn passes(&self) -> bool {
        self.within_bound && self.spacing_ok && self.counts_match
    }
}

/// Re-derives |a·(ball count) − ∫N| per cube and in total, and re-checks
/// the pairwise spacing ≥ d within each cube. Pure report; never fails on
/// violations.
pub fn verify_manifest(
    manifest: &EmbeddingManifest,
    density: &DensityField,
) -> Result<VerificationReport, PlacementError> {
    let a = manifest.radius_a;
    let d = manifest.spacing_d;
    let mut per_cube = Vec::with_capacity(manifest.cubes.len());
    let mut total_integral = 0.0;
    let mut total_count = 0u64;
    let mut spacing_ok = true;
    let mut counts_match = true;
    let mut global_min: Option<f64> = None;

    for cube in &manifest.cubes {
        let half = 0.5 * manifest.cube_side;
        let bounds = CubeBounds {
            min: [cube.center[0] - half, cube.center[1] - half, cube.center[2] - half],
            max: [cube.center[0] + half, cube.center[1] + half, cube.center[2] + half],
        };
        let integral = cube_integral(density, &bounds)?;
        let count = cube.balls.len() as u64;
        let count_mass = a * count as f64;
        let deviation = (count_mass - integral).abs();
        let relative_deviation = (integral > 0.0).then(|| deviation / integral);
        let count_ok = count == cube.nu;

        let mut min_spacing: Option<f64> = None;
        for i in 0..cube.balls.len() {
            for j in (i + 1)..cube.balls.len() {
                let (p, q) = (cube.balls[i], cube.balls[j]);
                let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                    .sqrt();
                min_spacing = Some(min_spacing.map_or(dist, |m| m.min(dist)));
            }
        }
        let cube_spacing_ok = min_spacing.is_none_or(|m| m >= d * (1.0 - GEOM_EPS));

        total_integral += integral;
        total_count += count;
        spacing_ok &= cube_spacing_ok;
        counts_match &= count_ok;
        if let Some(m) = min_spacing {
            global_min = Some(global_min.map_or(m, |g| g.min(m)));
        }
        per_cube.push(CubeCheck {
            index: cube.index,
            integral,
            count_mass,
            deviation,
            relative_deviation,
            count_matches: count_ok,
            min_spacing,
            spacing_ok: cube_spacing_ok,
        });
    }

    let total_count_mass = a * total_count as f64;
    let total_deviation = (total_count_mass - total_integral).abs();
    let deviation_bound = manifest.cubes.len() as f64 * a / 2.0;
    Ok(VerificationReport {
        per_cube,
        total_integral,
        total_count_mass,
        total_deviation,
        deviation_bound,
        within_bound: total_deviation <= deviation_bound + GEOM_EPS * total_integral.max(1.0),
        spacing_ok,
        counts_match,
        min_spacing: global_min,
    })
}
