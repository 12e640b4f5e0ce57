//! The analytic core: from a pair of refraction coefficients to the
//! particle density N(x) and boundary-impedance factor h(x,ω).
//!
//! Given the background coefficient n₀²(x,ω) and the desired coefficient
//! n²(x,ω), the susceptibility perturbation the embedded particles must
//! synthesize is
//!
//! ```text
//! p(x,ω) = (ω/c)² · [n₀²(x,ω) − n²(x,ω)],     Im p ≤ 0,
//! ```
//!
//! and the governing relation is
//!
//! ```text
//! p(x,ω) = 4π · h(x,ω) · N(x) / (1 + h(x,ω)).
//! ```
//!
//! The solver writes p = R e^{iψ}, picks N(x) so that the density ratio
//! ρ = R/(4πN) stays below a target < 1, then recovers h through the polar
//! form of 1 + h = r e^{iφ}:
//!
//! ```text
//! r = 1 / √(ρ² − 2ρ cos ψ + 1),
//! sin φ = ρ r sin ψ,   cos φ = r (1 − ρ cos ψ),
//! h = (r cos φ − 1) + i · r sin φ.
//! ```
//!
//! With ρ < 1 this is nonsingular, cos φ > 0, and Im p ≤ 0 forces
//! Im h ≤ 0. The choice of (h, N) is non-unique: any valid ρ target gives
//! another solution pair, and N is frequency-independent by construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::fields::{DensityField, FieldError, MediumConstants, SampledField};

/// Default density-ratio target. Any value in (0,1) works; 0.5 keeps
/// r ≤ 2 and stays far from the ρ e^{iψ} = 1 singularity.
pub const RHO_TARGET_DEFAULT: f64 = 0.5;

/// Reject the polar construction when ρ² − 2ρ cos ψ + 1 (that is,
/// |ρe^{iψ} − 1|²) falls below this; the radius formula divides by its
/// square root. Unreachable when ρ ≤ a target < 1; approachable only with
/// a manually supplied density.
pub const SINGULARITY_GUARD: f64 = 1e-8;

/// Round-trip tolerance scale: |p_back − p| ≤ tol · (1 + |p|).
pub const ROUNDTRIP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("fields are on different spatial grids")]
    GridMismatch,
    #[error("fields are on different frequency grids")]
    FrequencyMismatch,
    #[error("Im p = {im} > 0 at voxel {voxel}, frequency index {freq}; targets must satisfy Im p <= 0")]
    PositiveImaginary { voxel: usize, freq: usize, im: f64 },
    #[error("rho target must lie in (0, 1), got {0}")]
    RhoTarget(f64),
    #[error("density required: p = {p} is nonzero but N = 0")]
    DensityRequired { p: Complex64 },
    #[error("parameterization singular (|rho e^{{i psi}} - 1|^2 = {gram:.3e}), increase N")]
    Singular { gram: f64 },
    #[error("pole: h = -1 has no finite p")]
    Pole,
    #[error("density ratio rho = {rho} >= 1 at voxel {voxel}, frequency index {freq}; supplied density too small")]
    RhoOutOfRange { voxel: usize, freq: usize, rho: f64 },
    #[error("at voxel {voxel}, frequency index {freq}: {source}")]
    AtSample {
        voxel: usize,
        freq: usize,
        #[source]
        source: Box<InversionError>,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Modulus/argument form of a complex sample: p = R e^{iψ} with
/// ψ ∈ (−π, π] and the convention ψ = 0 when R = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarForm {
    /// R = |p|.
    pub modulus: f64,
    /// ψ = arg p.
    pub argument: f64,
}

/// Splits p into modulus R and argument ψ ∈ (−π, π]; R = 0 maps to ψ = 0.
pub fn polar_decompose(p: Complex64) -> PolarForm {
    let modulus = p.norm();
    if modulus == 0.0 {
        return PolarForm { modulus: 0.0, argument: 0.0 };
    }
    let mut argument = p.im.atan2(p.re);
    if argument == -PI {
        argument = PI;
    }
    PolarForm { modulus, argument }
}

/// Impedance factor plus the intermediates of the polar construction,
/// exposed so range/sign invariants can be checked directly.
#[derive(Debug, Clone, Copy)]
pub struct ImpedanceSolution {
    /// h = h₁ + ih₂.
    pub impedance: Complex64,
    /// ρ = |p| / (4πN); 0 when p = 0.
    pub density_ratio: f64,
    /// r = |1 + h|.
    pub radius: f64,
    /// sin φ where φ = arg(1 + h).
    pub sin_phi: f64,
    /// cos φ where φ = arg(1 + h).
    pub cos_phi: f64,
}

/// Solves 4πN h/(1+h) = p for h at a single sample.
///
/// p = 0 yields h = 0 for any N ≥ 0. Sign guarantee: Im p ≤ 0 implies
/// Im h ≤ 0 exactly (the imaginary part is a product of nonnegative
/// factors with Im p/|p|).
pub fn solve_h(p: Complex64, density: f64) -> Result<Complex64, InversionError> {
    solve_h_detailed(p, density).map(|sol| sol.impedance)
}

/// As [`solve_h`], also returning ρ, r, sin φ, cos φ.
pub fn solve_h_detailed(p: Complex64, density: f64) -> Result<ImpedanceSolution, InversionError> {
    let polar = polar_decompose(p);
    if polar.modulus == 0.0 {
        // ρ = 0 branch: r = 1, φ = 0, hence h = 0.
        return Ok(ImpedanceSolution {
            impedance: Complex64::new(0.0, 0.0),
            density_ratio: 0.0,
            radius: 1.0,
            sin_phi: 0.0,
            cos_phi: 1.0,
        });
    }
    if density <= 0.0 {
        return Err(InversionError::DensityRequired { p });
    }

    let rho = polar.modulus / (4.0 * PI * density);
    // Component ratios rather than cos/sin of the angle: keeps the sign of
    // Im h exactly tied to the sign of Im p.
    let cos_psi = p.re / polar.modulus;
    let sin_psi = p.im / polar.modulus;

    let gram = rho * rho - 2.0 * rho * cos_psi + 1.0;
    if gram < SINGULARITY_GUARD {
        return Err(InversionError::Singular { gram });
    }
    let radius = 1.0 / gram.sqrt();
    let sin_phi = rho * sin_psi * radius;
    let cos_phi = (1.0 - rho * cos_psi) * radius;
    let impedance = Complex64::new(radius * cos_phi - 1.0, radius * sin_phi);
    Ok(ImpedanceSolution { impedance, density_ratio: rho, radius, sin_phi, cos_phi })
}

/// Evaluates p = 4πN h/(1+h). The independent forward route used to
/// verify every solve by back-substitution.
pub fn forward_p(h: Complex64, density: f64) -> Result<Complex64, InversionError> {
    let denom = Complex64::new(1.0, 0.0) + h;
    if denom.re == 0.0 && denom.im == 0.0 {
        return Err(InversionError::Pole);
    }
    Ok(Complex64::new(4.0 * PI * density, 0.0) * h / denom)
}

/// Computes p(x,ω) = (ω/c)²[n₀²(x,ω) − n²(x,ω)] over matching fields.
pub fn compute_p(
    n0sq: &SampledField,
    nsq: &SampledField,
    medium: &MediumConstants,
) -> Result<SampledField, InversionError> {
    if n0sq.grid() != nsq.grid() {
        return Err(InversionError::GridMismatch);
    }
    if n0sq.freqs() != nsq.freqs() {
        return Err(InversionError::FrequencyMismatch);
    }
    let omegas = n0sq.freqs().samples().to_vec();
    let field = SampledField::from_fn(*n0sq.grid(), n0sq.freqs().clone(), |voxel, freq| {
        let k = medium.wave_number(omegas[freq]);
        (n0sq.at(voxel, freq) - nsq.at(voxel, freq)) * (k * k)
    })?;
    Ok(field)
}

/// Chooses the frequency-independent density N(x) = sup_ω |p(x,ω)| / (4π·ρ*),
/// which pins the realized density ratio at or below ρ* < 1 for every
/// frequency. Voxels where p vanishes at all frequencies get N = 0.
pub fn choose_density(p: &SampledField, rho_target: f64) -> Result<DensityField, InversionError> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(InversionError::RhoTarget(rho_target));
    }
    let values = (0..p.grid().voxel_count())
        .map(|voxel| {
            let sup = p
                .voxel_slice(voxel)
                .iter()
                .map(|v| v.norm())
                .fold(0.0f64, f64::max);
            sup / (4.0 * PI * rho_target)
        })
        .collect();
    Ok(DensityField::new(*p.grid(), values)?)
}

/// The designed material: impedance factor h(x,ω), density N(x), and the
/// largest density ratio actually used.
#[derive(Debug, Clone)]
pub struct MaterialPlan {
    pub impedance: SampledField,
    pub density: DensityField,
    pub rho_max_used: f64,
}

/// Per-sample diagnostics recorded by [`design_material`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub voxel: usize,
    pub freq: usize,
    pub rho: f64,
    pub residual: f64,
}

/// Round-trip diagnostics for a whole design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionReport {
    pub samples: Vec<SampleDiagnostics>,
    pub max_residual: f64,
    /// True when every residual is within ROUNDTRIP_TOL · (1 + |p|).
    pub residuals_pass: bool,
}

/// Full design pass: p from the coefficient pair, automatic density choice
/// at `rho_target`, impedance solve per sample, and verification by
/// back-substitution into the forward relation.
pub fn design_material(
    n0sq: &SampledField,
    nsq: &SampledField,
    medium: &MediumConstants,
    rho_target: f64,
) -> Result<(MaterialPlan, InversionReport), InversionError> {
    let p = compute_p(n0sq, nsq, medium)?;
    reject_positive_imaginary(&p)?;
    let density = choose_density(&p, rho_target)?;
    solve_over_field(&p, &density)
}

/// Design with a caller-supplied density field. Validates ρ < 1 per sample
/// instead of choosing N; any valid density yields another solution pair.
pub fn design_material_with_density(
    n0sq: &SampledField,
    nsq: &SampledField,
    medium: &MediumConstants,
    density: &DensityField,
) -> Result<(MaterialPlan, InversionReport), InversionError> {
    let p = compute_p(n0sq, nsq, medium)?;
    reject_positive_imaginary(&p)?;
    if density.grid() != p.grid() {
        return Err(InversionError::GridMismatch);
    }
    solve_over_field(&p, density)
}

fn reject_positive_imaginary(p: &SampledField) -> Result<(), InversionError> {
    let nf = p.freqs().len();
    for (i, v) in p.values().iter().enumerate() {
        if v.im > 0.0 {
            return Err(InversionError::PositiveImaginary {
                voxel: i / nf,
                freq: i % nf,
                im: v.im,
            });
        }
    }
    Ok(())
}

fn solve_over_field(
    p: &SampledField,
    density: &DensityField,
) -> Result<(MaterialPlan, InversionReport), InversionError> {
    let nf = p.freqs().len();
    let mut h_values = Vec::with_capacity(p.values().len());
    let mut samples = Vec::with_capacity(p.values().len());
    let mut rho_max = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut residuals_pass = true;

    for voxel in 0..p.grid().voxel_count() {
        let n_here = density.at(voxel);
        for freq in 0..nf {
            let sample = p.at(voxel, freq);
            let sol = solve_h_detailed(sample, n_here).map_err(|e| locate(e, voxel, freq))?;
            if sol.density_ratio >= 1.0 {
                return Err(InversionError::RhoOutOfRange {
                    voxel,
                    freq,
                    rho: sol.density_ratio,
                });
            }
            let back = forward_p(sol.impedance, n_here).map_err(|e| locate(e, voxel, freq))?;
            let residual = (back - sample).norm();
            rho_max = rho_max.max(sol.density_ratio);
            max_residual = max_residual.max(residual);
            if residual > ROUNDTRIP_TOL * (1.0 + sample.norm()) {
                residuals_pass = false;
            }
            samples.push(SampleDiagnostics {
                voxel,
                freq,
                rho: sol.density_ratio,
                residual,
            });
            h_values.push(sol.impedance);
        }
    }

    let impedance = SampledField::new(*p.grid(), p.freqs().clone(), h_values)?;
    Ok((
        MaterialPlan { impedance, density: density.clone(), rho_max_used: rho_max },
        InversionReport { samples, max_residual, residuals_pass },
    ))
}

fn locate(err: InversionError, voxel: usize, freq: usize) -> InversionError {
    InversionError::AtSample { voxel, freq, source: Box::new(err) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FrequencyGrid, SpatialGrid};
    use proptest::prelude::*;

    fn cplx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polar_zero_convention() {
        let form = polar_decompose(cplx(0.0, 0.0));
        assert_eq!(form.modulus, 0.0);
        assert_eq!(form.argument, 0.0);
    }

    #[test]
    fn polar_negative_imaginary_axis() {
        let form = polar_decompose(cplx(0.0, -2.0 * PI));
        assert!((form.modulus - 2.0 * PI).abs() < 1e-15);
        assert!((form.argument + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn polar_negative_real_axis_maps_to_plus_pi() {
        let form = polar_decompose(cplx(-3.0, 0.0));
        assert!((form.modulus - 3.0).abs() < 1e-15);
        assert_eq!(form.argument, PI);
        // (−π, π] also under a negative zero imaginary part
        let form = polar_decompose(cplx(-3.0, -0.0));
        assert_eq!(form.argument, PI);
    }

    #[test]
    fn solve_zero_p_gives_zero_h() {
        let h = solve_h(cplx(0.0, 0.0), 0.0).unwrap();
        assert_eq!(h, cplx(0.0, 0.0));
        let h = solve_h(cplx(0.0, 0.0), 3.0).unwrap();
        assert_eq!(h, cplx(0.0, 0.0));
    }

    #[test]
    fn solve_real_example() {
        // p = 2π, N = 1: ρ = 0.5, ψ = 0 → r = 2, cos φ = 1 → h = 1.
        let sol = solve_h_detailed(cplx(2.0 * PI, 0.0), 1.0).unwrap();
        assert!((sol.impedance - cplx(1.0, 0.0)).norm() < 1e-14);
        assert!((sol.radius - 2.0).abs() < 1e-14);
        assert!((sol.cos_phi - 1.0).abs() < 1e-14);
        let back = forward_p(sol.impedance, 1.0).unwrap();
        assert!((back - cplx(2.0 * PI, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn solve_imaginary_example() {
        // p = −2πi, N = 1 → h = −0.2 − 0.4i.
        let h = solve_h(cplx(0.0, -2.0 * PI), 1.0).unwrap();
        assert!((h - cplx(-0.2, -0.4)).norm() < 1e-14);
        let back = forward_p(h, 1.0).unwrap();
        assert!((back - cplx(0.0, -2.0 * PI)).norm() < 1e-13);
    }

    #[test]
    fn forward_examples() {
        assert_eq!(forward_p(cplx(0.0, 0.0), 5.0).unwrap(), cplx(0.0, 0.0));
        let p = forward_p(cplx(1.0, 0.0), 1.0).unwrap();
        assert!((p - cplx(2.0 * PI, 0.0)).norm() < 1e-13);
        let p = forward_p(cplx(-0.2, -0.4), 1.0).unwrap();
        assert!((p - cplx(0.0, -2.0 * PI)).norm() < 1e-13);
        assert!(matches!(
            forward_p(cplx(-1.0, 0.0), 1.0),
            Err(InversionError::Pole)
        ));
    }

    #[test]
    fn density_required_when_p_nonzero() {
        let err = solve_h(cplx(1.0, 0.0), 0.0).unwrap_err();
        assert!(err.to_string().starts_with("density required"));
    }

    #[test]
    fn singularity_guard_fires_near_rho_one_psi_zero() {
        // ρ ≈ 1, ψ = 0 is the singular corner: reachable only by manual N.
        let p = cplx(4.0 * PI, 0.0); // R = 4π so N = 1 gives ρ = 1 exactly
        let err = solve_h(p, 1.0).unwrap_err();
        assert!(err.to_string().contains("increase N"));
    }

    fn grid1() -> SpatialGrid {
        SpatialGrid::new([0.0; 3], [1.0; 3], [1, 1, 1]).unwrap()
    }

    #[test]
    fn compute_p_direct_evaluation() {
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![2.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap(); // ω/c = 2
        let n0sq = SampledField::constant(grid, freqs.clone(), cplx(1.0, 0.0)).unwrap();
        let nsq = SampledField::constant(grid, freqs, cplx(0.5, 0.0)).unwrap();
        let p = compute_p(&n0sq, &nsq, &medium).unwrap();
        assert!((p.at(0, 0) - cplx(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compute_p_identity_case() {
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0, 2.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap();
        let field = SampledField::constant(grid, freqs, cplx(1.3, -0.2)).unwrap();
        let p = compute_p(&field, &field, &medium).unwrap();
        assert!(p.values().iter().all(|v| v.re == 0.0 && v.im == 0.0));
    }

    #[test]
    fn compute_p_sign_bookkeeping() {
        // n₀² = 1, n² = 1 − i, ω/c = 1 → p = i, rejected downstream.
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap();
        let n0sq = SampledField::constant(grid, freqs.clone(), cplx(1.0, 0.0)).unwrap();
        let nsq = SampledField::constant(grid, freqs, cplx(1.0, -1.0)).unwrap();
        let p = compute_p(&n0sq, &nsq, &medium).unwrap();
        assert!((p.at(0, 0) - cplx(0.0, 1.0)).norm() < 1e-15);
        let err = design_material(&n0sq, &nsq, &medium, 0.5).unwrap_err();
        assert!(matches!(
            err,
            InversionError::PositiveImaginary { voxel: 0, freq: 0, .. }
        ));
    }

    #[test]
    fn choose_density_examples() {
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        // R samples {π, 2π, 4π}, ρ* = 0.8 → N = 1.25, ρ = {0.2, 0.4, 0.8}.
        let p = SampledField::new(
            grid,
            freqs,
            vec![cplx(0.0, -PI), cplx(2.0 * PI, 0.0), cplx(0.0, -4.0 * PI)],
        )
        .unwrap();
        let density = choose_density(&p, 0.8).unwrap();
        assert!((density.at(0) - 1.25).abs() < 1e-12);
        for (value, rho_want) in p.voxel_slice(0).iter().zip([0.2, 0.4, 0.8]) {
            let sol = solve_h_detailed(*value, density.at(0)).unwrap();
            assert!((sol.density_ratio - rho_want).abs() < 1e-12);
        }

        // sup R = 2π at ρ* = 0.5 → N = 1.
        let freqs = FrequencyGrid::new(vec![1.0]).unwrap();
        let p = SampledField::constant(grid1(), freqs, cplx(0.0, -2.0 * PI)).unwrap();
        assert!((choose_density(&p, 0.5).unwrap().at(0) - 1.0).abs() < 1e-12);

        // R ≡ 0 → N = 0.
        let freqs = FrequencyGrid::new(vec![1.0]).unwrap();
        let p = SampledField::constant(grid1(), freqs, cplx(0.0, 0.0)).unwrap();
        assert_eq!(choose_density(&p, 0.5).unwrap().at(0), 0.0);

        assert!(matches!(
            choose_density(&p, 1.0),
            Err(InversionError::RhoTarget(_))
        ));
    }

    #[test]
    fn design_identity_target_is_trivial() {
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0, 2.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap();
        let field = SampledField::constant(grid, freqs, cplx(2.0, -0.5)).unwrap();
        let (plan, report) = design_material(&field, &field, &medium, 0.5).unwrap();
        assert!(plan.impedance.values().iter().all(|h| h.norm() == 0.0));
        assert!(plan.density.values().iter().all(|&n| n == 0.0));
        assert_eq!(report.max_residual, 0.0);
        assert!(report.residuals_pass);
    }

    #[test]
    fn design_single_sample_matches_worked_case() {
        // p = −2πi at one voxel/frequency with ρ* = 0.5 → N = 1, h = −0.2 −0.4i.
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap();
        let n0sq = SampledField::constant(grid, freqs.clone(), cplx(1.0, 0.0)).unwrap();
        // p = k²(n₀² − n²) with k = 1, so n² = n₀² − p = 1 + 2πi.
        let nsq = SampledField::constant(grid, freqs, cplx(1.0, 2.0 * PI)).unwrap();
        let (plan, report) = design_material(&n0sq, &nsq, &medium, 0.5).unwrap();
        assert!((plan.density.at(0) - 1.0).abs() < 1e-12);
        assert!((plan.impedance.at(0, 0) - cplx(-0.2, -0.4)).norm() < 1e-12);
        assert!((plan.rho_max_used - 0.5).abs() < 1e-12);
        assert!(report.residuals_pass);
    }

    #[test]
    fn random_field_design_passes_roundtrip_gate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let grid = SpatialGrid::new([0.0; 3], [0.5; 3], [3, 3, 3]).unwrap();
        let freqs = FrequencyGrid::new(vec![1.0, 1.5, 2.0, 3.0]).unwrap();
        let medium = MediumConstants::new(2.0).unwrap();
        let n0sq = SampledField::from_fn(grid, freqs.clone(), |_, _| {
            Complex64::new(rng.gen_range(0.5..2.0), rng.gen_range(0.0..0.5))
        })
        .unwrap();
        let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        // Im n² ≥ Im n₀² keeps Im p ≤ 0
        let nsq = SampledField::from_fn(grid, freqs, |voxel, freq| {
            let base = n0sq.at(voxel, freq);
            Complex64::new(rng2.gen_range(0.1..3.0), base.im + rng2.gen_range(0.0..1.0))
        })
        .unwrap();
        for rho_target in [0.3, 0.5, 0.9] {
            let (_, report) = design_material(&n0sq, &nsq, &medium, rho_target).unwrap();
            assert!(report.residuals_pass);
            assert!(report.max_residual < 1e-10 * (1.0 + 1e2));
        }
    }

    #[test]
    fn supplied_density_must_keep_rho_below_one() {
        let grid = grid1();
        let freqs = FrequencyGrid::new(vec![1.0]).unwrap();
        let medium = MediumConstants::new(1.0).unwrap();
        let n0sq = SampledField::constant(grid, freqs.clone(), cplx(1.0, 0.0)).unwrap();
        let nsq = SampledField::constant(grid, freqs, cplx(1.0, 4.0 * PI)).unwrap(); // p = −4πi, R = 4π
        let too_small = DensityField::new(grid, vec![0.5]).unwrap(); // ρ = 2
        let err = design_material_with_density(&n0sq, &nsq, &medium, &too_small).unwrap_err();
        assert!(matches!(err, InversionError::RhoOutOfRange { rho, .. } if rho > 1.0));

        let enough = DensityField::new(grid, vec![2.0]).unwrap(); // ρ = 0.5
        let (plan, report) = design_material_with_density(&n0sq, &nsq, &medium, &enough).unwrap();
        assert!(report.residuals_pass);
        assert!((plan.rho_max_used - 0.5).abs() < 1e-12);
    }

    /// Direct check of the two real component equations
    ///   4πN [h₁(1+h₁) + h₂²] / ((1+h₁)² + h₂²) = R cos ψ
    ///   4πN h₂ / ((1+h₁)² + h₂²)              = R sin ψ
    /// without routing through complex division.
    fn component_equations_residual(p: Complex64, density: f64) -> (f64, f64) {
        let sol = solve_h_detailed(p, density).unwrap();
        let (h1, h2) = (sol.impedance.re, sol.impedance.im);
        let denom = (1.0 + h1) * (1.0 + h1) + h2 * h2;
        let lhs_re = 4.0 * PI * density * (h1 * (1.0 + h1) + h2 * h2) / denom;
        let lhs_im = 4.0 * PI * density * h2 / denom;
        // R cos ψ and R sin ψ are the components of p themselves.
        (
            (lhs_re - p.re).abs() / (1.0 + p.re.abs()),
            (lhs_im - p.im).abs() / (1.0 + p.im.abs()),
        )
    }

    proptest! {
        #[test]
        fn roundtrip_and_signs_hold(
            mag in 0.0f64..1e3,
            angle in -PI..0.0f64,
            rho_target in 0.05f64..0.95,
        ) {
            // angle in [−π, 0] keeps Im p ≤ 0
            let p = Complex64::from_polar(mag, angle);
            let p = Complex64::new(p.re, p.im.min(0.0));
            let density = if mag == 0.0 { 0.0 } else { mag / (4.0 * PI * rho_target) };
            let sol = solve_h_detailed(p, density).unwrap();

            // sign and range guarantees: Im h ≤ 0, cos φ > 0, φ ∈ (−π/2, 0]
            prop_assert!(sol.impedance.im <= 0.0);
            prop_assert!(sol.cos_phi > 0.0);
            prop_assert!(sol.sin_phi <= 0.0);

            // Pythagorean identity of the intermediates
            let pyth = sol.sin_phi * sol.sin_phi + sol.cos_phi * sol.cos_phi;
            prop_assert!((pyth - 1.0).abs() < 1e-12);

            // Round-trip through the forward relation
            let back = forward_p(sol.impedance, density).unwrap();
            prop_assert!((back - p).norm() <= ROUNDTRIP_TOL * (1.0 + p.norm()));

            // Component equations, independently of complex division
            if mag > 0.0 {
                let (res_re, res_im) = component_equations_residual(p, density);
                prop_assert!(res_re < 1e-10);
                prop_assert!(res_im < 1e-10);
            }
        }

        #[test]
        fn two_rho_targets_give_distinct_solutions(
            mag in 1e-3f64..1e3,
            angle in -3.0f64..0.0f64,
        ) {
            let p = Complex64::from_polar(mag, angle);
            let p = Complex64::new(p.re, p.im.min(0.0));
            let n_a = mag / (4.0 * PI * 0.3);
            let n_b = mag / (4.0 * PI * 0.7);
            let h_a = solve_h(p, n_a).unwrap();
            let h_b = solve_h(p, n_b).unwrap();
            prop_assert!((h_a - h_b).norm() > 1e-12);
            prop_assert!((forward_p(h_a, n_a).unwrap() - p).norm() <= ROUNDTRIP_TOL * (1.0 + p.norm()));
            prop_assert!((forward_p(h_b, n_b).unwrap() - p).norm() <= ROUNDTRIP_TOL * (1.0 + p.norm()));
        }
    }
}
