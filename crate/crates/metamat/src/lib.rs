//! Inverse design of acoustic metamaterials with a prescribed, possibly
//! frequency-dependent refraction coefficient.
//!
//! The toolkit implements a three-step construction:
//!
//! 1. From the background coefficient n₀²(x,ω) and the desired target
//!    n²(x,ω), form the susceptibility perturbation
//!    p(x,ω) = (ω/c)²[n₀² − n²].
//! 2. Solve 4πN(x)·h(x,ω)/(1 + h(x,ω)) = p(x,ω) for a frequency-independent
//!    particle density N(x) ≥ 0 and impedance factor h(x,ω) with Im h ≤ 0
//!    ([`inversion`]).
//! 3. Partition the domain into small cubes and embed ν_j = [∫N/a] balls of
//!    radius a per cube at spacing κ·a^{1/3}, each with boundary impedance
//!    ζ_j(ω) = h(x_j,ω)/a ([`placement`]).
//!
//! The [`dispersion`] module analyzes the resulting frequency dependence:
//! dispersion-relation roots ω·n(ω) = |k|·c, phase and group velocity, the
//! negative-refraction criterion (ω/n)·∂n/∂ω < −1, the absorption bound
//! L·|Im n| ≪ 1, and a 1D wave-packet synthesis that measures the envelope
//! velocity directly.
//!
//! Start with the runnable examples (`cargo run --example <name>`), or use
//! the `metamat` binary for batch runs over on-disk fields.

pub mod cli;
pub mod dispersion;
pub mod fields;
pub mod inversion;
pub mod placement;

pub use dispersion::{
    absorption_check, band_criterion, criterion_from_parts, dispersion_report, group_velocity,
    negative_refraction_criterion, refraction_derivative, refraction_derivative_fd,
    simulate_wavepacket, solve_dispersion, AbsorptionRow, AmplitudeProfile, BandCriterion,
    BandRow, CriterionResult, DerivativeEstimate, DispersionError, DispersionModel,
    DispersionReportRow, PacketVelocities, VelocityResult, WavePacketSpec,
};
pub use fields::{
    box_diagonal, load_density, load_field, save_density, save_field, DensityField, FieldError,
    FrequencyGrid, MediumConstants, SampledField, SpatialGrid,
};
pub use inversion::{
    choose_density, compute_p, design_material, design_material_with_density, forward_p,
    polar_decompose, solve_h, solve_h_detailed, ImpedanceSolution, InversionError,
    InversionReport, MaterialPlan, PolarForm, SampleDiagnostics,
};
pub use placement::{
    cube_integral, nearest_integer, partition_for, plan_embedding, verify_manifest, Cube,
    CubeBounds, CubeCheck, CubeEmbedding, CubePartition, EmbeddingManifest, PlacementError,
    VerificationReport, ZetaEntry,
};
