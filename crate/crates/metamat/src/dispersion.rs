//! Frequency-domain analysis of a designed material.
//!
//! A [`DispersionModel`] maps ω to the refraction coefficient n(ω) at a
//! fixed point, either from tabulated complex samples (monotone-cubic
//! interpolated) or from the built-in analytic family
//!
//! ```text
//! n(ω) = 1 / (1 + c·ω²),   c > 0,
//! ```
//!
//! for which the negative-refraction criterion below holds exactly when
//! c·ω² > 1.
//!
//! The dispersion relation ω·n(ω) = |k|·c connects frequency and wave
//! number; its k-gradient gives the group velocity
//! v_g = c/(n + ω·∂n/∂ω)·k⁰ while the phase velocity is v_p = (c/n)·k⁰.
//! The two point in opposite directions exactly when
//!
//! ```text
//! (ω/n) · ∂n/∂ω < −1,
//! ```
//!
//! evaluated on Re n; the absorption check L·|Im n| < threshold gates
//! whether neglecting Im n is defensible. [`simulate_wavepacket`] verifies
//! the sign of the group velocity nonperturbatively by synthesizing a 1D
//! packet u(x,t) = Σ_k a(k)·e^{i(kx − ω(k)t)} and tracking the velocity of
//! its intensity centroid.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FrequencyGrid, MediumConstants};

/// Default threshold for the absorption ratio L·|Im n|.
pub const ABSORPTION_THRESHOLD_DEFAULT: f64 = 0.1;

/// Relative tolerance for dispersion-root bisection.
pub const ROOT_TOL: f64 = 1e-10;

/// |n + ω·∂n/∂ω| below this is treated as a group-velocity singularity.
pub const GROUP_SINGULARITY_GUARD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DispersionError {
    #[error("analytic model coefficient must be positive and finite, got {0}")]
    Coefficient(f64),
    #[error("invalid tabulated model: {0}")]
    Table(String),
    #[error("omega = {omega} outside model range [{lo}, {hi}]")]
    OutOfRange { omega: f64, lo: f64, hi: f64 },
    #[error("criterion undefined: Re n = {n_re} <= 0 at omega = {omega}")]
    NonPositiveRefraction { omega: f64, n_re: f64 },
    #[error("square-root branch ambiguous: n^2 lies on the negative real axis at omega = {omega}")]
    BranchAmbiguity { omega: f64 },
    #[error("group-velocity singularity: n + omega dn/domega = {denominator:.3e} at omega = {omega}")]
    GroupVelocitySingularity { omega: f64, denominator: f64 },
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("wave-number magnitude must be positive and finite, got {0}")]
    KMagnitude(f64),
    #[error("packet reached the line boundary before the duration ended; retry with line_extent >= {suggested_extent:.3e}")]
    PacketTruncated { suggested_extent: f64 },
    #[error("omega(k) is not single-valued at k = {k}: {roots} dispersion roots in the bracket")]
    PacketBranch { k: f64, roots: usize },
    #[error("invalid wave packet: {0}")]
    BadPacket(String),
}

/// Monotone cubic Hermite interpolant (Fritsch–Butland tangents) through
/// strictly increasing abscissae. Reproduces the samples exactly and never
/// overshoots between them, which keeps ∂n/∂ω free of spurious wiggles.
#[derive(Debug, Clone)]
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubic {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        debug_assert!(n >= 2 && ys.len() == n);
        let dxs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let secants: Vec<f64> = ys
            .windows(2)
            .zip(&dxs)
            .map(|(w, dx)| (w[1] - w[0]) / dx)
            .collect();
        let mut tangents = Vec::with_capacity(n);
        tangents.push(secants[0]);
        for i in 0..n.saturating_sub(2) {
            let (m0, m1) = (secants[i], secants[i + 1]);
            if m0 * m1 <= 0.0 {
                tangents.push(0.0);
            } else {
                let (dx0, dx1) = (dxs[i], dxs[i + 1]);
                let common = dx0 + dx1;
                tangents.push(3.0 * common / ((common + dx1) / m0 + (common + dx0) / m1));
            }
        }
        tangents.push(secants[n - 2]);
        Self { xs, ys, tangents }
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|s| s.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let dx = self.xs[i + 1] - self.xs[i];
        let secant = (self.ys[i + 1] - self.ys[i]) / dx;
        let common = self.tangents[i] + self.tangents[i + 1] - 2.0 * secant;
        let c2 = (secant - self.tangents[i] - common) / dx;
        let c3 = common / (dx * dx);
        let diff = x - self.xs[i];
        self.ys[i] + self.tangents[i] * diff + c2 * diff * diff + c3 * diff * diff * diff
    }
}

/// Tabulated complex refraction coefficient with monotone-cubic
/// interpolation of the real and imaginary parts.
#[derive(Debug, Clone)]
pub struct TabulatedModel {
    omegas: Vec<f64>,
    re: MonotoneCubic,
    im: MonotoneCubic,
}

impl TabulatedModel {
    fn new(omegas: Vec<f64>, values: Vec<Complex64>) -> Result<Self, DispersionError> {
        if omegas.len() < 2 {
            return Err(DispersionError::Table("at least two samples required".into()));
        }
        if omegas.len() != values.len() {
            return Err(DispersionError::Table(format!(
                "{} frequencies but {} values",
                omegas.len(),
                values.len()
            )));
        }
        for (i, &w) in omegas.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(DispersionError::Table(format!(
                    "omega sample {i} = {w} must be positive and finite"
                )));
            }
            if i > 0 && w <= omegas[i - 1] {
                return Err(DispersionError::Table(
                    "omega samples must be strictly increasing".into(),
                ));
            }
        }
        if let Some(v) = values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(DispersionError::Table(format!("non-finite value {v}")));
        }
        let re = MonotoneCubic::new(omegas.clone(), values.iter().map(|v| v.re).collect());
        let im = MonotoneCubic::new(omegas.clone(), values.iter().map(|v| v.im).collect());
        Ok(Self { omegas, re, im })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
}

/// Refraction coefficient as a function of frequency at a fixed point.
#[derive(Debug, Clone)]
pub enum DispersionModel {
    /// Interpolated complex samples.
    Tabulated(TabulatedModel),
    /// n(ω) = 1/(1 + c·ω²); real-valued, n ∈ (0, 1] for ω ≥ 0.
    InverseQuadratic { coefficient: f64 },
}

impl DispersionModel {
    pub fn tabulated(omegas: Vec<f64>, values: Vec<Complex64>) -> Result<Self, DispersionError> {
        Ok(Self::Tabulated(TabulatedModel::new(omegas, values)?))
    }

    pub fn inverse_quadratic(coefficient: f64) -> Result<Self, DispersionError> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(DispersionError::Coefficient(coefficient));
        }
        Ok(Self::InverseQuadratic { coefficient })
    }

    /// Valid ω range: the tabulation span, or [0, ∞) for the analytic
    /// family.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Tabulated(t) => (t.omegas[0], *t.omegas.last().unwrap()),
            Self::InverseQuadratic { .. } => (0.0, f64::INFINITY),
        }
    }

    fn check_range(&self, omega: f64) -> Result<(), DispersionError> {
        let (lo, hi) = self.range();
        if !omega.is_finite() || omega < lo || omega > hi {
            return Err(DispersionError::OutOfRange { omega, lo, hi });
        }
        Ok(())
    }

    /// n(ω).
    pub fn refraction(&self, omega: f64) -> Result<Complex64, DispersionError> {
        self.check_range(omega)?;
        Ok(match self {
            Self::Tabulated(t) => Complex64::new(t.re.eval(omega), t.im.eval(omega)),
            Self::InverseQuadratic { coefficient } => {
                Complex64::new(1.0 / (1.0 + coefficient * omega * omega), 0.0)
            }
        })
    }
}

/// ∂(Re n)/∂ω and whether a one-sided difference had to be used.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub one_sided: bool,
}

fn fd_step(omega: f64) -> f64 {
    (1e-6 * omega.abs()).max(1e-9)
}

fn finite_difference(
    eval: impl Fn(f64) -> Result<f64, DispersionError>,
    omega: f64,
    lo: f64,
    hi: f64,
) -> Result<DerivativeEstimate, DispersionError> {
    let h = fd_step(omega);
    if omega - h >= lo && omega + h <= hi {
        let value = (eval(omega + h)? - eval(omega - h)?) / (2.0 * h);
        Ok(DerivativeEstimate { value, one_sided: false })
    } else if omega + h <= hi {
        let value = (eval(omega + h)? - eval(omega)?) / h;
        Ok(DerivativeEstimate { value, one_sided: true })
    } else if omega - h >= lo {
        let value = (eval(omega)? - eval(omega - h)?) / h;
        Ok(DerivativeEstimate { value, one_sided: true })
    } else {
        Err(DispersionError::OutOfRange { omega, lo, hi })
    }
}

/// ∂(Re n)/∂ω: exact closed form for the analytic family, central finite
/// difference (step max(10⁻⁶ω, 10⁻⁹)) on the interpolant otherwise. At a
/// tabulation boundary the difference falls back to one-sided and the
/// result is flagged.
pub fn refraction_derivative(
    model: &DispersionModel,
    omega: f64,
) -> Result<DerivativeEstimate, DispersionError> {
    model.check_range(omega)?;
    match model {
        DispersionModel::InverseQuadratic { coefficient } => {
            let denom = 1.0 + coefficient * omega * omega;
            Ok(DerivativeEstimate {
                value: -2.0 * coefficient * omega / (denom * denom),
                one_sided: false,
            })
        }
        DispersionModel::Tabulated(_) => refraction_derivative_fd(model, omega),
    }
}

/// Forced finite-difference derivative of Re n for any model; the
/// cross-check route against the closed form.
pub fn refraction_derivative_fd(
    model: &DispersionModel,
    omega: f64,
) -> Result<DerivativeEstimate, DispersionError> {
    model.check_range(omega)?;
    let (lo, hi) = model.range();
    finite_difference(|w| Ok(model.refraction(w)?.re), omega, lo, hi)
}

/// Value and verdict of the negative-refraction criterion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriterionResult {
    /// (ω / Re n) · ∂(Re n)/∂ω
    pub value: f64,
    /// value < −1
    pub holds: bool,
}

/// Criterion from precomputed parts; errors when Re n ≤ 0.
pub fn criterion_from_parts(
    omega: f64,
    n_re: f64,
    dn_domega: f64,
) -> Result<CriterionResult, DispersionError> {
    if n_re <= 0.0 {
        return Err(DispersionError::NonPositiveRefraction { omega, n_re });
    }
    let value = omega / n_re * dn_domega;
    Ok(CriterionResult { value, holds: value < -1.0 })
}

/// Evaluates (ω/n)·∂n/∂ω < −1 on Re n at a single frequency.
pub fn negative_refraction_criterion(
    model: &DispersionModel,
    omega: f64,
) -> Result<CriterionResult, DispersionError> {
    let n_re = model.refraction(omega)?.re;
    let dn = refraction_derivative(model, omega)?;
    criterion_from_parts(omega, n_re, dn.value)
}

/// Per-frequency criterion row over a band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandRow {
    pub omega: f64,
    pub value: f64,
    pub holds: bool,
}

/// Band verdict: true only when the criterion holds at every sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandCriterion {
    pub all_hold: bool,
    pub rows: Vec<BandRow>,
}

pub fn band_criterion(
    model: &DispersionModel,
    band: &FrequencyGrid,
) -> Result<BandCriterion, DispersionError> {
    let mut rows = Vec::with_capacity(band.len());
    let mut all_hold = true;
    for &omega in band.samples() {
        let result = negative_refraction_criterion(model, omega)?;
        all_hold &= result.holds;
        rows.push(BandRow { omega, value: result.value, holds: result.holds });
    }
    Ok(BandCriterion { all_hold, rows })
}

/// Absorption ratio L·|Im n| at one frequency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AbsorptionRow {
    pub omega: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Checks L·|Im n| < threshold per frequency, with n the principal square
/// root (Re n ≥ 0) of the supplied n² samples. n² on the negative real
/// axis has no preferred branch and is rejected.
pub fn absorption_check(
    nsq_samples: &[(f64, Complex64)],
    diameter: f64,
    threshold: f64,
) -> Result<Vec<AbsorptionRow>, DispersionError> {
    nsq_samples
        .iter()
        .map(|&(omega, nsq)| {
            if nsq.im == 0.0 && nsq.re < 0.0 {
                return Err(DispersionError::BranchAmbiguity { omega });
            }
            let n = nsq.sqrt();
            let ratio = diameter * n.im.abs();
            Ok(AbsorptionRow { omega, ratio, pass: ratio < threshold })
        })
        .collect()
}

/// Bisection on [a, b] assuming f(a)·f(b) < 0; relative tolerance ROOT_TOL.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        if (b - a).abs() <= ROOT_TOL * a.abs().max(b.abs()) {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Scan points for root isolation: monotone pieces of ω·Re n(ω) − rhs.
fn scan_points(model: &DispersionModel, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    match model {
        DispersionModel::Tabulated(t) => {
            pts.extend(t.omegas.iter().copied().filter(|&w| w > lo && w < hi));
        }
        DispersionModel::InverseQuadratic { coefficient } => {
            // ω·n(ω) = ω/(1+cω²) rises to a single peak at 1/√c then
            // decays; splitting there isolates every root.
            let peak = 1.0 / coefficient.sqrt();
            if peak > lo && peak < hi {
                pts.push(peak);
            }
        }
    }
    pts.push(hi);
    pts
}

fn roots_in(
    model: &DispersionModel,
    rhs: f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, DispersionError> {
    let f = |w: f64| w * model.refraction(w).map(|n| n.re).unwrap_or(f64::NAN) - rhs;
    let pts = scan_points(model, lo, hi);
    let mut roots: Vec<f64> = Vec::new();
    let push = |root: f64, roots: &mut Vec<f64>| {
        if !roots
            .iter()
            .any(|&r| (r - root).abs() <= 1e-9 * r.abs().max(root.abs()).max(1e-300))
        {
            roots.push(root);
        }
    };
    for pair in pts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            push(a, &mut roots);
        }
        if fb == 0.0 {
            push(b, &mut roots);
        }
        if fa * fb < 0.0 {
            push(bisect(f, a, b, fa), &mut roots);
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(roots)
}

/// All positive roots ω of ω·Re n(ω) = |k|·c inside the model range,
/// ascending. Sign-change bracketing on the natural ω sampling followed by
/// bisection; no sign change means no roots (empty list, not an error).
pub fn solve_dispersion(
    model: &DispersionModel,
    k_mag: f64,
    medium: &MediumConstants,
) -> Result<Vec<f64>, DispersionError> {
    if !(k_mag.is_finite() && k_mag > 0.0) {
        return Err(DispersionError::KMagnitude(k_mag));
    }
    let rhs = k_mag * medium.wave_speed();
    let (lo, hi) = match model {
        DispersionModel::Tabulated(t) => (t.omegas[0], *t.omegas.last().unwrap()),
        DispersionModel::InverseQuadratic { coefficient } => {
            // Past max(2/(c·rhs), 2/√c) the left side has decayed below rhs,
            // so every root lies in the finite bracket.
            let peak = 1.0 / coefficient.sqrt();
            (0.0, (2.0 / (coefficient * rhs)).max(2.0 * peak))
        }
    };
    roots_in(model, rhs, lo, hi)
}

/// Phase and group velocity at one (ω, k⁰) pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VelocityResult {
    pub phase_velocity: [f64; 3],
    pub group_velocity: [f64; 3],
    /// Unit propagation direction k⁰.
    pub direction: [f64; 3],
    pub omega: f64,
}

/// v_p = (c/n)·k⁰ and v_g = c/(n + ω·∂n/∂ω)·k⁰ on Re n. The direction is
/// normalized; a vanishing group-velocity denominator is an error.
pub fn group_velocity(
    model: &DispersionModel,
    omega: f64,
    direction: [f64; 3],
    medium: &MediumConstants,
) -> Result<VelocityResult, DispersionError> {
    let norm = box_norm(direction);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(DispersionError::ZeroDirection);
    }
    let k0 = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
    let n_re = model.refraction(omega)?.re;
    if n_re <= 0.0 {
        return Err(DispersionError::NonPositiveRefraction { omega, n_re });
    }
    let dn = refraction_derivative(model, omega)?.value;
    let denominator = n_re + omega * dn;
    if denominator.abs() < GROUP_SINGULARITY_GUARD {
        return Err(DispersionError::GroupVelocitySingularity { omega, denominator });
    }
    let c = medium.wave_speed();
    let scale_p = c / n_re;
    let scale_g = c / denominator;
    Ok(VelocityResult {
        phase_velocity: [scale_p * k0[0], scale_p * k0[1], scale_p * k0[2]],
        group_velocity: [scale_g * k0[0], scale_g * k0[1], scale_g * k0[2]],
        direction: k0,
        omega,
    })
}

fn box_norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Spectral amplitude profile a(k) of a wave packet.
#[derive(Clone)]
pub enum AmplitudeProfile {
    /// exp(−(k − k̄)²/(2σ²)) with σ = half_width/3, so the sampling window
    /// covers ±3σ.
    Gaussian,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for AmplitudeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian => write!(f, "Gaussian"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Narrow-band packet specification: wave numbers sampled strictly inside
/// (k̄ − δ, k̄ + δ). `omega_bracket` selects the dispersion branch when
/// ω(k) is multivalued; it defaults to the full model range.
#[derive(Debug, Clone)]
pub struct WavePacketSpec {
    pub center_k: f64,
    pub half_width: f64,
    pub k_samples: usize,
    pub amplitude: AmplitudeProfile,
    pub omega_bracket: Option<(f64, f64)>,
}

impl WavePacketSpec {
    pub fn gaussian(center_k: f64, half_width: f64) -> Self {
        Self {
            center_k,
            half_width,
            k_samples: 64,
            amplitude: AmplitudeProfile::Gaussian,
            omega_bracket: None,
        }
    }

    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.omega_bracket = Some((lo, hi));
        self
    }

    pub fn with_samples(mut self, k_samples: usize) -> Self {
        self.k_samples = k_samples;
        self
    }
}

/// Measured packet velocities: envelope (group) and carrier (phase).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PacketVelocities {
    pub envelope_velocity: f64,
    pub phase_velocity: f64,
}

/// ω(k) on the selected branch; errors unless exactly one root lies in the
/// bracket.
fn branch_omega(
    model: &DispersionModel,
    k: f64,
    bracket: (f64, f64),
    medium: &MediumConstants,
) -> Result<f64, DispersionError> {
    let rhs = k * medium.wave_speed();
    let roots = roots_in(model, rhs, bracket.0, bracket.1)?;
    if roots.len() != 1 {
        return Err(DispersionError::PacketBranch { k, roots: roots.len() });
    }
    Ok(roots[0])
}

/// Synthesizes u(x,t) = Σ_k a(k)·e^{i(kx − ω(k)t)} on a centered 1D line
/// and measures the envelope velocity as the fitted slope of the intensity
/// centroid trajectory. The phase velocity is ω(k̄)/k̄.
///
/// Fails with a suggested larger extent if a non-negligible share of the
/// packet's intensity reaches the outer 5% of the line before `duration`
/// ends.
pub fn simulate_wavepacket(
    model: &DispersionModel,
    spec: &WavePacketSpec,
    medium: &MediumConstants,
    duration: f64,
    line_extent: f64,
) -> Result<PacketVelocities, DispersionError> {
    if !(spec.center_k.is_finite() && spec.center_k > 0.0) {
        return Err(DispersionError::BadPacket(format!(
            "center_k must be positive, got {}",
            spec.center_k
        )));
    }
    if !(spec.half_width > 0.0 && spec.half_width < spec.center_k) {
        return Err(DispersionError::BadPacket(format!(
            "half_width must lie in (0, center_k), got {}",
            spec.half_width
        )));
    }
    if spec.k_samples < 16 {
        return Err(DispersionError::BadPacket(format!(
            "k_samples must be >= 16, got {}",
            spec.k_samples
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(DispersionError::BadPacket(format!("duration must be positive, got {duration}")));
    }
    if !(line_extent > 0.0 && line_extent.is_finite()) {
        return Err(DispersionError::BadPacket(format!(
            "line_extent must be positive, got {line_extent}"
        )));
    }

    let (model_lo, model_hi) = model.range();
    let bracket = match spec.omega_bracket {
        Some((lo, hi)) => {
            // clamp to the model range so scans never evaluate outside it
            let lo = lo.max(model_lo);
            let hi = if model_hi.is_finite() { hi.min(model_hi) } else { hi };
            if lo >= hi || lo.is_nan() || hi.is_nan() {
                return Err(DispersionError::BadPacket(format!(
                    "omega bracket [{lo}, {hi}] is empty after clamping to the model range"
                )));
            }
            (lo, hi)
        }
        None => {
            if !model_hi.is_finite() {
                return Err(DispersionError::BadPacket(
                    "an omega_bracket is required for models with unbounded range".into(),
                ));
            }
            (model_lo, model_hi)
        }
    };

    // Sample k at midpoints of equal subintervals: strictly inside the band.
    let m = spec.k_samples;
    let sigma = spec.half_width / 3.0;
    let mut ks = Vec::with_capacity(m);
    let mut omegas = Vec::with_capacity(m);
    let mut amps = Vec::with_capacity(m);
    for j in 0..m {
        let k = spec.center_k + spec.half_width * (-1.0 + (2.0 * j as f64 + 1.0) / m as f64);
        let omega = branch_omega(model, k, bracket, medium)?;
        let amp = match &spec.amplitude {
            AmplitudeProfile::Gaussian => {
                let z = (k - spec.center_k) / sigma;
                (-0.5 * z * z).exp()
            }
            AmplitudeProfile::Custom(f) => f(k),
        };
        if !(amp.is_finite()) {
            return Err(DispersionError::BadPacket(format!("amplitude at k = {k} is not finite")));
        }
        ks.push(k);
        omegas.push(omega);
        amps.push(amp);
    }
    if amps.iter().all(|&a| a == 0.0) {
        return Err(DispersionError::BadPacket("all amplitudes are zero".into()));
    }

    let omega_center = branch_omega(model, spec.center_k, bracket, medium)?;
    let phase_velocity = omega_center / spec.center_k;

    // Analytic group-velocity guess only to size the truncation suggestion.
    let vg_guess = match (model.refraction(omega_center), refraction_derivative(model, omega_center)) {
        (Ok(n), Ok(dn)) => {
            let denom = n.re + omega_center * dn.value;
            if denom.abs() > GROUP_SINGULARITY_GUARD {
                medium.wave_speed() / denom
            } else {
                medium.wave_speed()
            }
        }
        _ => medium.wave_speed(),
    };
    let packet_width = 1.0 / sigma; // spatial sigma of the transform-limited packet
    let suggested_extent = 2.0 * (vg_guess.abs() * duration + 8.0 * packet_width);

    // |u|² is band-limited to wave numbers ≤ 2δ, so a beat wavelength
    // π/δ sampled 16× over suffices for the centroid integrals.
    let beat = std::f64::consts::PI / spec.half_width;
    let mut n_x = ((line_extent / (beat / 16.0)).ceil() as usize + 1).max(257);
    n_x = n_x.min(1 << 20);
    let dx = line_extent / (n_x - 1) as f64;
    let n_t = 33usize;

    let mut times = Vec::with_capacity(n_t);
    let mut centroids = Vec::with_capacity(n_t);
    let edge = (n_x / 20).max(1);
    for s in 0..n_t {
        let t = duration * s as f64 / (n_t - 1) as f64;
        let mut total = 0.0;
        let mut weighted = 0.0;
        let mut edge_mass = 0.0;
        for i in 0..n_x {
            let x = -0.5 * line_extent + i as f64 * dx;
            let mut u = Complex64::new(0.0, 0.0);
            for j in 0..m {
                u += Complex64::from_polar(amps[j], ks[j] * x - omegas[j] * t);
            }
            let intensity = u.norm_sqr();
            total += intensity;
            weighted += x * intensity;
            if i < edge || i >= n_x - edge {
                edge_mass += intensity;
            }
        }
        if total <= 0.0 {
            return Err(DispersionError::BadPacket("packet has zero intensity".into()));
        }
        if edge_mass > 1e-3 * total {
            return Err(DispersionError::PacketTruncated { suggested_extent });
        }
        times.push(t);
        centroids.push(weighted / total);
    }

    // Least-squares slope of the centroid trajectory.
    let t_mean = times.iter().sum::<f64>() / n_t as f64;
    let c_mean = centroids.iter().sum::<f64>() / n_t as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, c) in times.iter().zip(&centroids) {
        num += (t - t_mean) * (c - c_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    let envelope_velocity = num / den;
    if !envelope_velocity.is_finite() || !phase_velocity.is_finite() {
        return Err(DispersionError::BadPacket("velocity estimate not finite".into()));
    }
    Ok(PacketVelocities { envelope_velocity, phase_velocity })
}

/// One row of the per-frequency dispersion report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DispersionReportRow {
    pub omega: f64,
    pub n_re: f64,
    pub n_im: f64,
    pub dn_domega: f64,
    pub criterion_value: f64,
    pub criterion_holds: bool,
    pub absorption_ratio: f64,
}

/// Per-frequency report over a band: refraction, derivative, criterion,
/// and the absorption ratio L·|Im n|.
pub fn dispersion_report(
    model: &DispersionModel,
    band: &FrequencyGrid,
    diameter: f64,
) -> Result<Vec<DispersionReportRow>, DispersionError> {
    band.samples()
        .iter()
        .map(|&omega| {
            let n = model.refraction(omega)?;
            let dn = refraction_derivative(model, omega)?;
            let criterion = criterion_from_parts(omega, n.re, dn.value)?;
            Ok(DispersionReportRow {
                omega,
                n_re: n.re,
                n_im: n.im,
                dn_domega: dn.value,
                criterion_value: criterion.value,
                criterion_holds: criterion.holds,
                absorption_ratio: diameter * n.im.abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn medium_unit() -> MediumConstants {
        MediumConstants::new(1.0).unwrap()
    }

    fn constant_model(n: f64, lo: f64, hi: f64) -> DispersionModel {
        DispersionModel::tabulated(
            (0..9).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect(),
            vec![Complex64::new(n, 0.0); 9],
        )
        .unwrap()
    }

    #[test]
    fn closed_form_derivative() {
        let model = DispersionModel::inverse_quadratic(1.0).unwrap();
        let d = refraction_derivative(&model, 1.0).unwrap();
        assert!((d.value + 0.5).abs() < 1e-15);
        assert!(!d.one_sided);
    }

    #[test]
    fn constant_table_has_zero_derivative() {
        let model = constant_model(1.3, 0.5, 2.0);
        let d = refraction_derivative(&model, 1.0).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn boundary_derivative_is_flagged_one_sided() {
        let model = constant_model(1.0, 0.5, 2.0);
        assert!(refraction_derivative(&model, 0.5).unwrap().one_sided);
        assert!(refraction_derivative(&model, 2.0).unwrap().one_sided);
        assert!(!refraction_derivative(&model, 1.0).unwrap().one_sided);
    }

    #[test]
    fn tabulated_derivative_tracks_closed_form() {
        // samples of 1/(1+ω²) every 0.01 near ω = 1 → −0.5 within 1e-4
        let omegas: Vec<f64> = (0..=200).map(|i| 0.5 + 0.01 * i as f64).collect();
        let values: Vec<Complex64> = omegas
            .iter()
            .map(|&w| Complex64::new(1.0 / (1.0 + w * w), 0.0))
            .collect();
        let model = DispersionModel::tabulated(omegas, values).unwrap();
        let d = refraction_derivative(&model, 1.0).unwrap();
        assert!((d.value + 0.5).abs() < 1e-4, "got {}", d.value);
    }

    #[test]
    fn interpolant_reproduces_samples() {
        let omegas: Vec<f64> = vec![1.0, 1.7, 2.1, 3.0, 4.5];
        let values: Vec<Complex64> = omegas
            .iter()
            .map(|&w| Complex64::new((w * 0.7).sin(), -0.1 * w))
            .collect();
        let model = DispersionModel::tabulated(omegas.clone(), values.clone()).unwrap();
        for (w, v) in omegas.iter().zip(&values) {
            let n = model.refraction(*w).unwrap();
            assert!((n - v).norm() < 1e-14);
        }
    }

    #[test]
    fn fd_matches_closed_form_at_interior_points() {
        let model = DispersionModel::inverse_quadratic(0.7).unwrap();
        for omega in [0.3, 1.0, 2.5, 7.0] {
            let exact = refraction_derivative(&model, omega).unwrap().value;
            let fd = refraction_derivative_fd(&model, omega).unwrap().value;
            assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs(),
                "omega {omega}: fd {fd} vs exact {exact}"
            );
        }
    }

    #[test]
    fn criterion_threshold_examples() {
        let hold = negative_refraction_criterion(
            &DispersionModel::inverse_quadratic(2.0).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(hold.holds);
        let fail = negative_refraction_criterion(
            &DispersionModel::inverse_quadratic(0.5).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(!fail.holds);
        let flat = negative_refraction_criterion(&constant_model(1.0, 0.5, 2.0), 1.0).unwrap();
        assert_eq!(flat.value, 0.0);
        assert!(!flat.holds);
    }

    #[test]
    fn band_examples() {
        let band = FrequencyGrid::linspace(1.0, 2.0, 11).unwrap();
        let yes = band_criterion(&DispersionModel::inverse_quadratic(1.5).unwrap(), &band).unwrap();
        assert!(yes.all_hold);
        let no = band_criterion(&DispersionModel::inverse_quadratic(0.9).unwrap(), &band).unwrap();
        assert!(!no.all_hold);
        assert!(!no.rows[0].holds); // fails right at ω = 1

        let single = FrequencyGrid::new(vec![1.0]).unwrap();
        let one = band_criterion(&DispersionModel::inverse_quadratic(2.0).unwrap(), &single).unwrap();
        assert!(one.all_hold);
    }

    #[test]
    fn absorption_examples() {
        let real = absorption_check(&[(1.0, Complex64::new(2.25, 0.0))], 5.0, 0.1).unwrap();
        assert_eq!(real[0].ratio, 0.0);
        assert!(real[0].pass);

        // n = 1 − 0.01i → ratio 0.05 at L = 5
        let nsq = Complex64::new(1.0, -0.01) * Complex64::new(1.0, -0.01);
        let row = &absorption_check(&[(1.0, nsq)], 5.0, 0.1).unwrap()[0];
        assert!((row.ratio - 0.05).abs() < 1e-12);
        assert!(row.pass);

        // n = 1 − 0.05i → ratio 0.25, fail
        let nsq = Complex64::new(1.0, -0.05) * Complex64::new(1.0, -0.05);
        let row = &absorption_check(&[(1.0, nsq)], 5.0, 0.1).unwrap()[0];
        assert!((row.ratio - 0.25).abs() < 1e-12);
        assert!(!row.pass);

        let err = absorption_check(&[(1.0, Complex64::new(-1.0, 0.0))], 5.0, 0.1).unwrap_err();
        assert!(matches!(err, DispersionError::BranchAmbiguity { .. }));
    }

    #[test]
    fn dispersion_roots_nondispersive() {
        let model = constant_model(1.0, 0.1, 5.0);
        let roots = solve_dispersion(&model, 2.0, &medium_unit()).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dispersion_roots_two_branches() {
        // ω/(1+ω²) = 0.4 → ω ∈ {0.5, 2.0}
        let model = DispersionModel::inverse_quadratic(1.0).unwrap();
        let roots = solve_dispersion(&model, 0.4, &medium_unit()).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 0.5).abs() < 1e-8, "got {}", roots[0]);
        assert!((roots[1] - 2.0).abs() < 1e-8, "got {}", roots[1]);
        for &root in &roots {
            let n = model.refraction(root).unwrap().re;
            assert!((root * n - 0.4).abs() <= 1e-8 * 0.4);
        }
    }

    #[test]
    fn dispersion_roots_empty_above_peak() {
        // max of ω/(1+ω²) is 1/2, so k·c = 0.6 has no solutions
        let model = DispersionModel::inverse_quadratic(1.0).unwrap();
        let roots = solve_dispersion(&model, 0.6, &medium_unit()).unwrap();
        assert!(roots.is_empty());
    }

    #[test]
    fn group_velocity_nondispersive() {
        let model = constant_model(1.0, 0.5, 4.0);
        let v = group_velocity(&model, 2.0, [0.0, 0.0, 3.0], &medium_unit()).unwrap();
        assert_eq!(v.direction, [0.0, 0.0, 1.0]);
        assert!((v.group_velocity[2] - 1.0).abs() < 1e-9);
        assert!((v.phase_velocity[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn group_velocity_on_both_branches() {
        let model = DispersionModel::inverse_quadratic(1.0).unwrap();
        let medium = medium_unit();
        // ω = 2: n = 0.2, ωn′ = −0.32 → denominator −0.12, v_g antiparallel
        let v = group_velocity(&model, 2.0, [1.0, 0.0, 0.0], &medium).unwrap();
        assert!((v.group_velocity[0] + 1.0 / 0.12).abs() < 1e-9);
        assert!((v.phase_velocity[0] - 5.0).abs() < 1e-12);
        let criterion = negative_refraction_criterion(&model, 2.0).unwrap();
        assert!((criterion.value + 1.6).abs() < 1e-12);
        assert!(criterion.holds);

        // ω = 0.5: n = 0.8, ωn′ = −0.32 → denominator 0.48, v_g parallel
        let v = group_velocity(&model, 0.5, [1.0, 0.0, 0.0], &medium).unwrap();
        assert!((v.group_velocity[0] - 1.0 / 0.48).abs() < 1e-9);
        let criterion = negative_refraction_criterion(&model, 0.5).unwrap();
        assert!((criterion.value + 0.4).abs() < 1e-12);
        assert!(!criterion.holds);
    }

    #[test]
    fn criterion_sign_matches_group_velocity_sign() {
        // sign(dω/d|k|) < 0 ⇔ criterion holds; both reduce to n + ωn′ < 0
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let medium = medium_unit();
        let mut checked = 0;
        while checked < 1000 {
            let coefficient = rng.gen_range(0.05f64..20.0);
            let omega = rng.gen_range(0.05f64..20.0);
            let model = DispersionModel::inverse_quadratic(coefficient).unwrap();
            let n = model.refraction(omega).unwrap().re;
            let dn = refraction_derivative(&model, omega).unwrap().value;
            if (n + omega * dn).abs() < 1e-6 {
                continue; // stay away from the singular set
            }
            let v = group_velocity(&model, omega, [1.0, 0.0, 0.0], &medium).unwrap();
            let criterion = negative_refraction_criterion(&model, omega).unwrap();
            assert_eq!(v.group_velocity[0] < 0.0, criterion.holds);
            checked += 1;
        }
    }

    #[test]
    fn wavepacket_nondispersive_moves_at_c() {
        let model = constant_model(1.0, 0.2, 2.0);
        let spec = WavePacketSpec::gaussian(1.0, 0.02);
        let v = simulate_wavepacket(&model, &spec, &medium_unit(), 20.0, 1600.0).unwrap();
        assert!((v.phase_velocity - 1.0).abs() < 1e-9);
        assert!(
            (v.envelope_velocity - 1.0).abs() < 0.01,
            "envelope {}",
            v.envelope_velocity
        );
    }

    #[test]
    fn wavepacket_truncation_reports_larger_extent() {
        let model = constant_model(1.0, 0.2, 2.0);
        let spec = WavePacketSpec::gaussian(1.0, 0.02);
        let err = simulate_wavepacket(&model, &spec, &medium_unit(), 20.0, 200.0).unwrap_err();
        match err {
            DispersionError::PacketTruncated { suggested_extent } => {
                assert!(suggested_extent > 200.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn report_rows_cover_band() {
        let model = DispersionModel::inverse_quadratic(2.0).unwrap();
        let band = FrequencyGrid::linspace(1.0, 3.0, 5).unwrap();
        let rows = dispersion_report(&model, &band, 2.0).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.criterion_holds));
        assert!(rows.iter().all(|r| r.absorption_ratio == 0.0));
    }
}
