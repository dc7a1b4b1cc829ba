//! Moments of the matrix elements `h` and `g` induced by distributions of
//! the angle `φ = √af·π` and the forcing strength `q`.
//!
//! With `h = cos φ - (π q / 2) sin φ / φ` and
//! `g = -(φ/π) sin φ - (q/2)(1 + cos φ)`, both elements are affine in `q`,
//! so only `⟨q⟩` and `⟨q²⟩` enter when `q` is independent of `φ`.
//! Angle averages take `φ` uniform on `[0, Γ]`.

mod si;

use std::f64::consts::PI;

pub use si::{sine_integral, SI_MAX};

use crate::error::{Error, Result};
use crate::model::{AfLaw, ForcingModel, QLaw, RandomStream};
use crate::stats::Accumulator;
use crate::transfer::{correction_phi, elements_unchecked, ratio_x};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    H,
    G,
}

/// Which distribution the moments are taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentLaw {
    /// Fixed angle, random `q`.
    FixedAngle,
    /// Random angle, fixed `q`.
    AngleAverage,
    /// Random angle and random `q`, independent.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMoments {
    pub mean: f64,
    pub mean_sq: f64,
    /// `mean_sq - mean²`, clipped at 0.
    pub variance: f64,
    pub element: Element,
    pub law: MomentLaw,
}

impl ElementMoments {
    fn new(mean: f64, mean_sq: f64, element: Element, law: MomentLaw) -> Self {
        ElementMoments {
            mean,
            mean_sq,
            variance: (mean_sq - mean * mean).max(0.0),
            element,
            law,
        }
    }

    /// Build from an exact variance rather than the difference of moments.
    fn with_variance(mean: f64, mean_sq: f64, variance: f64, element: Element, law: MomentLaw) -> Self {
        ElementMoments {
            mean,
            mean_sq,
            variance: variance.max(0.0),
            element,
            law,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

fn check_q(q_mean: f64, q_sq_mean: f64) -> Result<()> {
    if !(q_mean.is_finite() && q_sq_mean.is_finite()) {
        return Err(Error::invalid("q moments must be finite"));
    }
    if q_sq_mean < q_mean * q_mean * (1.0 - 1e-12) - 1e-300 {
        return Err(Error::invalid(format!(
            "<q^2> = {q_sq_mean} is below <q>^2 = {}",
            q_mean * q_mean
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn angle_law(q_mean: f64, q_sq_mean: f64) -> MomentLaw {
    if q_sq_mean == q_mean * q_mean {
        MomentLaw::AngleAverage
    } else {
        MomentLaw::Joint
    }
}

/// Moments of `h` at fixed angle `φ`. The variance is
/// `(π sin φ / 2φ)² σ_q²`.
pub fn h_moments_fixed_angle(phi: f64, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    check_positive("phi", phi)?;
    check_q(q_mean, q_sq_mean)?;
    let (s, c) = phi.sin_cos();
    let sinc = s / phi;
    let mean = c - 0.5 * PI * q_mean * sinc;
    let mean_sq = c * c + 0.25 * PI * PI * q_sq_mean * sinc * sinc - PI * c * sinc * q_mean;
    let k = 0.5 * PI * sinc;
    let var = k * k * (q_sq_mean - q_mean * q_mean);
    Ok(ElementMoments::with_variance(mean, mean_sq, var, Element::H, MomentLaw::FixedAngle))
}

/// Moments of `g` at fixed angle `φ`. The variance is
/// `¼ (1 + cos φ)² σ_q²`.
pub fn g_moments_fixed_angle(phi: f64, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    check_positive("phi", phi)?;
    check_q(q_mean, q_sq_mean)?;
    let (s, c) = phi.sin_cos();
    let a = phi * s / PI;
    let b = 0.5 * (1.0 + c);
    let mean = -a - b * q_mean;
    let mean_sq = a * a + b * b * q_sq_mean + 2.0 * a * b * q_mean;
    let var = b * b * (q_sq_mean - q_mean * q_mean);
    Ok(ElementMoments::with_variance(mean, mean_sq, var, Element::G, MomentLaw::FixedAngle))
}

/// Moments of `h` with `φ` uniform on `[0, Γ]`, for any `Γ > 0`.
pub fn h_moments_angle_avg(gamma: f64, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    check_positive("Gamma", gamma)?;
    check_q(q_mean, q_sq_mean)?;
    let si1 = sine_integral(gamma)?;
    let si2 = sine_integral(2.0 * gamma)?;
    let (s, _) = gamma.sin_cos();
    let mean = s / gamma - PI * q_mean / (2.0 * gamma) * si1;
    let mean_sq = 0.5 + (2.0 * gamma).sin() / (4.0 * gamma)
        + 0.25 * PI * PI * q_sq_mean * (si2 / gamma - s * s / (gamma * gamma))
        - PI * q_mean / (2.0 * gamma) * si2;
    Ok(ElementMoments::new(mean, mean_sq, Element::H, angle_law(q_mean, q_sq_mean)))
}

/// Moments of `g` with `φ` uniform on `[0, Γ]`, for any `Γ > 0`.
pub fn g_moments_angle_avg(gamma: f64, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    check_positive("Gamma", gamma)?;
    check_q(q_mean, q_sq_mean)?;
    let (s, c) = gamma.sin_cos();
    let (s2, c2) = (2.0 * gamma).sin_cos();
    let g2 = gamma * gamma;
    let mean = -(s / gamma - c) / PI - 0.5 * q_mean * (1.0 + s / gamma);
    let mean_sq = (g2 / 6.0 - c2 / 4.0 - (2.0 * g2 - 1.0) / (8.0 * gamma) * s2) / (PI * PI)
        + 0.25 * q_sq_mean * (1.5 + 2.0 * s / gamma + s2 / (4.0 * gamma))
        + q_mean / PI * (-c - 0.25 * c2 + s / gamma + s2 / (8.0 * gamma));
    Ok(ElementMoments::new(mean, mean_sq, Element::G, angle_law(q_mean, q_sq_mean)))
}

/// `h` moments for `Γ = 2πm`, where the oscillating terms drop out:
/// `⟨h⟩ = -(π/2Γ) Si(Γ) ⟨q⟩`,
/// `σ_h² = ½ + (π²/4Γ) Si(2Γ) (⟨q²⟩ - (2/π)⟨q⟩) - (π²/4Γ²) ⟨q⟩² Si²(Γ)`.
pub fn h_moments_full_period(m: u32, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    check_q(q_mean, q_sq_mean)?;
    let gamma = 2.0 * PI * m as f64;
    let si1 = sine_integral(gamma)?;
    let si2 = sine_integral(2.0 * gamma)?;
    let mean = -PI / (2.0 * gamma) * si1 * q_mean;
    let mean_sq = 0.5 + PI * PI / (4.0 * gamma) * si2 * q_sq_mean - PI / (2.0 * gamma) * si2 * q_mean;
    let var = 0.5 + PI * PI / (4.0 * gamma) * si2 * (q_sq_mean - 2.0 / PI * q_mean)
        - PI * PI / (4.0 * gamma * gamma) * q_mean * q_mean * si1 * si1;
    Ok(ElementMoments::with_variance(mean, mean_sq, var, Element::H, angle_law(q_mean, q_sq_mean)))
}

/// `g` moments for `Γ = 2πm`:
/// `⟨g⟩ = 1/π - ⟨q⟩/2`,
/// `⟨g²⟩ = (Γ²/6 - ¼)/π² + (3/8)⟨q²⟩ - (5/4π)⟨q⟩`,
/// `σ_g² = (Γ²/6 - 5/4)/π² + ¼((3/2)⟨q²⟩ - ⟨q⟩²) - ⟨q⟩/(4π)`.
pub fn g_moments_full_period(m: u32, q_mean: f64, q_sq_mean: f64) -> Result<ElementMoments> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    check_q(q_mean, q_sq_mean)?;
    let gamma = 2.0 * PI * m as f64;
    let g2 = gamma * gamma;
    let mean = 1.0 / PI - 0.5 * q_mean;
    let mean_sq = (g2 / 6.0 - 0.25) / (PI * PI) + 0.375 * q_sq_mean - 1.25 / PI * q_mean;
    let var = (g2 / 6.0 - 1.25) / (PI * PI) + 0.25 * (1.5 * q_sq_mean - q_mean * q_mean) - q_mean / (4.0 * PI);
    Ok(ElementMoments::with_variance(mean, mean_sq, var, Element::G, angle_law(q_mean, q_sq_mean)))
}

/// Sample moments with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledMoments {
    pub moments: ElementMoments,
    pub mean_stderr: f64,
    pub mean_sq_stderr: f64,
    pub variance_stderr: f64,
}

impl SampledMoments {
    /// Largest deviation of `analytic` from these samples, in standard
    /// errors, over mean, mean square and variance. Components with zero
    /// error bar must match to 1e-12.
    pub fn z_score(&self, analytic: &ElementMoments) -> f64 {
        let z = |a: f64, s: f64, e: f64| {
            let d = (a - s).abs();
            if e > 0.0 {
                d / e
            } else if d <= 1e-12 * (1.0 + s.abs()) {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let m = &self.moments;
        z(analytic.mean, m.mean, self.mean_stderr)
            .max(z(analytic.mean_sq, m.mean_sq, self.mean_sq_stderr))
            .max(z(analytic.variance, m.variance, self.variance_stderr))
    }
}

fn model_law(model: &ForcingModel) -> MomentLaw {
    match (model.af_law(), model.q_law()) {
        (AfLaw::Fixed(_), _) => MomentLaw::FixedAngle,
        (AfLaw::UniformAngle { .. }, QLaw::Constant(_)) => MomentLaw::AngleAverage,
        _ => MomentLaw::Joint,
    }
}

fn sampled(values: &[f64], element: Element, law: MomentLaw) -> SampledMoments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_sq = values.iter().map(|v| v * v).sum::<f64>() / n;
    let (mut c2, mut c4, mut q4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        c2 += d * d;
        c4 += d * d * d * d;
        q4 += v * v * v * v;
    }
    let var = c2 / (n - 1.0);
    let mu4 = c4 / n;
    SampledMoments {
        moments: ElementMoments::with_variance(mean, mean_sq, var, element, law),
        mean_stderr: (var / n).sqrt(),
        mean_sq_stderr: ((q4 / n - mean_sq * mean_sq).max(0.0) / n).sqrt(),
        variance_stderr: ((mu4 - var * var).max(0.0) / n).sqrt(),
    }
}

/// Sample moments of `(h, g)` over `n` iid cycles of `model`.
pub fn mc_element_moments(model: &ForcingModel, n: u64, seed: u64) -> Result<(SampledMoments, SampledMoments)> {
    if n < 10_000 {
        return Err(Error::invalid(format!("need at least 10000 samples, got {n}")));
    }
    let law = model_law(model);
    let mut stream = RandomStream::new(seed);
    if model.is_deterministic() {
        let (h, g) = elements_unchecked(model.sample(&mut stream));
        let exact = |v: f64, e| SampledMoments {
            moments: ElementMoments::with_variance(v, v * v, 0.0, e, law),
            mean_stderr: 0.0,
            mean_sq_stderr: 0.0,
            variance_stderr: 0.0,
        };
        return Ok((exact(h, Element::H), exact(g, Element::G)));
    }
    let mut hs = Vec::with_capacity(n as usize);
    let mut gs = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let (h, g) = elements_unchecked(model.sample(&mut stream));
        hs.push(h);
        gs.push(g);
    }
    if hs.iter().chain(&gs).any(|v| !v.is_finite()) {
        return Err(Error::non_finite("element samples"));
    }
    Ok((sampled(&hs, Element::H, law), sampled(&gs, Element::G, law)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionVariances {
    pub var_x: f64,
    pub var_phi: f64,
}

/// Sample variances of the ratio `x = h/g` and the factor `1 - 1/h²` in
/// the large-q regime (`|q| ≥ 10` everywhere).
pub fn correction_variances_large_q(model: &ForcingModel, n: u64, seed: u64) -> Result<CorrectionVariances> {
    if model.min_abs_q() < 10.0 {
        return Err(Error::invalid("large-q variances need |q| >= 10 on the whole support"));
    }
    if let Some(af) = model.fixed_af() {
        let (k, distance) = crate::asymptotics::nearest_resonance(af);
        let width = crate::asymptotics::stability_band_width(k, model, crate::asymptotics::BandRegime::LargeQ)?;
        if distance <= width {
            return Err(Error::ResonantAf { af, n: k, distance, width });
        }
    }
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let mut stream = RandomStream::new(seed);
    if model.is_deterministic() {
        let p = model.sample(&mut stream);
        ratio_x(p)?;
        correction_phi(p)?;
        return Ok(CorrectionVariances { var_x: 0.0, var_phi: 0.0 });
    }
    let (mut ax, mut aphi) = (Accumulator::default(), Accumulator::default());
    for _ in 0..n {
        let p = model.sample(&mut stream);
        ax.push(ratio_x(p)?);
        aphi.push(correction_phi(p)?);
    }
    Ok(CorrectionVariances {
        var_x: ax.variance(),
        var_phi: aphi.variance(),
    })
}
