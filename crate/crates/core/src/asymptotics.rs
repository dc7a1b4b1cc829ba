//! Closed-form and semi-analytic approximations to the growth rate.
//!
//! Large forcing: `γ ≈ ⟨log|2h|⟩` with corrections `Δγ` (from the spread of
//! the ratios `x = h/g`) and `δγ` (from `1 - 1/h²`), and the cruder
//! `γ ≈ ⟨log|q sin φ / √af|⟩`. Small forcing: `γ ≈ log(1 + ⟨q²⟩/(8 af))`
//! and the diffusion estimate `⟨q²⟩/(2π af)`. Both regimes fail at
//! `af = n²`, where the kick decouples; the guards below reject `af`
//! inside the stability zone around `n²`.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::lyapunov::iid_mean;
use crate::model::{CycleParams, ForcingModel, QLaw, RandomStream};
use crate::stats::{self, MeanEstimate};
use crate::transfer::{elements_unchecked, ratio_x};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LargeQ,
    InfiniteQ,
    SmallQ,
    FokkerPlanck,
}

/// Named corrections to the large-q rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Corrections {
    pub delta_gamma_x: Option<f64>,
    pub delta_gamma_phi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxRate {
    pub gamma: f64,
    /// Sampling error of the expectation; 0 when evaluated exactly.
    pub stderr: f64,
    pub regime: Regime,
    pub correction_terms: Option<Corrections>,
    /// Set when the formula is used outside its stated assumptions but
    /// still evaluated.
    pub note: Option<&'static str>,
}

impl ApproxRate {
    fn exact(gamma: f64, regime: Regime) -> Self {
        ApproxRate {
            gamma,
            stderr: 0.0,
            regime,
            correction_terms: None,
            note: None,
        }
    }
}

/// The `n ≥ 1` whose `n²` is closest to `af`, and the distance `|af - n²|`.
pub fn nearest_resonance(af: f64) -> (u32, f64) {
    let r = af.sqrt();
    let lo = (r.floor() as u32).max(1);
    let hi = lo + 1;
    let d = |n: u32| (af - (n * n) as f64).abs();
    if d(lo) <= d(hi) {
        (lo, d(lo))
    } else {
        (hi, d(hi))
    }
}

/// Width of the stability zone in `af` around `n²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandRegime {
    /// `2 q_ref / π`, independent of `n`.
    SmallQ,
    /// `8 n² / (π q_ref)`.
    LargeQ,
}

/// Stability-zone width with `q_ref = ⟨|q|⟩` of the model.
pub fn stability_band_width(n: u32, model: &ForcingModel, regime: BandRegime) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("band index n must be at least 1"));
    }
    Ok(band_width(n, model.moments().mean_abs_q, regime))
}

/// [`stability_band_width`] for an explicit `q_ref`.
pub fn band_width(n: u32, q_ref: f64, regime: BandRegime) -> f64 {
    match regime {
        BandRegime::SmallQ => 2.0 * q_ref / PI,
        BandRegime::LargeQ => 8.0 * (n as f64) * (n as f64) / (PI * q_ref),
    }
}

fn fixed_af(model: &ForcingModel) -> Result<f64> {
    model
        .fixed_af()
        .ok_or_else(|| Error::invalid("this approximation needs a fixed af"))
}

/// Rejects `af` within one large-q zone width of the nearest `n²`.
fn large_q_guard(model: &ForcingModel) -> Result<f64> {
    let af = fixed_af(model)?;
    let (n, distance) = nearest_resonance(af);
    let width = band_width(n, model.moments().mean_abs_q, BandRegime::LargeQ);
    if distance <= width {
        return Err(Error::ResonantAf { af, n, distance, width });
    }
    Ok(af)
}

/// `log|2h|`, the large-q integrand.
#[inline]
pub fn log_two_h(p: CycleParams) -> f64 {
    (2.0 * elements_unchecked(p).0).abs().ln()
}

/// `log|q sin φ / √af|`, the infinite-q integrand.
#[inline]
pub fn log_infinite_q(p: CycleParams) -> f64 {
    let w = p.af.sqrt();
    (p.q * (w * PI).sin() / w).abs().ln()
}

/// Large-q growth rate `⟨log|2h|⟩`, exact for constant models.
pub fn gamma_large_q(model: &ForcingModel, n_samples: u64, seed: u64) -> Result<ApproxRate> {
    large_q_guard(model)?;
    let (gamma, stderr) = iid_mean(model, n_samples, seed, |p| Ok(log_two_h(p)))?;
    Ok(ApproxRate {
        stderr,
        ..ApproxRate::exact(gamma, Regime::LargeQ)
    })
}

/// Large-q rate with both corrections attached.
pub fn gamma_large_q_corrected(model: &ForcingModel, n_samples: u64, seed: u64) -> Result<ApproxRate> {
    let mut r = gamma_large_q(model, n_samples, seed)?;
    let dx = delta_gamma_x(model, n_samples, seed ^ 0x5eed_0001)?;
    let dphi = delta_gamma_phi(model, n_samples, seed ^ 0x5eed_0002)?;
    r.correction_terms = Some(Corrections {
        delta_gamma_x: Some(dx.mean),
        delta_gamma_phi: Some(dphi.mean),
    });
    Ok(r)
}

/// Infinite-q growth rate `⟨log|q sin φ / √af|⟩`.
pub fn gamma_infinite_q(model: &ForcingModel, n_samples: u64, seed: u64) -> Result<ApproxRate> {
    large_q_guard(model)?;
    if model.min_abs_q() == 0.0 {
        return Err(Error::invalid("q law reaches 0, where log|q| diverges"));
    }
    let (gamma, stderr) = iid_mean(model, n_samples, seed, |p| Ok(log_infinite_q(p)))?;
    Ok(ApproxRate {
        stderr,
        ..ApproxRate::exact(gamma, Regime::InfiniteQ)
    })
}

/// `Δγ = ⟨log|1 + x₁/x₂|⟩ - log 2` over independent pairs of cycles.
pub fn delta_gamma_x(model: &ForcingModel, n_pairs: u64, seed: u64) -> Result<MeanEstimate> {
    large_q_guard(model)?;
    if model.is_deterministic() {
        // x is constant, so every pair contributes log 2 - log 2.
        ratio_x(model.sample(&mut RandomStream::new(seed)))?;
        return Ok(MeanEstimate { mean: 0.0, stderr: 0.0 });
    }
    delta_gamma_x_with(|s| model.sample(s), n_pairs, seed)
}

pub(crate) fn delta_gamma_x_with<S>(mut sample: S, n_pairs: u64, seed: u64) -> Result<MeanEstimate>
where
    S: FnMut(&mut RandomStream) -> CycleParams,
{
    if n_pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let mut stream = RandomStream::new(seed);
    let mut acc = stats::Accumulator::default();
    for _ in 0..n_pairs {
        let x1 = ratio_x(sample(&mut stream))?;
        let x2 = ratio_x(sample(&mut stream))?;
        acc.push((1.0 + x1 / x2).abs().ln() - LN_2);
    }
    acc.estimate()
}

/// One summand of `δγ`:
/// `x² / ((x + x_next)(x + x_prev)) · 4φ² / sin²φ · 1 / (π² q²)`.
#[inline]
pub fn delta_gamma_phi_term(x_prev: f64, x: f64, x_next: f64, p: CycleParams) -> f64 {
    let phi = p.phi();
    let s = phi.sin();
    x * x / ((x + x_next) * (x + x_prev)) * 4.0 * phi * phi / (s * s) / (PI * PI * p.q * p.q)
}

/// `δγ`, averaged over sliding windows `(k-1, k, k+1)` of one iid sequence.
/// The error bar uses 32 batch means since neighbouring windows overlap.
pub fn delta_gamma_phi(model: &ForcingModel, n_triples: u64, seed: u64) -> Result<MeanEstimate> {
    large_q_guard(model)?;
    if model.min_abs_q() == 0.0 {
        return Err(Error::invalid("q law reaches 0, where 1/q² diverges"));
    }
    if n_triples == 0 {
        return Err(Error::invalid("need at least one window"));
    }
    let mut stream = RandomStream::new(seed);
    if model.is_deterministic() {
        let p = model.sample(&mut stream);
        let x = ratio_x(p)?;
        return Ok(MeanEstimate {
            mean: delta_gamma_phi_term(x, x, x, p),
            stderr: 0.0,
        });
    }
    let draw = |s: &mut RandomStream| -> Result<(CycleParams, f64)> {
        let p = model.sample(s);
        Ok((p, ratio_x(p)?))
    };
    let mut prev = draw(&mut stream)?.1;
    let (mut p, mut x) = draw(&mut stream)?;
    let batches = 32.min(n_triples);
    let per = n_triples / batches;
    let mut total = 0.0;
    let mut batch_means = Vec::with_capacity(batches as usize);
    for b in 0..batches {
        let len = if b + 1 == batches { n_triples - per * b } else { per };
        let mut acc = 0.0;
        for _ in 0..len {
            let (p_next, x_next) = draw(&mut stream)?;
            acc += delta_gamma_phi_term(prev, x, x_next, p);
            prev = x;
            x = x_next;
            p = p_next;
        }
        total += acc;
        batch_means.push(acc / len as f64);
    }
    let mean = total / n_triples as f64;
    if !mean.is_finite() {
        return Err(Error::non_finite("delta gamma phi"));
    }
    Ok(MeanEstimate {
        mean,
        stderr: stats::std_err(&batch_means),
    })
}

/// The fixed-angle large-q limit of `δγ`: `(φ/(π sin φ))² ⟨1/q²⟩`.
pub fn delta_gamma_phi_limit(af: f64, mean_inv_q_sq: f64) -> f64 {
    let s = (af.sqrt() * PI).sin();
    af / (s * s) * mean_inv_q_sq
}

/// `log(1 + ⟨q²⟩/(8 af))` without the resonance guard.
#[inline]
pub fn small_q_rate(af: f64, mean_q_sq: f64) -> f64 {
    (mean_q_sq / (8.0 * af)).ln_1p()
}

/// Small-q growth rate `log(1 + ⟨q²⟩/(8 af))` for symmetric forcing.
///
/// Rejects `af` within the half-width `q_rms/π` of the stability zone
/// around the nearest `n²`.
pub fn gamma_small_q(af: f64, mean_q_sq: f64) -> Result<ApproxRate> {
    if !(af > 0.0 && af.is_finite()) {
        return Err(Error::invalid(format!("af must be positive, got {af}")));
    }
    if !(mean_q_sq >= 0.0 && mean_q_sq.is_finite()) {
        return Err(Error::invalid(format!("<q^2> must be non-negative, got {mean_q_sq}")));
    }
    let (n, distance) = nearest_resonance(af);
    let width = 0.5 * band_width(n, mean_q_sq.sqrt(), BandRegime::SmallQ);
    if distance <= width {
        return Err(Error::ResonantAf { af, n, distance, width });
    }
    Ok(ApproxRate::exact(small_q_rate(af, mean_q_sq), Regime::SmallQ))
}

/// [`gamma_small_q`] for a fixed-`af` model; flags forcing that is not
/// symmetric about 0.
pub fn gamma_small_q_for(model: &ForcingModel) -> Result<ApproxRate> {
    let af = fixed_af(model)?;
    let mut r = gamma_small_q(af, model.moments().mean_q_sq)?;
    let symmetric = matches!(model.q_law(), QLaw::SymmetricUniform { .. } | QLaw::Constant(0.0))
        || matches!(model.q_law(), QLaw::Uniform { lo, hi } if lo == -hi);
    if !symmetric {
        r.note = Some("q law is not symmetric about 0");
    }
    Ok(r)
}

/// Diffusion estimate `⟨q²⟩ / (2π af)`, with diffusion constant `⟨q²⟩/π`.
pub fn gamma_fokker_planck(af: f64, mean_q_sq: f64) -> Result<ApproxRate> {
    if !(af > 0.0 && af.is_finite()) {
        return Err(Error::invalid(format!("af must be positive, got {af}")));
    }
    if !(mean_q_sq >= 0.0 && mean_q_sq.is_finite()) {
        return Err(Error::invalid(format!("<q^2> must be non-negative, got {mean_q_sq}")));
    }
    Ok(ApproxRate::exact(mean_q_sq / (2.0 * PI * af), Regime::FokkerPlanck))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QLaw;

    #[test]
    fn infinite_q_example() {
        let m = ForcingModel::constant(10.0, 0.25).unwrap();
        let r = gamma_infinite_q(&m, 1000, 0).unwrap();
        assert!((r.gamma - 20f64.ln()).abs() < 1e-14);
        assert_eq!(r.regime, Regime::InfiniteQ);
        assert!(gamma_infinite_q(&ForcingModel::symmetric_uniform(100.0, 0.5).unwrap(), 1000, 0).is_err());
    }

    #[test]
    fn large_q_constant_is_exact() {
        let m = ForcingModel::constant(50.0, 0.5).unwrap();
        let r = gamma_large_q(&m, 1000, 0).unwrap();
        let h = elements_unchecked(CycleParams { af: 0.5, q: 50.0 }).0;
        assert_eq!(r.gamma, (2.0 * h).abs().ln());
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn large_q_difference_vanishes() {
        let p = |q| CycleParams { af: 0.5, q };
        let d1 = (log_two_h(p(1e4)) - log_infinite_q(p(1e4))).abs();
        let d2 = (log_two_h(p(1e6)) - log_infinite_q(p(1e6))).abs();
        assert!(d2 < d1 && d2 < 1e-5);
    }

    #[test]
    fn resonance_guards() {
        for af in [1.0, 4.0, 9.0] {
            let m = ForcingModel::shifted_uniform(100.0, af).unwrap();
            assert!(matches!(gamma_large_q(&m, 1000, 0), Err(Error::ResonantAf { .. })));
            assert!(matches!(gamma_infinite_q(&m, 1000, 0), Err(Error::ResonantAf { .. })));
            assert!(matches!(delta_gamma_x(&m, 1000, 0), Err(Error::ResonantAf { .. })));
            assert!(matches!(delta_gamma_phi(&m, 1000, 0), Err(Error::ResonantAf { .. })));
            assert!(matches!(gamma_small_q(af, 0.01), Err(Error::ResonantAf { .. })));
            assert!(matches!(gamma_small_q(af, 0.0), Err(Error::ResonantAf { .. })));
        }
        for af in [2.0, 3.0, 5.0, 7.0] {
            let m = ForcingModel::shifted_uniform(100.0, af).unwrap();
            assert!(gamma_large_q(&m, 1000, 0).is_ok());
            assert!(gamma_infinite_q(&m, 1000, 0).is_ok());
            assert!(delta_gamma_x(&m, 1000, 0).is_ok());
            assert!(delta_gamma_phi(&m, 1000, 0).is_ok());
            assert!(gamma_small_q(af, 0.16).is_ok());
        }
        assert!(gamma_large_q(&ForcingModel::constant(10.0, 0.25).unwrap(), 1000, 0).is_ok());
        match gamma_small_q(4.01, 0.01) {
            Err(Error::ResonantAf { n, .. }) => assert_eq!(n, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_q_arithmetic() {
        assert_eq!(gamma_small_q(2.0, 0.0).unwrap().gamma, 0.0);
        assert!((gamma_small_q(2.0, 0.16).unwrap().gamma - 1.01f64.ln()).abs() < 1e-15);
        let r = gamma_small_q_for(&ForcingModel::shifted_uniform(0.1, 2.0).unwrap()).unwrap();
        assert!(r.note.is_some());
        let r = gamma_small_q_for(&ForcingModel::symmetric_uniform(0.1, 2.0).unwrap()).unwrap();
        assert!(r.note.is_none());
    }

    #[test]
    fn fokker_planck_arithmetic() {
        let r = gamma_fokker_planck(2.0, 0.01).unwrap();
        assert!((r.gamma - 7.9577e-4).abs() < 1e-8);
        assert_eq!(gamma_fokker_planck(3.0, 0.0).unwrap().gamma, 0.0);
        for af in [1.5, 2.0, 3.0, 5.0, 8.0] {
            let q2 = 1e-6;
            let ratio = gamma_fokker_planck(af, q2).unwrap().gamma / gamma_small_q(af, q2).unwrap().gamma;
            assert!((ratio - 4.0 / PI).abs() / (4.0 / PI) < 1e-3, "{ratio}");
        }
    }

    #[test]
    fn band_widths() {
        let m = ForcingModel::constant(0.1, 2.0).unwrap();
        let w = stability_band_width(1, &m, BandRegime::SmallQ).unwrap();
        assert!((w - 0.063662).abs() < 1e-6);
        assert_eq!(w, stability_band_width(3, &m, BandRegime::SmallQ).unwrap());
        let m = ForcingModel::constant(100.0, 2.0).unwrap();
        let w1 = stability_band_width(1, &m, BandRegime::LargeQ).unwrap();
        assert!((w1 - 0.025465).abs() < 1e-6);
        let w2 = stability_band_width(2, &m, BandRegime::LargeQ).unwrap();
        assert!((w2 / w1 - 4.0).abs() < 1e-14);
        assert!(stability_band_width(0, &m, BandRegime::LargeQ).is_err());
    }

    #[test]
    fn nearest_resonance_picks_closest_square() {
        assert_eq!(nearest_resonance(0.3), (1, 0.7));
        assert_eq!(nearest_resonance(6.0).0, 2);
        assert_eq!(nearest_resonance(7.0).0, 3);
        assert_eq!(nearest_resonance(9.0), (3, 0.0));
    }

    #[test]
    fn delta_gamma_x_constant_is_zero() {
        let m = ForcingModel::constant(500.0, 0.5).unwrap();
        assert_eq!(delta_gamma_x(&m, 100, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn delta_gamma_x_two_point_law() {
        // q in {q0, 2 q0} with equal probability: enumerate the 4 pairs.
        let q0 = 40.0;
        let af = 0.5;
        let x = |q| ratio_x(CycleParams { af, q }).unwrap();
        let xs = [x(q0), x(2.0 * q0)];
        let mut exact = 0.0;
        for a in xs {
            for b in xs {
                exact += 0.25 * ((1.0 + a / b).abs().ln() - LN_2);
            }
        }
        let est = delta_gamma_x_with(
            |s| CycleParams {
                af,
                q: if s.uniform() < 0.5 { q0 } else { 2.0 * q0 },
            },
            400_000,
            3,
        )
        .unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{est:?} vs {exact}");
        // (1 + r)(1 + 1/r) >= 4, so the pair average is positive.
        assert!(exact > 0.0);
    }

    #[test]
    fn delta_gamma_phi_constant_limit() {
        let m = ForcingModel::constant(1e3, 0.5).unwrap();
        let d = delta_gamma_phi(&m, 10, 0).unwrap().mean;
        let limit = delta_gamma_phi_limit(0.5, 1e-6);
        assert!((d - limit).abs() / limit < 0.01, "{d} vs {limit}");
        // Direct check of the all-equal window: x²/(2x·2x) = 1/4.
        let p = CycleParams { af: 0.5, q: 1e3 };
        let phi = p.phi();
        let direct = (phi / (PI * phi.sin())).powi(2) / 1e6;
        assert!((delta_gamma_phi_term(3.0, 3.0, 3.0, p) - direct).abs() < 1e-15 * direct.max(1.0) + 1e-20);
    }

    #[test]
    fn delta_gamma_phi_order() {
        let mut vals = Vec::new();
        for q0 in [1e2, 1e3, 1e4] {
            let m = ForcingModel::shifted_uniform(q0, 0.5).unwrap();
            let d = delta_gamma_phi(&m, 200_000, 11).unwrap();
            assert!(d.mean > 0.0);
            vals.push(d.mean * q0 * q0 / 0.5);
        }
        // δγ q0²/af stays O(1) across two decades.
        for v in &vals {
            assert!(*v > 0.1 && *v < 10.0, "{vals:?}");
        }
    }

    #[test]
    fn delta_gamma_x_decays() {
        let d = |q0: f64| {
            let m = ForcingModel::new(QLaw::ShiftedUniform { q0 }, crate::model::AfLaw::Fixed(0.5)).unwrap();
            delta_gamma_x(&m, 400_000, 5).unwrap().mean.abs()
        };
        let (a, b) = (d(1e2), d(1e3));
        assert!(b < a / 5.0, "{a} {b}");
    }
}
