//! Growth rates: the top Lyapunov exponent of the random product, the
//! average single-cycle rate `γ_∞`, and the classical fixed-parameter rate.

use std::fmt;

use crate::error::{Error, Result};
use crate::mc::{MonteCarlo, TrialValues};
use crate::model::{CycleParams, ForcingModel, RandomStream};
use crate::transfer::{cycle_matrix, elements_unchecked, CycleKernel, Norm, ProductState};

/// Which operation produced a [`GrowthEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Product(Norm),
    ControlVariate,
    CycleAverage,
    Classical,
    MapUniformPhase,
    MapTrajectory,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Product(Norm::MaxAbs) => "product_maxabs",
            Estimator::Product(Norm::Frobenius) => "product_frobenius",
            Estimator::ControlVariate => "energy_vector_cv",
            Estimator::CycleAverage => "cycle_average",
            Estimator::Classical => "classical",
            Estimator::MapUniformPhase => "map_uniform_phase",
            Estimator::MapTrajectory => "map_trajectory",
        })
    }
}

/// A growth rate in nats per cycle with its standard error.
///
/// `stderr` is the spread of per-trial values over `sqrt(n_trials)`; a
/// single-trial estimate reports 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub gamma: f64,
    pub stderr: f64,
    pub n_cycles: u64,
    pub n_trials: u32,
    pub estimator: Estimator,
}

impl GrowthEstimate {
    pub(crate) fn from_trials(t: &TrialValues, n_cycles: u64, estimator: Estimator) -> Self {
        GrowthEstimate {
            gamma: t.mean(),
            stderr: t.stderr(),
            n_cycles,
            n_trials: t.values.len() as u32,
            estimator,
        }
    }
}

/// Single-cycle growth rate `log(|h| + sqrt(h² - 1))`, 0 when `|h| ≤ 1`.
///
/// `|h|` within 1e-12 of 1 counts as parabolic: at `af = n²` rounding in
/// `sin(nπ)` would otherwise leave a spurious rate of order `sqrt(q·1e-16)`.
#[inline]
pub fn cycle_rate(h: f64) -> f64 {
    let a = h.abs();
    if a <= 1.0 + 1e-12 {
        0.0
    } else {
        a.acosh()
    }
}

/// Log spectral radius of the one-cycle matrix.
pub fn classical_growth_rate(p: CycleParams) -> f64 {
    match cycle_matrix(p) {
        Ok(m) => cycle_rate(0.5 * m.trace()),
        Err(_) => f64::NAN,
    }
}

pub(crate) fn check_plan(plan: &MonteCarlo, min_cycles: u64) -> Result<()> {
    if plan.cycles < min_cycles {
        return Err(Error::invalid(format!(
            "need at least {min_cycles} cycles, got {}",
            plan.cycles
        )));
    }
    if plan.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if plan.burn_in >= plan.cycles {
        return Err(Error::invalid(format!(
            "burn-in {} must be shorter than the run ({} cycles)",
            plan.burn_in, plan.cycles
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of the top Lyapunov exponent with the default plan
/// (10% burn-in) and the max-abs norm.
pub fn growth_rate_mc(model: &ForcingModel, n_cycles: u64, n_trials: u32, seed: u64) -> Result<GrowthEstimate> {
    growth_rate(model, &MonteCarlo::new(n_cycles, n_trials, seed), Norm::MaxAbs)
}

/// Monte Carlo estimate of the top Lyapunov exponent.
///
/// Each trial multiplies `plan.cycles` random cycle matrices and returns
/// `(log||P_N|| - log||P_b||) / (N - b)` with `b = plan.burn_in`. Taking
/// the difference cancels the `O(1/N)` offset from the norm of the
/// normalized factor; with `b = 0` this is plain `log||P_N|| / N`.
pub fn growth_rate(model: &ForcingModel, plan: &MonteCarlo, norm: Norm) -> Result<GrowthEstimate> {
    let t = growth_trials(model, plan, norm)?;
    Ok(GrowthEstimate::from_trials(&t, plan.cycles, Estimator::Product(norm)))
}

/// Per-trial growth rates, in trial order.
pub fn growth_trials(model: &ForcingModel, plan: &MonteCarlo, norm: Norm) -> Result<TrialValues> {
    check_plan(plan, 1000)?;
    plan.run_trials(|trial| trial_growth(model, plan, trial, norm))
}

fn trial_growth(model: &ForcingModel, plan: &MonteCarlo, trial: u32, norm: Norm) -> Result<f64> {
    let mut stream = plan.stream(trial);
    let mut state = ProductState::new();
    let mut log_burn = state.log_size(norm);
    match model.fixed_af() {
        Some(af) => {
            let kernel = CycleKernel::new(af)?;
            run_fixed(model, &kernel, &mut stream, &mut state, plan.burn_in);
            log_burn = state.log_size(norm);
            run_fixed(model, &kernel, &mut stream, &mut state, plan.window());
        }
        None => {
            for k in 0..plan.cycles {
                if k == plan.burn_in {
                    log_burn = state.log_size(norm);
                }
                let m = cycle_matrix(model.sample(&mut stream))?;
                state.absorb_unchecked(&m);
            }
        }
    }
    let gamma = (state.log_size(norm) - log_burn) / plan.window() as f64;
    if gamma.is_finite() && state.normalized().is_finite() {
        Ok(gamma)
    } else {
        Err(Error::non_finite("matrix product"))
    }
}

#[inline]
fn run_fixed(model: &ForcingModel, kernel: &CycleKernel, stream: &mut RandomStream, state: &mut ProductState, n: u64) {
    for _ in 0..n {
        let q = model.sample(stream).q;
        state.absorb_unchecked(&kernel.at(q));
    }
}

/// Top Lyapunov exponent for a fixed-`af` model from one tracked vector,
/// with a control variate that removes the first-order noise of each kick.
///
/// In coordinates `(Y, V) = (√af·y, y')` the free motion is a rotation, so
/// only kicks change `|u|`. A kick of strength `ε = q/√af` at phase `θ`
/// changes `ln|u|` by `½ ln(1 - ε sin 2θ + ε² cos²θ)`. Its first-order part
/// `-½ ε sin 2θ` has mean `-½ ⟨ε⟩ ⟨sin 2θ⟩` because `ε` is drawn after `θ`
/// is fixed, so adding `½ (ε - ⟨ε⟩) sin 2θ` leaves the expectation alone.
/// For centred forcing this takes the per-cycle variance from order `γ`
/// down to order `γ²`, which matters when `γ` is small.
///
/// Uses the same draws as [`growth_rate`] with the same plan, so the two
/// estimates can be compared cycle for cycle.
pub fn growth_rate_cv(model: &ForcingModel, plan: &MonteCarlo) -> Result<GrowthEstimate> {
    let t = growth_trials_cv(model, plan)?;
    Ok(GrowthEstimate::from_trials(&t, plan.cycles, Estimator::ControlVariate))
}

/// Per-trial values of [`growth_rate_cv`], in trial order.
pub fn growth_trials_cv(model: &ForcingModel, plan: &MonteCarlo) -> Result<TrialValues> {
    check_plan(plan, 1000)?;
    let af = model
        .fixed_af()
        .ok_or_else(|| Error::invalid("the control-variate estimator needs a fixed af"))?;
    let w = af.sqrt();
    let (s, c) = (w * std::f64::consts::PI).sin_cos();
    let (s2, c2) = (0.5 * w * std::f64::consts::PI).sin_cos();
    let eps_mean = model.moments().mean_q / w;
    plan.run_trials(|trial| {
        let mut stream = plan.stream(trial);
        // Start at (y, y') = (1, 0) and rotate to the first kick.
        let (mut y, mut v) = (w * c2, -w * s2);
        let mut acc = 0.0;
        for k in 0..plan.cycles {
            let eps = model.sample(&mut stream).q / w;
            let r2 = y * y + v * v;
            let sin2 = 2.0 * y * v / r2;
            let cos_sq = y * y / r2;
            v -= eps * y;
            if k >= plan.burn_in {
                let d = 0.5 * (-eps * sin2 + eps * eps * cos_sq).ln_1p();
                acc += d + 0.5 * (eps - eps_mean) * sin2;
            }
            let r2 = y * y + v * v;
            if !(1e-200..=1e200).contains(&r2) {
                let k = (r2.log2() * 0.5).floor();
                let scale = (-k).exp2();
                y *= scale;
                v *= scale;
            }
            (y, v) = (c * y + s * v, -s * y + c * v);
        }
        let gamma = acc / plan.window() as f64;
        if gamma.is_finite() {
            Ok(gamma)
        } else {
            Err(Error::non_finite("tracked vector"))
        }
    })
}

/// Per-trial averages of `f` over the same cycles that
/// [`growth_trials`] uses for `plan`: same streams, same window.
///
/// Differences between the two are then pathwise, which removes most of
/// the sampling noise from comparisons of an approximation with the
/// product estimate.
pub fn window_means<F>(model: &ForcingModel, plan: &MonteCarlo, f: F) -> Result<TrialValues>
where
    F: Fn(CycleParams) -> f64 + Sync,
{
    check_plan(plan, 1)?;
    plan.run_trials(|trial| {
        let mut stream = plan.stream(trial);
        for _ in 0..plan.burn_in {
            model.sample(&mut stream);
        }
        let mut acc = 0.0;
        for _ in 0..plan.window() {
            acc += f(model.sample(&mut stream));
        }
        let m = acc / plan.window() as f64;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::non_finite("window average"))
        }
    })
}

/// Sample mean and standard error of `f` over `n` iid cycles drawn from
/// one stream. Deterministic models are evaluated once, exactly.
pub(crate) fn iid_mean<F>(model: &ForcingModel, n: u64, seed: u64, f: F) -> Result<(f64, f64)>
where
    F: Fn(CycleParams) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut stream = RandomStream::new(seed);
    if model.is_deterministic() {
        return Ok((f(model.sample(&mut stream))?, 0.0));
    }
    // Welford update keeps the variance accurate for large n.
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..n {
        let x = f(model.sample(&mut stream))?;
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    if !mean.is_finite() {
        return Err(Error::non_finite("sample mean"));
    }
    Ok((mean, (var / n as f64).sqrt()))
}

/// `γ_∞`: the expected single-cycle growth rate, with each elliptic cycle
/// contributing 0.
pub fn asymptotic_growth_rate(model: &ForcingModel, n_samples: u64, seed: u64) -> Result<GrowthEstimate> {
    if n_samples < 1000 {
        return Err(Error::invalid(format!("need at least 1000 samples, got {n_samples}")));
    }
    let (gamma, stderr) = iid_mean(model, n_samples, seed, |p| Ok(cycle_rate(elements_unchecked(p).0)))?;
    Ok(GrowthEstimate {
        gamma,
        stderr,
        n_cycles: n_samples,
        n_trials: 1,
        estimator: Estimator::CycleAverage,
    })
}
