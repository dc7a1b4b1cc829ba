//! Trajectory-level checks: direct integration of the kicked oscillator,
//! ensemble growth of `⟨y²⟩`, and the one-dimensional iterative map.
//!
//! Nothing here uses the closed-form matrix elements, so these results are
//! independent oracles for the transfer-matrix code.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lyapunov::{check_plan, Estimator, GrowthEstimate};
use crate::mc::MonteCarlo;
use crate::model::{CycleParams, ForcingModel, RandomStream};
use crate::stats;

/// Position `y` and velocity `v = dy/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub y: f64,
    pub v: f64,
}

impl PhaseState {
    pub fn new(y: f64, v: f64) -> Self {
        PhaseState { y, v }
    }

    /// `E = (v² + af y²) / 2`.
    pub fn energy(&self, af: f64) -> f64 {
        0.5 * (self.v * self.v + af * self.y * self.y)
    }
}

/// How the barrier is treated by [`integrate_cycle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierMethod {
    /// Free rotation to `t = π/2`, the jump `v → v - q y`, free rotation to `π`.
    Exact,
    /// RK4 with the delta replaced by a top-hat of the given width and
    /// area `q`, centred on `t = π/2`.
    Smoothed { width: f64 },
}

/// RK4 step outside the barrier.
pub const SMOOTHED_STEP: f64 = 1e-4;

#[inline]
fn rotate(s: PhaseState, omega: f64, sin: f64, cos: f64) -> PhaseState {
    PhaseState {
        y: s.y * cos + s.v * sin / omega,
        v: -omega * s.y * sin + s.v * cos,
    }
}

/// Propagate one period `[0, π]`.
pub fn integrate_cycle(p: CycleParams, s: PhaseState, method: BarrierMethod) -> Result<PhaseState> {
    if !(p.af > 0.0 && p.af.is_finite() && p.q.is_finite()) {
        return Err(Error::invalid(format!("invalid cycle parameters {p:?}")));
    }
    match method {
        BarrierMethod::Exact => {
            let w = p.af.sqrt();
            let (sn, cs) = (w * FRAC_PI_2).sin_cos();
            let mut s = rotate(s, w, sn, cs);
            s.v -= p.q * s.y;
            Ok(rotate(s, w, sn, cs))
        }
        BarrierMethod::Smoothed { width } => {
            if !(width > 0.0 && width < 0.1) {
                return Err(Error::invalid(format!("barrier width must be in (0, 0.1), got {width}")));
            }
            let edge = FRAC_PI_2 - 0.5 * width;
            let free = (edge / SMOOTHED_STEP).ceil() as usize;
            let k_in = p.af + p.q / width;
            let inside = ((width * k_in.abs().sqrt() / 0.02).ceil() as usize).max(64);
            let mut s = rk4(s, p.af, edge, free);
            s = rk4(s, k_in, width, inside);
            Ok(rk4(s, p.af, edge, free))
        }
    }
}

/// `steps` RK4 steps of `y'' = -k y` over a span of length `len`.
fn rk4(mut s: PhaseState, k: f64, len: f64, steps: usize) -> PhaseState {
    let h = len / steps as f64;
    let f = |y: f64, v: f64| (v, -k * y);
    for _ in 0..steps {
        let (a1, b1) = f(s.y, s.v);
        let (a2, b2) = f(s.y + 0.5 * h * a1, s.v + 0.5 * h * b1);
        let (a3, b3) = f(s.y + 0.5 * h * a2, s.v + 0.5 * h * b2);
        let (a4, b4) = f(s.y + h * a3, s.v + h * b3);
        s.y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        s.v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    s
}

/// Result of [`ensemble_energy_growth`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrowth {
    /// Fitted slope of `log⟨y²⟩` against `t = π k`.
    pub rate: f64,
    /// Jackknife error over 16 trajectory batches.
    pub stderr: f64,
    /// `rate / 2`, the implied growth rate of `|y|`.
    pub amplitude_rate: f64,
    /// The diffusion prediction `⟨q²⟩ / (π af)` for the `⟨y²⟩` rate.
    pub predicted: f64,
    /// False when `⟨q²⟩ / af > 0.01`, outside the small-kick regime.
    pub small_q: bool,
    /// `⟨y²⟩` after each cycle, starting with the initial ensemble.
    pub mean_y_sq: Vec<f64>,
    /// First cycle index used in the fit.
    pub fit_start: usize,
}

const BATCHES: usize = 16;

/// Ensemble growth of `⟨y²⟩` for kicked trajectories.
///
/// `model` supplies the law of `q`; `af` is held fixed. Every trajectory
/// starts on the energy shell `E = 1` (the energy scale of the ensemble)
/// with a uniform random phase. The first 10% of cycles are left out of
/// the fit.
pub fn ensemble_energy_growth(
    af: f64,
    model: &ForcingModel,
    n_traj: usize,
    n_cycles: usize,
    seed: u64,
) -> Result<EnergyGrowth> {
    let model = model.with_af(af)?;
    if n_traj < 1000 {
        return Err(Error::invalid(format!("need at least 1000 trajectories, got {n_traj}")));
    }
    if n_cycles < 10 {
        return Err(Error::invalid(format!("need at least 10 cycles, got {n_cycles}")));
    }
    let w = af.sqrt();
    let (sn, cs) = (w * FRAC_PI_2).sin_cos();
    let sums: Vec<Vec<f64>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; n_cycles + 1];
            for j in (b * n_traj / BATCHES)..((b + 1) * n_traj / BATCHES) {
                let mut stream = RandomStream::keyed(seed, 0, j as u64);
                let theta = 2.0 * PI * stream.uniform();
                let mut s = PhaseState::new((2.0 / af).sqrt() * theta.cos(), 2f64.sqrt() * theta.sin());
                acc[0] += s.y * s.y;
                for slot in acc.iter_mut().skip(1) {
                    let q = model.sample(&mut stream).q;
                    s = rotate(s, w, sn, cs);
                    s.v -= q * s.y;
                    s = rotate(s, w, sn, cs);
                    *slot += s.y * s.y;
                }
            }
            acc
        })
        .collect();
    if sums.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("ensemble trajectories"));
    }
    let fit_start = n_cycles / 10;
    let t: Vec<f64> = (fit_start..=n_cycles).map(|k| PI * k as f64).collect();
    let slope = |skip: Option<usize>| {
        let mut total = vec![0.0; n_cycles + 1];
        for (b, batch) in sums.iter().enumerate() {
            if Some(b) != skip {
                for (a, v) in total.iter_mut().zip(batch) {
                    *a += v;
                }
            }
        }
        let ly: Vec<f64> = total[fit_start..].iter().map(|v| v.ln()).collect();
        (stats::fit_line(&t, &ly).slope, total)
    };
    let (rate, total) = slope(None);
    let jack: Vec<f64> = (0..BATCHES).map(|b| slope(Some(b)).0).collect();
    let jm = stats::mean(&jack);
    let jvar: f64 = jack.iter().map(|s| (s - jm) * (s - jm)).sum::<f64>() * (BATCHES - 1) as f64 / BATCHES as f64;
    let mean_q_sq = model.moments().mean_q_sq;
    Ok(EnergyGrowth {
        rate,
        stderr: jvar.sqrt(),
        amplitude_rate: 0.5 * rate,
        predicted: mean_q_sq / (PI * af),
        small_q: mean_q_sq / af <= 0.01,
        mean_y_sq: total.iter().map(|v| v / n_traj as f64).collect(),
        fit_start,
    })
}

/// Phase at the kick used by [`iterative_map_growth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLaw {
    /// `y/V = tan θ / √af` with `θ` uniform on `[0, π)`.
    UniformRandom,
    /// `y/V` read off an actual kicked trajectory just before each kick.
    Trajectory,
}

/// Points with `|tan θ|` above this are dropped by the uniform-phase map.
pub const TAN_GUARD: f64 = 1e12;

/// Heuristic rate `⟨log|1 - q y/V|⟩` of the iterative map, 16 trials.
pub fn iterative_map_growth(model: &ForcingModel, n: u64, seed: u64, law: PhaseLaw) -> Result<GrowthEstimate> {
    iterative_map_growth_with(model, &MonteCarlo::new(n, 16, seed).with_burn_in(0), law)
}

/// [`iterative_map_growth`] with an explicit plan.
///
/// With [`PhaseLaw::UniformRandom`] each trial is one random shift of a
/// rank-1 Fibonacci lattice over `(u_q, θ/π)` with as many points as the
/// largest Fibonacci number not above `plan.cycles`; the shifts make every
/// trial an unbiased estimate while the lattice resolves the `log|1 - a tan θ|`
/// singularity far better than independent draws. With
/// [`PhaseLaw::Trajectory`] each trial follows one trajectory for
/// `plan.cycles` kicks.
pub fn iterative_map_growth_with(model: &ForcingModel, plan: &MonteCarlo, law: PhaseLaw) -> Result<GrowthEstimate> {
    check_plan(plan, 10_000)?;
    let (values, n_cycles, estimator) = match law {
        PhaseLaw::UniformRandom => {
            let (n, g) = fibonacci_lattice(plan.cycles);
            let v = plan.run_trials(|trial| lattice_trial(model, plan, trial, n, g))?;
            (v, n, Estimator::MapUniformPhase)
        }
        PhaseLaw::Trajectory => {
            let v = plan.run_trials(|trial| trajectory_trial(model, plan, trial))?;
            (v, plan.cycles, Estimator::MapTrajectory)
        }
    };
    Ok(GrowthEstimate {
        gamma: values.mean(),
        stderr: values.stderr(),
        n_cycles,
        n_trials: plan.trials,
        estimator,
    })
}

/// Largest Fibonacci number `F_m ≤ n` and its generator `F_{m-1}`.
fn fibonacci_lattice(n: u64) -> (u64, u64) {
    let (mut a, mut b) = (1u64, 2u64);
    while a + b <= n {
        (a, b) = (b, a + b);
    }
    (b, a)
}

fn lattice_trial(model: &ForcingModel, plan: &MonteCarlo, trial: u32, n: u64, g: u64) -> Result<f64> {
    let mut stream = plan.stream(trial);
    let s1 = stream.uniform();
    let s2 = stream.uniform();
    let fixed_w = model.fixed_af().map(f64::sqrt);
    let mut acc = 0.0;
    let mut kept = 0u64;
    for i in 0..n {
        let u1 = (i as f64 / n as f64 + s1).fract();
        let u2 = (((i * g) % n) as f64 / n as f64 + s2).fract();
        let w = match fixed_w {
            Some(w) => w,
            None => model.sample(&mut stream).af.sqrt(),
        };
        let f = (PI * u2).tan();
        if f.abs() > TAN_GUARD {
            continue;
        }
        let q = model.q_from_uniform(u1);
        acc += (1.0 - q / w * f).abs().ln();
        kept += 1;
    }
    let m = acc / kept as f64;
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::non_finite("iterative map"))
    }
}

fn trajectory_trial(model: &ForcingModel, plan: &MonteCarlo, trial: u32) -> Result<f64> {
    let mut stream = plan.stream(trial);
    let theta = 2.0 * PI * stream.uniform();
    let mut s = PhaseState::new(theta.cos(), theta.sin());
    let fixed = model.fixed_af().map(|af| {
        let w = af.sqrt();
        let (sn, cs) = (w * FRAC_PI_2).sin_cos();
        (w, sn, cs)
    });
    let mut acc = 0.0;
    for _ in 0..plan.cycles {
        let p = model.sample(&mut stream);
        let (w, sn, cs) = match fixed {
            Some(t) => t,
            None => {
                let w = p.af.sqrt();
                let (sn, cs) = (w * FRAC_PI_2).sin_cos();
                (w, sn, cs)
            }
        };
        s = rotate(s, w, sn, cs);
        if s.v == 0.0 {
            return Err(Error::invalid("velocity vanished at a kick"));
        }
        acc += (1.0 - p.q * s.y / s.v).abs().ln();
        s.v -= p.q * s.y;
        s = rotate(s, w, sn, cs);
        let scale = s.y.abs().max(s.v.abs());
        s.y /= scale;
        s.v /= scale;
    }
    let m = acc / plan.cycles as f64;
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::non_finite("iterative map trajectory"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::cycle_matrix;
    use proptest::prelude::*;

    fn cp(af: f64, q: f64) -> CycleParams {
        CycleParams::new(af, q).unwrap()
    }

    fn dist(a: PhaseState, b: PhaseState) -> f64 {
        (a.y - b.y).abs().max((a.v - b.v).abs())
    }

    #[test]
    fn exact_matches_matrix_rows() {
        let p = cp(1.0, 3.0);
        let s = integrate_cycle(p, PhaseState::new(0.0, 1.0), BarrierMethod::Exact).unwrap();
        let m = cycle_matrix(p).unwrap();
        assert!((s.y - m.m12).abs() < 1e-14 && (s.v - m.m22).abs() < 1e-14);
    }

    #[test]
    fn free_oscillator_conserves_energy() {
        let p = cp(0.7, 0.0);
        let s0 = PhaseState::new(0.3, -1.1);
        let e0 = s0.energy(p.af);
        let mut s = s0;
        for _ in 0..1000 {
            s = integrate_cycle(p, s, BarrierMethod::Exact).unwrap();
        }
        assert!((s.energy(p.af) - e0).abs() < 1e-12);
        let s = integrate_cycle(p, s0, BarrierMethod::Smoothed { width: 1e-2 }).unwrap();
        assert!((s.energy(p.af) - e0).abs() < 1e-10);
    }

    #[test]
    fn smoothed_converges_to_exact() {
        let p = cp(0.5, 10.0);
        let s0 = PhaseState::new(1.0, 0.0);
        let exact = integrate_cycle(p, s0, BarrierMethod::Exact).unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&w| dist(integrate_cycle(p, s0, BarrierMethod::Smoothed { width: w }).unwrap(), exact))
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // At least first order in the width per decade.
        assert!(errs[1] < errs[0] / 10.0 * 1.5 && errs[2] < errs[1] / 10.0 * 1.5, "{errs:?}");
    }

    #[test]
    fn rejects_bad_width() {
        let p = cp(0.5, 1.0);
        let s = PhaseState::new(1.0, 0.0);
        assert!(integrate_cycle(p, s, BarrierMethod::Smoothed { width: 0.0 }).is_err());
        assert!(integrate_cycle(p, s, BarrierMethod::Smoothed { width: 0.2 }).is_err());
    }

    #[test]
    fn smoothed_monotone_for_random_cycles() {
        let mut rs = RandomStream::new(17);
        for _ in 0..100 {
            let p = cp(0.05 + 10.0 * rs.uniform(), 20.0 * rs.uniform() - 10.0);
            let s0 = PhaseState::new(2.0 * rs.uniform() - 1.0, 2.0 * rs.uniform() - 1.0);
            let exact = integrate_cycle(p, s0, BarrierMethod::Exact).unwrap();
            let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&w| dist(integrate_cycle(p, s0, BarrierMethod::Smoothed { width: w }).unwrap(), exact))
                .collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "{p:?}: {errs:?}");
        }
    }

    #[test]
    fn no_kicks_no_growth() {
        let m = ForcingModel::constant(0.0, 2.0).unwrap();
        let g = ensemble_energy_growth(2.0, &m, 2000, 200, 1).unwrap();
        assert!(g.rate.abs() < 1e-4, "{}", g.rate);
        assert_eq!(g.predicted, 0.0);
        let r = iterative_map_growth(&m, 10_000, 1, PhaseLaw::UniformRandom).unwrap();
        assert_eq!(r.gamma, 0.0);
        let r = iterative_map_growth(&m, 10_000, 1, PhaseLaw::Trajectory).unwrap();
        assert_eq!(r.gamma, 0.0);
    }

    #[test]
    fn small_q_flag() {
        let m = ForcingModel::symmetric_uniform(1.0, 2.0).unwrap();
        assert!(!ensemble_energy_growth(2.0, &m, 1000, 20, 1).unwrap().small_q);
        let m = ForcingModel::symmetric_uniform(0.1, 2.0).unwrap();
        assert!(ensemble_energy_growth(2.0, &m, 1000, 20, 1).unwrap().small_q);
    }

    #[test]
    fn fibonacci_sizes() {
        assert_eq!(fibonacci_lattice(10_000), (6765, 4181));
        assert_eq!(fibonacci_lattice(6765), (6765, 4181));
    }

    #[test]
    fn uniform_phase_matches_cauchy_identity() {
        // For θ uniform, E log|1 - a tan θ| = ½ log(1 + a²).
        for q in [0.3, 5.0, 300.0] {
            let m = ForcingModel::constant(q, 0.5).unwrap();
            let r = iterative_map_growth(&m, 100_000, 2, PhaseLaw::UniformRandom).unwrap();
            let a = q / 0.5f64.sqrt();
            let exact = 0.5 * (1.0 + a * a).ln();
            assert!((r.gamma - exact).abs() < 1e-3 * exact.max(0.01), "{q}: {} vs {exact}", r.gamma);
        }
    }

    #[test]
    fn trajectory_law_large_q() {
        let m = ForcingModel::constant(1e3, 0.5).unwrap();
        let r = iterative_map_growth(&m, 20_000, 3, PhaseLaw::Trajectory).unwrap();
        let reference = (1e3 / 0.5f64.sqrt()).ln();
        assert!((r.gamma - reference).abs() < 2.0, "{} vs {reference}", r.gamma);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exact_integration_is_the_matrix(af in 0.01f64..100.0, q in -1e3f64..1e3, y in -1.0f64..1.0, v in -1.0f64..1.0) {
            let p = cp(af, q);
            let s = integrate_cycle(p, PhaseState::new(y, v), BarrierMethod::Exact).unwrap();
            let (my, mv) = cycle_matrix(p).unwrap().apply(y, v);
            let scale = 1.0 + my.abs().max(mv.abs());
            prop_assert!((s.y - my).abs() <= 1e-12 * scale);
            prop_assert!((s.v - mv).abs() <= 1e-12 * scale);
        }
    }
}
