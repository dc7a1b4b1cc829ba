//! Parameter sweeps behind the CLI subcommands. Each config runs one
//! experiment and returns a [`SweepTable`] whose metadata is enough to
//! rerun it bit for bit.
//!
//! Grid points are evaluated in parallel. Point `k` uses stream key `k`
//! (fig2 uses `10000·ℓ + k`), and results are assembled in grid order, so
//! output does not depend on the number of threads.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::asymptotics::{self, band_width, log_infinite_q, log_two_h, small_q_rate, BandRegime};
use crate::error::{Error, Result};
use crate::lyapunov::{self, classical_growth_rate, cycle_rate, growth_trials, window_means};
use crate::mc::MonteCarlo;
use crate::model::{AfLaw, CycleParams, ForcingModel, QLaw};
use crate::moments::{self, ElementMoments, SampledMoments};
use crate::oscillator::{self, PhaseLaw};
use crate::stats;
use crate::table::SweepTable;
use crate::transfer::{elements_unchecked, Norm};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

fn base_table(command: &str) -> SweepTable {
    let mut t = SweepTable::new();
    t.push_meta("generator", concat!("hill-delta ", env!("CARGO_PKG_VERSION")));
    t.push_meta("command", command);
    t
}

const PRODUCT_ESTIMATOR: &str = "(log||P_N|| - log||P_burn_in||)/(N - burn_in), max-abs norm, mean over trials";

fn plan_meta(t: &mut SweepTable, plan: &MonteCarlo, estimator: &str) {
    t.push_meta("seed", plan.seed);
    t.push_meta("cycles", plan.cycles);
    t.push_meta("trials", plan.trials);
    t.push_meta("burn_in", plan.burn_in);
    t.push_meta(
        "rng",
        "ChaCha8; key=(seed, grid point), stream=trial; uniform draws with 53 bits",
    );
    t.push_meta("estimator", estimator);
}

fn model_meta(t: &mut SweepTable, model: &ForcingModel) {
    t.push_meta("model", model);
    if let QLaw::ShiftedUniform { .. } = model.q_law() {
        t.push_meta("xi_support", "[0,1]: q = (1 + xi) q0");
    }
}

/// `n` log-spaced points from `lo` to `hi`. The ends are exact, and so
/// are interior powers of two when both ends are powers of two.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log2(), hi.log2());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp2()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

/// `n` evenly spaced points from `lo` to `hi`, computed as a weighted
/// average so that grid points hit integers exactly when they should.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let m = (n - 1) as f64;
    (0..n).map(|k| (lo * (m - k as f64) + hi * k as f64) / m).collect()
}

fn check_range(name: &str, lo: f64, hi: f64, points: usize) -> Result<()> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!("{name} range must satisfy 0 < min < max, got [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(Error::invalid(format!("need at least 2 points, got {points}")));
    }
    Ok(())
}

fn check_mc(cycles: u64, trials: u32) -> Result<()> {
    if cycles < 1000 {
        return Err(Error::invalid(format!("need at least 1000 cycles, got {cycles}")));
    }
    if trials < 2 {
        return Err(Error::invalid(format!("need at least 2 trials for error bars, got {trials}")));
    }
    Ok(())
}

/// Large-q error scaling: product estimate against `⟨log|2h|⟩` and
/// `⟨log|q sin φ/√af|⟩` for `q = (1 + ξ) q0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Config {
    pub q0_min: f64,
    pub q0_max: f64,
    pub points: usize,
    /// An assumption; 0.5 sits between resonances.
    pub af: f64,
    pub cycles: u64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            q0_min: 32.0,
            q0_max: 4096.0,
            points: 8,
            af: 0.5,
            cycles: 100_000,
            trials: 16,
            seed: DEFAULT_SEED,
        }
    }
}

impl Fig1Config {
    pub fn run(&self) -> Result<SweepTable> {
        check_range("q0", self.q0_min, self.q0_max, self.points)?;
        check_mc(self.cycles, self.trials)?;
        if self.q0_max / self.q0_min < 100.0 {
            return Err(Error::invalid("q0 range must span at least two decades"));
        }
        let q0s = log_grid(self.q0_min, self.q0_max, self.points);
        let models = q0s
            .iter()
            .map(|&q0| ForcingModel::shifted_uniform(q0, self.af))
            .collect::<Result<Vec<_>>>()?;
        // Resonance check with the weakest forcing, which has the widest zone.
        asymptotics::gamma_large_q(&models[0], 1, self.seed)?;
        let base = MonteCarlo::new(self.cycles, self.trials, self.seed);
        let rows = models
            .par_iter()
            .enumerate()
            .map(|(k, model)| {
                let plan = base.with_key(k as u64);
                let mc = growth_trials(model, &plan, Norm::MaxAbs)?;
                let thm = window_means(model, &plan, log_two_h)?;
                let cor = window_means(model, &plan, log_infinite_q)?;
                let d21 = mc.minus(&thm);
                let dc = mc.minus(&cor);
                Ok([
                    mc.mean(),
                    mc.stderr(),
                    thm.mean(),
                    cor.mean(),
                    d21.mean(),
                    d21.stderr(),
                    dc.mean(),
                    dc.stderr(),
                ])
            })
            .collect::<Result<Vec<[f64; 8]>>>()?;
        let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        let mut t = base_table("fig1");
        model_meta(&mut t, &models[0]);
        t.push_meta("af", self.af);
        t.push_meta("af_note", "af is an assumption (0.5 by default); the slopes do not depend on it away from resonances");
        plan_meta(&mut t, &base, PRODUCT_ESTIMATOR);
        t.push_meta(
            "pairing",
            "gamma_thm21 and gamma_cor21 average over the same cycles as gamma_mc; differences are per trial",
        );
        t.add_float("q0", q0s.clone())?;
        t.add_float("gamma_mc", col(0))?;
        t.add_float("gamma_mc_stderr", col(1))?;
        t.add_float("gamma_thm21", col(2))?;
        t.add_float("gamma_cor21", col(3))?;
        t.add_float("diff21", col(4))?;
        t.add_float("diff21_stderr", col(5))?;
        t.add_float("diffcor", col(6))?;
        t.add_float("diffcor_stderr", col(7))?;
        let abs21: Vec<f64> = col(4).iter().map(|v| v.abs()).collect();
        let absc: Vec<f64> = col(6).iter().map(|v| v.abs()).collect();
        t.push_summary("slope_diff21", stats::log_log_slope(&q0s, &abs21));
        t.push_summary("slope_diffcor", stats::log_log_slope(&q0s, &absc));
        t.add_float("abs_diff21", abs21)?;
        t.add_float("abs_diffcor", absc)?;
        Ok(t)
    }
}

/// Small-q growth across `af` for `q0 = 10/2^ℓ`, symmetric forcing.
///
/// `gamma_mc` comes from [`lyapunov::growth_rate_cv`]: at small q the plain
/// product estimate has a relative error of order `1/(q0 √cycles)`, while
/// the control-variate estimate stays near `1/√cycles`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Config {
    pub af_min: f64,
    pub af_max: f64,
    pub points: usize,
    pub ells: Vec<u32>,
    pub cycles: u64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            af_min: 0.5,
            af_max: 10.0,
            points: 191,
            ells: vec![4, 5, 6, 7, 8],
            cycles: 1_000_000,
            trials: 16,
            seed: DEFAULT_SEED,
        }
    }
}

/// `q0 = 10 / 2^ℓ`.
pub fn fig2_q0(ell: u32) -> f64 {
    10.0 / 2f64.powi(ell as i32)
}

impl Fig2Config {
    pub fn run(&self) -> Result<SweepTable> {
        check_range("af", self.af_min, self.af_max, self.points)?;
        check_mc(self.cycles, self.trials)?;
        if self.ells.is_empty() || self.ells.iter().any(|&l| l > 20) {
            return Err(Error::invalid("ell list must be non-empty with entries at most 20"));
        }
        let afs = linear_grid(self.af_min, self.af_max, self.points);
        let base = MonteCarlo::new(self.cycles, self.trials, self.seed);
        let jobs: Vec<(u32, usize)> = self.ells.iter().flat_map(|&l| (0..afs.len()).map(move |k| (l, k))).collect();
        let results = jobs
            .par_iter()
            .map(|&(ell, k)| {
                let model = ForcingModel::symmetric_uniform(fig2_q0(ell), afs[k])?;
                let plan = base.with_key(10_000 * ell as u64 + k as u64);
                let g = lyapunov::growth_rate_cv(&model, &plan)?;
                Ok((g.gamma, g.stderr))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let mut t = base_table("fig2");
        t.push_meta("model", "dist=symmetric q0=10/2^ell, af on the grid");
        t.push_meta("ells", self.ells.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "));
        plan_meta(
            &mut t,
            &base,
            "energy-norm growth of one vector plus the zero-mean control variate (eps - <eps>) sin(2 theta)/2 at each kick, eps = q/sqrt(af), averaged after burn_in, mean over trials",
        );
        t.push_meta("gamma_thm31", "log(1 + <q^2>/(8 af)), <q^2> = q0^2/3, evaluated without the resonance guard");
        t.add_float("af", afs.clone())?;
        for (i, &ell) in self.ells.iter().enumerate() {
            let chunk = &results[i * afs.len()..(i + 1) * afs.len()];
            let q0 = fig2_q0(ell);
            let thm: Vec<f64> = afs.iter().map(|&af| small_q_rate(af, q0 * q0 / 3.0)).collect();
            let mc: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let se: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            let off: Vec<bool> = afs.iter().map(|&af| off_resonance(af, 4.0 * q0 / PI)).collect();
            let agree = (0..afs.len())
                .filter(|&k| off[k] && (mc[k] - thm[k]).abs() <= (3.0 * se[k]).max(0.15 * thm[k]))
                .count();
            t.push_summary(
                &format!("agree_l{ell}"),
                format!("{agree}/{}", off.iter().filter(|&&o| o).count()),
            );
            t.add_float(&format!("gamma_mc_l{ell}"), mc)?;
            t.add_float(&format!("stderr_l{ell}"), se)?;
            t.add_float(&format!("gamma_thm31_l{ell}"), thm)?;
        }
        Ok(t)
    }
}

/// True when `af` is farther than `dist` from each of 1, 4, 9, ...
pub fn off_resonance(af: f64, dist: f64) -> bool {
    asymptotics::nearest_resonance(af).1 > dist
}

/// Comparison of the product estimate, the small-q formula, `γ_∞` and
/// the classical rate at `q = q0/2`, symmetric forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Config {
    pub af_min: f64,
    pub af_max: f64,
    pub points: usize,
    pub q0: f64,
    pub cycles: u64,
    pub trials: u32,
    /// Samples per grid point for `γ_∞`.
    pub inf_samples: u64,
    pub seed: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Fig3Config {
            af_min: 0.5,
            af_max: 10.0,
            points: 191,
            q0: 2.5,
            cycles: 100_000,
            trials: 16,
            inf_samples: 200_000,
            seed: DEFAULT_SEED,
        }
    }
}

/// Per-point seed for single-stream estimators in a sweep.
fn point_seed(seed: u64, key: u64) -> u64 {
    // splitmix64 finalizer of the pair.
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Fig3Config {
    pub fn run(&self) -> Result<SweepTable> {
        check_range("af", self.af_min, self.af_max, self.points)?;
        check_mc(self.cycles, self.trials)?;
        if !(self.q0 > 0.0 && self.q0.is_finite()) {
            return Err(Error::invalid(format!("q0 must be positive, got {}", self.q0)));
        }
        let afs = linear_grid(self.af_min, self.af_max, self.points);
        let base = MonteCarlo::new(self.cycles, self.trials, self.seed);
        let rows = afs
            .par_iter()
            .enumerate()
            .map(|(k, &af)| {
                let model = ForcingModel::symmetric_uniform(self.q0, af)?;
                let g = lyapunov::growth_rate(&model, &base.with_key(k as u64), Norm::MaxAbs)?;
                let inf = lyapunov::asymptotic_growth_rate(&model, self.inf_samples, point_seed(self.seed, k as u64))?;
                let classical = classical_growth_rate(CycleParams::new(af, 0.5 * self.q0)?);
                Ok([g.gamma, g.stderr, inf.gamma, inf.stderr, classical])
            })
            .collect::<Result<Vec<[f64; 5]>>>()?;
        let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        let mut t = base_table("fig3");
        t.push_meta("model", format!("dist=symmetric q0={}, af on the grid", self.q0));
        plan_meta(&mut t, &base, PRODUCT_ESTIMATOR);
        t.push_meta("inf_samples", self.inf_samples);
        t.push_meta("gamma_inf", "mean over cycles of log spectral radius, 0 for elliptic cycles");
        t.push_meta("gamma_classical", format!("constant q = q0/2 = {}", 0.5 * self.q0));
        t.push_meta("gamma_thm31", "log(1 + <q^2>/(8 af)) without the resonance guard");
        let (mc, ginf, gcl) = (col(0), col(2), col(4));
        let pos: Vec<usize> = (0..afs.len()).filter(|&k| gcl[k] > 0.0).collect();
        let zero: Vec<usize> = (0..afs.len()).filter(|&k| gcl[k] == 0.0).collect();
        let frac = |idx: &[usize], f: &dyn Fn(usize) -> bool| idx.iter().filter(|&&k| f(k)).count() as f64 / idx.len().max(1) as f64;
        t.push_summary("frac_inf_ge_mc_where_classical_unstable", frac(&pos, &|k| ginf[k] >= mc[k]));
        t.push_summary("frac_inf_le_mc_where_classical_stable", frac(&zero, &|k| ginf[k] <= mc[k]));
        t.add_float("af", afs.clone())?;
        t.add_float("gamma_mc", mc)?;
        t.add_float("gamma_mc_stderr", col(1))?;
        let q2 = self.q0 * self.q0 / 3.0;
        t.add_float("gamma_thm31", afs.iter().map(|&af| small_q_rate(af, q2)).collect())?;
        t.add_float("gamma_inf", ginf)?;
        t.add_float("gamma_inf_stderr", col(3))?;
        t.add_float("gamma_classical", gcl)?;
        Ok(t)
    }
}

/// Analytic element moments against sampled ones on a fixed grid of
/// angles, angle ranges and q laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsConfig {
    pub phis: Vec<f64>,
    /// Angle ranges are `Γ = 2π m` for these `m`.
    pub periods: Vec<u32>,
    pub samples: u64,
    pub seed: u64,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig {
            phis: vec![0.5, 1.5, 2.0, PI / 2.0],
            periods: vec![1, 2],
            samples: 1_000_000,
            seed: DEFAULT_SEED,
        }
    }
}

/// The q laws of the moment grid: constant 1, uniform on [-1, 1], uniform on [0, 3].
pub fn moment_q_laws() -> [(&'static str, QLaw); 3] {
    [
        ("constant_1", QLaw::Constant(1.0)),
        ("uniform_-1_1", QLaw::Uniform { lo: -1.0, hi: 1.0 }),
        ("uniform_0_3", QLaw::Uniform { lo: 0.0, hi: 3.0 }),
    ]
}

impl MomentsConfig {
    pub fn run(&self) -> Result<SweepTable> {
        if self.samples < 10_000 {
            return Err(Error::invalid("need at least 10000 samples"));
        }
        struct Case {
            law: &'static str,
            param: f64,
            qname: &'static str,
            model: ForcingModel,
            analytic: (ElementMoments, ElementMoments),
        }
        let mut cases = Vec::new();
        for &phi in &self.phis {
            for (qname, ql) in moment_q_laws() {
                let model = ForcingModel::new(ql, AfLaw::Fixed((phi / PI) * (phi / PI)))?;
                let m = model.moments();
                let analytic = (
                    moments::h_moments_fixed_angle(phi, m.mean_q, m.mean_q_sq)?,
                    moments::g_moments_fixed_angle(phi, m.mean_q, m.mean_q_sq)?,
                );
                cases.push(Case { law: "fixed_angle", param: phi, qname, model, analytic });
            }
        }
        for &mp in &self.periods {
            let gamma = 2.0 * PI * mp as f64;
            for (qname, ql) in moment_q_laws() {
                let model = ForcingModel::new(ql, AfLaw::UniformAngle { gamma })?;
                let m = model.moments();
                let analytic = (
                    moments::h_moments_angle_avg(gamma, m.mean_q, m.mean_q_sq)?,
                    moments::g_moments_angle_avg(gamma, m.mean_q, m.mean_q_sq)?,
                );
                cases.push(Case { law: "angle_avg", param: gamma, qname, model, analytic });
            }
        }
        let sampled = cases
            .par_iter()
            .enumerate()
            .map(|(k, c)| moments::mc_element_moments(&c.model, self.samples, point_seed(self.seed, k as u64)))
            .collect::<Result<Vec<(SampledMoments, SampledMoments)>>>()?;
        let mut t = base_table("moments");
        t.push_meta("seed", self.seed);
        t.push_meta("samples", self.samples);
        t.push_meta("angle_law", "angle phi uniform on [0, Gamma], af = (phi/pi)^2");
        t.push_meta("z", "largest |analytic - sampled| / stderr over mean, mean_sq, variance");
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 11];
        let (mut law, mut qlaw, mut element) = (Vec::new(), Vec::new(), Vec::new());
        for (c, s) in cases.iter().zip(&sampled) {
            for (name, a, s) in [("h", &c.analytic.0, &s.0), ("g", &c.analytic.1, &s.1)] {
                law.push(c.law.to_string());
                qlaw.push(c.qname.to_string());
                element.push(name.to_string());
                let row = [
                    c.param,
                    a.mean,
                    s.moments.mean,
                    s.mean_stderr,
                    a.mean_sq,
                    s.moments.mean_sq,
                    s.mean_sq_stderr,
                    a.variance,
                    s.moments.variance,
                    s.variance_stderr,
                    s.z_score(a),
                ];
                for (col, v) in cols.iter_mut().zip(row) {
                    col.push(v);
                }
            }
        }
        let max_z = cols[10].iter().cloned().fold(0.0, f64::max);
        t.push_summary("max_z", max_z);
        t.add_text("law", law)?;
        t.add_text("q_law", qlaw)?;
        t.add_text("element", element)?;
        let names = [
            "param",
            "analytic_mean",
            "sampled_mean",
            "mean_stderr",
            "analytic_mean_sq",
            "sampled_mean_sq",
            "mean_sq_stderr",
            "analytic_var",
            "sampled_var",
            "var_stderr",
            "z",
        ];
        for (name, col) in names.iter().zip(cols) {
            t.add_float(name, col)?;
        }
        Ok(t)
    }
}

/// Ensemble `⟨y²⟩` growth against the diffusion prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FpCheckConfig {
    pub af: f64,
    pub q0: f64,
    pub trajectories: usize,
    pub cycles: usize,
    /// Cycles and trials for the product estimate reported alongside.
    pub mc_cycles: u64,
    pub mc_trials: u32,
    pub seed: u64,
}

impl Default for FpCheckConfig {
    fn default() -> Self {
        FpCheckConfig {
            af: 2.0,
            q0: 0.1,
            trajectories: 20_000,
            cycles: 2_000,
            mc_cycles: 1_000_000,
            mc_trials: 16,
            seed: DEFAULT_SEED,
        }
    }
}

impl FpCheckConfig {
    pub fn run(&self) -> Result<SweepTable> {
        let model = ForcingModel::symmetric_uniform(self.q0, self.af)?;
        let e = oscillator::ensemble_energy_growth(self.af, &model, self.trajectories, self.cycles, self.seed)?;
        let q2 = model.moments().mean_q_sq;
        let fp = asymptotics::gamma_fokker_planck(self.af, q2)?;
        let thm = small_q_rate(self.af, q2);
        let mc = lyapunov::growth_rate(
            &model,
            &MonteCarlo::new(self.mc_cycles, self.mc_trials, self.seed).with_key(1),
            Norm::MaxAbs,
        )?;
        let mut t = base_table("fp-check");
        model_meta(&mut t, &model);
        t.push_meta("seed", self.seed);
        t.push_meta("trajectories", self.trajectories);
        t.push_meta("cycles", self.cycles);
        t.push_meta("initial_state", "energy 1 (the reference energy), uniform random phase");
        t.push_meta("fit", format!("log <y^2> against t = pi k for k >= {}", e.fit_start));
        t.push_meta("mc_cycles", self.mc_cycles);
        t.push_meta("mc_trials", self.mc_trials);
        if !e.small_q {
            t.push_meta("warning", "<q^2>/af > 0.01: outside the small-kick regime");
        }
        t.push_summary("rate", e.rate);
        t.push_summary("rate_stderr", e.stderr);
        t.push_summary("predicted_rate", e.predicted);
        t.push_summary("rate_over_predicted", e.rate / e.predicted);
        t.push_summary("amplitude_rate_per_cycle", e.amplitude_rate * PI);
        t.push_summary("gamma_mc", mc.gamma);
        t.push_summary("gamma_mc_stderr", mc.stderr);
        t.push_summary("gamma_fp", fp.gamma);
        t.push_summary("gamma_thm31", thm);
        t.push_summary("fp_over_thm31", fp.gamma / thm);
        let n = e.mean_y_sq.len();
        t.add_float("cycle", (0..n).map(|k| k as f64).collect())?;
        t.add_float("t", (0..n).map(|k| PI * k as f64).collect())?;
        t.add_float("mean_y_sq", e.mean_y_sq)?;
        Ok(t)
    }
}

/// The iterative map over a log-spaced range of `q0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub q0_min: f64,
    pub q0_max: f64,
    pub points: usize,
    /// Model with `q0` replaced along the sweep; only the law's shape and
    /// `af` are used.
    pub model: ForcingModel,
    pub samples: u64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            q0_min: 0.01,
            q0_max: 0.1,
            points: 5,
            model: ForcingModel::symmetric_uniform(1.0, 2.0).expect("valid default model"),
            samples: 1 << 21,
            trials: 16,
            seed: DEFAULT_SEED,
        }
    }
}

/// Replace the scale of the q law by `q0`.
pub fn rescale_q(model: &ForcingModel, q0: f64) -> Result<ForcingModel> {
    let q_law = match model.q_law() {
        QLaw::Constant(_) => QLaw::Constant(q0),
        QLaw::ShiftedUniform { .. } => QLaw::ShiftedUniform { q0 },
        QLaw::SymmetricUniform { .. } => QLaw::SymmetricUniform { q0 },
        QLaw::Uniform { .. } => QLaw::Uniform { lo: -q0, hi: q0 },
    };
    ForcingModel::new(q_law, model.af_law())
}

impl MapConfig {
    pub fn run(&self) -> Result<SweepTable> {
        check_range("q0", self.q0_min, self.q0_max, self.points)?;
        if self.trials < 2 {
            return Err(Error::invalid("need at least 2 trials"));
        }
        let q0s = log_grid(self.q0_min, self.q0_max, self.points);
        let base = MonteCarlo::new(self.samples, self.trials, self.seed).with_burn_in(0);
        let rows = q0s
            .par_iter()
            .enumerate()
            .map(|(k, &q0)| {
                let model = rescale_q(&self.model, q0)?;
                let plan = base.with_key(k as u64);
                let u = oscillator::iterative_map_growth_with(&model, &plan, PhaseLaw::UniformRandom)?;
                let tr = oscillator::iterative_map_growth_with(&model, &plan.with_key(k as u64 + 1_000), PhaseLaw::Trajectory)?;
                Ok([u.gamma, u.stderr, tr.gamma, tr.stderr])
            })
            .collect::<Result<Vec<[f64; 4]>>>()?;
        let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        let mut t = base_table("map");
        model_meta(&mut t, &self.model);
        t.push_meta("q0_scaling", "q0 replaces the scale of the model's q law along the sweep");
        t.push_meta("seed", self.seed);
        t.push_meta("samples", self.samples);
        t.push_meta("trials", self.trials);
        t.push_meta(
            "uniform_phase",
            format!(
                "theta uniform on [0, pi): randomly shifted rank-1 Fibonacci lattice over (u_q, theta/pi), |tan theta| > {:e} dropped",
                oscillator::TAN_GUARD
            ),
        );
        t.push_meta("trajectory_phase", "y/V from one kicked trajectory per trial, cycles = samples");
        let (gu, gt) = (col(0), col(2));
        let lq: Vec<f64> = q0s.iter().map(|q| q.ln()).collect();
        t.push_summary("exponent_uniform", stats::log_log_slope(&q0s, &gu));
        t.push_summary("log_slope_uniform", stats::fit_line(&lq, &gu).slope);
        t.push_summary("exponent_trajectory", stats::log_log_slope(&q0s, &gt));
        t.push_summary("log_slope_trajectory", stats::fit_line(&lq, &gt).slope);
        t.add_float("q0", q0s)?;
        t.add_float("gamma_uniform", gu)?;
        t.add_float("gamma_uniform_stderr", col(1))?;
        t.add_float("gamma_trajectory", gt)?;
        t.add_float("gamma_trajectory_stderr", col(3))?;
        Ok(t)
    }
}

/// Stability-zone widths around `af = n²`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandsConfig {
    pub model: ForcingModel,
    pub regime: BandRegime,
    pub n_max: u32,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig {
            model: ForcingModel::symmetric_uniform(0.1, 1.0).expect("valid default model"),
            regime: BandRegime::SmallQ,
            n_max: 3,
        }
    }
}

impl BandsConfig {
    pub fn run(&self) -> Result<SweepTable> {
        if self.n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        let q_ref = self.model.moments().mean_abs_q;
        let ns: Vec<u32> = (1..=self.n_max).collect();
        let widths: Vec<f64> = ns.iter().map(|&n| band_width(n, q_ref, self.regime)).collect();
        let centers: Vec<f64> = ns.iter().map(|&n| (n * n) as f64).collect();
        let mut t = base_table("bands");
        model_meta(&mut t, &self.model);
        t.push_meta(
            "regime",
            match self.regime {
                BandRegime::SmallQ => "small_q: width 2 q_ref/pi",
                BandRegime::LargeQ => "large_q: width 8 n^2/(pi q_ref)",
            },
        );
        t.push_meta("q_ref", format!("{q_ref} (mean |q| of the model)"));
        t.add_float("n", ns.iter().map(|&n| n as f64).collect())?;
        t.add_float("center", centers.clone())?;
        t.add_float("width", widths.clone())?;
        t.add_float("lower", centers.iter().zip(&widths).map(|(c, w)| c - 0.5 * w).collect())?;
        t.add_float("upper", centers.iter().zip(&widths).map(|(c, w)| c + 0.5 * w).collect())?;
        Ok(t)
    }
}

/// `γ_∞` at one point, exposed for cross-checks: mean over a q grid of the
/// clipped single-cycle rate, by the midpoint rule.
pub fn cycle_average_quadrature(model: &ForcingModel, nodes: usize) -> Result<f64> {
    let af = model
        .fixed_af()
        .ok_or_else(|| Error::invalid("quadrature needs a fixed af"))?;
    let mut acc = 0.0;
    for i in 0..nodes {
        let q = model.q_from_uniform((i as f64 + 0.5) / nodes as f64);
        acc += cycle_rate(elements_unchecked(CycleParams { af, q }).0);
    }
    Ok(acc / nodes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_exact_values() {
        let q = log_grid(32.0, 4096.0, 8);
        assert_eq!(q, vec![32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0]);
        let a = linear_grid(0.5, 10.0, 191);
        assert_eq!(a[10], 1.0);
        assert_eq!(a[70], 4.0);
        assert_eq!(a[170], 9.0);
        assert_eq!(a[190], 10.0);
        let d = log_grid(100.0, 1e4, 5);
        assert_eq!((d[0], d[4]), (100.0, 1e4));
    }

    #[test]
    fn bands_small_q_are_n_independent() {
        let t = BandsConfig::default().run().unwrap();
        let w = t.floats("width").unwrap();
        assert_eq!(w.len(), 3);
        let q_ref = 0.05; // mean |q| of symmetric uniform q0 = 0.1
        for v in w {
            assert!((v - 2.0 * q_ref / PI).abs() < 1e-15);
        }
    }

    #[test]
    fn small_fig1_is_deterministic() {
        let cfg = Fig1Config {
            q0_min: 32.0,
            q0_max: 4096.0,
            points: 3,
            cycles: 2000,
            trials: 2,
            ..Fig1Config::default()
        };
        let a = cfg.run().unwrap().to_csv_string().unwrap();
        let b = cfg.run().unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fig1_rejects_resonant_af() {
        let cfg = Fig1Config {
            af: 1.0,
            ..Fig1Config::default()
        };
        assert!(matches!(cfg.run(), Err(Error::ResonantAf { .. })));
    }

    #[test]
    fn cycle_average_agrees_with_sampling() {
        let m = ForcingModel::symmetric_uniform(2.5, 1.7).unwrap();
        let quad = cycle_average_quadrature(&m, 200_000).unwrap();
        let mc = lyapunov::asymptotic_growth_rate(&m, 400_000, 4).unwrap();
        assert!((quad - mc.gamma).abs() < 4.0 * mc.stderr + 1e-9, "{quad} vs {mc:?}");
    }
}
