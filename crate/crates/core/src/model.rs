//! Cycle parameters and the random forcing laws they are drawn from.
//!
//! Every cycle of the equation `y'' + [af + q δ([t] - π/2)] y = 0` has its
//! own pair `(af, q)`. A [`ForcingModel`] describes how those pairs are
//! drawn, and [`RandomStream`] is the seeded generator that draws them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One cycle's parameters. The period is fixed at `π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleParams {
    pub af: f64,
    pub q: f64,
}

impl CycleParams {
    pub fn new(af: f64, q: f64) -> Result<Self> {
        if !(af > 0.0 && af.is_finite()) {
            return Err(Error::invalid(format!("af must be positive and finite, got {af}")));
        }
        if !q.is_finite() {
            return Err(Error::invalid(format!("q must be finite, got {q}")));
        }
        Ok(CycleParams { af, q })
    }

    /// The free rotation angle over one period, `√af·π`.
    #[inline]
    pub fn phi(&self) -> f64 {
        self.af.sqrt() * PI
    }
}

/// Law of the forcing strength `q_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QLaw {
    Constant(f64),
    /// `q = (1 + ξ) q0` with `ξ` uniform on `[0, 1]`.
    ShiftedUniform { q0: f64 },
    /// `q = q0 ξ` with `ξ` uniform on `[-1, 1]`.
    SymmetricUniform { q0: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Law of the frequency parameter `af_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AfLaw {
    Fixed(f64),
    /// The angle `φ = √af·π` is uniform on `(0, Γ]`, so `af = (φ/π)²`.
    /// This is not uniform in `af`.
    UniformAngle { gamma: f64 },
}

/// How `(af_k, q_k)` are drawn each cycle. The two laws are independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingModel {
    q_law: QLaw,
    af_law: AfLaw,
}

/// Exact moments of a [`ForcingModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMoments {
    pub mean_q: f64,
    pub mean_q_sq: f64,
    pub var_q: f64,
    pub mean_abs_q: f64,
    pub mean_af: f64,
}

impl ForcingModel {
    pub fn new(q_law: QLaw, af_law: AfLaw) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match q_law {
            QLaw::Constant(q) if !q.is_finite() => {
                return Err(Error::invalid(format!("q must be finite, got {q}")))
            }
            QLaw::Constant(_) => {}
            QLaw::ShiftedUniform { q0 } | QLaw::SymmetricUniform { q0 } => positive("q0", q0)?,
            QLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid(format!("need finite lo < hi, got [{lo}, {hi}]")));
                }
            }
        }
        match af_law {
            AfLaw::Fixed(af) => positive("af", af)?,
            AfLaw::UniformAngle { gamma } => positive("gamma", gamma)?,
        }
        Ok(ForcingModel { q_law, af_law })
    }

    pub fn constant(q: f64, af: f64) -> Result<Self> {
        Self::new(QLaw::Constant(q), AfLaw::Fixed(af))
    }

    pub fn shifted_uniform(q0: f64, af: f64) -> Result<Self> {
        Self::new(QLaw::ShiftedUniform { q0 }, AfLaw::Fixed(af))
    }

    pub fn symmetric_uniform(q0: f64, af: f64) -> Result<Self> {
        Self::new(QLaw::SymmetricUniform { q0 }, AfLaw::Fixed(af))
    }

    pub fn q_law(&self) -> QLaw {
        self.q_law
    }

    pub fn af_law(&self) -> AfLaw {
        self.af_law
    }

    /// The fixed `af`, if the model has one.
    pub fn fixed_af(&self) -> Option<f64> {
        match self.af_law {
            AfLaw::Fixed(af) => Some(af),
            AfLaw::UniformAngle { .. } => None,
        }
    }

    /// Same q law with a different fixed `af`.
    pub fn with_af(&self, af: f64) -> Result<Self> {
        Self::new(self.q_law, AfLaw::Fixed(af))
    }

    /// True when every draw returns the same `(af, q)`.
    pub fn is_deterministic(&self) -> bool {
        matches!((self.q_law, self.af_law), (QLaw::Constant(_), AfLaw::Fixed(_)))
    }

    /// Closed interval containing every possible `q`.
    pub fn q_support(&self) -> (f64, f64) {
        match self.q_law {
            QLaw::Constant(q) => (q, q),
            QLaw::ShiftedUniform { q0 } => (q0, 2.0 * q0),
            QLaw::SymmetricUniform { q0 } => (-q0, q0),
            QLaw::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Smallest `|q|` the model can produce.
    pub fn min_abs_q(&self) -> f64 {
        let (lo, hi) = self.q_support();
        if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        }
    }

    pub fn moments(&self) -> ModelMoments {
        moments_of(self)
    }

    /// Draw one cycle. `q` is drawn before `af`; constant laws draw nothing.
    #[inline]
    pub fn sample(&self, stream: &mut RandomStream) -> CycleParams {
        let q = match self.q_law {
            QLaw::Constant(q) => q,
            QLaw::ShiftedUniform { q0 } => q0 * (1.0 + stream.uniform()),
            QLaw::SymmetricUniform { q0 } => q0 * (2.0 * stream.uniform() - 1.0),
            QLaw::Uniform { lo, hi } => lo + (hi - lo) * stream.uniform(),
        };
        let af = match self.af_law {
            AfLaw::Fixed(af) => af,
            AfLaw::UniformAngle { gamma } => {
                let phi = gamma * (1.0 - stream.uniform());
                (phi / PI) * (phi / PI)
            }
        };
        CycleParams { af, q }
    }

    /// Map a uniform variate in `[0, 1)` to `q` by the inverse CDF.
    #[inline]
    pub fn q_from_uniform(&self, u: f64) -> f64 {
        match self.q_law {
            QLaw::Constant(q) => q,
            QLaw::ShiftedUniform { q0 } => q0 * (1.0 + u),
            QLaw::SymmetricUniform { q0 } => q0 * (2.0 * u - 1.0),
            QLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }
}

/// Draw one iid cycle from `model`.
#[inline]
pub fn sample_cycle(model: &ForcingModel, stream: &mut RandomStream) -> CycleParams {
    model.sample(stream)
}

/// Exact analytic moments of the model.
pub fn moments_of(model: &ForcingModel) -> ModelMoments {
    let (mean_q, mean_q_sq, mean_abs_q) = match model.q_law {
        QLaw::Constant(q) => (q, q * q, q.abs()),
        QLaw::ShiftedUniform { q0 } => (1.5 * q0, 7.0 * q0 * q0 / 3.0, 1.5 * q0),
        QLaw::SymmetricUniform { q0 } => (0.0, q0 * q0 / 3.0, 0.5 * q0),
        QLaw::Uniform { lo, hi } => {
            let mean = 0.5 * (lo + hi);
            let sq = (lo * lo + lo * hi + hi * hi) / 3.0;
            let abs = if lo < 0.0 && hi > 0.0 {
                (lo * lo + hi * hi) / (2.0 * (hi - lo))
            } else {
                mean.abs()
            };
            (mean, sq, abs)
        }
    };
    let var_q = match model.q_law {
        QLaw::Constant(_) => 0.0,
        QLaw::ShiftedUniform { q0 } => q0 * q0 / 12.0,
        QLaw::SymmetricUniform { q0 } => q0 * q0 / 3.0,
        QLaw::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
    };
    let mean_af = match model.af_law {
        AfLaw::Fixed(af) => af,
        AfLaw::UniformAngle { gamma } => gamma * gamma / (3.0 * PI * PI),
    };
    ModelMoments {
        mean_q,
        mean_q_sq,
        var_q,
        mean_abs_q,
        mean_af,
    }
}

/// Seeded ChaCha8 generator.
///
/// A stream is addressed by `(seed, key, index)`: `seed` and `key` fill the
/// 256-bit ChaCha key, `index` selects the ChaCha stream. Monte Carlo code
/// uses `key` for the sweep point and `index` for the trial, so every
/// trial owns an independent substream and results do not depend on which
/// thread ran it.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, 0, 0)
    }

    pub fn keyed(seed: u64, key: u64, index: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&key.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(index);
        RandomStream { rng }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl fmt::Display for ForcingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q_law {
            QLaw::Constant(q) => write!(f, "dist=constant q={q}")?,
            QLaw::ShiftedUniform { q0 } => write!(f, "dist=shifted q0={q0}")?,
            QLaw::SymmetricUniform { q0 } => write!(f, "dist=symmetric q0={q0}")?,
            QLaw::Uniform { lo, hi } => write!(f, "dist=uniform lo={lo} hi={hi}")?,
        }
        match self.af_law {
            AfLaw::Fixed(af) => write!(f, " af={af}"),
            AfLaw::UniformAngle { gamma } => write!(f, " gamma={gamma}"),
        }
    }
}

impl FromStr for ForcingModel {
    type Err = Error;

    /// Parses the flat `key=value` form written by `Display`, for example
    /// `dist=symmetric q0=0.625 af=2.0`. Pairs may be separated by spaces
    /// or commas.
    fn from_str(s: &str) -> Result<Self> {
        let mut dist = None;
        let mut nums: Vec<(&str, f64)> = Vec::new();
        for pair in s.split(|c: char| c.is_whitespace() || c == ',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))?;
            if k == "dist" {
                dist = Some(v);
                continue;
            }
            if !matches!(k, "q" | "q0" | "lo" | "hi" | "af" | "gamma") {
                return Err(Error::Parse(format!("unknown key {k:?}")));
            }
            if nums.iter().any(|(name, _)| *name == k) {
                return Err(Error::Parse(format!("duplicate key {k:?}")));
            }
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("{k}: not a number: {v:?}")))?;
            nums.push((k, x));
        }
        let get = |k: &str| nums.iter().find(|(name, _)| *name == k).map(|(_, v)| *v);
        let need = |k: &str| get(k).ok_or_else(|| Error::Parse(format!("missing key {k:?}")));

        let q_law = match dist.ok_or_else(|| Error::Parse("missing key \"dist\"".into()))? {
            "constant" => QLaw::Constant(need("q")?),
            "shifted" => QLaw::ShiftedUniform { q0: need("q0")? },
            "symmetric" => QLaw::SymmetricUniform { q0: need("q0")? },
            "uniform" => QLaw::Uniform {
                lo: need("lo")?,
                hi: need("hi")?,
            },
            other => return Err(Error::Parse(format!("unknown dist {other:?}"))),
        };
        let af_law = match (get("af"), get("gamma")) {
            (Some(af), None) => AfLaw::Fixed(af),
            (None, Some(gamma)) => AfLaw::UniformAngle { gamma },
            (Some(_), Some(_)) => return Err(Error::Parse("give af or gamma, not both".into())),
            (None, None) => return Err(Error::Parse("missing key \"af\" or \"gamma\"".into())),
        };
        let used = 1 + match q_law {
            QLaw::Uniform { .. } => 2,
            _ => 1,
        };
        if nums.len() != used {
            return Err(Error::Parse(format!("unexpected keys for this dist in {s:?}")));
        }
        ForcingModel::new(q_law, af_law)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_stats(model: &ForcingModel, n: usize, seed: u64) -> (f64, f64, f64, f64) {
        let mut s = RandomStream::new(seed);
        let (mut m1, mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let q = model.sample(&mut s).q;
            m1 += q;
            m2 += q * q;
            m3 += q * q * q;
            m4 += q * q * q * q;
        }
        let n = n as f64;
        (m1 / n, m2 / n, m3 / n, m4 / n)
    }

    #[test]
    fn constant_draw_is_degenerate() {
        let m = ForcingModel::constant(2.0, 3.0).unwrap();
        let mut s = RandomStream::new(99);
        for _ in 0..10 {
            assert_eq!(sample_cycle(&m, &mut s), CycleParams { af: 3.0, q: 2.0 });
        }
    }

    #[test]
    fn supports() {
        let sym = ForcingModel::symmetric_uniform(1.0, 2.0).unwrap();
        let shifted = ForcingModel::shifted_uniform(100.0, 2.0).unwrap();
        let mut s = RandomStream::new(1);
        for _ in 0..100_000 {
            assert!(sym.sample(&mut s).q.abs() <= 1.0);
            let q = shifted.sample(&mut s).q;
            assert!((100.0..=200.0).contains(&q));
        }
    }

    #[test]
    fn shifted_sample_mean() {
        let m = ForcingModel::shifted_uniform(100.0, 0.5).unwrap();
        let (mean, ..) = sample_stats(&m, 1_000_000, 7);
        let tol = 3.0 * (100.0 / 12f64.sqrt()) / 1e3;
        assert!((mean - 150.0).abs() < tol, "{mean}");
    }

    #[test]
    fn analytic_moments() {
        let m = moments_of(&ForcingModel::symmetric_uniform(3.0, 2.0).unwrap());
        assert!((m.mean_q_sq - 3.0).abs() < 1e-15);
        let m = moments_of(&ForcingModel::constant(5.0, 2.0).unwrap());
        assert_eq!((m.mean_q, m.mean_q_sq, m.var_q), (5.0, 25.0, 0.0));
        let m = moments_of(&ForcingModel::shifted_uniform(2.0, 2.0).unwrap());
        assert_eq!(m.mean_q, 3.0);
    }

    // Sample moments within 5 standard errors of the analytic ones, the
    // standard error of the mean of q^2 coming from the sample fourth moment.
    #[test]
    fn sample_moments_match_every_variant() {
        let models = [
            ForcingModel::constant(1.5, 1.0).unwrap(),
            ForcingModel::shifted_uniform(2.0, 1.0).unwrap(),
            ForcingModel::symmetric_uniform(3.0, 1.0).unwrap(),
            ForcingModel::new(QLaw::Uniform { lo: 0.0, hi: 3.0 }, AfLaw::Fixed(1.0)).unwrap(),
        ];
        let n = 1_000_000;
        for (i, m) in models.iter().enumerate() {
            let exact = moments_of(m);
            let (m1, m2, _, m4) = sample_stats(m, n, 40 + i as u64);
            let se1 = ((m2 - m1 * m1).max(0.0) / n as f64).sqrt();
            let se2 = ((m4 - m2 * m2).max(0.0) / n as f64).sqrt();
            assert!((m1 - exact.mean_q).abs() <= 5.0 * se1 + 1e-12, "{m}: mean {m1}");
            assert!((m2 - exact.mean_q_sq).abs() <= 5.0 * se2 + 1e-12, "{m}: mean sq {m2}");
            let var = m2 - m1 * m1;
            assert!((var - exact.var_q).abs() <= 5.0 * se2 + 1e-9, "{m}: var {var}");
        }
    }

    #[test]
    fn mean_abs_q_matches_sampling() {
        let m = ForcingModel::new(QLaw::Uniform { lo: -1.0, hi: 3.0 }, AfLaw::Fixed(1.0)).unwrap();
        let mut s = RandomStream::new(5);
        let n = 400_000;
        let mean: f64 = (0..n).map(|_| m.sample(&mut s).q.abs()).sum::<f64>() / n as f64;
        assert!((mean - moments_of(&m).mean_abs_q).abs() < 0.01);
    }

    #[test]
    fn uniform_angle_mean_af() {
        let m = ForcingModel::new(QLaw::Constant(0.0), AfLaw::UniformAngle { gamma: 4.0 * PI }).unwrap();
        let mut s = RandomStream::new(3);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let p = m.sample(&mut s);
            assert!(p.af > 0.0 && p.phi() <= 4.0 * PI + 1e-12);
            acc += p.af;
        }
        let exact = moments_of(&m).mean_af;
        assert!((acc / n as f64 - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn same_seed_same_sequence_different_seed_uncorrelated() {
        let mut a = RandomStream::new(11);
        let mut b = RandomStream::new(11);
        let mut c = RandomStream::new(12);
        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.uniform();
            assert_eq!(x.to_bits(), b.uniform().to_bits());
            let y = c.uniform();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let n = n as f64;
        let cov = sxy / n - sx * sy / (n * n);
        let r = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(r.abs() < 0.01, "r = {r}");
    }

    #[test]
    fn substreams_differ() {
        let x = RandomStream::keyed(1, 0, 0).uniform();
        assert_ne!(x, RandomStream::keyed(1, 0, 1).uniform());
        assert_ne!(x, RandomStream::keyed(1, 1, 0).uniform());
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ForcingModel::symmetric_uniform(0.0, 1.0).is_err());
        assert!(ForcingModel::shifted_uniform(-1.0, 1.0).is_err());
        assert!(ForcingModel::constant(1.0, 0.0).is_err());
        assert!(ForcingModel::new(QLaw::Constant(1.0), AfLaw::UniformAngle { gamma: 0.0 }).is_err());
        assert!(CycleParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn parse_examples() {
        let m: ForcingModel = "dist=symmetric q0=0.625 af=2.0".parse().unwrap();
        assert_eq!(m, ForcingModel::symmetric_uniform(0.625, 2.0).unwrap());
        let m: ForcingModel = "dist=uniform,lo=0,hi=3,gamma=6.5".parse().unwrap();
        assert_eq!(m.q_support(), (0.0, 3.0));
        assert!("dist=shifted q0=1".parse::<ForcingModel>().is_err());
        assert!("dist=shifted q0=1 af=1 q=2".parse::<ForcingModel>().is_err());
        assert!("dist=wobbly q0=1 af=1".parse::<ForcingModel>().is_err());
    }

    proptest! {
        #[test]
        fn display_round_trips(q in -1e3f64..1e3, q0 in 1e-3f64..1e3, af in 1e-3f64..1e2, pick in 0u8..5) {
            let m = match pick {
                0 => ForcingModel::constant(q, af),
                1 => ForcingModel::shifted_uniform(q0, af),
                2 => ForcingModel::symmetric_uniform(q0, af),
                3 => ForcingModel::new(QLaw::Uniform { lo: q - q0, hi: q + q0 }, AfLaw::Fixed(af)),
                _ => ForcingModel::new(QLaw::SymmetricUniform { q0 }, AfLaw::UniformAngle { gamma: af }),
            }.unwrap();
            let back: ForcingModel = m.to_string().parse().unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn draws_stay_in_support(seed in any::<u64>(), q0 in 1e-3f64..1e3) {
            let m = ForcingModel::symmetric_uniform(q0, 1.0).unwrap();
            let mut s = RandomStream::new(seed);
            for _ in 0..100 {
                prop_assert!(m.sample(&mut s).q.abs() <= q0);
            }
        }
    }
}
