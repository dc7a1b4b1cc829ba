//! The sine integral `Si(x) = ∫₀ˣ sin t / t dt`.
//!
//! Below `x = 30` the integral is evaluated by adaptive Gauss–Kronrod
//! (7/15-point) quadrature; above, by the asymptotic expansion
//! `Si(x) = π/2 - f(x) cos x - g(x) sin x` with
//! `f ~ (1/x) Σ (-1)^k (2k)! / x^{2k}` and `g ~ (1/x²) Σ (-1)^k (2k+1)! / x^{2k}`,
//! truncated at the smallest term (below 1e-12 at `x = 30`).

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Largest argument accepted by [`sine_integral`].
pub const SI_MAX: f64 = 1e7;
const SWITCH: f64 = 30.0;

pub fn sine_integral(x: f64) -> Result<f64> {
    if !(0.0..=SI_MAX).contains(&x) {
        return Err(Error::SineIntegralDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(if x < SWITCH { si_quadrature(x) } else { si_asymptotic(x) })
}

#[inline]
fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        t.sin() / t
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod estimate and |Kronrod - Gauss| on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

fn si_quadrature(x: f64) -> f64 {
    adaptive(&sinc, 0.0, x, 1e-14, 30)
}

fn si_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let (mut f, mut g) = (0.0, 0.0);
    let mut tf = 1.0; // (2k)!/x^{2k}, signed
    let mut tg = 1.0; // (2k+1)!/x^{2k}, signed
    let mut k = 0u32;
    loop {
        f += tf;
        g += tg;
        let a = (2 * k + 1) as f64;
        let b = (2 * k + 2) as f64;
        let next_f = -tf * a * b * inv2;
        let next_g = -tg * b * (b + 1.0) * inv2;
        if next_f.abs() >= tf.abs() || next_f.abs() < 1e-17 {
            break;
        }
        tf = next_f;
        tg = next_g;
        k += 1;
    }
    let f = f / x;
    let g = g * inv2;
    FRAC_PI_2 - f * x.cos() - g * x.sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Power series Si(x) = Σ (-1)^k x^{2k+1} / ((2k+1)(2k+1)!), fine for small x.
    fn si_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = 0.0;
        for k in 0..60 {
            let n = (2 * k + 1) as f64;
            sum += term / n;
            term *= -x * x / ((n + 1.0) * (n + 2.0));
        }
        sum
    }

    // Composite Simpson on [0, x] with many panels.
    fn si_simpson(x: f64, panels: usize) -> f64 {
        let h = x / panels as f64;
        let mut s = sinc(0.0) + sinc(x);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * sinc(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn known_values() {
        assert_eq!(sine_integral(0.0).unwrap(), 0.0);
        assert!((sine_integral(std::f64::consts::PI).unwrap() - 1.851_937_051_982_466).abs() < 1e-12);
        let big = sine_integral(1e4).unwrap();
        assert!((big - FRAC_PI_2).abs() <= 2e-4);
        assert!((big - FRAC_PI_2).abs() <= 2.0 / 1e4);
    }

    #[test]
    fn quadrature_matches_series() {
        for &x in &[0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0] {
            let d = (sine_integral(x).unwrap() - si_series(x)).abs();
            assert!(d < 1e-12, "x = {x}: {d}");
        }
    }

    #[test]
    fn switchover_is_continuous() {
        let below = si_quadrature(SWITCH);
        let above = si_asymptotic(SWITCH);
        assert!((below - above).abs() < 1e-11, "{below} vs {above}");
        for &x in &[31.0, 45.0, 100.0] {
            assert!((si_quadrature(x) - si_asymptotic(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn simpson_at_100() {
        let s = si_simpson(100.0, 200_000);
        assert!((sine_integral(100.0).unwrap() - s).abs() < 1e-10);
    }

    #[test]
    fn domain() {
        assert!(matches!(sine_integral(-1.0), Err(Error::SineIntegralDomain(_))));
        assert!(sine_integral(2e7).is_err());
        assert!(sine_integral(f64::NAN).is_err());
        assert!((sine_integral(SI_MAX).unwrap() - FRAC_PI_2).abs() < 2.0 / SI_MAX);
    }
}
