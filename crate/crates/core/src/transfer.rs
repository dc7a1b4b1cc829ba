//! Per-cycle transfer matrices and overflow-safe matrix products.
//!
//! One period maps the state `(y, dy/dt)` by
//! `M = F(π/2) · K(q) · F(π/2)`, where `F(t)` is the free harmonic
//! propagator at frequency `ω = √af` and `K(q) = [[1, 0], [-q, 1]]` is the
//! velocity kick of the delta barrier. The matrix is unimodular and has
//! equal diagonal entries `h`; `g` denotes the lower-left entry.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::error::{Error, Result};
use crate::model::CycleParams;

/// A 2×2 matrix acting on `(y, dy/dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl TransferMatrix {
    pub const IDENTITY: TransferMatrix = TransferMatrix {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        TransferMatrix { m11, m12, m21, m22 }
    }

    /// `self · rhs`.
    #[inline]
    pub fn mul(&self, rhs: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * s,
            m12: self.m12 * s,
            m21: self.m21 * s,
            m22: self.m22 * s,
        }
    }

    /// Apply to a column vector `(y, v)`.
    #[inline]
    pub fn apply(&self, y: f64, v: f64) -> (f64, f64) {
        (self.m11 * y + self.m12 * v, self.m21 * y + self.m22 * v)
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m21.abs().max(self.m22.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        (self.m11 * self.m11 + self.m12 * self.m12 + self.m21 * self.m21 + self.m22 * self.m22).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        let half_tr = 0.5 * self.trace();
        let disc = half_tr * half_tr - self.det();
        if disc >= 0.0 {
            half_tr.abs() + disc.sqrt()
        } else {
            // Complex pair: |λ|² = det.
            self.det().abs().sqrt()
        }
    }
}

/// Free harmonic propagator over time `t` at frequency `omega`.
fn free_propagator(omega: f64, t: f64) -> TransferMatrix {
    let (s, c) = (omega * t).sin_cos();
    TransferMatrix::new(c, s / omega, -omega * s, c)
}

fn check_af(af: f64) -> Result<()> {
    if af > 0.0 && af.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("af must be positive and finite, got {af}")))
    }
}

/// The one-period transfer matrix, built as `F(π/2) · K(q) · F(π/2)`.
pub fn cycle_matrix(p: CycleParams) -> Result<TransferMatrix> {
    check_af(p.af)?;
    let f = free_propagator(p.af.sqrt(), FRAC_PI_2);
    let kick = TransferMatrix::new(1.0, 0.0, -p.q, 1.0);
    Ok(f.mul(&kick).mul(&f))
}

/// `(h, g)` from their closed forms
/// `h = cos φ - q sin φ / (2√af)` and `g = -√af sin φ - q cos²(φ/2)`.
pub fn closed_form_elements(p: CycleParams) -> Result<(f64, f64)> {
    check_af(p.af)?;
    Ok(elements_unchecked(p))
}

#[inline]
pub(crate) fn elements_unchecked(p: CycleParams) -> (f64, f64) {
    let w = p.af.sqrt();
    let (s, c) = (w * PI).sin_cos();
    let half = (0.5 * w * PI).cos();
    (c - p.q / (2.0 * w) * s, -w * s - p.q * half * half)
}

/// `M(q) = A + q B` at a fixed `af`; the hot loop of the product estimators
/// only pays for the trigonometry once.
#[derive(Debug, Clone, Copy)]
pub struct CycleKernel {
    pub a: TransferMatrix,
    pub b: TransferMatrix,
}

impl CycleKernel {
    pub fn new(af: f64) -> Result<Self> {
        check_af(af)?;
        let f = free_propagator(af.sqrt(), FRAC_PI_2);
        let e = TransferMatrix::new(0.0, 0.0, -1.0, 0.0);
        Ok(CycleKernel {
            a: f.mul(&f),
            b: f.mul(&e).mul(&f),
        })
    }

    #[inline]
    pub fn at(&self, q: f64) -> TransferMatrix {
        TransferMatrix {
            m11: self.a.m11 + q * self.b.m11,
            m12: self.a.m12 + q * self.b.m12,
            m21: self.a.m21 + q * self.b.m21,
            m22: self.a.m22 + q * self.b.m22,
        }
    }
}

const SINGULAR: f64 = 1e-12;

/// The large-q ratio `x = h/g`, written as
/// `[q(π/φ) sin φ - 2 cos φ] / [q(1 + cos φ) + 2(φ/π) sin φ]`.
pub fn ratio_x(p: CycleParams) -> Result<f64> {
    check_af(p.af)?;
    let phi = p.phi();
    let (s, c) = phi.sin_cos();
    let den = p.q * (1.0 + c) + 2.0 * (phi / PI) * s;
    if den.abs() < SINGULAR {
        return Err(Error::SingularAngle {
            what: "ratio x",
            af: p.af,
            q: p.q,
            denominator: den,
        });
    }
    Ok((p.q * (PI / phi) * s - 2.0 * c) / den)
}

/// The correction factor `1 - 1/h²`, written as
/// `1 - (2φ / (π q sin φ - 2φ cos φ))²`.
pub fn correction_phi(p: CycleParams) -> Result<f64> {
    check_af(p.af)?;
    let phi = p.phi();
    let (s, c) = phi.sin_cos();
    let den = PI * p.q * s - 2.0 * phi * c;
    if den.abs() < SINGULAR {
        return Err(Error::SingularAngle {
            what: "correction phi",
            af: p.af,
            q: p.q,
            denominator: den,
        });
    }
    let r = 2.0 * phi / den;
    Ok(1.0 - r * r)
}

/// Norm used to read off the size of a matrix product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    MaxAbs,
    Frobenius,
}

impl Norm {
    pub fn of(&self, m: &TransferMatrix) -> f64 {
        match self {
            Norm::MaxAbs => m.max_abs(),
            Norm::Frobenius => m.frobenius(),
        }
    }
}

/// A running matrix product `normalized · 2^exponent`.
///
/// After every absorption the normalized factor is rescaled by the power
/// of two that brings its max-abs entry into `[1, 2)`. The rescaling is
/// exact, so the only rounding is in the matrix multiplication itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductState {
    normalized: TransferMatrix,
    exponent: i64,
    count: u64,
}

impl Default for ProductState {
    fn default() -> Self {
        Self::new()
    }
}

/// Binary exponent of a positive normal `x`, `floor(log2 x)`.
#[inline]
fn binary_exponent(x: f64) -> i64 {
    ((x.to_bits() >> 52) & 0x7ff) as i64 - 1023
}

/// `2^e` for `-1022 <= e <= 1023`.
#[inline]
fn pow2(e: i64) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

impl ProductState {
    pub fn new() -> Self {
        ProductState {
            normalized: TransferMatrix::IDENTITY,
            exponent: 0,
            count: 0,
        }
    }

    pub fn normalized(&self) -> TransferMatrix {
        self.normalized
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Power of two factored out of the product.
    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// `ln` of the max-abs entry of the product.
    pub fn log_norm(&self) -> f64 {
        self.exponent as f64 * LN_2 + self.normalized.max_abs().ln()
    }

    /// `log ||product||` in the given norm.
    pub fn log_size(&self, norm: Norm) -> f64 {
        self.exponent as f64 * LN_2 + norm.of(&self.normalized).ln()
    }

    /// Left-multiply by `m`, rejecting non-finite input.
    pub fn absorb(&mut self, m: &TransferMatrix) -> Result<()> {
        if !m.is_finite() {
            return Err(Error::non_finite("transfer matrix"));
        }
        self.absorb_unchecked(m);
        if !self.normalized.is_finite() || self.normalized.max_abs() == 0.0 {
            return Err(Error::non_finite("matrix product"));
        }
        Ok(())
    }

    /// Left-multiply by `m` without validation.
    #[inline]
    pub fn absorb_unchecked(&mut self, m: &TransferMatrix) {
        let p = m.mul(&self.normalized);
        let mx = p.max_abs();
        if mx.is_normal() {
            let e = binary_exponent(mx);
            self.normalized = p.scale(pow2(-e));
            self.exponent += e;
        } else {
            self.normalized = p;
        }
        self.count += 1;
    }

    /// The full product. Overflows for long products; meant for checks.
    pub fn reconstruct(&self) -> TransferMatrix {
        self.normalized.scale((self.exponent as f64 * LN_2).exp())
    }
}

/// Value form of [`ProductState::absorb`].
pub fn absorb(mut state: ProductState, m: &TransferMatrix) -> Result<ProductState> {
    state.absorb(m)?;
    Ok(state)
}
