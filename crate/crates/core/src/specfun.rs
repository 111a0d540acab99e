//! Scalar special functions.
//!
//! The central object is the thermal entropy function
//!
//! ```text
//! g(E) = (E+1) ln(E+1) - E ln E
//! ```
//!
//! which gives the entropy (in nats) of a geometric distribution with mean
//! `E`, equivalently of a single-mode thermal state with mean photon number
//! `E`. Everything else in this module is built from `g` and its inverse:
//! the composition `bound_f(a, b, s) = g(a g⁻¹(s) + b)` that appears in all
//! channel output-entropy bounds, the heterodyne bound
//! `wehrl_bound_f(s) = ln(g⁻¹(s)+1) + 1`, and the auxiliary ratio
//! `h(t) = g'(t)/g''(t)` used to check convexity of the compositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute residual |g(E) - s| at which the inversion stops.
pub const G_INV_TOL: f64 = 1e-12;

const G_INV_MAX_ITERS: usize = 200;

/// Below this energy, `g` switches to its small-argument series.
const G_SERIES_CUTOVER: f64 = 1e-8;

/// An entropy in natural-log units (nats). Nonnegative and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EntropyNats(pub f64);

impl EntropyNats {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Domain(format!(
                "entropy must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A mean photon number (dimensionless energy). Nonnegative and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MeanPhotonNumber(pub f64);

impl MeanPhotonNumber {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Domain(format!(
                "mean photon number must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Parameters `(a, b)` of the composition `s ↦ g(a g⁻¹(s) + b)`.
///
/// The composition is increasing for any `a, b ≥ 0`; convexity is only
/// guaranteed on the regime `a ≤ b + 1`, which [`LemmaParams::satisfies_hypothesis`]
/// records at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub a: f64,
    pub b: f64,
    hypothesis: bool,
}

impl LemmaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
            return Err(Error::Domain(format!(
                "lemma parameters must be finite and nonnegative, got a={a}, b={b}"
            )));
        }
        Ok(Self {
            a,
            b,
            hypothesis: a <= b + 1.0,
        })
    }

    /// Whether `a ≤ b + 1`, the regime in which the composition is convex.
    pub fn satisfies_hypothesis(&self) -> bool {
        self.hypothesis
    }
}

/// `g(E) = (E+1) ln(E+1) - E ln E`, continuous at `E = 0` with `g(0) = 0`.
pub fn g(energy: MeanPhotonNumber) -> Result<EntropyNats> {
    let e = energy.0;
    if !e.is_finite() || e < 0.0 {
        return Err(Error::Domain(format!("g: energy must be >= 0, got {e}")));
    }
    Ok(EntropyNats(g_raw(e)))
}

/// Unchecked scalar `g`; the caller guarantees `e >= 0`.
///
/// Evaluated as `ln(E+1) + E ln(1 + 1/E)`, which is algebraically equal to
/// `(E+1)ln(E+1) - E ln E` but avoids cancellation at large `E`. For
/// `E < 1e-8` the series `E(1 - ln E)` is used so that `E = 0` is exact.
pub(crate) fn g_raw(e: f64) -> f64 {
    debug_assert!(e >= 0.0);
    if e == 0.0 {
        0.0
    } else if e < G_SERIES_CUTOVER {
        e * (1.0 - e.ln())
    } else {
        e.ln_1p() + e * (1.0 / e).ln_1p()
    }
}

/// `g'(E) = ln(1 + 1/E)`, valid for `E > 0`.
fn g_prime(e: f64) -> f64 {
    (1.0 / e).ln_1p()
}

/// Inverse of `g`: returns `E` with `|g(E) - s| < G_INV_TOL`. `g_inv(0) = 0`.
pub fn g_inv(s: EntropyNats) -> Result<MeanPhotonNumber> {
    g_inv_raw(s.0).map(MeanPhotonNumber)
}

/// Unchecked-input inversion of `g` by bracketed Newton iteration with
/// bisection fallback. The initial bracket is `[0, exp(s)]`, valid because
/// `g(E) >= ln(E+1)`.
pub(crate) fn g_inv_raw(s: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Domain(format!(
            "g_inv: entropy must be >= 0, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    // g(E) ≈ ln E + 1 at large E, so the inverse leaves double range near
    // s ≈ 709; refuse rather than iterate on overflowed brackets.
    const HI_CAP: f64 = f64::MAX / 4.0;
    if s > g_raw(HI_CAP) {
        return Err(Error::Numeric(format!(
            "g_inv({s}) exceeds double precision range"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = s.exp().min(HI_CAP);
    let mut x = 0.5 * hi;
    for _ in 0..G_INV_MAX_ITERS {
        let f = g_raw(x) - s;
        if f.abs() < G_INV_TOL {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / g_prime(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if (g_raw(x) - s).abs() < 1e3 * G_INV_TOL {
        // Bisection endgame can stall on the last bits; accept a slightly
        // looser residual rather than fail.
        return Ok(x);
    }
    Err(Error::Numeric(format!(
        "g_inv did not converge for s = {s} (residual {:.3e})",
        (g_raw(x) - s).abs()
    )))
}

/// The bound composition `f(s) = g(a g⁻¹(s) + b)`.
pub fn bound_f(params: LemmaParams, s: EntropyNats) -> Result<EntropyNats> {
    if s.0 < 0.0 || !s.0.is_finite() {
        return Err(Error::Domain(format!(
            "bound_f: entropy must be >= 0, got {}",
            s.0
        )));
    }
    let e = g_inv_raw(s.0)?;
    Ok(EntropyNats(g_raw(params.a * e + params.b)))
}

/// The heterodyne-measurement bound `f_W(s) = ln(g⁻¹(s) + 1) + 1`.
///
/// This is the pointwise limit of `g(κ g⁻¹(s) + κ - 1) - ln κ` as `κ → ∞`.
pub fn wehrl_bound_f(s: EntropyNats) -> Result<EntropyNats> {
    if s.0 < 0.0 || !s.0.is_finite() {
        return Err(Error::Domain(format!(
            "wehrl_bound_f: entropy must be >= 0, got {}",
            s.0
        )));
    }
    let e = g_inv_raw(s.0)?;
    Ok(EntropyNats(e.ln_1p() + 1.0))
}

/// `h(t) = g'(t)/g''(t) = t(t+1) ln(t/(t+1))`, defined for `t > 0`.
///
/// `h` is negative and strictly decreasing; the inequality
/// `h(a y + b) ≤ a h(y)` for `0 ≤ a ≤ b + 1` is what makes [`bound_f`]
/// convex.
pub fn lemma_aux_h(t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!(
            "lemma_aux_h: argument must be > 0, got {t}"
        )));
    }
    Ok(-t * (t + 1.0) * (1.0 / t).ln_1p())
}
