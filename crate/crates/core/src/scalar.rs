//! Scalar price / cost functions of one variable and extended-real bounds.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of sample points used by [`ScalarCostFn::check_monotone`].
pub const MONOTONE_SAMPLES: usize = 1024;

/// An upper capacity bound that may be absent.
///
/// Serialized as a plain number, or as the string `"inf"` when unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cap {
    Finite(f64),
    Infinite,
}

impl Cap {
    pub fn is_finite(self) -> bool {
        matches!(self, Cap::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Cap::Finite(v) => Some(v),
            Cap::Infinite => None,
        }
    }

    /// Value as `f64`, with `+inf` for an absent bound.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl From<f64> for Cap {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            Cap::Infinite
        } else {
            Cap::Finite(v)
        }
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Finite(v) => write!(f, "{v}"),
            Cap::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Cap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cap::Finite(v) => s.serialize_f64(*v),
            Cap::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(Cap::Finite(v)),
            Raw::Num(_) => Err(serde::de::Error::custom("cap must be finite or \"inf\"")),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(Cap::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unrecognised cap `{t}`"))),
        }
    }
}

pub type CustomFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous scalar function `t -> value` together with its primitive.
///
/// Affine and power forms integrate in closed form; custom callables fall back
/// to adaptive Simpson quadrature.
#[derive(Clone)]
pub enum ScalarCostFn {
    /// `c0 + c1 * t`
    Affine { c0: f64, c1: f64 },
    /// `c0 + c1 * max(t, 0)^exponent`, exponent > 0
    Power { c0: f64, c1: f64, exponent: f64 },
    Custom(CustomFn),
}

impl fmt::Debug for ScalarCostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarCostFn::Affine { c0, c1 } => write!(f, "Affine({c0} + {c1}*t)"),
            ScalarCostFn::Power { c0, c1, exponent } => {
                write!(f, "Power({c0} + {c1}*t^{exponent})")
            }
            ScalarCostFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ScalarCostFn {
    pub fn affine(c0: f64, c1: f64) -> Self {
        ScalarCostFn::Affine { c0, c1 }
    }

    pub fn constant(c0: f64) -> Self {
        ScalarCostFn::Affine { c0, c1: 0.0 }
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarCostFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarCostFn::Affine { c0, c1 } => c0 + c1 * t,
            ScalarCostFn::Power { c0, c1, exponent } => c0 + c1 * t.max(0.0).powf(*exponent),
            ScalarCostFn::Custom(f) => f(t),
        }
    }

    /// `∫_a^b self(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            // written as width * midpoint value, which keeps short intervals exact-ish
            ScalarCostFn::Affine { c0, c1 } => (b - a) * (c0 + 0.5 * c1 * (a + b)),
            ScalarCostFn::Power { c0, c1, exponent } => {
                let e1 = exponent + 1.0;
                let prim = |t: f64| c1 * t.max(0.0).powf(e1) / e1;
                c0 * (b - a) + (prim(b) - prim(a))
            }
            ScalarCostFn::Custom(f) => adaptive_simpson(f.as_ref(), a, b),
        }
    }

    /// `∫_a^{a+width} self(t) dt`, exact in `width` for the affine form (no
    /// rounding of `a + width` when the interval is tiny next to `a`).
    pub fn integral_from(&self, a: f64, width: f64) -> f64 {
        if width == 0.0 {
            return 0.0;
        }
        match self {
            ScalarCostFn::Affine { c0, c1 } => width * (c0 + c1 * (a + 0.5 * width)),
            _ => self.integral(a, a + width),
        }
    }

    /// `∫_0^t self`.
    pub fn primitive(&self, t: f64) -> f64 {
        self.integral(0.0, t)
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, ScalarCostFn::Affine { .. })
    }

    /// Validates monotonicity on `[lo, hi]`: non-decreasing when `increasing`,
    /// non-increasing otherwise. Closed forms are checked from their
    /// coefficients, custom forms on a [`MONOTONE_SAMPLES`]-point sample.
    pub fn check_monotone(&self, lo: f64, hi: f64, increasing: bool) -> Result<()> {
        let sign = if increasing { 1.0 } else { -1.0 };
        match self {
            ScalarCostFn::Affine { c1, .. } | ScalarCostFn::Power { c1, .. } => {
                if let ScalarCostFn::Power { exponent, .. } = self {
                    if !(*exponent > 0.0) {
                        return Err(Error::NotMonotone(format!(
                            "power exponent must be positive, got {exponent}"
                        )));
                    }
                }
                if sign * c1 < 0.0 {
                    return Err(Error::NotMonotone(format!(
                        "{self:?} is not {} ",
                        if increasing { "non-decreasing" } else { "non-increasing" }
                    )));
                }
                Ok(())
            }
            ScalarCostFn::Custom(f) => {
                if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::NotMonotone(format!("bad sample range [{lo}, {hi}]")));
                }
                let n = MONOTONE_SAMPLES;
                let mut prev = f(lo);
                for k in 1..n {
                    let t = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                    let v = f(t);
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("custom function at t = {t}")));
                    }
                    let slack = 1e-12 * (1.0 + prev.abs());
                    if sign * (v - prev) < -slack {
                        return Err(Error::NotMonotone(format!(
                            "custom function moves from {prev} to {v} at t = {t}"
                        )));
                    }
                    prev = v;
                }
                Ok(())
            }
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64) -> f64 {
    fn recurse(
        f: &(dyn Fn(f64) -> f64 + Send + Sync),
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    let scale = 1.0 + fa.abs().max(fb.abs()).max(fm.abs()) * (b - a).abs();
    recurse(f, a, b, fa, fm, fb, whole, 1e-13 * scale, 48)
}
