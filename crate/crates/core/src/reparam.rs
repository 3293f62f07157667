//! Admissible reparametrizations `φ: [0, 1] → [0, 1]`.
//!
//! A reparametrization is a C² increasing bijection with `φ(0) = 0`,
//! `φ(1) = 1` and a one-signed second derivative. The identity is admitted as
//! a `Neutral` map so that the closed-form uniform-mesh spectrum can anchor
//! the pipeline; operations that need strict convexity or concavity refuse it.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::roots::bisect_default;
use crate::{Error, Result};

/// Number of points of the validation grid used for user-supplied maps.
pub const VALIDATION_GRID: usize = 1000;
/// Tolerance of the grid validation of user-supplied maps.
pub const VALIDATION_TOL: f64 = 1e-9;
/// Residual `|φ'(x) - v| / max(1, |v|)` guaranteed by [`Reparametrization::inverse_deriv`].
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    StrictlyConvex,
    StrictlyConcave,
    Neutral,
}

/// Parameters of the convex family `φ(x) = e^{ax+b} - e^b + (γ - a e^b) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpConvexParams {
    pub a: f64,
    pub gamma: f64,
    pub b: f64,
}

impl ExpConvexParams {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        check_family_params(a, gamma)?;
        let excess = a.exp_m1() - a;
        assert!(excess > 0.0, "e^a - (a + 1) must be positive for a > 0");
        let b = -(excess / (1.0 - gamma)).ln();
        Ok(Self { a, gamma, b })
    }
}

/// Parameters of the concave family `φ(x) = ln(ax + b) - ln b + (γ - a/(a+b)) x`
/// with `b = a / x*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogConcaveParams {
    pub a: f64,
    pub gamma: f64,
    pub x_star: f64,
    pub b: f64,
}

impl LogConcaveParams {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        check_family_params(a, gamma)?;
        let x_star = solve_x_star(gamma)?;
        Ok(Self {
            a,
            gamma,
            x_star,
            b: a / x_star,
        })
    }
}

/// `1 - (ln(x + 1) - x / (x + 1))`, strictly decreasing from 1 on `x > 0`.
pub fn log_family_rhs(x: f64) -> f64 {
    1.0 - (x.ln_1p() - x / (x + 1.0))
}

/// Unique `x* > 0` with `γ = 1 - (ln(x* + 1) - x*/(x* + 1))`.
///
/// The root lies in `(0, 1)` only for `γ > 1/2 + 1 - ln 2`; for smaller `γ`
/// the bracket is grown by doubling until it encloses the root.
fn solve_x_star(gamma: f64) -> Result<f64> {
    let residual = |x: f64| log_family_rhs(x) - gamma;
    let mut hi = 1.0;
    while residual(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(format!(
                "could not bracket x* for gamma = {gamma}"
            )));
        }
    }
    bisect_default(residual, 0.0, hi)
}

fn check_family_params(a: f64, gamma: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "family parameter a must be > 0, got {a}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "family parameter gamma must lie in (0, 1), got {gamma}"
        )));
    }
    Ok(())
}

/// Which closed-form family (if any) a reparametrization came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Identity,
    ExpConvex(ExpConvexParams),
    LogConcave(LogConcaveParams),
    Custom,
}

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An admissible C² reparametrization with its first two derivatives.
#[derive(Clone)]
pub struct Reparametrization {
    value: RealMap,
    deriv1: RealMap,
    deriv2: RealMap,
    /// Closed-form inverse of `φ'` when the family has one.
    inverse_deriv1: Option<RealMap>,
    convexity: Convexity,
    family: Family,
}

impl fmt::Debug for Reparametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reparametrization")
            .field("family", &self.family)
            .field("convexity", &self.convexity)
            .finish_non_exhaustive()
    }
}

impl Reparametrization {
    pub fn identity() -> Self {
        Self {
            value: Arc::new(|x| x),
            deriv1: Arc::new(|_| 1.0),
            deriv2: Arc::new(|_| 0.0),
            inverse_deriv1: None,
            convexity: Convexity::Neutral,
            family: Family::Identity,
        }
    }

    /// The strictly convex family with `φ'(0) = γ`.
    pub fn exp_convex(a: f64, gamma: f64) -> Result<Self> {
        let params = ExpConvexParams::new(a, gamma)?;
        let eb = params.b.exp();
        let slope = gamma - a * eb;
        Ok(Self {
            // e^{ax+b} - e^b written as e^b (e^{ax} - 1) to keep φ(0) exact
            value: Arc::new(move |x| eb * (a * x).exp_m1() + slope * x),
            deriv1: Arc::new(move |x| a * eb * (a * x).exp_m1() + gamma),
            deriv2: Arc::new(move |x| a * a * eb * (a * x).exp()),
            inverse_deriv1: Some(Arc::new(move |v| ((v - gamma) / (a * eb)).ln_1p() / a)),
            convexity: Convexity::StrictlyConvex,
            family: Family::ExpConvex(params),
        })
    }

    /// The strictly concave family with `φ'(1) = γ`.
    pub fn log_concave(a: f64, gamma: f64) -> Result<Self> {
        let params = LogConcaveParams::new(a, gamma)?;
        let b = params.b;
        let slope = gamma - a / (a + b);
        Ok(Self {
            value: Arc::new(move |x| (a * x / b).ln_1p() + slope * x),
            deriv1: Arc::new(move |x| a / (a * x + b) + slope),
            deriv2: Arc::new(move |x| -(a * a) / ((a * x + b) * (a * x + b))),
            inverse_deriv1: Some(Arc::new(move |v| (a / (v - slope) - b) / a)),
            convexity: Convexity::StrictlyConcave,
            family: Family::LogConcave(params),
        })
    }

    /// A user-supplied map given by `φ`, `φ'`, `φ''` and its declared convexity.
    ///
    /// The declared properties are checked on a uniform grid of
    /// [`VALIDATION_GRID`] points with tolerance [`VALIDATION_TOL`].
    pub fn custom<F, D1, D2>(value: F, deriv1: D1, deriv2: D2, convexity: Convexity) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let phi = Self {
            value: Arc::new(value),
            deriv1: Arc::new(deriv1),
            deriv2: Arc::new(deriv2),
            inverse_deriv1: None,
            convexity,
            family: Family::Custom,
        };
        phi.validate()?;
        Ok(phi)
    }

    fn validate(&self) -> Result<()> {
        let f0 = self.value(0.0);
        let f1 = self.value(1.0);
        if f0.abs() > VALIDATION_TOL || (f1 - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidReparametrization(format!(
                "endpoint values must be phi(0) = 0 and phi(1) = 1, got {f0} and {f1}"
            )));
        }
        for i in 0..VALIDATION_GRID {
            let x = i as f64 / (VALIDATION_GRID - 1) as f64;
            let d1 = self.deriv1(x);
            if !(d1 > 0.0) {
                return Err(Error::InvalidReparametrization(format!(
                    "phi' must be positive, got {d1} at x = {x}"
                )));
            }
            let d2 = self.deriv2(x);
            let ok = match self.convexity {
                Convexity::StrictlyConvex => d2 > 0.0,
                Convexity::StrictlyConcave => d2 < 0.0,
                Convexity::Neutral => d2.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidReparametrization(format!(
                    "phi'' = {d2} at x = {x} contradicts the declared {:?} class",
                    self.convexity
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn deriv1(&self, x: f64) -> f64 {
        (self.deriv1)(x)
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        (self.deriv2)(x)
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_strict(&self) -> bool {
        self.convexity != Convexity::Neutral
    }

    /// True when `φ'` is constant on the validation grid, i.e. `φ` is the identity.
    pub fn is_affine(&self) -> bool {
        let d0 = self.deriv1(0.0);
        (0..VALIDATION_GRID).all(|i| {
            let x = i as f64 / (VALIDATION_GRID - 1) as f64;
            (self.deriv1(x) - d0).abs() <= 1e-12 * d0.abs().max(1.0)
        })
    }

    /// `min φ'` over `[0, 1]`.
    ///
    /// For strict maps `φ'` is monotone and the endpoints suffice; otherwise the
    /// endpoints are combined with the validation grid.
    pub fn min_deriv(&self) -> f64 {
        let ends = self.deriv1(0.0).min(self.deriv1(1.0));
        if self.is_strict() {
            ends
        } else {
            self.grid_deriv().fold(ends, f64::min)
        }
    }

    /// `max φ'` over `[0, 1]`.
    pub fn max_deriv(&self) -> f64 {
        let ends = self.deriv1(0.0).max(self.deriv1(1.0));
        if self.is_strict() {
            ends
        } else {
            self.grid_deriv().fold(ends, f64::max)
        }
    }

    fn grid_deriv(&self) -> impl Iterator<Item = f64> + '_ {
        (0..VALIDATION_GRID).map(move |i| self.deriv1(i as f64 / (VALIDATION_GRID - 1) as f64))
    }

    /// The unique `x ∈ [0, 1]` with `φ'(x) = v`.
    pub fn inverse_deriv(&self, v: f64) -> Result<f64> {
        if !self.is_strict() {
            return Err(Error::Unsupported(
                "inverse of phi' requires a strictly convex or strictly concave map".into(),
            ));
        }
        let d0 = self.deriv1(0.0);
        let d1 = self.deriv1(1.0);
        let (lo, hi) = (d0.min(d1), d0.max(d1));
        let slack = 1e-14 * v.abs().max(1.0);
        if !(v >= lo - slack && v <= hi + slack) {
            return Err(Error::OutOfRange {
                value: v,
                lower: lo,
                upper: hi,
            });
        }
        if v == d0 {
            return Ok(0.0);
        }
        if v == d1 {
            return Ok(1.0);
        }
        if v <= lo {
            return Ok(if d0 <= d1 { 0.0 } else { 1.0 });
        }
        if v >= hi {
            return Ok(if d0 <= d1 { 1.0 } else { 0.0 });
        }
        // closed forms are accepted only when they meet the bisection residual
        if let Some(inv) = &self.inverse_deriv1 {
            let x = inv(v).clamp(0.0, 1.0);
            if (self.deriv1(x) - v).abs() <= INVERSE_RESIDUAL_TOL * v.abs().max(1.0) {
                return Ok(x);
            }
        }
        bisect_default(|x| self.deriv1(x) - v, 0.0, 1.0)
    }
}
