//! The GLT symbol `ω(x, θ) = e_p(θ) / φ'(x)²` and its ingredients
//! `f_p`, `g_p` and `e_p = f_p / g_p`.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::bspline::CardinalSpline;
use crate::reparam::Reparametrization;
use crate::roots::bisect_default;
use crate::{Error, Result};

/// Cosine coefficients `c_k = 𝒩_{2p+1}(p + 1 - k)`, `k = 0..=p`, of `g_p`.
fn g_coefficients(p: usize) -> Vec<f64> {
    let spline = CardinalSpline::new(2 * p + 1);
    (0..=p).map(|k| spline.value((p + 1 - k) as f64)).collect()
}

/// Cosine coefficients `d_k = 𝒩''_{2p+1}(p + 1 - k)`, `k = 0..=p`, of `-f_p`.
fn f_coefficients(p: usize) -> Vec<f64> {
    let spline = CardinalSpline::new(2 * p + 1);
    (0..=p)
        .map(|k| spline.second_derivative((p + 1 - k) as f64))
        .collect()
}

/// `c_0 + 2 Σ_{k≥1} c_k cos(kθ)`.
fn cosine_series(coef: &[f64], theta: f64) -> f64 {
    coef.iter()
        .enumerate()
        .skip(1)
        .fold(coef[0], |acc, (k, &c)| acc + 2.0 * c * (k as f64 * theta).cos())
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "theta must lie in [0, pi], got {theta}"
        )))
    }
}

/// `g_p(θ)` for any `p ≥ 0`.
pub fn eval_gp(p: usize, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(cosine_series(&g_coefficients(p), theta))
}

/// `(f_p(θ), g_p(θ))` straight from the definitions.
pub fn eval_fp_gp(p: usize, theta: f64) -> Result<(f64, f64)> {
    if p < 1 {
        return Err(Error::InvalidArgument("f_p requires p >= 1".into()));
    }
    check_theta(theta)?;
    let f = -cosine_series(&f_coefficients(p), theta);
    let g = cosine_series(&g_coefficients(p), theta);
    Ok((f, g))
}

/// `e_p` with its cardinal spline samples cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEp {
    degree: usize,
    g: Vec<f64>,
    f: Vec<f64>,
    /// Coefficients of `g_{p-1}`, so that `f_p = (2 - 2cos θ) g_{p-1}`.
    g_lower: Vec<f64>,
    max_value: f64,
}

impl SymbolEp {
    pub fn new(p: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument(format!(
                "symbol degree must be >= 1, got {p}"
            )));
        }
        let mut sym = Self {
            degree: p,
            g: g_coefficients(p),
            f: f_coefficients(p),
            g_lower: g_coefficients(p - 1),
            max_value: 0.0,
        };
        sym.max_value = sym.value(PI);
        Ok(sym)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Cached `𝒩_{2p+1}(p + 1 - k)`, `k = 0..=p`.
    pub fn g_samples(&self) -> &[f64] {
        &self.g
    }

    /// Cached `𝒩''_{2p+1}(p + 1 - k)`, `k = 0..=p`.
    pub fn f_samples(&self) -> &[f64] {
        &self.f
    }

    pub fn fp(&self, theta: f64) -> f64 {
        -cosine_series(&self.f, theta)
    }

    pub fn gp(&self, theta: f64) -> f64 {
        cosine_series(&self.g, theta)
    }

    /// `g_{p-1}(θ)`.
    pub fn gp_lower(&self, theta: f64) -> f64 {
        cosine_series(&self.g_lower, theta)
    }

    /// `e_p(θ)` in factored form `4 sin²(θ/2) g_{p-1}(θ) / g_p(θ)`.
    ///
    /// The identity `f_p = (2 - 2cos θ) g_{p-1}` holds coefficient by
    /// coefficient (the cardinal samples are exact rationals). The factor `2 - 2cos θ` is formed as `4 sin²(θ/2)` so that small
    /// arguments keep full relative accuracy. No domain check.
    pub fn value(&self, theta: f64) -> f64 {
        let s = (0.5 * theta).sin();
        4.0 * s * s * self.gp_lower(theta) / self.gp(theta)
    }

    /// `e_p(θ)` with a domain check.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.value(theta))
    }

    /// `e_p(θ) = f_p(θ) / g_p(θ)` straight from the definitions.
    pub fn eval_definition(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.fp(theta) / self.gp(theta))
    }

    /// `e_p(π)`, the maximum of `e_p` on `[0, π]`.
    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    /// The `θ ∈ [0, π]` with `e_p(θ) = v`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        let top = self.max_value;
        if !(0.0..=top).contains(&v) {
            return Err(Error::OutOfRange {
                value: v,
                lower: 0.0,
                upper: top,
            });
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        if v == top {
            return Ok(PI);
        }
        bisect_default(|t| self.value(t) - v, 0.0, PI)
    }

    /// [`Self::inverse`] with `v` clamped to `[0, e_p(π)]`.
    pub(crate) fn inverse_clamped(&self, v: f64) -> f64 {
        self.inverse(v.clamp(0.0, self.max_value))
            .expect("clamped argument lies in the range of e_p")
    }
}

pub fn eval_ep(ep: &SymbolEp, theta: f64) -> Result<f64> {
    ep.eval(theta)
}

pub fn inverse_ep(ep: &SymbolEp, v: f64) -> Result<f64> {
    ep.inverse(v)
}

/// `ω(x, θ) = e_p(θ) / φ'(x)²` on `[0, 1] × [0, π]`.
#[derive(Debug, Clone)]
pub struct FullSymbol {
    ep: SymbolEp,
    phi: Reparametrization,
    max_value: f64,
}

impl FullSymbol {
    pub fn new(p: usize, phi: Reparametrization) -> Result<Self> {
        Ok(Self::from_parts(SymbolEp::new(p)?, phi))
    }

    pub fn from_parts(ep: SymbolEp, phi: Reparametrization) -> Self {
        let dmin = phi.min_deriv();
        let max_value = ep.max_value() / (dmin * dmin);
        Self { ep, phi, max_value }
    }

    pub fn ep(&self) -> &SymbolEp {
        &self.ep
    }

    pub fn phi(&self) -> &Reparametrization {
        &self.phi
    }

    pub fn degree(&self) -> usize {
        self.ep.degree()
    }

    /// `max Rg(ω) = e_p(π) / (min φ')²`.
    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    /// `max Rg(√ω)`.
    pub fn max_sqrt_value(&self) -> f64 {
        self.max_value.sqrt()
    }

    pub fn eval(&self, x: f64, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("x must lie in [0, 1], got {x}")));
        }
        check_theta(theta)?;
        let d = self.phi.deriv1(x);
        Ok(self.ep.value(theta) / (d * d))
    }

    /// Writes `ω` on the tensor grid `x_i = i/(nx-1)`,
    /// `θ_j = π j/(nt-1)` as CSV with header `x,theta,omega`.
    pub fn write_grid_csv<W: Write>(&self, mut out: W, nx: usize, nt: usize) -> io::Result<()> {
        writeln!(out, "x,theta,omega")?;
        let nx = nx.max(2);
        let nt = nt.max(2);
        for i in 0..nx {
            let x = i as f64 / (nx - 1) as f64;
            let d = self.phi.deriv1(x);
            for j in 0..nt {
                let theta = PI * j as f64 / (nt - 1) as f64;
                let w = self.ep.value(theta) / (d * d);
                writeln!(out, "{x:.16e},{theta:.16e},{w:.16e}")?;
            }
        }
        Ok(())
    }
}

pub fn eval_omega(sym: &FullSymbol, x: f64, theta: f64) -> Result<f64> {
    sym.eval(x, theta)
}
