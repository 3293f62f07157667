//! The counting function `Ψ(y) = μ₂{(x, θ) : √ω(x, θ) ≤ y}`, its inverse
//! `√ξ(x) = Ψ⁻¹(πx)` and the slope `Ψ'(0)`.
//!
//! Three evaluation methods are provided:
//!
//! * [`PsiMethod::ExplicitP1`]: for `p = 1`, `Ψ(y) = ∫₀¹ h(y φ'(x)) dx` with
//!   `h(s) = arccos((6 - 2s²)/(6 + s²))` below `√12` and `π` above,
//! * [`PsiMethod::Integral1d`]: any `p`, integrating the `x`-measure of the
//!   sublevel set over `θ`,
//! * [`PsiMethod::Grid2dOracle`]: midpoint counting on a tensor grid.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::quadrature::adaptive_simpson;
use crate::reparam::Convexity;
use crate::roots::bisect;
use crate::symbol::FullSymbol;
use crate::{Error, Result};

/// Absolute tolerance of the adaptive quadratures behind `Ψ`.
pub const PSI_QUAD_TOL: f64 = 1e-10;
/// Absolute tolerance of the bisection behind `√ξ`.
pub const XI_TOL: f64 = 1e-11;
/// Default resolution of the grid oracle.
pub const GRID_ORACLE_RESOLUTION: usize = 2048;
/// Sample points (as fractions of `max √ω`) of the Richardson slope estimate.
pub const SLOPE_SAMPLES: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
/// Relative slack allowed on the slope bounds.
pub const SLOPE_SLACK: f64 = 0.05;

const SQRT12: f64 = 3.464_101_615_137_754_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum PsiMethod {
    ExplicitP1,
    Integral1d,
    Grid2dOracle { resolution: usize },
}

impl PsiMethod {
    pub fn grid_oracle() -> Self {
        PsiMethod::Grid2dOracle {
            resolution: GRID_ORACLE_RESOLUTION,
        }
    }

    /// `ExplicitP1` for `p = 1`, `Integral1d` otherwise.
    pub fn default_for(p: usize) -> Self {
        if p == 1 {
            PsiMethod::ExplicitP1
        } else {
            PsiMethod::Integral1d
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PsiMethod::ExplicitP1 => "explicit_p1",
            PsiMethod::Integral1d => "integral_1d",
            PsiMethod::Grid2dOracle { .. } => "grid_2d_oracle",
        }
    }
}

/// Precomputed samples of the grid oracle.
#[derive(Debug)]
struct GridTables {
    resolution: usize,
    /// `e_p(θ_j)` at the midpoints, increasing in `j`.
    ep: Vec<f64>,
    /// `φ'(x_i)²` at the midpoints.
    dphi_sq: Vec<f64>,
}

/// `h(s)`: the `θ`-measure of `{e_1(θ) ≤ s²}`.
///
/// `arccos((6 - 2s²)/(6 + s²))` is rewritten as `2 atan(s √3 / √(12 - s²))`,
/// which keeps full accuracy for small `s`.
pub fn explicit_p1_kernel(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= SQRT12 {
        PI
    } else {
        2.0 * (s * 3f64.sqrt() / (12.0 - s * s).sqrt()).atan()
    }
}

/// `Ψ` for a fixed symbol and evaluation method.
#[derive(Debug, Clone)]
pub struct PsiFunction {
    sym: FullSymbol,
    method: PsiMethod,
    affine: bool,
    grid: Option<Arc<GridTables>>,
}

impl PsiFunction {
    pub fn new(sym: FullSymbol, method: PsiMethod) -> Result<Self> {
        let phi = sym.phi();
        let affine = phi.convexity() == Convexity::Neutral && phi.is_affine();
        match method {
            PsiMethod::ExplicitP1 | PsiMethod::Integral1d => {
                if method == PsiMethod::ExplicitP1 && sym.degree() != 1 {
                    return Err(Error::Unsupported(format!(
                        "the explicit formula needs p = 1, got p = {}",
                        sym.degree()
                    )));
                }
                if phi.convexity() == Convexity::Neutral && !affine {
                    return Err(Error::Unsupported(format!(
                        "method {} needs a strictly convex, strictly concave or affine map",
                        method.name()
                    )));
                }
                Ok(Self {
                    sym,
                    method,
                    affine,
                    grid: None,
                })
            }
            PsiMethod::Grid2dOracle { resolution } => {
                if resolution == 0 {
                    return Err(Error::InvalidArgument("grid resolution must be positive".into()));
                }
                let r = resolution as f64;
                let ep = (0..resolution)
                    .map(|j| sym.ep().value(PI * (j as f64 + 0.5) / r))
                    .collect();
                let dphi_sq = (0..resolution)
                    .map(|i| {
                        let d = phi.deriv1((i as f64 + 0.5) / r);
                        d * d
                    })
                    .collect();
                let grid = Some(Arc::new(GridTables {
                    resolution,
                    ep,
                    dphi_sq,
                }));
                Ok(Self {
                    sym,
                    method,
                    affine,
                    grid,
                })
            }
        }
    }

    /// `Ψ` with the default method for the degree of `sym`.
    pub fn with_default_method(sym: FullSymbol) -> Result<Self> {
        let method = PsiMethod::default_for(sym.degree());
        Self::new(sym, method)
    }

    pub fn symbol(&self) -> &FullSymbol {
        &self.sym
    }

    pub fn method(&self) -> PsiMethod {
        self.method
    }

    /// `max Rg(√ω)`, where `Ψ` reaches `π`.
    pub fn max_y(&self) -> f64 {
        self.sym.max_sqrt_value()
    }

    /// `Ψ(y)`; zero for `y ≤ 0` and `π` from `max Rg(√ω)` on.
    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.max_y() {
            return PI;
        }
        match self.method {
            PsiMethod::ExplicitP1 => self.explicit_p1(y),
            PsiMethod::Integral1d => self.integral_1d(y),
            PsiMethod::Grid2dOracle { .. } => self.grid_count(y),
        }
    }

    /// `Ψ` at many points, evaluated concurrently, in input order.
    pub fn eval_many(&self, ys: &[f64]) -> Vec<f64> {
        ys.par_iter().map(|&y| self.eval(y)).collect()
    }

    /// The branch point `√12 / φ'(1)` (convex) or `√12 / φ'(0)` (concave) of
    /// the explicit formula, where `h(y φ')` first saturates at the far endpoint.
    pub fn explicit_breakpoint(&self) -> Option<f64> {
        let phi = self.sym.phi();
        match phi.convexity() {
            Convexity::StrictlyConvex => Some(SQRT12 / phi.deriv1(1.0)),
            Convexity::StrictlyConcave => Some(SQRT12 / phi.deriv1(0.0)),
            Convexity::Neutral => None,
        }
    }

    /// `|J₁(y_b) - J₂(y_b)|` at the branch point `y_b` of the explicit formula,
    /// evaluating the unsaturated and the split branch separately.
    pub fn explicit_breakpoint_gap(&self) -> Result<f64> {
        if self.method != PsiMethod::ExplicitP1 {
            return Err(Error::Unsupported(
                "breakpoint gap needs the explicit method".into(),
            ));
        }
        let yb = self
            .explicit_breakpoint()
            .ok_or_else(|| Error::Unsupported("affine maps have no branch point".into()))?;
        let unsaturated = self.explicit_unsaturated(yb);
        let split = self.explicit_split(yb)?;
        Ok((unsaturated - split).abs())
    }

    fn explicit_p1(&self, y: f64) -> f64 {
        let phi = self.sym.phi();
        if self.affine {
            return explicit_p1_kernel(y * phi.deriv1(0.0));
        }
        let yb = self.explicit_breakpoint().expect("strict map");
        if y <= yb {
            self.explicit_unsaturated(y)
        } else {
            self.explicit_split(y).expect("y lies above the branch point")
        }
    }

    /// `∫₀¹ h(y φ'(x)) dx` with no saturation bookkeeping.
    fn explicit_unsaturated(&self, y: f64) -> f64 {
        let phi = self.sym.phi();
        adaptive_simpson(|x| explicit_p1_kernel(y * phi.deriv1(x)), 0.0, 1.0, PSI_QUAD_TOL)
    }

    /// The saturated region `{y φ' ≥ √12}` contributes `π` times its length;
    /// only the complement is integrated.
    fn explicit_split(&self, y: f64) -> Result<f64> {
        let phi = self.sym.phi();
        let x_star = phi.inverse_deriv(SQRT12 / y)?;
        let h = |x: f64| explicit_p1_kernel(y * phi.deriv1(x));
        Ok(match phi.convexity() {
            Convexity::StrictlyConvex => adaptive_simpson(h, 0.0, x_star, PSI_QUAD_TOL) + PI * (1.0 - x_star),
            _ => PI * x_star + adaptive_simpson(h, x_star, 1.0, PSI_QUAD_TOL),
        })
    }

    /// `Ψ(y) = θ_lo + ∫_{θ_lo}^{θ_hi} μ_x{φ' ≥ √e_p(θ)/y} dθ`, where below
    /// `θ_lo` the whole `x`-range qualifies and above `θ_hi` none of it does.
    fn integral_1d(&self, y: f64) -> f64 {
        let phi = self.sym.phi();
        let ep = self.sym.ep();
        let (dmin, dmax) = (phi.min_deriv(), phi.max_deriv());
        let y2 = y * y;
        let theta_lo = ep.inverse_clamped(y2 * dmin * dmin);
        if self.affine {
            return theta_lo;
        }
        let theta_hi = ep.inverse_clamped(y2 * dmax * dmax);
        if theta_hi <= theta_lo {
            return theta_lo;
        }
        let convex = phi.convexity() == Convexity::StrictlyConvex;
        let measure = |theta: f64| {
            let v = (ep.value(theta).sqrt() / y).clamp(dmin, dmax);
            let x = phi.inverse_deriv(v).expect("v is clamped to the range of phi'");
            if convex {
                1.0 - x
            } else {
                x
            }
        };
        theta_lo + adaptive_simpson(measure, theta_lo, theta_hi, PSI_QUAD_TOL)
    }

    fn grid_count(&self, y: f64) -> f64 {
        let g = self.grid.as_ref().expect("grid tables exist for the oracle");
        let y2 = y * y;
        let count: u64 = g
            .dphi_sq
            .par_iter()
            .map(|&d2| {
                let bound = y2 * d2;
                g.ep.partition_point(|&e| e <= bound) as u64
            })
            .sum();
        let r = g.resolution as f64;
        count as f64 * PI / (r * r)
    }

    /// CSV with header `y,psi`.
    pub fn write_csv<W: Write>(&self, mut out: W, ys: &[f64]) -> io::Result<()> {
        writeln!(out, "y,psi")?;
        for (y, v) in ys.iter().zip(self.eval_many(ys)) {
            writeln!(out, "{y:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

pub fn eval_psi(psi: &PsiFunction, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!("y must be non-negative, got {y}")));
    }
    Ok(psi.eval(y))
}

/// The monotone rearrangement `√ξ(x) = Ψ⁻¹(πx)` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Rearrangement {
    psi: PsiFunction,
}

impl Rearrangement {
    pub fn new(psi: PsiFunction) -> Self {
        Self { psi }
    }

    pub fn psi(&self) -> &PsiFunction {
        &self.psi
    }

    /// `√ξ(x)`, by bisection of `Ψ(y) - πx` on `[0, max √ω]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("x must lie in [0, 1], got {x}")));
        }
        let top = self.psi.max_y();
        if x == 0.0 {
            return Ok(0.0);
        }
        if x == 1.0 {
            return Ok(top);
        }
        let target = PI * x;
        bisect(|y| self.psi.eval(y) - target, 0.0, top, XI_TOL, 200)
    }

    /// `√ξ` at many points, evaluated concurrently, in input order.
    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    /// CSV with header `x,sqrt_xi`.
    pub fn write_csv<W: Write>(&self, mut out: W, xs: &[f64]) -> io::Result<()> {
        let values = self.eval_many(xs).map_err(|e| io::Error::other(e.to_string()))?;
        writeln!(out, "x,sqrt_xi")?;
        for (x, v) in xs.iter().zip(values) {
            writeln!(out, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

pub fn eval_xi(re: &Rearrangement, x: f64) -> Result<f64> {
    re.eval(x)
}

/// `Ψ'(0)` and `γ = π / Ψ'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSlope {
    pub psi_prime_at_zero: f64,
    pub gamma: f64,
}

impl GammaSlope {
    pub fn from_psi_prime(psi_prime_at_zero: f64) -> Result<Self> {
        if !(psi_prime_at_zero > 0.0 && psi_prime_at_zero.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "psi'(0) must be positive and finite, got {psi_prime_at_zero}"
            )));
        }
        Ok(Self {
            psi_prime_at_zero,
            gamma: PI / psi_prime_at_zero,
        })
    }
}

/// Admissible window for `Ψ'(0)` at degree `p`, before slack.
///
/// For `p = 1` the exact value 1 is returned as a degenerate window.
pub fn slope_bounds(p: usize) -> (f64, f64) {
    if p == 1 {
        (1.0, 1.0)
    } else {
        let pf = p as f64;
        (
            (2.0 / PI).powf((pf + 1.0) / 2.0),
            (PI / 2.0).powf((pf - 1.0) / 2.0),
        )
    }
}

/// Richardson extrapolation of `Ψ(y)/y` to `y = 0`.
///
/// With `r(y) = Ψ(y)/y = c₀ + c₁ y + c₂ y² + …` sampled at `y, y/2, y/4`, the
/// first step removes `c₁` and the second removes `c₂`.
pub fn richardson_slope(psi: &PsiFunction) -> f64 {
    let top = psi.max_y();
    let r: Vec<f64> = SLOPE_SAMPLES
        .iter()
        .map(|&s| {
            let y = s * top;
            psi.eval(y) / y
        })
        .collect();
    let first_a = 2.0 * r[1] - r[0];
    let first_b = 2.0 * r[2] - r[1];
    (4.0 * first_b - first_a) / 3.0
}

/// Estimates `Ψ'(0)` and checks it against the admissible window with 5% slack.
pub fn slope_at_zero(psi: &PsiFunction) -> Result<GammaSlope> {
    if !psi.symbol().phi().is_strict() {
        return Err(Error::Unsupported(
            "the slope at zero is defined for strictly convex or strictly concave maps".into(),
        ));
    }
    let estimate = richardson_slope(psi);
    let (lo, hi) = slope_bounds(psi.symbol().degree());
    let (lower, upper) = (lo * (1.0 - SLOPE_SLACK), hi * (1.0 + SLOPE_SLACK));
    if !(estimate >= lower && estimate <= upper) {
        return Err(Error::SlopeOutOfBounds {
            estimate,
            lower,
            upper,
        });
    }
    GammaSlope::from_psi_prime(estimate)
}

/// `√ξ(x_small) / (γ x_small)`, which tends to 1 as `x_small → 0`.
pub fn xi_linear_check(re: &Rearrangement, gamma: &GammaSlope, x_small: f64) -> Result<f64> {
    if !(x_small > 0.0 && x_small <= 0.05) {
        return Err(Error::InvalidArgument(format!(
            "x_small must lie in (0, 0.05], got {x_small}"
        )));
    }
    Ok(re.eval(x_small)? / (gamma.gamma * x_small))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reparam::Reparametrization;

    fn psi(p: usize, phi: Reparametrization, method: PsiMethod) -> PsiFunction {
        PsiFunction::new(FullSymbol::new(p, phi).unwrap(), method).unwrap()
    }

    fn exp1() -> Reparametrization {
        Reparametrization::exp_convex(1.0, 0.5).unwrap()
    }

    #[test]
    fn kernel_matches_arccos_form() {
        for i in 0..=100 {
            let s = SQRT12 * i as f64 / 100.0;
            let arccos = ((6.0 - 2.0 * s * s) / (6.0 + s * s)).clamp(-1.0, 1.0).acos();
            assert!((explicit_p1_kernel(s) - arccos).abs() < 1e-7, "s={s}");
        }
        assert_eq!(explicit_p1_kernel(4.0), PI);
    }

    #[test]
    fn endpoints() {
        for method in [
            PsiMethod::ExplicitP1,
            PsiMethod::Integral1d,
            PsiMethod::grid_oracle(),
        ] {
            let f = psi(1, exp1(), method);
            assert_eq!(f.eval(0.0), 0.0);
            assert_eq!(f.eval(f.max_y()), PI);
        }
    }

    #[test]
    fn method_preconditions() {
        let sym = FullSymbol::new(2, exp1()).unwrap();
        assert!(matches!(
            PsiFunction::new(sym, PsiMethod::ExplicitP1),
            Err(Error::Unsupported(_))
        ));
        let wobbly = Reparametrization::custom(
            |x| x + 0.05 * (2.0 * PI * x).sin() / (2.0 * PI),
            |x| 1.0 + 0.05 * (2.0 * PI * x).cos(),
            |x| -0.1 * PI * (2.0 * PI * x).sin(),
            Convexity::Neutral,
        )
        .unwrap();
        let sym = FullSymbol::new(1, wobbly).unwrap();
        assert!(matches!(
            PsiFunction::new(sym.clone(), PsiMethod::Integral1d),
            Err(Error::Unsupported(_))
        ));
        assert!(PsiFunction::new(sym, PsiMethod::grid_oracle()).is_ok());
    }

    #[test]
    fn identity_closed_form() {
        let grid = psi(1, Reparametrization::identity(), PsiMethod::grid_oracle());
        let exact = psi(1, Reparametrization::identity(), PsiMethod::ExplicitP1);
        for i in 1..32 {
            let y = SQRT12 * i as f64 / 32.0;
            let want = ((6.0 - 2.0 * y * y) / (6.0 + y * y)).acos();
            assert!((exact.eval(y) - want).abs() < 1e-12);
            assert!((grid.eval(y) - want).abs() < 2e-3);
        }
        assert_eq!(grid.eval(SQRT12), PI);
    }

    #[test]
    fn methods_agree_for_linear_splines() {
        for phi in [exp1(), Reparametrization::log_concave(1.0, 0.5).unwrap()] {
            let a = psi(1, phi.clone(), PsiMethod::ExplicitP1);
            let b = psi(1, phi.clone(), PsiMethod::Integral1d);
            let c = psi(1, phi, PsiMethod::grid_oracle());
            for i in 1..=32 {
                let y = a.max_y() * i as f64 / 33.0;
                let (va, vb, vc) = (a.eval(y), b.eval(y), c.eval(y));
                assert!((va - vb).abs() < 1e-8, "y={y} {va} {vb}");
                assert!((va - vc).abs() < 2e-3, "y={y} {va} {vc}");
            }
        }
    }

    #[test]
    fn breakpoint_branches_glue() {
        for phi in [exp1(), Reparametrization::log_concave(1.0, 0.5).unwrap()] {
            let f = psi(1, phi, PsiMethod::ExplicitP1);
            assert!(f.explicit_breakpoint_gap().unwrap() < 1e-8);
        }
    }

    #[test]
    fn psi_is_monotone() {
        let f = psi(2, exp1(), PsiMethod::Integral1d);
        let values: Vec<f64> = (0..=200).map(|i| f.eval(f.max_y() * i as f64 / 200.0)).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn xi_examples() {
        let re = Rearrangement::new(psi(1, Reparametrization::identity(), PsiMethod::ExplicitP1));
        assert_eq!(re.eval(0.0).unwrap(), 0.0);
        assert!((re.eval(1.0).unwrap() - SQRT12).abs() < 1e-12);
        for i in 1..64 {
            let x = i as f64 / 64.0;
            let th = PI * x;
            let want = (6.0 * (1.0 - th.cos()) / (2.0 + th.cos())).sqrt();
            assert!((re.eval(x).unwrap() - want).abs() < 1e-8);
        }
        assert!(re.eval(1.5).is_err());
    }

    #[test]
    fn xi_round_trip() {
        let re = Rearrangement::new(psi(1, exp1(), PsiMethod::ExplicitP1));
        for i in 1..50 {
            let x = i as f64 / 50.0;
            let y = re.eval(x).unwrap();
            assert!((re.psi().eval(y) - PI * x).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_examples() {
        let s = slope_at_zero(&psi(1, exp1(), PsiMethod::ExplicitP1)).unwrap();
        assert!((s.psi_prime_at_zero - 1.0).abs() < 0.02);
        assert!((s.gamma - PI).abs() < 0.07);
        let s2 = slope_at_zero(&psi(2, exp1(), PsiMethod::Integral1d)).unwrap();
        let (lo, hi) = slope_bounds(2);
        assert!(s2.psi_prime_at_zero >= lo && s2.psi_prime_at_zero <= hi);
        assert!(matches!(
            slope_at_zero(&psi(1, Reparametrization::identity(), PsiMethod::ExplicitP1)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn grid_ratio_near_zero() {
        let grid = psi(1, Reparametrization::identity(), PsiMethod::grid_oracle());
        let y = 1e-3;
        // one grid row of θ cells has width π/2048, far coarser than y
        assert!((grid.eval(y) / y - 1.0).abs() < PI / 2048.0 / y);
        let exact = psi(1, Reparametrization::identity(), PsiMethod::ExplicitP1);
        assert!((exact.eval(y) / y - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_check() {
        let re = Rearrangement::new(psi(1, exp1(), PsiMethod::ExplicitP1));
        let g = GammaSlope::from_psi_prime(1.0).unwrap();
        let r = xi_linear_check(&re, &g, 1e-3).unwrap();
        assert!((r - 1.0).abs() < 0.05);
        assert!(xi_linear_check(&re, &g, 0.0).is_err());
        assert!(xi_linear_check(&re, &g, 0.1).is_err());
    }

    #[test]
    fn csv_tables() {
        let f = psi(1, exp1(), PsiMethod::ExplicitP1);
        let mut buf = Vec::new();
        f.write_csv(&mut buf, &[0.0, 1.0]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("y,psi\n0.0000000000000000e0,0.0000000000000000e0\n"));
        let re = Rearrangement::new(f);
        let mut buf = Vec::new();
        re.write_csv(&mut buf, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
