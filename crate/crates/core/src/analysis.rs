//! Finite-`n` checks of the distribution results: Weyl counting, sampling
//! estimates, eigenfrequency ordering, pack counts and outlier statistics.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{GammaSlope, PsiFunction, Rearrangement};
use crate::eigensolve::DiscreteSpectrum;
use crate::pipeline::spectra_for_ladder;
use crate::reparam::{Convexity, Reparametrization};
use crate::roots::bisect_default;
use crate::symbol::SymbolEp;
use crate::{Error, Result};

/// Number of uniform probes used by ladder sweeps on `[0, max √ω]`.
pub const WEYL_PROBES: usize = 1000;
/// Grid size of the sign scan locating the crossing of two derivatives.
pub const CROSSING_SCAN: usize = 1000;
/// Allowed mismatch of the pinned endpoint derivatives of an ordered pair.
pub const PAIR_ENDPOINT_TOL: f64 = 1e-10;

/// `G_n(y) = #{k : √(n⁻²λ_k) ≤ y} / (N + 1)`.
pub fn counting_function(spec: &DiscreteSpectrum, y: f64) -> f64 {
    let count = spec.normalized_frequencies.partition_point(|&f| f <= y);
    count as f64 / (spec.size + 1) as f64
}

fn count_below(spec: &DiscreteSpectrum, y: f64) -> usize {
    spec.normalized_frequencies.partition_point(|&f| f < y)
}

/// `|G_n - Ψ/π|` for one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylRun {
    pub n: usize,
    pub sup_error: f64,
    pub pointwise_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    pub p: usize,
    pub probe_y: Vec<f64>,
    pub n_values: Vec<usize>,
    pub sup_errors: Vec<f64>,
    /// `pointwise_errors[i][j]` is the error at `probe_y[j]` for `n_values[i]`.
    pub pointwise_errors: Vec<Vec<f64>>,
    pub sup_nonincreasing: bool,
}

impl WeylReport {
    /// Merges single-`n` runs sharing the same probes, in the given order.
    pub fn from_runs(p: usize, probe_y: Vec<f64>, runs: Vec<WeylRun>) -> Self {
        let sup_errors: Vec<f64> = runs.iter().map(|r| r.sup_error).collect();
        let sup_nonincreasing = sup_errors.windows(2).all(|w| w[1] <= w[0]);
        Self {
            p,
            probe_y,
            n_values: runs.iter().map(|r| r.n).collect(),
            sup_errors,
            pointwise_errors: runs.into_iter().map(|r| r.pointwise_errors).collect(),
            sup_nonincreasing,
        }
    }

    /// CSV with header `y,err_n<n1>,err_n<n2>,…` followed by a `sup` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "y")?;
        for n in &self.n_values {
            write!(out, ",err_n{n}")?;
        }
        writeln!(out)?;
        for (j, y) in self.probe_y.iter().enumerate() {
            write!(out, "{y:.16e}")?;
            for row in &self.pointwise_errors {
                write!(out, ",{:.16e}", row[j])?;
            }
            writeln!(out)?;
        }
        write!(out, "sup")?;
        for s in &self.sup_errors {
            write!(out, ",{s:.16e}")?;
        }
        writeln!(out)
    }
}

/// Sup and pointwise distance between `G_n` and `Ψ/π`.
///
/// `G_n` is a right-continuous step function and `Ψ/π` is continuous and
/// nondecreasing, so the supremum is attained at a jump, taking both one-sided
/// values there. The probes are added to the candidates as well.
pub fn weyl_run(spec: &DiscreteSpectrum, psi: &PsiFunction, probe_y: &[f64]) -> Result<WeylRun> {
    if spec.size == 0 {
        return Err(Error::InvalidArgument("the spectrum is empty".into()));
    }
    let denom = (spec.size + 1) as f64;
    let jumps = &spec.normalized_frequencies;
    let psi_at_jumps = psi.eval_many(jumps);
    let mut sup: f64 = 0.0;
    for (&y, &v) in jumps.iter().zip(&psi_at_jumps) {
        let target = v / std::f64::consts::PI;
        let left = count_below(spec, y) as f64 / denom;
        let right = counting_function(spec, y);
        sup = sup.max((left - target).abs()).max((right - target).abs());
    }
    let pointwise_errors: Vec<f64> = probe_y
        .iter()
        .zip(psi.eval_many(probe_y))
        .map(|(&y, v)| (counting_function(spec, y) - v / std::f64::consts::PI).abs())
        .collect();
    let sup = pointwise_errors.iter().fold(sup, |a, &b| a.max(b));
    Ok(WeylRun {
        n: spec.n,
        sup_error: sup,
        pointwise_errors,
    })
}

/// Single-spectrum Weyl report.
pub fn weyl_counting(spec: &DiscreteSpectrum, psi: &PsiFunction, probe_y: &[f64]) -> Result<WeylReport> {
    let run = weyl_run(spec, psi, probe_y)?;
    Ok(WeylReport::from_runs(spec.p, probe_y.to_vec(), vec![run]))
}

/// `count` uniform probes on `[0, top]`, endpoints included.
pub fn uniform_probes(top: f64, count: usize) -> Vec<f64> {
    let m = count.max(2);
    (0..m).map(|i| top * i as f64 / (m - 1) as f64).collect()
}

/// Weyl report over an `n` ladder with [`WEYL_PROBES`] uniform probes.
pub fn weyl_ladder(psi: &PsiFunction, phi: &Reparametrization, n_values: &[usize]) -> Result<WeylReport> {
    let p = psi.symbol().degree();
    let probes = uniform_probes(psi.max_y(), WEYL_PROBES);
    let spectra = spectra_for_ladder(p, n_values, phi)?;
    let runs = spectra
        .par_iter()
        .map(|s| weyl_run(s, psi, &probes))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeylReport::from_runs(p, probes, runs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaProbe {
    pub k: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub p: usize,
    pub n: usize,
    pub inlier_count: usize,
    /// `max_k |√(n⁻²λ_k) - √ξ(k/(N+1))|` over the inliers.
    pub abs_error: f64,
    /// `max_k (k/(N+1)) |√(n⁻²λ_k) / √ξ(k/(N+1)) - 1|`.
    pub weighted_rel_error: f64,
    /// `max_k |√(n⁻²λ_k) / √ξ(k/(N+1)) - 1|`.
    pub uniform_rel_error: f64,
    /// `√(n⁻²λ_k) / (γ k/(N+1))` at `k = 1, 2, ⌈√N⌉`.
    pub beta_probe: Vec<BetaProbe>,
}

impl EstimateReport {
    /// CSV with header `p,n,inlier_count,abs_error,weighted_rel_error,uniform_rel_error,beta_k,beta_ratio`,
    /// one row per β probe.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "p,n,inlier_count,abs_error,weighted_rel_error,uniform_rel_error,beta_k,beta_ratio"
        )?;
        for b in &self.beta_probe {
            writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                self.p,
                self.n,
                self.inlier_count,
                self.abs_error,
                self.weighted_rel_error,
                self.uniform_rel_error,
                b.k,
                b.ratio
            )?;
        }
        Ok(())
    }
}

/// Sampling errors of the inlier frequencies against `√ξ(k/(N+1))`.
pub fn estimate_errors(
    spec: &DiscreteSpectrum,
    re: &Rearrangement,
    gamma: &GammaSlope,
) -> Result<EstimateReport> {
    let denom = (spec.size + 1) as f64;
    let inliers = spec.inlier_count();
    let xs: Vec<f64> = (1..=inliers).map(|k| k as f64 / denom).collect();
    let xi = re.eval_many(&xs)?;
    let mut abs_error: f64 = 0.0;
    let mut weighted: f64 = 0.0;
    let mut uniform: f64 = 0.0;
    for (i, (&f, &s)) in spec.normalized_frequencies.iter().zip(&xi).enumerate() {
        let rel = (f / s - 1.0).abs();
        abs_error = abs_error.max((f - s).abs());
        weighted = weighted.max(xs[i] * rel);
        uniform = uniform.max(rel);
    }
    let root = (spec.size as f64).sqrt().ceil() as usize;
    let mut ks = vec![1, 2, root];
    ks.retain(|&k| k >= 1 && k <= spec.size);
    ks.dedup();
    let beta_probe = ks
        .into_iter()
        .map(|k| BetaProbe {
            k,
            ratio: spec.normalized_frequencies[k - 1] / (gamma.gamma * k as f64 / denom),
        })
        .collect();
    Ok(EstimateReport {
        p: spec.p,
        n: spec.n,
        inlier_count: inliers,
        abs_error,
        weighted_rel_error: weighted,
        uniform_rel_error: uniform,
        beta_probe,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub p: usize,
    pub n: usize,
    /// Interval of normalized eigenvalues `n⁻²λ`.
    pub interval: [f64; 2],
    pub probe_count: usize,
    /// `min (Ψ₁(√y) - Ψ₂(√y))` over the probes.
    pub psi_gap_min: f64,
    pub hypothesis_verified: bool,
    /// Indices `k` with both normalized eigenvalues inside the interval.
    pub pairs_checked: usize,
    /// Pairs inside the interval with `√λ_k¹ ≥ √λ_k²`.
    pub violations: Vec<usize>,
    /// Pairs skipped because one of the eigenvalues sits in a near tie.
    pub excluded_near_ties: Vec<usize>,
}

impl OrderingReport {
    /// The ordering holds when the hypothesis was verified and no pair violates it.
    pub fn passed(&self) -> bool {
        self.hypothesis_verified && self.violations.is_empty()
    }

    /// CSV with header `k,lambda1,lambda2,in_interval,ordered`.
    pub fn write_pairs_csv<W: Write>(
        &self,
        mut out: W,
        spec1: &DiscreteSpectrum,
        spec2: &DiscreteSpectrum,
    ) -> io::Result<()> {
        writeln!(out, "k,lambda1,lambda2,in_interval,ordered")?;
        let (lo, hi) = (self.interval[0], self.interval[1]);
        for k in 1..=spec1.size.min(spec2.size) {
            let (a, b) = (spec1.normalized_eigenvalue(k), spec2.normalized_eigenvalue(k));
            let inside = a > lo && a < hi && b > lo && b < hi;
            writeln!(out, "{k},{a:.16e},{b:.16e},{inside},{}", a < b)?;
        }
        Ok(())
    }
}

/// Checks `Ψ₁(√y) > Ψ₂(√y)` on the open interval and the induced ordering
/// `√λ_k¹ < √λ_k²` of same-index eigenvalues lying in it.
///
/// Probes sit at the midpoints of `probe_count` equal cells, so the open
/// endpoints (where the two counting functions may touch) are never sampled.
pub fn verify_ordering(
    spec1: &DiscreteSpectrum,
    spec2: &DiscreteSpectrum,
    psi1: &PsiFunction,
    psi2: &PsiFunction,
    interval: (f64, f64),
    probe_count: usize,
) -> Result<OrderingReport> {
    if spec1.p != spec2.p || spec1.n != spec2.n {
        return Err(Error::InvalidArgument("both spectra must share p and n".into()));
    }
    let (lo, hi) = interval;
    if !(lo >= 0.0 && hi > lo) || probe_count == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= lo < hi and a positive probe count, got ({lo}, {hi}) and {probe_count}"
        )));
    }
    let probes: Vec<f64> = (0..probe_count)
        .map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / probe_count as f64).sqrt())
        .collect();
    let gap = psi1
        .eval_many(&probes)
        .into_iter()
        .zip(psi2.eval_many(&probes))
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    let mut pairs_checked = 0;
    let mut violations = Vec::new();
    let mut excluded_near_ties = Vec::new();
    for k in 1..=spec1.size.min(spec2.size) {
        let (a, b) = (spec1.normalized_eigenvalue(k), spec2.normalized_eigenvalue(k));
        if !(a > lo && a < hi && b > lo && b < hi) {
            continue;
        }
        if spec1.in_near_tie(k) || spec2.in_near_tie(k) {
            excluded_near_ties.push(k);
            continue;
        }
        pairs_checked += 1;
        if a >= b {
            violations.push(k);
        }
    }
    Ok(OrderingReport {
        p: spec1.p,
        n: spec1.n,
        interval: [lo, hi],
        probe_count,
        psi_gap_min: gap,
        hypothesis_verified: gap > 0.0,
        pairs_checked,
        violations,
        excluded_near_ties,
    })
}

/// Orders two maps of the same class so that the first has the larger `φ'`
/// next to the pinned endpoint (`x = 0` for convex, `x = 1` for concave).
///
/// Returns the pair unchanged when the derivatives never separate on the scan grid.
pub fn orient_pair(a: Reparametrization, b: Reparametrization) -> (Reparametrization, Reparametrization) {
    let xs: Vec<f64> = match a.convexity() {
        Convexity::StrictlyConcave => (0..=CROSSING_SCAN)
            .rev()
            .map(|i| i as f64 / CROSSING_SCAN as f64)
            .collect(),
        _ => (0..=CROSSING_SCAN)
            .map(|i| i as f64 / CROSSING_SCAN as f64)
            .collect(),
    };
    for x in xs {
        let d = a.deriv1(x) - b.deriv1(x);
        if d.abs() > PAIR_ENDPOINT_TOL {
            return if d > 0.0 { (a, b) } else { (b, a) };
        }
    }
    (a, b)
}

/// The interval of normalized eigenvalues on which `Ψ₁(√y) > Ψ₂(√y)` is guaranteed.
///
/// Convex pairs need `φ'₁(0) = φ'₂(0)`; `x₀` is the first zero of `φ'₁ - φ'₂`
/// in `(0, 1)` and `φ'₁ ≥ φ'₂` must hold on `[0, x₀]`. Concave pairs mirror this
/// at `x = 1` with the last zero. The result is
/// `(e_p(π)/φ'₁(x₀)², e_p(π)/φ'₁(e)²)` with `e` the pinned endpoint.
pub fn ordering_hypothesis_from_family(
    phi1: &Reparametrization,
    phi2: &Reparametrization,
    p: usize,
) -> Result<(f64, f64)> {
    let convex = match (phi1.convexity(), phi2.convexity()) {
        (Convexity::StrictlyConvex, Convexity::StrictlyConvex) => true,
        (Convexity::StrictlyConcave, Convexity::StrictlyConcave) => false,
        _ => {
            return Err(Error::InvalidPair(
                "both maps must be strictly convex or both strictly concave".into(),
            ))
        }
    };
    let pinned = if convex { 0.0 } else { 1.0 };
    let mismatch = (phi1.deriv1(pinned) - phi2.deriv1(pinned)).abs();
    if mismatch > PAIR_ENDPOINT_TOL {
        return Err(Error::InvalidPair(format!(
            "phi' must agree at x = {pinned}, mismatch {mismatch:e}"
        )));
    }
    let diff = |x: f64| phi1.deriv1(x) - phi2.deriv1(x);
    let step = 1.0 / CROSSING_SCAN as f64;
    // walk away from the pinned endpoint until the difference changes sign
    let grid: Vec<f64> = (1..CROSSING_SCAN)
        .map(|i| {
            if convex {
                i as f64 * step
            } else {
                1.0 - i as f64 * step
            }
        })
        .collect();
    let mut prev_x = pinned;
    let mut prev_sign = 0.0;
    let mut crossing = None;
    for &x in &grid {
        let d = diff(x);
        let sign = if d.abs() <= PAIR_ENDPOINT_TOL {
            0.0
        } else {
            d.signum()
        };
        if prev_sign == 0.0 {
            if sign < 0.0 {
                return Err(Error::InvalidPair(format!(
                    "phi'_1 < phi'_2 next to x = {pinned}; swap the pair"
                )));
            }
            prev_sign = sign;
        } else if sign < 0.0 {
            crossing = Some((prev_x, x));
            break;
        }
        prev_x = x;
    }
    let (a, b) =
        crossing.ok_or_else(|| Error::InvalidPair("phi'_1 - phi'_2 has no sign change in (0, 1)".into()))?;
    let x0 = bisect_default(diff, a.min(b), a.max(b))?;
    let top = SymbolEp::new(p)?.max_value();
    let d0 = phi1.deriv1(x0);
    let de = phi1.deriv1(pinned);
    Ok((top / (d0 * d0), top / (de * de)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonic {
    Increasing,
    Decreasing,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackReport {
    pub p: usize,
    pub n: usize,
    /// Frequency interval `[y₀, y_r]`.
    pub interval: [f64; 2],
    pub r: usize,
    pub counts: Vec<usize>,
    pub total: usize,
    pub monotonic: Monotonic,
}

impl PackReport {
    /// CSV with header `cell,lower,upper,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "cell,lower,upper,count")?;
        let width = (self.interval[1] - self.interval[0]) / self.r as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.interval[0] + width * i as f64;
            let hi = if i + 1 == self.r {
                self.interval[1]
            } else {
                lo + width
            };
            writeln!(out, "{},{lo:.16e},{hi:.16e},{c}", i + 1)?;
        }
        Ok(())
    }
}

/// Frequencies per cell `(y_{i-1}, y_i]` of a uniform partition of the interval.
pub fn pack_counts(spec: &DiscreteSpectrum, interval: (f64, f64), r: usize) -> Result<PackReport> {
    let (lo, hi) = interval;
    if r < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two cells, got r = {r}"
        )));
    }
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty interval ({lo}, {hi})")));
    }
    let upto = |y: f64| spec.normalized_frequencies.partition_point(|&f| f <= y);
    let edges: Vec<f64> = (0..=r)
        .map(|i| {
            if i == r {
                hi
            } else {
                lo + (hi - lo) * i as f64 / r as f64
            }
        })
        .collect();
    let counts: Vec<usize> = edges.windows(2).map(|w| upto(w[1]) - upto(w[0])).collect();
    let monotonic = if counts.windows(2).all(|w| w[1] > w[0]) {
        Monotonic::Increasing
    } else if counts.windows(2).all(|w| w[1] < w[0]) {
        Monotonic::Decreasing
    } else {
        Monotonic::Mixed
    };
    Ok(PackReport {
        p: spec.p,
        n: spec.n,
        interval: [lo, hi],
        r,
        total: counts.iter().sum(),
        counts,
        monotonic,
    })
}

/// The frequency window `[0.1, 0.9] · √6 / max φ'` on which `Ψ` is strictly
/// concave for `p = 1`.
pub fn auto_concave_window(phi: &Reparametrization) -> (f64, f64) {
    let top = 6f64.sqrt() / phi.deriv1(0.0).max(phi.deriv1(1.0));
    (0.1 * top, 0.9 * top)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierRow {
    pub n: usize,
    pub size: usize,
    pub outliers: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierTrend {
    pub p: usize,
    pub rows: Vec<OutlierRow>,
    pub constant: bool,
    /// `OUT/N` scales exactly like `1/N`, i.e. halves whenever `N` doubles.
    pub ratio_scales_inversely: bool,
}

impl OutlierTrend {
    /// CSV with header `n,size,outliers,ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,size,outliers,ratio")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.16e}", r.n, r.size, r.outliers, r.ratio)?;
        }
        Ok(())
    }
}

/// `OUT(p, n)` and `OUT(p, n)/N` over an ascending ladder of at least three `n`.
pub fn outlier_trend(p: usize, phi: &Reparametrization, n_values: &[usize]) -> Result<OutlierTrend> {
    if n_values.len() < 3 || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "outlier trend needs at least three strictly ascending n values".into(),
        ));
    }
    let rows: Vec<OutlierRow> = spectra_for_ladder(p, n_values, phi)?
        .into_iter()
        .map(|s| OutlierRow {
            n: s.n,
            size: s.size,
            outliers: s.outlier_count,
            ratio: s.outlier_count as f64 / s.size as f64,
        })
        .collect();
    let constant = rows.windows(2).all(|w| w[0].outliers == w[1].outliers);
    let ratio_scales_inversely = rows
        .windows(2)
        .all(|w| (w[1].ratio * w[1].size as f64 - w[0].ratio * w[0].size as f64).abs() <= 1e-12);
    Ok(OutlierTrend {
        p,
        rows,
        constant,
        ratio_scales_inversely,
    })
}
