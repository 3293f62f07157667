//! Cardinal B-splines and the open uniform B-spline basis on `[0, 1]`.
//!
//! Both are evaluated with the plain Cox–de Boor recursion, using the
//! convention that a quotient with a vanishing denominator is zero.

use crate::{Error, Result};

/// The uniform-knot B-spline `𝒩_p` supported on `[0, p + 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardinalSpline {
    degree: usize,
}

impl CardinalSpline {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `𝒩_p(x)`.
    pub fn value(&self, x: f64) -> f64 {
        cardinal(self.degree, x)
    }

    /// `𝒩_p'(x) = 𝒩_{p-1}(x) - 𝒩_{p-1}(x - 1)`; zero for `p = 0`.
    pub fn first_derivative(&self, x: f64) -> f64 {
        match self.degree {
            0 => 0.0,
            p => cardinal(p - 1, x) - cardinal(p - 1, x - 1.0),
        }
    }

    /// `𝒩_p''(x) = 𝒩_{p-2}(x) - 2 𝒩_{p-2}(x - 1) + 𝒩_{p-2}(x - 2)`; zero for `p < 2`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.degree {
            0 | 1 => 0.0,
            p => cardinal(p - 2, x) - 2.0 * cardinal(p - 2, x - 1.0) + cardinal(p - 2, x - 2.0),
        }
    }

    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        match order {
            0 => Ok(self.value(x)),
            1 => Ok(self.first_derivative(x)),
            2 => Ok(self.second_derivative(x)),
            _ => Err(Error::InvalidArgument(format!(
                "cardinal spline derivative order {order} is not supported (expected 0, 1 or 2)"
            ))),
        }
    }
}

/// Evaluates `𝒩_p` or one of its first two derivatives at `x`.
///
/// The degree is signed so that callers passing through untrusted input get
/// an error rather than a wrap-around.
pub fn eval_cardinal(p: i64, x: f64, deriv_order: usize) -> Result<f64> {
    if p < 0 {
        return Err(Error::InvalidArgument(format!(
            "cardinal spline degree must be non-negative, got {p}"
        )));
    }
    CardinalSpline::new(p as usize).derivative(x, deriv_order)
}

fn cardinal(p: usize, x: f64) -> f64 {
    if !(0.0..=(p as f64 + 1.0)).contains(&x) {
        return 0.0;
    }
    if p == 0 {
        // half-open support, so that integer shifts sum to one everywhere
        return if x < 1.0 { 1.0 } else { 0.0 };
    }
    let pf = p as f64;
    x / pf * cardinal(p - 1, x) + (pf + 1.0 - x) / pf * cardinal(p - 1, x - 1.0)
}

/// Open uniform knot vector with `p + 1` fold end knots and interior knots `j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    intervals: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn open_uniform(p: usize, n: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument(
                "spline degree p must be at least 1".into(),
            ));
        }
        if n < 1 {
            return Err(Error::InvalidArgument(
                "number of intervals n must be at least 1".into(),
            ));
        }
        let mut knots = Vec::with_capacity(n + 2 * p + 1);
        knots.extend(std::iter::repeat_n(0.0, p + 1));
        knots.extend((1..n).map(|j| j as f64 / n as f64));
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        Ok(Self {
            degree: p,
            intervals: n,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of B-spline functions `p + n` on these knots.
    pub fn basis_len(&self) -> usize {
        self.degree + self.intervals
    }
}

/// Shorthand for [`KnotVector::open_uniform`].
pub fn make_knot_vector(p: usize, n: usize) -> Result<KnotVector> {
    KnotVector::open_uniform(p, n)
}

/// The degree-`p` B-splines `N_0^p, …, N_{p+n-1}^p` on an open uniform knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    knots: KnotVector,
    last_span: usize,
}

impl BSplineBasis {
    pub fn new(knots: KnotVector) -> Self {
        let t = knots.knots();
        let last_span = (0..t.len() - 1)
            .rev()
            .find(|&j| t[j] < t[j + 1])
            .expect("open uniform knots always contain a non-degenerate span");
        Self { knots, last_span }
    }

    pub fn open_uniform(p: usize, n: usize) -> Result<Self> {
        Ok(Self::new(KnotVector::open_uniform(p, n)?))
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn len(&self) -> usize {
        self.knots.basis_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `N_j^p(t)` (`deriv_order = 0`) or `(N_j^p)'(t)` (`deriv_order = 1`).
    ///
    /// Right-continuous at interior knots; at `t = 1` the left limit is used so
    /// that the last function equals one there.
    pub fn eval(&self, j: usize, t: f64, deriv_order: usize) -> Result<f64> {
        if j >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "basis index {j} out of range 0..{}",
                self.len()
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange {
                value: t,
                lower: 0.0,
                upper: 1.0,
            });
        }
        match deriv_order {
            0 => Ok(self.value_unchecked(j, t)),
            1 => Ok(self.derivative_unchecked(j, t)),
            _ => Err(Error::InvalidArgument(format!(
                "basis derivative order {deriv_order} is not supported (expected 0 or 1)"
            ))),
        }
    }

    pub(crate) fn value_unchecked(&self, j: usize, t: f64) -> f64 {
        self.cox_de_boor(j, self.degree(), t)
    }

    pub(crate) fn derivative_unchecked(&self, j: usize, t: f64) -> f64 {
        let p = self.degree();
        let k = self.knots.knots();
        let pf = p as f64;
        let left = ratio(pf, k[j + p] - k[j]) * self.cox_de_boor(j, p - 1, t);
        let right = ratio(pf, k[j + p + 1] - k[j + 1]) * self.cox_de_boor(j + 1, p - 1, t);
        left - right
    }

    fn cox_de_boor(&self, j: usize, k: usize, t: f64) -> f64 {
        let kn = self.knots.knots();
        if k == 0 {
            let inside = kn[j] <= t && t < kn[j + 1];
            let right_end = t == kn[kn.len() - 1] && j == self.last_span;
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let a = ratio(t - kn[j], kn[j + k] - kn[j]);
        let b = ratio(kn[j + k + 1] - t, kn[j + k + 1] - kn[j + 1]);
        let mut acc = 0.0;
        if a != 0.0 {
            acc += a * self.cox_de_boor(j, k - 1, t);
        }
        if b != 0.0 {
            acc += b * self.cox_de_boor(j + 1, k - 1, t);
        }
        acc
    }
}

/// `num / den`, or zero when `den` vanishes.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Numerical convolution `𝒩_p = 𝒩_{p-1} * 𝒩_0`, independent of the recursion.
    fn convolution_oracle(p: usize, x: f64) -> f64 {
        if p == 0 {
            return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        }
        let rule = crate::quadrature::GaussLegendre::new(8);
        // piecewise polynomial integrand: integrate knot span by knot span
        let (lo, hi) = (x - 1.0, x);
        let mut breaks: Vec<f64> = vec![lo, hi];
        for k in 0..=p {
            let kf = k as f64;
            if kf > lo && kf < hi {
                breaks.push(kf);
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks
            .windows(2)
            .map(|w| rule.integrate(|s| convolution_oracle(p - 1, s), w[0], w[1]))
            .sum()
    }

    #[test]
    fn cardinal_reference_values() {
        assert_eq!(eval_cardinal(0, 0.5, 0).unwrap(), 1.0);
        assert!(close(eval_cardinal(3, 2.0, 0).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(close(eval_cardinal(3, 1.0, 0).unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(eval_cardinal(3, 2.0, 2).unwrap(), -2.0, 1e-15));
        assert!(close(eval_cardinal(3, 1.0, 2).unwrap(), 1.0, 1e-15));
        assert_eq!(eval_cardinal(5, -0.1, 0).unwrap(), 0.0);
    }

    #[test]
    fn cardinal_matches_convolution_oracle() {
        for p in 1..=4 {
            for i in 0..=20 {
                let x = -0.3 + i as f64 * (p as f64 + 1.6) / 20.0;
                let got = CardinalSpline::new(p).value(x);
                let want = convolution_oracle(p, x);
                assert!(close(got, want, 1e-12), "p={p} x={x}: {got} vs {want}");
            }
        }
        assert!(close(convolution_oracle(3, 2.0), 2.0 / 3.0, 1e-13));
    }

    #[test]
    fn cardinal_second_derivative_matches_finite_differences() {
        // N_3' is only C¹ at the knots, so the central difference is O(h) there
        let s = CardinalSpline::new(3);
        let h = 1e-7;
        for &x in &[2.0, 1.0, 0.5, 2.7] {
            let fd = (s.first_derivative(x + h) - s.first_derivative(x - h)) / (2.0 * h);
            assert!(close(fd, s.second_derivative(x), 1e-6), "x={x}");
        }
    }

    #[test]
    fn cardinal_rejects_bad_arguments() {
        assert!(matches!(
            eval_cardinal(-1, 0.5, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(eval_cardinal(2, 0.5, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn low_degree_derivatives_vanish() {
        assert_eq!(eval_cardinal(0, 0.5, 1).unwrap(), 0.0);
        assert_eq!(eval_cardinal(1, 0.5, 2).unwrap(), 0.0);
    }

    #[test]
    fn cardinal_partition_of_unity_and_positivity() {
        let mut rng = StdRng::seed_from_u64(7);
        for p in 0..=6 {
            let s = CardinalSpline::new(p);
            for _ in 0..1000 {
                let x: f64 = rng.gen_range(-3.0..10.0);
                let base = x.floor() as i64;
                let sum: f64 = (base - p as i64 - 1..=base + 1)
                    .map(|k| s.value(x - k as f64))
                    .sum();
                assert!(close(sum, 1.0, 1e-12), "p={p} x={x} sum={sum}");
                assert!(s.value(x) >= 0.0);
            }
        }
    }

    #[test]
    fn cardinal_first_derivative_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        let h = 1e-5;
        for p in 1..=6 {
            let s = CardinalSpline::new(p);
            let mut checked = 0;
            while checked < 1000 {
                let x: f64 = rng.gen_range(-0.5..(p as f64 + 1.5));
                if (x - x.round()).abs() < 1e-3 {
                    continue;
                }
                let fd = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
                assert!(close(fd, s.first_derivative(x), 1e-6), "p={p} x={x}");
                checked += 1;
            }
        }
    }

    #[test]
    fn knot_vector_examples() {
        let kv = make_knot_vector(2, 4).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        assert_eq!(make_knot_vector(1, 1).unwrap().knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            make_knot_vector(3, 2).unwrap().knots(),
            &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]
        );
        assert!(make_knot_vector(0, 3).is_err());
        assert!(make_knot_vector(2, 0).is_err());
        assert_eq!(kv.basis_len(), 6);
    }

    #[test]
    fn basis_examples() {
        let hats = BSplineBasis::open_uniform(1, 4).unwrap();
        assert_eq!(hats.eval(2, 0.5, 0).unwrap(), 1.0);
        let quad = BSplineBasis::open_uniform(2, 4).unwrap();
        assert_eq!(quad.eval(0, 0.0, 0).unwrap(), 1.0);
        assert_eq!(quad.eval(1, 0.0, 0).unwrap(), 0.0);
        assert_eq!(quad.eval(quad.len() - 1, 1.0, 0).unwrap(), 1.0);
        assert!(quad.eval(quad.len(), 0.5, 0).is_err());
        assert!(quad.eval(0, 1.5, 0).is_err());
    }

    #[test]
    fn basis_partition_of_unity() {
        let cubic = BSplineBasis::open_uniform(3, 10).unwrap();
        let sum: f64 = (0..cubic.len()).map(|j| cubic.eval(j, 0.37, 0).unwrap()).sum();
        assert!(close(sum, 1.0, 1e-14));

        let mut rng = StdRng::seed_from_u64(3);
        for p in 1..=6 {
            for &n in &[1, 2, 5, 17, 64] {
                let basis = BSplineBasis::open_uniform(p, n).unwrap();
                for _ in 0..40 {
                    let t: f64 = rng.gen_range(0.0..1.0);
                    let sum: f64 = (0..basis.len()).map(|j| basis.value_unchecked(j, t)).sum();
                    assert!(close(sum, 1.0, 1e-12), "p={p} n={n} t={t}");
                }
                let at_one: f64 = (0..basis.len()).map(|j| basis.value_unchecked(j, 1.0)).sum();
                assert!(close(at_one, 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn interior_functions_vanish_at_endpoints() {
        for p in 1..=5 {
            let basis = BSplineBasis::open_uniform(p, 6).unwrap();
            for j in 1..basis.len() - 1 {
                assert_eq!(basis.eval(j, 0.0, 0).unwrap(), 0.0);
                assert_eq!(basis.eval(j, 1.0, 0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn interior_basis_matches_shifted_cardinal() {
        let mut rng = StdRng::seed_from_u64(5);
        for p in 1..=5 {
            let n = 12;
            let basis = BSplineBasis::open_uniform(p, n).unwrap();
            let card = CardinalSpline::new(p);
            for j in p..n {
                for _ in 0..20 {
                    let t: f64 = rng.gen_range(0.0..1.0);
                    let want = card.value(n as f64 * t - j as f64 + p as f64);
                    assert!(close(basis.value_unchecked(j, t), want, 1e-12));
                    let dwant = n as f64 * card.first_derivative(n as f64 * t - j as f64 + p as f64);
                    assert!(close(basis.derivative_unchecked(j, t), dwant, 1e-10));
                }
            }
        }
    }

    #[test]
    fn basis_derivative_matches_finite_differences() {
        let basis = BSplineBasis::open_uniform(3, 5).unwrap();
        let h = 1e-6;
        for j in 0..basis.len() {
            for &t in &[0.05, 0.33, 0.51, 0.91] {
                let fd = (basis.value_unchecked(j, t + h) - basis.value_unchecked(j, t - h)) / (2.0 * h);
                assert!(close(fd, basis.eval(j, t, 1).unwrap(), 1e-6), "j={j} t={t}");
            }
        }
    }
}
