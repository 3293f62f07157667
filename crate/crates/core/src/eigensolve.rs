//! The generalized symmetric eigenproblem `K u = λ M u`.
//!
//! `M = L Lᵀ` is factored in band form, the pencil is reduced to the standard
//! symmetric matrix `C = L⁻¹ K L⁻ᵀ`, and `C` is diagonalized densely.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::assembly::BandedSymmetricMatrix;
use crate::{Error, Result};

/// Relative guard above the symbol range before an eigenvalue counts as an outlier.
pub const OUTLIER_REL_TOL: f64 = 1e-10;
/// Relative gap below which two consecutive eigenvalues are flagged as a near tie.
pub const NEAR_TIE_REL_GAP: f64 = 1e-12;

/// Lower band Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    size: usize,
    bandwidth: usize,
    /// Row `i` holds `l[i][i - bandwidth], …, l[i][i]` (left padded with zeros).
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &BandedSymmetricMatrix) -> Result<Self> {
        let size = a.size();
        let bw = a.bandwidth();
        let width = bw + 1;
        let mut data = vec![0.0; size * width];
        // l[i][j] lives at data[i * width + (j + bw - i)]
        let at = |i: usize, j: usize| i * width + (j + bw - i);
        for j in 0..size {
            let lo = j.saturating_sub(bw);
            let mut pivot = a.get(j, j);
            for k in lo..j {
                let l = data[at(j, k)];
                pivot -= l * l;
            }
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let d = pivot.sqrt();
            data[at(j, j)] = d;
            for i in (j + 1)..=(j + bw).min(size.saturating_sub(1)) {
                let lo_i = i.saturating_sub(bw);
                let mut s = a.get(i, j);
                for k in lo_i.max(lo)..j {
                    s -= data[at(i, k)] * data[at(j, k)];
                }
                data[at(i, j)] = s / d;
            }
        }
        Ok(Self {
            size,
            bandwidth: bw,
            data,
        })
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bandwidth + 1) + (j + self.bandwidth - i)]
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for i in 0..self.size {
            let lo = i.saturating_sub(self.bandwidth);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l(i, k) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        for i in (0..self.size).rev() {
            let hi = (i + self.bandwidth).min(self.size - 1);
            let mut s = y[i];
            for k in (i + 1)..=hi {
                s -= self.l(k, i) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
    }
}

/// `C = L⁻¹ K L⁻ᵀ`, symmetrized.
fn reduce(chol: &BandCholesky, k: &BandedSymmetricMatrix) -> DMatrix<f64> {
    let n = k.size();
    let mut x = k.to_dense();
    for mut col in x.column_iter_mut() {
        chol.solve_lower(col.as_mut_slice());
    }
    // (L⁻¹ K L⁻ᵀ) = L⁻¹ (L⁻¹ K)ᵀ because K is symmetric
    let mut c = x.transpose();
    for mut col in c.column_iter_mut() {
        chol.solve_lower(col.as_mut_slice());
    }
    let ct = c.transpose();
    c += ct;
    c *= 0.5;
    debug_assert_eq!(c.nrows(), n);
    c
}

fn check_pencil(m: &BandedSymmetricMatrix, k: &BandedSymmetricMatrix) -> Result<()> {
    if m.size() != k.size() || m.size() == 0 {
        return Err(Error::InvalidArgument(format!(
            "mass and stiffness sizes must agree and be positive, got {} and {}",
            m.size(),
            k.size()
        )));
    }
    Ok(())
}

/// All eigenvalues of `M⁻¹ K`, ascending.
pub fn generalized_eigenvalues(m: &BandedSymmetricMatrix, k: &BandedSymmetricMatrix) -> Result<Vec<f64>> {
    check_pencil(m, k)?;
    let chol = BandCholesky::factor(m)?;
    let c = reduce(&chol, k);
    let mut values: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenpairs `(λ_k, u_k)` of `K u = λ M u`, ascending in `λ`, with `uᵀ M u = 1`.
pub fn generalized_eigenpairs(
    m: &BandedSymmetricMatrix,
    k: &BandedSymmetricMatrix,
) -> Result<Vec<(f64, Vec<f64>)>> {
    check_pencil(m, k)?;
    let chol = BandCholesky::factor(m)?;
    let eig = SymmetricEigen::new(reduce(&chol, k));
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&lambda, v)| {
            let mut u: Vec<f64> = v.iter().copied().collect();
            chol.solve_upper(&mut u);
            (lambda, u)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Sorted eigenvalues of the discretized operator with their normalized frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSpectrum {
    pub p: usize,
    pub n: usize,
    /// Number of interior basis functions `N = n + p - 2`.
    pub size: usize,
    /// `max Rg(ω)` used to classify outliers.
    pub max_range: f64,
    pub eigenvalues: Vec<f64>,
    /// `√(λ_k / n²)`.
    pub normalized_frequencies: Vec<f64>,
    pub outlier_count: usize,
    /// 1-based indices `k` with `λ_{k+1} - λ_k < 1e-12 λ_{k+1}`.
    pub near_ties: Vec<usize>,
}

impl DiscreteSpectrum {
    /// Builds the spectrum record from ascending eigenvalues.
    pub fn from_eigenvalues(p: usize, n: usize, eigenvalues: Vec<f64>, max_range: f64) -> Result<Self> {
        if let Some((i, &bad)) = eigenvalues.iter().enumerate().find(|(_, &l)| !(l > 0.0)) {
            return Err(Error::Numerical(format!(
                "eigenvalue {} = {bad:e} is not positive; the pencil or the solver is defective",
                i + 1
            )));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be sorted ascending".into(),
            ));
        }
        let n2 = (n * n) as f64;
        let normalized_frequencies = eigenvalues.iter().map(|l| (l / n2).sqrt()).collect();
        let threshold = max_range * (1.0 + OUTLIER_REL_TOL);
        let outlier_count = eigenvalues
            .iter()
            .rev()
            .take_while(|&&l| l / n2 > threshold)
            .count();
        let near_ties = eigenvalues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] < NEAR_TIE_REL_GAP * w[1])
            .map(|(i, _)| i + 1)
            .collect();
        Ok(Self {
            p,
            n,
            size: eigenvalues.len(),
            max_range,
            eigenvalues,
            normalized_frequencies,
            outlier_count,
            near_ties,
        })
    }

    /// `|I(p, n)| = N - OUT(p, n)`.
    pub fn inlier_count(&self) -> usize {
        self.size - self.outlier_count
    }

    /// Whether the 1-based index `k` is an outlier.
    pub fn is_outlier(&self, k: usize) -> bool {
        k > self.inlier_count()
    }

    /// `n⁻² λ_k` for the 1-based index `k`.
    pub fn normalized_eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k - 1] / (self.n * self.n) as f64
    }

    /// Whether `k` belongs to a flagged near-tie pair.
    pub fn in_near_tie(&self, k: usize) -> bool {
        self.near_ties.iter().any(|&t| t == k || t + 1 == k)
    }

    /// CSV with header `k,lambda,normalized_frequency,is_outlier`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,lambda,normalized_frequency,is_outlier")?;
        for (i, (l, f)) in self
            .eigenvalues
            .iter()
            .zip(&self.normalized_frequencies)
            .enumerate()
        {
            let k = i + 1;
            writeln!(out, "{k},{l:.16e},{f:.16e},{}", self.is_outlier(k))?;
        }
        Ok(())
    }
}

/// Solves the pencil and classifies outliers against `max_range = max Rg(ω)`.
pub fn solve_spectrum(
    m: &BandedSymmetricMatrix,
    k: &BandedSymmetricMatrix,
    p: usize,
    n: usize,
    max_range: f64,
) -> Result<DiscreteSpectrum> {
    let values = generalized_eigenvalues(m, k)?;
    DiscreteSpectrum::from_eigenvalues(p, n, values, max_range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_pair;
    use crate::reparam::Reparametrization;
    use std::f64::consts::PI;

    fn e1(theta: f64) -> f64 {
        6.0 * (1.0 - theta.cos()) / (2.0 + theta.cos())
    }

    #[test]
    fn closed_form_linear_spectrum() {
        let n = 8;
        let (m, k) = assemble_pair(1, n, &Reparametrization::identity()).unwrap();
        let spec = solve_spectrum(&m, &k, 1, n, 12.0).unwrap();
        assert_eq!(spec.size, 7);
        for (i, &l) in spec.eigenvalues.iter().enumerate() {
            let want = (n * n) as f64 * e1((i + 1) as f64 * PI / n as f64);
            assert!((l - want).abs() <= 1e-10 * want, "k={} {l} {want}", i + 1);
        }
        assert_eq!(spec.outlier_count, 0);
        assert!(spec.near_ties.is_empty());
    }

    #[test]
    fn identity_pencil() {
        let (m, _) = assemble_pair(3, 10, &Reparametrization::exp_convex(1.0, 0.5).unwrap()).unwrap();
        let values = generalized_eigenvalues(&m, &m).unwrap();
        assert!(values.iter().all(|l| (l - 1.0).abs() < 1e-10));
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let mut a = BandedSymmetricMatrix::zeros(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(0, 1, 2.0);
        a.set(2, 2, 1.0);
        match BandCholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cholesky_solves_round_trip() {
        let (m, _) = assemble_pair(2, 9, &Reparametrization::log_concave(1.0, 0.5).unwrap()).unwrap();
        let chol = BandCholesky::factor(&m).unwrap();
        let x: Vec<f64> = (0..m.size()).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut y = m.mul_vec(&x);
        chol.solve_lower(&mut y);
        chol.solve_upper(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn residuals_are_small() {
        let phi = Reparametrization::exp_convex(2.0, 0.3).unwrap();
        for p in 1..=3 {
            let (m, k) = assemble_pair(p, 40, &phi).unwrap();
            let norm = |a: &BandedSymmetricMatrix| a.to_dense().norm();
            let (nm, nk) = (norm(&m), norm(&k));
            for (lambda, u) in generalized_eigenpairs(&m, &k).unwrap() {
                let ku = k.mul_vec(&u);
                let mu = m.mul_vec(&u);
                let r: f64 = ku
                    .iter()
                    .zip(&mu)
                    .map(|(a, b)| (a - lambda * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let unorm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(
                    r <= 1e-9 * (nk + lambda.abs() * nm) * unorm,
                    "p={p} lambda={lambda}"
                );
            }
        }
    }

    #[test]
    fn rejects_non_positive_eigenvalues() {
        assert!(matches!(
            DiscreteSpectrum::from_eigenvalues(1, 4, vec![-1.0, 2.0, 3.0], 12.0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn outliers_and_ties_are_classified() {
        let spec = DiscreteSpectrum::from_eigenvalues(1, 1, vec![1.0, 1.0, 13.0], 12.0).unwrap();
        assert_eq!(spec.outlier_count, 1);
        assert_eq!(spec.inlier_count(), 2);
        assert!(spec.is_outlier(3));
        assert_eq!(spec.near_ties, vec![1]);
        assert!(spec.in_near_tie(2));
        assert!(!spec.in_near_tie(3));
    }

    #[test]
    fn csv_layout() {
        let spec = DiscreteSpectrum::from_eigenvalues(1, 2, vec![4.0], 12.0).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,lambda,normalized_frequency,is_outlier\n1,4.0000000000000000e0,1.0000000000000000e0,false\n"
        );
    }
}
