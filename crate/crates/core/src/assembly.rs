//! Mass and stiffness matrices of the reparametrized Galerkin discretization
//! over the interior basis `N_1^p, …, N_{p+n-2}^p`.
//!
//! ```text
//! M_ij = ∫ φ'(x) N_i(x) N_j(x) dx,     K_ij = ∫ N_i'(x) N_j'(x) / φ'(x) dx
//! ```

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::bspline::BSplineBasis;
use crate::quadrature::GaussLegendre;
use crate::reparam::Reparametrization;
use crate::{Error, Result};

/// A symmetric matrix stored as its upper band `0 ≤ j - i ≤ bandwidth`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetricMatrix {
    size: usize,
    bandwidth: usize,
    /// Row `i` holds `a[i][i], a[i][i+1], …, a[i][i+bandwidth]`.
    data: Vec<f64>,
}

impl BandedSymmetricMatrix {
    pub fn zeros(size: usize, bandwidth: usize) -> Self {
        Self {
            size,
            bandwidth,
            data: vec![0.0; size * (bandwidth + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        assert!(
            c < self.size,
            "index ({i}, {j}) out of bounds for size {}",
            self.size
        );
        (c - r <= self.bandwidth).then(|| r * (self.bandwidth + 1) + (c - r))
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets `(i, j)` and `(j, i)`.
    ///
    /// # Panics
    /// If `|i - j|` exceeds the bandwidth.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += value;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size);
        let mut y = vec![0.0; self.size];
        for i in 0..self.size {
            let hi = (i + self.bandwidth).min(self.size - 1);
            for j in i..=hi {
                let a = self.data[i * (self.bandwidth + 1) + (j - i)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Writes every entry inside the band as `i j value` lines (1-based indices,
    /// both triangles, 17 significant digits).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.size {
            let lo = i.saturating_sub(self.bandwidth);
            let hi = (i + self.bandwidth).min(self.size - 1);
            for j in lo..=hi {
                writeln!(out, "{} {} {:.16e}", i + 1, j + 1, self.get(i, j))?;
            }
        }
        Ok(())
    }
}

fn check_sizes(p: usize, n: usize) -> Result<()> {
    if p < 1 || n < 2 || n + p < 3 {
        return Err(Error::InvalidArgument(format!(
            "assembly needs p >= 1, n >= 2 and n + p - 2 >= 1, got p = {p}, n = {n}"
        )));
    }
    Ok(())
}

/// Mass and stiffness matrices in one sweep over the knot intervals.
pub fn assemble_pair(
    p: usize,
    n: usize,
    phi: &Reparametrization,
) -> Result<(BandedSymmetricMatrix, BandedSymmetricMatrix)> {
    check_sizes(p, n)?;
    let basis = BSplineBasis::open_uniform(p, n)?;
    let size = n + p - 2;
    let rule = GaussLegendre::new(p + 3);
    let mut mass = BandedSymmetricMatrix::zeros(size, p);
    let mut stiff = BandedSymmetricMatrix::zeros(size, p);
    let last_interior = p + n - 2;
    let mut values = vec![0.0; p + 1];
    let mut derivs = vec![0.0; p + 1];
    for e in 0..n {
        let a = e as f64 / n as f64;
        let b = (e + 1) as f64 / n as f64;
        // N_e, …, N_{e+p} are the functions alive on [a, b]
        let active: Vec<usize> = (e..=e + p).collect();
        for (x, w) in rule.mapped(a, b) {
            let d = phi.deriv1(x);
            if !(d > 0.0) {
                return Err(Error::InvalidReparametrization(format!(
                    "phi' = {d} is not positive at quadrature node x = {x}"
                )));
            }
            for (slot, &j) in active.iter().enumerate() {
                values[slot] = basis.value_unchecked(j, x);
                derivs[slot] = basis.derivative_unchecked(j, x);
            }
            for (si, &gi) in active.iter().enumerate() {
                if gi == 0 || gi > last_interior {
                    continue;
                }
                for (sj, &gj) in active.iter().enumerate().skip(si) {
                    if gj > last_interior {
                        continue;
                    }
                    mass.add(gi - 1, gj - 1, w * d * values[si] * values[sj]);
                    stiff.add(gi - 1, gj - 1, w * derivs[si] * derivs[sj] / d);
                }
            }
        }
    }
    Ok((mass, stiff))
}

/// `M_ij = ∫ φ' N_i N_j`.
pub fn assemble_mass(p: usize, n: usize, phi: &Reparametrization) -> Result<BandedSymmetricMatrix> {
    assemble_pair(p, n, phi).map(|(m, _)| m)
}

/// `K_ij = ∫ N_i' N_j' / φ'`.
pub fn assemble_stiffness(p: usize, n: usize, phi: &Reparametrization) -> Result<BandedSymmetricMatrix> {
    assemble_pair(p, n, phi).map(|(_, k)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::CardinalSpline;
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn band_storage_is_symmetric() {
        let mut a = BandedSymmetricMatrix::zeros(4, 1);
        a.set(1, 0, 3.0);
        a.add(0, 1, 1.0);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 0.0, 0.0]), vec![4.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_sizes() {
        let id = Reparametrization::identity();
        assert!(assemble_mass(0, 4, &id).is_err());
        assert!(assemble_mass(1, 1, &id).is_err());
    }

    #[test]
    fn linear_closed_form() {
        let n = 4;
        let h = 1.0 / n as f64;
        let (m, k) = assemble_pair(1, n, &Reparametrization::identity()).unwrap();
        assert_eq!(m.size(), 3);
        for i in 0..3 {
            assert!((m.get(i, i) - h * 2.0 / 3.0).abs() < 1e-15);
            assert!((k.get(i, i) - 2.0 / h).abs() < 1e-12);
            if i + 1 < 3 {
                assert!((m.get(i, i + 1) - h / 6.0).abs() < 1e-15);
                assert!((k.get(i, i + 1) + 1.0 / h).abs() < 1e-12);
            }
        }
        // the middle row does not touch the boundary functions
        let row: f64 = (0..3).map(|j| m.get(1, j)).sum();
        assert!((row - h).abs() < 1e-15);
    }

    #[test]
    fn interior_entries_match_cardinal_convolution() {
        // ∫ 𝒩_p(x) 𝒩_p(x + d) dx = 𝒩_{2p+1}(p + 1 + d)
        let id = Reparametrization::identity();
        for p in 1..=4 {
            let n = 16;
            let h = 1.0 / n as f64;
            let spline = CardinalSpline::new(2 * p + 1);
            let (m, k) = assemble_pair(p, n, &id).unwrap();
            // matrix row i is N_{i+1}; rows p-1 ..= n-2-p couple only cardinal translates
            for i in (p - 1)..(n - 1 - p) {
                for d in 0..=p {
                    let arg = (p + 1 + d) as f64;
                    let want_m = h * spline.value(arg);
                    let want_k = -spline.second_derivative(arg) / h;
                    assert!((m.get(i, i + d) - want_m).abs() < 1e-13, "p={p} i={i} d={d}");
                    assert!(
                        (k.get(i, i + d) - want_k).abs() < 1e-13 * n as f64,
                        "p={p} i={i} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn stiffness_rows_away_from_boundary_sum_to_zero() {
        let phi = Reparametrization::exp_convex(1.0, 0.5).unwrap();
        for p in 1..=3 {
            let n = 20;
            let k = assemble_stiffness(p, n, &phi).unwrap();
            for i in p..(n - 2) {
                let lo = i.saturating_sub(p);
                let hi = (i + p).min(k.size() - 1);
                let row: f64 = (lo..=hi).map(|j| k.get(i, j)).sum();
                assert!(row.abs() < 1e-10, "p={p} row {i} sums to {row}");
            }
        }
    }

    #[test]
    fn matches_adaptive_oracle() {
        let p = 2;
        let n = 8;
        let phi = Reparametrization::exp_convex(1.0, 0.5).unwrap();
        let (m, k) = assemble_pair(p, n, &phi).unwrap();
        let basis = BSplineBasis::open_uniform(p, n).unwrap();
        for i in 0..m.size() {
            for j in i..(i + p + 1).min(m.size()) {
                let (gi, gj) = (i + 1, j + 1);
                let mut om = 0.0;
                let mut ok = 0.0;
                for e in 0..n {
                    let a = e as f64 / n as f64;
                    let b = (e + 1) as f64 / n as f64;
                    om += adaptive_simpson(
                        |x| phi.deriv1(x) * basis.value_unchecked(gi, x) * basis.value_unchecked(gj, x),
                        a,
                        b,
                        1e-14,
                    );
                    ok += adaptive_simpson(
                        |x| {
                            basis.derivative_unchecked(gi, x) * basis.derivative_unchecked(gj, x)
                                / phi.deriv1(x)
                        },
                        a,
                        b,
                        1e-13,
                    );
                }
                assert!((m.get(i, j) - om).abs() < 1e-10, "M[{i},{j}]");
                assert!((k.get(i, j) - ok).abs() < 1e-10, "K[{i},{j}]");
            }
        }
    }

    #[test]
    fn band_beyond_degree_is_zero() {
        let phi = Reparametrization::log_concave(1.0, 0.5).unwrap();
        for p in 1..=4 {
            let (m, k) = assemble_pair(p, 12, &phi).unwrap();
            let (dm, dk) = (m.to_dense(), k.to_dense());
            for i in 0..m.size() {
                for j in 0..m.size() {
                    if i.abs_diff(j) > p {
                        assert_eq!(dm[(i, j)], 0.0);
                        assert_eq!(dk[(i, j)], 0.0);
                    }
                }
            }
            assert_eq!(dm, dm.transpose());
        }
    }

    #[test]
    fn scaled_toeplitz_part_is_independent_of_n() {
        let id = Reparametrization::identity();
        let p = 3;
        let mut reference: Option<(Vec<f64>, Vec<f64>)> = None;
        for n in [8usize, 16, 32] {
            let (m, k) = assemble_pair(p, n, &id).unwrap();
            let i = p - 1;
            let nf = n as f64;
            let rm: Vec<f64> = (0..=p).map(|d| nf * m.get(i, i + d)).collect();
            let rk: Vec<f64> = (0..=p).map(|d| k.get(i, i + d) / nf).collect();
            if let Some((m0, k0)) = &reference {
                for d in 0..=p {
                    assert!((rm[d] - m0[d]).abs() < 1e-13);
                    assert!((rk[d] - k0[d]).abs() < 1e-12);
                }
            } else {
                reference = Some((rm, rk));
            }
        }
    }

    #[test]
    fn triplet_dump_lists_band() {
        let (m, _) = assemble_pair(1, 4, &Reparametrization::identity()).unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
        assert_eq!(&first[..2], &["1", "1"]);
        assert!((first[2].parse::<f64>().unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(first[2].len(), "1.6666666666666666e-1".len());
    }
}
