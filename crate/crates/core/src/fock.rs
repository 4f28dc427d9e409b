//! Exact symbolic algebra for normal-ordered polynomials in a single bosonic
//! mode, plus their realization as dense matrices on a truncated number basis.
//!
//! A [`NoPoly`] stores a finite map `(j, k) -> c` meaning `c * adag^j a^k`,
//! with every stored term already normal-ordered (all daggered factors to the
//! left). Products are reduced with the single-mode identity
//!
//! ```text
//! a^q adag^r = sum_i  C(q,i) C(r,i) i!  adag^(r-i) a^(q-i)
//! ```
//!
//! whose reordering factors are computed in exact integer arithmetic before
//! scaling into the complex coefficients, so normal ordering itself commits
//! no roundoff beyond the coefficient multiplies.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Normal-ordered polynomial in a single bosonic mode.
///
/// Canonical form: no two entries share a key and zero coefficients are never
/// stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoPoly {
    terms: BTreeMap<(u32, u32), Complex64>,
}

fn binom(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

impl NoPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The identity operator (the constant 1).
    pub fn identity() -> Self {
        Self::monomial(0, 0, Complex64::new(1.0, 0.0))
    }

    /// The annihilation operator `a`.
    pub fn annihilation() -> Self {
        Self::monomial(0, 1, Complex64::new(1.0, 0.0))
    }

    /// The creation operator `adag`.
    pub fn creation() -> Self {
        Self::monomial(1, 0, Complex64::new(1.0, 0.0))
    }

    /// The number operator `adag a`.
    pub fn number() -> Self {
        Self::monomial(1, 1, Complex64::new(1.0, 0.0))
    }

    /// `c * adag^j a^k`.
    pub fn monomial(j: u32, k: u32, c: Complex64) -> Self {
        let mut terms = BTreeMap::new();
        if c != Complex64::ZERO {
            terms.insert((j, k), c);
        }
        Self { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = ((u32, u32), Complex64)>>(iter: I) -> Self {
        let mut p = Self::zero();
        for ((j, k), c) in iter {
            p.accumulate(j, k, c);
        }
        p
    }

    fn accumulate(&mut self, j: u32, k: u32, c: Complex64) {
        if c == Complex64::ZERO {
            return;
        }
        let entry = self.terms.entry((j, k)).or_insert(Complex64::ZERO);
        *entry += c;
        if *entry == Complex64::ZERO {
            self.terms.remove(&(j, k));
        }
    }

    /// Iterate terms in (dagger power, annihilation power) order.
    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    pub fn coeff(&self, j: u32, k: u32) -> Complex64 {
        self.terms.get(&(j, k)).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn constant_part(&self) -> Complex64 {
        self.coeff(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(j, k)| j + k).max().unwrap_or(0)
    }

    /// All terms of total degree `d`.
    pub fn degree_part(&self, d: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(&(j, k), _)| j + k == d)
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((j, k), c) in other.terms() {
            out.accumulate(j, k, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((j, k), c) in other.terms() {
            out.accumulate(j, k, -c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.terms().map(|(k, c)| (k, c * s)))
    }

    /// Hermitian adjoint: `(j, k) -> (k, j)` with conjugated coefficient.
    /// An involution, and an anti-homomorphism for [`NoPoly::no_product`].
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(&(j, k), &c)| ((k, j), c.conj()))
                .collect(),
        }
    }

    /// Normal-ordered operator product `self * other`.
    pub fn no_product(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(pj, pk), &pc) in &self.terms {
            for (&(qj, qk), &qc) in &other.terms {
                let cc = pc * qc;
                for i in 0..=pk.min(qj) {
                    let factor = binom(pk, i) * binom(qj, i) * factorial(i);
                    out.accumulate(pj + qj - i, pk + qk - i, cc * factor as f64);
                }
            }
        }
        out
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.no_product(other).sub(&other.no_product(self))
    }

    /// Largest coefficient modulus; convenient as a coefficient-level norm.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Number-basis realization. `a` lowers with factor sqrt(n), `adag`
    /// raises with sqrt(n+1).
    pub fn to_matrix(&self, dim: usize) -> Result<FockMatrix> {
        let degree = self.degree() as usize;
        if dim < degree + 2 {
            return Err(CoreError::TruncationTooSmall { dim, degree });
        }
        let mut data = DMatrix::<Complex64>::zeros(dim, dim);
        for (&(j, k), &c) in &self.terms {
            let (j, k) = (j as usize, k as usize);
            for col in k..dim {
                let row = col - k + j;
                if row >= dim {
                    continue;
                }
                let mut amp = 1.0f64;
                let mut n = col;
                for _ in 0..k {
                    amp *= (n as f64).sqrt();
                    n -= 1;
                }
                for _ in 0..j {
                    amp *= (n as f64 + 1.0).sqrt();
                    n += 1;
                }
                data[(row, col)] += c * amp;
            }
        }
        Ok(FockMatrix { data })
    }
}

/// Dense complex matrix on a truncated number basis.
///
/// Truncation corrupts the top `degree` rows/columns of any identity that
/// holds in the full space, so comparisons go through the interior views.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    data: DMatrix<Complex64>,
}

impl FockMatrix {
    pub fn from_dmatrix(data: DMatrix<Complex64>) -> Result<Self> {
        if !data.is_square() {
            return Err(CoreError::DimMismatch(data.nrows(), data.ncols()));
        }
        Ok(Self { data })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
        }
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimMismatch(self.dim(), other.dim()));
        }
        Ok(Self {
            data: &self.data * &other.data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimMismatch(self.dim(), other.dim()));
        }
        Ok(Self {
            data: &self.data - &other.data,
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            data: self.data.map(|z| z * s),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    /// Max |entry| over the interior square that excludes the top `guard`
    /// rows and columns.
    pub fn interior_max_abs(&self, guard: usize) -> f64 {
        let n = self.dim().saturating_sub(guard);
        let mut best = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                best = best.max(self.data[(i, j)].norm());
            }
        }
        best
    }

    /// Largest singular value of the interior square (top `guard` band
    /// excluded), via the largest eigenvalue of M^dag M.
    pub fn interior_sigma_max(&self, guard: usize) -> f64 {
        let n = self.dim().saturating_sub(guard);
        let sub = self.data.view((0, 0), (n, n)).into_owned();
        crate::linalg::sigma_max(&sub)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.data - self.data.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_commutator_reorders() {
        // a * adag = adag a + 1
        let p = NoPoly::annihilation().no_product(&NoPoly::creation());
        assert_eq!(p.coeff(1, 1), c(1.0, 0.0));
        assert_eq!(p.coeff(0, 0), c(1.0, 0.0));
        assert_eq!(p.terms().count(), 2);
    }

    #[test]
    fn number_squared() {
        // (adag a)(adag a) = adag^2 a^2 + adag a
        let n = NoPoly::number();
        let p = n.no_product(&n);
        assert_eq!(p.coeff(2, 2), c(1.0, 0.0));
        assert_eq!(p.coeff(1, 1), c(1.0, 0.0));
        assert_eq!(p.terms().count(), 2);

        // matrix oracle at dim 16, read coefficients off the interior
        let m = n.to_matrix(16).unwrap();
        let prod = m.product(&m).unwrap();
        let sym = p.to_matrix(16).unwrap();
        assert!(prod.sub(&sym).unwrap().interior_max_abs(4) < 1e-12);
    }

    #[test]
    fn identity_is_neutral() {
        let p = NoPoly::from_terms([((2, 1), c(1.5, -0.5)), ((0, 3), c(0.0, 2.0))]);
        assert_eq!(p.no_product(&NoPoly::identity()), p);
        assert_eq!(NoPoly::identity().no_product(&p), p);
    }

    #[test]
    fn basic_commutators() {
        let a = NoPoly::annihilation();
        let ad = NoPoly::creation();
        assert_eq!(a.commutator(&ad), NoPoly::identity());
        // [a, adag a] = a
        assert_eq!(a.commutator(&NoPoly::number()), a);
    }

    #[test]
    fn adjoint_involution_and_conjugation() {
        let p = NoPoly::from_terms([((2, 1), c(1.0, 2.0)), ((0, 3), c(-0.5, 0.25))]);
        assert_eq!(p.adjoint().adjoint(), p);
        assert_eq!(p.adjoint().coeff(1, 2), c(1.0, -2.0));
        assert_eq!(NoPoly::annihilation().adjoint(), NoPoly::creation());
    }

    #[test]
    fn ladder_matrices() {
        // adag a at dim 4 -> diag(0,1,2,3)
        let n = NoPoly::number().to_matrix(4).unwrap();
        for i in 0..4 {
            assert!((n.entry(i, i) - c(i as f64, 0.0)).norm() < 1e-15);
        }
        // a at dim 3: (0,1) -> 1, (1,2) -> sqrt(2)
        let a = NoPoly::annihilation().to_matrix(3).unwrap();
        assert!((a.entry(0, 1) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a.entry(1, 2) - c(2.0f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(a.entry(0, 0), Complex64::ZERO);
        assert_eq!(a.entry(2, 2), Complex64::ZERO);
    }

    #[test]
    fn identity_polynomial_realizes_as_identity_matrix() {
        let m = NoPoly::identity().to_matrix(6).unwrap();
        assert_eq!(m, FockMatrix::identity(6));
    }

    #[test]
    fn to_matrix_rejects_small_dim() {
        let p = NoPoly::monomial(3, 1, c(1.0, 0.0));
        assert!(matches!(
            p.to_matrix(5),
            Err(CoreError::TruncationTooSmall { dim: 5, degree: 4 })
        ));
    }

    #[test]
    fn adjoint_matrix_is_conjugate_transpose() {
        let p = NoPoly::from_terms([((3, 0), c(0.3, 1.0)), ((1, 2), c(-2.0, 0.7))]);
        let lhs = p.adjoint().to_matrix(32).unwrap();
        let rhs = p.to_matrix(32).unwrap().adjoint();
        assert!(lhs.sub(&rhs).unwrap().interior_max_abs(3) < 1e-13);
    }

    #[test]
    fn product_matches_matrix_product_on_interior() {
        // random-ish fixed polynomials of degree <= 3 at N = 32
        let p = NoPoly::from_terms([
            ((0, 3), c(0.8, -0.1)),
            ((2, 1), c(-0.4, 0.9)),
            ((1, 0), c(0.2, 0.2)),
        ]);
        let q = NoPoly::from_terms([((3, 0), c(-0.6, 0.5)), ((1, 1), c(1.1, 0.0))]);
        let n = 32;
        let guard = (p.degree() + q.degree()) as usize;
        let sym = p.no_product(&q).to_matrix(n).unwrap();
        let num = p
            .to_matrix(n)
            .unwrap()
            .product(&q.to_matrix(n).unwrap())
            .unwrap();
        assert!(sym.sub(&num).unwrap().interior_max_abs(guard) < 1e-10);
    }

    #[test]
    fn quartic_commutator_with_annihilator() {
        // [a, H4] for H4 = (1/4) sum_j C(4,j) (-us)^j u^(4-j) adag^j a^(4-j)
        // must be the cubic with coefficients (us^4, -3 us^3 u, 3 (us u)^2, -us u^3)
        let u = c(0.6, -0.35);
        let us = u.conj();
        let mut h4 = NoPoly::zero();
        for j in 0..=4u32 {
            let coeff = (-us).powu(j) * u.powu(4 - j) * binom(4, j) as f64 * 0.25;
            h4 = h4.add(&NoPoly::monomial(j, 4 - j, coeff));
        }
        let com = NoPoly::annihilation().commutator(&h4);
        let uu = us * u;
        let expected = [
            (3u32, 0u32, us.powu(4)),
            (2, 1, -3.0 * us.powu(3) * u),
            (1, 2, 3.0 * uu * uu),
            (0, 3, -us * u.powu(3)),
        ];
        for (j, k, v) in expected {
            assert!((com.coeff(j, k) - v).norm() < 1e-14, "({j},{k})");
        }
        assert_eq!(com.degree(), 3);
        assert_eq!(com.terms().count(), 4);
    }
}
