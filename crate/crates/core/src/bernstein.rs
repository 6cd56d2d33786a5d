//! Homogeneous polynomials on the simplex in the Bernstein basis.
//!
//! A polynomial of degree `k` on the simplex has a unique homogeneous
//! extension of degree `k` in the `d` full coordinates; its Bernstein
//! coefficients `c_a` satisfy `p = sum_a c_a (k! / a!) mu^a` over `|a| = k`.
//! For the generator of a simplex diffusion this basis has two useful
//! properties: the generator matrix is a rate matrix (nonnegative
//! off-diagonal entries, zero row sums), so `exp(t A)` is a stochastic matrix
//! and propagation is numerically stable at high degree, and the polynomial
//! is bounded by the extreme coefficients.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::checked_basis_size;
use crate::linalg::expm;
use crate::model_params::AdmissibleSimplexParameterSet;
use crate::simplex_poly::{
    check_simplex_point, multinomial_f64, reduce, Basis, FullTerm, SimplexPolynomial, MAX_DEGREE,
};

/// All exponent vectors of length `d` and total degree exactly `k`, in the
/// graded order restricted to degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousBasis {
    d: usize,
    k: usize,
    offset: usize,
    indices: Vec<Vec<u32>>,
    /// `k! / a!` per index.
    weights: Vec<f64>,
    /// Degree `k - 1` indices `g` with `(k-1)! / g!`, and the ranks of
    /// `g + e_i` for each `i`, laid out as `up[j * d + i]`.
    lower: Vec<(Vec<u32>, f64)>,
    up: Vec<usize>,
}

impl HomogeneousBasis {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("dimension d = {d} must be >= 2")));
        }
        if k > MAX_DEGREE {
            return Err(Error::DegreeCap {
                degree: k,
                cap: MAX_DEGREE,
            });
        }
        // exact degree k in d variables has as many elements as degree <= k in d - 1
        checked_basis_size(d - 1, k)?;
        let full = Basis::new(d, k);
        let offset = Basis::block_start(d, k);
        let indices = full.indices()[offset..]
            .iter()
            .map(|m| m.exponents().to_vec())
            .collect::<Vec<_>>();
        let weights = indices.iter().map(|a| multinomial_f64(a)).collect();
        let (mut lower, mut up) = (Vec::new(), Vec::new());
        if k > 0 {
            let below = Basis::new(d, k - 1);
            let mut e = vec![0u32; d];
            for g in &below.indices()[Basis::block_start(d, k - 1)..] {
                let g = g.exponents();
                lower.push((g.to_vec(), multinomial_f64(g)));
                for i in 0..d {
                    e.copy_from_slice(g);
                    e[i] += 1;
                    up.push(Basis::rank(&e) - offset);
                }
            }
        }
        Ok(Self {
            d,
            k,
            offset,
            indices,
            weights,
            lower,
            up,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn rank(&self, a: &[u32]) -> usize {
        Basis::rank(a) - self.offset
    }
}

/// Polynomial on the simplex stored by its Bernstein coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinPolynomial {
    basis: Arc<HomogeneousBasis>,
    coeffs: Vec<f64>,
}

impl BernsteinPolynomial {
    pub fn new(basis: Arc<HomogeneousBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    /// Converts homogeneous monomial coefficients `a` (of `mu^alpha`, indexed
    /// like `basis`) to Bernstein coefficients `a_alpha alpha! / k!`.
    pub fn from_monomials(basis: Arc<HomogeneousBasis>, monomial: &[f64]) -> Result<Self> {
        if monomial.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: monomial.len(),
            });
        }
        let coeffs = basis
            .indices()
            .iter()
            .zip(monomial)
            .map(|(a, &m)| m / multinomial_f64(a))
            .collect();
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &HomogeneousBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn d(&self) -> usize {
        self.basis.d
    }

    pub fn degree(&self) -> usize {
        self.basis.k
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<f64> {
        check_simplex_point(mu, self.d())?;
        Ok(eval_bernstein(&self.basis, &self.coeffs, mu))
    }

    /// Gradient in full coordinates with the last component shifted to 0, so
    /// entries `0..d-1` are the partial derivatives of the reduced
    /// representative.
    pub fn gradient_full(&self, mu: &[f64]) -> Result<Vec<f64>> {
        check_simplex_point(mu, self.d())?;
        Ok(gradient_bernstein(&self.basis, &self.coeffs, mu))
    }

    /// Same function in the reduced monomial representation.
    pub fn to_simplex(&self) -> Result<SimplexPolynomial> {
        let terms: Vec<FullTerm> = self
            .basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(a, &c)| FullTerm {
                exps: a.clone(),
                coef: c * multinomial_f64(a),
            })
            .collect();
        reduce(&terms, self.d(), self.degree())
    }
}

/// `sum_a c_a k!/a! mu^a`, no simplex check.
pub(crate) fn eval_bernstein(basis: &HomogeneousBasis, coeffs: &[f64], mu: &[f64]) -> f64 {
    let k = basis.k;
    let powers = full_power_table(mu, k);
    basis
        .indices()
        .iter()
        .zip(coeffs)
        .zip(&basis.weights)
        .filter(|((_, c), _)| **c != 0.0)
        .map(|((a, c), w)| c * w * monomial(&powers, a, k))
        .sum()
}

pub(crate) fn gradient_bernstein(basis: &HomogeneousBasis, coeffs: &[f64], mu: &[f64]) -> Vec<f64> {
    let d = basis.d;
    let k = basis.k;
    let mut grad = vec![0.0; d];
    if k == 0 {
        return grad;
    }
    // D_i p = k sum_{|g| = k-1} c_{g + e_i} B^{k-1}_g
    let powers = full_power_table(mu, k - 1);
    for (j, (g, w)) in basis.lower.iter().enumerate() {
        let bg = w * monomial(&powers, g, k - 1);
        if bg == 0.0 {
            continue;
        }
        for i in 0..d {
            grad[i] += coeffs[basis.up[j * d + i]] * bg;
        }
    }
    let kf = k as f64;
    let last = grad[d - 1];
    for v in grad.iter_mut() {
        *v = kf * (*v - last);
    }
    grad
}

fn full_power_table(mu: &[f64], k: usize) -> Vec<f64> {
    let mut powers = vec![1.0; mu.len() * (k + 1)];
    for (v, &m) in mu.iter().enumerate() {
        for p in 1..=k {
            powers[v * (k + 1) + p] = powers[v * (k + 1) + p - 1] * m;
        }
    }
    powers
}

#[inline]
fn monomial(powers: &[f64], a: &[u32], k: usize) -> f64 {
    a.iter()
        .enumerate()
        .map(|(v, &e)| powers[v * (k + 1) + e as usize])
        .product()
}

/// Homogeneous polynomial of fixed degree, stored by monomial coefficients.
/// Used to build payoff polynomials before converting them to Bernstein form.
#[derive(Debug, Clone)]
pub struct HomogeneousPolynomial {
    basis: Arc<HomogeneousBasis>,
    coeffs: Vec<f64>,
}

impl HomogeneousPolynomial {
    pub fn zero(d: usize, k: usize) -> Result<Self> {
        let basis = Arc::new(HomogeneousBasis::new(d, k)?);
        let coeffs = vec![0.0; basis.len()];
        Ok(Self { basis, coeffs })
    }

    /// `(mu_1 + ... + mu_d)^k`, equal to 1 on the simplex.
    pub fn unit(d: usize, k: usize) -> Result<Self> {
        let mut p = Self::zero(d, k)?;
        for (c, a) in p.coeffs.iter_mut().zip(p.basis.indices()) {
            *c = multinomial_f64(a);
        }
        Ok(p)
    }

    /// `mu_1 mu_2 ... mu_d`.
    pub fn product_all(d: usize) -> Result<Self> {
        let mut p = Self::zero(d, d)?;
        let idx = p.basis.rank(&vec![1; d]);
        p.coeffs[idx] = 1.0;
        Ok(p)
    }

    pub fn basis(&self) -> &Arc<HomogeneousBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.basis.k
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::InvalidArgument(
                "homogeneous polynomials of different degree".into(),
            ));
        }
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        let d = self.basis.d;
        let mut out = Self::zero(d, self.degree() + other.degree())?;
        let mut e = vec![0u32; d];
        for (a, &ca) in self.basis.indices().iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (b, &cb) in other.basis.indices().iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                for v in 0..d {
                    e[v] = a[v] + b[v];
                }
                let r = out.basis.rank(&e);
                out.coeffs[r] += ca * cb;
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let d = self.basis.d;
        let mut result = Self::unit(d, 0)?;
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.multiply(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.multiply(&base)?;
            }
        }
        Ok(result)
    }

    pub fn to_bernstein(&self) -> Result<BernsteinPolynomial> {
        BernsteinPolynomial::from_monomials(Arc::clone(&self.basis), &self.coeffs)
    }
}

/// Generator of a simplex diffusion on homogeneous degree `k` polynomials in
/// the Bernstein basis. Acting on coefficient vectors, `A c` gives the
/// Bernstein coefficients of `G p`.
#[derive(Debug, Clone)]
pub struct BernsteinGenerator {
    basis: Arc<HomogeneousBasis>,
    a: DMatrix<f64>,
}

pub fn build_bernstein_generator(
    params: &AdmissibleSimplexParameterSet,
    k: usize,
) -> Result<BernsteinGenerator> {
    let d = params.d();
    let basis = Arc::new(HomogeneousBasis::new(d, k)?);
    let n = basis.len();
    let gamma = params.gamma();
    // m[(alpha, target)] collects G B_alpha = sum m B_target; A is its transpose
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0u32; d];
    for (col, alpha) in basis.indices().iter().enumerate() {
        let af: Vec<f64> = alpha.iter().map(|&x| f64::from(x)).collect();
        for i in 0..d {
            if alpha[i] == 0 {
                continue;
            }
            for j in 0..d {
                let v = params.face_drift(i, j);
                if v == 0.0 {
                    continue;
                }
                e.copy_from_slice(alpha);
                e[i] -= 1;
                e[j] += 1;
                let w = if i == j { af[j] } else { af[j] + 1.0 };
                a[(col, basis.rank(&e))] += v * w;
            }
        }
        for i in 0..d {
            for l in (i + 1)..d {
                let g = gamma[(i, l)];
                if g == 0.0 {
                    continue;
                }
                if alpha[i] >= 1 {
                    e.copy_from_slice(alpha);
                    e[i] -= 1;
                    e[l] += 1;
                    a[(col, basis.rank(&e))] += 0.5 * g * (af[i] - 1.0) * (af[l] + 1.0);
                }
                if alpha[l] >= 1 {
                    e.copy_from_slice(alpha);
                    e[i] += 1;
                    e[l] -= 1;
                    a[(col, basis.rank(&e))] += 0.5 * g * (af[l] - 1.0) * (af[i] + 1.0);
                }
                a[(col, col)] -= g * af[i] * af[l];
            }
        }
    }
    Ok(BernsteinGenerator {
        basis,
        a: a.transpose(),
    })
}

impl BernsteinGenerator {
    pub fn basis(&self) -> &Arc<HomogeneousBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!("time {t} must be finite and >= 0")));
        }
        expm(&(&self.a * t))
    }

    pub fn evolve(&self, t: f64, p: &BernsteinPolynomial) -> Result<BernsteinPolynomial> {
        if p.basis != self.basis {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: p.coeffs.len(),
            });
        }
        let out = self.propagator(t)? * DVector::from_column_slice(&p.coeffs);
        BernsteinPolynomial::new(Arc::clone(&self.basis), out.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_generator;
    use crate::model_params::{vsm_to_params, VsmSpec};

    fn params3() -> AdmissibleSimplexParameterSet {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.3, 0.4, 0.0, 0.2, 0.5, 0.05, 0.0]);
        let gamma = DMatrix::from_row_slice(3, 3, &[0.0, 0.7, 1.3, 0.7, 0.0, 0.4, 1.3, 0.4, 0.0]);
        AdmissibleSimplexParameterSet::from_drift_matrix(&v, gamma).unwrap()
    }

    #[test]
    fn basis_counts() {
        let b = HomogeneousBasis::new(3, 4).unwrap();
        assert_eq!(b.len(), 15);
        for (i, a) in b.indices().iter().enumerate() {
            assert_eq!(b.rank(a), i);
            assert_eq!(a.iter().sum::<u32>(), 4);
        }
    }

    #[test]
    fn rate_matrix_structure() {
        for k in [1, 3, 6] {
            let g = build_bernstein_generator(&params3(), k).unwrap();
            let a = g.matrix();
            for r in 0..a.nrows() {
                let s: f64 = a.row(r).iter().sum();
                assert!(s.abs() < 1e-12, "row {r} sums to {s}");
                for c in 0..a.ncols() {
                    if r != c {
                        assert!(a[(r, c)] >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn agrees_with_monomial_generator() {
        let params = params3();
        let k = 4;
        let bg = build_bernstein_generator(&params, k).unwrap();
        let mg = build_generator(&params, k).unwrap();
        let basis = Arc::clone(bg.basis());
        for j in [0, 3, 7, 14] {
            let mut c = vec![0.0; basis.len()];
            c[j] = 1.0;
            let p = BernsteinPolynomial::new(Arc::clone(&basis), c).unwrap();
            let t = 0.37;
            let via_b = bg.evolve(t, &p).unwrap();
            let via_m = mg.evolve(t, &p.to_simplex().unwrap()).unwrap();
            for mu in [[0.2, 0.3, 0.5], [0.7, 0.1, 0.2], [1.0, 0.0, 0.0]] {
                let x = via_b.evaluate(&mu).unwrap();
                let y = via_m.evaluate(&mu).unwrap();
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn gradient_matches_reduced_representation() {
        let basis = Arc::new(HomogeneousBasis::new(3, 3).unwrap());
        let c: Vec<f64> = (0..basis.len()).map(|i| (i as f64).sin()).collect();
        let p = BernsteinPolynomial::new(basis, c).unwrap();
        let q = p.to_simplex().unwrap();
        let mu = [0.2, 0.3, 0.5];
        let g1 = p.gradient_full(&mu).unwrap();
        let g2 = q.gradient_full(&mu).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
        assert!((p.evaluate(&mu).unwrap() - q.evaluate(&mu).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn arbitrage_payoff_coefficients() {
        // (mu_1 + mu_2)^{2n} - (mu_1 - mu_2)^{2n} has coefficients 1 - (-1)^a
        let n = 5;
        let unit = HomogeneousPolynomial::unit(2, 2).unwrap();
        let q = unit.sub(&HomogeneousPolynomial::product_all(2).unwrap().scale(4.0)).unwrap();
        let p = HomogeneousPolynomial::unit(2, 2 * n)
            .unwrap()
            .sub(&q.pow(n as u32).unwrap())
            .unwrap()
            .to_bernstein()
            .unwrap();
        for (a, c) in p.basis().indices().iter().zip(p.coeffs()) {
            let expected = if a[0] % 2 == 1 { 2.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-9, "{a:?}: {c}");
        }
    }

    #[test]
    fn driftless_vsm_d2_symmetric() {
        let params = vsm_to_params(&VsmSpec { alpha: 0.0, d: 2 }).unwrap().simplex.driftless();
        let g = build_bernstein_generator(&params, 2).unwrap();
        // B_(1,1) = 2 mu_1 mu_2 decays at rate 1
        let basis = Arc::clone(g.basis());
        let p = BernsteinPolynomial::new(basis, vec![0.0, 1.0, 0.0]).unwrap();
        let e = g.evolve(1.0, &p).unwrap();
        let v = e.evaluate(&[0.5, 0.5]).unwrap();
        assert!((v - 0.5 * (-1.0f64).exp()).abs() < 1e-14);
    }
}
