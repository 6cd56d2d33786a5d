//! Polynomials on the unit simplex.
//!
//! A polynomial in `d` full coordinates is not uniquely determined by its
//! values on the simplex, since `x_1 + ... + x_d = 1` there. The canonical
//! representative used throughout the crate eliminates the last coordinate,
//! `x_d = 1 - (x_1 + ... + x_{d-1})`, and stores dense coefficients over the
//! monomials of the remaining `d - 1` reduced coordinates.
//!
//! Monomials are enumerated in graded order: by total degree first, and
//! within one degree lexicographically with larger leading exponents first,
//! so `d = 3, k = 1` gives `1, x_1, x_2`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest total degree supported by polynomial arithmetic.
pub const MAX_DEGREE: usize = 64;

/// Tolerance on `sum(mu) = 1` accepted by evaluation routines.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// `n choose k`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    usize::try_from(acc).ok()
}

/// Number of monomials of total degree at most `k` in `vars` variables.
pub fn basis_size(vars: usize, k: usize) -> Option<usize> {
    binomial(vars + k, k)
}

/// Number of monomials of total degree exactly `m` in `vars` variables.
fn count_exact(vars: usize, m: usize) -> usize {
    if vars == 0 {
        return usize::from(m == 0);
    }
    binomial(m + vars - 1, vars - 1).unwrap_or(usize::MAX)
}

/// Checks that `mu` has `d` nonnegative entries summing to one.
pub fn check_simplex_point(mu: &[f64], d: usize) -> Result<()> {
    if mu.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu.len(),
        });
    }
    let mut sum = 0.0;
    for (i, &m) in mu.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::NotOnSimplex(format!("component {i} = {m}")));
        }
        sum += m;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotOnSimplex(format!("components sum to {sum}")));
    }
    Ok(())
}

/// Exponent vector of a monomial in reduced coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        let degree = exponents.iter().sum();
        Self { exponents, degree }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Graded enumeration of all monomials of degree `<= max_degree` in `vars`
/// variables, with a closed-form ranking function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    vars: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
}

impl Basis {
    pub fn new(vars: usize, max_degree: usize) -> Self {
        let mut indices = Vec::with_capacity(basis_size(vars, max_degree).unwrap_or(0));
        let mut current = vec![0u32; vars];
        for m in 0..=max_degree {
            push_exact_degree(&mut indices, &mut current, 0, m as u32);
        }
        Self {
            vars,
            max_degree,
            indices,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    /// Position of `exps` in the enumeration. The exponent vector must have
    /// `vars` entries; its degree may exceed `max_degree` (the rank is then
    /// beyond `len()`).
    pub fn rank(exps: &[u32]) -> usize {
        let vars = exps.len();
        let m: usize = exps.iter().map(|&e| e as usize).sum();
        let mut rank = if m == 0 {
            0
        } else {
            basis_size(vars, m - 1).unwrap_or(usize::MAX)
        };
        let mut remaining = m;
        for (p, &e) in exps.iter().enumerate() {
            let e = e as usize;
            let rest = vars - p - 1;
            // exponents larger than `e` at position p come first
            for f in (e + 1)..=remaining {
                rank += count_exact(rest, remaining - f);
            }
            remaining -= e;
        }
        rank
    }

    /// Index of the first monomial of degree `m`.
    pub fn block_start(vars: usize, m: usize) -> usize {
        if m == 0 {
            0
        } else {
            basis_size(vars, m - 1).unwrap_or(usize::MAX)
        }
    }
}

fn push_exact_degree(out: &mut Vec<MultiIndex>, current: &mut [u32], pos: usize, remaining: u32) {
    let vars = current.len();
    if vars == 0 {
        if remaining == 0 {
            out.push(MultiIndex::new(Vec::new()));
        }
        return;
    }
    if pos == vars - 1 {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_exact_degree(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

/// Graded enumeration of the reduced monomial basis for dimension `d`
/// (i.e. `d - 1` variables) and degree `<= k`.
pub fn basis_enumerate(d: usize, k: usize) -> Result<Vec<MultiIndex>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension d = {d} must be >= 2")));
    }
    Ok(Basis::new(d - 1, k).indices)
}

/// A polynomial on the simplex in its reduced representation.
#[derive(Debug, Clone)]
pub struct SimplexPolynomial {
    dim: usize,
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SimplexPolynomial {
    /// Equality of the represented functions: coefficients are compared after
    /// padding the lower-degree operand with zeros.
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|i| {
            self.coeffs.get(i).copied().unwrap_or(0.0) == other.coeffs.get(i).copied().unwrap_or(0.0)
        })
    }
}

impl SimplexPolynomial {
    pub fn new(dim: usize, max_degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let basis = make_basis(dim, max_degree)?;
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficient".into()));
        }
        Ok(Self { dim, basis, coeffs })
    }

    pub fn zero(dim: usize, max_degree: usize) -> Result<Self> {
        let basis = make_basis(dim, max_degree)?;
        let coeffs = vec![0.0; basis.len()];
        Ok(Self { dim, basis, coeffs })
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::new(dim, 0, vec![c])
    }

    /// The full coordinate function `mu -> mu_i` (zero based), reduced.
    pub fn coordinate(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        let mut p = Self::zero(dim, 1)?;
        if i + 1 < dim {
            p.coeffs[1 + i] = 1.0;
        } else {
            p.coeffs[0] = 1.0;
            for c in p.coeffs[1..].iter_mut() {
                *c = -1.0;
            }
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Coefficient of the reduced monomial with the given exponents.
    pub fn coeff(&self, exps: &[u32]) -> f64 {
        if exps.len() != self.dim - 1 {
            return 0.0;
        }
        self.coeffs.get(Basis::rank(exps)).copied().unwrap_or(0.0)
    }

    /// Highest degree carrying a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .map(|i| self.basis.get(i).degree() as usize)
            .unwrap_or(0)
    }

    /// Same function, stored with truncation degree `k`. Fails if nonzero
    /// coefficients would be dropped.
    pub fn with_max_degree(&self, k: usize) -> Result<Self> {
        if k < self.degree() {
            return Err(Error::DegreeCap {
                degree: self.degree(),
                cap: k,
            });
        }
        let mut out = Self::zero(self.dim, k)?;
        let n = out.coeffs.len().min(self.coeffs.len());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Ok(out)
    }

    /// Drops trailing all-zero degree blocks.
    pub fn trimmed(&self) -> Self {
        self.with_max_degree(self.degree())
            .expect("trimming to the actual degree never drops coefficients")
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let k = self.max_degree().max(other.max_degree());
        let mut out = self.with_max_degree(k)?;
        for (o, &c) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += c;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let k = self.degree() + other.degree();
        if k > MAX_DEGREE {
            return Err(Error::DegreeCap {
                degree: k,
                cap: MAX_DEGREE,
            });
        }
        let mut out = Self::zero(self.dim, k)?;
        let vars = self.dim - 1;
        let mut exps = vec![0u32; vars];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let ea = self.basis.get(i).exponents();
            for (j, &b) in other.coeffs.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let eb = other.basis.get(j).exponents();
                for v in 0..vars {
                    exps[v] = ea[v] + eb[v];
                }
                out.coeffs[Basis::rank(&exps)] += a * b;
            }
        }
        Ok(out)
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut result = Self::constant(self.dim, 1.0)?;
        let mut base = self.trimmed();
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

    /// Value at a point of the simplex, given in full coordinates.
    pub fn evaluate(&self, mu: &[f64]) -> Result<f64> {
        check_simplex_point(mu, self.dim)?;
        Ok(self.evaluate_reduced(&mu[..self.dim - 1]))
    }

    /// Value of the reduced representative at reduced coordinates `x`
    /// (no simplex check).
    pub fn evaluate_reduced(&self, x: &[f64]) -> f64 {
        let k = self.max_degree();
        let powers = power_table(x, k);
        self.coeffs
            .iter()
            .zip(self.basis.indices())
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, idx)| c * monomial_value(&powers, idx.exponents(), k))
            .sum()
    }

    /// Gradient in full coordinates. Entries `0..d-1` are the partial
    /// derivatives of the reduced representative; the last entry is 0.
    pub fn gradient_full(&self, mu: &[f64]) -> Result<Vec<f64>> {
        check_simplex_point(mu, self.dim)?;
        let vars = self.dim - 1;
        let k = self.max_degree();
        let powers = power_table(&mu[..vars], k);
        let mut grad = vec![0.0; self.dim];
        let mut exps = vec![0u32; vars];
        for (c, idx) in self.coeffs.iter().zip(self.basis.indices()) {
            if *c == 0.0 {
                continue;
            }
            let e = idx.exponents();
            for i in 0..vars {
                if e[i] == 0 {
                    continue;
                }
                exps.copy_from_slice(e);
                exps[i] -= 1;
                grad[i] += c * f64::from(e[i]) * monomial_value(&powers, &exps, k);
            }
        }
        Ok(grad)
    }

    /// Max-abs coefficient distance, zero padding the shorter operand.
    pub fn max_coeff_distance(&self, other: &Self) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0.0);
                let b = other.coeffs.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn make_basis(dim: usize, max_degree: usize) -> Result<Arc<Basis>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension d = {dim} must be >= 2")));
    }
    if max_degree > MAX_DEGREE {
        return Err(Error::DegreeCap {
            degree: max_degree,
            cap: MAX_DEGREE,
        });
    }
    Ok(Arc::new(Basis::new(dim - 1, max_degree)))
}

/// `powers[v * (k + 1) + p] = x_v^p`.
pub(crate) fn power_table(x: &[f64], k: usize) -> Vec<f64> {
    let mut powers = vec![1.0; x.len() * (k + 1)];
    for (v, &xv) in x.iter().enumerate() {
        for p in 1..=k {
            powers[v * (k + 1) + p] = powers[v * (k + 1) + p - 1] * xv;
        }
    }
    powers
}

#[inline]
pub(crate) fn monomial_value(powers: &[f64], exps: &[u32], k: usize) -> f64 {
    exps.iter()
        .enumerate()
        .map(|(v, &e)| powers[v * (k + 1) + e as usize])
        .product()
}

/// One monomial of a polynomial given in full coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullTerm {
    pub exps: Vec<u32>,
    pub coef: f64,
}

/// Reduces a polynomial in `d` full coordinates to its canonical
/// representative with truncation degree `k`.
pub fn reduce(terms: &[FullTerm], d: usize, k: usize) -> Result<SimplexPolynomial> {
    let mut out = SimplexPolynomial::zero(d, k)?;
    let vars = d - 1;
    for term in terms {
        if term.exps.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: term.exps.len(),
            });
        }
        let total: usize = term.exps.iter().map(|&e| e as usize).sum();
        if total > k {
            return Err(Error::DegreeCap { degree: total, cap: k });
        }
        if term.coef == 0.0 {
            continue;
        }
        let head = &term.exps[..vars];
        let last = term.exps[vars];
        // x^head * (1 - x_1 - ... - x_{d-1})^last, expanded multinomially
        let expansion = Basis::new(vars, last as usize);
        let mut exps = vec![0u32; vars];
        for a in expansion.indices() {
            let s = a.degree();
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let coef = sign * binomial_f64(last, s) * multinomial_f64(a.exponents());
            for v in 0..vars {
                exps[v] = head[v] + a.exponents()[v];
            }
            let r = Basis::rank(&exps);
            debug_assert!(r < out.coeffs.len(), "substitution preserves the degree bound");
            out.coeffs[r] += term.coef * coef;
        }
    }
    Ok(out)
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

/// `(sum a)! / prod(a_i!)`
pub(crate) fn multinomial_f64(a: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut total = 0u32;
    for &ai in a {
        total += ai;
        acc *= binomial_f64(total, ai);
    }
    acc
}

/// JSON literal form of a polynomial in full coordinates:
/// `{"dim": d, "terms": [{"exps": [k_1, ..., k_d], "coef": c}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialLiteral {
    pub dim: usize,
    pub terms: Vec<FullTerm>,
}

impl PolynomialLiteral {
    /// Total degree of the literal as written.
    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exps.iter().map(|&e| e as usize).sum::<usize>())
            .max()
            .unwrap_or(0)
    }

    pub fn to_simplex(&self) -> Result<SimplexPolynomial> {
        reduce(&self.terms, self.dim, self.degree())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(exps: &[u32], coef: f64) -> FullTerm {
        FullTerm {
            exps: exps.to_vec(),
            coef,
        }
    }

    #[test]
    fn basis_examples() {
        let b = basis_enumerate(2, 2).unwrap();
        let e: Vec<_> = b.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![0], vec![1], vec![2]]);

        let b = basis_enumerate(3, 1).unwrap();
        let e: Vec<_> = b.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);

        assert_eq!(basis_enumerate(4, 3).unwrap().len(), 20);
        assert!(basis_enumerate(1, 3).is_err());
    }

    #[test]
    fn basis_is_graded_and_ranked() {
        for d in 2..=8 {
            for k in 0..=6 {
                let basis = Basis::new(d - 1, k);
                assert_eq!(basis.len(), binomial(d - 1 + k, k).unwrap());
                for (i, idx) in basis.indices().iter().enumerate() {
                    assert_eq!(Basis::rank(idx.exponents()), i);
                    assert_eq!(idx.degree(), idx.exponents().iter().sum::<u32>());
                }
                for w in basis.indices().windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    assert!(
                        a.degree() < b.degree()
                            || (a.degree() == b.degree() && a.exponents() > b.exponents())
                    );
                }
            }
        }
    }

    #[test]
    fn reduce_sum_of_coordinates_is_one() {
        for d in 2..6 {
            let terms: Vec<_> = (0..d)
                .map(|i| {
                    let mut e = vec![0; d];
                    e[i] = 1;
                    term(&e, 1.0)
                })
                .collect();
            let p = reduce(&terms, d, 1).unwrap();
            assert_eq!(p.trimmed(), SimplexPolynomial::constant(d, 1.0).unwrap());
        }
    }

    #[test]
    fn reduce_last_coordinate() {
        let p = reduce(&[term(&[0, 1], 1.0)], 2, 1).unwrap();
        assert_eq!(p.coeffs(), &[1.0, -1.0]);
    }

    #[test]
    fn reduce_square_of_difference() {
        // (x1 - x2)^2 = x1^2 - 2 x1 x2 + x2^2  ->  1 - 4 x1 + 4 x1^2
        let p = reduce(
            &[term(&[2, 0], 1.0), term(&[1, 1], -2.0), term(&[0, 2], 1.0)],
            2,
            2,
        )
        .unwrap();
        assert_eq!(p.coeffs(), &[1.0, -4.0, 4.0]);
        assert_eq!(p.evaluate(&[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn reduce_rejects_overflowing_degree() {
        assert!(matches!(
            reduce(&[term(&[2, 1], 1.0)], 2, 2),
            Err(Error::DegreeCap { .. })
        ));
    }

    #[test]
    fn evaluate_examples() {
        let one = SimplexPolynomial::constant(3, 1.0).unwrap();
        assert_eq!(one.evaluate(&[0.2, 0.3, 0.5]).unwrap(), 1.0);
        let p = reduce(&[term(&[1, 1, 0], 1.0)], 3, 2).unwrap();
        assert!((p.evaluate(&[0.2, 0.3, 0.5]).unwrap() - 0.06).abs() < 1e-15);
        assert!(matches!(
            p.evaluate(&[0.2, 0.3]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            p.evaluate(&[0.2, 0.3, 0.6]),
            Err(Error::NotOnSimplex(_))
        ));
    }

    #[test]
    fn multiply_examples() {
        let x1 = SimplexPolynomial::coordinate(2, 0).unwrap();
        let x2 = SimplexPolynomial::coordinate(2, 1).unwrap();
        let one = SimplexPolynomial::constant(2, 1.0).unwrap();
        assert_eq!(x1.multiply(&one).unwrap(), x1);
        assert_eq!(x1.multiply(&x2).unwrap().coeffs(), &[0.0, 1.0, -1.0]);

        let s = SimplexPolynomial::coordinate(3, 0)
            .unwrap()
            .add(&SimplexPolynomial::coordinate(3, 1).unwrap())
            .unwrap();
        let sq = s.multiply(&s).unwrap();
        // (1 - x3)^2 = 1 - 2 x3 + x3^2 in full coordinates
        let oracle = reduce(
            &[term(&[0, 0, 0], 1.0), term(&[0, 0, 1], -2.0), term(&[0, 0, 2], 1.0)],
            3,
            2,
        )
        .unwrap();
        assert!(sq.max_coeff_distance(&oracle) < 1e-15);
    }

    #[test]
    fn multiply_respects_cap() {
        let x = SimplexPolynomial::coordinate(2, 0).unwrap();
        let big = x.pow(40).unwrap();
        assert!(matches!(big.multiply(&big), Err(Error::DegreeCap { .. })));
    }

    #[test]
    fn gradient_examples() {
        let c = SimplexPolynomial::constant(3, 2.5).unwrap();
        assert_eq!(c.gradient_full(&[0.2, 0.3, 0.5]).unwrap(), vec![0.0; 3]);
        let x1 = SimplexPolynomial::coordinate(2, 0).unwrap();
        assert_eq!(x1.gradient_full(&[0.4, 0.6]).unwrap(), vec![1.0, 0.0]);
        let p = reduce(&[term(&[1, 1, 0], 1.0)], 3, 2).unwrap();
        let g = p.gradient_full(&[0.2, 0.3, 0.5]).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.2).abs() < 1e-15 && g[2] == 0.0);
    }

    #[test]
    fn equality_ignores_trailing_zero_blocks() {
        let x = SimplexPolynomial::coordinate(3, 0).unwrap();
        let padded = x.with_max_degree(4).unwrap();
        assert_eq!(x, padded);
        assert_eq!(padded.degree(), 1);
        assert!(x.with_max_degree(0).is_err());
    }

    #[test]
    fn literal_roundtrip() {
        let json = r#"{"dim": 2, "terms": [{"exps": [1, 1], "coef": 4.0}]}"#;
        let lit = PolynomialLiteral::from_json(json).unwrap();
        let p = lit.to_simplex().unwrap();
        assert_eq!(p.coeffs(), &[0.0, 4.0, -4.0]);
    }
}
