//! Generator matrices on truncated polynomial spaces and the moments they
//! produce.
//!
//! For a polynomial diffusion on the simplex the generator maps polynomials
//! of degree at most `k` into themselves, so `E[p(mu_t) | mu_0]` is the
//! evaluation at `mu_0` of `exp(t A) p`, where `A` is the matrix of the
//! generator in the reduced monomial basis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::model_params::AdmissibleSimplexParameterSet;
use crate::simplex_poly::{basis_size, Basis, SimplexPolynomial, MAX_DEGREE};

/// Largest supported dimension of a truncated polynomial space.
pub const MAX_BASIS: usize = 20_000;

/// Generator restricted to polynomials of degree at most `k`, in the reduced
/// graded basis. Column `j` holds the coefficients of `G` applied to basis
/// monomial `j`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    d: usize,
    k: usize,
    basis: Arc<Basis>,
    a: DMatrix<f64>,
}

pub(crate) fn checked_basis_size(vars: usize, k: usize) -> Result<usize> {
    if k > MAX_DEGREE {
        return Err(Error::DegreeCap {
            degree: k,
            cap: MAX_DEGREE,
        });
    }
    match basis_size(vars, k) {
        Some(n) if n <= MAX_BASIS => Ok(n),
        Some(n) => Err(Error::BasisTooLarge {
            size: n,
            cap: MAX_BASIS,
        }),
        None => Err(Error::BasisTooLarge {
            size: usize::MAX,
            cap: MAX_BASIS,
        }),
    }
}

pub fn build_generator(params: &AdmissibleSimplexParameterSet, k: usize) -> Result<GeneratorMatrix> {
    let d = params.d();
    let vars = d - 1;
    let n = checked_basis_size(vars, k)?;
    let basis = Arc::new(Basis::new(vars, k));
    let beta = params.beta();
    let bm = params.b();
    let gamma = params.gamma();
    let last = d - 1;

    let mut a = DMatrix::zeros(n, n);
    let mut exps = vec![0u32; vars];
    for (col, idx) in basis.indices().iter().enumerate() {
        let e = idx.exponents();
        let add = |a: &mut DMatrix<f64>, exps: &[u32], v: f64| {
            if v != 0.0 {
                a[(Basis::rank(exps), col)] += v;
            }
        };
        for i in 0..vars {
            if e[i] == 0 {
                continue;
            }
            let ei = f64::from(e[i]);
            // drift: (beta_i + B_id) + sum_j (B_ij - B_id) x_j, times e_i x^{e - e_i}
            exps.copy_from_slice(e);
            exps[i] -= 1;
            add(&mut a, &exps, ei * (beta[i] + bm[(i, last)]));
            for j in 0..vars {
                exps.copy_from_slice(e);
                exps[i] -= 1;
                exps[j] += 1;
                add(&mut a, &exps, ei * (bm[(i, j)] - bm[(i, last)]));
            }
            // diagonal diffusion: x_i (sum_{j != i} gamma_ij x_j + gamma_id x_d), times e_i (e_i - 1) / 2 x^{e - 2 e_i}
            if e[i] >= 2 {
                let h = 0.5 * ei * (ei - 1.0);
                exps.copy_from_slice(e);
                exps[i] -= 1;
                add(&mut a, &exps, h * gamma[(i, last)]);
                for j in 0..vars {
                    let g = if j == i { 0.0 } else { gamma[(i, j)] } - gamma[(i, last)];
                    exps.copy_from_slice(e);
                    exps[i] -= 1;
                    exps[j] += 1;
                    add(&mut a, &exps, h * g);
                }
            }
            // off-diagonal diffusion: -gamma_ij x_i x_j e_i e_j x^{e - e_i - e_j}
            for j in (i + 1)..vars {
                if e[j] == 0 {
                    continue;
                }
                add(&mut a, e, -gamma[(i, j)] * ei * f64::from(e[j]));
            }
        }
    }
    Ok(GeneratorMatrix { d, k, basis, a })
}

impl GeneratorMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// `exp(t A)`.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        expm(&(&self.a * t))
    }

    /// Coefficients of `G p`.
    pub fn apply(&self, p: &SimplexPolynomial) -> Result<SimplexPolynomial> {
        let v = self.lift(p)?;
        SimplexPolynomial::new(self.d, self.k, (&self.a * v).as_slice().to_vec())
    }

    fn lift(&self, p: &SimplexPolynomial) -> Result<DVector<f64>> {
        if p.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: p.dim(),
            });
        }
        if p.degree() > self.k {
            return Err(Error::DegreeCap {
                degree: p.degree(),
                cap: self.k,
            });
        }
        let lifted = p.with_max_degree(self.k)?;
        Ok(DVector::from_vec(lifted.into_coeffs()))
    }

    /// `exp(t A) p` as a polynomial.
    pub fn evolve(&self, t: f64, p: &SimplexPolynomial) -> Result<SimplexPolynomial> {
        let v = self.lift(p)?;
        let out = expm_apply(self, t, v.as_slice())?;
        SimplexPolynomial::new(self.d, self.k, out)
    }

    /// `E[p(mu_t) | mu_0]`.
    pub fn conditional_moment(&self, p: &SimplexPolynomial, t: f64, mu0: &[f64]) -> Result<f64> {
        self.evolve(t, p)?.evaluate(mu0)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and >= 0")));
    }
    Ok(())
}

/// `exp(t A) coeffs`.
pub fn expm_apply(gen: &GeneratorMatrix, t: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: coeffs.len(),
        });
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("coefficient vector".into()));
    }
    check_time(t)?;
    if t == 0.0 {
        return Ok(coeffs.to_vec());
    }
    let e = gen.propagator(t)?;
    let out = e * DVector::from_column_slice(coeffs);
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("propagated coefficients".into()));
    }
    Ok(out.as_slice().to_vec())
}

/// `E[p(mu_t) | mu_0]`, building the generator at the degree of `p`.
pub fn conditional_moment(
    params: &AdmissibleSimplexParameterSet,
    p: &SimplexPolynomial,
    t: f64,
    mu0: &[f64],
) -> Result<f64> {
    let gen = build_generator(params, p.degree())?;
    gen.conditional_moment(p, t, mu0)
}

/// Time-indexed family `p(t, .) = exp((tau - t) A_0) p` for the driftless
/// generator `A_0` (same `gamma`, zero drift). Each distinct `t` is computed
/// once and cached.
#[derive(Debug)]
pub struct DriftlessPrice {
    gen: GeneratorMatrix,
    terminal: DVector<f64>,
    tau: f64,
    cache: Mutex<HashMap<u64, Arc<SimplexPolynomial>>>,
}

pub fn price_polynomial_driftless(
    params: &AdmissibleSimplexParameterSet,
    p: &SimplexPolynomial,
    tau: f64,
) -> Result<DriftlessPrice> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {tau} must be > 0")));
    }
    let gen = build_generator(&params.driftless(), p.degree())?;
    let terminal = gen.lift(p)?;
    Ok(DriftlessPrice {
        gen,
        terminal,
        tau,
        cache: Mutex::new(HashMap::new()),
    })
}

impl DriftlessPrice {
    pub fn horizon(&self) -> f64 {
        self.tau
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.gen
    }

    /// `p(t, .)` for `t` in `[0, tau]`.
    pub fn at(&self, t: f64) -> Result<Arc<SimplexPolynomial>> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {}]",
                self.tau
            )));
        }
        let key = t.to_bits();
        if let Some(p) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(p));
        }
        let coeffs = expm_apply(&self.gen, self.tau - t, self.terminal.as_slice())?;
        let poly = Arc::new(SimplexPolynomial::new(self.gen.d, self.gen.k, coeffs)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&poly));
        Ok(poly)
    }

    /// `p(t, .)` on a caller-supplied grid.
    pub fn on_grid(&self, times: &[f64]) -> Result<Vec<Arc<SimplexPolynomial>>> {
        times.iter().map(|&t| self.at(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_params::{vsm_to_params, VsmSpec};
    use crate::simplex_poly::{reduce, FullTerm};

    fn vsm(alpha: f64, d: usize) -> AdmissibleSimplexParameterSet {
        vsm_to_params(&VsmSpec { alpha, d }).unwrap().simplex
    }

    fn x1(d: usize) -> SimplexPolynomial {
        SimplexPolynomial::coordinate(d, 0).unwrap()
    }

    #[test]
    fn vsm_d2_matrix() {
        let g = build_generator(&vsm(0.0, 2), 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.0, -1.0, 2.0, 0.0, 0.0, -3.0]);
        assert_eq!(g.matrix(), &expected);
    }

    #[test]
    fn constant_column_is_zero() {
        let g = build_generator(&vsm(0.3, 4), 3).unwrap();
        assert!(g.matrix().column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn driftless_coordinates_are_martingales() {
        let p = AdmissibleSimplexParameterSet::driftless_uniform(4, 0.7).unwrap();
        let g = build_generator(&p, 2).unwrap();
        for j in 1..4 {
            assert!(g.matrix().column(j).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scalar_closed_form() {
        let m = conditional_moment(&vsm(0.0, 2), &x1(2), 1.0, &[0.3, 0.7]).unwrap();
        let exact = 0.5 - 0.2 * (-1.0f64).exp();
        assert!((m - exact).abs() < 1e-14, "{m} vs {exact}");
        assert!((m - 0.426424).abs() < 1e-6);
    }

    #[test]
    fn second_moment_ode() {
        // m' = 1/2 - m, v' = 2 m - 3 v with m(0) = 0.3, v(0) = 0.09
        // m(t) = 1/2 - 0.2 e^{-t}; v(t) = 1/3 - 0.2 e^{-t} - (1/3 - 0.2 - 0.09) e^{-3t}
        let t = 1.0f64;
        let exact = 1.0 / 3.0 - 0.2 * (-t).exp() - (1.0 / 3.0 - 0.2 - 0.09) * (-3.0 * t).exp();
        let p = x1(2).multiply(&x1(2)).unwrap();
        let m = conditional_moment(&vsm(0.0, 2), &p, t, &[0.3, 0.7]).unwrap();
        assert!((m - exact).abs() < 1e-12, "{m} vs {exact}");
    }

    #[test]
    fn mass_conservation() {
        let one = SimplexPolynomial::constant(3, 1.0).unwrap();
        let g = build_generator(&vsm(0.5, 3), 3).unwrap();
        for t in [0.0, 0.5, 2.0, 10.0] {
            let m = g.conditional_moment(&one, t, &[0.2, 0.3, 0.5]).unwrap();
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expm_apply_identity_at_zero() {
        let g = build_generator(&vsm(0.5, 3), 2).unwrap();
        let v: Vec<f64> = (0..g.dim()).map(|i| i as f64 - 2.5).collect();
        assert_eq!(expm_apply(&g, 0.0, &v).unwrap(), v);
        assert!(expm_apply(&g, -1.0, &v).is_err());
        assert!(expm_apply(&g, 1.0, &v[1..]).is_err());
    }

    #[test]
    fn degree_cap_enforced() {
        let g = build_generator(&vsm(0.0, 3), 1).unwrap();
        let p = x1(3).multiply(&x1(3)).unwrap();
        assert!(matches!(
            g.conditional_moment(&p, 1.0, &[0.2, 0.3, 0.5]),
            Err(Error::DegreeCap { .. })
        ));
        assert!(matches!(
            build_generator(&vsm(0.0, 30), 6),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn generator_matches_direct_differentiation() {
        // G applied to mu_1 mu_2^2 mu_3 for a non-symmetric parameter set,
        // compared with the full-coordinate formula evaluated pointwise
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.3, 0.4, 0.0, 0.2, 0.5, 0.05, 0.0]);
        let gamma = DMatrix::from_row_slice(3, 3, &[0.0, 0.7, 1.3, 0.7, 0.0, 0.4, 1.3, 0.4, 0.0]);
        let params = AdmissibleSimplexParameterSet::from_drift_matrix(&v, gamma).unwrap();
        let exps = [1u32, 2, 1];
        let p = reduce(&[FullTerm { exps: exps.to_vec(), coef: 1.0 }], 3, 4).unwrap();
        let g = build_generator(&params, 4).unwrap();
        let gp = g.apply(&p).unwrap();
        for mu in [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [0.25, 0.25, 0.5]] {
            let bv = params.drift(&mu);
            let c = params.covariance(&mu);
            let mono = |e: [i32; 3]| -> f64 {
                if e.iter().any(|&x| x < 0) {
                    0.0
                } else {
                    (0..3).map(|i| mu[i].powi(e[i])).product()
                }
            };
            let base = exps.map(|e| e as i32);
            let mut direct = 0.0;
            for i in 0..3 {
                let mut e = base;
                e[i] -= 1;
                direct += bv[i] * f64::from(base[i]) * mono(e);
                for j in 0..3 {
                    let mut e = base;
                    let f = if i == j {
                        f64::from(base[i] * (base[i] - 1))
                    } else {
                        f64::from(base[i] * base[j])
                    };
                    e[i] -= 1;
                    e[j] -= 1;
                    direct += 0.5 * c[(i, j)] * f * mono(e);
                }
            }
            let got = gp.evaluate(&mu).unwrap();
            assert!((got - direct).abs() < 1e-13, "{got} vs {direct}");
        }
    }

    #[test]
    fn driftless_price_family() {
        let params = AdmissibleSimplexParameterSet::driftless_uniform(2, 1.0).unwrap();
        let p = x1(2);
        let fam = price_polynomial_driftless(&params, &p, 2.0).unwrap();
        for t in [0.0, 0.7, 2.0] {
            assert!(fam.at(t).unwrap().max_coeff_distance(&p) < 1e-15);
        }
        // 4 x1 x2 decays at rate gamma: G(x(1-x)) = -x(1-x)
        let q = p.multiply(&SimplexPolynomial::coordinate(2, 1).unwrap()).unwrap().scale(4.0);
        let fam = price_polynomial_driftless(&vsm(0.0, 2), &q, 1.0).unwrap();
        assert!(fam.at(1.0).unwrap().max_coeff_distance(&q) < 1e-15);
        let p0 = fam.at(0.0).unwrap();
        assert!(p0.max_coeff_distance(&q.scale((-1.0f64).exp())) < 1e-14);
        assert!(fam.at(1.5).is_err());
    }
}
