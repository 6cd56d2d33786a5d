#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use polyspt::model_params::{AdmissibleSimplexParameterSet, TotalCapParams};
use polyspt::simplex_poly::{basis_size, Basis, SimplexPolynomial};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform point in the open simplex.
pub fn interior_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        let mu: Vec<f64> = e.iter().map(|x| x / s).collect();
        if mu.iter().all(|&m| m > 0.0) {
            return mu;
        }
    }
}

/// Symmetric interaction matrix with entries in `[lo, hi]` and zero diagonal.
pub fn random_gamma<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let v = rng.random_range(lo..=hi);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Admissible parameters from a random drift matrix with nonnegative
/// off-diagonal entries, rewritten in a random gauge `B_ij -> B_ij - c_i`,
/// `beta_i -> beta_i + c_i`.
pub fn random_params<R: Rng>(rng: &mut R, d: usize) -> AdmissibleSimplexParameterSet {
    let v = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { rng.random_range(0.0..2.0) });
    let base = AdmissibleSimplexParameterSet::from_drift_matrix(&v, random_gamma(rng, d, 0.05, 2.0)).unwrap();
    let shift = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let beta = base.beta() + &shift;
    let b = DMatrix::from_fn(d, d, |i, j| base.b()[(i, j)] - shift[i]);
    AdmissibleSimplexParameterSet::new(beta, b, base.gamma().clone()).unwrap()
}

pub fn random_totalcap<R: Rng>(rng: &mut R) -> TotalCapParams {
    TotalCapParams {
        kappa: rng.random_range(0.0..2.0),
        phi: rng.random_range(0.0..2.0),
        lambda: rng.random_range(-1.0..1.0),
        sigma: rng.random_range(-1.0..1.0),
    }
}

/// Reduced monomial `x^exps` as a simplex polynomial.
pub fn monomial(d: usize, exps: &[u32]) -> SimplexPolynomial {
    let k = exps.iter().sum::<u32>() as usize;
    let mut c = vec![0.0; basis_size(d - 1, k).unwrap()];
    c[Basis::rank(exps)] = 1.0;
    SimplexPolynomial::new(d, k, c).unwrap()
}

fn hyp2f1_terminating(m: u32, b: f64, c: f64, x: f64) -> f64 {
    // 2F1(-m, b; c; x)
    let (mut s, mut term) = (0.0, 1.0);
    for k in 0..=m {
        s += term;
        let k = k as f64;
        term *= (k - m as f64) * (b + k) / ((c + k) * (k + 1.0)) * x;
    }
    s
}

/// Probability that the two-type Wright-Fisher diffusion with generator
/// `gamma/2 x (1 - x) f''` started at `p` is not absorbed by time `t`.
pub fn wright_fisher_unabsorbed(t: f64, p: f64, gamma: f64) -> f64 {
    let q = 1.0 - p;
    (1..200u32)
        .map(|i| {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            let fi = i as f64;
            2.0 * (2.0 * fi + 1.0)
                * p
                * q
                * sign
                * hyp2f1_terminating(i - 1, fi + 2.0, 2.0, p)
                * (-fi * (fi + 1.0) * gamma * t / 2.0).exp()
        })
        .sum()
}
