//! Parameter containers, validation and classifiers.
//!
//! Indices are zero based throughout: asset `i` refers to component `i` of
//! the weight vector and to row/column `i` of `B` and `gamma`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::simplex_poly::check_simplex_point;

/// Tolerance for exact linear identities.
pub const LINEAR_TOL: f64 = 1e-12;
/// Floor for eigenvalues in positive semidefiniteness checks.
pub const PSD_FLOOR: f64 = -1e-10;

/// One failed admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Shape {
        what: &'static str,
        expected: String,
        got: String,
    },
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },
    GammaAsymmetric { i: usize, j: usize, diff: f64 },
    GammaDiagonal { i: usize, value: f64 },
    GammaNegative { i: usize, j: usize, value: f64 },
    DriftColumnSum { j: usize, residual: f64 },
    FaceDriftNegative { i: usize, j: usize, value: f64 },
    TotalCapNegative { what: &'static str, value: f64 },
    PropMainNotPsd { min_eigenvalue: f64 },
    PropMainVariance { i: usize, value: f64 },
    VsmAlphaNegative { alpha: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                what,
                expected,
                got,
            } => write!(f, "{what} has shape {got}, expected {expected}"),
            Violation::NonFinite { what, row, col } => {
                write!(f, "{what}[{row}][{col}] is not finite")
            }
            Violation::GammaAsymmetric { i, j, diff } => {
                write!(f, "gamma is not symmetric at ({i},{j}): difference {diff:e}")
            }
            Violation::GammaDiagonal { i, value } => {
                write!(f, "gamma[{i}][{i}] = {value} must be 0")
            }
            Violation::GammaNegative { i, j, value } => {
                write!(f, "gamma[{i}][{j}] = {value} must be >= 0")
            }
            Violation::DriftColumnSum { j, residual } => write!(
                f,
                "column {j} of B plus sum(beta) is {residual:e}, must vanish"
            ),
            Violation::FaceDriftNegative { i, j, value } => {
                write!(f, "beta[{i}] + B[{i}][{j}] = {value} must be >= 0")
            }
            Violation::TotalCapNegative { what, value } => {
                write!(f, "{what} = {value} must be >= 0")
            }
            Violation::PropMainNotPsd { min_eigenvalue } => write!(
                f,
                "zeta 11' + Lambda - gamma is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})"
            ),
            Violation::PropMainVariance { i, value } => {
                write!(f, "zeta + 2 lambda[{i}] = {value} must be >= 0")
            }
            Violation::VsmAlphaNegative { alpha } => write!(f, "alpha = {alpha} must be >= 0"),
        }
    }
}

/// Every violated condition of a parameter set.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    fn into_result(self) -> std::result::Result<(), ValidationReport> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameters: ")?;
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Drift and covariance parameters `(beta, B, gamma)` of a polynomial
/// diffusion on the unit simplex.
///
/// The drift is `b(mu) = beta + B mu` and the covariance is
/// `c_ii = mu_i sum_{j != i} gamma_ij mu_j`, `c_ij = -gamma_ij mu_i mu_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSimplexParameterSet {
    d: usize,
    beta: DVector<f64>,
    b: DMatrix<f64>,
    gamma: DMatrix<f64>,
}

/// Validates `(beta, B, gamma)` and returns the parameter set or a report of
/// every violated condition.
pub fn validate_simplex_params(
    beta: DVector<f64>,
    b: DMatrix<f64>,
    gamma: DMatrix<f64>,
) -> std::result::Result<AdmissibleSimplexParameterSet, ValidationReport> {
    let d = beta.len();
    let mut report = ValidationReport::default();
    if d < 2 {
        report.push(Violation::Shape {
            what: "beta",
            expected: "length >= 2".into(),
            got: format!("length {d}"),
        });
        return Err(report);
    }
    for (what, m) in [("B", &b), ("gamma", &gamma)] {
        if m.nrows() != d || m.ncols() != d {
            report.push(Violation::Shape {
                what,
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    if !report.is_empty() {
        return Err(report);
    }
    for i in 0..d {
        if !beta[i].is_finite() {
            report.push(Violation::NonFinite {
                what: "beta",
                row: i,
                col: 0,
            });
        }
        for j in 0..d {
            if !b[(i, j)].is_finite() {
                report.push(Violation::NonFinite {
                    what: "B",
                    row: i,
                    col: j,
                });
            }
            if !gamma[(i, j)].is_finite() {
                report.push(Violation::NonFinite {
                    what: "gamma",
                    row: i,
                    col: j,
                });
            }
        }
    }
    if !report.is_empty() {
        return Err(report);
    }

    for i in 0..d {
        if gamma[(i, i)] != 0.0 {
            report.push(Violation::GammaDiagonal {
                i,
                value: gamma[(i, i)],
            });
        }
        for j in (i + 1)..d {
            let diff = gamma[(i, j)] - gamma[(j, i)];
            if diff.abs() > LINEAR_TOL {
                report.push(Violation::GammaAsymmetric { i, j, diff });
            }
        }
        for j in 0..d {
            if i != j && gamma[(i, j)] < 0.0 {
                report.push(Violation::GammaNegative {
                    i,
                    j,
                    value: gamma[(i, j)],
                });
            }
        }
    }

    let beta_sum: f64 = beta.iter().sum();
    for j in 0..d {
        let col_sum: f64 = b.column(j).iter().sum();
        let residual = col_sum + beta_sum;
        let scale = 1.0f64.max(b.column(j).amax()).max(beta.amax());
        if residual.abs() > LINEAR_TOL * scale {
            report.push(Violation::DriftColumnSum { j, residual });
        }
    }
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let value = beta[i] + b[(i, j)];
            if value < -LINEAR_TOL {
                report.push(Violation::FaceDriftNegative { i, j, value });
            }
        }
    }

    report.into_result()?;
    Ok(AdmissibleSimplexParameterSet { d, beta, b, gamma })
}

impl AdmissibleSimplexParameterSet {
    pub fn new(
        beta: DVector<f64>,
        b: DMatrix<f64>,
        gamma: DMatrix<f64>,
    ) -> std::result::Result<Self, ValidationReport> {
        validate_simplex_params(beta, b, gamma)
    }

    /// Parameters with drift `b(mu) = V mu` on the simplex, where `V` has
    /// nonnegative off-diagonal entries. The diagonal of `V` is ignored and
    /// replaced by minus the off-diagonal column sums. The representation uses
    /// the gauge `B_{:,d} = 0`, so `beta_i = V_id` and `B_ij = V_ij - V_id`.
    pub fn from_drift_matrix(
        v: &DMatrix<f64>,
        gamma: DMatrix<f64>,
    ) -> std::result::Result<Self, ValidationReport> {
        let d = v.nrows();
        let mut full = v.clone();
        for j in 0..d {
            let off: f64 = (0..d).filter(|&i| i != j).map(|i| v[(i, j)]).sum();
            full[(j, j)] = -off;
        }
        let last = d.saturating_sub(1);
        let beta = DVector::from_fn(d, |i, _| full[(i, last)]);
        let b = DMatrix::from_fn(d, d, |i, j| full[(i, j)] - full[(i, last)]);
        validate_simplex_params(beta, b, gamma)
    }

    /// The drift matrix `V` with `b(mu) = V mu` on the simplex, i.e.
    /// `V_ij = beta_i + B_ij`.
    pub fn drift_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.face_drift(i, j))
    }

    /// The martingale case `beta = 0, B = 0` with the same `gamma`.
    pub fn driftless(&self) -> Self {
        Self {
            d: self.d,
            beta: DVector::zeros(self.d),
            b: DMatrix::zeros(self.d, self.d),
            gamma: self.gamma.clone(),
        }
    }

    /// `beta = 0, B = 0` and constant off-diagonal `gamma`.
    pub fn driftless_uniform(d: usize, gamma: f64) -> Result<Self> {
        let mut g = DMatrix::from_element(d, d, gamma);
        g.fill_diagonal(0.0);
        Ok(Self::new(DVector::zeros(d), DMatrix::zeros(d, d), g)?)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `beta_i + B_ij`, the drift of asset `i` at the vertex `e_j`.
    pub fn face_drift(&self, i: usize, j: usize) -> f64 {
        self.beta[i] + self.b[(i, j)]
    }

    pub fn drift(&self, mu: &[f64]) -> DVector<f64> {
        let mut out = self.beta.clone();
        for i in 0..self.d {
            for j in 0..self.d {
                out[i] += self.b[(i, j)] * mu[j];
            }
        }
        out
    }

    /// Full `d x d` covariance matrix at `mu`.
    pub fn covariance(&self, mu: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let mut c = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut diag = 0.0;
            for j in 0..d {
                if i != j {
                    let v = self.gamma[(i, j)] * mu[i] * mu[j];
                    c[(i, j)] = -v;
                    diag += v;
                }
            }
            c[(i, i)] = diag;
        }
        c
    }

    /// Drift of the first `d - 1` coordinates.
    pub fn reduced_drift(&self, mu: &[f64]) -> DVector<f64> {
        self.drift(mu).rows(0, self.d - 1).into_owned()
    }

    /// Covariance of the first `d - 1` coordinates.
    pub fn reduced_covariance(&self, mu: &[f64]) -> DMatrix<f64> {
        let n = self.d - 1;
        self.covariance(mu).view((0, 0), (n, n)).into_owned()
    }

    /// Indices `j` whose drift vanishes on the whole face `{mu_j = 0}`, i.e.
    /// `beta_j + B_jk = 0` for every `k != j`.
    pub fn zero_face_drift_indices(&self) -> Vec<usize> {
        (0..self.d)
            .filter(|&j| (0..self.d).all(|k| k == j || self.face_drift(j, k) == 0.0))
            .collect()
    }

    /// Smallest off-diagonal entry of `gamma`.
    pub fn gamma_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    m = m.min(self.gamma[(i, j)]);
                }
            }
        }
        m
    }
}

/// `2 beta_i + min_{j != i} (2 B_ij - gamma_ij)`.
fn non_attainment_margin(params: &AdmissibleSimplexParameterSet, i: usize) -> f64 {
    let m = (0..params.d)
        .filter(|&j| j != i)
        .map(|j| 2.0 * params.b[(i, j)] - params.gamma[(i, j)])
        .fold(f64::INFINITY, f64::min);
    2.0 * params.beta[i] + m
}

/// Whether the face `{mu_i = 0}` can be reached in finite time.
pub fn boundary_attained(params: &AdmissibleSimplexParameterSet, i: usize) -> Result<bool> {
    if i >= params.d {
        return Err(Error::IndexOutOfRange {
            index: i,
            dim: params.d,
        });
    }
    Ok(non_attainment_margin(params, i) < 0.0)
}

/// Whether the model satisfies NUPBR and admits strong relative arbitrage.
///
/// True iff some asset has positive drift somewhere on its zero face, and
/// every such asset never reaches that face. All off-diagonal `gamma`
/// entries must be strictly positive.
pub fn classify_nupbr_arbitrage(params: &AdmissibleSimplexParameterSet) -> Result<bool> {
    let d = params.d;
    for i in 0..d {
        for j in 0..d {
            if i != j && params.gamma[(i, j)] <= 0.0 {
                return Err(Error::Hypothesis {
                    i,
                    j,
                    value: params.gamma[(i, j)],
                });
            }
        }
    }
    let positive: Vec<usize> = (0..d)
        .filter(|&i| (0..d).any(|j| j != i && params.face_drift(i, j) > 0.0))
        .collect();
    if positive.is_empty() {
        return Ok(false);
    }
    Ok(positive
        .iter()
        .all(|&i| non_attainment_margin(params, i) >= 0.0))
}

/// Lower bound `min_{i != j} gamma_ij (d - 1) / 2` on the excess growth rate.
pub fn excess_growth_lower_bound(params: &AdmissibleSimplexParameterSet) -> f64 {
    params.gamma_min() * (params.d as f64 - 1.0) / 2.0
}

/// Parameters of the total capitalization: drift `kappa + lambda Sigma`,
/// variance `phi Sigma + sigma^2 Sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalCapParams {
    pub kappa: f64,
    pub phi: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl TotalCapParams {
    pub fn validate(&self) -> std::result::Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        for (what, v) in [
            ("kappa", self.kappa),
            ("phi", self.phi),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
        ] {
            if !v.is_finite() {
                report.push(Violation::NonFinite {
                    what,
                    row: 0,
                    col: 0,
                });
            }
        }
        if self.kappa < 0.0 {
            report.push(Violation::TotalCapNegative {
                what: "kappa",
                value: self.kappa,
            });
        }
        if self.phi < 0.0 {
            report.push(Violation::TotalCapNegative {
                what: "phi",
                value: self.phi,
            });
        }
        report.into_result()
    }

    pub fn drift(&self, sigma_total: f64) -> f64 {
        self.kappa + self.lambda * sigma_total
    }

    pub fn variance(&self, sigma_total: f64) -> f64 {
        self.phi * sigma_total + self.sigma * self.sigma * sigma_total * sigma_total
    }
}

/// Whether the total capitalization stays strictly positive: `2 kappa - phi >= 0`.
pub fn sigma_strictly_positive(tc: &TotalCapParams) -> bool {
    2.0 * tc.kappa - tc.phi >= 0.0
}

/// Volatility stabilized model with parameter `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsmSpec {
    pub alpha: f64,
    pub d: usize,
}

/// Weight parameters together with total capitalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModelSpec {
    pub simplex: AdmissibleSimplexParameterSet,
    pub totalcap: TotalCapParams,
}

impl JointModelSpec {
    pub fn new(
        simplex: AdmissibleSimplexParameterSet,
        totalcap: TotalCapParams,
    ) -> std::result::Result<Self, ValidationReport> {
        totalcap.validate()?;
        Ok(Self { simplex, totalcap })
    }
}

pub fn vsm_to_params(spec: &VsmSpec) -> Result<JointModelSpec> {
    if !(spec.alpha >= 0.0) {
        return Err(ValidationReport {
            violations: vec![Violation::VsmAlphaNegative { alpha: spec.alpha }],
        }
        .into());
    }
    let d = spec.d;
    let h = (1.0 + spec.alpha) / 2.0;
    let beta = DVector::from_element(d, h);
    let b = DMatrix::from_diagonal_element(d, d, -(d as f64) * h);
    let mut gamma = DMatrix::from_element(d, d, 1.0);
    gamma.fill_diagonal(0.0);
    let simplex = validate_simplex_params(beta, b, gamma)?;
    Ok(JointModelSpec {
        simplex,
        totalcap: TotalCapParams {
            kappa: 0.0,
            phi: 0.0,
            lambda: d as f64 * h,
            sigma: 1.0,
        },
    })
}

/// All differential characteristics of the joint model at one state.
///
/// `c_mu_s[(i, j)]` is the covariance of `mu_i` with `S_j`; `c_sigma_s[i]` of
/// `Sigma` with `S_i`; `c_sigma_mu[i]` of `Sigma` with `mu_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCharacteristics {
    pub b_mu: DVector<f64>,
    pub c_mu: DMatrix<f64>,
    pub b_s: DVector<f64>,
    pub c_s: DMatrix<f64>,
    pub c_mu_s: DMatrix<f64>,
    pub b_sigma: f64,
    pub c_sigma: f64,
    pub c_sigma_s: DVector<f64>,
    pub c_sigma_mu: DVector<f64>,
}

pub fn joint_characteristics(
    spec: &JointModelSpec,
    mu: &[f64],
    sigma_total: f64,
) -> Result<JointCharacteristics> {
    let p = &spec.simplex;
    let tc = &spec.totalcap;
    let d = p.d;
    check_simplex_point(mu, d)?;
    if !(sigma_total > 0.0) {
        return Err(Error::NonPositive {
            what: "total capitalization",
            row: 0,
            col: 0,
            value: sigma_total,
        });
    }
    let s: Vec<f64> = mu.iter().map(|m| m * sigma_total).collect();
    let s2 = tc.sigma * tc.sigma;

    let b_mu = p.drift(mu);
    let c_mu = p.covariance(mu);

    let mut b_s = DVector::zeros(d);
    let mut c_s = DMatrix::zeros(d, d);
    let mut c_mu_s = DMatrix::zeros(d, d);
    let mut c_sigma_s = DVector::zeros(d);
    for i in 0..d {
        let mut bs = p.beta[i] * sigma_total + tc.kappa * mu[i] + tc.lambda * s[i];
        for j in 0..d {
            bs += p.b[(i, j)] * s[j];
        }
        b_s[i] = bs;

        let mut cs_ii = tc.phi * s[i] * mu[i] + s2 * s[i] * s[i];
        let mut cms_ii = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            let g = p.gamma[(i, j)];
            cs_ii += g * s[i] * s[j];
            cms_ii += g * s[i] * mu[j];
            c_s[(i, j)] = tc.phi * s[i] * mu[j] + s2 * s[i] * s[j] - g * s[i] * s[j];
            c_mu_s[(i, j)] = -g * mu[i] * s[j];
        }
        c_s[(i, i)] = cs_ii;
        c_mu_s[(i, i)] = cms_ii;
        c_sigma_s[i] = tc.phi * s[i] + s2 * s[i] * sigma_total;
    }

    Ok(JointCharacteristics {
        b_mu,
        c_mu,
        b_s,
        c_s,
        c_mu_s,
        b_sigma: tc.drift(sigma_total),
        c_sigma: tc.variance(sigma_total),
        c_sigma_s,
        c_sigma_mu: DVector::zeros(d),
    })
}

/// Capitalization model in which both `S` and `mu` are polynomial, with
/// per-asset growth rates `lambda_vec` and common variance level `zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropMainSpec {
    simplex: AdmissibleSimplexParameterSet,
    zeta: f64,
    lambda_vec: DVector<f64>,
}

impl PropMainSpec {
    pub fn new(
        simplex: AdmissibleSimplexParameterSet,
        zeta: f64,
        lambda_vec: DVector<f64>,
    ) -> std::result::Result<Self, ValidationReport> {
        let d = simplex.d;
        let mut report = ValidationReport::default();
        if lambda_vec.len() != d {
            report.push(Violation::Shape {
                what: "lambda",
                expected: format!("length {d}"),
                got: format!("length {}", lambda_vec.len()),
            });
            return Err(report);
        }
        if !zeta.is_finite() || lambda_vec.iter().any(|l| !l.is_finite()) {
            report.push(Violation::NonFinite {
                what: "zeta/lambda",
                row: 0,
                col: 0,
            });
            return Err(report);
        }
        let m = DMatrix::from_fn(d, d, |i, j| {
            zeta + lambda_vec[i] + lambda_vec[j] - simplex.gamma[(i, j)]
        });
        let min_eig = min_eigenvalue(&m);
        if min_eig < PSD_FLOOR {
            report.push(Violation::PropMainNotPsd {
                min_eigenvalue: min_eig,
            });
        }
        for i in 0..d {
            let v = zeta + 2.0 * lambda_vec[i];
            if v < 0.0 {
                report.push(Violation::PropMainVariance { i, value: v });
            }
        }
        report.into_result()?;
        Ok(Self {
            simplex,
            zeta,
            lambda_vec,
        })
    }

    pub fn simplex(&self) -> &AdmissibleSimplexParameterSet {
        &self.simplex
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn lambda_vec(&self) -> &DVector<f64> {
        &self.lambda_vec
    }
}

/// Drift and covariance of the capitalizations `S` at one state.
pub fn prop_main_characteristics(
    spec: &PropMainSpec,
    s: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = &spec.simplex;
    let d = p.d;
    if s.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: s.len(),
        });
    }
    if let Some((i, &v)) = s.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NonPositive {
            what: "capitalization",
            row: 0,
            col: i,
            value: v,
        });
    }
    let total: f64 = s.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonPositive {
            what: "total capitalization",
            row: 0,
            col: 0,
            value: total,
        });
    }
    let lam = &spec.lambda_vec;
    let zeta = spec.zeta;
    let mut b = DVector::zeros(d);
    let mut c = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut bi = p.beta[i] * total + lam[i] * s[i];
        for k in 0..d {
            bi += p.b[(i, k)] * s[k];
        }
        b[i] = bi;
        let mut cii = (zeta + 2.0 * lam[i]) * s[i] * s[i];
        for k in 0..d {
            if k != i {
                cii += p.gamma[(i, k)] * s[i] * s[k];
                c[(i, k)] = (zeta + lam[i] + lam[k] - p.gamma[(i, k)]) * s[i] * s[k];
            }
        }
        c[(i, i)] = cii;
    }
    Ok((b, c))
}

/// On-disk parameter file, either explicit or the volatility stabilized
/// shorthand `{"vsm": {"alpha": a, "d": d}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsFile {
    Vsm {
        vsm: VsmSpec,
    },
    Explicit {
        d: usize,
        beta: Vec<f64>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        gamma: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        totalcap: Option<TotalCapParams>,
    },
}

/// Parsed and validated model from a parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub simplex: AdmissibleSimplexParameterSet,
    pub totalcap: Option<TotalCapParams>,
}

impl LoadedModel {
    pub fn joint(&self) -> Option<JointModelSpec> {
        self.totalcap.map(|totalcap| JointModelSpec {
            simplex: self.simplex.clone(),
            totalcap,
        })
    }
}

fn matrix_from_rows(what: &'static str, rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(ValidationReport {
            violations: vec![Violation::Shape {
                what,
                expected: format!("{d}x{d}"),
                got: format!(
                    "{}x{}",
                    rows.len(),
                    rows.first().map(Vec::len).unwrap_or(0)
                ),
            }],
        }
        .into());
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl ParamsFile {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(&self) -> Result<LoadedModel> {
        match self {
            ParamsFile::Vsm { vsm } => {
                let joint = vsm_to_params(vsm)?;
                Ok(LoadedModel {
                    simplex: joint.simplex,
                    totalcap: Some(joint.totalcap),
                })
            }
            ParamsFile::Explicit {
                d,
                beta,
                b,
                gamma,
                totalcap,
            } => {
                if beta.len() != *d {
                    return Err(ValidationReport {
                        violations: vec![Violation::Shape {
                            what: "beta",
                            expected: format!("length {d}"),
                            got: format!("length {}", beta.len()),
                        }],
                    }
                    .into());
                }
                let simplex = validate_simplex_params(
                    DVector::from_vec(beta.clone()),
                    matrix_from_rows("B", b, *d)?,
                    matrix_from_rows("gamma", gamma, *d)?,
                )?;
                if let Some(tc) = totalcap {
                    tc.validate()?;
                }
                Ok(LoadedModel {
                    simplex,
                    totalcap: *totalcap,
                })
            }
        }
    }

    pub fn from_model(simplex: &AdmissibleSimplexParameterSet, totalcap: Option<TotalCapParams>) -> Self {
        let d = simplex.d;
        let rows = |m: &DMatrix<f64>| (0..d).map(|i| m.row(i).iter().copied().collect()).collect();
        ParamsFile::Explicit {
            d,
            beta: simplex.beta.iter().copied().collect(),
            b: rows(&simplex.b),
            gamma: rows(&simplex.gamma),
            totalcap,
        }
    }
}
