//! Capitalization and weight time series, realized covariance estimation of
//! `gamma`, and constrained drift regression.

use std::path::Path;

use chrono::DateTime;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::nnls;
use crate::model_params::AdmissibleSimplexParameterSet;
use crate::sde_sim::PathBundle;
use crate::simplex_poly::SIMPLEX_TOL;

/// Smallest accepted ratio of extreme eigenvalues of the scaled normal matrix.
pub const RANK_TOL: f64 = 1e-12;

fn check_times(t: &[f64]) -> Result<()> {
    for (k, w) in t.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonIncreasingTime(k + 1));
        }
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("timestamp".into()));
    }
    Ok(())
}

fn check_shape(t: &[f64], values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: values.nrows(),
        });
    }
    if values.ncols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 assets, got {}",
            values.ncols()
        )));
    }
    Ok(())
}

/// Capitalizations `caps[(k, i)]` of `d` assets at strictly increasing times
/// (seconds or any other fixed unit).
#[derive(Debug, Clone, PartialEq)]
pub struct CapTimeSeries {
    timestamps: Vec<f64>,
    caps: DMatrix<f64>,
}

impl CapTimeSeries {
    pub fn new(timestamps: Vec<f64>, caps: DMatrix<f64>) -> Result<Self> {
        check_shape(&timestamps, &caps)?;
        check_times(&timestamps)?;
        for r in 0..caps.nrows() {
            for c in 0..caps.ncols() {
                let v = caps[(r, c)];
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositive {
                        what: "capitalization",
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { timestamps, caps })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn caps(&self) -> &DMatrix<f64> {
        &self.caps
    }

    pub fn d(&self) -> usize {
        self.caps.ncols()
    }
}

/// Market weights `weights[(k, i)]` with rows on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTimeSeries {
    timestamps: Vec<f64>,
    weights: DMatrix<f64>,
}

impl WeightTimeSeries {
    pub fn new(timestamps: Vec<f64>, weights: DMatrix<f64>) -> Result<Self> {
        check_shape(&timestamps, &weights)?;
        check_times(&timestamps)?;
        for r in 0..weights.nrows() {
            let row = weights.row(r);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::NotOnSimplex(format!("row {r} sums to {sum}")));
            }
        }
        Ok(Self { timestamps, weights })
    }

    /// Stored weights of one simulated path.
    pub fn from_bundle(bundle: &PathBundle, path: usize) -> Result<Self> {
        if path >= bundle.n_paths {
            return Err(Error::IndexOutOfRange {
                index: path,
                dim: bundle.n_paths,
            });
        }
        let n = bundle.n_times();
        let w = DMatrix::from_fn(n, bundle.d, |k, i| bundle.weight(path, k)[i]);
        Self::new(bundle.times.clone(), w)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn d(&self) -> usize {
        self.weights.ncols()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.timestamps.last().unwrap_or(&0.0) - self.timestamps.first().unwrap_or(&0.0)
    }

    fn row(&self, k: usize) -> Vec<f64> {
        self.weights.row(k).iter().copied().collect()
    }

    fn check_interior(&self) -> Result<()> {
        for k in 0..self.len() {
            for i in 0..self.d() {
                let v = self.weights[(k, i)];
                if v <= 0.0 {
                    return Err(Error::BoundaryInput { index: i, value: v });
                }
            }
        }
        Ok(())
    }
}

pub fn caps_to_weights(ts: &CapTimeSeries) -> WeightTimeSeries {
    let mut w = ts.caps.clone();
    for mut row in w.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    WeightTimeSeries {
        timestamps: ts.timestamps.clone(),
        weights: w,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub gamma_hat: DMatrix<f64>,
    /// `sqrt(sum_t (dlog mu^i_t dlog mu^j_t)^2) / T`, zero on the diagonal.
    pub std_errors: DMatrix<f64>,
    pub span: f64,
    /// Number of off-diagonal pairs whose raw estimate was negative and was
    /// set to 0.
    pub clipped: usize,
}

/// `gamma_ij = -(1/T) sum_t dlog mu^i_t dlog mu^j_t` for `i != j`.
pub fn estimate_gamma(ws: &WeightTimeSeries) -> Result<GammaEstimate> {
    if ws.len() < 2 {
        return Err(Error::TooFewObservations {
            need: 2,
            got: ws.len(),
        });
    }
    ws.check_interior()?;
    let d = ws.d();
    let span = ws.span();
    let logs = ws.weights.map(f64::ln);
    let incs = logs.rows(1, ws.len() - 1) - logs.rows(0, ws.len() - 1);
    let mut gamma = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    let mut clipped = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let (mut s, mut s2) = (0.0, 0.0);
            for (a, b) in incs.column(i).iter().zip(incs.column(j).iter()) {
                s += a * b;
                s2 += (a * b) * (a * b);
            }
            let mut g = -s / span;
            if g < 0.0 {
                log::warn!("gamma estimate for pair ({i}, {j}) is {g:.3e} < 0; set to 0");
                clipped += 1;
                g = 0.0;
            }
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
            se[(i, j)] = s2.sqrt() / span;
            se[(j, i)] = se[(i, j)];
        }
    }
    Ok(GammaEstimate {
        gamma_hat: gamma,
        std_errors: se,
        span,
        clipped,
    })
}

/// Clips the off-diagonal entries of a drift matrix at 0 and resets the
/// diagonal to minus the off-diagonal column sums. This is the Euclidean
/// projection of the off-diagonal part onto the admissible cone and is
/// idempotent.
pub fn project_drift_matrix(v: &DMatrix<f64>) -> DMatrix<f64> {
    let d = v.nrows();
    let mut out = v.map(|x| x.max(0.0));
    for j in 0..d {
        out[(j, j)] = 0.0;
        let s: f64 = out.column(j).sum();
        out[(j, j)] = -s;
    }
    out
}

#[derive(Debug, Clone)]
pub struct DriftEstimate {
    pub params: AdmissibleSimplexParameterSet,
    /// Least squares drift matrix before the sign constraints.
    pub unconstrained: DMatrix<f64>,
    /// Heteroskedasticity-robust standard errors of the entries of
    /// `unconstrained`.
    pub std_errors: DMatrix<f64>,
    pub beta_std_errors: DVector<f64>,
    /// Number of off-diagonal entries held at 0 by the constraints.
    pub active_constraints: usize,
}

/// Regresses the increments of the first `d - 1` weights on
/// `b(mu) dt = V mu dt`, where the unknowns are the off-diagonal entries of `V`
/// and the diagonal is fixed by the zero column sums. The sign constraints
/// `V_ij >= 0` are imposed by nonnegative least squares on the same problem.
/// `gamma_hat` is carried into the returned parameters.
pub fn estimate_drift(ws: &WeightTimeSeries, gamma_hat: &GammaEstimate) -> Result<DriftEstimate> {
    let d = ws.d();
    if gamma_hat.gamma_hat.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: gamma_hat.gamma_hat.nrows(),
        });
    }
    let n_obs = ws.len();
    let p = d * (d - 1);
    if (n_obs.saturating_sub(1)) * (d - 1) < p {
        return Err(Error::TooFewObservations {
            need: p / (d - 1) + 1,
            got: n_obs,
        });
    }
    ws.check_interior()?;
    AdmissibleSimplexParameterSet::new(DVector::zeros(d), DMatrix::zeros(d, d), gamma_hat.gamma_hat.clone())?;

    // unknown index of V_ij, i != j
    let unknowns: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();

    // V_ij enters b_i with +mu_j and b_j with -mu_j
    let fill_row = |row: &mut DVector<f64>, mu: &[f64], dt: f64, comp: usize| {
        row.fill(0.0);
        for (u, &(i, j)) in unknowns.iter().enumerate() {
            if i == comp {
                row[u] += mu[j] * dt;
            }
            if j == comp {
                row[u] -= mu[j] * dt;
            }
        }
    };
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut row = DVector::<f64>::zeros(p);
    for k in 0..n_obs - 1 {
        let mu = ws.row(k);
        let dt = ws.timestamps[k + 1] - ws.timestamps[k];
        for comp in 0..d - 1 {
            fill_row(&mut row, &mu, dt, comp);
            let y = ws.weights[(k + 1, comp)] - ws.weights[(k, comp)];
            xtx.ger(1.0, &row, &row, 1.0);
            xty.axpy(y, &row, 1.0);
        }
    }

    let scale = DVector::from_fn(p, |u, _| xtx[(u, u)].sqrt().max(f64::MIN_POSITIVE));
    let scaled = DMatrix::from_fn(p, p, |a, b| xtx[(a, b)] / (scale[a] * scale[b]));
    let eig = scaled.symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    let chol = xtx.clone().cholesky().ok_or(Error::RankDeficient { ratio })?;
    let theta_ls = chol.solve(&xty);
    let bread = chol.inverse();

    // sandwich covariance, clustered by time step since the d - 1 equations
    // of one step share their noise
    let mut meat = DMatrix::<f64>::zeros(p, p);
    let mut score = DVector::<f64>::zeros(p);
    for k in 0..n_obs - 1 {
        let mu = ws.row(k);
        let dt = ws.timestamps[k + 1] - ws.timestamps[k];
        score.fill(0.0);
        for comp in 0..d - 1 {
            fill_row(&mut row, &mu, dt, comp);
            let e = ws.weights[(k + 1, comp)] - ws.weights[(k, comp)] - row.dot(&theta_ls);
            score.axpy(e, &row, 1.0);
        }
        meat.ger(1.0, &score, &score, 1.0);
    }
    let cov = &bread * meat * &bread;

    // NNLS on the Cholesky form: |L^T x - L^{-1} X^T y|^2 differs from the
    // residual sum of squares by a constant.
    let l = chol.l();
    let rhs = l
        .solve_lower_triangular(&xty)
        .ok_or_else(|| Error::NonFinite("triangular solve".into()))?;
    let theta = if theta_ls.iter().all(|&v| v >= 0.0) {
        theta_ls.clone()
    } else {
        nnls(&l.transpose(), &rhs)?
    };
    let active = theta.iter().filter(|&&v| v == 0.0).count();

    let to_matrix = |th: &DVector<f64>| {
        let mut v = DMatrix::zeros(d, d);
        for (u, &(i, j)) in unknowns.iter().enumerate() {
            v[(i, j)] = th[u];
        }
        project_off_diagonal_sums(&mut v);
        v
    };
    let unconstrained = to_matrix(&theta_ls);
    let fitted = to_matrix(&theta);

    // every entry of V is a linear function of the unknowns
    let coef = |i: usize, j: usize| -> DVector<f64> {
        let mut g = DVector::zeros(p);
        for (u, &(a, b)) in unknowns.iter().enumerate() {
            if i != j && a == i && b == j {
                g[u] = 1.0;
            }
            if i == j && b == j {
                g[u] = -1.0;
            }
        }
        g
    };
    let std_errors = DMatrix::from_fn(d, d, |i, j| {
        let g = coef(i, j);
        g.dot(&(&cov * &g)).max(0.0).sqrt()
    });
    let beta_std_errors = DVector::from_fn(d, |i, _| std_errors[(i, d - 1)]);

    let params = AdmissibleSimplexParameterSet::from_drift_matrix(&fitted, gamma_hat.gamma_hat.clone())?;
    Ok(DriftEstimate {
        params,
        unconstrained,
        std_errors,
        beta_std_errors,
        active_constraints: active,
    })
}

fn project_off_diagonal_sums(v: &mut DMatrix<f64>) {
    for j in 0..v.ncols() {
        v[(j, j)] = 0.0;
        let s: f64 = v.column(j).sum();
        v[(j, j)] = -s;
    }
}

/// Contents of a capitalization or weight CSV file.
#[derive(Debug, Clone)]
pub enum SeriesInput {
    Caps(CapTimeSeries),
    Weights(WeightTimeSeries),
}

impl SeriesInput {
    pub fn into_weights(self) -> WeightTimeSeries {
        match self {
            SeriesInput::Caps(c) => caps_to_weights(&c),
            SeriesInput::Weights(w) => w,
        }
    }
}

/// A parsed series together with the number of rows dropped for missing
/// values.
#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: SeriesInput,
    pub dropped_rows: usize,
}

/// Parses a timestamp given as epoch seconds or RFC 3339.
pub fn parse_timestamp(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let dt = DateTime::parse_from_rfc3339(s).map_err(|e| Error::Parse(format!("timestamp {s:?}: {e}")))?;
    Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
}

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("null")
}

/// Reads a CSV with a `time` column and either `cap_1..cap_d` or
/// `mu_1..mu_d` columns; other columns are ignored. If a `path` column is
/// present, only rows whose path equals `path` are kept. Rows with a missing
/// value are dropped.
pub fn read_series_csv<R: std::io::Read>(reader: R, path: Option<u64>) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_col = find("time").ok_or_else(|| Error::Parse("missing `time` column".into()))?;
    let path_col = find("path");
    let cols_for = |prefix: &str| -> Vec<usize> {
        (1..).map_while(|i| find(&format!("{prefix}{i}"))).collect()
    };
    let (is_caps, cols) = {
        let caps = cols_for("cap_");
        if !caps.is_empty() {
            (true, caps)
        } else {
            (false, cols_for("mu_"))
        }
    };
    if cols.len() < 2 {
        return Err(Error::Parse("need columns cap_1..cap_d or mu_1..mu_d with d >= 2".into()));
    }
    let d = cols.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if let (Some(pc), Some(want)) = (path_col, path) {
            let p: u64 = rec
                .get(pc)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Parse("bad `path` value".into()))?;
            if p != want {
                continue;
            }
        }
        let fields: Vec<&str> = std::iter::once(time_col)
            .chain(cols.iter().copied())
            .map(|c| rec.get(c).unwrap_or(""))
            .collect();
        if fields.iter().any(|f| is_missing(f)) {
            dropped += 1;
            continue;
        }
        times.push(parse_timestamp(fields[0])?);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse(format!("bad number {f:?}")))?;
            values.push(v);
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing values");
    }
    let m = DMatrix::from_row_slice(times.len(), d, &values);
    let series = if is_caps {
        SeriesInput::Caps(CapTimeSeries::new(times, m)?)
    } else {
        SeriesInput::Weights(WeightTimeSeries::new(times, m)?)
    };
    Ok(LoadedSeries {
        series,
        dropped_rows: dropped,
    })
}

pub fn load_series_csv(file: &Path, path: Option<u64>) -> Result<LoadedSeries> {
    read_series_csv(std::fs::File::open(file)?, path)
}
