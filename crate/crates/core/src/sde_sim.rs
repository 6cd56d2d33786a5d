//! Monte Carlo simulation of weight, total capitalization and asset paths.
//!
//! Every path owns a ChaCha8 stream keyed by `(seed, tag, path index)`, so a
//! path's noise does not depend on how paths are scheduled across threads and
//! parallel runs reproduce serial ones bit for bit. The tag separates the
//! independent noise sources of one path (weights, total capitalization,
//! assets).
//!
//! Weights use Euler-Maruyama in full coordinates followed by clamping to
//! nonnegative values and renormalizing to unit sum. The projection keeps the
//! state on the simplex exactly but is only first order weak, and it lets
//! discrete paths touch faces that the continuous process never reaches.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_params::{
    sigma_strictly_positive, AdmissibleSimplexParameterSet, JointModelSpec, TotalCapParams, VsmSpec,
};
use crate::simplex_poly::check_simplex_point;

/// Floor applied to the total capitalization when it provably stays positive.
pub const SIGMA_FLOOR: f64 = 1e-12;
/// Default bound on the memory held by a stored [`PathBundle`].
pub const DEFAULT_MEMORY_CAP: usize = 1 << 31;

const TAG_WEIGHTS: u64 = 0;
const TAG_TOTAL_CAP: u64 = 1;
const TAG_ASSETS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerProject,
}

/// How the weight noise `L xi` with `L L' = c(mu)` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    /// One independent normal per pair `i < j`, entering as
    /// `sqrt(gamma_ij mu_i mu_j) (e_i - e_j)`. Exact, and needs no
    /// decomposition per step.
    #[default]
    Pairwise,
    /// Symmetric eigendecomposition of `c(mu)` with negative eigenvalues
    /// floored at zero.
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Keep every `stride`-th step in stored bundles. Must divide the step
    /// count.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub factorization: Factorization,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: usize,
}

fn default_stride() -> usize {
    1
}

fn default_memory_cap() -> usize {
    DEFAULT_MEMORY_CAP
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            dt,
            horizon,
            n_paths,
            seed,
            scheme: Scheme::EulerProject,
            stride: 1,
            factorization: Factorization::Pairwise,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_factorization(mut self, f: Factorization) -> Self {
        self.factorization = f;
        self
    }

    /// Number of time steps `T / dt`, which must be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("T = {} must be > 0", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
        }
        let ratio = self.horizon / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 4.0 * f64::EPSILON * ratio || n < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "T / dt = {ratio} is not an integer step count"
            )));
        }
        Ok(n as usize)
    }

    /// Time of step `k`; the last step is exactly `T`.
    pub fn time(&self, k: usize, n_steps: usize) -> f64 {
        if k == n_steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    fn stored_steps(&self, n_steps: usize) -> Result<Vec<usize>> {
        if self.stride == 0 || n_steps % self.stride != 0 {
            return Err(Error::InvalidArgument(format!(
                "stride {} must divide the step count {n_steps}",
                self.stride
            )));
        }
        Ok((0..=n_steps).step_by(self.stride).collect())
    }

    fn check_memory(&self, n_times: usize, per_time: usize) -> Result<()> {
        let bytes = self
            .n_paths
            .checked_mul(n_times)
            .and_then(|v| v.checked_mul(per_time))
            .and_then(|v| v.checked_mul(8));
        match bytes {
            Some(b) if b <= self.memory_cap_bytes => Ok(()),
            _ => Err(Error::InvalidArgument(format!(
                "{} paths x {n_times} stored times x {per_time} values exceed the memory cap of {} bytes; increase the stride",
                self.n_paths, self.memory_cap_bytes
            ))),
        }
    }
}

/// Random stream for one path and noise source.
pub fn path_rng(seed: u64, tag: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | path as u64);
    rng
}

/// Stored Monte Carlo paths. Arrays are flat and row-major:
/// `weights[(path * n_times + k) * d + i]`, `sigma[path * n_times + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub d: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Grid step index of every stored time.
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub caps: Option<Vec<f64>>,
}

impl PathBundle {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn weight(&self, path: usize, k: usize) -> &[f64] {
        let o = (path * self.n_times() + k) * self.d;
        &self.weights[o..o + self.d]
    }

    pub fn weight_path(&self, path: usize) -> &[f64] {
        let n = self.n_times() * self.d;
        &self.weights[path * n..(path + 1) * n]
    }

    pub fn terminal_weight(&self, path: usize) -> &[f64] {
        self.weight(path, self.n_times() - 1)
    }

    pub fn sigma_at(&self, path: usize, k: usize) -> Option<f64> {
        self.sigma.as_ref().map(|s| s[path * self.n_times() + k])
    }

    pub fn cap(&self, path: usize, k: usize) -> Option<&[f64]> {
        let o = (path * self.n_times() + k) * self.d;
        self.caps.as_ref().map(|c| &c[o..o + self.d])
    }

    /// Checks the stored-state invariants: weights in `[0, 1]` summing to one
    /// within `1e-12`, nonnegative `Sigma`, and `S = mu Sigma`.
    pub fn check_invariants(&self) -> Result<()> {
        for p in 0..self.n_paths {
            for k in 0..self.n_times() {
                let w = self.weight(p, k);
                if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return Err(Error::NotOnSimplex(format!("path {p} time {k}: {w:?}")));
                }
                let s: f64 = w.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::NotOnSimplex(format!("path {p} time {k}: sum {s}")));
                }
                if let Some(sig) = self.sigma_at(p, k) {
                    if !(sig >= 0.0) {
                        return Err(Error::NonPositive {
                            what: "Sigma",
                            row: p,
                            col: k,
                            value: sig,
                        });
                    }
                    if let Some(c) = self.cap(p, k) {
                        for i in 0..self.d {
                            if (c[i] - w[i] * sig).abs() > 1e-12 * sig.max(1.0) {
                                return Err(Error::InvalidArgument(format!(
                                    "caps differ from weights times Sigma at path {p} time {k}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes `path,step,time,mu_1..mu_d[,Sigma][,S_1..S_d]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "step".into(), "time".into()];
        header.extend((1..=self.d).map(|i| format!("mu_{i}")));
        if self.sigma.is_some() {
            header.push("Sigma".into());
        }
        if self.caps.is_some() {
            header.extend((1..=self.d).map(|i| format!("S_{i}")));
        }
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for p in 0..self.n_paths {
            for k in 0..self.n_times() {
                row.clear();
                row.push(p.to_string());
                row.push(self.steps[k].to_string());
                row.push(format!("{:?}", self.times[k]));
                row.extend(self.weight(p, k).iter().map(|v| format!("{v:?}")));
                if let Some(s) = self.sigma_at(p, k) {
                    row.push(format!("{s:?}"));
                }
                if let Some(c) = self.cap(p, k) {
                    row.extend(c.iter().map(|v| format!("{v:?}")));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Compact binary dump, all integers and floats little-endian:
    ///
    /// ```text
    /// magic    b"PSPTPATH"
    /// version  u32 = 1
    /// flags    u32   bit 0: Sigma present, bit 1: caps present
    /// n_paths  u64
    /// n_times  u64
    /// d        u64
    /// seed     u64
    /// steps    u64 x n_times
    /// times    f64 x n_times
    /// then for each path, for each time:
    ///          mu_1..mu_d (f64), [Sigma (f64)], [S_1..S_d (f64)]
    /// ```
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&1u32.to_le_bytes())?;
        let flags = u32::from(self.sigma.is_some()) | (u32::from(self.caps.is_some()) << 1);
        out.write_all(&flags.to_le_bytes())?;
        for v in [self.n_paths, self.n_times(), self.d] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&self.seed.to_le_bytes())?;
        for &s in &self.steps {
            out.write_all(&(s as u64).to_le_bytes())?;
        }
        for &t in &self.times {
            out.write_all(&t.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * (2 * self.d + 1));
        for p in 0..self.n_paths {
            for k in 0..self.n_times() {
                buf.clear();
                for v in self.weight(p, k) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(s) = self.sigma_at(p, k) {
                    buf.extend_from_slice(&s.to_le_bytes());
                }
                if let Some(c) = self.cap(p, k) {
                    for v in c {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                out.write_all(&buf)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("not a path bundle file".into()));
        }
        let version = read_u32(&mut input)?;
        if version != 1 {
            return Err(Error::Parse(format!("unsupported version {version}")));
        }
        let flags = read_u32(&mut input)?;
        let n_paths = read_u64(&mut input)? as usize;
        let n_times = read_u64(&mut input)? as usize;
        let d = read_u64(&mut input)? as usize;
        let seed = read_u64(&mut input)?;
        let steps = (0..n_times)
            .map(|_| read_u64(&mut input).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let times = (0..n_times)
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let has_sigma = flags & 1 != 0;
        let has_caps = flags & 2 != 0;
        let mut weights = Vec::with_capacity(n_paths * n_times * d);
        let mut sigma = has_sigma.then(|| Vec::with_capacity(n_paths * n_times));
        let mut caps = has_caps.then(|| Vec::with_capacity(n_paths * n_times * d));
        for _ in 0..n_paths * n_times {
            for _ in 0..d {
                weights.push(read_f64(&mut input)?);
            }
            if let Some(s) = sigma.as_mut() {
                s.push(read_f64(&mut input)?);
            }
            if let Some(c) = caps.as_mut() {
                for _ in 0..d {
                    c.push(read_f64(&mut input)?);
                }
            }
        }
        Ok(Self {
            d,
            n_paths,
            seed,
            steps,
            times,
            weights,
            sigma,
            caps,
        })
    }
}

const BINARY_MAGIC: &[u8; 8] = b"PSPTPATH";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Receives every step of one simulated weight path, including step 0.
pub trait PathObserver {
    type Output;
    fn observe(&mut self, step: usize, t: f64, mu: &[f64]) -> Result<()>;
    fn finish(self) -> Result<Self::Output>;
}

/// One Euler step of the weight SDE followed by the simplex projection.
pub struct WeightStepper<'a> {
    params: &'a AdmissibleSimplexParameterSet,
    pairs: Vec<(usize, usize, f64)>,
    factorization: Factorization,
    dt: f64,
    sqrt_dt: f64,
}

impl<'a> WeightStepper<'a> {
    pub fn new(params: &'a AdmissibleSimplexParameterSet, dt: f64, factorization: Factorization) -> Self {
        let d = params.d();
        let mut pairs = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let g = params.gamma()[(i, j)];
                if g > 0.0 {
                    pairs.push((i, j, g));
                }
            }
        }
        Self {
            params,
            pairs,
            factorization,
            dt,
            sqrt_dt: dt.sqrt(),
        }
    }

    /// Advances `mu` in place. `next` holds scratch space of length `d`.
    pub fn step<R: rand::Rng>(&self, mu: &mut [f64], next: &mut [f64], rng: &mut R) -> Result<()> {
        let d = mu.len();
        let beta = self.params.beta();
        let b = self.params.b();
        for i in 0..d {
            let mut drift = beta[i];
            for j in 0..d {
                drift += b[(i, j)] * mu[j];
            }
            next[i] = mu[i] + drift * self.dt;
        }
        match self.factorization {
            Factorization::Pairwise => {
                for &(i, j, g) in &self.pairs {
                    let xi: f64 = StandardNormal.sample(rng);
                    let v = (g * mu[i] * mu[j]).max(0.0).sqrt() * self.sqrt_dt * xi;
                    next[i] += v;
                    next[j] -= v;
                }
            }
            Factorization::Eigen => {
                let c = self.params.covariance(mu);
                let eig = SymmetricEigen::new(c);
                let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                for k in 0..d {
                    let l = eig.eigenvalues[k].max(0.0).sqrt() * self.sqrt_dt * xi[k];
                    if l == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        next[i] += eig.eigenvectors[(i, k)] * l;
                    }
                }
            }
        }
        project_to_simplex(next)?;
        mu.copy_from_slice(next);
        Ok(())
    }
}

/// Clamps negative entries to 0 and rescales to unit sum.
pub fn project_to_simplex(x: &mut [f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("weight state {x:?}")));
    }
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = x.iter().sum();
    if !(s > 0.0) {
        return Err(Error::NonFinite("weight state collapsed to zero".into()));
    }
    for v in x.iter_mut() {
        *v /= s;
    }
    Ok(())
}

fn check_interior(mu0: &[f64], d: usize) -> Result<()> {
    check_simplex_point(mu0, d)?;
    if let Some((i, &v)) = mu0.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::BoundaryInput { index: i, value: v });
    }
    Ok(())
}

/// Runs one weight path per index in parallel and collects observer outputs
/// in path order.
pub fn observe_weight_paths<O, F>(
    params: &AdmissibleSimplexParameterSet,
    mu0: &[f64],
    config: &PathConfig,
    make: F,
) -> Result<Vec<O::Output>>
where
    O: PathObserver,
    O::Output: Send,
    F: Fn(usize) -> O + Sync,
{
    let d = params.d();
    check_interior(mu0, d)?;
    let n_steps = config.n_steps()?;
    let stepper = WeightStepper::new(params, config.dt, config.factorization);
    (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.seed, TAG_WEIGHTS, p);
            let mut obs = make(p);
            let mut mu = mu0.to_vec();
            let mut next = vec![0.0; d];
            obs.observe(0, 0.0, &mu)?;
            for k in 1..=n_steps {
                stepper
                    .step(&mut mu, &mut next, &mut rng)
                    .map_err(|e| Error::NonFinite(format!("path {p} step {k}: {e}")))?;
                obs.observe(k, config.time(k, n_steps), &mu)?;
            }
            obs.finish()
        })
        .collect()
}

struct StoringObserver {
    stride: usize,
    buf: Vec<f64>,
}

impl PathObserver for StoringObserver {
    type Output = Vec<f64>;

    fn observe(&mut self, step: usize, _t: f64, mu: &[f64]) -> Result<()> {
        if step % self.stride == 0 {
            self.buf.extend_from_slice(mu);
        }
        Ok(())
    }

    fn finish(self) -> Result<Vec<f64>> {
        Ok(self.buf)
    }
}

fn grid(config: &PathConfig) -> Result<(usize, Vec<usize>, Vec<f64>)> {
    let n_steps = config.n_steps()?;
    let steps = config.stored_steps(n_steps)?;
    let times = steps.iter().map(|&k| config.time(k, n_steps)).collect();
    Ok((n_steps, steps, times))
}

pub fn simulate_weights(
    params: &AdmissibleSimplexParameterSet,
    mu0: &[f64],
    config: &PathConfig,
) -> Result<PathBundle> {
    let d = params.d();
    let (_, steps, times) = grid(config)?;
    config.check_memory(times.len(), d)?;
    let n_times = times.len();
    let per_path = observe_weight_paths(params, mu0, config, |_| StoringObserver {
        stride: config.stride,
        buf: Vec::with_capacity(n_times * d),
    })?;
    Ok(PathBundle {
        d,
        n_paths: config.n_paths,
        seed: config.seed,
        steps,
        times,
        weights: per_path.concat(),
        sigma: None,
        caps: None,
    })
}

/// One full-truncation Euler step for the total capitalization.
fn total_cap_step(tc: &TotalCapParams, x: f64, dt: f64, xi: f64, floor: bool) -> f64 {
    let xp = x.max(0.0);
    let var = (tc.phi * xp + tc.sigma * tc.sigma * xp * xp).max(0.0);
    let next = x + (tc.kappa + tc.lambda * xp) * dt + var.sqrt() * dt.sqrt() * xi;
    if floor {
        next.max(SIGMA_FLOOR)
    } else {
        next
    }
}

fn total_cap_paths(
    tc: &TotalCapParams,
    sigma0: f64,
    config: &PathConfig,
    stride: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::NonPositive {
            what: "initial total capitalization",
            row: 0,
            col: 0,
            value: sigma0,
        });
    }
    tc.validate()?;
    let n_steps = config.n_steps()?;
    let floor = sigma_strictly_positive(tc);
    (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.seed, TAG_TOTAL_CAP, p);
            let mut x = sigma0;
            let mut out = Vec::with_capacity(n_steps / stride + 1);
            out.push(x);
            for k in 1..=n_steps {
                let xi: f64 = StandardNormal.sample(&mut rng);
                x = total_cap_step(tc, x, config.dt, xi, floor);
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!("Sigma on path {p} step {k}")));
                }
                if k % stride == 0 {
                    out.push(x.max(0.0));
                }
            }
            Ok(out)
        })
        .collect()
}

/// Total capitalization paths. Stored values are `max(Sigma, 0)`; they are
/// floored at [`SIGMA_FLOOR`] when `2 kappa - phi >= 0`.
pub fn simulate_total_cap(tc: &TotalCapParams, sigma0: f64, config: &PathConfig) -> Result<PathBundle> {
    let (_, steps, times) = grid(config)?;
    config.check_memory(times.len(), 1)?;
    let sig = total_cap_paths(tc, sigma0, config, config.stride)?;
    Ok(PathBundle {
        d: 0,
        n_paths: config.n_paths,
        seed: config.seed,
        steps,
        times,
        weights: Vec::new(),
        sigma: Some(sig.concat()),
        caps: None,
    })
}

/// Weights and total capitalization driven by independent noise, with
/// capitalizations `S_i = mu_i Sigma`.
pub fn simulate_joint(
    spec: &JointModelSpec,
    mu0: &[f64],
    sigma0: f64,
    config: &PathConfig,
) -> Result<PathBundle> {
    let d = spec.simplex.d();
    let (_, steps, times) = grid(config)?;
    config.check_memory(times.len(), 2 * d + 1)?;
    let mut bundle = simulate_weights(&spec.simplex, mu0, config)?;
    let sigma = total_cap_paths(&spec.totalcap, sigma0, config, config.stride)?.concat();
    let n_times = times.len();
    let mut caps = vec![0.0; bundle.weights.len()];
    for (idx, &s) in sigma.iter().enumerate() {
        for i in 0..d {
            caps[idx * d + i] = bundle.weights[idx * d + i] * s;
        }
    }
    debug_assert_eq!(sigma.len(), config.n_paths * n_times);
    bundle.steps = steps;
    bundle.times = times;
    bundle.sigma = Some(sigma);
    bundle.caps = Some(caps);
    Ok(bundle)
}

/// Capitalizations of the volatility stabilized model,
/// `dS_i = (1 + alpha)/2 Sigma dt + sqrt(S_i Sigma) dW_i`, by full-truncation
/// Euler. Stored caps are `max(S_i, 0)`; weights and `Sigma` are derived from
/// them.
pub fn simulate_vsm_assets(spec: &VsmSpec, s0: &[f64], config: &PathConfig) -> Result<PathBundle> {
    vsm_assets(spec, s0, config, false)
}

/// Same model with strictly positive caps. In the clock `dtau = Sigma dt`
/// each `4 S_i` is a squared Bessel process of dimension `2 (1 + alpha)`, so
/// with `Sigma` frozen over a step the update is an exact noncentral
/// chi-square draw.
pub fn simulate_vsm_assets_bessel(spec: &VsmSpec, s0: &[f64], config: &PathConfig) -> Result<PathBundle> {
    vsm_assets(spec, s0, config, true)
}

struct TerminalWeight(Vec<f64>);

impl PathObserver for TerminalWeight {
    type Output = Vec<f64>;

    fn observe(&mut self, _step: usize, _t: f64, mu: &[f64]) -> Result<()> {
        self.0.clear();
        self.0.extend_from_slice(mu);
        Ok(())
    }

    fn finish(self) -> Result<Vec<f64>> {
        Ok(self.0)
    }
}

/// Terminal weights of `config.n_paths` paths without storing the paths.
pub fn terminal_weights(
    params: &AdmissibleSimplexParameterSet,
    mu0: &[f64],
    config: &PathConfig,
) -> Result<Vec<Vec<f64>>> {
    observe_weight_paths(params, mu0, config, |_| TerminalWeight(Vec::new()))
}

/// Noncentral chi-square draw as a Poisson mixture of central ones.
fn noncentral_chi_square(df: f64, noncentrality: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let m = if noncentrality > 0.0 {
        Poisson::new(noncentrality / 2.0)
            .map_err(|e| Error::NonFinite(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let c = ChiSquared::new(df + 2.0 * m).map_err(|e| Error::NonFinite(e.to_string()))?;
    Ok(c.sample(rng))
}

fn vsm_assets(spec: &VsmSpec, s0: &[f64], config: &PathConfig, bessel: bool) -> Result<PathBundle> {
    let d = spec.d;
    if s0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: s0.len(),
        });
    }
    if let Some((i, &v)) = s0.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            what: "initial capitalization",
            row: 0,
            col: i,
            value: v,
        });
    }
    if !(spec.alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {} must be >= 0", spec.alpha)));
    }
    let (n_steps, steps, times) = grid(config)?;
    config.check_memory(times.len(), 2 * d + 1)?;
    let h = (1.0 + spec.alpha) / 2.0;
    let delta = 2.0 * (1.0 + spec.alpha);
    let dt = config.dt;
    let sqrt_dt = dt.sqrt();
    let stride = config.stride;
    let per_path: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.seed, TAG_ASSETS, p);
            let mut s = s0.to_vec();
            let mut w = Vec::with_capacity((n_steps / stride + 1) * d);
            let mut sig = Vec::with_capacity(n_steps / stride + 1);
            let mut caps = Vec::with_capacity((n_steps / stride + 1) * d);
            let emit = |s: &[f64], w: &mut Vec<f64>, sig: &mut Vec<f64>, caps: &mut Vec<f64>| {
                let total: f64 = s.iter().map(|v| v.max(0.0)).sum();
                sig.push(total);
                for &v in s {
                    let vp = v.max(0.0);
                    caps.push(vp);
                    w.push(vp / total);
                }
            };
            emit(&s, &mut w, &mut sig, &mut caps);
            for k in 1..=n_steps {
                let total: f64 = s.iter().map(|v| v.max(0.0)).sum();
                if bessel {
                    let tau = total * dt;
                    for v in s.iter_mut() {
                        *v = tau / 4.0 * noncentral_chi_square(delta, 4.0 * *v / tau, &mut rng)?;
                    }
                } else {
                    for v in s.iter_mut() {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        let vp = v.max(0.0);
                        *v += h * total * dt + (vp * total).sqrt() * sqrt_dt * xi;
                    }
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("caps on path {p} step {k}")));
                }
                if s.iter().all(|v| *v <= 0.0) {
                    return Err(Error::NonFinite(format!("all caps vanished on path {p} step {k}")));
                }
                if k % stride == 0 {
                    emit(&s, &mut w, &mut sig, &mut caps);
                }
            }
            Ok((w, sig, caps))
        })
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(config.n_paths * times.len() * d);
    let mut sigma = Vec::with_capacity(config.n_paths * times.len());
    let mut caps = Vec::with_capacity(config.n_paths * times.len() * d);
    for (w, s, c) in per_path {
        weights.extend(w);
        sigma.extend(s);
        caps.extend(c);
    }
    Ok(PathBundle {
        d,
        n_paths: config.n_paths,
        seed: config.seed,
        steps,
        times,
        weights,
        sigma: Some(sigma),
        caps: Some(caps),
    })
}

/// Closed-form solution of the deterministic weight ODE `mu' = beta + B mu`.
pub fn linear_ode_solution(params: &AdmissibleSimplexParameterSet, mu0: &[f64], t: f64) -> Result<Vec<f64>> {
    // augment with a constant coordinate: d/dt (mu, 1) = [[B, beta], [0, 0]] (mu, 1)
    let d = params.d();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(params.b());
    m.view_mut((0, d), (d, 1)).copy_from(params.beta());
    let e = crate::linalg::expm(&(m * t))?;
    let mut x = nalgebra::DVector::zeros(d + 1);
    x.rows_mut(0, d).copy_from_slice(mu0);
    x[d] = 1.0;
    Ok((e * x).rows(0, d).iter().copied().collect())
}
