//! Market price of risk, deflators, self-financing wealth and the
//! approximate optimal arbitrage engine.
//!
//! Reduced quantities (marked with a tilde) drop the last coordinate:
//! `b~` and `c~` are the drift and covariance of `(mu_1, ..., mu_{d-1})`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bernstein::{
    build_bernstein_generator, eval_bernstein, gradient_bernstein, BernsteinPolynomial,
    HomogeneousBasis, HomogeneousPolynomial,
};
use crate::error::{Error, Result};
use crate::linalg::pinv_solve_symmetric;
use crate::model_params::{classify_nupbr_arbitrage, AdmissibleSimplexParameterSet};
use crate::sde_sim::{observe_weight_paths, PathBundle, PathConfig, PathObserver};
use crate::simplex_poly::{check_simplex_point, MAX_DEGREE};
use crate::stats::Estimate;

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Largest accepted residual `|c~ lambda~ - b~|`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// A simulated path whose weight `j` (outside the zero-face-drift set) falls
/// to this level has left the domain of the deflator; its deflator is set to 0
/// from then on.
pub const EXIT_LEVEL: f64 = 1e-10;

fn check_interior(mu: &[f64], d: usize) -> Result<()> {
    check_simplex_point(mu, d)?;
    if let Some((i, &v)) = mu.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::BoundaryInput { index: i, value: v });
    }
    Ok(())
}

/// Reduced covariance for unit `gamma`: `a~_kk = mu_k (1 - mu_k)`,
/// `a~_kl = -mu_k mu_l`.
pub fn a_tilde(mu: &[f64]) -> DMatrix<f64> {
    let n = mu.len() - 1;
    DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            mu[k] * (1.0 - mu[k])
        } else {
            -mu[k] * mu[l]
        }
    })
}

/// Closed-form inverse of [`a_tilde`]: `1/mu_k + 1/mu_d` on the diagonal and
/// `1/mu_d` off it.
pub fn a_tilde_inverse(mu: &[f64], d: usize) -> Result<DMatrix<f64>> {
    check_interior(mu, d)?;
    let n = d - 1;
    let inv_last = 1.0 / mu[d - 1];
    Ok(DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            1.0 / mu[k] + inv_last
        } else {
            inv_last
        }
    }))
}

/// Market price of risk `lambda~ = (c~)^+ b~` of a parameter set.
#[derive(Debug, Clone)]
pub struct MarketPriceOfRisk {
    params: AdmissibleSimplexParameterSet,
    outside_j: Vec<usize>,
}

impl MarketPriceOfRisk {
    pub fn new(params: &AdmissibleSimplexParameterSet) -> Self {
        let j = params.zero_face_drift_indices();
        let outside_j = (0..params.d()).filter(|i| !j.contains(i)).collect();
        Self {
            params: params.clone(),
            outside_j,
        }
    }

    pub fn params(&self) -> &AdmissibleSimplexParameterSet {
        &self.params
    }

    /// Whether `mu` is at distance at least `level` from every face on which
    /// the drift does not vanish identically.
    pub fn in_domain(&self, mu: &[f64], level: f64) -> bool {
        self.outside_j.iter().all(|&j| mu[j] > level)
    }

    /// `(lambda~, b~, c~)` at `mu`.
    pub fn evaluate(&self, mu: &[f64]) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
        let b = self.params.reduced_drift(mu);
        let c = self.params.reduced_covariance(mu);
        let lambda = if c.nrows() == 1 {
            if c[(0, 0)] > 0.0 {
                DVector::from_element(1, b[0] / c[(0, 0)])
            } else {
                DVector::zeros(1)
            }
        } else {
            pinv_solve_symmetric(&c, &b, PINV_CUTOFF)
        };
        let residual = (&c * &lambda - &b).amax();
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::Residual { residual });
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("market price of risk".into()));
        }
        Ok((lambda, b, c))
    }
}

pub fn lambda_tilde(params: &AdmissibleSimplexParameterSet, mu: &[f64]) -> Result<DVector<f64>> {
    check_simplex_point(mu, params.d())?;
    MarketPriceOfRisk::new(params).evaluate(mu).map(|(l, _, _)| l)
}

/// Deflator values on the stored grid of a bundle: `z[path * n_times + k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeflatorPath {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub z: Vec<f64>,
    /// Whether the path left the domain of the deflator, after which its
    /// deflator is 0.
    pub exited: Vec<bool>,
}

impl DeflatorPath {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn terminal(&self, path: usize) -> f64 {
        self.z[path * self.n_times() + self.n_times() - 1]
    }

    pub fn exit_count(&self) -> usize {
        self.exited.iter().filter(|&&e| e).count()
    }
}

/// Log-Euler recursion for one deflator path.
#[derive(Debug, Clone)]
pub struct DeflatorStepper<'a> {
    mpr: &'a MarketPriceOfRisk,
    log_z: f64,
    exited: bool,
    prev: Vec<f64>,
    prev_t: f64,
    started: bool,
}

impl<'a> DeflatorStepper<'a> {
    pub fn new(mpr: &'a MarketPriceOfRisk) -> Self {
        Self {
            mpr,
            log_z: 0.0,
            exited: false,
            prev: Vec::new(),
            prev_t: 0.0,
            started: false,
        }
    }

    /// Feeds the next state and returns the current deflator value.
    pub fn push(&mut self, t: f64, mu: &[f64]) -> Result<f64> {
        if !self.started {
            self.started = true;
            self.prev = mu.to_vec();
            self.prev_t = t;
            if !self.mpr.in_domain(mu, EXIT_LEVEL) {
                self.exited = true;
            }
            return Ok(self.value());
        }
        if !self.exited {
            let dt = t - self.prev_t;
            let (lambda, b, c) = self.mpr.evaluate(&self.prev)?;
            let n = lambda.len();
            let mut inc = 0.0;
            for i in 0..n {
                inc -= lambda[i] * ((mu[i] - self.prev[i]) - b[i] * dt);
            }
            inc -= 0.5 * lambda.dot(&(&c * &lambda)) * dt;
            if !inc.is_finite() {
                return Err(Error::NonFinite(format!("deflator increment at t = {t}")));
            }
            self.log_z += inc;
            if !self.mpr.in_domain(mu, EXIT_LEVEL) {
                self.exited = true;
            }
        }
        self.prev.copy_from_slice(mu);
        self.prev_t = t;
        Ok(self.value())
    }

    pub fn value(&self) -> f64 {
        if self.exited {
            0.0
        } else {
            self.log_z.exp()
        }
    }

    pub fn exited(&self) -> bool {
        self.exited
    }
}

pub fn deflator_path(params: &AdmissibleSimplexParameterSet, weights: &PathBundle) -> Result<DeflatorPath> {
    if weights.d != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            got: weights.d,
        });
    }
    let mpr = MarketPriceOfRisk::new(params);
    let n_times = weights.n_times();
    let mut z = Vec::with_capacity(weights.n_paths * n_times);
    let mut exited = Vec::with_capacity(weights.n_paths);
    for p in 0..weights.n_paths {
        let mut st = DeflatorStepper::new(&mpr);
        for k in 0..n_times {
            z.push(st.push(weights.times[k], weights.weight(p, k))?);
        }
        exited.push(st.exited());
    }
    Ok(DeflatorPath {
        times: weights.times.clone(),
        n_paths: weights.n_paths,
        z,
        exited,
    })
}

/// Monte Carlo estimate of the superhedging price of 1, `U_T = E[Z_T]`.
#[derive(Debug, Clone, Serialize)]
pub struct SuperhedgeEstimate {
    pub horizon: f64,
    pub estimate: Estimate,
    pub exits: usize,
}

struct TerminalDeflator<'a> {
    st: DeflatorStepper<'a>,
    mu_t: Vec<f64>,
}

impl PathObserver for TerminalDeflator<'_> {
    type Output = (f64, Vec<f64>, bool);

    fn observe(&mut self, _step: usize, t: f64, mu: &[f64]) -> Result<()> {
        self.st.push(t, mu)?;
        self.mu_t.clear();
        self.mu_t.extend_from_slice(mu);
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        Ok((self.st.value(), self.mu_t, self.st.exited()))
    }
}

/// Terminal deflators and weights of freshly simulated paths, streamed.
pub fn terminal_deflators(
    params: &AdmissibleSimplexParameterSet,
    mu0: &[f64],
    config: &PathConfig,
) -> Result<Vec<(f64, Vec<f64>, bool)>> {
    let mpr = MarketPriceOfRisk::new(params);
    observe_weight_paths(params, mu0, config, |_| TerminalDeflator {
        st: DeflatorStepper::new(&mpr),
        mu_t: Vec::new(),
    })
}

/// `E[Z_T]` over `config.n_paths` paths with horizon `horizon` (which
/// replaces `config`'s).
pub fn superhedge_price_mc(
    params: &AdmissibleSimplexParameterSet,
    horizon: f64,
    mu0: &[f64],
    config: &PathConfig,
) -> Result<SuperhedgeEstimate> {
    let mut cfg = config.clone();
    cfg.horizon = horizon;
    let out = terminal_deflators(params, mu0, &cfg)?;
    let zs: Vec<f64> = out.iter().map(|(z, _, _)| *z).collect();
    Ok(SuperhedgeEstimate {
        horizon,
        estimate: Estimate::from_samples(&zs),
        exits: out.iter().filter(|(_, _, e)| *e).count(),
    })
}

/// Share holdings on a stored grid: `theta[(path * n_times + k) * d + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub d: usize,
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
}

impl StrategyPath {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn at(&self, path: usize, k: usize) -> &[f64] {
        let o = (path * self.n_times() + k) * self.d;
        &self.theta[o..o + self.d]
    }
}

/// Relative wealth `y[path * n_times + k]` with `Y_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
}

impl WealthPath {
    pub fn terminal(&self, path: usize) -> f64 {
        self.y[(path + 1) * self.times.len() - 1]
    }
}

/// `Y_{k+1} = Y_k + sum_i theta^i_k (mu^i_{k+1} - mu^i_k)`, `Y_0 = 1`.
pub fn self_financing_wealth(theta: &StrategyPath, weights: &PathBundle) -> Result<WealthPath> {
    if theta.d != weights.d || theta.n_paths != weights.n_paths {
        return Err(Error::GridMismatch(format!(
            "strategy is {} paths x {} assets, weights are {} x {}",
            theta.n_paths, theta.d, weights.n_paths, weights.d
        )));
    }
    if theta.times != weights.times {
        return Err(Error::GridMismatch("time grids differ".into()));
    }
    let n_times = weights.n_times();
    let mut y = Vec::with_capacity(weights.n_paths * n_times);
    for p in 0..weights.n_paths {
        let mut w = 1.0;
        y.push(w);
        for k in 1..n_times {
            let th = theta.at(p, k - 1);
            let a = weights.weight(p, k - 1);
            let b = weights.weight(p, k);
            w += (0..weights.d).map(|i| th[i] * (b[i] - a[i])).sum::<f64>();
            y.push(w);
        }
    }
    Ok(WealthPath {
        n_paths: weights.n_paths,
        times: weights.times.clone(),
        y,
    })
}

/// Portfolio weights `pi^i = mu^i (theta^i / Y + 1 - sum_j mu^j theta^j / Y)`
/// of a strategy holding `theta` at relative wealth `Y`.
pub fn theta_to_portfolio(theta: &[f64], mu: &[f64], y: f64) -> Result<Vec<f64>> {
    let d = mu.len();
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    check_simplex_point(mu, d)?;
    if !(y > 0.0) {
        return Err(Error::NonPositiveWealth(y));
    }
    let avg: f64 = mu.iter().zip(theta).map(|(m, t)| m * t).sum::<f64>() / y;
    Ok(mu
        .iter()
        .zip(theta)
        .map(|(m, t)| m * (t / y + 1.0 - avg))
        .collect())
}

/// Shannon entropy `H(mu) = -sum mu_i log mu_i`.
pub fn entropy(mu: &[f64]) -> f64 {
    -mu.iter().map(|&m| if m > 0.0 { m * m.ln() } else { 0.0 }).sum::<f64>()
}

/// Portfolio generated by the entropy function: `pi^i = -mu^i log mu^i / H(mu)`.
/// This is [`theta_to_portfolio`] applied to the gradient of `H` at wealth `H`.
pub fn entropy_portfolio(mu: &[f64]) -> Result<Vec<f64>> {
    let d = mu.len();
    check_interior(mu, d)?;
    let h = entropy(mu);
    Ok(mu.iter().map(|&m| -m * m.ln() / h).collect())
}

/// Payoff polynomial `1 - (1 - d^d mu_1 ... mu_d)^n`, which vanishes on the
/// boundary of the simplex and increases to 1 in the interior as `n` grows.
/// For `d = 2` this is `1 - (1 - 4 mu_1 mu_2)^n`.
pub fn default_payoff(d: usize, n: u32) -> Result<BernsteinPolynomial> {
    let degree = d * n as usize;
    if degree > MAX_DEGREE {
        return Err(Error::DegreeCap {
            degree,
            cap: MAX_DEGREE,
        });
    }
    let scale = (d as f64).powi(d as i32);
    let q = HomogeneousPolynomial::unit(d, d)?.sub(&HomogeneousPolynomial::product_all(d)?.scale(scale))?;
    HomogeneousPolynomial::unit(d, degree)?
        .sub(&q.pow(n)?)?
        .to_bernstein()
}

/// Time-dependent price polynomial `p(t, .)` of a payoff under the driftless
/// dynamics, tabulated on the grid `t_k = k dt`, and the hedging strategy
/// `theta_t = grad p(t, mu_t) / p(0, mu_0)`.
#[derive(Debug, Clone)]
pub struct ArbitrageEngine {
    params: AdmissibleSimplexParameterSet,
    basis: Arc<HomogeneousBasis>,
    payoff: Vec<f64>,
    /// `table[k]` are the Bernstein coefficients of `p(t_k, .)`.
    table: Vec<Vec<f64>>,
    times: Vec<f64>,
    mu0: Vec<f64>,
    price: f64,
}

impl ArbitrageEngine {
    pub fn new(
        params: &AdmissibleSimplexParameterSet,
        payoff: &BernsteinPolynomial,
        mu0: &[f64],
        config: &PathConfig,
    ) -> Result<Self> {
        let d = params.d();
        check_interior(mu0, d)?;
        if payoff.d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: payoff.d(),
            });
        }
        let n_steps = config.n_steps()?;
        let gen = build_bernstein_generator(&params.driftless(), payoff.degree())?;
        let phi = gen.propagator(config.dt)?;
        let mut table = vec![Vec::new(); n_steps + 1];
        let mut c = DVector::from_column_slice(payoff.coeffs());
        table[n_steps] = c.as_slice().to_vec();
        for k in (0..n_steps).rev() {
            c = &phi * c;
            table[k] = c.as_slice().to_vec();
        }
        let basis = Arc::new(payoff.basis().clone());
        let price = eval_bernstein(&basis, &table[0], mu0);
        if !(price > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "payoff price {price} at the initial point must be positive"
            )));
        }
        let times = (0..=n_steps).map(|k| config.time(k, n_steps)).collect();
        Ok(Self {
            params: params.clone(),
            basis,
            payoff: payoff.coeffs().to_vec(),
            table,
            times,
            mu0: mu0.to_vec(),
            price,
        })
    }

    /// `p(0, mu_0)`.
    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `p(t_k, mu)`.
    pub fn value(&self, k: usize, mu: &[f64]) -> f64 {
        eval_bernstein(&self.basis, &self.table[k], mu)
    }

    /// `p(T, mu)`, the payoff.
    pub fn payoff(&self, mu: &[f64]) -> f64 {
        eval_bernstein(&self.basis, &self.payoff, mu)
    }

    /// Holdings `grad p(t_k, mu) / p(0, mu_0)` with the last component 0.
    pub fn theta(&self, k: usize, mu: &[f64]) -> Vec<f64> {
        let mut g = gradient_bernstein(&self.basis, &self.table[k], mu);
        for v in g.iter_mut() {
            *v /= self.price;
        }
        g
    }

    /// Strategy evaluated on the stored grid of a bundle simulated with the
    /// engine's `dt` and horizon.
    pub fn strategy_path(&self, bundle: &PathBundle) -> Result<StrategyPath> {
        let last = *bundle.steps.last().unwrap_or(&0);
        if last + 1 != self.table.len() || bundle.d != self.params.d() {
            return Err(Error::GridMismatch(
                "bundle grid does not match the engine grid".into(),
            ));
        }
        let mut theta = Vec::with_capacity(bundle.n_paths * bundle.n_times() * bundle.d);
        for p in 0..bundle.n_paths {
            for (k, &step) in bundle.steps.iter().enumerate() {
                theta.extend(self.theta(step, bundle.weight(p, k)));
            }
        }
        Ok(StrategyPath {
            d: bundle.d,
            n_paths: bundle.n_paths,
            times: bundle.times.clone(),
            theta,
        })
    }

    pub fn initial_point(&self) -> &[f64] {
        &self.mu0
    }
}

/// Per-path result of running the arbitrage strategy.
#[derive(Debug, Clone, Copy)]
pub struct ArbitragePathOutcome {
    pub wealth: f64,
    /// `p(mu_T) / p(0, mu_0)`, the wealth of the continuous-time strategy.
    pub target: f64,
    pub deflator: f64,
    pub exited: bool,
}

struct ArbitrageObserver<'a> {
    engine: &'a ArbitrageEngine,
    deflator: DeflatorStepper<'a>,
    prev: Vec<f64>,
    theta: Vec<f64>,
    wealth: f64,
}

impl PathObserver for ArbitrageObserver<'_> {
    type Output = ArbitragePathOutcome;

    fn observe(&mut self, step: usize, t: f64, mu: &[f64]) -> Result<()> {
        if step > 0 {
            self.wealth += (0..mu.len())
                .map(|i| self.theta[i] * (mu[i] - self.prev[i]))
                .sum::<f64>();
        }
        self.deflator.push(t, mu)?;
        if step + 1 < self.engine.table.len() {
            self.theta = self.engine.theta(step, mu);
        }
        self.prev.clear();
        self.prev.extend_from_slice(mu);
        Ok(())
    }

    fn finish(self) -> Result<ArbitragePathOutcome> {
        Ok(ArbitragePathOutcome {
            wealth: self.wealth,
            target: self.engine.payoff(&self.prev) / self.engine.price,
            deflator: self.deflator.value(),
            exited: self.deflator.exited(),
        })
    }
}

/// Simulates paths under `params` and runs the engine's strategy and the
/// deflator along each of them.
pub fn run_arbitrage_paths(
    engine: &ArbitrageEngine,
    config: &PathConfig,
) -> Result<Vec<ArbitragePathOutcome>> {
    let n_steps = config.n_steps()?;
    if n_steps + 1 != engine.table.len() {
        return Err(Error::GridMismatch(
            "configuration grid does not match the engine grid".into(),
        ));
    }
    let mpr = MarketPriceOfRisk::new(&engine.params);
    observe_weight_paths(&engine.params, &engine.mu0, config, |_| ArbitrageObserver {
        engine,
        deflator: DeflatorStepper::new(&mpr),
        prev: Vec::new(),
        theta: Vec::new(),
        wealth: 1.0,
    })
}

/// Summary of one approximate arbitrage run.
#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageReport {
    pub n: u32,
    pub degree: usize,
    /// `p_n(0, mu_0)`, the initial capital required by the strategy.
    pub price: f64,
    /// Fraction of paths with terminal relative wealth above 1.
    pub prob_outperform: Estimate,
    pub terminal_wealth: Estimate,
    /// Root mean square of `Y_T - p_n(mu_T) / p_n(0, mu_0)`.
    pub terminal_rms_error: f64,
    pub terminal_max_error: f64,
    /// `E[Z_T]` on the same paths.
    pub superhedge: Estimate,
    pub exits: usize,
}

/// Builds the default payoff of order `n`, prices it under the driftless
/// dynamics, and runs the hedge on simulated paths up to `horizon`.
pub fn approximate_optimal_arbitrage(
    params: &AdmissibleSimplexParameterSet,
    n: u32,
    horizon: f64,
    mu0: &[f64],
    config: &PathConfig,
) -> Result<ArbitrageReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !classify_nupbr_arbitrage(params)? {
        return Err(Error::NoArbitrage);
    }
    let mut cfg = config.clone();
    cfg.horizon = horizon;
    let payoff = default_payoff(params.d(), n)?;
    let engine = ArbitrageEngine::new(params, &payoff, mu0, &cfg)?;
    let outcomes = run_arbitrage_paths(&engine, &cfg)?;
    Ok(summarize(n, payoff.degree(), engine.price(), &outcomes))
}

fn summarize(n: u32, degree: usize, price: f64, outcomes: &[ArbitragePathOutcome]) -> ArbitrageReport {
    let ind: Vec<f64> = outcomes
        .iter()
        .map(|o| if o.wealth > 1.0 { 1.0 } else { 0.0 })
        .collect();
    let wealth: Vec<f64> = outcomes.iter().map(|o| o.wealth).collect();
    let z: Vec<f64> = outcomes.iter().map(|o| o.deflator).collect();
    let errs: Vec<f64> = outcomes.iter().map(|o| o.wealth - o.target).collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let max = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    ArbitrageReport {
        n,
        degree,
        price,
        prob_outperform: Estimate::from_samples(&ind),
        terminal_wealth: Estimate::from_samples(&wealth),
        terminal_rms_error: rms,
        terminal_max_error: max,
        superhedge: Estimate::from_samples(&z),
        exits: outcomes.iter().filter(|o| o.exited).count(),
    }
}
