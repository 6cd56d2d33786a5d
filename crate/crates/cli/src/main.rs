mod manifest;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use polyspt::calibration::{estimate_drift, estimate_gamma, load_series_csv};
use polyspt::deflator_hedge::{approximate_optimal_arbitrage, terminal_deflators};
use polyspt::generator::conditional_moment;
use polyspt::model_params::{
    boundary_attained, classify_nupbr_arbitrage, excess_growth_lower_bound, sigma_strictly_positive, LoadedModel,
    ParamsFile,
};
use polyspt::sde_sim::{simulate_joint, simulate_weights, Factorization, PathConfig};
use polyspt::simplex_poly::{basis_enumerate, basis_size, Basis, PolynomialLiteral, SimplexPolynomial};
use polyspt::stats::Estimate;
use polyspt::{Error, ErrorKind};
use serde_json::{json, Value};

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "polyspt", version, about = "Polynomial market weight models: moments, simulation, deflators, arbitrage, calibration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseFactor {
    Pairwise,
    Eigen,
}

#[derive(Debug, Args)]
struct Common {
    /// Parameter file (JSON).
    #[arg(long, global = true, env = "POLYSPT_PARAMS")]
    params: Option<PathBuf>,
    /// Random seed; generated and recorded in the manifest when absent.
    #[arg(long, global = true, env = "POLYSPT_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "POLYSPT_DT", default_value_t = 1e-3)]
    dt: f64,
    /// Horizon.
    #[arg(long = "T", global = true, env = "POLYSPT_T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, global = true, env = "POLYSPT_PATHS", default_value_t = 10_000)]
    paths: usize,
    /// Moment degree for `moments`; largest allowed polynomial degree for `arbitrage`.
    #[arg(long, global = true, env = "POLYSPT_DEGREE")]
    degree: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "POLYSPT_OUT", default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, env = "POLYSPT_FORMAT", value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a parameter file against the admissibility constraints.
    Validate,
    /// Boundary attainment per face, arbitrage classification, growth bound.
    Classify,
    /// Simulate weight paths (or weights with total capitalization).
    Simulate {
        /// Initial weights, comma separated; barycenter by default.
        #[arg(long, value_delimiter = ',')]
        mu0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Also simulate the total capitalization (needs `totalcap` parameters).
        #[arg(long)]
        joint: bool,
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[arg(long, value_enum, default_value_t = NoiseFactor::Pairwise)]
        factorization: NoiseFactor,
    },
    /// Exact conditional moments via the generator matrix exponential.
    Moments {
        #[arg(long, value_delimiter = ',')]
        mu0: Option<Vec<f64>>,
        /// Polynomial literal (JSON); all monomials up to `--degree` otherwise.
        #[arg(long)]
        poly: Option<PathBuf>,
        /// Evaluation times, comma separated; `T` by default.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Monte Carlo statistics of the deflator at the horizon.
    Deflator {
        #[arg(long, value_delimiter = ',')]
        mu0: Option<Vec<f64>>,
    },
    /// Approximate optimal arbitrage for several polynomial orders.
    Arbitrage {
        #[arg(long, value_delimiter = ',')]
        mu0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_values_t = [4u32, 8, 16])]
        n: Vec<u32>,
    },
    /// Estimate parameters from a capitalization or weight CSV.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        /// Path to use when the input has a `path` column.
        #[arg(long)]
        path: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Classify => "classify",
            Command::Simulate { .. } => "simulate",
            Command::Moments { .. } => "moments",
            Command::Deflator { .. } => "deflator",
            Command::Arbitrage { .. } => "arbitrage",
            Command::Calibrate { .. } => "calibrate",
        }
    }
}

/// Output of a subcommand: a summary for stdout, its artifacts and the
/// resolved subcommand arguments.
struct Outcome {
    summary: Value,
    artifacts: Vec<PathBuf>,
    args: Value,
}

struct Context {
    seed: u64,
    model: Option<(ParamsFile, LoadedModel)>,
}

fn load_params(path: &Path) -> polyspt::Result<(ParamsFile, LoadedModel)> {
    let text = std::fs::read_to_string(path)?;
    let file = ParamsFile::from_json(&text)?;
    let model = file.load()?;
    Ok((file, model))
}

fn require_model(ctx: &Context) -> polyspt::Result<&LoadedModel> {
    ctx.model
        .as_ref()
        .map(|(_, m)| m)
        .ok_or_else(|| Error::InvalidArgument("--params is required for this command".into()))
}

fn start_point(mu0: &Option<Vec<f64>>, d: usize) -> Vec<f64> {
    mu0.clone().unwrap_or_else(|| vec![1.0 / d as f64; d])
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn path_config(common: &Common, seed: u64) -> PathConfig {
    PathConfig::new(common.dt, common.horizon, common.paths, seed)
}

fn run_command(common: &Common, command: &Command, ctx: &Context) -> polyspt::Result<Outcome> {
    let out = &common.out;
    match command {
        Command::Validate => {
            let m = require_model(ctx)?;
            Ok(Outcome {
                summary: json!({
                    "valid": true,
                    "d": m.simplex.d(),
                    "totalcap": m.totalcap,
                    "sigma_strictly_positive": m.totalcap.as_ref().map(sigma_strictly_positive),
                }),
                artifacts: vec![],
                args: json!({}),
            })
        }
        Command::Classify => {
            let m = require_model(ctx)?;
            let p = &m.simplex;
            let faces = (0..p.d())
                .map(|i| Ok(json!({"asset": i, "attained": boundary_attained(p, i)?})))
                .collect::<polyspt::Result<Vec<_>>>()?;
            let summary = json!({
                "nupbr_and_arbitrage": classify_nupbr_arbitrage(p)?,
                "faces": faces,
                "excess_growth_lower_bound": excess_growth_lower_bound(p),
            });
            let file = out.join("classify.json");
            write_json(&file, &summary)?;
            Ok(Outcome {
                summary,
                artifacts: vec![file],
                args: json!({}),
            })
        }
        Command::Simulate {
            mu0,
            stride,
            joint,
            sigma0,
            factorization,
        } => {
            let m = require_model(ctx)?;
            let mu0 = start_point(mu0, m.simplex.d());
            let factor = match factorization {
                NoiseFactor::Pairwise => Factorization::Pairwise,
                NoiseFactor::Eigen => Factorization::Eigen,
            };
            let config = path_config(common, ctx.seed)
                .with_stride(*stride)
                .with_factorization(factor);
            let bundle = if *joint {
                let spec = m
                    .joint()
                    .ok_or_else(|| Error::InvalidArgument("--joint needs `totalcap` parameters".into()))?;
                simulate_joint(&spec, &mu0, *sigma0, &config)?
            } else {
                simulate_weights(&m.simplex, &mu0, &config)?
            };
            let file = match common.format {
                Format::Csv => {
                    let f = out.join("paths.csv");
                    bundle.write_csv(BufWriter::new(File::create(&f)?))?;
                    f
                }
                Format::Binary => {
                    let f = out.join("paths.bin");
                    bundle.write_binary(BufWriter::new(File::create(&f)?))?;
                    f
                }
            };
            Ok(Outcome {
                summary: json!({"paths": bundle.n_paths, "stored_times": bundle.n_times(), "file": file}),
                artifacts: vec![file],
                args: json!({"mu0": mu0, "stride": stride, "joint": joint, "sigma0": sigma0,
                             "factorization": format!("{factorization:?}").to_lowercase()}),
            })
        }
        Command::Moments { mu0, poly, times } => {
            let m = require_model(ctx)?;
            let d = m.simplex.d();
            let mu0 = start_point(mu0, d);
            let times = times.clone().unwrap_or_else(|| vec![common.horizon]);
            let polys: Vec<(String, SimplexPolynomial)> = match poly {
                Some(path) => {
                    let lit = PolynomialLiteral::from_json(&std::fs::read_to_string(path)?)?;
                    vec![(path.display().to_string(), lit.to_simplex()?)]
                }
                None => {
                    let k = common.degree.unwrap_or(2);
                    basis_enumerate(d, k)?
                        .into_iter()
                        .filter(|a| a.degree() > 0)
                        .map(|a| Ok((format!("x^{a}"), monomial(d, a.exponents())?)))
                        .collect::<polyspt::Result<_>>()?
                }
            };
            let file = out.join("moments.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&file)?));
            w.write_record(["time", "polynomial", "value"])?;
            let mut rows_out = Vec::new();
            for &t in &times {
                for (name, p) in &polys {
                    let v = conditional_moment(&m.simplex, p, t, &mu0)?;
                    w.write_record([t.to_string(), name.clone(), v.to_string()])?;
                    rows_out.push(json!({"time": t, "polynomial": name, "value": v}));
                }
            }
            w.flush()?;
            Ok(Outcome {
                summary: json!(rows_out),
                artifacts: vec![file],
                args: json!({"mu0": mu0, "poly": poly, "times": times}),
            })
        }
        Command::Deflator { mu0 } => {
            let m = require_model(ctx)?;
            let d = m.simplex.d();
            let mu0 = start_point(mu0, d);
            let res = terminal_deflators(&m.simplex, &mu0, &path_config(common, ctx.seed))?;
            let z: Vec<f64> = res.iter().map(|r| r.0).collect();
            let zmu: Vec<Estimate> = (0..d)
                .map(|i| Estimate::from_samples(&res.iter().map(|r| r.0 * r.1[i]).collect::<Vec<_>>()))
                .collect();
            let summary = json!({
                "mean_z": Estimate::from_samples(&z),
                "mean_z_mu": zmu,
                "exits": res.iter().filter(|r| r.2).count(),
                "n_paths": res.len(),
            });
            let file = out.join("deflator.json");
            write_json(&file, &summary)?;
            Ok(Outcome {
                summary,
                artifacts: vec![file],
                args: json!({"mu0": mu0}),
            })
        }
        Command::Arbitrage { mu0, n } => {
            let m = require_model(ctx)?;
            let d = m.simplex.d();
            let mu0 = start_point(mu0, d);
            if let Some(cap) = common.degree {
                if let Some(&bad) = n.iter().find(|&&k| d * k as usize > cap) {
                    return Err(Error::DegreeCap {
                        degree: d * bad as usize,
                        cap,
                    });
                }
            }
            let file = out.join("arbitrage.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&file)?));
            w.write_record([
                "n",
                "degree",
                "price",
                "prob_outperform",
                "prob_outperform_se",
                "superhedge",
                "superhedge_se",
                "terminal_rms_error",
                "terminal_max_error",
                "exits",
            ])?;
            let mut reports = Vec::new();
            for &k in n {
                let r = approximate_optimal_arbitrage(&m.simplex, k, common.horizon, &mu0, &path_config(common, ctx.seed))?;
                w.write_record([
                    r.n.to_string(),
                    r.degree.to_string(),
                    r.price.to_string(),
                    r.prob_outperform.mean.to_string(),
                    r.prob_outperform.std_error.to_string(),
                    r.superhedge.mean.to_string(),
                    r.superhedge.std_error.to_string(),
                    r.terminal_rms_error.to_string(),
                    r.terminal_max_error.to_string(),
                    r.exits.to_string(),
                ])?;
                reports.push(r);
            }
            w.flush()?;
            Ok(Outcome {
                summary: serde_json::to_value(&reports)?,
                artifacts: vec![file],
                args: json!({"mu0": mu0, "n": n}),
            })
        }
        Command::Calibrate { input, path } => {
            let loaded = load_series_csv(input, *path)?;
            let dropped = loaded.dropped_rows;
            let ws = loaded.series.into_weights();
            let g = estimate_gamma(&ws)?;
            let drift = estimate_drift(&ws, &g)?;
            let params = ParamsFile::from_model(&drift.params, None);
            let file = out.join("params.json");
            write_json(&file, &serde_json::to_value(&params)?)?;
            let sidecar = json!({
                "gamma_std_errors": rows(&g.std_errors),
                "gamma_clipped_pairs": g.clipped,
                "span": g.span,
                "beta_std_errors": drift.beta_std_errors.iter().collect::<Vec<_>>(),
                "drift_matrix_unconstrained": rows(&drift.unconstrained),
                "drift_matrix_std_errors": rows(&drift.std_errors),
                "active_constraints": drift.active_constraints,
                "observations": ws.len(),
                "dropped_rows": dropped,
            });
            let side = out.join("params.stderr.json");
            write_json(&side, &sidecar)?;
            Ok(Outcome {
                summary: json!({"params": params, "standard_errors": sidecar}),
                artifacts: vec![file, side],
                args: json!({"input": input, "path": path}),
            })
        }
    }
}

fn monomial(d: usize, exps: &[u32]) -> polyspt::Result<SimplexPolynomial> {
    let k = exps.iter().sum::<u32>() as usize;
    let size = basis_size(d - 1, k).ok_or(Error::BasisTooLarge { size: usize::MAX, cap: usize::MAX })?;
    let mut c = vec![0.0; size];
    c[Basis::rank(exps)] = 1.0;
    SimplexPolynomial::new(d, k, c)
}

fn write_json(path: &Path, v: &Value) -> polyspt::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Validation => "validation",
        ErrorKind::Numerical => "numerical",
        ErrorKind::Io => "io",
    }
}

fn report_error(e: &Error) -> ExitCode {
    let kind = e.kind();
    let mut body = json!({"kind": kind_name(kind), "message": e.to_string()});
    if let Error::Invalid(report) = e {
        body["violations"] = serde_json::to_value(&report.violations).unwrap_or(Value::Null);
    }
    eprintln!("{}", json!({ "error": body }));
    ExitCode::from(exit_code(kind))
}

fn generated_seed() -> u64 {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    now.as_secs().wrapping_mul(1_000_000_007) ^ u64::from(now.subsec_nanos())
}

fn run(cli: Cli) -> polyspt::Result<()> {
    let started_at = chrono::Utc::now();
    let clock = Instant::now();
    let common = &cli.common;
    let (seed, seed_generated) = match common.seed {
        Some(s) => (s, false),
        None => (generated_seed(), true),
    };
    let model = match &common.params {
        Some(p) => Some(load_params(p)?),
        None => None,
    };
    std::fs::create_dir_all(&common.out)?;
    let ctx = Context { seed, model };
    let outcome = run_command(common, &cli.command, &ctx)?;
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION"),
        params_path: common.params.clone(),
        params: ctx.model.as_ref().map(|(f, _)| f.clone()),
        seed,
        seed_generated,
        dt: common.dt,
        horizon: common.horizon,
        n_paths: common.paths,
        degree: common.degree,
        format: format!("{:?}", common.format).to_lowercase(),
        args: outcome.args,
        artifacts: outcome.artifacts,
        started_at,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    let path = manifest.write(&common.out)?;
    let summary = json!({"command": manifest.command, "seed": seed, "manifest": path, "result": outcome.summary});
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report_error(&Error::InvalidArgument(e.to_string().trim().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
