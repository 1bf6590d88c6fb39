//! Command-line front end. Exit codes: 0 success, 1 a check failed,
//! 2 bad arguments or configuration.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{load_config, Experiment};
use super::export::{self, Format};
use super::manifest::{RunManifest, MANIFEST_FILE};
use super::reference;
use super::verify::{Suite, SuiteReport};
use crate::detect::{boundedness_horizon, default_max_len, find_detectability_walk, DetectabilitySearch, WalkCertificate};
use crate::error::{GikfError, Result};
use crate::filter::{covariance_consistency_check, run_gikf, ConsistencyReport};
use crate::matrix::spectral_norm;
use crate::measure::{run_auxiliary_chain, AuxiliaryChainSpec, InitMeasure, Projection};
use crate::seed::trial_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gikf", version, about = "Gossip interactive Kalman filter experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Config file, or a bundled config name (a, b, c).
    #[arg(long, default_value = "b")]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    pub format: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the filter network and record per-sensor trajectories.
    Simulate(RunArgs),
    /// Sample the auxiliary switched Riccati chain at the horizon.
    InvariantMeasure(RunArgs),
    /// Search for a weak-detectability walk and report its certificate.
    Detect {
        #[command(flatten)]
        run: RunArgs,
        /// Longest walk to try; defaults to 4·N·M.
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Run the acceptance suite.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Run only these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
    /// Summarize the results stored in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub status: String,
    pub max_len: usize,
    pub certificate: Option<WalkCertificate>,
    /// Steps a stable run stays below `10·α₀` after each walk occurrence,
    /// when the network dynamics are expanding.
    pub horizon_at_ten_alpha0: Option<u64>,
}

pub fn resolve_experiment(args: &RunArgs) -> Result<Experiment> {
    let path = Path::new(&args.config);
    let mut exp = if path.exists() {
        load_config(path)?.build()?
    } else if let Some(exp) = reference::by_name(&args.config) {
        exp
    } else {
        return Err(GikfError::config("--config", format!("no file or bundled config named {:?}", args.config)));
    };
    let c = &mut exp.config;
    if let Some(seed) = args.seed {
        c.seed = seed;
    }
    if let Some(trials) = args.trials {
        c.trials = trials;
    }
    if let Some(h) = args.horizon {
        c.horizon = h;
        c.snapshots.retain(|&s| s <= h);
    }
    c.build()
}

fn format_of(args: &RunArgs) -> Format {
    args.format.parse().expect("clap restricts the value")
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| GikfError::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn simulate(args: &RunArgs) -> Result<i32> {
    let exp = resolve_experiment(args)?;
    let format = format_of(args);
    let c = &exp.config;
    let dir = args.out.join("trajectories");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::start("simulate", c, c.trials);
    let names: Vec<String> = (0..c.trials)
        .map(|i| format!("trajectories/trial_{i:05}.{}", format.extension()))
        .collect();
    let records = with_workers(args.workers, || {
        (0..c.trials)
            .into_par_iter()
            .map(|i| {
                let mut rec = run_gikf(&exp.model, &exp.dist, c.horizon, trial_seed(c.seed, i as u64), &c.snapshots)?;
                export::export_record(&rec, args.out.join(&names[i]), format)?;
                rec.rows.clear();
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    manifest.outputs = names;
    if let Some(w) = records.first().map(|r| r.warnings.clone()).filter(|w| !w.is_empty()) {
        for line in w {
            eprintln!("warning: {line}");
        }
    }
    if records.len() >= 2 && !c.snapshots.is_empty() {
        let report = covariance_consistency_check(&records, 0..=c.horizon, 3.0)?;
        print_consistency(&report);
        export::write_json("consistency", &report, args.out.join("consistency.json"))?;
        manifest.outputs.push("consistency.json".into());
    }
    println!("wrote {} trajectories to {}", c.trials, dir.display());
    manifest.finish(&args.out)?;
    Ok(EXIT_OK)
}

fn print_consistency(r: &ConsistencyReport) {
    println!(
        "normalized error {:.4} (expected {}, band [{:.4}, {:.4}], {} runs): {}",
        r.statistic,
        r.expected,
        r.lower,
        r.upper,
        r.runs,
        if r.consistent { "consistent" } else { "inconsistent" }
    );
}

fn invariant_measure(args: &RunArgs) -> Result<i32> {
    let exp = resolve_experiment(args)?;
    let c = &exp.config;
    let format = format_of(args);
    std::fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::start("invariant-measure", c, c.trials);
    let spec = AuxiliaryChainSpec::from_distribution(&exp.dist, InitMeasure::PointMass(exp.model.p0().clone()))?;
    let measure = with_workers(args.workers, || run_auxiliary_chain(&exp.model, &spec, c.horizon, c.trials, c.seed))??;
    let name = format!("measure.{}", format.extension());
    export::export_measure(&measure, args.out.join(&name), format)?;
    manifest.outputs.push(name);
    let mut norms = measure.project(&Projection::SpectralNorm);
    norms.sort_by(f64::total_cmp);
    let q = |p: f64| norms[((norms.len() - 1) as f64 * p).round() as usize];
    println!(
        "{} samples at t = {}: spectral norm quantiles 10% {:.4} 50% {:.4} 90% {:.4} 99% {:.4}",
        measure.len(),
        c.horizon,
        q(0.1),
        q(0.5),
        q(0.9),
        q(0.99)
    );
    manifest.finish(&args.out)?;
    Ok(EXIT_OK)
}

fn detect(args: &RunArgs, max_len: Option<usize>) -> Result<i32> {
    let exp = resolve_experiment(args)?;
    std::fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::start("detect", &exp.config, 0);
    let max_len = max_len.unwrap_or_else(|| default_max_len(&exp.model));
    let search = find_detectability_walk(&exp.model, &exp.dist.mean_matrix(), max_len)?;
    let report = match search {
        DetectabilitySearch::Found(cert) => {
            let alpha = crate::matrix::operator_norm(exp.model.f());
            let horizon = if alpha > 1.0 {
                boundedness_horizon(alpha, cert.alpha0, spectral_norm(exp.model.q()), 10.0 * cert.alpha0).ok()
            } else {
                None
            };
            println!("status: found");
            println!("walk: {:?}", cert.walk);
            println!("alpha0: {}", cert.alpha0);
            println!("grammian min eigenvalue: {}", cert.grammian_min_eigenvalue);
            DetectReport {
                status: "found".into(),
                max_len,
                certificate: Some(cert),
                horizon_at_ten_alpha0: horizon,
            }
        }
        DetectabilitySearch::NotFound { max_len } => {
            println!("status: not-found");
            println!("no walk of length <= {max_len} has an invertible Grammian");
            DetectReport {
                status: "not-found".into(),
                max_len,
                certificate: None,
                horizon_at_ten_alpha0: None,
            }
        }
    };
    export::write_json("certificate", &report, args.out.join("certificate.json"))?;
    manifest.outputs.push("certificate.json".into());
    manifest.finish(&args.out)?;
    Ok(EXIT_OK)
}

fn verify(args: &RunArgs, criteria: &[u8]) -> Result<i32> {
    let exp = resolve_experiment(args)?;
    std::fs::create_dir_all(&args.out)?;
    let suite = Suite::with_network(exp);
    let mut manifest = RunManifest::start("verify", &suite.network.config, 0);
    let report = with_workers(args.workers, || {
        if criteria.is_empty() {
            suite.run_all()
        } else {
            suite.run(criteria)
        }
    })?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    export::write_json("verify", &report, args.out.join("verify.json"))?;
    manifest.outputs.push("verify.json".into());
    manifest.finish(&args.out)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn report(out: &Path) -> Result<i32> {
    let manifest: RunManifest = export::read_json("manifest", out.join(MANIFEST_FILE))?;
    println!("command: {}", manifest.command);
    println!("config: {} (sha256 {})", manifest.config.name, manifest.config_hash);
    println!("tool version: {}, master seed {}, {} trial seeds", manifest.tool_version, manifest.master_seed, manifest.trial_seeds.len());
    println!("outputs: {}", manifest.outputs.len());
    let mut status = EXIT_OK;
    for name in &manifest.outputs {
        let path = out.join(name);
        match name.as_str() {
            "verify.json" => {
                let r: SuiteReport = export::read_json("verify", &path)?;
                for c in &r.criteria {
                    println!("  {}", c.line());
                }
                if !r.passed {
                    status = EXIT_FAILED;
                }
            }
            "certificate.json" => {
                let r: DetectReport = export::read_json("certificate", &path)?;
                match &r.certificate {
                    Some(c) => println!("  detectability: found walk {:?}, alpha0 {}", c.walk, c.alpha0),
                    None => println!("  detectability: not-found (max length {})", r.max_len),
                }
            }
            "consistency.json" => print_consistency(&export::read_json("consistency", &path)?),
            _ if !path.exists() => println!("  missing: {name}"),
            _ => {}
        }
    }
    Ok(status)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::InvariantMeasure(a) => invariant_measure(&a),
        Command::Detect { run, max_len } => detect(&run, max_len),
        Command::Verify { run, criteria } => verify(&run, &criteria),
        Command::Report { out } => report(&out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GikfError::Config { .. }
                | GikfError::SchemaVersion { .. }
                | GikfError::Io(_)
                | GikfError::Json(_)
                | GikfError::InvalidArgument(_) => EXIT_CONFIG,
                _ => EXIT_FAILED,
            }
        }
    }
}
