//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use super::cache::{Cache, CachedRun};
use super::config::ExperimentConfig;
use super::verify::{verify_model, VerifyReport};
use crate::asymptotics::{
    calF_limit, calF_zero_coupling, cesaro_fcs, char_function_sup_distance, double_limit_fcs, fcs_limit_idealized,
    scan, LimitProjection, ScanAxis, ScanMetric, ScanPoint, ScanResult, ScanRow,
};
use crate::error::{Error, Result};
use crate::fcs::{calF, fcs_reservoir_direct, fcs_reservoir_modular, fcs_system, Subsystem};
use crate::linalg::c64;
use crate::model::OpenSystemModel;
use crate::modular::DENSE_CAP;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_RESOURCE_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fcslab",
    version,
    about = "Energy counting statistics of a finite system coupled to a confined thermal reservoir"
)]
pub struct Cli {
    /// Recompute even when a cached result exists.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Write outputs here instead of the configured output_dir.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the invariant suite and write verify_report.csv.
    Verify { config: PathBuf },
    /// Write the system, direct reservoir and modular reservoir measures at time t.
    Fcs {
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Tabulate 𝓕(iγ/β) at time t next to the weak-coupling reference.
    Charfun {
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Run the configured scan.
    Scan { config: PathBuf },
    /// Write long-time, idealized and double-limit measures.
    Limits { config: PathBuf },
}

impl Command {
    fn config_path(&self) -> &Path {
        match self {
            Command::Verify { config }
            | Command::Fcs { config, .. }
            | Command::Charfun { config, .. }
            | Command::Scan { config }
            | Command::Limits { config } => config,
        }
    }

    fn cache_parts(&self) -> Vec<String> {
        match self {
            Command::Verify { .. } => vec!["verify".into()],
            Command::Fcs { t, .. } => vec!["fcs".into(), t.to_string()],
            Command::Charfun { t, .. } => vec!["charfun".into(), t.to_string()],
            Command::Scan { .. } => vec!["scan".into()],
            Command::Limits { .. } => vec!["limits".into()],
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Config(_) | Error::Json(_) => EXIT_BAD_CONFIG,
        Error::ResourceCap { .. } => EXIT_RESOURCE_CAP,
        Error::Domain(_) | Error::Io(_) => EXIT_VERIFY_FAILED,
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = ExperimentConfig::from_path(cli.command.config_path())?;
    let out_dir = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let cache = if cli.no_cache { None } else { Cache::from_env() };

    let mut parts = cli.command.cache_parts();
    parts.push(cfg.to_json());
    let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
    let key = Cache::key(&refs);

    let cached = cache.as_ref().and_then(|c| c.get(&key));
    let run = match cached {
        Some(run) => run,
        None => {
            let run = compute(&cli.command, &cfg)?;
            if let Some(c) = &cache {
                if let Err(e) = c.put(&key, &run) {
                    eprintln!("warning: could not write cache entry in {}: {e}", c.dir().display());
                }
            }
            run
        }
    };
    for (name, contents) in &run.files {
        let path = out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        println!("wrote {}", path.display());
    }
    Ok(run.exit_code)
}

/// Per-coupling models, with the file prefix used when there is more than one.
fn models(cfg: &ExperimentConfig) -> Result<Vec<(String, OpenSystemModel)>> {
    let lambdas = cfg.lambda.values();
    let many = lambdas.len() > 1;
    lambdas
        .into_iter()
        .map(|l| {
            let prefix = if many { format!("lambda_{l}/") } else { String::new() };
            Ok((prefix, cfg.model_at(l, None)?))
        })
        .collect()
}

fn compute(cmd: &Command, cfg: &ExperimentConfig) -> Result<CachedRun> {
    let mut run = CachedRun::default();
    match cmd {
        Command::Verify { .. } => {
            let mut report = VerifyReport::default();
            for (prefix, m) in models(cfg)? {
                let r = verify_model(&m, &cfg.times(), &cfg.gamma_grid(), cfg.seed)?;
                for mut c in r.checks {
                    c.name = format!("{prefix}{}", c.name);
                    report.checks.push(c);
                }
            }
            for c in report.failures() {
                eprintln!("FAIL {}: residual {:e} > tolerance {:e}", c.name, c.residual, c.tolerance);
            }
            run.exit_code = if report.all_pass() { EXIT_OK } else { EXIT_VERIFY_FAILED };
            run.files.insert("verify_report.csv".into(), report.to_csv());
        }
        Command::Fcs { t, .. } => {
            for (prefix, m) in models(cfg)? {
                run.files.insert(format!("{prefix}p_system.csv"), fcs_system(&m, *t)?.to_csv());
                run.files.insert(format!("{prefix}p_reservoir_direct.csv"), fcs_reservoir_direct(&m, *t)?.to_csv());
                if m.dim() <= DENSE_CAP {
                    run.files
                        .insert(format!("{prefix}p_reservoir_modular.csv"), fcs_reservoir_modular(&m, *t)?.to_csv());
                } else {
                    eprintln!(
                        "note: d = {} exceeds the dense modular cap {DENSE_CAP}; skipping p_reservoir_modular.csv",
                        m.dim()
                    );
                }
            }
        }
        Command::Charfun { t, .. } => {
            for (prefix, m) in models(cfg)? {
                let mut s = String::from("gamma,re_calF,im_calF,re_reference,im_reference\n");
                for gamma in cfg.gamma_grid().values() {
                    let f = calF(&m, *t, c64(0.0, gamma / m.beta()))?;
                    let r = calF_zero_coupling(&m, gamma);
                    s.push_str(&format!("{gamma},{},{},{},{}\n", f.re, f.im, r.re, r.im));
                }
                run.files.insert(format!("{prefix}charfun.csv"), s);
            }
        }
        Command::Scan { .. } => scan_files(cfg, &mut run)?,
        Command::Limits { .. } => {
            for (prefix, m) in models(cfg)? {
                limits_files(&m, cfg, &prefix, &mut run)?;
            }
        }
    }
    Ok(run)
}

fn limits_files(m: &OpenSystemModel, cfg: &ExperimentConfig, prefix: &str, run: &mut CachedRun) -> Result<()> {
    let grid = cfg.gamma_grid();
    let double = double_limit_fcs(m)?;
    let measures = [
        ("reservoir_cesaro", cesaro_fcs(m, Subsystem::Reservoir)?),
        ("system_cesaro", cesaro_fcs(m, Subsystem::System)?),
        ("reservoir_idealized", fcs_limit_idealized(m, Subsystem::Reservoir)?),
        ("system_idealized", fcs_limit_idealized(m, Subsystem::System)?),
        ("double_limit", double.clone()),
    ];
    let mut summary = String::from("measure,kolmogorov_to_double_limit,cf_sup_to_double_limit,mean,second_moment\n");
    for (name, mu) in &measures {
        run.files.insert(format!("{prefix}p_{name}.csv"), mu.to_csv());
        summary.push_str(&format!(
            "{name},{},{},{},{}\n",
            mu.kolmogorov_distance(&double),
            char_function_sup_distance(mu, &double, &grid),
            mu.mean(),
            mu.moment(2)
        ));
    }
    run.files.insert(format!("{prefix}limits_summary.csv"), summary);
    let mut table = String::from("s,re_rank_one,im_rank_one,re_kernel_exact,im_kernel_exact\n");
    for s in [0.0, 0.25, 0.5, 1.0] {
        let a = calF_limit(m, s, LimitProjection::RankOne)?;
        let b = calF_limit(m, s, LimitProjection::KernelExact)?;
        table.push_str(&format!("{s},{},{},{},{}\n", a.re, a.im, b.re, b.im));
    }
    run.files.insert(format!("{prefix}calF_limits.csv"), table);
    Ok(())
}

fn scan_files(cfg: &ExperimentConfig, run: &mut CachedRun) -> Result<()> {
    let spec = cfg.scan.as_ref().ok_or_else(|| Error::validation("scan", "configuration has no scan section"))?;
    let metric = ScanMetric { limit: spec.limit, gamma_grid: spec.gamma_grid };
    let lambdas = cfg.lambda.values();
    let smallest = lambdas.iter().copied().fold(f64::INFINITY, |a, b| if b.abs() < a.abs() { b } else { a });

    let primary = run_scan(spec.axis, &spec.values, &metric, |v| match spec.axis {
        ScanAxis::Time => cfg.model_at(smallest, None),
        ScanAxis::Lambda => cfg.model_at(v, None),
        ScanAxis::Size => cfg.model_at(smallest, Some(v as usize)),
    })?;
    run.files.insert("scan.csv".into(), primary.to_csv());

    if spec.axis == ScanAxis::Size && lambdas.len() > 1 {
        let largest = spec.values.iter().copied().fold(f64::NEG_INFINITY, f64::max) as usize;
        let by_lambda = run_scan(ScanAxis::Lambda, &lambdas, &metric, |l| cfg.model_at(l, Some(largest)))?;
        run.files.insert("scan_lambda_at_largest_size.csv".into(), by_lambda.to_csv());
    }
    Ok(())
}

/// Builds one model per value and scans them. Points whose model exceeds a
/// resource cap become error rows; invalid parameters abort.
fn run_scan<F>(axis: ScanAxis, values: &[f64], metric: &ScanMetric, build: F) -> Result<ScanResult>
where
    F: Fn(f64) -> Result<OpenSystemModel> + Sync,
{
    let built: Vec<(f64, Result<OpenSystemModel>)> = values.par_iter().map(|&v| (v, build(v))).collect();
    let mut points = Vec::new();
    let mut failed = Vec::new();
    for (v, b) in built {
        match b {
            Ok(model) => points.push(ScanPoint { value: v, model }),
            Err(e) if exit_code(&e) == EXIT_BAD_CONFIG => return Err(e),
            Err(e) => failed.push((v, e.to_string())),
        }
    }
    let scanned = if points.is_empty() { ScanResult { rows: Vec::new() } } else { scan(&points, axis, metric)? };
    let mut ok_rows = scanned.rows.into_iter();
    let mut failed = failed.into_iter().peekable();
    let rows = values
        .iter()
        .map(|&v| match failed.peek() {
            Some((fv, _)) if fv.to_bits() == v.to_bits() => {
                let (_, msg) = failed.next().expect("peeked");
                eprintln!("warning: {axis:?} = {v}: {msg}");
                ScanRow::failed(axis, v, msg, 0.0)
            }
            _ => ok_rows.next().expect("one scanned row per built point"),
        })
        .collect();
    Ok(ScanResult { rows })
}
