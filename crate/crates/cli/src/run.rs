//! Dispatch of one command: condition report, experiment, CSV files and the
//! JSON manifest.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ptmatch_core::procgen::PointSeq;
use ptmatch_core::rare::{deviation_template, log_probability_deviation, naive_mc_estimate};
use ptmatch_core::rates::{
    rate_star, validate_conditions, vector_rate, ConditionReport, EmpiricalLaw, RateModel,
    DUALITY_TOL, GRAD_TOL, SCALAR_TOL,
};
use ptmatch_core::rng::{domain, RngSeed};
use ptmatch_core::waiting::{ladder_experiment, HorizonRule, LadderConfig, WaitMode};
use ptmatch_core::{clt, Error};
use serde_json::{json, Value};

use crate::config::{Command, ConfigError, ExperimentConfig, ScanMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// Hard failure in the condition report; the manifest is still written.
    Validation(String),
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_PARSE,
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "config error: {e}"),
            Self::Validation(e) => write!(f, "validation failed: {e}"),
            Self::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub struct Outcome {
    pub manifest_path: PathBuf,
    pub manifest: Value,
}

fn rate_model(cfg: &ExperimentConfig) -> Result<RateModel, RunError> {
    let law = EmpiricalLaw {
        points: cfg.model.empirical_points,
        seed: RngSeed::derive(cfg.seed, domain::LONG_TEMPLATE, &[]),
    };
    Ok(RateModel::from_processes(
        &cfg.model.x,
        &cfg.model.y,
        cfg.model.f.clone(),
        &law,
    )?)
}

fn conditions(model: &RateModel, cfg: &ExperimentConfig) -> ConditionReport {
    validate_conditions(
        model,
        &cfg.model.theta.values(),
        RngSeed::derive(cfg.seed, domain::CONDITION_DIRECTIONS, &[]),
    )
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> io::Result<BufWriter<fs::File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Runs `command` and writes its outputs under `out`.
pub fn run(
    command: Command,
    cfg: &ExperimentConfig,
    out: &Path,
    workers: usize,
) -> Result<Outcome, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    cfg.validate_for(command).map_err(RunError::Config)?;
    fs::create_dir_all(out)?;
    let started = Instant::now();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let model = rate_model(cfg)?;
    let report = conditions(&model, cfg);
    let mut files = Vec::new();
    let refuse =
        report.hard_failure() && matches!(command, Command::Wait | Command::Rare | Command::Clt);

    let result = if refuse {
        Ok(Value::Null)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| RunError::Runtime(e.to_string()))?;
        pool.install(|| dispatch(command, cfg, &model, out, &mut files))
    };
    let result = result?;

    let manifest = json!({
        "tool": "ptmatch",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.to_string(),
        "seed": cfg.seed,
        "workers": workers,
        "config": cfg.to_toml(),
        "conditions": report,
        "result": result,
        "files": files,
        "timing": {
            "timestamp_unix": timestamp,
            "wall_clock_seconds": started.elapsed().as_secs_f64(),
        },
    });
    let path = out.join("manifest.json");
    let mut f = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &manifest)
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;

    let hard = report.hard_failure() && command != Command::Rate && command != Command::Generate;
    if hard {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.status == ptmatch_core::rates::CheckStatus::Fail)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        return Err(RunError::Validation(failed.join("; ")));
    }
    Ok(Outcome {
        manifest_path: path,
        manifest,
    })
}

fn dispatch(
    command: Command,
    cfg: &ExperimentConfig,
    model: &RateModel,
    out: &Path,
    files: &mut Vec<String>,
) -> Result<Value, RunError> {
    match command {
        Command::Validate => Ok(json!({ "phi": model.phi() })),
        Command::Rate => rate(cfg, model),
        Command::Generate => generate(cfg, out, files),
        Command::Wait => wait(cfg, out, files),
        Command::Rare => rare(cfg, out, files),
        Command::Clt => clt_run(cfg, out, files),
    }
}

fn rate(cfg: &ExperimentConfig, model: &RateModel) -> Result<Value, RunError> {
    let theta = cfg.model.theta.values();
    let res = if model.dim() == 1 {
        rate_star(model, theta[0])?
    } else {
        vector_rate(model, &theta)?
    };
    Ok(json!({
        "theta": res.theta,
        "t_star": res.t_star,
        "rate": res.rate,
        "residual": res.residual,
        "status": res.status,
        "method": res.method,
        "iterations": res.iterations,
        "primal_rate": res.primal_rate,
        "detail": res.detail,
        "phi": model.phi(),
        "tolerances": { "scalar": SCALAR_TOL, "gradient": GRAD_TOL, "duality": DUALITY_TOL },
    }))
}

fn write_points(w: &mut impl Write, process: &str, r: u32, seq: &PointSeq) -> io::Result<()> {
    for i in 0..seq.len() {
        writeln!(w, "{process},{r},{},{}", seq.points()[i], seq.weight(i))?;
    }
    Ok(())
}

fn generate(
    cfg: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<String>,
) -> Result<Value, RunError> {
    let g = &cfg.generate;
    let mut w = create(out, "points.csv", files)?;
    writeln!(w, "process,replicate,time,mark")?;
    let mut counts = Vec::new();
    for r in 0..g.replicates {
        let x = cfg.model.x.sample(
            0.0..g.l,
            RngSeed::derive(cfg.seed, domain::GENERATE, &[0, u64::from(r)]),
        )?;
        let y = cfg.model.y.sample(
            0.0..g.l,
            RngSeed::derive(cfg.seed, domain::GENERATE, &[1, u64::from(r)]),
        )?;
        write_points(&mut w, "x", r, &x)?;
        write_points(&mut w, "y", r, &y)?;
        counts.push(json!({ "replicate": r, "x": x.len(), "y": y.len() }));
    }
    w.flush()?;
    Ok(json!({ "l": g.l, "counts": counts }))
}

fn wait(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<Value, RunError> {
    let w = &cfg.wait;
    let mode = match w.mode {
        ScanMode::Exact => WaitMode::ExactPl,
        ScanMode::Grid => WaitMode::Grid { step: w.step },
    };
    let lc = LadderConfig {
        x_model: cfg.model.x.clone(),
        y_model: cfg.model.y.clone(),
        f: cfg.model.f.clone(),
        theta: cfg.model.theta.values(),
        l_list: w.l.clone(),
        replicates: w.replicates,
        mode,
        horizon: HorizonRule {
            c: w.horizon_c,
            cap: w.horizon_cap,
        },
        seed: cfg.seed,
    };
    let res = ladder_experiment(&lc)?;
    let mut f = create(out, "ladder.csv", files)?;
    res.write_rows_csv(&mut f)?;
    f.flush()?;
    let mut f = create(out, "ladder_summary.csv", files)?;
    res.write_summary_csv(&mut f)?;
    f.flush()?;
    Ok(json!({
        "mode": w.mode,
        "step": matches!(w.mode, ScanMode::Grid).then_some(w.step),
        "rate": res.rate,
        "slope": res.slope,
        "intercept": res.intercept,
        "censored_fraction": res.censored_fraction(),
        "summary": res.summary,
        "warnings": res.warnings,
    }))
}

fn rare(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<Value, RunError> {
    let r = &cfg.rare;
    let theta = cfg.model.theta.values()[0];
    let lambda = cfg.model.y.density();
    let table = log_probability_deviation(
        &cfg.model.x,
        lambda,
        &cfg.model.f,
        theta,
        &r.l,
        r.n_samples,
        r.replicates,
        cfg.seed,
    )?;
    let mut f = create(out, "rare.csv", files)?;
    table.write_csv(&mut f)?;
    f.flush()?;

    let mut naive = Vec::new();
    if r.naive_samples > 0 && r.replicates > 0 {
        let mut f = create(out, "rare_naive.csv", files)?;
        writeln!(
            f,
            "l,p_hat,log_p_hat,stderr,n,hit_fraction,t_star,rate_empirical"
        )?;
        for (i, &l) in r.l.iter().enumerate() {
            let tpl = deviation_template(&cfg.model.x, l, i, 0, cfg.seed)?;
            if tpl.restrict(0.0..l).is_empty() {
                continue;
            }
            let seed = RngSeed::derive(cfg.seed, domain::RARE_NAIVE, &[i as u64]);
            let e = naive_mc_estimate(&tpl, &cfg.model.f, theta, l, lambda, r.naive_samples, seed)?;
            writeln!(
                f,
                "{},{},{},{},{},{},{},",
                l, e.p_hat, e.log_p_hat, e.stderr, e.n_samples, e.hit_fraction, e.t_star
            )?;
            let is = table
                .rows
                .iter()
                .find(|row| row.l == l && row.replicate == 0)
                .map(|row| &row.estimate)
                .expect("replicate 0 present");
            let z = (is.p_hat - e.p_hat) / (is.stderr.powi(2) + e.stderr.powi(2)).sqrt();
            naive.push(json!({ "l": l, "naive_p_hat": e.p_hat, "naive_stderr": e.stderr, "is_p_hat": is.p_hat, "is_stderr": is.stderr, "z": z }));
        }
        f.flush()?;
    }
    let warnings: Vec<&String> = table
        .rows
        .iter()
        .flat_map(|r| &r.estimate.warnings)
        .collect();
    Ok(json!({
        "theta": theta,
        "summary": table.summary,
        "naive_cross_check": naive,
        "warnings": warnings,
    }))
}

fn clt_run(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<Value, RunError> {
    let c = &cfg.clt;
    let rho = cfg.model.x.density();
    let lambda = cfg.model.y.density();
    let theta = cfg.model.theta.values()[0];
    let res = clt::clt_experiment(
        rho,
        lambda,
        &cfg.model.f,
        theta,
        c.l,
        c.replicates,
        cfg.seed,
    )?;
    let mut f = create(out, "clt.csv", files)?;
    res.write_csv(&mut f)?;
    f.flush()?;
    let mc = if c.mc_samples > 0 {
        let seed = RngSeed::derive(cfg.seed, domain::SIGMA2_MC, &[]);
        Some(clt::sigma2_monte_carlo(
            &cfg.model.f,
            res.t0,
            rho,
            c.mc_samples,
            seed,
        )?)
    } else {
        None
    };
    Ok(json!({
        "l": res.l,
        "t0": res.t0,
        "rate": res.rate,
        "sigma2": res.sigma2,
        "sigma2_monte_carlo": mc,
        "target_variance": res.target_variance,
        "mean": res.mean,
        "variance": res.variance,
        "variance_ratio": res.variance_ratio,
        "ks": res.ks,
        "median_gap": res.median_gap,
        "n_failed": res.n_failed,
    }))
}
