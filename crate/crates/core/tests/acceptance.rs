//! Acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Criterion failures are reported, not raised: the process exits nonzero
//! only when an experiment errors out, or when `ACCEPTANCE_STRICT` is set
//! and some criterion failed. CSVs of the full-size runs are written to the
//! test scratch directory.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use ptmatch_core::clt::{clt_experiment, sigma2, sigma2_monte_carlo};
use ptmatch_core::procgen::{sample_poisson, SeqSource};
use ptmatch_core::rare::{
    deviation_template, is_estimate, log_probability_deviation, naive_mc_estimate,
};
use ptmatch_core::rates::{rate_star, vector_rate, EmpiricalCgf, RateModel};
use ptmatch_core::rng::{domain, RngSeed};
use ptmatch_core::score::matching_score;
use ptmatch_core::waiting::{
    ladder_experiment, waiting_time, HorizonRule, LadderConfig, WaitMode, WaitingTimeQuery,
};
use ptmatch_core::{PointSeq, ProcessModel, Result, ScoreFn};
use rand::Rng;

const MASTER: u64 = 20240601;

fn sf(s: &str) -> ScoreFn {
    s.parse().unwrap()
}

fn poisson(density: f64) -> ProcessModel {
    ProcessModel::HomogeneousPoisson { density }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    dir
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// Closed-form rate for `indicator(a)` with Poisson(rho) template and
/// Poisson(lambda) data.
fn indicator_rate(theta: f64, lambda: f64, rho: f64, a: f64) -> f64 {
    let q = 1.0 - (-2.0 * rho * a).exp();
    theta * (theta / (lambda * q)).ln() - theta + lambda * q
}

fn ladder_config(l_list: Vec<f64>, replicates: u32) -> LadderConfig {
    LadderConfig {
        x_model: poisson(1.0),
        y_model: poisson(1.0),
        f: sf("indicator(0.25)"),
        theta: vec![1.0],
        l_list,
        replicates,
        mode: WaitMode::ExactPl,
        horizon: HorizonRule { c: 50.0, cap: None },
        seed: MASTER,
    }
}

fn waiting_time_exponent() -> Result<Verdict> {
    let truth = indicator_rate(1.0, 1.0, 1.0, 0.25);
    let res = ladder_experiment(&ladder_config(vec![10.0, 20.0, 30.0, 40.0], 200))?;
    let dir = out_dir();
    res.write_rows_csv(fs::File::create(dir.join("ladder.csv")).unwrap())
        .unwrap();
    res.write_summary_csv(fs::File::create(dir.join("ladder_summary.csv")).unwrap())
        .unwrap();
    let slope = res.slope.unwrap_or(f64::NAN);
    let rel = (slope - truth) / truth;
    let censored = res.censored_fraction();
    let means: Vec<String> = res
        .summary
        .iter()
        .map(|s| format!("{:.3}", s.mean_log_w.unwrap_or(f64::NAN)))
        .collect();
    verdict(
        rel.abs() <= 0.15 && censored < 0.05,
        format!(
            "slope {slope:.4} vs {truth:.5} ({:+.1}%, band 15%), censored {:.1}% (< 5%), mean log W [{}]",
            100.0 * rel,
            100.0 * censored,
            means.join(", ")
        ),
    )
}

fn log_probability_approximation() -> Result<Verdict> {
    let f = sf("indicator(0.25)");
    let x = poisson(1.0);
    let l_list = [10.0, 20.0, 30.0, 40.0, 60.0];
    let table = log_probability_deviation(&x, 1.0, &f, 1.0, &l_list, 100_000, 20, MASTER)?;
    table
        .write_csv(fs::File::create(out_dir().join("rare.csv")).unwrap())
        .unwrap();
    let med: Vec<f64> = table.summary.iter().map(|s| s.median_abs_delta).collect();
    let decreasing = med.windows(2).all(|w| w[1] < w[0]);
    let last = *med.last().unwrap();

    let l = 15.0;
    let tpl = deviation_template(&x, l, l_list.len(), 0, MASTER)?;
    let coords = [l_list.len() as u64, 0];
    let is = is_estimate(
        &tpl,
        &f,
        1.0,
        l,
        1.0,
        100_000,
        RngSeed::derive(MASTER, domain::RARE_TILTED, &coords),
    )?;
    let mc = naive_mc_estimate(
        &tpl,
        &f,
        1.0,
        l,
        1.0,
        10_000_000,
        RngSeed::derive(MASTER, domain::RARE_NAIVE, &coords),
    )?;
    let combined = (is.stderr * is.stderr + mc.stderr * mc.stderr).sqrt();
    let z = (is.p_hat - mc.p_hat).abs() / combined;
    let meds: Vec<String> = med.iter().map(|m| format!("{m:.3}")).collect();
    verdict(
        decreasing && last <= 1.0 && z <= 3.0,
        format!(
            "median |delta| [{}] decreasing {decreasing}, {last:.3} at l=60 (<= 1); l=15 IS {:.5e} vs MC {:.5e}, {z:.2} combined stderr (<= 3)",
            meds.join(", "),
            is.p_hat,
            mc.p_hat
        ),
    )
}

fn importance_sampling_exactness() -> Result<Verdict> {
    let truth = 1.0 - 2.0 * (-1.0f64).exp();
    let tpl = PointSeq::new(vec![0.5], 0.0..1.0)?;
    let f = sf("const(1)");
    let mut pass = 0;
    let mut worst: f64 = 0.0;
    for s in 0..20 {
        let e = is_estimate(
            &tpl,
            &f,
            2.0,
            1.0,
            1.0,
            100_000,
            RngSeed::derive(MASTER, domain::RARE_TILTED, &[99, s]),
        )?;
        let z = (e.p_hat - truth).abs() / e.stderr;
        worst = worst.max(z);
        if z <= 3.0 {
            pass += 1;
        }
    }
    verdict(
        pass >= 19,
        format!("{pass}/20 seeds within 3 stderr of {truth:.5} (>= 19), worst {worst:.2} stderr"),
    )
}

fn legendre_solvers() -> Result<Verdict> {
    let constant = RateModel::poisson(1.0, 1.0, sf("const(1)"))?;
    let mut closed: f64 = 0.0;
    for theta in [1.2, 2.0, 3.0, 5.0, 10.0] {
        let r = rate_star(&constant, theta)?;
        closed = closed
            .max((r.t() - theta.ln()).abs())
            .max((r.rate - (theta * theta.ln() - theta + 1.0)).abs());
    }

    let mut rng = RngSeed::new(MASTER, 4).rng();
    let mut gap: f64 = 0.0;
    let mut unconverged = 0;
    for case in 0..20 {
        let n = 2 + case % 2;
        let comps: Vec<String> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => format!("indicator({})", rng.gen_range(0.1..1.0)),
                1 => format!("triangular({})", rng.gen_range(0.2..1.5)),
                _ => format!("pwl([0, {}], [1, -0.3], -0.3)", rng.gen_range(0.2..1.0)),
            })
            .collect();
        let m = RateModel::poisson(1.0, 1.0, sf(&comps.join("; ")))?;
        let theta: Vec<f64> = m
            .phi()
            .iter()
            .map(|p| p + rng.gen_range(0.05..0.5))
            .collect();
        let r = vector_rate(&m, &theta)?;
        match r.primal_rate {
            Some(primal) if r.is_converged() => gap = gap.max((r.rate - primal).abs()),
            _ => unconverged += 1,
        }
    }

    let mut sym: f64 = 0.0;
    for (g, theta) in [
        ("indicator(0.25)", 1.0),
        ("triangular(0.5)", 0.6),
        ("pwl([0, 0.4], [1, -0.3], -0.3)", 0.3),
    ] {
        let scalar = rate_star(&RateModel::poisson(1.0, 1.0, sf(g))?, theta)?;
        let pair = vector_rate(
            &RateModel::poisson(1.0, 1.0, sf(&format!("{g}; {g}")))?,
            &[theta, theta],
        )?;
        sym = sym.max((scalar.rate - pair.rate).abs());
    }
    verdict(
        closed <= 1e-8 && gap <= 1e-6 && unconverged == 0 && sym <= 1e-8,
        format!(
            "constant closed form err {closed:.1e} (<= 1e-8), max duality gap {gap:.1e} (<= 1e-6, {unconverged} unconverged), duplicated vs scalar {sym:.1e} (<= 1e-8)"
        ),
    )
}

fn normal_fluctuations() -> Result<Verdict> {
    let f = sf("triangular(0.5)");
    let model = RateModel::poisson(1.0, 1.0, f.clone())?;
    let theta = 1.5 * model.phi()[0];
    let t0 = rate_star(&model, theta)?.t();
    let quad = sigma2(&f, t0, 1.0)?;
    let mc = sigma2_monte_carlo(
        &f,
        t0,
        1.0,
        10_000_000,
        RngSeed::derive(MASTER, domain::SIGMA2_MC, &[]),
    )?;
    let z = (quad.sigma2 - mc.sigma2).abs() / mc.tolerance;

    let big = clt_experiment(1.0, 1.0, &f, theta, 400.0, 2000, MASTER)?;
    big.write_csv(fs::File::create(out_dir().join("clt.csv")).unwrap())
        .unwrap();
    let small = clt_experiment(1.0, 1.0, &f, theta, 100.0, 2000, MASTER)?;
    let ratio = big.variance_ratio;
    let mean_bound = 0.15 * big.target_variance.sqrt();
    let gap_ratio = big.median_gap / small.median_gap;
    verdict(
        (0.8..=1.25).contains(&ratio) && z <= 3.0 && big.mean.abs() <= mean_bound && gap_ratio < 0.5,
        format!(
            "variance ratio {ratio:.3} in [0.8, 1.25]; sigma2 quadrature {:.6} vs MC {:.6} ({z:.2} stderr, <= 3); |mean| {:.4} (<= {mean_bound:.4}); median gap l=400/l=100 {gap_ratio:.3} (< 0.5); KS {:.4}; {} failed solves",
            quad.sigma2,
            mc.sigma2,
            big.mean.abs(),
            big.ks.unwrap_or(f64::NAN),
            big.n_failed + small.n_failed
        ),
    )
}

fn degenerate_variance() -> Result<Verdict> {
    let f = sf("const(1)");
    let s2 = sigma2(&f, 2f64.ln(), 1.0)?;
    let run = clt_experiment(1.0, 1.0, &f, 2.0, 100.0, 200, MASTER)?;
    let zeros = run.samples.iter().filter(|s| s.s == 0.0).count();
    verdict(
        s2.sigma2 == 0.0 && zeros == run.samples.len() && run.n_failed == 0,
        format!(
            "sigma2 = {}, {zeros}/{} samples exactly 0",
            s2.sigma2,
            run.samples.len()
        ),
    )
}

struct Instance {
    tpl: PointSeq,
    data: PointSeq,
    f: ScoreFn,
    l: f64,
    theta: f64,
}

const HORIZON: f64 = 300.0;

fn instance(i: u64) -> Result<Instance> {
    let seed = RngSeed::new(MASTER, 700 + i);
    let mut rng = seed.child(0).rng();
    let l = rng.gen_range(2.0..6.0);
    let a = rng.gen_range(0.1..0.6);
    let f = match i % 4 {
        0 => sf(&format!("indicator({a})")),
        1 => sf(&format!("triangular({a})")),
        2 => sf(&format!("pwl([0, {a}, {}], [1, 0.5, -0.2], -0.1)", 2.0 * a)),
        _ => sf(&format!(
            "affine(0.1, [1, 0.5], [indicator({a}), triangular({})])",
            2.0 * a
        )),
    };
    let tpl = sample_poisson(1.0, 0.0..l, seed.child(1))?;
    let data = sample_poisson(1.0, 0.0..HORIZON + l + 1.0, seed.child(2))?;
    let theta = rng.gen_range(0.4..1.0);
    Ok(Instance {
        tpl,
        data,
        f,
        l,
        theta,
    })
}

fn wait(c: &Instance, mode: WaitMode) -> Result<Option<f64>> {
    let q = WaitingTimeQuery {
        theta: vec![c.theta],
        l: c.l,
        horizon: HORIZON,
        mode,
    };
    Ok(waiting_time(&c.tpl, &mut SeqSource::new(&c.data), &c.f, &q)?.w)
}

fn waiting_mode_agreement() -> Result<Verdict> {
    let step = 0.01;
    let (mut agree, mut short, mut hits, mut monotone) = (0, 0, 0, 0);
    let mut problems = Vec::new();
    for i in 0..100 {
        let c = instance(i)?;
        let g = wait(&c, WaitMode::Grid { step })?;
        let e = wait(&c, WaitMode::ExactPl)?;
        match (g, e) {
            (Some(wg), Some(we)) => {
                hits += 1;
                if (wg - we).abs() <= step {
                    agree += 1;
                } else {
                    // The grid is only bound to the step when the first grid
                    // time after the crossing still meets the threshold.
                    let first = (we / step).ceil() * step;
                    let meets = first <= HORIZON
                        && matching_score(&c.tpl, &c.data, &c.f, c.l, first)?.meets(&[c.theta]);
                    if !meets && wg >= we {
                        short += 1;
                    } else {
                        problems.push(i);
                    }
                }
            }
            (None, None) => agree += 1,
            (None, Some(we)) => {
                let first = (we / step).ceil() * step;
                let meets = first <= HORIZON
                    && matching_score(&c.tpl, &c.data, &c.f, c.l, first)?.meets(&[c.theta]);
                if meets {
                    problems.push(i);
                } else {
                    short += 1;
                }
            }
            (Some(_), None) => problems.push(i),
        }
        let mut prev = f64::INFINITY;
        let mut ok = true;
        for s in [0.04, 0.02, 0.01, 0.005] {
            let w = wait(&c, WaitMode::Grid { step: s })?.unwrap_or(f64::INFINITY);
            ok &= w <= prev;
            prev = w;
        }
        if ok {
            monotone += 1;
        }
    }
    verdict(
        problems.is_empty() && monotone == 100,
        format!(
            "{agree}/100 within one step, {short} sub-step excursions skipped by the grid, {hits} hit in both, violations {problems:?}; refinement monotone on {monotone}/100"
        ),
    )
}

fn ergodic_convergence() -> Result<Verdict> {
    let f = sf("indicator(0.25)");
    let model = RateModel::poisson(1.0, 1.0, f.clone())?;
    let tpl = sample_poisson(1.0, 0.0..1e4, RngSeed::new(MASTER, 8))?;
    let cgf = EmpiricalCgf::build(&tpl, 1.0, &f)?;
    let sup = (0..=300)
        .map(|k| {
            let t = k as f64 * 0.01;
            (cgf.eval(t).0 - model.cgf(&[t]).value).abs()
        })
        .fold(0.0, f64::max);
    let analytic = rate_star(&model, 1.0)?;
    let emp = cgf.rate_star(1.0);
    let dt = (emp.t() - analytic.t()).abs();
    let dr = (emp.rate - analytic.rate).abs();
    verdict(
        sup <= 0.02 && dt <= 0.02 && dr <= 0.02,
        format!(
            "sup |cgf difference| on [0, 3] {sup:.4} (<= 0.02), |t* - t0| {dt:.4}, |rate difference| {dr:.4} (<= 0.02), template has {} points",
            tpl.len()
        ),
    )
}

fn csv_outputs() -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = Vec::new();
    let ladder = ladder_experiment(&ladder_config(vec![4.0, 8.0], 40))?;
    let mut buf = Vec::new();
    ladder.write_rows_csv(&mut buf).unwrap();
    files.push(("ladder.csv", buf));
    let mut buf = Vec::new();
    ladder.write_summary_csv(&mut buf).unwrap();
    files.push(("ladder_summary.csv", buf));

    let table = log_probability_deviation(
        &poisson(1.0),
        1.0,
        &sf("indicator(0.25)"),
        1.0,
        &[10.0, 20.0],
        5000,
        4,
        MASTER,
    )?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    files.push(("rare.csv", buf));

    let f = sf("triangular(0.5)");
    let theta = 1.5 * RateModel::poisson(1.0, 1.0, f.clone())?.phi()[0];
    let clt = clt_experiment(1.0, 1.0, &f, theta, 100.0, 200, MASTER)?;
    let mut buf = Vec::new();
    clt.write_csv(&mut buf).unwrap();
    files.push(("clt.csv", buf));
    Ok(files)
}

fn determinism() -> Result<Verdict> {
    let run = |workers: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap();
        pool.install(csv_outputs)
    };
    let one = run(1)?;
    let eight = run(8)?;
    let again = run(8)?;
    let differing: Vec<&str> = one
        .iter()
        .zip(&eight)
        .zip(&again)
        .filter(|((a, b), c)| a.1 != b.1 || b.1 != c.1)
        .map(|((a, _), _)| a.0)
        .collect();
    let bytes: usize = one.iter().map(|f| f.1.len()).sum();
    verdict(
        differing.is_empty(),
        format!(
            "{} CSVs ({bytes} bytes) from ladder, rare-event and fluctuation runs, workers 1 vs 8 vs 8, differing {differing:?}",
            one.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "waiting-time exponent", waiting_time_exponent),
        (
            2,
            "log-probability approximation",
            log_probability_approximation,
        ),
        (
            3,
            "importance sampling exactness",
            importance_sampling_exactness,
        ),
        (4, "Legendre solvers", legendre_solvers),
        (
            5,
            "normal fluctuations of the conditional rate",
            normal_fluctuations,
        ),
        (6, "degenerate variance", degenerate_variance),
        (7, "waiting-time mode agreement", waiting_mode_agreement),
        (8, "ergodic CGF convergence", ergodic_convergence),
        (9, "determinism across worker counts", determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut errored = 0;
    for (n, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(v) => {
                if !v.pass {
                    failed += 1;
                }
                let status = if v.pass { "PASS" } else { "FAIL" };
                println!("criterion {n} {status} {name}: {} [{secs:.1}s]", v.detail);
            }
            Err(e) => {
                errored += 1;
                println!("criterion {n} ERROR {name}: {e} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {failed} failed, {errored} errored");
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
