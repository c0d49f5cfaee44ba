use super::*;
use crate::procgen::{sample_poisson, Interarrival, PointSeq};
use crate::quad::{integrate, Tolerance};
use proptest::prelude::*;
use rand::Rng;

fn sf(s: &str) -> ScoreFn {
    s.parse().unwrap()
}

fn poisson(f: &str) -> RateModel {
    RateModel::poisson(1.0, 1.0, sf(f)).unwrap()
}

/// `lambda * int_0^inf (e^{t f(u)} - 1) c e^{-cu} du` by direct quadrature.
fn oracle_cgf(f: &ScoreFn, rate: f64, lambda: f64, t: f64, power: i32) -> f64 {
    let mut pts: Vec<f64> = vec![0.0];
    pts.extend(f.components()[0].kinks());
    pts.push(80.0 / rate);
    pts.sort_by(f64::total_cmp);
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-13,
    };
    pts.windows(2)
        .map(|w| {
            integrate(
                |u| {
                    let v = f.eval_scalar(u);
                    let core = if power == 0 {
                        (t * v).exp_m1()
                    } else {
                        v.powi(power) * (t * v).exp()
                    };
                    lambda * core * rate * (-rate * u).exp()
                },
                w[0],
                w[1],
                tol,
            )
            .0
        })
        .sum()
}

#[test]
fn phi_examples() {
    let m = RateModel::poisson(1.0, 2.5, sf("const(0.4)")).unwrap();
    assert!((m.phi()[0] - 1.0).abs() < 1e-15);
    assert!((poisson("expdecay(1)").phi()[0] - 2.0 / 3.0).abs() < 1e-10);
    let q = 1.0 - (-0.5f64).exp();
    assert!((poisson("indicator(0.25)").phi()[0] - q).abs() < 1e-14);
    assert!((q - 0.39347).abs() < 1e-5);
}

#[test]
fn cgf_examples() {
    for f in [
        "indicator(0.25)",
        "expdecay(1)",
        "triangular(0.5)",
        "const(1)",
    ] {
        assert_eq!(poisson(f).cgf(&[0.0]).value, 0.0, "{f}");
    }
    let c = poisson("const(1)");
    for t in [-1.0, 0.5, 2.0] {
        assert!((c.cgf(&[t]).value - t.exp_m1()).abs() < 1e-14);
    }
    let q = 1.0 - (-0.5f64).exp();
    let v = poisson("indicator(0.25)").cgf(&[1.0]);
    assert!((v.value - q * (1f64.exp() - 1.0)).abs() < 1e-14);
    assert!((v.value - 0.67609).abs() < 1e-5);
    assert!((v.grad[0] - q * 1f64.exp()).abs() < 1e-14);
    assert!((v.hess[0] - q * 1f64.exp()).abs() < 1e-14);
}

#[test]
fn exact_pieces_match_quadrature_oracle() {
    let fs = [
        "indicator(0.25)",
        "triangular(0.5)",
        "pwl([0, 0.3, 1.2], [2, -0.5, 0.7], -0.2)",
        "affine(0.1, [1.5, -1], [triangular(0.8), indicator(0.2)])",
    ];
    for s in fs {
        let f = sf(s);
        for &rate in &[0.5, 2.0, 7.0] {
            let m = RateModel::new(1.7, DistanceLaw::Exponential { rate }, f.clone()).unwrap();
            assert!(m.is_exact());
            for &t in &[-2.0, -0.1, 0.0, 0.3, 1.0, 4.0] {
                let v = m.cgf(&[t]);
                for (p, got) in [(0, v.value), (1, v.grad[0]), (2, v.hess[0])] {
                    let want = oracle_cgf(&f, rate, 1.7, t, p);
                    assert!(
                        (got - want).abs() <= 1e-11 * want.abs().max(1.0),
                        "{s} rate={rate} t={t} p={p}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn exp_decay_quadrature_matches_closed_form() {
    let m = poisson("expdecay(1)");
    assert!(!m.is_exact());
    for &t in &[0.1f64, 1.0, 3.0, 6.0] {
        // 2 * int_0^1 (e^{tv} - 1) v dv
        let e1 = (t.exp() * (t - 1.0) + 1.0) / (t * t);
        let want = 2.0 * e1 - 1.0;
        let got = m.cgf(&[t]).value;
        assert!(
            (got - want).abs() < 1e-10 * want.abs().max(1.0),
            "t={t}: {got} vs {want}"
        );
    }
}

#[test]
fn rate_star_examples() {
    let r = rate_star(&poisson("const(1)"), 2.0).unwrap();
    assert!(r.is_converged());
    assert!((r.t() - 2f64.ln()).abs() < 1e-10);
    assert!((r.rate - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-10);

    let q = 1.0 - (-0.5f64).exp();
    let want = (1.0 / q).ln() - 1.0 + q;
    let r = rate_star(&poisson("indicator(0.25)"), 1.0).unwrap();
    assert!((r.rate - want).abs() < 1e-10);
    assert!((r.rate - 0.32622).abs() < 1e-5);
    assert!((r.t() - (1.0 / q).ln()).abs() < 1e-9);
    assert!(r.residual <= SCALAR_TOL);

    let m = poisson("triangular(0.5)");
    let at = rate_star(&m, m.phi()[0]).unwrap();
    assert_eq!(at.status, SolveStatus::AtBoundary);
    assert_eq!((at.rate, at.t()), (0.0, 0.0));

    let neg = poisson("const(-1)");
    assert_eq!(rate_star(&neg, 0.5).unwrap().status, SolveStatus::Failed);
    assert!(rate_star(&poisson("indicator(1); indicator(2)"), 1.0).is_err());
}

#[test]
fn rate_satisfies_legendre_inequality() {
    let mut rng = RngSeed::new(11, 0).rng();
    for f in [
        "indicator(0.25)",
        "triangular(0.5)",
        "expdecay(0.7)",
        "pwl([0, 1], [1, -1], -1)",
    ] {
        let m = poisson(f);
        let theta = m.phi()[0] + 0.4;
        let r = rate_star(&m, theta).unwrap();
        assert!(r.is_converged(), "{f}");
        for _ in 0..100 {
            let t = rng.gen_range(0.0..3.0 * r.t() + 1.0);
            let probe = theta * t - m.cgf(&[t]).value;
            assert!(r.rate - probe >= -1e-9, "{f}: {} < {probe}", r.rate);
        }
    }
}

#[test]
fn argmax_scales_with_the_score() {
    let base = poisson("triangular(0.5)");
    let theta = base.phi()[0] * 1.5;
    let r = rate_star(&base, theta).unwrap();
    for c in [0.5, 3.0] {
        let scaled = poisson(&format!("affine(0, [{c}], [triangular(0.5)])"));
        let s = rate_star(&scaled, c * theta).unwrap();
        assert!((s.t() - r.t() / c).abs() < 1e-8);
        assert!((s.rate - r.rate).abs() < 1e-9);
    }
}

#[test]
fn compound_examples() {
    let m = poisson("triangular(0.5)");
    for t in [0.0, 0.7, 2.0] {
        let one = compound_cgf(&m, &MarkDist::point_mass(1), t);
        assert_eq!(one, m.cgf(&[t]));
        let two = compound_cgf(&m, &MarkDist::point_mass(2), t);
        let base = m.cgf(&[2.0 * t]);
        assert!((two.value - base.value).abs() < 1e-15);
        assert!((two.grad[0] - 2.0 * base.grad[0]).abs() < 1e-14);
    }
    let c = poisson("const(1)");
    let u = MarkDist::uniform(&[1, 2]).unwrap();
    for t in [0.3f64, 1.1] {
        let want = (t.exp() + (2.0 * t).exp()) / 2.0 - 1.0;
        assert!((compound_cgf(&c, &u, t).value - want).abs() < 1e-14);
    }
    let marked = poisson("indicator(0.25)").with_marks(u).unwrap();
    assert!((marked.phi()[0] - 1.5 * (1.0 - (-0.5f64).exp())).abs() < 1e-14);
}

#[test]
fn vector_rate_reduces_to_scalar() {
    let m = poisson("triangular(0.5)");
    let theta = m.phi()[0] * 1.7;
    let s = rate_star(&m, theta).unwrap();
    let v = vector_rate(&m, &[theta]).unwrap();
    assert!(v.is_converged(), "{v:?}");
    assert!((v.rate - s.rate).abs() < 1e-10);
    assert!((v.primal_rate.unwrap() - s.rate).abs() < 1e-9);
}

#[test]
fn duplicated_components_match_scalar() {
    let m1 = poisson("indicator(0.25)");
    let m2 = poisson("indicator(0.25); indicator(0.25)");
    let theta = 1.0;
    let s = rate_star(&m1, theta).unwrap();
    let v = vector_rate(&m2, &[theta, theta]).unwrap();
    assert!(v.is_converged(), "{v:?}");
    assert!((v.rate - s.rate).abs() < 1e-8, "{} vs {}", v.rate, s.rate);
    assert!((v.t_star[0] - v.t_star[1]).abs() < 1e-8);
}

#[test]
fn vector_duality_gap_is_small() {
    let mut rng = RngSeed::new(5, 0).rng();
    for case in 0..20 {
        let n = 2 + case % 2;
        let comps: Vec<String> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => format!("indicator({})", rng.gen_range(0.1..1.0)),
                1 => format!("triangular({})", rng.gen_range(0.2..1.5)),
                _ => format!("pwl([0, {}], [1, -0.3], -0.3)", rng.gen_range(0.2..1.0)),
            })
            .collect();
        let m = poisson(&comps.join("; "));
        let theta: Vec<f64> = m
            .phi()
            .iter()
            .map(|p| p + rng.gen_range(0.05..0.5))
            .collect();
        let r = vector_rate(&m, &theta).unwrap();
        assert!(r.is_converged(), "case {case} {comps:?} {theta:?}: {r:?}");
        let gap = (r.rate - r.primal_rate.unwrap()).abs();
        assert!(gap <= DUALITY_TOL, "case {case}: gap {gap}");
        assert!(r.rate > 0.0);
    }
}

#[test]
fn empirical_examples() {
    let s = PointSeq::new(vec![0.5], 0.0..1.0).unwrap();
    let e = EmpiricalCgf::build(&s, 2.0, &sf("indicator(0.2)")).unwrap();
    assert_eq!((e.left_len, e.right_len), (0.5, 0.5));
    assert!(e.half_gaps.is_empty());
    assert_eq!(e.partition_sum(), 1.0);
    for t in [0.0, 0.5, 3.0] {
        let (v, d1, _) = e.eval(t);
        assert!((v - 2.0 * 0.4 * t.exp_m1()).abs() < 1e-14);
        assert!((d1 - 0.8 * t.exp()).abs() < 1e-14);
    }
    let tpl = sample_poisson(1.0, 0.0..50.0, RngSeed::new(1, 0)).unwrap();
    let c = EmpiricalCgf::build(&tpl, 1.3, &sf("const(0.7)")).unwrap();
    for t in [-1.0, 0.0, 2.0] {
        assert!((c.eval(t).0 - 1.3 * (0.7 * t).exp_m1()).abs() < 1e-13);
    }
    let analytic = rate_star(
        &RateModel::poisson(1.0, 1.3, sf("const(0.7)")).unwrap(),
        2.0,
    )
    .unwrap();
    let r = c.rate_star(2.0);
    assert_eq!(r.rate, analytic.rate);
    assert_eq!(r.t(), analytic.t());

    let empty = EmpiricalCgf::build(&PointSeq::empty(0.0..5.0), 1.0, &sf("triangular(1)")).unwrap();
    assert!(empty.is_degenerate());
    assert_eq!(empty.eval(2.0), (0.0, 0.0, 0.0));
    assert_eq!(empty.rate_star(1.0).status, SolveStatus::AtBoundary);
    assert!(EmpiricalCgf::build(&tpl, 1.0, &sf("const(1); const(2)")).is_err());
}

/// `(lambda/l) int_0^l (e^{t f(d(y,S))} - 1) dy` by quadrature over `y`.
fn oracle_empirical(s: &PointSeq, lambda: f64, f: &ScoreFn, t: f64) -> f64 {
    let pts = s.points();
    let l = s.window().end;
    let mut cuts = vec![0.0, l];
    cuts.extend_from_slice(pts);
    cuts.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    for &p in pts {
        for k in f.components()[0].kinks() {
            cuts.push(p - k);
            cuts.push(p + k);
        }
    }
    cuts.retain(|&c| (0.0..=l).contains(&c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-13,
    };
    let total: f64 = cuts
        .windows(2)
        .map(|w| {
            integrate(
                |y| (t * f.eval_scalar(score::dist_to_template(y, pts))).exp_m1(),
                w[0],
                w[1],
                tol,
            )
            .0
        })
        .sum();
    lambda * total / l
}

use crate::score;

#[test]
fn empirical_matches_direct_integral() {
    for (k, f) in [
        "triangular(0.5)",
        "indicator(0.3)",
        "expdecay(0.4)",
        "pwl([0.1, 0.6], [1.5, -1], 0.2)",
    ]
    .iter()
    .enumerate()
    {
        let f = sf(f);
        let tpl = sample_poisson(1.0, 0.0..20.0, RngSeed::new(k as u64, 9)).unwrap();
        let e = EmpiricalCgf::build(&tpl, 0.8, &f).unwrap();
        assert!((e.partition_sum() - 20.0).abs() < 4.0 * f64::EPSILON * 20.0);
        for t in [-1.0, 0.4, 2.5] {
            let want = oracle_empirical(&tpl, 0.8, &f, t);
            let got = e.eval(t).0;
            assert!(
                (got - want).abs() < 1e-10 * want.abs().max(1.0),
                "{f} t={t}: {got} vs {want}"
            );
        }
        assert_eq!(e.eval(0.0).0, 0.0);
        assert!(e.eval(1.0).2 > 0.0);
    }
}

#[test]
fn long_template_approaches_analytic_cgf() {
    // Fluctuations are of order e^t / sqrt(l); t <= 1 keeps the bound at
    // several standard deviations.
    let f = sf("indicator(0.25)");
    let tpl = sample_poisson(1.0, 0.0..1e4, RngSeed::new(21, 0)).unwrap();
    let e = EmpiricalCgf::build(&tpl, 1.0, &f).unwrap();
    let m = RateModel::poisson(1.0, 1.0, f).unwrap();
    for i in 0..=10 {
        let t = i as f64 * 0.1;
        assert!((e.eval(t).0 - m.cgf(&[t]).value).abs() <= 0.02);
    }
    let a = rate_star(&m, 1.0).unwrap();
    let b = e.rate_star(1.0);
    assert!((a.t() - b.t()).abs() <= 0.02 && (a.rate - b.rate).abs() <= 0.02);
}

#[test]
fn renewal_template_uses_empirical_law() {
    let x = ProcessModel::EquilibriumRenewal {
        interarrival: Interarrival::Exponential { rate: 1.0 },
    };
    let f = sf("triangular(0.5)");
    let m = RateModel::from_processes(
        &x,
        &ProcessModel::poisson(1.0),
        f.clone(),
        &EmpiricalLaw::default(),
    )
    .unwrap();
    assert!(matches!(m.law(), DistanceLaw::Empirical(_)));
    let p = RateModel::poisson(1.0, 1.0, f).unwrap();
    assert!((m.phi()[0] - p.phi()[0]).abs() < 0.01);
    let lattice = ProcessModel::EquilibriumRenewal {
        interarrival: Interarrival::point_mass(1.0),
    };
    let m = RateModel::from_processes(
        &lattice,
        &ProcessModel::poisson(1.0),
        sf("indicator(0.25)"),
        &EmpiricalLaw::default(),
    )
    .unwrap();
    // d is uniform on [0, 1/2] for a unit lattice.
    assert!((m.phi()[0] - 0.5).abs() < 1e-9);
}

#[test]
fn condition_report() {
    let m = poisson("expdecay(1)");
    let r = validate_conditions(&m, &[0.9], RngSeed::new(1, 0));
    assert!(
        r.checks.iter().all(|c| c.status == CheckStatus::Pass),
        "{r:?}"
    );
    let r = validate_conditions(&m, &[m.phi()[0]], RngSeed::new(1, 0));
    assert!(r.hard_failure());
    assert_eq!(
        r.get("threshold above mean").unwrap().status,
        CheckStatus::Fail
    );
    let ind = poisson("indicator(0.25)");
    let r = validate_conditions(&ind, &[1.0], RngSeed::new(1, 0));
    assert_eq!(r.get("continuity").unwrap().status, CheckStatus::Pass);
    let neg = poisson("const(-1)");
    assert_eq!(
        validate_conditions(&neg, &[0.0], RngSeed::new(1, 0))
            .get("positivity")
            .unwrap()
            .status,
        CheckStatus::Fail
    );
    let dup = poisson("indicator(0.25); indicator(0.25)");
    let r = validate_conditions(&dup, &[1.0, 1.0], RngSeed::new(1, 0));
    assert_eq!(
        r.get("directional positivity").unwrap().status,
        CheckStatus::Warn
    );
}

proptest! {
    #[test]
    fn cgf_vanishes_at_zero_and_slope_is_phi(
        knots in prop::collection::vec(0.05..0.5f64, 1..4),
        values in prop::collection::vec(-1.0..2.0f64, 4),
        tail in -1.0..1.0f64,
        rho in 0.2..3.0f64,
    ) {
        let mut x = 0.0;
        let k: Vec<f64> = knots.iter().map(|g| { x += g; x }).collect();
        let f = ScoreFn::scalar(crate::score::ScoreComponent::PiecewiseLinear {
            values: values[..k.len()].to_vec(), knots: k, tail,
        }).unwrap();
        let m = RateModel::poisson(rho, 1.0, f.clone()).unwrap();
        prop_assert_eq!(m.cgf(&[0.0]).value, 0.0);
        let phi = m.distance_law_expect(1, |u, o| o[0] = f.eval_scalar(u))[0];
        prop_assert!((m.phi()[0] - phi).abs() < 1e-10);
    }

    #[test]
    fn partition_identity(n in 1usize..200, seed in 0u64..10_000) {
        let mut rng = RngSeed::new(seed, 0).rng();
        let l = rng.gen_range(1.0..100.0);
        let mut pts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..l)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let s = PointSeq::new(pts, 0.0..l).unwrap();
        let e = EmpiricalCgf::build(&s, 1.0, &sf("triangular(0.5)")).unwrap();
        prop_assert!((e.partition_sum() - l).abs() <= 4.0 * f64::EPSILON * l * (n as f64).max(1.0).sqrt());
        prop_assert!(e.left_len >= 0.0 && e.right_len >= 0.0 && e.half_gaps.iter().all(|&g| g >= 0.0));
        prop_assert_eq!(e.eval(0.0).0, 0.0);
    }
}
