use super::*;
use crate::rng::RngSeed;
use proptest::prelude::*;
use rand::Rng;

fn scalar(s: &str) -> ScoreFn {
    s.parse().unwrap()
}

fn linear_scan(y: f64, s: &[f64]) -> f64 {
    s.iter()
        .map(|&p| (y - p).abs())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn distance_examples() {
    let s = [0.1, 0.4, 0.9];
    assert!((dist_to_template(0.3, &s) - 0.1).abs() < 1e-15);
    assert_eq!(dist_to_template(0.4, &s), 0.0);
    assert!((dist_to_template(2.0, &s) - 1.1).abs() < 1e-15);
    assert!((dist_to_template(-1.0, &s) - 1.1).abs() < 1e-15);
    assert_eq!(dist_to_template(0.5, &[]), f64::INFINITY);
}

#[test]
fn distance_matches_linear_scan() {
    let mut rng = RngSeed::new(7, 0).rng();
    for _ in 0..10_000 {
        let n = rng.gen_range(1..30);
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        s.sort_by(f64::total_cmp);
        let y = rng.gen_range(-2.0..12.0);
        assert_eq!(dist_to_template(y, &s), linear_scan(y, &s));
    }
}

#[test]
fn component_values() {
    let ind = scalar("indicator(0.25)");
    assert_eq!(ind.eval_scalar(0.25), 1.0);
    assert_eq!(ind.eval_scalar(0.2500001), 0.0);
    assert_eq!(ind.eval_scalar(f64::INFINITY), 0.0);
    let tri = scalar("triangular(0.5)");
    assert!((tri.eval_scalar(0.125) - 0.75).abs() < 1e-15);
    assert_eq!(tri.eval_scalar(0.7), 0.0);
    let e = scalar("expdecay(2)");
    assert!((e.eval_scalar(2.0) - (-1f64).exp()).abs() < 1e-15);
    assert_eq!(e.eval_scalar(f64::INFINITY), 0.0);
    let p = scalar("pwl([0, 1, 2], [1, -1, 0.5], 0.25)");
    assert_eq!(p.eval_scalar(0.5), 0.0);
    assert_eq!(p.eval_scalar(1.5), -0.25);
    assert_eq!(p.eval_scalar(2.0), 0.5);
    assert_eq!(p.eval_scalar(3.0), 0.25);
    assert_eq!(p.bound(), 1.0);
    let a = scalar("affine(0.5, [2, -1], [indicator(1), triangular(2)])");
    assert!((a.eval_scalar(0.5) - (0.5 + 2.0 - 0.75)).abs() < 1e-15);
    assert_eq!(a.eval_scalar(5.0), 0.5);
}

#[test]
fn bounds_and_structure() {
    let a = scalar("affine(0, [1, -1], [indicator(1), indicator(1)])");
    assert_eq!(a.bound(), 0.0);
    assert!(a.linear_pieces().is_some());
    let e = scalar("affine(0, [1, 1], [expdecay(1), const(1)])");
    assert_eq!(e.bound(), 2.0);
    assert!(e.linear_pieces().is_none());
    assert_eq!(e.support_radius(), f64::INFINITY);
    let v = scalar("indicator(0.25); triangular(0.5)");
    assert_eq!(v.dim(), 2);
    assert_eq!(v.continuity(), vec![false, true]);
    assert_eq!(v.discontinuities(), vec![0.25]);
    assert_eq!(v.support_radius(), 0.5);
}

#[test]
fn parse_rejects_bad_forms() {
    for bad in [
        "indicator(-1)",
        "triangular(0)",
        "pwl([1, 0], [0, 1], 0)",
        "pwl([0, 1], [0], 0)",
        "wobble(1)",
        "indicator(1, 2)",
        "",
        "affine(0, [1], [])",
    ] {
        assert!(bad.parse::<ScoreFn>().is_err(), "{bad} parsed");
    }
}

#[test]
fn pieces_reproduce_values() {
    let fs = [
        "indicator(0.25)",
        "indicator(0)",
        "triangular(0.5)",
        "pwl([0.1, 0.3, 0.7], [2, -1, 0.5], -0.5)",
        "const(3)",
        "affine(0.1, [0.5, -2], [indicator(0.4), pwl([0, 0.2], [1, 0], 0)]); triangular(0.3)",
    ];
    let mut rng = RngSeed::new(3, 0).rng();
    for s in fs {
        let f = scalar(s);
        let p = f.linear_pieces().unwrap();
        let mut xs: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.5)).collect();
        xs.extend_from_slice(p.breaks());
        xs.push(0.0);
        for x in xs {
            for j in 0..f.dim() {
                let want = f.components()[j].eval(x);
                let got = p.eval(j, x);
                assert!((want - got).abs() < 1e-12, "{s} at {x}: {want} vs {got}");
            }
        }
    }
}

#[test]
fn matching_score_examples() {
    let f = scalar("indicator(0.25)");
    let tpl = PointSeq::new(vec![0.5, 1.5], 0.0..2.0).unwrap();
    let data = PointSeq::new(vec![10.6, 11.0, 11.4, 12.0], 0.0..20.0).unwrap();
    // shifted 0.6 (d=0.1), 1.0 (d=0.5), 1.4 (d=0.1); 12.0 is outside [10, 12)
    let s = matching_score(&tpl, &data, &f, 2.0, 10.0).unwrap();
    assert_eq!(s, ScoreValue::Finite(vec![1.0]));
    let empty = PointSeq::empty(0.0..2.0);
    assert_eq!(
        matching_score(&empty, &data, &f, 2.0, 10.0).unwrap(),
        ScoreValue::Bottom
    );
    let none = PointSeq::new(vec![], 0.0..20.0).unwrap();
    assert_eq!(
        matching_score(&tpl, &none, &f, 2.0, 3.0).unwrap(),
        ScoreValue::Finite(vec![0.0])
    );
    assert!(matches!(
        matching_score(&tpl, &data, &f, 2.0, 19.0),
        Err(Error::InsufficientData { .. })
    ));
    assert!(matching_score(&tpl, &data, &f, 0.0, 1.0).is_err());
}

#[test]
fn marks_weight_the_sum() {
    let f = scalar("const(1)");
    let tpl = PointSeq::new(vec![0.5], 0.0..1.0).unwrap();
    let data = PointSeq::with_marks(vec![0.2, 0.7], vec![2, 3], 0.0..1.0).unwrap();
    assert_eq!(
        matching_score(&tpl, &data, &f, 1.0, 0.0).unwrap(),
        ScoreValue::Finite(vec![5.0])
    );
}

#[test]
fn ordering() {
    let b = ScoreValue::Bottom;
    let a = ScoreValue::Finite(vec![1.0, 2.0]);
    let c = ScoreValue::Finite(vec![2.0, 1.0]);
    let d = ScoreValue::Finite(vec![2.0, 3.0]);
    assert!(b < a);
    assert!(a < d);
    assert_eq!(a.partial_cmp(&c), None);
    assert!(!b.meets(&[0.0, 0.0]));
    assert!(d.meets(&[2.0, 3.0]));
    assert!(!c.meets(&[1.5, 1.5]));
}

fn arb_component() -> impl Strategy<Value = ScoreComponent> {
    let leaf = prop_oneof![
        (0.0..2.0f64).prop_map(|radius| ScoreComponent::Indicator { radius }),
        (0.01..2.0f64).prop_map(|scale| ScoreComponent::ExpDecay { scale }),
        (0.01..2.0f64).prop_map(|radius| ScoreComponent::Triangular { radius }),
        (-3.0..3.0f64).prop_map(|value| ScoreComponent::Constant { value }),
        (
            prop::collection::vec(0.01..1.0f64, 1..5),
            prop::collection::vec(-2.0..2.0f64, 5),
            -2.0..2.0f64
        )
            .prop_map(|(gaps, vals, tail)| {
                let mut k = 0.0;
                let knots: Vec<f64> = gaps
                    .iter()
                    .map(|g| {
                        let x = k;
                        k += g;
                        x
                    })
                    .collect();
                let values = vals[..knots.len()].to_vec();
                ScoreComponent::PiecewiseLinear {
                    knots,
                    values,
                    tail,
                }
            }),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        (
            -1.0..1.0f64,
            prop::collection::vec((-2.0..2.0f64, inner), 1..3),
        )
            .prop_map(|(offset, terms)| ScoreComponent::Affine { offset, terms })
    })
}

proptest! {
    #[test]
    fn text_round_trip(comps in prop::collection::vec(arb_component(), 1..3)) {
        let f = ScoreFn::new(comps).unwrap();
        let g: ScoreFn = f.to_string().parse().unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn bound_dominates_values(c in arb_component(), x in 0.0..5.0f64) {
        let f = ScoreFn::scalar(c).unwrap();
        prop_assert!(f.eval_scalar(x).abs() <= f.bound() + 1e-12);
    }

    #[test]
    fn score_is_translation_invariant(
        seed in 0u64..1000,
        shift in -50.0..50.0f64,
        t in 0.0..5.0f64,
    ) {
        let f = scalar("triangular(0.3); indicator(0.2)");
        let l = 4.0;
        let tpl = crate::procgen::sample_poisson(2.0, 0.0..l, RngSeed::new(seed, 0)).unwrap();
        let data = crate::procgen::sample_poisson(2.0, 0.0..10.0, RngSeed::new(seed, 1)).unwrap();
        let a = matching_score(&tpl, &data, &f, l, t).unwrap();
        let b = matching_score(&tpl, &data.shifted(-shift), &f, l, t + shift).unwrap();
        match (a, b) {
            (ScoreValue::Finite(a), ScoreValue::Finite(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn score_is_additive_over_disjoint_data(seed in 0u64..1000, t in 0.0..5.0f64) {
        let f = scalar("pwl([0, 0.5], [1, -0.5], 0.1)");
        let l = 3.0;
        let tpl = crate::procgen::sample_poisson(2.0, 0.0..l, RngSeed::new(seed, 0)).unwrap();
        prop_assume!(!tpl.is_empty());
        let a = crate::procgen::sample_poisson(1.0, 0.0..10.0, RngSeed::new(seed, 1)).unwrap();
        let b = crate::procgen::sample_poisson(1.0, 0.0..10.0, RngSeed::new(seed, 2)).unwrap();
        let mut all: Vec<f64> = a.points().iter().chain(b.points()).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        prop_assume!(all.len() == a.len() + b.len());
        let u = PointSeq::new(all, 0.0..10.0).unwrap();
        let sa = matching_score(&tpl, &a, &f, l, t).unwrap();
        let sb = matching_score(&tpl, &b, &f, l, t).unwrap();
        let su = matching_score(&tpl, &u, &f, l, t).unwrap();
        let sum = sa.values().unwrap()[0] + sb.values().unwrap()[0];
        prop_assert!((su.values().unwrap()[0] - sum).abs() < 1e-12);
    }
}
