use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlstm_unet::metrics::{
    aggregate, dsc, evaluate_case, hd95, hd_percentile, instance_f1, instances_from_labels, nsd,
    squared_distance_transform, ClassMetrics, EvalOptions, MetricReport,
};
use xlstm_unet::Array;

#[allow(dead_code)]
mod common;
use common::masks::*;

fn lab(shape: &[usize], v: Vec<i32>) -> Array<i32> {
    Array::new(shape, v).unwrap()
}

// ---- examples ----

#[test]
fn dsc_examples() {
    let p = lab(&[6], vec![1, 1, 0, 0, 0, 0]);
    let g = lab(&[6], vec![1, 1, 1, 1, 0, 0]);
    assert!((dsc(&p, &g, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(dsc(&g, &g, 1).unwrap(), 1.0);
    let d = lab(&[6], vec![0, 0, 0, 0, 1, 1]);
    assert_eq!(dsc(&g, &d, 1).unwrap(), 0.0);
    assert_eq!(dsc(&g, &d, 2).unwrap(), 1.0);
    assert!(dsc(&p, &lab(&[2, 3], vec![0; 6]), 1).is_err());
}

#[test]
fn nsd_examples() {
    // two horizontal lines one row apart
    let mut a = vec![0; 5 * 7];
    let mut b = vec![0; 5 * 7];
    for x in 1..6 {
        a[7 + x] = 1;
        b[2 * 7 + x] = 1;
    }
    let (a, b) = (lab(&[5, 7], a), lab(&[5, 7], b));
    assert_eq!(nsd(&a, &b, 1, 1.0).unwrap(), 1.0);
    assert_eq!(nsd(&a, &b, 1, 0.5).unwrap(), 0.0);
    assert_eq!(nsd(&a, &a, 1, 0.5).unwrap(), 1.0);
    let mut far = vec![0; 20 * 20];
    far[0] = 1;
    far[1] = 1;
    let mut far2 = vec![0; 20 * 20];
    far2[399] = 1;
    assert_eq!(nsd(&lab(&[20, 20], far), &lab(&[20, 20], far2), 1, 2.0).unwrap(), 0.0);
    let empty = lab(&[5, 7], vec![0; 35]);
    assert_eq!(nsd(&empty, &empty, 1, 1.0).unwrap(), 1.0);
    assert_eq!(nsd(&a, &empty, 1, 1.0).unwrap(), 0.0);
    assert!(nsd(&a, &b, 1, 0.0).is_err());
}

#[test]
fn hd95_examples() {
    let mut a = vec![0; 10 * 10];
    let mut b = vec![0; 10 * 10];
    a[2 * 10 + 1] = 1;
    b[2 * 10 + 6] = 1;
    let (a, b) = (lab(&[10, 10], a), lab(&[10, 10], b));
    assert_eq!(hd95(&a, &b, 1).unwrap(), Some(5.0));
    assert_eq!(hd95(&a, &a, 1).unwrap(), Some(0.0));
    assert_eq!(hd95(&a, &lab(&[10, 10], vec![0; 100]), 1).unwrap(), None);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let p = blobs(&[12, 12], 2, &mut rng);
        let g = blobs(&[12, 12], 2, &mut rng);
        if let (Some(h95), Some(h100)) = (hd95(&p, &g, 1).unwrap(), hd_percentile(&p, &g, 1, 100.0).unwrap()) {
            assert!(h95 <= h100);
        }
    }
}

#[test]
fn f1_examples() {
    let mut g = vec![0; 8 * 8];
    for (i, v) in g.iter_mut().enumerate() {
        let (y, x) = (i / 8, i % 8);
        if y < 2 && x < 2 {
            *v = 1;
        }
        if y > 5 && x > 5 {
            *v = 2;
        }
    }
    let gt = lab(&[8, 8], g.clone());
    let sem = lab(&[8, 8], g.iter().map(|&v| (v > 0) as i32).collect());
    assert_eq!(instance_f1(&sem, &gt, 0.5).unwrap(), 1.0);
    let one: Vec<i32> = g.iter().map(|&v| (v == 1) as i32).collect();
    assert!((instance_f1(&lab(&[8, 8], one), &gt, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(instance_f1(&lab(&[8, 8], vec![0; 64]), &gt, 0.5).unwrap(), 0.0);
    assert_eq!(instances_from_labels(&sem), gt);
}

#[test]
fn distance_transform_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for shape in [&[9usize][..], &[7, 11], &[5, 6, 7]] {
        let n: usize = shape.iter().product();
        let feats: Vec<bool> = (0..n).map(|_| rng.random_bool(0.05)).collect();
        let pts: Vec<Vec<i64>> = (0..n).filter(|&i| feats[i]).map(|i| coords(i, shape)).collect();
        if pts.is_empty() {
            continue;
        }
        let dt = squared_distance_transform(&feats, shape);
        for i in 0..n {
            let want = min_dist(&coords(i, shape), &pts).powi(2);
            assert!((dt[i] - want).abs() < 1e-9, "{shape:?} at {i}: {} vs {want}", dt[i]);
        }
    }
}

#[test]
fn random_volumes_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = [16usize, 16, 16];
    for case in 0..50 {
        let p = blobs(&shape, 3, &mut rng);
        let g = blobs(&shape, 3, &mut rng);
        for c in 1..3 {
            let d = dsc(&p, &g, c).unwrap();
            assert!((d - oracle_dsc(&p, &g, c)).abs() <= 1e-9, "case {case}");
            for tau in [1.0, 2.0] {
                let n = nsd(&p, &g, c, tau).unwrap();
                assert!((n - oracle_nsd(&p, &g, c, tau)).abs() <= 1e-9, "case {case}");
                assert!((0.0..=1.0).contains(&n));
            }
            match (hd95(&p, &g, c).unwrap(), oracle_hd95(&p, &g, c)) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-6, "case {case}: {a} vs {b}"),
                (None, None) => {}
                other => panic!("case {case}: {other:?}"),
            }
            // symmetric under swapping pred and gt
            assert_eq!(dsc(&g, &p, c).unwrap(), d);
            assert_eq!(nsd(&g, &p, c, 1.0).unwrap(), nsd(&p, &g, c, 1.0).unwrap());
            assert_eq!(hd95(&g, &p, c).unwrap(), hd95(&p, &g, c).unwrap());
        }
        let gi = instances_from_labels(&g);
        let f = instance_f1(&p, &gi, 0.5).unwrap();
        assert!((f - oracle_f1(&p, &gi, 0.5)).abs() <= 1e-9, "case {case}");
        assert!((0.0..=1.0).contains(&f));
    }
}

fn permute_both(a: &Array<i32>, flips: &[bool], order: &[usize]) -> Array<i32> {
    let mut out = a.clone();
    for (ax, &f) in flips.iter().enumerate() {
        if f {
            out = out.flip(ax).unwrap();
        }
    }
    out.permute(order).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn metrics_invariant_under_flips_and_axis_swaps(
        seed in 0u64..10_000,
        flips in prop::collection::vec(any::<bool>(), 3),
        order in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [8usize, 9, 10];
        let p = blobs(&shape, 2, &mut rng);
        let g = blobs(&shape, 2, &mut rng);
        let (tp, tg) = (permute_both(&p, &flips, &order), permute_both(&g, &flips, &order));
        prop_assert!((dsc(&p, &g, 1).unwrap() - dsc(&tp, &tg, 1).unwrap()).abs() < 1e-12);
        prop_assert!((nsd(&p, &g, 1, 1.5).unwrap() - nsd(&tp, &tg, 1, 1.5).unwrap()).abs() < 1e-12);
        let (a, b) = (hd95(&p, &g, 1).unwrap(), hd95(&tp, &tg, 1).unwrap());
        prop_assert!(a.zip(b).is_none_or(|(a, b)| (a - b).abs() < 1e-9));
        let gi = instances_from_labels(&g);
        let tgi = instances_from_labels(&tg);
        prop_assert!((instance_f1(&p, &gi, 0.5).unwrap() - instance_f1(&tp, &tgi, 0.5).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn aggregate_skips_undefined() {
    let rep = |id: &str, d: f64, h: Option<f64>, f1: f64| MetricReport {
        case_id: id.into(),
        per_class: vec![ClassMetrics {
            class_id: 1,
            dsc: Some(d),
            nsd: Some(d),
            hd95: h,
        }],
        f1: Some(f1),
    };
    let agg = aggregate(&[rep("a", 0.5, Some(2.0), 1.0), rep("b", 1.0, None, 0.0)]);
    let c = &agg.per_class[0];
    let d = c.dsc.unwrap();
    assert!((d.mean - 0.75).abs() < 1e-12 && (d.std - 0.25).abs() < 1e-12);
    assert_eq!(c.hd95.unwrap().n, 1);
    assert_eq!(c.hd95.unwrap().mean, 2.0);
    assert_eq!(agg.f1.unwrap().mean, 0.5);
}

#[test]
fn evaluate_case_honours_metric_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = blobs(&[10, 10], 3, &mut rng);
    let g = blobs(&[10, 10], 3, &mut rng);
    let mut opts = EvalOptions::new(3);
    opts.metrics = vec![xlstm_unet::metrics::Metric::Dsc];
    let r = evaluate_case("x", &p, &g, None, &opts).unwrap();
    assert_eq!(r.per_class.len(), 2);
    assert!(r.per_class.iter().all(|c| c.dsc.is_some() && c.nsd.is_none() && c.hd95.is_none()));
    assert!(r.f1.is_none());
}
