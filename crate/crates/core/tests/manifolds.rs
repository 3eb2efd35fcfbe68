use htlab::manifold::{
    default_image_count, detect_tangencies, preimage, trace_stable, trace_unstable, Contact, CurveKind, PreimageStep,
    RefineOptions,
};
use htlab::map::{eval_f, Window};
use htlab::{Execution, MapParams, ParamSet, Point2};
use proptest::prelude::*;

fn clip() -> Window {
    Window::square(-1.5, 1.5)
}

#[test]
fn unstable_curve_is_forward_invariant() {
    let opts = RefineOptions::default();
    for s in ParamSet::ALL {
        let p = MapParams::example(s);
        let n = default_image_count(&p, opts.seed_size);
        let curve = trace_unstable(&p, n, clip(), &opts).unwrap();
        assert!(!curve.truncated);
        let mut checked = 0;
        for (q, t) in curve.points.iter().zip(&curve.params) {
            // images of the last generation leave the traced range
            if t.abs() > f64::from(n) - 1.0 {
                continue;
            }
            let image = eval_f(&p, *q);
            if !Window::square(-1.4, 1.4).contains(image) {
                continue;
            }
            assert!(curve.distance_to(image) < 2e-3, "{}: f({q}) is off the curve", s.name());
            checked += 1;
        }
        assert!(checked > 100, "{}: only {checked} points checked", s.name());
    }
}

#[test]
fn stable_branches_land_on_the_axis() {
    let opts = RefineOptions::default();
    for s in ParamSet::ALL {
        let p = MapParams::example(s);
        let curves = trace_stable(&p, 3, clip(), &opts, Execution::Parallel).unwrap();
        assert!(curves.len() > 3);
        for (i, c) in curves.iter().enumerate() {
            assert_eq!(c.kind, CurveKind::StableBranch(i));
            let steps = if c.label == "axis" {
                0
            } else {
                c.label.split('.').count()
            };
            for q in &c.points {
                let mut z = *q;
                for _ in 0..steps {
                    z = eval_f(&p, z);
                }
                assert!(z.y.abs() < 1e-8, "{} {}: {q} lands at {z}", s.name(), c.label);
            }
        }
    }
}

#[test]
fn stable_tree_does_not_depend_on_execution_mode() {
    let p = MapParams::example(ParamSet::Set21);
    let opts = RefineOptions::default();
    let a = trace_stable(&p, 3, clip(), &opts, Execution::Sequential).unwrap();
    let b = trace_stable(&p, 3, clip(), &opts, Execution::Parallel).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.label, y.label);
        assert_eq!(x.points, y.points);
    }
}

#[test]
fn clip_window_away_from_the_tangency_has_no_hit_there() {
    let opts = RefineOptions::default();
    let p = MapParams::example(ParamSet::Set20);
    let n = default_image_count(&p, opts.seed_size);
    let window = Window::new(-1.5, 0.9, -1.5, 1.5);
    let curve = trace_unstable(&p, n, window, &opts).unwrap();
    let hits = detect_tangencies(&curve, 1e-3);
    assert!(hits.iter().all(|h| h.location.x <= 0.9 + 1e-12));
    assert!(hits.iter().all(|h| h.location.dist(Point2::new(1.0, 0.0)) > 0.05));
}

#[test]
fn tangential_hits_touch_from_one_side() {
    let opts = RefineOptions::default();
    for s in ParamSet::ALL {
        let p = MapParams::example(s);
        let curve = trace_unstable(&p, default_image_count(&p, opts.seed_size), clip(), &opts).unwrap();
        for h in detect_tangencies(&curve, 1e-3) {
            // crossings are bisected in the curve parameter, so their
            // height error scales with the local speed of the curve
            let (sign_ok, height) = match h.contact {
                Contact::Tangential => (h.curvature_sign.abs() == 1.0, 1e-9),
                Contact::Transversal => (h.curvature_sign == 0.0, 1e-6),
            };
            assert!(sign_ok && h.location.y.abs() < height, "{}: {:?}", s.name(), h);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn preimages_map_forward_to_their_target(x in -1.2..1.2f64, y in -1.2..1.2f64, which in 0usize..3) {
        let p = MapParams::example(ParamSet::Set20);
        let q = Point2::new(x, y);
        let step = [PreimageStep::Lower, PreimageStep::Upper, PreimageStep::Blend(0)][which];
        if let Some(pre) = preimage(&p, step, q) {
            prop_assert!(eval_f(&p, pre).dist_sup(q) < 1e-9, "{:?}: f({}) != {}", step, pre, q);
        }
    }
}
