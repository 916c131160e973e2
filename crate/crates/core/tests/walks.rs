mod common;

use common::*;
use isovol::rng::stream;
use isovol::walks::{
    arc_in_simplex, gcw_step, random_tangent, reflect_direction, regcw_step, sample_component, ArcTarget, ReGcwParams,
    WalkState,
};
use isovol::{sample_patch, PatchBody, SimplexH, WalkConfig, WalkKind};
use nalgebra::DVector;

fn walk_histogram(body: &PatchBody, kind: WalkKind, refs: &[DVector<f64>], n: usize, seed: u64) -> Vec<f64> {
    let cfg = WalkConfig { kind, walk_length: 2, ..Default::default() };
    let (points, counters) = sample_component(body, 0, n, &cfg, stream(seed, &[1])).unwrap();
    assert_eq!(counters.boundary_failures, 0);
    voronoi_histogram(refs, &points)
}

#[test]
fn both_walks_match_rejection_histograms() {
    let mut rng = stream(21, &[]);
    for d in [3, 5] {
        for k in 0..2 {
            let body = single_component_body(d, 0.1, &mut rng);
            let refs = rejection(&body, None, 12, &mut rng);
            let oracle = voronoi_histogram(&refs, &rejection(&body, None, 40_000, &mut rng));
            for kind in [WalkKind::Regcw, WalkKind::Gcw] {
                let h = walk_histogram(&body, kind, &refs, 40_000, 100 * d as u64 + k);
                let tv = total_variation(&h, &oracle);
                assert!(tv < 0.05, "d={d} {kind:?} tv={tv}");
            }
        }
    }
}

#[test]
fn walks_stay_on_sphere_and_in_simplex() {
    let mut rng = stream(22, &[]);
    for d in [3, 6, 10] {
        let body = single_component_body(d, 0.05, &mut rng);
        let params = ReGcwParams::with_defaults(0.8, d).unwrap();
        let mut state = WalkState::new(body.components[0].start.clone(), 0, stream(22, &[d as u64]));
        for i in 0..20_000 {
            if i % 2 == 0 {
                regcw_step(&mut state, &body.simplex, &params);
            } else {
                gcw_step(&mut state, &body.simplex, &ArcTarget::Uniform).unwrap();
            }
            assert!((state.point.norm() - 1.0).abs() < 1e-9);
            assert!(body.simplex.contains(&state.point, 1e-9));
        }
        assert_eq!(state.counters.boundary_failures, 0);
    }
}

#[test]
fn arc_endpoints_lie_on_facets() {
    let mut rng = stream(23, &[]);
    for d in [3, 4, 7] {
        let body = single_component_body(d, 0.05, &mut rng);
        let pts = rejection(&body, None, 500, &mut rng);
        for p in &pts {
            let v = random_tangent(p, &mut rng);
            let arc = arc_in_simplex(p, &v, &body.simplex).unwrap();
            assert!(arc.lower <= 0.0 && arc.upper >= 0.0);
            if arc.full_circle {
                continue;
            }
            for theta in [arc.lower, arc.upper] {
                let x = arc.point(theta);
                let slack = body.simplex.slack(&x);
                let tight = (0..slack.len()).map(|j| slack[j].abs()).fold(f64::INFINITY, f64::min);
                assert!(tight < 1e-8, "endpoint residual {tight}");
                assert!(body.simplex.contains(&x, 1e-8));
            }
            // Interior of the arc is inside the simplex.
            for k in 1..20 {
                let t = arc.lower + (arc.upper - arc.lower) * k as f64 / 20.0;
                assert!(body.simplex.contains(&arc.point(t), 1e-12));
            }
        }
    }
}

#[test]
fn reflection_is_an_isometric_involution() {
    let mut rng = stream(24, &[]);
    for d in [3, 8, 20] {
        for _ in 0..1000 {
            let q = uniform_sphere(d, &mut rng);
            let v = random_tangent(&q, &mut rng);
            let a = gaussian(d, &mut rng);
            let r = reflect_direction(&q, &v, &a).unwrap();
            let rr = reflect_direction(&q, &r, &a).unwrap();
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert!(r.dot(&q).abs() < 1e-12);
            assert!((&rr - &v).amax() < 1e-12);
        }
    }
}

#[test]
fn reflection_budget_rarely_exhausted() {
    let mut rng = stream(25, &[]);
    for d in [3, 6, 12] {
        let body = single_component_body(d, 0.02, &mut rng);
        let (_, counters) =
            sample_component(&body, 0, 20_000, &WalkConfig::default(), stream(25, &[d as u64])).unwrap();
        assert!(counters.violation_rate() < 1e-3, "d={d} {counters:?}");
        assert!(counters.reflections > 0);
    }
}

#[test]
fn vmf_target_on_the_whole_sphere_has_the_right_mean_cosine() {
    for (d, alpha) in [(3, 2.0), (5, 8.0)] {
        let body = whole_sphere_body(d);
        let mu = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let cfg = WalkConfig { kind: WalkKind::Gcw, walk_length: 3, ..Default::default() };
        let mut sampler = isovol::ComponentSampler::new(&body, 0, &cfg, stream(26, &[d as u64]))
            .unwrap()
            .with_target(ArcTarget::vmf(mu.clone(), alpha));
        for _ in 0..500 {
            sampler.step();
        }
        let n = 40_000;
        let mean = (0..n).map(|_| sampler.next_point()[0]).sum::<f64>() / n as f64;
        let truth = vmf_mean_cosine(d, alpha);
        assert!((mean - truth).abs() < 0.02, "d={d} alpha={alpha} mean={mean} truth={truth}");
    }
}

#[test]
fn patch_sampling_follows_component_weights() {
    // Four caps around the vertices of a regular simplex just outside the ball.
    let mut body = PatchBody::new(SimplexH::regular(3, 1.25).unwrap()).unwrap();
    assert_eq!(body.n_components(), 4);
    body.set_weights(&[0.1, 0.2, 0.3, 0.4]).unwrap();
    let (samples, _) = sample_patch(&body, 20_000, &WalkConfig::default(), &mut stream(27, &[])).unwrap();
    let mut counts = [0.0; 4];
    for s in &samples {
        assert_eq!(body.membership(&s.point).unwrap(), Some(s.component));
        counts[s.component] += 1.0 / samples.len() as f64;
    }
    for (c, w) in counts.iter().zip([0.1, 0.2, 0.3, 0.4]) {
        assert!((c - w).abs() < 0.015, "{counts:?}");
    }
}

#[test]
fn sampling_is_reproducible() {
    let mut rng = stream(28, &[]);
    let body = single_component_body(4, 0.1, &mut rng);
    let run = || sample_component(&body, 0, 300, &WalkConfig::default(), stream(5, &[9])).unwrap().0;
    assert_eq!(run(), run());
}
