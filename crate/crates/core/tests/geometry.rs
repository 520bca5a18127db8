mod common;

use common::{pt, random_point};
use outline_refine::geometry::{bezier_point, junction_tangents, sample_segment, GeometryError, Segment};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bernstein(p: [outline_refine::scalar::Point; 4], t: f64) -> outline_refine::scalar::Point {
    let s = 1.0 - t;
    p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
}

proptest! {
    #[test]
    fn de_casteljau_matches_bernstein(seed in any::<u64>(), t in 0.0..=1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = [0; 4].map(|_| random_point(&mut rng, 10.0));
        let a = bezier_point(&Segment::Cubic(p), t).unwrap();
        let b = bernstein(p, t);
        prop_assert!(a.distance(b) < 1e-12);
    }

    #[test]
    fn samples_start_and_end_exactly(seed in any::<u64>(), n in 2usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seg = Segment::Cubic([0; 4].map(|_| random_point(&mut rng, 10.0)));
        let s = sample_segment(&seg, n).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert_eq!(s[0], seg.start());
        prop_assert_eq!(s[n - 1], seg.end());
    }

    #[test]
    fn reversal_mirrors_evaluation(seed in any::<u64>(), t in 0.0..=1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seg = Segment::Cubic([0; 4].map(|_| random_point(&mut rng, 10.0)));
        let a = seg.eval(t);
        let b = seg.reversed().eval(1.0 - t);
        prop_assert!(a.distance(b) < 1e-12);
    }
}

#[test]
fn parameter_outside_unit_interval_is_rejected() {
    let seg = Segment::Line(pt(0.0, 0.0), pt(1.0, 0.0));
    assert!(matches!(bezier_point(&seg, 1.5), Err(GeometryError::ParameterOutOfRange(_))));
    assert!(matches!(bezier_point(&seg, -0.1), Err(GeometryError::ParameterOutOfRange(_))));
}

#[test]
fn disjoint_segments_have_no_junction() {
    let a = Segment::Line(pt(0.0, 0.0), pt(1.0, 0.0));
    let b = Segment::Line(pt(1.0, 0.5), pt(2.0, 0.0));
    assert!(matches!(junction_tangents(&a, &b), Err(GeometryError::EndpointMismatch { .. })));
}
