//! Oracle checks for the integer-lattice layer: ball enumeration against a
//! quadruple loop over bounded entries, distance-set values against the
//! entry-norm formula, and isometry invariance of the plane distance.

use mixlab::hyperbolic::{
    distance_set, enumerate_ball, hyp_dist, mobius_act, reduce_to_fundamental, HPoint,
    LatticeElement,
};
use mixlab::rng::stream_rng;
use rand::Rng;
use std::collections::BTreeSet;

/// All sign-canonical unimodular integer matrices with
/// a^2 + b^2 + c^2 + d^2 <= 2 cosh R, found by exhaustive search.
fn brute_force_ball(radius: f64) -> BTreeSet<[i64; 4]> {
    let norm_cap = (2.0 * radius.cosh()).floor() as i64;
    let bound = (norm_cap as f64).sqrt() as i64;
    let mut out = BTreeSet::new();
    for a in -bound..=bound {
        for b in -bound..=bound {
            for c in -bound..=bound {
                for d in -bound..=bound {
                    if a * d - b * c != 1 {
                        continue;
                    }
                    if a * a + b * b + c * c + d * d > norm_cap {
                        continue;
                    }
                    let gamma = LatticeElement::new(a, b, c, d).unwrap();
                    out.insert(gamma.entries());
                }
            }
        }
    }
    out
}

#[test]
fn ball_enumeration_matches_brute_force() {
    for radius in [0.5, 1.0, 2.0, 3.0] {
        let fast: BTreeSet<[i64; 4]> =
            enumerate_ball(radius).unwrap().iter().map(|g| g.entries()).collect();
        let slow = brute_force_ball(radius);
        assert_eq!(fast, slow, "ball mismatch at radius {radius}");
    }
}

#[test]
fn distance_set_small_radius_values() {
    let ds = distance_set(2.0).unwrap();
    let expected = [0.0, 1.5f64.acosh(), 3.0f64.acosh(), 3.5f64.acosh()];
    assert_eq!(ds.len(), expected.len());
    for (got, want) in ds.iter().zip(expected.iter()) {
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn distance_set_is_sorted_and_deduplicated() {
    let ds = distance_set(3.0).unwrap();
    for pair in ds.windows(2) {
        assert!(pair[1] > pair[0] + 1e-9);
    }
}

fn random_point(i: u64) -> HPoint {
    let mut rng = stream_rng(0xba11, 7, i);
    HPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..8.0)).unwrap()
}

#[test]
fn lattice_action_is_isometric() {
    let gammas = enumerate_ball(2.5).unwrap();
    for i in 0..200 {
        let z = random_point(2 * i);
        let w = random_point(2 * i + 1);
        let d = hyp_dist(&z, &w);
        for gamma in gammas.iter().step_by(3) {
            let dd = hyp_dist(&mobius_act(gamma, &z), &mobius_act(gamma, &w));
            assert!((d - dd).abs() <= 1e-9 * (1.0 + d), "isometry failure at sample {i}");
        }
    }
}

#[test]
fn reduction_lands_in_the_fundamental_domain() {
    for i in 0..2_000 {
        let z = random_point(i);
        let (reduced, gamma) = reduce_to_fundamental(&z).unwrap();
        assert!(reduced.x.abs() <= 0.5 + 1e-9, "strip violation at {i}");
        assert!(reduced.x * reduced.x + reduced.y * reduced.y >= 1.0 - 1e-9, "disc violation at {i}");
        let moved = mobius_act(&gamma, &z);
        assert!(
            (moved.x - reduced.x).abs() + (moved.y - reduced.y).abs() <= 1e-9 * (1.0 + reduced.y),
            "witness mismatch at {i}"
        );
    }
}

#[test]
fn reduction_is_orbit_invariant() {
    // Reducing z and reducing gamma.z must land on the same representative.
    let gammas = enumerate_ball(2.0).unwrap();
    for i in 0..300 {
        let z = random_point(i);
        let (rep, _) = reduce_to_fundamental(&z).unwrap();
        for gamma in &gammas {
            let (other, _) = reduce_to_fundamental(&mobius_act(gamma, &z)).unwrap();
            // Points on the domain boundary may pick either representative;
            // compare through the distance, which is zero in either case.
            assert!(
                hyp_dist(&rep, &other) <= 1e-7,
                "orbit representative mismatch at sample {i}"
            );
        }
    }
}
