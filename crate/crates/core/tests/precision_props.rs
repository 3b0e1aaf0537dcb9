mod common;

use common::{circle_dist, rational_powers_mod_one};
use koksma::precision::{mod_one_distance, powers_mod_one, rational_orbit, FixedReal, DEFAULT_TOL};
use koksma::{Rational, SequenceFamily};
use proptest::prelude::*;

fn rational_above_one() -> impl Strategy<Value = (u64, u64)> {
    // Q <= 3^40 is the stated range; P/Q in (1, 2]
    (2u64..=3u64.pow(40)).prop_flat_map(|q| ((q + 1)..=q.saturating_add(q), Just(q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn powers_match_exact_reduction((p, q) in rational_above_one(), big_n in 1u32..=200) {
        let x = Rational::new(p.into(), q.into());
        let orbit = rational_orbit(&SequenceFamily::PurePower, &x, big_n, DEFAULT_TOL).unwrap();
        let exact = rational_powers_mod_one(p, q, big_n);
        for (got, want) in orbit.values.iter().zip(&exact) {
            // exact values are themselves rounded once to f64
            prop_assert!(circle_dist(*got, *want) <= orbit.max_err + f64::EPSILON);
        }
    }

    #[test]
    fn doubling_precision_is_stable((p, q) in rational_above_one(), big_n in 1u32..=120) {
        let x = Rational::new(p.into(), q.into());
        let a = rational_orbit(&SequenceFamily::PurePower, &x, big_n, DEFAULT_TOL).unwrap();
        let fine = FixedReal::from_rational(&x, 2 * a.frac_bits);
        let b = powers_mod_one(&fine, big_n, DEFAULT_TOL).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!(mod_one_distance(*u, *v) <= a.max_err + b.max_err);
        }
    }
}

#[test]
fn orbits_are_deterministic() {
    let x = Rational::new(4.into(), 3.into());
    let a = rational_orbit(&SequenceFamily::PowerSum, &x, 150, DEFAULT_TOL).unwrap();
    let b = rational_orbit(&SequenceFamily::PowerSum, &x, 150, DEFAULT_TOL).unwrap();
    assert_eq!(a, b);
}

#[test]
fn power_sum_matches_exact_geometric_series() {
    // 1 + x + ... + x^n = (x^(n+1) - 1)/(x - 1); for x = 3/2 this is 2((3/2)^(n+1) - 1)
    let x = Rational::new(3.into(), 2.into());
    let orbit = rational_orbit(&SequenceFamily::PowerSum, &x, 60, DEFAULT_TOL).unwrap();
    let pow = rational_powers_mod_one(3, 2, 61);
    for n in 1..=60usize {
        let want = (2.0 * pow[n]).rem_euclid(1.0);
        assert!(circle_dist(orbit.values[n - 1], want) <= orbit.max_err + 4.0 * f64::EPSILON);
    }
}

#[test]
fn loose_tolerance_is_refused_for_statistics() {
    let x = FixedReal::from_rational(&Rational::new(4.into(), 3.into()), 40);
    assert!(powers_mod_one(&x, 200, DEFAULT_TOL).is_err());
}
