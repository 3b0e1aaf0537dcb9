use koksma::rational::parse_rational;
use koksma::sequences::{certify, DerivativeModel, Interval};
use koksma::SequenceFamily;
use proptest::prelude::*;

fn families() -> Vec<SequenceFamily> {
    vec![
        SequenceFamily::PurePower,
        SequenceFamily::PowerSum,
        SequenceFamily::poly_coeff(&["1", "1"]).unwrap(),
        SequenceFamily::poly_scale(&["1", "1"]).unwrap(),
        SequenceFamily::log_augmented(SequenceFamily::PurePower),
    ]
}

fn interval(lo: &str, hi: &str) -> Interval {
    Interval::new(parse_rational(lo).unwrap(), parse_rational(hi).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivatives_match_finite_differences(
        which in 0usize..5,
        n in 2u32..=30,
        x in 1.05f64..2.0,
    ) {
        let fam = &families()[which];
        let h = 2f64.powi(-20);
        let at = |t: f64| fam.derivatives_f64(n, t);
        let d = at(x);
        let (lo, hi) = (at(x - h), at(x + h));
        for k in 0..3 {
            let fd = (hi[k] - lo[k]) / (2.0 * h);
            let scale = d[k + 1].abs().max(d[k].abs()).max(1.0);
            prop_assert!((fd - d[k + 1]).abs() <= 1e-6 * scale, "k={k} fd={fd} exact={}", d[k + 1]);
        }
    }
}

#[test]
fn pure_power_certificate_is_closed_form() {
    let c = certify(&SequenceFamily::PurePower, &interval("1", "2"), 40, 33).unwrap();
    assert_eq!((c.c1, c.c2, c.c3, c.d_sign), (2.0, 1.0, 1.0, 1));
    assert!(c.all_pass());
}

#[test]
fn finer_grid_only_tightens_fitted_constants() {
    // grid sizes g and 2g - 1 nest, so maxima can only grow and minima shrink
    let iv = interval("11/10", "2");
    for fam in families().into_iter().skip(1) {
        let coarse = certify(&fam, &iv, 30, 9).unwrap();
        let fine = certify(&fam, &iv, 30, 17).unwrap();
        assert!(fine.c1 >= coarse.c1, "{}", fam.label());
        assert!(fine.c3 <= coarse.c3, "{}", fam.label());
        assert_eq!(fine.d_sign, coarse.d_sign);
    }
}

#[test]
fn intervals_below_one_are_rejected() {
    assert!(certify(&SequenceFamily::PurePower, &interval("1/2", "2"), 10, 5).is_err());
    let log = SequenceFamily::log_augmented(SequenceFamily::PurePower);
    assert!(certify(&log, &interval("1", "2"), 10, 5).is_err());
}
