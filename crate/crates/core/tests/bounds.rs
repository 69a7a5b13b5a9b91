use kdvol::bounds::{
    combined_envelope, covering_bound, lower_bound, upper_bound_ray, upper_bound_simplified, BoundSpec, EnvelopeSpec,
};
use kdvol::{Kernel, MultiIndex};
use proptest::prelude::*;

fn spec(n: f64, l: f64, d: usize, dvol: f64, delta: f64) -> BoundSpec {
    BoundSpec { delta, ..BoundSpec::new(n, l, d, dvol) }
}

proptest! {
    #[test]
    fn ray_bound_decreases_in_n(n in 10.0f64..1e7, f in 1.01f64..10.0, l in 1e-3f64..1.0, dvol in 0.1f64..2.0, delta in 0.01f64..0.9) {
        let a = upper_bound_ray(&spec(n, l, 2, dvol, delta)).unwrap().value;
        let b = upper_bound_ray(&spec(n * f, l, 2, dvol, delta)).unwrap().value;
        prop_assert!(b <= a);
    }

    #[test]
    fn ray_bound_decreases_in_delta(n in 10.0f64..1e7, l in 1e-3f64..1.0, delta in 0.01f64..0.5, f in 1.01f64..1.9) {
        let a = upper_bound_ray(&spec(n, l, 1, 1.0, delta)).unwrap().value;
        let b = upper_bound_ray(&spec(n, l, 1, 1.0, delta * f)).unwrap().value;
        prop_assert!(b <= a);
    }

    #[test]
    fn simplified_bound_decreases_in_bandwidth(n in 10.0f64..1e7, l in 1e-3f64..0.5, f in 1.01f64..2.0, dvol in 0.1f64..3.0) {
        let a = upper_bound_simplified(&spec(n, l, 3, dvol, 0.05)).unwrap().value;
        let b = upper_bound_simplified(&spec(n, l * f, 3, dvol, 0.05)).unwrap().value;
        prop_assert!(b <= a);
    }

    #[test]
    fn lower_bound_below_upper(n in 10.0f64..1e7, l in 1e-3f64..1.0, dvol in 0.1f64..2.0, delta in 0.01f64..0.7357) {
        let s = spec(n, l, 2, dvol, delta);
        prop_assert!(lower_bound(&s).unwrap() <= upper_bound_simplified(&s).unwrap().value * (1.0 + 1e-12));
    }
}

#[test]
fn fully_specified_value() {
    let s = spec(1e4, 0.1, 1, 1.0, 0.05);
    let l = 10f64.ln();
    let g = 40f64.ln();
    let want = l / 1e3 + (l / 1e3).sqrt() + (g / 1e3).sqrt() + g / 1e3;
    assert!((upper_bound_ray(&s).unwrap().value - want).abs() < 1e-15);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(upper_bound_ray(&spec(0.5, 0.1, 1, 1.0, 0.05)).is_err());
    assert!(upper_bound_ray(&spec(10.0, 0.1, 1, 1.5, 0.05)).is_err());
    assert!(upper_bound_ray(&spec(10.0, 0.1, 1, 1.0, 1.0)).is_err());
    let s = BoundSpec { eps: 2.0, ..spec(10.0, 0.1, 2, 1.0, 0.05) };
    assert!(upper_bound_ray(&s).is_err());
    let s = BoundSpec { dimension_exact: false, ..spec(10.0, 0.1, 2, 1.0, 0.05) };
    assert!(upper_bound_ray(&s).is_err());
    assert!(lower_bound(&spec(10.0, 0.1, 2, 0.0, 0.05)).is_err());
}

#[test]
fn envelope_needs_log_argument_above_one() {
    let ok = EnvelopeSpec { n: 100.0, nu: 2.0, a: 1.0, b: 1.0, sigma2: 0.01, delta: 0.05, universal_c: 1.0 };
    assert!(combined_envelope(&ok).unwrap().value > 0.0);
    let bad = EnvelopeSpec { sigma2: 4.0, ..ok };
    assert!(combined_envelope(&bad).is_err());
}

#[test]
fn covering_bound_domain() {
    let k = Kernel::epanechnikov(1);
    let s = MultiIndex::zero(1);
    let sup = k.sup_norm();
    assert!(covering_bound(&k, 0.1, 1.0, 0.0, &s).is_err());
    assert!(covering_bound(&k, 0.1, 1.0, sup, &s).is_err());
    assert!(covering_bound(&Kernel::uniform(1), 0.1, 1.0, 0.1, &s).is_err());
    let a = covering_bound(&k, 0.1, 1.0, 0.1 * sup, &s).unwrap();
    let b = covering_bound(&k, 0.1, 1.0, 0.2 * sup, &s).unwrap();
    let c = covering_bound(&k, 0.2, 1.0, 0.1 * sup, &s).unwrap();
    assert!(b < a && c < a);
}
