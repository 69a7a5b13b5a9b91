use kdvol::{Kernel, MultiIndex};
use proptest::prelude::*;

fn kernels(dim: usize) -> Vec<Kernel> {
    vec![
        Kernel::gaussian(dim),
        Kernel::epanechnikov(dim),
        Kernel::uniform(dim),
        Kernel::triangular(dim),
    ]
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn bounded_by_sup_norm_and_nonnegative(u in prop::collection::vec(-3.0f64..3.0, 1..=3)) {
        for k in kernels(u.len()) {
            let v = k.eval(&u).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= k.sup_norm() * (1.0 + 1e-15));
        }
    }

    #[test]
    fn radial_under_rotation(x in -2.0f64..2.0, y in -2.0f64..2.0, angle in 0.0f64..std::f64::consts::TAU) {
        let (s, c) = angle.sin_cos();
        let r = [c * x - s * y, s * x + c * y];
        // Compact kernels jump at the support edge; rotation moves |u| by rounding.
        prop_assume!((norm(&[x, y]) - 1.0).abs() > 1e-9);
        for k in kernels(2) {
            let a = k.eval(&[x, y]).unwrap();
            let b = k.eval(&r).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * k.sup_norm(), "{} {a} {b}", k.name());
        }
    }

    #[test]
    fn nonincreasing_in_radius(u in prop::collection::vec(-2.0f64..2.0, 2), t in 1.0f64..2.0) {
        let far: Vec<f64> = u.iter().map(|v| v * t).collect();
        for k in kernels(2) {
            prop_assert!(k.eval(&far).unwrap() <= k.eval(&u).unwrap() + 1e-15);
        }
    }

    #[test]
    fn lipschitz_constant_holds(
        u in prop::collection::vec(-1.5f64..1.5, 2),
        v in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let dist = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
        for k in kernels(2) {
            if let Some(m) = k.lipschitz() {
                let diff = (k.eval(&u).unwrap() - k.eval(&v).unwrap()).abs();
                prop_assert!(diff <= m * dist * (1.0 + 1e-12) + 1e-15, "{}", k.name());
            }
        }
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences(
        u in prop::collection::vec(-2.5f64..2.5, 2),
        a in 0u32..3,
        b in 0u32..3,
    ) {
        let k = Kernel::gaussian(2);
        let s = MultiIndex::new(vec![a, b]);
        let e = 1e-5;
        let mut plus = u.clone();
        plus[0] += e;
        let mut minus = u.clone();
        minus[0] -= e;
        let fd = (k.deriv_eval(&s, &plus).unwrap() - k.deriv_eval(&s, &minus).unwrap()) / (2.0 * e);
        let exact = k.deriv_eval(&s.bumped(0), &u).unwrap();
        prop_assert!((fd - exact).abs() < 1e-7, "{fd} {exact}");
    }

    #[test]
    fn derivative_bounded_by_its_sup_norm(u in prop::collection::vec(-4.0f64..4.0, 1..=3), m in 0u32..3) {
        let k = Kernel::gaussian(u.len());
        let mut comps = vec![0; u.len()];
        comps[0] = m;
        let s = MultiIndex::new(comps);
        let sup = k.deriv_sup_norm(&s).unwrap();
        prop_assert!(k.deriv_eval(&s, &u).unwrap().abs() <= sup * (1.0 + 1e-12));
    }
}

#[test]
fn two_dimensional_kernels_integrate_to_one() {
    // Polar trapezoid: ∫ K = 2π ∫ k(r) r dr.
    for k in kernels(2) {
        let reach = k.support_radius().unwrap_or(12.0);
        let m = 200_000;
        let w = reach / m as f64;
        let mut total = 0.0;
        for i in 0..m {
            let r = (i as f64 + 0.5) * w;
            total += k.eval(&[r, 0.0]).unwrap() * r * w;
        }
        total *= std::f64::consts::TAU;
        assert!((total - 1.0).abs() < 1e-6, "{} {total}", k.name());
    }
}
