use cising::kernel::Kernel;
use proptest::prelude::*;

fn kernels() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        prop::collection::vec((0.05f64..3.0, 0.1f64..4.0), 1..4)
            .prop_map(|m| Kernel::modes(&m).unwrap()),
        (0.1f64..3.0).prop_map(|c| Kernel::poly(c).unwrap()),
        (1u32..=3, 0.0f64..1.0, 0.5f64..4.0).prop_map(|(d, frac, k)| {
            let delta = frac * (d as f64 - 1.0) / 2.0;
            Kernel::power_law(d, delta, k).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn even_positive_decreasing(k in kernels(), t in 0.0f64..20.0, dt in 0.01f64..5.0) {
        let g = k.eval(t).unwrap();
        prop_assert_eq!(g, k.eval(-t).unwrap());
        prop_assert!(g > 0.0);
        prop_assert!(k.eval(t + dt).unwrap() <= g);
        prop_assert!(g <= k.at_zero() * (1.0 + 1e-12));
    }

    #[test]
    fn antiderivatives_differentiate_back(k in kernels(), x in 0.2f64..8.0) {
        let h = 1e-4;
        let df = (k.first_antideriv(x + h).unwrap() - k.first_antideriv(x - h).unwrap()) / (2.0 * h);
        let dg = (k.second_antideriv(x + h).unwrap() - k.second_antideriv(x - h).unwrap()) / (2.0 * h);
        let g = k.eval(x).unwrap();
        let f = k.first_antideriv(x).unwrap();
        prop_assert!((df - g).abs() <= 1e-6 * (1.0 + g), "F' {} vs g {}", df, g);
        prop_assert!((dg - f).abs() <= 1e-6 * (1.0 + f), "G' {} vs F {}", dg, f);
    }

    #[test]
    fn antiderivative_parity(k in kernels(), x in 0.0f64..10.0) {
        prop_assert_eq!(k.first_antideriv(-x).unwrap(), -k.first_antideriv(x).unwrap());
        prop_assert_eq!(k.second_antideriv(-x).unwrap(), k.second_antideriv(x).unwrap());
        prop_assert_eq!(k.second_antideriv(0.0).unwrap(), 0.0);
    }

    #[test]
    fn box_integral_is_additive_and_symmetric(
        k in kernels(),
        a in 0.0f64..3.0, la in 0.1f64..2.0,
        c in 0.0f64..3.0, l1 in 0.1f64..2.0, l2 in 0.1f64..2.0,
    ) {
        let b = a + la;
        let (d, e) = (c + l1, c + l1 + l2);
        let whole = k.double_integral(a, b, c, e).unwrap();
        let parts = k.double_integral(a, b, c, d).unwrap() + k.double_integral(a, b, d, e).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole));
        let swapped = k.double_integral(c, e, a, b).unwrap();
        prop_assert!((whole - swapped).abs() <= 1e-9 * (1.0 + whole));
        prop_assert!(whole <= k.at_zero() * la * (l1 + l2) * (1.0 + 1e-9));
    }

    #[test]
    fn infrared_integral_is_monotone(k in kernels(), t in 0.1f64..50.0, dt in 0.1f64..50.0) {
        let a = k.infrared_integral(t).unwrap();
        let b = k.infrared_integral(t + dt).unwrap();
        prop_assert!(b >= a && a >= 0.0);
    }
}

#[test]
fn modes_kernel_is_a_sum_of_single_modes() {
    let k = Kernel::modes(&[(1.0, 1.0), (0.5, 3.0)]).unwrap();
    let a = Kernel::single_mode(1.0, 1.0).unwrap();
    let b = Kernel::single_mode(0.5, 3.0).unwrap();
    for &x in &[0.0, 0.3, 1.7, 6.0] {
        let want = a.second_antideriv(x).unwrap() + b.second_antideriv(x).unwrap();
        assert!((k.second_antideriv(x).unwrap() - want).abs() < 1e-14);
    }
}
