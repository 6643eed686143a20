use dtpc_core::capacity::output_distribution;
use dtpc_core::channel::{ln_poisson, LOG2_E};
use dtpc_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ_y Pois(a)(y) log₂(Pois(a)(y) / Pois(b)(y))`, summed term by term.
fn kl_series(a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let mut y = 0u64;
    loop {
        let la = ln_poisson(a, y);
        let w = la.exp();
        if w > 0.0 {
            total += w * (la - ln_poisson(b, y)) * LOG2_E;
        }
        if y as f64 > a + 40.0 * a.sqrt() + 60.0 {
            break;
        }
        y += 1;
    }
    total
}

#[test]
fn kl_closed_form_matches_series() {
    assert!((kl_poisson(2.0, 1.0).unwrap() - kl_series(2.0, 1.0)).abs() < 1e-9);
    for (a, b) in [(0.5, 3.0), (7.5, 2.0), (1e-3, 1.0), (12.0, 11.0)] {
        assert!((kl_poisson(a, b).unwrap() - kl_series(a, b)).abs() < 1e-9, "{a} {b}");
    }
}

#[test]
fn kl_output_against_poisson_references() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let lambda0 = rng.random_range(0.05..3.0);
        let x = rng.random_range(0.0..8.0);
        let x_ref = rng.random_range(0.0..8.0);
        let ch = PoissonChannel::new(lambda0).unwrap();
        let y_max = truncation_point(8.0 + lambda0, 1e-15).unwrap() + 40;
        let reference = output_distribution(&InputDistribution::point_mass(x_ref).unwrap(), &ch, y_max);
        let got = kl_output(&ch, x, &reference).unwrap();
        let want = kl_poisson(x + lambda0, x_ref + lambda0).unwrap();
        assert!((got.bits - want).abs() < 1e-9, "λ0={lambda0} x={x} ref={x_ref}: {} vs {want}", got.bits);
        assert!(got.omitted_mass < 1e-14);
    }
}

#[test]
fn kl_output_example() {
    let ch = PoissonChannel::new(1.0).unwrap();
    let reference = output_distribution(&InputDistribution::point_mass(0.0).unwrap(), &ch, 80);
    let d = kl_output(&ch, 2.0, &reference).unwrap();
    // D(Pois(3) ‖ Pois(1)) = (3 ln 3 − 2)/ln 2
    assert!((d.bits - 1.869_497_420_385_541_7).abs() < 1e-9);
}

#[test]
fn kl_output_infinite_against_ideal_detector() {
    let ideal = PoissonChannel::new(0.0).unwrap();
    let reference = output_distribution(&InputDistribution::point_mass(0.0).unwrap(), &ideal, 20);
    assert!(matches!(kl_output(&ideal, 1.0, &reference), Err(Error::InfiniteDivergence(_))));
    assert_eq!(kl_output(&ideal, 0.0, &reference).unwrap().bits, 0.0);
}

#[test]
fn averaged_channel_pmf() {
    let states = vec![(0.5, PoissonChannel::new(0.5).unwrap()), (0.5, PoissonChannel::new(2.0).unwrap())];
    let avg = average_channel(&StateDependentChannel::new(states).unwrap());
    // ½ Pois(1.5)(1) + ½ Pois(3)(1)
    let want = 0.5 * (1.5 * (-1.5f64).exp() + 3.0 * (-3.0f64).exp());
    assert!((avg.pmf(1.0, 1).unwrap() - want).abs() < 1e-15);

    let states = vec![(0.5, PoissonChannel::new(1.0).unwrap()), (0.5, PoissonChannel::new(3.0).unwrap())];
    let avg = average_channel(&StateDependentChannel::new(states).unwrap());
    // (e^{-1} + e^{-3}) / 2
    assert!((avg.pmf(0.0, 0).unwrap() - 0.208_833_254_769_653_14).abs() < 1e-15);
}

#[test]
fn sample_mean_matches_channel_mean() {
    let ch = PoissonChannel::new(0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    let mean = (0..n).map(|_| ch.sample_with(3.3, &mut rng) as f64).sum::<f64>() / n as f64;
    // Four standard errors of Pois(4).
    assert!((mean - 4.0).abs() < 4.0 * (4.0f64 / n as f64).sqrt());
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_only_on_the_diagonal(a in 0.0f64..50.0, b in 1e-3f64..50.0) {
        let d = kl_poisson(a, b).unwrap();
        prop_assert!(d >= 0.0);
        if (a - b).abs() > 1e-3 {
            prop_assert!(d > 0.0);
        }
        prop_assert_eq!(kl_poisson(b, b).unwrap(), 0.0);
    }

    #[test]
    fn pmf_sums_to_one_up_to_truncation(lambda0 in 0.0f64..5.0, x in 0.0f64..20.0, k in 6i32..14) {
        let eps = 10f64.powi(-k);
        let ch = PoissonChannel::new(lambda0).unwrap();
        let y_max = truncation_point(lambda0 + x, eps).unwrap();
        let total: f64 = (0..=y_max).map(|y| ch.pmf(x, y).unwrap()).sum();
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert!(1.0 - total <= eps + 1e-13);
    }

    #[test]
    fn mixture_pmf_is_a_convex_combination(w in 0.01f64..0.99, l1 in 0.0f64..4.0, l2 in 0.0f64..4.0, x in 0.0f64..6.0, y in 0u64..30) {
        let p1 = PoissonChannel::new(l1).unwrap();
        let p2 = PoissonChannel::new(l2).unwrap();
        let mix = MixtureChannel::new(vec![(w, p1), (1.0 - w, p2)]).unwrap();
        let want = w * p1.pmf(x, y).unwrap() + (1.0 - w) * p2.pmf(x, y).unwrap();
        prop_assert!((mix.pmf(x, y).unwrap() - want).abs() <= 1e-14 + 1e-12 * want);
    }
}
