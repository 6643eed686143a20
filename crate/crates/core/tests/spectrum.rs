use dtpc_core::capacity::output_distribution;
use dtpc_core::spectrum::{sample_rates, second_moment_at};
use dtpc_core::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn channel() -> PoissonChannel {
    PoissonChannel::new(1.0).unwrap()
}

fn optimal() -> &'static CapacityResult {
    static R: OnceLock<CapacityResult> = OnceLock::new();
    R.get_or_init(|| solve_capacity(&channel(), &PowerConstraints::new(5.0, 5.0).unwrap(), 1e-4).unwrap())
}

#[test]
fn two_symbol_density() {
    let ch = channel();
    let dist = InputDistribution::from_pairs(&[(0.0, 0.5), (4.0, 0.5)]).unwrap();
    let out = output_distribution(&dist, &ch, 80);
    let r = info_density_rate(&[0.0, 4.0], &[0, 4], &ch, &out).unwrap();
    assert!((r.rate_bits - 0.926_494_726_738_692_6).abs() < 1e-9);
    assert_eq!(r.tail_symbols, 0);
}

#[test]
fn bound_arithmetic() {
    assert!((second_moment_bound(1.0, 3.0).unwrap() - 23.083_120_654_223_414).abs() < 1e-12);
    assert!((chebyshev_tail_bound(10_000, 0.5, 1.0, 3.0).unwrap() - 0.009_233_248_261_689_366).abs() < 1e-15);
    assert!(matches!(second_moment_bound(0.0, 5.0), Err(Error::UnsupportedBound(_))));
}

#[test]
fn point_mass_input_has_zero_density() {
    let ch = channel();
    let dist = InputDistribution::point_mass(2.0).unwrap();
    let out = output_distribution(&dist, &ch, 60);
    let config = SpectrumConfig::new(20, 2000, 3, 0.05).unwrap();
    let samples = sample_rates(&dist, &ch, &out, &config).unwrap();
    assert!(samples.rates.iter().all(|r| r.abs() < 1e-12));
    let est = SpectrumEstimate::from_samples(&samples, &config, 0.0, None).unwrap();
    assert_eq!(est.tail.successes, 0);
    assert!(est.chebyshev_bound.is_none() && est.bound_dominated.is_none());
}

#[test]
fn sample_prefix_does_not_depend_on_total() {
    let r = optimal();
    let out = r.output_law(&channel());
    let short = SpectrumConfig::new(50, 500, 99, 0.2).unwrap();
    let long = SpectrumConfig { num_samples: 1000, ..short };
    let a = sample_rates(&r.distribution, &channel(), &out, &short).unwrap();
    let b = sample_rates(&r.distribution, &channel(), &out, &long).unwrap();
    assert_eq!(a.rates[..], b.rates[..500]);
    assert_eq!(a, sample_rates(&r.distribution, &channel(), &out, &short).unwrap());
}

#[test]
fn chebyshev_dominates_tail() {
    let r = optimal();
    let config = SpectrumConfig::new(100, 100_000, 1, 0.2).unwrap();
    let est = sample_spectrum(&r.distribution, &channel(), r, &config).unwrap();
    assert_eq!(est.bound_dominated, Some(true));
    let bound = est.chebyshev_bound.unwrap();
    assert!(est.tail.estimate <= bound);
    assert!(est.tail.interval.contains(est.tail.estimate));
}

#[test]
fn mean_rate_is_capacity_under_optimal_input() {
    let r = optimal();
    let config = SpectrumConfig::new(100, 20_000, 7, 0.2).unwrap();
    let est = sample_spectrum(&r.distribution, &channel(), r, &config).unwrap();
    assert!((est.empirical_mean - r.capacity_bits).abs() <= 3.0 * est.standard_error + r.gap());
    assert!(est.lower_quantile <= est.empirical_mean && est.empirical_mean <= est.upper_quantile);
}

#[test]
fn suboptimal_input_does_not_beat_capacity() {
    let r = optimal();
    let config = SpectrumConfig::new(100, 20_000, 8, 0.2).unwrap();
    for pairs in [vec![(1.0, 0.3), (3.0, 0.7)], vec![(0.0, 0.2), (2.5, 0.3), (5.0, 0.5)]] {
        let dist = InputDistribution::from_pairs(&pairs).unwrap();
        let est = sample_spectrum(&dist, &channel(), r, &config).unwrap();
        assert!(est.empirical_mean <= r.capacity_bits + r.gap() + 3.0 * est.standard_error);
    }
}

#[test]
fn rate_variance_decays_like_one_over_n() {
    let r = optimal();
    let bound = second_moment_bound(1.0, 5.0).unwrap();
    let mut pts = Vec::new();
    for (i, n) in [10usize, 100, 1000, 10_000].into_iter().enumerate() {
        let config = SpectrumConfig::new(n, 2000, 40 + i as u64, 0.2).unwrap();
        let est = sample_spectrum(&r.distribution, &channel(), r, &config).unwrap();
        assert!(n as f64 * est.empirical_variance <= bound);
        pts.push(((n as f64).ln(), est.empirical_variance.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((-1.15..=-0.85).contains(&slope), "slope {slope}");
}

#[test]
fn per_symbol_second_moment_below_bound() {
    let r = optimal();
    let out = r.output_law(&channel());
    let bound = second_moment_bound(1.0, 5.0).unwrap();
    for k in 0..10 {
        let x = 5.0 * k as f64 / 9.0;
        let m = second_moment_at(x, &channel(), &out, 100_000, k).unwrap();
        assert!(m >= 0.0 && m <= bound, "x={x}: {m}");
    }
}

#[test]
fn conditional_mean_on_and_off_support() {
    let ch = channel();
    let r = optimal();
    for &x in r.distribution.points() {
        let c = conditional_mean_check(x, r, &ch).unwrap();
        assert!((c.value - r.capacity_bits).abs() <= r.gap() + 1e-6);
    }
    let worst = (0..=1000)
        .map(|k| conditional_mean_check(5.0 * k as f64 / 1000.0, r, &ch).unwrap())
        .inspect(|c| assert!(c.bound_ok))
        .map(|c| c.value)
        .fold(f64::MIN, f64::max);
    assert!(worst <= r.capacity_bits + 1e-4);

    // Average constraint active: the bound tilts with μ(x − p_avg).
    let priced = solve_capacity(&ch, &PowerConstraints::new(5.0, 1.0).unwrap(), 1e-4).unwrap();
    assert!(priced.multiplier > 0.0);
    for k in 0..=100 {
        assert!(conditional_mean_check(0.05 * k as f64, &priced, &ch).unwrap().bound_ok);
    }
    assert!(conditional_mean_check(6.0, r, &ch).is_err());
}

#[test]
fn mixture_channel_reports_no_bounds() {
    let mix = StateDependentChannel::new(vec![
        (0.5, PoissonChannel::new(0.5).unwrap()),
        (0.5, PoissonChannel::new(2.0).unwrap()),
    ])
    .unwrap()
    .average();
    let r = solve_capacity(&mix, &PowerConstraints::new(3.0, 3.0).unwrap(), 1e-4).unwrap();
    let est = sample_spectrum(&r.distribution, &mix, &r, &SpectrumConfig::new(10, 500, 0, 0.2).unwrap()).unwrap();
    assert!(est.chebyshev_bound.is_none() && est.second_moment_bound.is_none());
    assert!(est.empirical_variance >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_is_additive_over_concatenation(
        a in prop::collection::vec((0.0f64..5.0, 0u64..15), 1..8),
        b in prop::collection::vec((0.0f64..5.0, 0u64..15), 1..8),
    ) {
        let ch = channel();
        let out = optimal().output_law(&ch);
        let split = |v: &[(f64, u64)]| (v.iter().map(|p| p.0).collect::<Vec<_>>(), v.iter().map(|p| p.1).collect::<Vec<_>>());
        let (xa, ya) = split(&a);
        let (xb, yb) = split(&b);
        let (xab, yab) = split(&[a.clone(), b.clone()].concat());
        let ra = info_density_rate(&xa, &ya, &ch, &out).unwrap().rate_bits;
        let rb = info_density_rate(&xb, &yb, &ch, &out).unwrap().rate_bits;
        let rab = info_density_rate(&xab, &yab, &ch, &out).unwrap().rate_bits;
        let (na, nb) = (a.len() as f64, b.len() as f64);
        prop_assert!((rab - (na * ra + nb * rb) / (na + nb)).abs() < 1e-9);
    }
}
