//! Randomized invariants.

use proptest::prelude::*;
use rhoseries::estimators::Localizer;
use rhoseries::math::{bs_call_price, gaussian_cdf, BsInputs};
use rhoseries::oracles::{percentage_error, BenchmarkPrice, BenchmarkSource};

proptest! {
    #[test]
    fn gaussian_cdf_symmetry(tau in -8.0..8.0f64) {
        let s = gaussian_cdf(tau) + gaussian_cdf(-tau);
        prop_assert!((s - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn call_price_within_static_bounds(
        x in 4.0..5.2f64,
        sigma in 0.05..0.8f64,
        strike in 50.0..150.0f64,
        rate in 0.0..0.12f64,
        tau in 0.05..2.0f64,
    ) {
        let b = BsInputs { t: 0.0, x, sigma, strike, rate, maturity: tau };
        let p = bs_call_price(&b).unwrap();
        let intrinsic = (x.exp() - strike * (-rate * tau).exp()).max(0.0);
        prop_assert!(p >= intrinsic - 1e-9);
        prop_assert!(p <= x.exp() + 1e-9);
    }

    #[test]
    fn localizer_smoothing_stays_in_the_band(
        strike in 10.0..200.0f64,
        delta_factor in 1e-4..0.2f64,
        y in 0.0..400.0f64,
    ) {
        let loc = Localizer::new(strike, delta_factor * strike).unwrap();
        let phi = loc.phi(y);
        let payoff = (y - strike).max(0.0);
        if (y - strike).abs() >= loc.delta {
            prop_assert!((phi - payoff).abs() <= 1e-9 * (1.0 + payoff));
        } else {
            // inside the band the smoothing error is bounded by delta
            prop_assert!((phi - payoff).abs() <= loc.delta);
        }
        let slope = loc.phi_prime(y);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&slope));
    }

    #[test]
    fn percentage_error_is_scale_invariant(
        estimate in 0.1..100.0f64,
        truth in 0.1..100.0f64,
        lambda in 0.001..1000.0f64,
    ) {
        let t1 = BenchmarkPrice { value: truth, stderr: 0.0, source: BenchmarkSource::HighresMc };
        let t2 = BenchmarkPrice { value: truth * lambda, ..t1 };
        let a = percentage_error(estimate, &t1).unwrap();
        let b = percentage_error(estimate * lambda, &t2).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}
