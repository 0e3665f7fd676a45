//! Closed-form scalar math: Gaussian cdf and its higher derivatives via
//! Hermite polynomials, the Black-Scholes call price in log-spot coordinates,
//! and the `(d^3/dx^3 - d^2/dx^2)BS` kernel.

use crate::{Error, Result};

/// 1 / sqrt(2 pi)
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779;

/// Standard Gaussian cumulative distribution function.
///
/// Computed through `erfc` so both tails keep full relative accuracy
/// (better than 1e-12 over |tau| <= 8).
pub fn gaussian_cdf(tau: f64) -> f64 {
    0.5 * libm::erfc(-tau / std::f64::consts::SQRT_2)
}

/// Standard Gaussian density, i.e. the first derivative of [`gaussian_cdf`].
pub fn gaussian_pdf(tau: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * tau * tau).exp()
}

/// `n`-th derivative of the Gaussian cdf, `n >= 1`.
///
/// Uses `N^(1+k)(tau) = (-1)^k H_k(tau) N'(tau)` with `H_k` the probabilists'
/// Hermite polynomials, evaluated by the recurrence
/// `H_{k+1}(tau) = tau H_k(tau) - k H_{k-1}(tau)`.
pub fn gaussian_deriv(n: u32, tau: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "derivative order must be >= 1; use gaussian_cdf for n = 0".into(),
        ));
    }
    let k = n - 1;
    let mut h_prev = 1.0; // H_0
    let mut h = tau; // H_1
    if k == 0 {
        return Ok(gaussian_pdf(tau));
    }
    for j in 1..k {
        let h_next = tau * h - j as f64 * h_prev;
        h_prev = h;
        h = h_next;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * h * gaussian_pdf(tau))
}

/// Inputs of the Black-Scholes call formula in log-spot coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    /// Valuation time in years.
    pub t: f64,
    /// Log spot, `x = ln S`.
    pub x: f64,
    /// Volatility, per sqrt-year.
    pub sigma: f64,
    /// Strike price.
    pub strike: f64,
    /// Risk-free rate.
    pub rate: f64,
    /// Maturity in years, `maturity > t`.
    pub maturity: f64,
}

impl BsInputs {
    fn validate(&self) -> Result<()> {
        if !(self.maturity > self.t) {
            return Err(Error::InvalidInput(format!(
                "maturity {} must exceed start time {}",
                self.maturity, self.t
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.strike > 0.0) {
            return Err(Error::InvalidInput(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidInput("rate must be finite".into()));
        }
        Ok(())
    }

    fn tau(&self) -> f64 {
        self.maturity - self.t
    }
}

/// `(d1, d2)` of the Black-Scholes formula:
/// `d2 = (x - ln K + (r - sigma^2/2)(T - t)) / (sigma sqrt(T - t))`,
/// `d1 = d2 + sigma sqrt(T - t)`.
pub fn d_values(b: &BsInputs) -> Result<(f64, f64)> {
    b.validate()?;
    let tau = b.tau();
    let sig_sqrt = b.sigma * tau.sqrt();
    let d2 = (b.x - b.strike.ln() + (b.rate - 0.5 * b.sigma * b.sigma) * tau) / sig_sqrt;
    Ok((d2 + sig_sqrt, d2))
}

/// Black-Scholes call price `e^x N(d1) - K e^{-r(T-t)} N(d2)`.
pub fn bs_call_price(b: &BsInputs) -> Result<f64> {
    let (d1, d2) = d_values(b)?;
    Ok(b.x.exp() * gaussian_cdf(d1) - b.strike * (-b.rate * b.tau()).exp() * gaussian_cdf(d2))
}

/// The kernel `(d^3/dx^3 - d^2/dx^2) BS`, in closed form:
/// `-K e^{-r(T-t)} / (sigma^2 (T-t)) * d2 N'(d2)`.
pub fn bs_h_kernel(b: &BsInputs) -> Result<f64> {
    let (_, d2) = d_values(b)?;
    let tau = b.tau();
    let prefactor = -b.strike * (-b.rate * tau).exp() / (b.sigma * b.sigma * tau);
    Ok(prefactor * d2 * gaussian_pdf(d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson rule, used as an independent quadrature oracle.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n_panels: usize) -> f64 {
        let h = (b - a) / n_panels as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n_panels {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn table1_atm() -> BsInputs {
        BsInputs {
            t: 0.0,
            x: 100.0_f64.ln(),
            sigma: 0.2,
            strike: 100.0,
            rate: 0.0953,
            maturity: 0.5,
        }
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
    }

    #[test]
    fn cdf_symmetry() {
        for tau in [0.3, 1.0, 2.5, 4.0, 8.0] {
            assert!((gaussian_cdf(tau) + gaussian_cdf(-tau) - 1.0).abs() <= 1e-15);
        }
        // fine grid version of the same identity
        let mut tau = -6.0;
        while tau <= 6.0 {
            assert!((gaussian_cdf(tau) + gaussian_cdf(-tau) - 1.0).abs() <= 1e-14);
            tau += 0.17;
        }
    }

    #[test]
    fn cdf_monotone_and_bounded() {
        let mut prev = 0.0;
        let mut tau = -8.0;
        while tau <= 8.0 {
            let n = gaussian_cdf(tau);
            assert!((0.0..=1.0).contains(&n));
            assert!(n >= prev);
            prev = n;
            tau += 0.05;
        }
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        // N(tau) = 1/2 + integral of the density over [0, tau]
        for tau in [0.25, 0.5, 1.0, 1.7, 2.4, 3.1] {
            let oracle = 0.5 + simpson(gaussian_pdf, 0.0, tau, 4000);
            assert_relative_eq!(gaussian_cdf(tau), oracle, max_relative = 1e-12);
        }
        // frozen value for the spec point tau = 1
        assert_relative_eq!(gaussian_cdf(1.0), 0.8413447460685429, max_relative = 1e-14);
    }

    #[test]
    fn deriv_rejects_order_zero() {
        assert!(gaussian_deriv(0, 1.0).is_err());
    }

    #[test]
    fn deriv_low_orders_at_origin() {
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(gaussian_deriv(1, 0.0).unwrap(), inv_sqrt_2pi, epsilon = 1e-16);
        assert_eq!(gaussian_deriv(2, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            gaussian_deriv(3, 0.0).unwrap(),
            -inv_sqrt_2pi,
            epsilon = 1e-16
        );
    }

    #[test]
    fn deriv_ladder_matches_finite_differences() {
        // N^(n+1) equals the central difference of N^(n), n = 1..8
        let h = 1e-5;
        for n in 1..=8u32 {
            for tau_i in -3..=3 {
                let tau = tau_i as f64;
                let fd = (gaussian_deriv(n, tau + h).unwrap()
                    - gaussian_deriv(n, tau - h).unwrap())
                    / (2.0 * h);
                let exact = gaussian_deriv(n + 1, tau).unwrap();
                if exact.abs() > 1e-8 {
                    assert_relative_eq!(fd, exact, max_relative = 1e-6);
                } else {
                    assert!((fd - exact).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn d_values_forced_zero_numerator() {
        // x = ln K - (r - sigma^2/2)(T-t) makes d2 = 0
        let sigma = 0.3;
        let rate = 0.05;
        let b = BsInputs {
            t: 0.2,
            x: 80.0_f64.ln() - (rate - 0.5 * sigma * sigma) * 0.8,
            sigma,
            strike: 80.0,
            rate,
            maturity: 1.0,
        };
        let (d1, d2) = d_values(&b).unwrap();
        assert!(d2.abs() < 1e-14);
        assert_relative_eq!(d1, sigma * 0.8_f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn d_values_rate_cancellation() {
        // r = sigma^2/2 kills the drift term for an at-the-money strike
        let b = BsInputs {
            t: 0.0,
            x: 100.0_f64.ln(),
            sigma: 0.2,
            strike: 100.0,
            rate: 0.02,
            maturity: 1.0,
        };
        let (d1, d2) = d_values(&b).unwrap();
        assert!(d2.abs() < 1e-14);
        assert_relative_eq!(d1, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn d_values_reference_point() {
        let b = table1_atm();
        let (d1, d2) = d_values(&b).unwrap();
        // direct arithmetic: d2 = 0.0753 * 0.5 / (0.2 sqrt(0.5))
        let expected_d2 = (0.0953 - 0.02) * 0.5 / (0.2 * 0.5_f64.sqrt());
        assert_relative_eq!(d2, expected_d2, max_relative = 1e-14);
        assert_relative_eq!(d1, expected_d2 + 0.2 * 0.5_f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn d_values_rejects_bad_inputs() {
        let mut b = table1_atm();
        b.maturity = 0.0;
        assert!(d_values(&b).is_err());
        let mut b = table1_atm();
        b.sigma = 0.0;
        assert!(d_values(&b).is_err());
    }

    #[test]
    fn call_price_d2_zero_case() {
        let sigma = 0.25;
        let rate = 0.03;
        let tau = 0.75;
        let strike = 120.0_f64;
        let b = BsInputs {
            t: 0.0,
            x: strike.ln() - (rate - 0.5 * sigma * sigma) * tau,
            sigma,
            strike,
            rate,
            maturity: tau,
        };
        let expected = b.x.exp() * gaussian_cdf(sigma * tau.sqrt())
            - strike * (-rate * tau).exp() * 0.5;
        assert_relative_eq!(bs_call_price(&b).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn call_price_zero_vol_limit_is_intrinsic() {
        let rate = 0.04;
        let tau = 1.0;
        let strike = 100.0_f64;
        let b = BsInputs {
            t: 0.0,
            x: (2.0 * strike).ln() + rate * tau,
            sigma: 1e-10,
            strike,
            rate,
            maturity: tau,
        };
        let intrinsic = b.x.exp() - strike * (-rate * tau).exp();
        assert!((bs_call_price(&b).unwrap() - intrinsic).abs() < 1e-9);
    }

    #[test]
    fn call_price_matches_lognormal_payoff_quadrature() {
        // independent oracle: discounted integral of (e^y - K)+ against the
        // terminal log-price density y ~ N(x + (r - sigma^2/2) tau, sigma^2 tau)
        let b = table1_atm();
        let tau = b.maturity - b.t;
        let mean = b.x + (b.rate - 0.5 * b.sigma * b.sigma) * tau;
        let sd = b.sigma * tau.sqrt();
        let density =
            |y: f64| (y - mean).powi(2).mul_add(-0.5 / (sd * sd), 0.0).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let payoff = |y: f64| (y.exp() - b.strike).max(0.0) * density(y);
        let oracle =
            (-b.rate * tau).exp() * simpson(payoff, b.strike.ln(), mean + 12.0 * sd, 200_000);
        assert_relative_eq!(bs_call_price(&b).unwrap(), oracle, max_relative = 1e-9);
    }

    #[test]
    fn call_price_bounds_and_monotonicity() {
        for &sigma in &[0.1, 0.2, 0.35, 0.6] {
            for &x in &[4.2, 4.5, 4.7, 5.0] {
                let b = BsInputs {
                    t: 0.0,
                    x,
                    sigma,
                    strike: 100.0,
                    rate: 0.05,
                    maturity: 0.5,
                };
                let p = bs_call_price(&b).unwrap();
                let intrinsic = (x.exp() - 100.0 * (-0.05_f64 * 0.5).exp()).max(0.0);
                assert!(p >= intrinsic - 1e-12);
                assert!(p <= x.exp());
                let p_sig = bs_call_price(&BsInputs {
                    sigma: sigma + 0.01,
                    ..b
                })
                .unwrap();
                assert!(p_sig >= p);
                let p_x = bs_call_price(&BsInputs { x: x + 0.01, ..b }).unwrap();
                assert!(p_x >= p);
            }
        }
    }

    #[test]
    fn h_kernel_vanishes_with_d2() {
        // r = sigma^2/2 and x = ln K make the d2 numerator identically zero
        let sigma = 0.2;
        let rate = 0.5 * sigma * sigma;
        let b = BsInputs {
            t: 0.0,
            x: 90.0_f64.ln(),
            sigma,
            strike: 90.0,
            rate,
            maturity: 0.5,
        };
        assert_eq!(bs_h_kernel(&b).unwrap(), 0.0);
    }

    #[test]
    fn h_kernel_sign() {
        // d2 > 0 makes the kernel negative
        let b = table1_atm();
        let (_, d2) = d_values(&b).unwrap();
        assert!(d2 > 0.0);
        assert!(bs_h_kernel(&b).unwrap() < 0.0);
    }

    #[test]
    fn h_kernel_matches_finite_differences() {
        let price = |x: f64, b: &BsInputs| bs_call_price(&BsInputs { x, ..*b }).unwrap();
        for &sigma in &[0.2, 0.3, 0.4] {
            for &x in &[4.5, 4.6, 4.7] {
                let b = BsInputs {
                    t: 0.0,
                    x,
                    sigma,
                    strike: 100.0,
                    rate: 0.0953,
                    maturity: 0.5,
                };
                let diff = |h: f64| {
                    let d2x =
                        (price(x + h, &b) - 2.0 * price(x, &b) + price(x - h, &b)) / (h * h);
                    let d3x = (price(x + 2.0 * h, &b) - 2.0 * price(x + h, &b)
                        + 2.0 * price(x - h, &b)
                        - price(x - 2.0 * h, &b))
                        / (2.0 * h * h * h);
                    d3x - d2x
                };
                // step small enough for O(h^2) truncation, large enough that
                // the third difference stays above f64 roundoff; one
                // Richardson pass then leaves ~1e-6 relative error
                let fd = (4.0 * diff(5e-4) - diff(1e-3)) / 3.0;
                let exact = bs_h_kernel(&b).unwrap();
                assert_relative_eq!(fd, exact, max_relative = 1e-4);
            }
        }
    }
}
