//! Independent reference prices and derivative oracles.
//!
//! `heston_cf_price` is a semi-analytic pricer (characteristic-function
//! quadrature, branch-cut-stable formulation) used as truth for the Heston
//! tables. `highres_mc_price` is the brute-force benchmark for everything
//! else. `fd_rho_derivative` recovers the series coefficients a second way,
//! by central differences in `rho` under common random numbers.

use num_complex::Complex64;

use crate::math::gaussian_cdf;
use crate::model::{ModelParams, ModelSpec};
use crate::path::{terminal_log_prices, TimeGrid};
use crate::stats::{mean_and_se, EstimatorResult};
use crate::{Error, Result};

/// Where a reference price came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkSource {
    AnalyticCf,
    HighresMc,
    ClosedFormBs,
}

impl BenchmarkSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkSource::AnalyticCf => "analytic_cf",
            BenchmarkSource::HighresMc => "highres_mc",
            BenchmarkSource::ClosedFormBs => "closed_form_bs",
        }
    }
}

/// A reference price with its uncertainty (zero for analytic sources).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkPrice {
    pub value: f64,
    pub stderr: f64,
    pub source: BenchmarkSource,
}

/// `|estimate - truth| / truth * 100`.
pub fn percentage_error(estimate: f64, truth: &BenchmarkPrice) -> Result<f64> {
    if !(truth.value > 0.0) {
        return Err(Error::NonPositiveBenchmark(truth.value));
    }
    Ok((estimate - truth.value).abs() / truth.value * 100.0)
}

/// `ln(1 + z)` that stays accurate for small `|z|`.
fn ln_1p_complex(z: Complex64) -> Complex64 {
    if z.norm_sqr() < 1e-8 {
        // |z| < 1e-4: four series terms leave an O(|z|^5) remainder
        let z2 = z * z;
        z - z2 / 2.0 + z2 * z / 3.0 - z2 * z2 / 4.0
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}

/// Heston characteristic function of the terminal log-price, in the
/// formulation that keeps the complex logarithm on its principal branch
/// (the `(beta - d)` root with `Re(d) >= 0`).
///
/// `beta - d` is expanded as `-sigma^2 (iu + u^2) / (beta + d)` so nothing
/// cancels catastrophically when the vol-of-vol is tiny; the exponent then
/// divides out `sigma^2` analytically.
fn heston_cf(
    u: Complex64,
    x: f64,
    rate: f64,
    tau: f64,
    v0: f64,
    kappa: f64,
    theta: f64,
    sigma: f64,
    rho: f64,
) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let iu = i * u;
    let iuu = iu + u * u;
    let sigma2 = sigma * sigma;
    let beta = Complex64::new(kappa, 0.0) - rho * sigma * iu;
    let d = (beta * beta + sigma2 * iuu).sqrt();
    let bpd = beta + d;
    let bmd_over_sigma2 = -iuu / bpd; // (beta - d) / sigma^2
    let g = sigma2 * bmd_over_sigma2 / bpd; // (beta - d) / (beta + d)
    let emdt = (-d * tau).exp();
    let log_term = (ln_1p_complex(-g * emdt) - ln_1p_complex(-g)) / sigma2;
    let big_a = kappa * theta * (bmd_over_sigma2 * tau - 2.0 * log_term);
    let big_d = bmd_over_sigma2 * (1.0 - emdt) / (1.0 - g * emdt);
    (iu * (x + rate * tau) + big_a + big_d * v0).exp()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailed(format!(
            "adaptive Simpson hit the depth limit on [{a}, {b}]"
        )));
    }
    let l = adaptive_simpson(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)?;
    let r = adaptive_simpson(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

fn integrate_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, fa, b, fb, fm, whole, tol, 32)
}

/// Integrates a decaying oscillatory integrand over `[0, inf)` panel by
/// panel, stopping once several consecutive panels are negligible.
fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, tol: f64) -> Result<f64> {
    const PANEL_WIDTH: f64 = 8.0;
    const MIN_SWEEP: f64 = 160.0;
    let mut total = 0.0;
    let mut a = 0.0;
    let mut quiet = 0u32;
    while a < 40_000.0 {
        let b = a + PANEL_WIDTH;
        let panel = integrate_panel(f, a, b, tol / 32.0)?;
        total += panel;
        quiet = if panel.abs() < 0.01 * tol { quiet + 1 } else { 0 };
        if quiet >= 3 && b >= MIN_SWEEP {
            return Ok(total);
        }
        a = b;
    }
    Err(Error::QuadratureFailed(
        "characteristic function did not decay within the sweep range".into(),
    ))
}

/// Semi-analytic Heston call price via characteristic-function quadrature
/// (absolute tolerance 1e-8 on the price).
pub fn heston_cf_price(
    params: &ModelParams,
    strike: f64,
    maturity: f64,
    rho: f64,
) -> Result<BenchmarkPrice> {
    let kappa = params.b.ok_or(Error::InvalidParam {
        name: "b",
        reason: "required for the Heston pricer".into(),
    })?;
    let theta = params.a.ok_or(Error::InvalidParam {
        name: "a",
        reason: "required for the Heston pricer".into(),
    })?;
    let sigma = params.c.ok_or(Error::InvalidParam {
        name: "c",
        reason: "required for the Heston pricer".into(),
    })?;
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("|rho| must be < 1, got {rho}")));
    }
    if !(strike > 0.0 && maturity > 0.0 && params.s0 > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidInput(
            "heston_cf_price needs positive strike, maturity, spot and c".into(),
        ));
    }
    let x = params.s0.ln();
    let v0 = params.v0;
    let rate = params.rate;
    let k = strike.ln();
    let tol = 1e-9;

    let cf = |u: Complex64| heston_cf(u, x, rate, maturity, v0, kappa, theta, sigma, rho);
    let i = Complex64::new(0.0, 1.0);
    let cf_minus_i = cf(-i).re; // = forward price e^{x + r tau}

    // Re[e^{-iuk} phi(u) / (iu)] written as Im[e^{-iuk} phi(u)] / u, which
    // stays benign down to u = 0; the left endpoint is nudged off zero.
    let p2_integrand = |u: f64| {
        let u = u.max(1e-7);
        let w = (-i * u * k).exp() * cf(Complex64::new(u, 0.0));
        w.im / u
    };
    let p1_integrand = |u: f64| {
        let u = u.max(1e-7);
        let w = (-i * u * k).exp() * cf(Complex64::new(u, -1.0)) / cf_minus_i;
        w.im / u
    };

    let p1 = 0.5 + integrate_to_infinity(&p1_integrand, tol)? / std::f64::consts::PI;
    let p2 = 0.5 + integrate_to_infinity(&p2_integrand, tol)? / std::f64::consts::PI;
    let value = params.s0 * p1 - strike * (-rate * maturity).exp() * p2;
    if !value.is_finite() {
        return Err(Error::QuadratureFailed("price evaluated to non-finite".into()));
    }
    Ok(BenchmarkPrice {
        value,
        stderr: 0.0,
        source: BenchmarkSource::AnalyticCf,
    })
}

/// Brute-force benchmark: discounted mean call payoff over the full-`rho`
/// dynamics. Defaults in the harness are 1e6 paths over 1e3 steps.
pub fn highres_mc_price(
    model: &ModelSpec,
    rho: f64,
    strike: f64,
    maturity: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    workers: usize,
) -> Result<BenchmarkPrice> {
    Ok(highres_mc_prices(model, rho, &[strike], maturity, n_paths, n_steps, seed, workers)?[0])
}

/// Multi-strike variant sharing one terminal sample; with identical seeds a
/// strike priced here equals the same strike priced alone.
#[allow(clippy::too_many_arguments)]
pub fn highres_mc_prices(
    model: &ModelSpec,
    rho: f64,
    strikes: &[f64],
    maturity: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<BenchmarkPrice>> {
    let grid = TimeGrid::new(0.0, maturity, n_steps)?;
    let term = terminal_log_prices(
        model,
        &grid,
        model.s0.ln(),
        model.v0,
        rho,
        seed,
        n_paths,
        workers,
    )?;
    let disc = (-model.rate * maturity).exp();
    strikes
        .iter()
        .map(|&strike| {
            let payoffs: Vec<f64> = term
                .valid()
                .map(|xi| disc * (xi.exp() - strike).max(0.0))
                .collect();
            let (value, stderr) = mean_and_se(&payoffs);
            Ok(BenchmarkPrice {
                value,
                stderr,
                source: BenchmarkSource::HighresMc,
            })
        })
        .collect()
}

/// Central finite differences of the price in `rho`, under common random
/// numbers (identical seeds at every `rho` node, per-path differencing).
#[allow(clippy::too_many_arguments)]
pub fn fd_rho_derivative(
    order: usize,
    model: &ModelSpec,
    strike: f64,
    maturity: f64,
    h: f64,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    workers: usize,
) -> Result<EstimatorResult> {
    if order != 1 && order != 2 {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "finite differences are provided for orders 1 and 2",
        });
    }
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::InvalidInput(format!("step must be in (0, 0.1], got {h}")));
    }
    let grid = TimeGrid::new(0.0, maturity, n_steps)?;
    let x0 = model.s0.ln();
    let disc = (-model.rate * maturity).exp();
    let priced = |rho: f64| -> Result<Vec<Option<f64>>> {
        let t = terminal_log_prices(model, &grid, x0, model.v0, rho, seed, n_paths, workers)?;
        Ok(t.values
            .iter()
            .map(|v| v.map(|xi| disc * (xi.exp() - strike).max(0.0)))
            .collect())
    };
    let plus = priced(h)?;
    let minus = priced(-h)?;
    let diffs: Vec<f64> = if order == 1 {
        plus.iter()
            .zip(&minus)
            .filter_map(|(p, m)| Some((p.as_ref()? - m.as_ref()?) / (2.0 * h)))
            .collect()
    } else {
        let mid = priced(0.0)?;
        plus.iter()
            .zip(&minus)
            .zip(&mid)
            .filter_map(|((p, m), c)| Some((p.as_ref()? - 2.0 * c.as_ref()? + m.as_ref()?) / (h * h)))
            .collect()
    };
    if diffs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (estimate, std_error) = mean_and_se(&diffs);
    Ok(EstimatorResult {
        estimate,
        std_error,
        n_paths: diffs.len(),
        seed,
    })
}

/// Black-Scholes reference wrapped as a benchmark (for the constant model).
pub fn bs_benchmark(b: &crate::math::BsInputs) -> Result<BenchmarkPrice> {
    Ok(BenchmarkPrice {
        value: crate::math::bs_call_price(b)?,
        stderr: 0.0,
        source: BenchmarkSource::ClosedFormBs,
    })
}

/// Black-Scholes price at a deterministic integrated variance; the
/// degenerate (vanishing vol-of-vol) limit of the Heston pricer.
pub fn bs_at_integrated_variance(
    s0: f64,
    strike: f64,
    rate: f64,
    maturity: f64,
    integrated_variance: f64,
) -> f64 {
    let sd = integrated_variance.sqrt();
    let d2 = ((s0 / strike).ln() + rate * maturity - 0.5 * integrated_variance) / sd;
    let d1 = d2 + sd;
    s0 * gaussian_cdf(d1) - strike * (-rate * maturity).exp() * gaussian_cdf(d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_model;
    use approx::assert_relative_eq;

    fn heston_novikov_params() -> ModelParams {
        ModelParams {
            mu: None,
            a: Some(0.04),
            b: Some(8.0),
            c: Some(0.1),
            rate: 0.0953,
            s0: 100.0,
            v0: 0.0225,
        }
    }

    #[test]
    fn percentage_error_basics() {
        let truth = BenchmarkPrice {
            value: 100.0,
            stderr: 0.0,
            source: BenchmarkSource::HighresMc,
        };
        assert_eq!(percentage_error(103.0, &truth).unwrap(), 3.0);
        assert_eq!(percentage_error(100.0, &truth).unwrap(), 0.0);
        let bad = BenchmarkPrice { value: 0.0, ..truth };
        assert!(percentage_error(1.0, &bad).is_err());
    }

    #[test]
    fn percentage_error_scale_invariance() {
        for lambda in [0.25, 3.0, 1e4] {
            let t1 = BenchmarkPrice {
                value: 8.0,
                stderr: 0.0,
                source: BenchmarkSource::AnalyticCf,
            };
            let t2 = BenchmarkPrice { value: 8.0 * lambda, ..t1 };
            assert_relative_eq!(
                percentage_error(8.4, &t1).unwrap(),
                percentage_error(8.4 * lambda, &t2).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn heston_degenerates_to_deterministic_volatility() {
        // c -> 0 turns the variance into the deterministic mean-reverting path
        let mut params = heston_novikov_params();
        params.c = Some(1e-8);
        let (a, b) = (0.04, 8.0);
        let maturity = 0.5;
        let iv = a * maturity + (params.v0 - a) * (1.0 - (-b * maturity).exp()) / b;
        for strike in [90.0, 100.0, 110.0] {
            let cf = heston_cf_price(&params, strike, maturity, -0.5).unwrap();
            let bs = bs_at_integrated_variance(100.0, strike, 0.0953, maturity, iv);
            assert!(
                (cf.value - bs).abs() < 1e-4,
                "strike {strike}: cf {} vs bs {bs}",
                cf.value
            );
        }
    }

    #[test]
    fn heston_price_is_continuous_in_rho() {
        let params = heston_novikov_params();
        let mut prev: Option<f64> = None;
        let mut rho = -0.9;
        while rho <= 0.9 {
            let p = heston_cf_price(&params, 100.0, 0.5, rho).unwrap().value;
            if let Some(q) = prev {
                assert!(
                    (p - q).abs() / q < 0.01,
                    "jump between rho {} and {}: {} vs {}",
                    rho - 0.01,
                    rho,
                    q,
                    p
                );
            }
            prev = Some(p);
            rho += 0.01;
        }
    }

    #[test]
    fn heston_price_within_static_bounds() {
        let params = heston_novikov_params();
        for maturity in [0.1, 0.5, 1.0] {
            for strike in [80.0, 100.0, 120.0] {
                let p = heston_cf_price(&params, strike, maturity, -0.64).unwrap().value;
                let intrinsic = (100.0 - strike * (-0.0953 * maturity).exp()).max(0.0);
                assert!(p >= intrinsic - 1e-8, "p = {p} below intrinsic {intrinsic}");
                assert!(p <= 100.0);
            }
        }
    }

    #[test]
    fn highres_constant_model_matches_black_scholes() {
        let m = make_model(
            "constant",
            &ModelParams {
                mu: None,
                a: None,
                b: None,
                c: None,
                rate: 0.0953,
                s0: 100.0,
                v0: 0.2,
            },
            0.0,
            0.0,
        )
        .unwrap();
        let bench = highres_mc_price(&m, 0.0, 100.0, 0.5, 20_000, 50, 7, 0).unwrap();
        let bs = crate::math::bs_call_price(&crate::math::BsInputs {
            t: 0.0,
            x: 100.0_f64.ln(),
            sigma: 0.2,
            strike: 100.0,
            rate: 0.0953,
            maturity: 0.5,
        })
        .unwrap();
        assert!(
            (bench.value - bs).abs() <= 3.0 * bench.stderr,
            "{} vs {bs} (se {})",
            bench.value,
            bench.stderr
        );
    }

    #[test]
    fn doubling_paths_shrinks_se_like_clt() {
        let m = make_model(
            "hull_white",
            &ModelParams {
                mu: Some(0.2),
                a: None,
                b: None,
                c: Some(0.1),
                rate: 0.0953,
                s0: 100.0,
                v0: 0.2,
            },
            0.0,
            0.0,
        )
        .unwrap();
        let a = highres_mc_price(&m, -0.25, 100.0, 0.5, 20_000, 50, 3, 0).unwrap();
        let b = highres_mc_price(&m, -0.25, 100.0, 0.5, 40_000, 50, 3, 0).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!(
            (ratio - std::f64::consts::SQRT_2).abs() < 0.2 * std::f64::consts::SQRT_2,
            "ratio {ratio}"
        );
    }

    #[test]
    fn multi_strike_benchmark_matches_single_strike() {
        let m = make_model(
            "hull_white",
            &ModelParams {
                mu: Some(0.2),
                a: None,
                b: None,
                c: Some(0.1),
                rate: 0.0953,
                s0: 100.0,
                v0: 0.2,
            },
            0.0,
            0.0,
        )
        .unwrap();
        let joint = highres_mc_prices(&m, -0.5, &[95.0, 105.0], 0.5, 5000, 40, 11, 0).unwrap();
        let single = highres_mc_price(&m, -0.5, 105.0, 0.5, 5000, 40, 11, 0).unwrap();
        assert_eq!(joint[1], single);
    }

    #[test]
    fn fd_on_constant_model_is_flat() {
        let m = make_model(
            "constant",
            &ModelParams {
                mu: None,
                a: None,
                b: None,
                c: None,
                rate: 0.0953,
                s0: 100.0,
                v0: 0.2,
            },
            0.0,
            0.0,
        )
        .unwrap();
        for order in [1, 2] {
            let h = if order == 1 { 0.05 } else { 0.1 };
            let r = fd_rho_derivative(order, &m, 100.0, 0.5, h, 5, 8000, 50, 0).unwrap();
            assert!(
                r.estimate.abs() <= 3.0 * r.std_error + 1e-12,
                "order {order}: {} vs se {}",
                r.estimate,
                r.std_error
            );
        }
    }

    #[test]
    fn fd_rejects_bad_arguments() {
        let m = make_model("constant", &heston_novikov_params(), 0.0, 0.0).unwrap();
        assert!(fd_rho_derivative(3, &m, 100.0, 0.5, 0.05, 0, 10, 10, 0).is_err());
        assert!(fd_rho_derivative(1, &m, 100.0, 0.5, 0.2, 0, 10, 10, 0).is_err());
        assert!(fd_rho_derivative(1, &m, 100.0, 0.5, 0.0, 0, 10, 10, 0).is_err());
    }
}
