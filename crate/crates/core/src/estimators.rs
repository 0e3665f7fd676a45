//! Monte Carlo estimators for the correlation power-series coefficients and
//! the assembled series prices.
//!
//! Three coefficient families share one batch of decoupled (`rho = 0`) paths:
//!
//! * `g0` — expectation of Black-Scholes prices at the random effective
//!   volatility `sqrt(<M>/(T-t))`;
//! * ExpA — `g1` from `c/<M>`, the second order from the `ell` functional,
//!   and a general-order form built from the `Xi_k` combinatorial sums;
//! * ExpM — Malliavin weights `Lambda_{1,0}`, `Lambda_{2,0}` multiplying the
//!   discounted payoff at maturity, optionally localized around the strike.
//!
//! Internally everything is kept in the derivative normalization
//! `u_k = d^k/drho^k u |_0`; Taylor coefficients are `g_k = u_k / k!` and the
//! division happens once, in [`series_price`].

use crate::math::{bs_call_price, d_values, gaussian_deriv, BsInputs};
use crate::path::{Batch, PathFunctionals};
use crate::stats::{mean, mean_and_se, EstimatorResult, NeumaierSum};
use crate::{Error, Result};

/// The contract every estimator prices: a European call in log-spot
/// coordinates, decoupled from any particular volatility model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallParams {
    pub strike: f64,
    pub rate: f64,
    pub t: f64,
    pub maturity: f64,
    /// `x = ln S_0`
    pub log_spot: f64,
}

impl CallParams {
    #[inline]
    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        (-self.rate * self.tau()).exp()
    }

    fn bs_inputs(&self, sigma: f64) -> BsInputs {
        BsInputs {
            t: self.t,
            x: self.log_spot,
            sigma,
            strike: self.strike,
            rate: self.rate,
            maturity: self.maturity,
        }
    }
}

#[inline]
fn sigma_hat(p: &PathFunctionals, tau: f64) -> Result<f64> {
    if p.m_total > 0.0 {
        Ok((p.m_total / tau).sqrt())
    } else {
        Err(Error::NonFinite("integrated variance"))
    }
}

fn reduce<F>(batch: &Batch, f: F) -> Result<EstimatorResult>
where
    F: Fn(&PathFunctionals) -> Result<f64>,
{
    if batch.paths.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let values: Vec<f64> = batch
        .paths
        .iter()
        .map(f)
        .collect::<Result<_>>()?;
    let (estimate, std_error) = mean_and_se(&values);
    Ok(EstimatorResult {
        estimate,
        std_error,
        n_paths: values.len(),
        seed: batch.seed,
    })
}

/// Per-path integrand of `g0`: the Black-Scholes price at this path's
/// effective volatility.
pub fn g0_path_value(p: &PathFunctionals, cp: &CallParams) -> Result<f64> {
    let sigma = sigma_hat(p, cp.tau())?;
    bs_call_price(&cp.bs_inputs(sigma))
}

/// Per-path integrand of `g1 = u1`:
/// `K e^{-r tau} N''(d2)(sigma_hat) * c / <M>`
/// (equivalently `-K e^{-r tau} d2 N'(d2) c / <M>`).
pub fn g1_path_value(p: &PathFunctionals, cp: &CallParams) -> Result<f64> {
    let sigma = sigma_hat(p, cp.tau())?;
    let (_, d2) = d_values(&cp.bs_inputs(sigma))?;
    let n2 = gaussian_deriv(2, d2)?;
    Ok(cp.strike * cp.discount() * n2 * (p.c_total / p.m_total))
}

/// Per-path integrand of `u2` in its compact second-order form:
/// `2 K e^{-r tau} <M>^{-3/2} N'''(d2)(sigma_hat) * ell`.
pub fn u2_path_value(p: &PathFunctionals, cp: &CallParams) -> Result<f64> {
    let sigma = sigma_hat(p, cp.tau())?;
    let (_, d2) = d_values(&cp.bs_inputs(sigma))?;
    let n3 = gaussian_deriv(3, d2)?;
    Ok(2.0 * cp.strike * cp.discount() * n3 * p.ell / (p.m_total * p.m_total.sqrt()))
}

/// Sample mean of the order-0 coefficient over a batch.
pub fn estimate_g0(batch: &Batch, cp: &CallParams) -> Result<EstimatorResult> {
    reduce(batch, |p| g0_path_value(p, cp))
}

/// Sample mean of the order-1 coefficient (`g1 = u1`).
pub fn estimate_g1(batch: &Batch, cp: &CallParams) -> Result<EstimatorResult> {
    reduce(batch, |p| g1_path_value(p, cp))
}

/// Sample mean of the order-2 derivative `u2` (ExpA form). The Taylor
/// coefficient is `u2 / 2`.
pub fn estimate_u2_exp_a(batch: &Batch, cp: &CallParams) -> Result<EstimatorResult> {
    reduce(batch, |p| u2_path_value(p, cp))
}

/// Maximum order accepted by [`compute_xi_k`]; the composition sums grow
/// combinatorially beyond that.
pub const MAX_XI_ORDER: usize = 8;

/// Central-binomial coefficients `(2n)! / ((n!)^2 4^n)` for n = 0..=max.
fn central_binomial_weights(max: usize) -> Vec<f64> {
    let mut c = vec![1.0; max + 1];
    for n in 0..max {
        c[n + 1] = c[n] * (2 * n + 1) as f64 / (2 * n + 2) as f64;
    }
    c
}

/// Evaluates `Xi_k(s) = d^k/drho^k [G1 * N''(D)](s; rho) |_{rho=0}` at one
/// grid node, via the closed combinatorial sums
/// `Xi_k = k! sum_j G_{1,k-j} G_{2,j}`.
pub fn compute_xi_k(
    k: usize,
    p: &PathFunctionals,
    s_index: usize,
    cp: &CallParams,
) -> Result<f64> {
    if k > MAX_XI_ORDER {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "composition sums are only evaluated up to order 8",
        });
    }
    if s_index >= p.m_running.len() {
        return Err(Error::InvalidInput(format!(
            "grid node {s_index} out of range (grid has {} nodes)",
            p.m_running.len()
        )));
    }
    let tau = cp.tau();
    let sigma = sigma_hat(p, tau)?;
    let (_, d2) = d_values(&cp.bs_inputs(sigma))?;
    let ratio = p.m_running[s_index] / p.m_total;
    let i_scaled = p.i_running[s_index] / p.m_total.sqrt();

    // D_h(s): even h = 2n carries d2, odd h = 2n+1 carries the running
    // Brownian integral
    let weights = central_binomial_weights(k / 2 + 1);
    let d_coef = |h: usize| -> f64 {
        let n = h / 2;
        let base = weights[n] * ratio.powi(n as i32);
        if h % 2 == 0 {
            base * d2
        } else {
            base * i_scaled
        }
    };

    // e[nu][j] = sum over compositions of j into nu positive parts of
    // prod D_{h_i}; built by convolution
    let mut e = vec![vec![0.0; k + 1]; k + 1];
    for j in 1..=k {
        e[1][j] = d_coef(j);
    }
    for nu in 2..=k {
        for j in nu..=k {
            let mut acc = 0.0;
            for i in 1..=(j - nu + 1) {
                acc += d_coef(i) * e[nu - 1][j - i];
            }
            e[nu][j] = acc;
        }
    }

    // G_{2,l}
    let mut g2 = vec![0.0; k + 1];
    g2[0] = gaussian_deriv(2, d2)?;
    let mut factorial = 1.0;
    for l in 1..=k {
        let mut acc = 0.0;
        let mut nu_fact = 1.0;
        for nu in 1..=l {
            nu_fact *= nu as f64;
            acc += gaussian_deriv(2 + nu as u32, d2)? / nu_fact * e[nu][l];
        }
        g2[l] = acc;
        factorial *= l as f64;
    }

    // G_{1,l} is ratio^(l/2) for even l, zero otherwise
    let mut total = 0.0;
    for j in 0..=k {
        let l = k - j;
        if l % 2 == 0 {
            total += ratio.powi((l / 2) as i32) * g2[j];
        }
    }
    Ok(factorial * total)
}

/// Per-path integrand of the general-order derivative
/// `u_n = n K e^{-r tau} <M>^{-1} integral of Xi_{n-1}(s) psi_s ds`.
pub fn un_path_value(n: usize, p: &PathFunctionals, cp: &CallParams, dt: f64) -> Result<f64> {
    if n == 0 || n > MAX_XI_ORDER + 1 {
        return Err(Error::UnsupportedOrder {
            order: n,
            reason: "general-order estimator supports 1 <= n <= 9",
        });
    }
    let n_steps = p.psi.len() - 1;
    let mut acc = NeumaierSum::default();
    for k in 0..n_steps {
        let xi = compute_xi_k(n - 1, p, k, cp)?;
        acc.add(xi * p.psi[k] * dt);
    }
    Ok(n as f64 * cp.strike * cp.discount() * acc.total() / p.m_total)
}

/// Sample mean of `u_n` from the general combinatorial representation.
/// For n = 1, 2 this reproduces [`estimate_g1`] and [`estimate_u2_exp_a`]
/// pathwise (up to floating-point association).
pub fn estimate_un_general(n: usize, batch: &Batch, cp: &CallParams) -> Result<EstimatorResult> {
    let dt = batch.grid.dt();
    reduce(batch, |p| un_path_value(n, p, cp, dt))
}

/// Closed-form first-order approximation: `<M>` is replaced by its sample
/// mean (and `c` by its own) before the Black-Scholes functionals apply.
/// Returns `(g0_bar, g1_bar)`.
pub fn estimate_as_closed_form(batch: &Batch, cp: &CallParams) -> Result<(f64, f64)> {
    if batch.paths.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m_vals: Vec<f64> = batch.paths.iter().map(|p| p.m_total).collect();
    let c_vals: Vec<f64> = batch.paths.iter().map(|p| p.c_total).collect();
    let m_bar = mean(&m_vals);
    let c_bar = mean(&c_vals);
    if !(m_bar > 0.0) {
        return Err(Error::NonFinite("mean integrated variance"));
    }
    let sigma_bar = (m_bar / cp.tau()).sqrt();
    let b = cp.bs_inputs(sigma_bar);
    let g0_bar = bs_call_price(&b)?;
    let (_, d2) = d_values(&b)?;
    let g1_bar = cp.strike * cp.discount() * gaussian_deriv(2, d2)? * (c_bar / m_bar);
    Ok((g0_bar, g1_bar))
}

/// The order-1 and order-2 Malliavin weights at `rho = 0`:
/// `Lambda_1 = U Z / tau` and
/// `Lambda_2 = U^2/tau^2 (Z^2 - int f^-2) - V Z / tau + 1`.
pub fn malliavin_weights(p: &PathFunctionals, tau: f64) -> Result<(f64, f64)> {
    let lam1 = p.u_int * p.zint / tau;
    let lam2 = (p.u_int * p.u_int) / (tau * tau) * (p.zint * p.zint - p.inv_f2)
        - p.v_int * p.zint / tau
        + 1.0;
    if lam1.is_finite() && lam2.is_finite() {
        Ok((lam1, lam2))
    } else {
        Err(Error::NonFinite("malliavin weight"))
    }
}

/// Piecewise-polynomial localizer around the strike.
///
/// `phi_double_prime` is the bump `B_delta` supported on
/// `[strike - delta, strike + delta]`; integrating twice gives a `C^2`
/// function with `phi(y) = 0` below the band and `phi(y) = y - strike`
/// above it, so `(call payoff - phi)` vanishes outside the band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localizer {
    pub strike: f64,
    pub delta: f64,
}

impl Localizer {
    pub fn new(strike: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !(strike > 0.0) {
            return Err(Error::InvalidInput(format!(
                "localizer needs strike > 0 and delta > 0, got ({strike}, {delta})"
            )));
        }
        Ok(Self { strike, delta })
    }

    /// `B_delta(y) = 3/(4 delta) - 3 (y - K)^2 / (4 delta^3)` on the band.
    pub fn phi_double_prime(&self, y: f64) -> f64 {
        let w = y - self.strike;
        if w.abs() >= self.delta {
            0.0
        } else {
            0.75 / self.delta - 0.75 * w * w / (self.delta * self.delta * self.delta)
        }
    }

    /// First antiderivative of the bump; rises from 0 to 1 across the band.
    pub fn phi_prime(&self, y: f64) -> f64 {
        let w = y - self.strike;
        let d = self.delta;
        if w <= -d {
            0.0
        } else if w >= d {
            1.0
        } else {
            0.75 * (w + d) / d - 0.25 * (w * w * w + d * d * d) / (d * d * d)
        }
    }

    /// Second antiderivative: the smoothed call payoff.
    pub fn phi(&self, y: f64) -> f64 {
        let w = y - self.strike;
        let d = self.delta;
        if w <= -d {
            0.0
        } else if w >= d {
            w
        } else {
            let wd = w + d;
            0.375 * wd * wd / d - (w * w * w * w - d * d * d * d) / (16.0 * d * d * d)
                - 0.25 * wd
        }
    }
}

/// ExpM estimator for the order-1 or order-2 derivative of the price with
/// respect to `rho`, from a batch simulated at `rho = 0`.
///
/// With a localizer, the payoff splits into a smooth part differentiated
/// directly through `d/drho xi_T|_0 = U`, `d^2/drho^2 xi_T|_0 = -V`, and a
/// band-limited remainder handled by the weight.
pub fn estimate_exp_m<F>(
    order: usize,
    batch: &Batch,
    payoff: F,
    loc: Option<&Localizer>,
    rate: f64,
    t: f64,
    maturity: f64,
) -> Result<EstimatorResult>
where
    F: Fn(f64) -> f64,
{
    if order != 1 && order != 2 {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "Malliavin weights are implemented for orders 1 and 2",
        });
    }
    if batch.rho != 0.0 {
        return Err(Error::InvalidInput(format!(
            "ExpM estimators need a batch simulated at rho = 0, got rho = {}",
            batch.rho
        )));
    }
    let tau = maturity - t;
    let disc = (-rate * tau).exp();
    reduce(batch, |p| {
        let s_t = p.xi_hat_t.exp();
        let h = payoff(s_t);
        if !h.is_finite() {
            return Err(Error::NonFinite("payoff"));
        }
        let (lam1, lam2) = malliavin_weights(p, tau)?;
        let value = match (loc, order) {
            (None, 1) => h * lam1,
            (None, _) => h * lam2,
            (Some(l), 1) => (h - l.phi(s_t)) * lam1 + l.phi_prime(s_t) * s_t * p.u_int,
            (Some(l), _) => {
                let su = s_t * p.u_int;
                (h - l.phi(s_t)) * lam2
                    + l.phi_double_prime(s_t) * su * su
                    + l.phi_prime(s_t) * s_t * (p.u_int * p.u_int - p.v_int)
            }
        };
        Ok(disc * value)
    })
}

/// Which coefficient family a series price is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `g0 + g1 rho + (u2/2) rho^2`
    ExpA,
    /// `g0 + lam1 rho + (lam2/2) rho^2`
    ExpM,
    /// Closed-form `g0_bar + g1_bar rho` (first order only)
    AsClosed,
}

/// All coefficient estimates produced from one shared batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    pub g0: EstimatorResult,
    pub g1: EstimatorResult,
    /// ExpA order-2 derivative (`g2 = u2 / 2`).
    pub u2: EstimatorResult,
    /// ExpM order-1 derivative.
    pub lam1: EstimatorResult,
    /// ExpM order-2 derivative (`g2 = lam2 / 2`).
    pub lam2: EstimatorResult,
    pub g0_bar: f64,
    pub g1_bar: f64,
}

/// Runs every estimator on the same batch (common random numbers across
/// methods). The ExpM pair prices the call at `cp.strike`, localized when
/// `loc` is given.
pub fn estimate_all(
    batch: &Batch,
    cp: &CallParams,
    loc: Option<&Localizer>,
) -> Result<ExpansionCoefficients> {
    let strike = cp.strike;
    let call = move |s: f64| (s - strike).max(0.0);
    Ok(ExpansionCoefficients {
        g0: estimate_g0(batch, cp)?,
        g1: estimate_g1(batch, cp)?,
        u2: estimate_u2_exp_a(batch, cp)?,
        lam1: estimate_exp_m(1, batch, call, loc, cp.rate, cp.t, cp.maturity)?,
        lam2: estimate_exp_m(2, batch, call, loc, cp.rate, cp.t, cp.maturity)?,
        g0_bar: estimate_as_closed_form(batch, cp)?.0,
        g1_bar: estimate_as_closed_form(batch, cp)?.1,
    })
}

/// A truncated series price with its (upper-bound) standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPrice {
    pub price: f64,
    /// Quadrature combination of the per-coefficient standard errors. The
    /// coefficients share paths, so this is an upper bound.
    pub std_error: f64,
    /// True when the combined error mixes correlated coefficients.
    pub se_correlated: bool,
    /// Set when |rho| > 0.8 and the series may sit outside its radius.
    pub radius_warning: bool,
}

/// Assembles `sum_{k <= order} g_k rho^k` for one method.
pub fn series_price(
    coeffs: &ExpansionCoefficients,
    rho: f64,
    order: usize,
    method: Method,
) -> Result<SeriesPrice> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("|rho| must be < 1, got {rho}")));
    }
    let max_order = match method {
        Method::AsClosed => 1,
        _ => 2,
    };
    if order > max_order {
        return Err(Error::UnsupportedOrder {
            order,
            reason: "order exceeds the coefficients available for this method",
        });
    }
    let radius_warning = rho.abs() > 0.8;
    let (price, variance) = match method {
        Method::AsClosed => {
            let mut price = coeffs.g0_bar;
            if order >= 1 {
                price += rho * coeffs.g1_bar;
            }
            (price, 0.0)
        }
        Method::ExpA | Method::ExpM => {
            let (o1, o2) = match method {
                Method::ExpA => (&coeffs.g1, &coeffs.u2),
                _ => (&coeffs.lam1, &coeffs.lam2),
            };
            let mut price = coeffs.g0.estimate;
            let mut var = coeffs.g0.std_error * coeffs.g0.std_error;
            if order >= 1 {
                price += rho * o1.estimate;
                let s = rho * o1.std_error;
                var += s * s;
            }
            if order >= 2 {
                price += rho * rho * o2.estimate / 2.0;
                let s = rho * rho * o2.std_error / 2.0;
                var += s * s;
            }
            (price, var)
        }
    };
    Ok(SeriesPrice {
        price,
        std_error: variance.sqrt(),
        se_correlated: order >= 1 && method != Method::AsClosed,
        radius_warning,
    })
}
