//! Euler-scheme simulation of the volatility, its first variation and the
//! log-price, plus the per-path functionals every series estimator consumes.
//!
//! All stochastic integrals are left-point Riemann sums on the same uniform
//! grid and the same increments as the Euler state, so pathwise identities
//! (`c = integral of psi`, `xi(rho = 0) = xi_hat`) hold exactly on the grid.
//! The first variation `Y` is stepped in log form, which keeps it positive by
//! construction; the `psi` suffix integral is rebuilt backwards from the
//! per-step ratios `Y_{k+1}/Y_k` so no bare `Y` value is ever materialized.

use rayon::prelude::*;

use crate::model::ModelSpec;
use crate::rng::{GaussianSource, RngStream, StreamSource};
use crate::stats::NeumaierSum;
use crate::{Error, Result};

/// Uniform time grid over `[t, maturity]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t: f64,
    pub maturity: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t: f64, maturity: f64, n_steps: usize) -> Result<Self> {
        if !(maturity > t) {
            return Err(Error::InvalidInput(format!(
                "maturity {maturity} must exceed start time {t}"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Self { t, maturity, n_steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.maturity - self.t) / self.n_steps as f64
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.maturity - self.t
    }
}

/// Everything one simulated path contributes to the estimators.
///
/// Grids have `n_steps + 1` nodes; running integrals start at 0 and `psi`
/// is 0 at the final node (empty suffix).
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    /// Integrated variance `<M> = integral of f(v)^2` over the horizon.
    pub m_total: f64,
    /// `c = integral of psi` (same accumulator as the `psi` quadrature).
    pub c_total: f64,
    /// `ell = integral of psi_s I_s` with `I_s` the running `f dB1` integral.
    pub ell: f64,
    /// `U = integral of f dB1`.
    pub u_int: f64,
    /// `V = integral of f dB2`.
    pub v_int: f64,
    /// `Z = integral of (1/f) dB2`.
    pub zint: f64,
    /// `integral of f^-2 ds`.
    pub inv_f2: f64,
    /// Terminal log-price of the decoupled (`rho = 0`) dynamics.
    pub xi_hat_t: f64,
    /// Terminal log-price at the requested correlation.
    pub xi_t_rho: f64,
    /// `psi_s` per grid node.
    pub psi: Vec<f64>,
    /// Running `integral of f dB1` per grid node.
    pub i_running: Vec<f64>,
    /// Running integrated variance per grid node.
    pub m_running: Vec<f64>,
}

impl PathFunctionals {
    fn scalars_finite(&self) -> bool {
        [
            self.m_total,
            self.c_total,
            self.ell,
            self.u_int,
            self.v_int,
            self.zint,
            self.inv_f2,
            self.xi_hat_t,
            self.xi_t_rho,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Left-point quadrature `sum(values[k] * dt)` with compensated accumulation.
pub fn left_point_integral(values: &[f64], dt: f64) -> f64 {
    let mut acc = NeumaierSum::default();
    for &v in values {
        acc.add(v * dt);
    }
    acc.total()
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("|rho| must be < 1, got {rho}")))
    }
}

/// Simulates one path with an explicit increment source.
pub fn simulate_path_with<S: GaussianSource>(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    src: &mut S,
) -> Result<PathFunctionals> {
    check_rho(rho)?;
    let n = grid.n_steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let rho_c = (1.0 - rho * rho).sqrt();

    let mut m_running = Vec::with_capacity(n + 1);
    let mut i_running = Vec::with_capacity(n + 1);
    m_running.push(0.0);
    i_running.push(0.0);
    let mut ffp = vec![0.0; n];
    let mut feta = vec![0.0; n];
    let mut dln_y = vec![0.0; n];

    let mut v = v0;
    let mut ln_y = 0.0_f64;
    let mut xi_hat = x0;
    let mut xi_rho = x0;
    let mut v_int = 0.0;
    let mut zint = 0.0;
    let mut inv_f2 = 0.0;

    for k in 0..n {
        let cb = model.eval_coeffs(v);
        let (z1, z2) = src.next_pair();
        let db1 = sqrt_dt * z1;
        let db2 = sqrt_dt * z2;
        let f2 = cb.f * cb.f;

        m_running.push(m_running[k] + f2 * dt);
        i_running.push(i_running[k] + cb.f * db1);
        v_int += cb.f * db2;
        zint += db2 / cb.f;
        inv_f2 += dt / f2;
        let drift = (model.rate - 0.5 * f2) * dt;
        xi_hat += drift + cb.f * db2;
        xi_rho += drift + cb.f * (rho * db1 + rho_c * db2);

        ffp[k] = cb.f_f_prime;
        feta[k] = cb.f_eta;
        dln_y[k] = (cb.mu_prime - 0.5 * cb.eta_prime * cb.eta_prime) * dt + cb.eta_prime * db1;

        v += cb.mu * dt + cb.eta * db1;
        ln_y += dln_y[k];
        if !(v.is_finite() && ln_y.is_finite()) {
            return Err(Error::NonFinite("euler state"));
        }
    }

    let mut psi = vec![0.0; n + 1];
    let mut suffix = 0.0_f64; // integral_{t_k}^{T} (f f')(v_r) Y_r dr / Y_k
    for k in (0..n).rev() {
        suffix = ffp[k] * dt + dln_y[k].exp() * suffix;
        psi[k] = feta[k] * suffix;
    }

    let c_total = left_point_integral(&psi[..n], dt);
    let mut ell_acc = NeumaierSum::default();
    for k in 0..n {
        ell_acc.add(psi[k] * i_running[k] * dt);
    }

    let out = PathFunctionals {
        m_total: m_running[n],
        c_total,
        ell: ell_acc.total(),
        u_int: i_running[n],
        v_int,
        zint,
        inv_f2,
        xi_hat_t: xi_hat,
        xi_t_rho: xi_rho,
        psi,
        i_running,
        m_running,
    };
    if !out.scalars_finite() {
        return Err(Error::NonFinite("path functionals"));
    }
    if !(out.m_total > 0.0) {
        return Err(Error::NonFinite("integrated variance"));
    }
    Ok(out)
}

/// Simulates one path from its seeded stream.
pub fn simulate_path(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    stream: RngStream,
) -> Result<PathFunctionals> {
    simulate_path_with(model, grid, x0, v0, rho, &mut StreamSource::new(stream))
}

/// Terminal log-price only; used by the high-resolution benchmark and the
/// finite-difference oracles where the functional grids are dead weight.
/// Consumes increments exactly like [`simulate_path`], so a given
/// `(seed, stream_id)` sees the same Brownian path in both.
pub fn terminal_log_price_with<S: GaussianSource>(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    src: &mut S,
) -> Result<f64> {
    check_rho(rho)?;
    let n = grid.n_steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut v = v0;
    let mut xi = x0;
    for _ in 0..n {
        let f = model.f(v);
        let (z1, z2) = src.next_pair();
        let db1 = sqrt_dt * z1;
        let db2 = sqrt_dt * z2;
        xi += (model.rate - 0.5 * f * f) * dt + f * (rho * db1 + rho_c * db2);
        v += model.mu(v) * dt + model.eta(v) * db1;
    }
    if xi.is_finite() {
        Ok(xi)
    } else {
        Err(Error::NonFinite("terminal log price"))
    }
}

/// A collected batch of valid paths, in stream order.
#[derive(Debug, Clone)]
pub struct Batch {
    pub paths: Vec<PathFunctionals>,
    pub n_requested: usize,
    pub invalid: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    pub rho: f64,
    pub x0: f64,
    pub v0: f64,
}

fn check_invalid_fraction(invalid: usize, total: usize) -> Result<()> {
    if invalid as f64 > 0.01 * total as f64 {
        Err(Error::TooManyInvalidPaths { invalid, total })
    } else {
        Ok(())
    }
}

fn run_with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
            .install(job)
    }
}

/// Simulates `n_paths` paths; path `i` always uses `RngStream(seed, i)`, so
/// the output is identical for any worker count.
///
/// Invalid paths (non-finite state) are counted and skipped; more than 1%
/// of them fails the whole batch.
pub fn simulate_batch(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    seed: u64,
    n_paths: usize,
    workers: usize,
) -> Result<Batch> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    let results: Vec<Result<PathFunctionals>> = run_with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|i| simulate_path(model, grid, x0, v0, rho, RngStream::new(seed, i as u64)))
            .collect()
    });
    let invalid = results.iter().filter(|r| r.is_err()).count();
    check_invalid_fraction(invalid, n_paths)?;
    let paths = results.into_iter().filter_map(|r| r.ok()).collect();
    Ok(Batch {
        paths,
        n_requested: n_paths,
        invalid,
        seed,
        grid: *grid,
        rho,
        x0,
        v0,
    })
}

/// Per-path mapped values, aligned with the stream index (`None` = invalid
/// path). Keeps common-random-number pairings intact across batches.
#[derive(Debug, Clone)]
pub struct MappedPaths<T> {
    pub values: Vec<Option<T>>,
    pub invalid: usize,
    pub seed: u64,
}

impl<T: Copy> MappedPaths<T> {
    pub fn valid(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().filter_map(|v| *v)
    }
}

/// Streaming variant of [`simulate_batch`]: maps each path to a small value
/// and drops the functionals, so arbitrarily large path counts stay cheap.
pub fn map_paths<T, F>(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    seed: u64,
    n_paths: usize,
    workers: usize,
    f: F,
) -> Result<MappedPaths<T>>
where
    T: Send,
    F: Fn(&PathFunctionals) -> T + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    let values: Vec<Option<T>> = run_with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                simulate_path(model, grid, x0, v0, rho, RngStream::new(seed, i as u64))
                    .ok()
                    .map(|p| f(&p))
            })
            .collect()
    });
    let invalid = values.iter().filter(|v| v.is_none()).count();
    check_invalid_fraction(invalid, n_paths)?;
    Ok(MappedPaths { values, invalid, seed })
}

/// Terminal log-prices for `n_paths` seeded streams (lean simulation).
pub fn terminal_log_prices(
    model: &ModelSpec,
    grid: &TimeGrid,
    x0: f64,
    v0: f64,
    rho: f64,
    seed: u64,
    n_paths: usize,
    workers: usize,
) -> Result<MappedPaths<f64>> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    let values: Vec<Option<f64>> = run_with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut src = StreamSource::new(RngStream::new(seed, i as u64));
                terminal_log_price_with(model, grid, x0, v0, rho, &mut src).ok()
            })
            .collect()
    });
    let invalid = values.iter().filter(|v| v.is_none()).count();
    check_invalid_fraction(invalid, n_paths)?;
    Ok(MappedPaths { values, invalid, seed })
}
