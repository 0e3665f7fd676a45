//! Stochastic volatility models as coefficient bundles.
//!
//! A model is the triple `(mu, eta, f)` driving
//!
//! ```text
//! dv = mu(v) dt + eta(v) dB1
//! dS = r S dt + f(v) S (rho dB1 + sqrt(1 - rho^2) dB2)
//! ```
//!
//! together with the first derivatives the series estimators need. Three
//! builtins are provided (Hull-White, Stein-Stein, Heston) plus a degenerate
//! constant-volatility model used by tests.
//!
//! Two regularizations restore the strict positivity assumptions on `f`:
//! an epsilon floor `f_eps(v) = sqrt(v^(2 alpha) + eps)` applied to the asset
//! volatility, and a gamma floor `eta_gamma(v) = c sqrt(|v| + gamma)` applied
//! to the Heston vol-of-vol so the Euler scheme survives negative excursions
//! of the variance.

use crate::{Error, Result};

/// Default `f` floor for models whose volatility can touch zero.
pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Default CIR simulation floor.
pub const DEFAULT_GAMMA: f64 = 1e-5;

/// Model-specific scalars plus the market data shared by every model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Hull-White volatility drift coefficient.
    pub mu: Option<f64>,
    /// Mean-reversion level (Stein-Stein, Heston).
    pub a: Option<f64>,
    /// Mean-reversion speed (Stein-Stein, Heston).
    pub b: Option<f64>,
    /// Volatility of volatility.
    pub c: Option<f64>,
    /// Risk-free rate.
    pub rate: f64,
    /// Spot price.
    pub s0: f64,
    /// Initial volatility (variance for Heston; the constant sigma for the
    /// constant model).
    pub v0: f64,
}

impl ModelParams {
    fn require(&self, field: Option<f64>, name: &'static str) -> Result<f64> {
        field.ok_or(Error::InvalidParam {
            name,
            reason: "required by this model".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// `mu(v) = mu v`, `eta(v) = c v`, `f(v) = v`
    HullWhite { mu: f64, c: f64 },
    /// `mu(v) = b (a - v)`, `eta(v) = c`, `f(v) = v`
    SteinStein { b: f64, a: f64, c: f64 },
    /// `mu(v) = b (a - v)`, `eta(v) = c sqrt(v)`, `f(v) = sqrt(v)`
    Heston { b: f64, a: f64, c: f64 },
    /// `mu = eta = 0`, `f = sigma` (test plumbing)
    Constant { sigma: f64 },
}

/// All per-point coefficient values one Euler step or functional update needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBundle {
    pub mu: f64,
    pub eta: f64,
    pub f: f64,
    pub mu_prime: f64,
    pub eta_prime: f64,
    pub f_prime: f64,
    /// `f(v) * eta(v)`
    pub f_eta: f64,
    /// `f(v) * f'(v)`
    pub f_f_prime: f64,
}

/// Immutable volatility-model definition; freely shareable across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: Kind,
    /// Human-readable label (`hull_white`, `stein_stein`, `heston`, `constant`).
    pub name: &'static str,
    /// `f` floor; 0 disables the perturbation.
    pub epsilon: f64,
    /// CIR simulation floor; only used by the Heston `eta`.
    pub gamma: f64,
    /// Risk-free rate.
    pub rate: f64,
    /// Spot price.
    pub s0: f64,
    /// Initial volatility state.
    pub v0: f64,
    /// `2ab >= c^2` for Heston, `None` otherwise. Recorded, never enforced.
    pub novikov: Option<bool>,
}

/// Builds one of the builtin models.
///
/// With `epsilon > 0` the asset volatility becomes
/// `f_eps(v) = sqrt(v^2 + eps)` for the `f(v) = v` models and
/// `sqrt(|v| + eps)` for Heston, so `f_eps >= sqrt(eps)` everywhere.
/// With `gamma > 0` the Heston vol-of-vol becomes `c sqrt(|v| + gamma)`.
pub fn make_model(name: &str, params: &ModelParams, epsilon: f64, gamma: f64) -> Result<ModelSpec> {
    if epsilon < 0.0 {
        return Err(Error::InvalidParam {
            name: "epsilon",
            reason: format!("must be >= 0, got {epsilon}"),
        });
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParam {
            name: "gamma",
            reason: format!("must be >= 0, got {gamma}"),
        });
    }
    if !(params.s0 > 0.0) {
        return Err(Error::InvalidParam {
            name: "s0",
            reason: format!("must be positive, got {}", params.s0),
        });
    }
    let check_c = |c: f64| -> Result<f64> {
        if c > 0.0 {
            Ok(c)
        } else {
            Err(Error::InvalidParam {
                name: "c",
                reason: format!("must be positive, got {c}"),
            })
        }
    };
    let (kind, canonical, novikov) = match name {
        "hull_white" => {
            let mu = params.require(params.mu, "mu")?;
            let c = check_c(params.require(params.c, "c")?)?;
            (Kind::HullWhite { mu, c }, "hull_white", None)
        }
        "stein_stein" => {
            let a = params.require(params.a, "a")?;
            let b = params.require(params.b, "b")?;
            let c = check_c(params.require(params.c, "c")?)?;
            (Kind::SteinStein { a, b, c }, "stein_stein", None)
        }
        "heston" => {
            let a = params.require(params.a, "a")?;
            let b = params.require(params.b, "b")?;
            let c = check_c(params.require(params.c, "c")?)?;
            let novikov = 2.0 * a * b >= c * c;
            (Kind::Heston { a, b, c }, "heston", Some(novikov))
        }
        "constant" => (Kind::Constant { sigma: params.v0 }, "constant", None),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(ModelSpec {
        kind,
        name: canonical,
        epsilon,
        gamma,
        rate: params.rate,
        s0: params.s0,
        v0: params.v0,
        novikov,
    })
}

/// Model-appropriate default for the `f` floor. Hull-White keeps a geometric
/// volatility away from zero on its own, the other builtins do not.
pub fn default_epsilon(name: &str) -> f64 {
    match name {
        "stein_stein" | "heston" => DEFAULT_EPSILON,
        _ => 0.0,
    }
}

impl ModelSpec {
    /// Volatility drift.
    pub fn mu(&self, v: f64) -> f64 {
        match self.kind {
            Kind::HullWhite { mu, .. } => mu * v,
            Kind::SteinStein { a, b, .. } | Kind::Heston { a, b, .. } => b * (a - v),
            Kind::Constant { .. } => 0.0,
        }
    }

    pub fn mu_prime(&self, v: f64) -> f64 {
        let _ = v;
        match self.kind {
            Kind::HullWhite { mu, .. } => mu,
            Kind::SteinStein { b, .. } | Kind::Heston { b, .. } => -b,
            Kind::Constant { .. } => 0.0,
        }
    }

    /// Volatility diffusion coefficient, gamma floor included for Heston.
    pub fn eta(&self, v: f64) -> f64 {
        match self.kind {
            Kind::HullWhite { c, .. } => c * v,
            Kind::SteinStein { c, .. } => c,
            Kind::Heston { c, .. } => {
                if self.gamma > 0.0 {
                    c * (v.abs() + self.gamma).sqrt()
                } else {
                    c * v.sqrt()
                }
            }
            Kind::Constant { .. } => 0.0,
        }
    }

    pub fn eta_prime(&self, v: f64) -> f64 {
        match self.kind {
            Kind::HullWhite { c, .. } => c,
            Kind::SteinStein { .. } | Kind::Constant { .. } => 0.0,
            Kind::Heston { c, .. } => {
                if self.gamma > 0.0 {
                    v.signum() * c / (2.0 * (v.abs() + self.gamma).sqrt())
                } else {
                    c / (2.0 * v.sqrt())
                }
            }
        }
    }

    /// Asset volatility, epsilon floor included.
    pub fn f(&self, v: f64) -> f64 {
        match self.kind {
            Kind::HullWhite { .. } | Kind::SteinStein { .. } => {
                if self.epsilon > 0.0 {
                    (v * v + self.epsilon).sqrt()
                } else {
                    v
                }
            }
            Kind::Heston { .. } => {
                if self.epsilon > 0.0 {
                    (v.abs() + self.epsilon).sqrt()
                } else {
                    v.sqrt()
                }
            }
            Kind::Constant { sigma } => sigma,
        }
    }

    pub fn f_prime(&self, v: f64) -> f64 {
        match self.kind {
            Kind::HullWhite { .. } | Kind::SteinStein { .. } => {
                if self.epsilon > 0.0 {
                    v / (v * v + self.epsilon).sqrt()
                } else {
                    1.0
                }
            }
            Kind::Heston { .. } => {
                if self.epsilon > 0.0 {
                    v.signum() / (2.0 * (v.abs() + self.epsilon).sqrt())
                } else {
                    1.0 / (2.0 * v.sqrt())
                }
            }
            Kind::Constant { .. } => 0.0,
        }
    }

    /// Evaluates every coefficient the path engine consumes at a single point.
    pub fn eval_coeffs(&self, v: f64) -> CoeffBundle {
        let f = self.f(v);
        let eta = self.eta(v);
        let f_prime = self.f_prime(v);
        CoeffBundle {
            mu: self.mu(v),
            eta,
            f,
            mu_prime: self.mu_prime(v),
            eta_prime: self.eta_prime(v),
            f_prime,
            f_eta: f * eta,
            f_f_prime: f * f_prime,
        }
    }
}
