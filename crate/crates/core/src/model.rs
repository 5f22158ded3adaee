//! Physical configuration: form factors, the field dispersion relation,
//! mu-dependent norms and parameter validation.

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::integrate_radial;
use std::f64::consts::PI;

/// Field dispersion `omega(k) = sqrt(k^2 + m^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub m: f64,
}

impl Dispersion {
    pub fn massless() -> Self {
        Self { m: 0.0 }
    }

    pub fn omega(&self, rho: f64) -> f64 {
        (rho * rho + self.m * self.m).sqrt()
    }

    pub fn is_massless(&self) -> bool {
        self.m == 0.0
    }
}

/// Rotationally symmetric coupling function, represented radially.
#[derive(Debug, Clone)]
pub enum FormFactor {
    /// `1(|k| <= lambda) / sqrt(omega(k))`; the ultraviolet-cutoff Nelson
    /// coupling. Coincides with `PowerLaw { a: 1/2 }` in the massless case.
    Nelson { lambda: f64 },
    /// `|k|^{-a} 1(|k| <= lambda)` with `a` in `[0, 1/2]`.
    PowerLaw { a: f64, lambda: f64 },
    /// Radial samples interpolated monotonically; zero beyond the last
    /// sample, power-law extension of the first two samples below the first.
    Tabulated { rho: Vec<f64>, v: Vec<f64> },
}

impl FormFactor {
    /// Radial value `V(rho)`. The dispersion is needed because the Nelson
    /// coupling contains `1/sqrt(omega)`.
    pub fn value(&self, rho: f64, dispersion: &Dispersion) -> f64 {
        match self {
            FormFactor::Nelson { lambda } => {
                if rho <= *lambda {
                    1.0 / dispersion.omega(rho).sqrt()
                } else {
                    0.0
                }
            }
            FormFactor::PowerLaw { a, lambda } => {
                if rho <= *lambda {
                    rho.powf(-a)
                } else {
                    0.0
                }
            }
            FormFactor::Tabulated { rho: xs, v } => {
                let last = *xs.last().unwrap();
                if rho > last {
                    0.0
                } else if rho < xs[0] {
                    // local power-law extension fitted to the first two samples
                    if v[0] <= 0.0 || v[1] <= 0.0 {
                        0.0
                    } else {
                        let gamma = (v[1] / v[0]).ln() / (xs[1] / xs[0]).ln();
                        v[0] * (rho / xs[0]).powf(gamma)
                    }
                } else {
                    // tabulated data validated at construction via `validate`
                    MonotoneCubic::new(xs.clone(), v.clone())
                        .and_then(|c| c.eval(rho))
                        .unwrap_or(0.0)
                }
            }
        }
    }

    /// Upper end of the radial support.
    pub fn cutoff(&self) -> f64 {
        match self {
            FormFactor::Nelson { lambda } | FormFactor::PowerLaw { lambda, .. } => *lambda,
            FormFactor::Tabulated { rho, .. } => *rho.last().unwrap(),
        }
    }
}

/// Full physical configuration.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Scale separation parameter, `mu >> 1` in the regime of interest.
    pub mu: f64,
    pub dispersion: Dispersion,
    pub form_factor: FormFactor,
    /// Momentum fraction: initial data live in `|p| <= epsilon * mu`.
    pub epsilon: f64,
    /// Relative tolerance handed to radial quadrature.
    pub quad_tol: f64,
}

impl ModelParams {
    pub fn new(mu: f64, dispersion: Dispersion, form_factor: FormFactor, epsilon: f64) -> Self {
        Self {
            mu,
            dispersion,
            form_factor,
            epsilon,
            quad_tol: 1e-10,
        }
    }

    /// Bookkeeping for the massive regime `m >= 1/mu`.
    pub fn mu_m(&self) -> f64 {
        self.mu * self.dispersion.m
    }

    /// `V(rho)` with this configuration's dispersion.
    pub fn v(&self, rho: f64) -> f64 {
        self.form_factor.value(rho, &self.dispersion)
    }
}

/// Infrared-regularized norm `|| omega_mu^{-s} V ||_{L^2}` with
/// `omega_mu = omega + 1/mu`, computed by radial quadrature as
/// `(4 pi \int rho^2 V(rho)^2 omega_mu(rho)^{-2s} d rho)^{1/2}`.
///
/// `s = 0` is accepted as the plain `L^2` norm.
pub fn mu_norm(v: &FormFactor, s: f64, mu: f64, dispersion: &Dispersion) -> Result<f64> {
    mu_norm_tol(v, s, mu, dispersion, 1e-10)
}

pub fn mu_norm_tol(
    v: &FormFactor,
    s: f64,
    mu: f64,
    dispersion: &Dispersion,
    tol: f64,
) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::domain("mu-norm exponent must be >= 0"));
    }
    if mu <= 0.0 {
        return Err(Error::domain("mu must be positive"));
    }
    let hi = v.cutoff();
    let sq = integrate_radial(
        |rho| {
            let val = v.value(rho, dispersion);
            let reg = dispersion.omega(rho) + 1.0 / mu;
            rho * rho * val * val * reg.powf(-2.0 * s)
        },
        0.0,
        hi,
        tol,
    )
    .map_err(|e| match e {
        Error::Accuracy { best, .. } => Error::Integrability(format!(
            "mu-norm integrand did not converge (best partial value {best}); \
             form factor is likely not admissible"
        )),
        other => other,
    })?;
    Ok((4.0 * PI * sq.value).sqrt())
}

/// `\int |V(k)|^2 / |k| dk = 4 pi \int rho V(rho)^2 d rho`; equals
/// `4 pi Lambda` for the massless Nelson coupling.
pub fn norm_k_inv_sq(v: &FormFactor, dispersion: &Dispersion, tol: f64) -> Result<f64> {
    let hi = v.cutoff();
    let r = integrate_radial(
        |rho| {
            let val = v.value(rho, dispersion);
            rho * val * val
        },
        0.0,
        hi,
        tol,
    )
    .map_err(|e| match e {
        Error::Accuracy { best, .. } => Error::Integrability(format!(
            "|k|^(-1) weighted norm diverges (best partial value {best})"
        )),
        other => other,
    })?;
    Ok(4.0 * PI * r.value)
}

/// Closed form of the squared massless Nelson mu-norm at `s = 1`:
/// `4 pi (ln(mu Lambda + 1) - mu Lambda / (mu Lambda + 1))`.
pub fn nelson_mu_norm_sq_closed_form(mu: f64, lambda: f64) -> f64 {
    let x = mu * lambda;
    4.0 * PI * ((x + 1.0).ln() - x / (x + 1.0))
}

/// Check the admissibility conditions on the configuration, returning a
/// machine-readable list of violations.
pub fn validate(params: &ModelParams) -> Result<()> {
    let mut violations = Vec::new();
    if !(params.mu > 0.0) {
        violations.push("mu must be > 0".to_string());
    }
    if params.epsilon < 0.0 || params.epsilon >= 0.5 {
        violations.push("epsilon must be < 1/2".to_string());
    }
    if params.dispersion.m < 0.0 {
        violations.push("mass must be >= 0".to_string());
    }
    if !(params.quad_tol > 0.0) {
        violations.push("quadrature tolerance must be > 0".to_string());
    }
    match &params.form_factor {
        FormFactor::Nelson { lambda } | FormFactor::PowerLaw { lambda, .. } if *lambda <= 0.0 => {
            violations.push("cutoff lambda must be > 0".to_string());
        }
        FormFactor::PowerLaw { a, .. } if !(0.0..=0.5).contains(a) => {
            violations.push("power-law exponent a must lie in [0, 1/2]".to_string());
        }
        FormFactor::Tabulated { rho, v } => {
            if rho.len() < 2 || rho.len() != v.len() {
                violations.push("tabulated form factor needs >= 2 aligned samples".to_string());
            } else if rho[0] < 0.0 || rho.windows(2).any(|w| w[1] <= w[0]) {
                violations
                    .push("tabulated abscissae must be strictly increasing and >= 0".to_string());
            }
        }
        _ => {}
    }
    if violations.is_empty() {
        // both admissibility norms must be finite (quadrature-checked)
        let mu = if params.mu > 0.0 { params.mu } else { 1.0 };
        if let Err(e) = mu_norm_tol(&params.form_factor, 0.0, mu, &params.dispersion, 1e-8) {
            violations.push(format!("||V||_L2 not finite: {e}"));
        }
        if let Err(e) = norm_k_inv_sq(&params.form_factor, &params.dispersion, 1e-8) {
            violations.push(format!("|| |k|^(-1/2) V ||_L2 not finite: {e}"));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}
