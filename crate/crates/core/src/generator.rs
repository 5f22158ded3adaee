//! First-order effective generator: the auxiliary function `F(p, x)`, the
//! self-consistent fixed point `g(p)`, the explicit approximant `g_eff`,
//! polynomial coefficients `alpha_j(mu)` and truncation remainders.

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::model::{norm_k_inv_sq, ModelParams};
use crate::quadrature::{angular_log_kernel, integrate_radial};
use std::cell::Cell;
use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

/// Common interface of all effective generators: the dispersion correction
/// `g(p)` and the generator `h(p) = p^2 - g(p)` acting as a Fourier
/// multiplier.
pub trait EffectiveGenerator {
    fn g(&self, p_abs: f64) -> Result<f64>;

    fn h(&self, p_abs: f64) -> Result<f64> {
        Ok(p_abs * p_abs - self.g(p_abs)?)
    }
}

/// `F(p, x) = mu \int |V(k)|^2 (mu omega(k) - 2 p.k + k^2 + x)^{-1} dk`,
/// reduced over angles to `mu \int rho^2 V^2 K(A, B) d rho` with
/// `A = mu omega(rho) + rho^2 + x`, `B = 2 |p| rho` and `K` the exact
/// angular kernel.
pub fn eval_f(p_abs: f64, x: f64, params: &ModelParams) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::domain("eval_f requires x > 0"));
    }
    if p_abs < 0.0 {
        return Err(Error::domain("eval_f requires p_abs >= 0"));
    }
    let mu = params.mu;
    let hi = params.form_factor.cutoff();
    let kernel_err: Cell<Option<Error>> = Cell::new(None);
    let r = integrate_radial(
        |rho| {
            let v = params.v(rho);
            if v == 0.0 {
                return 0.0;
            }
            let a = mu * params.dispersion.omega(rho) + rho * rho + x;
            let b = 2.0 * p_abs * rho;
            match angular_log_kernel(a, b) {
                Ok(k) => rho * rho * v * v * k,
                Err(e) => {
                    kernel_err.set(Some(e));
                    f64::NAN
                }
            }
        },
        0.0,
        hi,
        params.quad_tol,
    );
    if let Some(e) = kernel_err.take() {
        return Err(e);
    }
    Ok(mu * r?.value)
}

/// `dF/dx = -mu \int rho^2 V^2 * 4 pi / (A^2 - B^2) d rho`, used by the
/// Newton polish in `solve_g`. Always negative.
fn eval_f_dx(p_abs: f64, x: f64, params: &ModelParams) -> Result<f64> {
    let mu = params.mu;
    let hi = params.form_factor.cutoff();
    let r = integrate_radial(
        |rho| {
            let v = params.v(rho);
            if v == 0.0 {
                return 0.0;
            }
            let a = mu * params.dispersion.omega(rho) + rho * rho + x;
            let b = 2.0 * p_abs * rho;
            rho * rho * v * v * 4.0 * PI / (a * a - b * b)
        },
        0.0,
        hi,
        params.quad_tol,
    )?;
    Ok(-mu * r.value)
}

/// Unique solution of `g = F(p, g)`; zero by definition for `p >= mu/2`.
pub fn solve_g(p_abs: f64, params: &ModelParams, tol: f64) -> Result<f64> {
    if p_abs >= params.mu / 2.0 {
        return Ok(0.0);
    }
    // F is strictly decreasing in x, so x = F(p, x_lo) brackets the fixed
    // point from above for any x_lo below it; the a-priori bracket can be
    // undershot near p = mu/2 where F(p, 0+) blows up.
    let upper = upper_bracket(params)?.max(eval_f(p_abs, 1e-12, params)?);
    solve_fixed_point(|x| eval_f(p_abs, x, params), Some(|x| eval_f_dx(p_abs, x, params)), upper, tol)
}

/// `(1 - 2 eps)^{-1} \int |V|^2/|k| dk + 1`, a strict upper bound for the
/// fixed point (a-priori bracket).
pub(crate) fn upper_bracket(params: &ModelParams) -> Result<f64> {
    let i = norm_k_inv_sq(&params.form_factor, &params.dispersion, params.quad_tol)?;
    Ok(i / (1.0 - 2.0 * params.epsilon) + 1.0)
}

/// Solve `x = f(x)` for strictly decreasing `f` on `(0, upper]` by
/// bracketing bisection plus an optional safeguarded Newton polish.
/// The residual `|x - f(x)|` is driven below `tol`.
pub(crate) fn solve_fixed_point<F, D>(
    mut f: F,
    deriv: Option<D>,
    upper: f64,
    tol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    // phi(x) = x - f(x) is strictly increasing; a root is bracketed by
    // phi(lo) < 0 < phi(hi)
    let mut lo = (tol * 1e-3).min(1e-12);
    let mut hi = upper;
    let phi_lo = lo - f(lo)?;
    let phi_hi = hi - f(hi)?;
    if phi_lo >= 0.0 || phi_hi <= 0.0 {
        return Err(Error::Accuracy {
            message: format!(
                "fixed-point bracket failure: phi({lo}) = {phi_lo}, phi({hi}) = {phi_hi}"
            ),
            best: if phi_lo.abs() < phi_hi.abs() { lo } else { hi },
        });
    }
    let mut x = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let fx = f(x)?;
        residual = x - fx;
        if residual.abs() <= tol {
            return Ok(x);
        }
        if residual > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton step when a derivative is available, clipped into the bracket
        let mut next = 0.5 * (lo + hi);
        if let Some(d) = &deriv {
            let slope = 1.0 - d(x)?;
            if slope > 0.0 {
                let cand = x - residual / slope;
                if cand > lo && cand < hi {
                    next = cand;
                }
            }
        }
        if (hi - lo) <= f64::EPSILON * hi.abs() {
            break;
        }
        x = next;
    }
    if residual.abs() <= tol {
        Ok(x)
    } else {
        Err(Error::Accuracy {
            message: format!("fixed-point iteration stalled with residual {residual}"),
            best: x,
        })
    }
}

/// A-priori massless bracket for `g(p)` at `|p| <= eps mu`:
/// `[(1 - slack)/(1 + 2 eps) I, I/(1 - 2 eps)]` with
/// `I = \int |V|^2/|k| dk`. `slack` (default 0.02) absorbs the
/// correction that vanishes at large mu.
pub fn g_bounds(params: &ModelParams, slack: f64) -> Result<(f64, f64)> {
    if !params.dispersion.is_massless() {
        return Err(Error::domain("g_bounds applies to the massless case only"));
    }
    if params.epsilon >= 0.5 {
        return Err(Error::domain("g_bounds requires epsilon < 1/2"));
    }
    let i = norm_k_inv_sq(&params.form_factor, &params.dispersion, params.quad_tol)?;
    Ok((
        (1.0 - slack) / (1.0 + 2.0 * params.epsilon) * i,
        i / (1.0 - 2.0 * params.epsilon),
    ))
}

/// Explicit first-order generator
/// `g_eff(p) = (mu / 2|p|) \int |V|^2/|k| atanh(2|p||k| / D(k)) dk` with
/// `D(k) = mu |k| + k^2 + g0`; radially this is the same kernel form as `F`
/// with `A` replaced by `D`.
pub fn eval_g_eff(p_abs: f64, g0: f64, params: &ModelParams) -> Result<f64> {
    if g0 <= 0.0 {
        return Err(Error::domain("g_eff requires g0 > 0"));
    }
    if !params.dispersion.is_massless() {
        return Err(Error::domain("g_eff is defined for the massless case"));
    }
    let mu = params.mu;
    let hi = params.form_factor.cutoff();
    let kernel_err: Cell<Option<Error>> = Cell::new(None);
    let r = integrate_radial(
        |rho| {
            let v = params.v(rho);
            if v == 0.0 {
                return 0.0;
            }
            let d = mu * rho + rho * rho + g0;
            let b = 2.0 * p_abs * rho;
            match angular_log_kernel(d, b) {
                Ok(k) => rho * rho * v * v * k,
                Err(e) => {
                    kernel_err.set(Some(e));
                    f64::NAN
                }
            }
        },
        0.0,
        hi,
        params.quad_tol,
    );
    if let Some(e) = kernel_err.take() {
        return Err(e);
    }
    Ok(mu * r?.value)
}

/// Power-series coefficient
/// `alpha_j(mu) = 2^j mu/(j+1) \int |V|^2 / D(k) * (|k|/D(k))^j dk`,
/// `j` even. Satisfies `mu^j alpha_j -> 2^j/(j+1) \int |V|^2/|k| dk`.
pub fn alpha_coeff(j: u32, g0: f64, params: &ModelParams) -> Result<f64> {
    if j % 2 != 0 {
        return Err(Error::domain("alpha_coeff requires even j"));
    }
    if g0 <= 0.0 {
        return Err(Error::domain("alpha_coeff requires g0 > 0"));
    }
    if !params.dispersion.is_massless() {
        return Err(Error::domain("alpha_coeff is defined for the massless case"));
    }
    let mu = params.mu;
    let hi = params.form_factor.cutoff();
    let r = integrate_radial(
        |rho| {
            let v = params.v(rho);
            if v == 0.0 {
                return 0.0;
            }
            let d = mu * rho + rho * rho + g0;
            rho * rho * v * v / d * (rho / d).powi(j as i32)
        },
        0.0,
        hi,
        params.quad_tol,
    )?;
    Ok(2f64.powi(j as i32) * mu / f64::from(j + 1) * 4.0 * PI * r.value)
}

/// Truncation remainder `R_N(p) = sum_{j >= N+2 even} alpha_j(mu) |p|^j`,
/// summed until terms drop below 1e-3 of the running sum.
pub fn remainder_rn(n: u32, p_abs: f64, g0: f64, params: &ModelParams) -> Result<f64> {
    if n % 2 != 0 {
        return Err(Error::domain("truncation order N must be even"));
    }
    if p_abs == 0.0 {
        return Ok(0.0);
    }
    if 2.0 * p_abs / params.mu >= 1.0 {
        return Err(Error::domain(
            "remainder series diverges for 2|p|/mu >= 1",
        ));
    }
    let mut sum = 0.0;
    let mut j = n + 2;
    loop {
        let term = alpha_coeff(j, g0, params)? * p_abs.powi(j as i32);
        sum += term;
        if term <= 1e-3 * sum || j > n + 200 {
            break;
        }
        j += 2;
    }
    Ok(sum)
}

/// Radial table of the fixed point `g(|p|)` with monotone interpolation.
#[derive(Debug, Clone)]
pub struct GeneratorTable {
    p_samples: Vec<f64>,
    g_values: Vec<f64>,
    interp: MonotoneCubic,
    mu: f64,
    params_hash: u64,
}

impl GeneratorTable {
    /// Solve the fixed point on a Chebyshev-Lobatto grid of `n_nodes` points
    /// over `[0, p_max]` (clipped below `mu/2`) and build the interpolant.
    pub fn build(params: &ModelParams, n_nodes: usize, p_max: f64, tol: f64) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::domain("generator table needs >= 2 nodes"));
        }
        if !(p_max > 0.0) {
            return Err(Error::domain("p_max must be positive"));
        }
        let pm = p_max.min(params.mu / 2.0 * (1.0 - 1e-9));
        let m = n_nodes - 1;
        let mut p_samples = Vec::with_capacity(n_nodes);
        for i in 0..=m {
            // Chebyshev-Lobatto nodes mapped to [0, pm], increasing
            let c = (1.0 - (PI * i as f64 / m as f64).cos()) / 2.0;
            p_samples.push(c * pm);
        }
        p_samples[0] = 0.0;
        p_samples[m] = pm;
        let mut g_values = Vec::with_capacity(n_nodes);
        for &p in &p_samples {
            g_values.push(solve_g(p, params, tol)?);
        }
        Self::from_samples(p_samples, g_values, params)
    }

    /// Assemble from precomputed samples (also the CSV import path).
    pub fn from_samples(p_samples: Vec<f64>, g_values: Vec<f64>, params: &ModelParams) -> Result<Self> {
        let interp = MonotoneCubic::new(p_samples.clone(), g_values.clone())?;
        Ok(Self {
            p_samples,
            g_values,
            interp,
            mu: params.mu,
            params_hash: hash_params(params),
        })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.p_samples, &self.g_values)
    }

    pub fn p_max(&self) -> f64 {
        *self.p_samples.last().unwrap()
    }

    pub fn params_hash(&self) -> u64 {
        self.params_hash
    }
}

impl EffectiveGenerator for GeneratorTable {
    fn g(&self, p_abs: f64) -> Result<f64> {
        if p_abs >= self.mu / 2.0 {
            return Ok(0.0);
        }
        self.interp.eval(p_abs)
    }
}

/// Polynomial generator `h^(N)(p) = p^2 - sum_{j <= N even} alpha_j |p|^j`;
/// `N = None` is the tanh^{-1} form `p^2 - g_eff(p)`.
#[derive(Debug, Clone)]
pub struct PolyGenerator {
    /// Even truncation order, `None` for the explicit infinite-order form.
    pub n: Option<u32>,
    /// `alpha_0, alpha_2, ..., alpha_N` (empty when `n` is `None`).
    pub coeffs: Vec<f64>,
    /// `g(0)`, the constant entering `D(k)`.
    pub g0: f64,
    params: ModelParams,
}

impl PolyGenerator {
    pub fn build(n: Option<u32>, params: &ModelParams, tol: f64) -> Result<Self> {
        let g0 = solve_g(0.0, params, tol)?;
        let mut coeffs = Vec::new();
        if let Some(n) = n {
            if n % 2 != 0 {
                return Err(Error::domain("truncation order N must be even"));
            }
            for j in (0..=n).step_by(2) {
                coeffs.push(alpha_coeff(j, g0, params)?);
            }
        }
        Ok(Self {
            n,
            coeffs,
            g0,
            params: params.clone(),
        })
    }
}

impl EffectiveGenerator for PolyGenerator {
    fn g(&self, p_abs: f64) -> Result<f64> {
        match self.n {
            None => eval_g_eff(p_abs, self.g0, &self.params),
            Some(_) => {
                let mut acc = 0.0;
                for (i, a) in self.coeffs.iter().enumerate() {
                    acc += a * p_abs.powi(2 * i as i32);
                }
                Ok(acc)
            }
        }
    }
}

fn hash_params(params: &ModelParams) -> u64 {
    let mut h = DefaultHasher::new();
    params.mu.to_bits().hash(&mut h);
    params.dispersion.m.to_bits().hash(&mut h);
    params.epsilon.to_bits().hash(&mut h);
    params.quad_tol.to_bits().hash(&mut h);
    match &params.form_factor {
        crate::model::FormFactor::Nelson { lambda } => {
            0u8.hash(&mut h);
            lambda.to_bits().hash(&mut h);
        }
        crate::model::FormFactor::PowerLaw { a, lambda } => {
            1u8.hash(&mut h);
            a.to_bits().hash(&mut h);
            lambda.to_bits().hash(&mut h);
        }
        crate::model::FormFactor::Tabulated { rho, v } => {
            2u8.hash(&mut h);
            for x in rho.iter().chain(v) {
                x.to_bits().hash(&mut h);
            }
        }
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mu_norm, Dispersion, FormFactor};
    use crate::quadrature::{integrate_mc_full, McConfig};

    fn nelson(mu: f64) -> ModelParams {
        ModelParams::new(mu, Dispersion::massless(), FormFactor::Nelson { lambda: 1.0 }, 0.25)
    }

    #[test]
    fn f_at_p_zero_matches_radial_limit() {
        let p = nelson(100.0);
        let x = 1.0;
        let direct = integrate_radial(
            |rho| {
                let v = p.v(rho);
                4.0 * PI * rho * rho * v * v / (100.0 * rho + rho * rho + x)
            },
            0.0,
            1.0,
            1e-12,
        )
        .unwrap()
        .value
            * 100.0;
        let f = eval_f(0.0, x, &p).unwrap();
        assert!((f - direct).abs() <= 1e-9 * direct);
    }

    #[test]
    fn f_strictly_decreasing_in_x() {
        let p = nelson(100.0);
        for pa in [0.0, 3.0, 10.0] {
            let mut prev = eval_f(pa, 0.1, &p).unwrap();
            for x in [0.5, 1.0, 5.0, 20.0] {
                let f = eval_f(pa, x, &p).unwrap();
                assert!(f < prev, "F not decreasing at p={pa}, x={x}");
                prev = f;
            }
        }
    }

    #[test]
    fn f_matches_brute_monte_carlo() {
        // independent 3D check of the angular reduction:
        // mu \int rho^2 V^2 / (mu omega - 2 p rho c + rho^2 + x) drho dc dphi
        let params = nelson(100.0);
        let (p_abs, x) = (8.0, 1.0);
        let mu = params.mu;
        let mc = integrate_mc_full(
            |y| {
                let (rho, c) = (y[0], y[1]);
                let v = params.v(rho);
                let den = mu * rho - 2.0 * p_abs * rho * c + rho * rho + x;
                mu * rho * rho * v * v / den
            },
            &[(0.0, 1.0), (-1.0, 1.0), (0.0, 2.0 * PI)],
            &McConfig {
                samples: 400_000,
                seed: 7,
                stratification: true,
            },
        )
        .unwrap();
        let f = eval_f(p_abs, x, &params).unwrap();
        assert!(
            (f - mc.result.value).abs() <= 3.0 * mc.result.error_estimate,
            "angular reduction {f} vs MC {} +- {}",
            mc.result.value,
            mc.result.error_estimate
        );
    }

    #[test]
    fn solve_g_residual_and_uniqueness() {
        let p = nelson(100.0);
        let tol = 1e-10;
        let g = solve_g(0.0, &p, tol).unwrap();
        let res = (g - eval_f(0.0, g, &p).unwrap()).abs();
        assert!(res <= tol);
        // fixed-point iteration x <- F(0, x) converges to the same limit
        let mut x = 1.0;
        for _ in 0..200 {
            x = eval_f(0.0, x, &p).unwrap();
        }
        assert!((x - g).abs() <= 1e-7);
    }

    #[test]
    fn solve_g_zero_beyond_half_mu() {
        let p = nelson(100.0);
        assert_eq!(solve_g(51.0, &p, 1e-10).unwrap(), 0.0);
        assert_eq!(solve_g(50.0, &p, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn apriori_bracket_contains_g_at_large_mu() {
        let mut p = nelson(1e4);
        p.epsilon = 0.0;
        let (lo, hi) = g_bounds(&p, 0.02).unwrap();
        let g = solve_g(0.0, &p, 1e-9).unwrap();
        assert!(lo <= g && g <= hi, "g(0) = {g} outside [{lo}, {hi}]");
        // epsilon = 0 collapses the bracket onto 4 pi Lambda
        assert!((hi - 4.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn g_eff_tracks_g_within_envelope() {
        // |g - g_eff| * mu / ||V||_{1,mu}^2 stays bounded across a decade
        let mut ratios = Vec::new();
        for mu in [100.0, 1000.0] {
            let params = nelson(mu);
            let g0 = solve_g(0.0, &params, 1e-10).unwrap();
            let p_abs = 0.1 * mu;
            let g = solve_g(p_abs, &params, 1e-10).unwrap();
            let ge = eval_g_eff(p_abs, g0, &params).unwrap();
            let nv = mu_norm(&params.form_factor, 1.0, mu, &params.dispersion).unwrap();
            ratios.push((g - ge).abs() * mu / (nv * nv));
        }
        for r in &ratios {
            assert!(*r < 10.0, "envelope ratio {r} too large");
        }
    }

    #[test]
    fn alpha_limits() {
        let params = nelson(1e5);
        let g0 = solve_g(0.0, &params, 1e-9).unwrap();
        let i = 4.0 * PI; // \int |V|^2/|k| dk for Nelson Lambda = 1
        for j in [0u32, 2, 4, 6] {
            let a = alpha_coeff(j, g0, &params).unwrap();
            assert!(a > 0.0);
            let limit = 2f64.powi(j as i32) / f64::from(j + 1) * i;
            let scaled = params.mu.powi(j as i32) * a;
            assert!(
                (scaled / limit - 1.0).abs() < 0.05,
                "j={j}: mu^j alpha_j = {scaled}, limit {limit}"
            );
        }
        assert!(matches!(alpha_coeff(3, g0, &params), Err(Error::Domain(_))));
    }

    #[test]
    fn remainder_bounds() {
        let params = nelson(100.0);
        let g0 = solve_g(0.0, &params, 1e-9).unwrap();
        let n = 2u32;
        for p_abs in [1.0, 5.0, 20.0] {
            let r = remainder_rn(n, p_abs, g0, &params).unwrap();
            let lower = alpha_coeff(n + 2, g0, &params).unwrap() * p_abs.powi((n + 2) as i32);
            assert!(r >= lower * (1.0 - 1e-9));
            // geometric upper bound with C0 = || |k|^{-1/2} V ||^2 / (1 - 2p/mu)
            let i = norm_k_inv_sq(&params.form_factor, &params.dispersion, 1e-10).unwrap();
            let q = 2.0 * p_abs / params.mu;
            let upper = i / (1.0 - q) * q.powi((n + 2) as i32);
            assert!(r <= upper * (1.0 + 1e-9), "R_N {r} above bound {upper}");
        }
        assert_eq!(remainder_rn(n, 0.0, g0, &params).unwrap(), 0.0);
        assert!(remainder_rn(n, 51.0, g0, &params).is_err());
    }

    #[test]
    fn table_residual_and_interpolation() {
        let params = nelson(100.0);
        let tol = 1e-9;
        let table = GeneratorTable::build(&params, 12, 25.0, tol).unwrap();
        let (ps, gs) = table.nodes();
        for (&p, &gv) in ps.iter().zip(gs) {
            assert!((gv - eval_f(p, gv, &params).unwrap()).abs() <= tol);
            assert_eq!(table.g(p).unwrap(), gv);
        }
        assert_eq!(table.g(60.0).unwrap(), 0.0);
        // g increases with |p| (denominator shrinks with 2 p.k)
        for w in gs.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let h = table.h(ps[3]).unwrap();
        assert!((h - (ps[3] * ps[3] - gs[3])).abs() < 1e-14);
    }

    #[test]
    fn poly_generator_low_orders() {
        let params = nelson(100.0);
        let p0 = PolyGenerator::build(Some(0), &params, 1e-9).unwrap();
        let p2 = PolyGenerator::build(Some(2), &params, 1e-9).unwrap();
        let pa = 3.0;
        assert!((p0.h(pa).unwrap() - (pa * pa - p0.coeffs[0])).abs() < 1e-14);
        let expect = (1.0 - p2.coeffs[1]) * pa * pa - p2.coeffs[0];
        assert!((p2.h(pa).unwrap() - expect).abs() < 1e-12);
        let pinf = PolyGenerator::build(None, &params, 1e-9).unwrap();
        let ge = eval_g_eff(pa, pinf.g0, &params).unwrap();
        assert!((pinf.g(pa).unwrap() - ge).abs() < 1e-14);
    }
}
