//! Integration engine: adaptive Gauss-Kronrod radial quadrature, the exact
//! angular reduction of denominators linear in `cos(theta)`, and seeded
//! Monte-Carlo estimation for multi-momentum integrals.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BinaryHeap;

/// Outcome of a numerical integration.
#[derive(Debug, Clone, Copy)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Monte-Carlo configuration. Identical seeds give bit-identical results.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub stratification: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            stratification: true,
        }
    }
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let mut err = ((res_k - res_g) * half).abs();
    let res_asc = res_asc * half.abs();
    let res_abs = res_abs * half.abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_k * half, err)
}

const MAX_INTERVALS: usize = 4000;

#[derive(PartialEq)]
struct Interval {
    err: f64,
    val: f64,
    a: f64,
    b: f64,
}

impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Adaptive quadrature of a radial integrand on `(lo, hi)`.
///
/// A left endpoint at zero is handled by the substitution `rho = u^2`, which
/// removes `rho^{-beta}` singularities up to `beta = 1/2` exactly and keeps
/// milder ones integrable. Subdivision continues until the estimated
/// relative error drops below `tol`.
pub fn integrate_radial<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::domain(format!("empty integration range [{lo}, {hi}]")));
    }
    if lo == 0.0 {
        let g = |u: f64| 2.0 * u * f(u * u);
        adaptive(&g, 0.0, hi.sqrt(), tol)
    } else {
        adaptive(&f, lo, hi, tol)
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<IntegralResult> {
    let (val, err) = kronrod15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { err, val, a, b });
    let mut evaluations = 15usize;
    let mut total_val = val;
    let mut total_err = err;
    while total_err > tol * total_val.abs().max(f64::MIN_POSITIVE) && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution; keep its contribution
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(f, worst.a, mid);
        let (v2, e2) = kronrod15(f, mid, worst.b);
        evaluations += 30;
        total_val += v1 + v2 - worst.val;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval { err: e1, val: v1, a: worst.a, b: mid });
        heap.push(Interval { err: e2, val: v2, a: mid, b: worst.b });
    }
    if !total_val.is_finite() {
        return Err(Error::Integrability(
            "integrand produced a non-finite partial sum".into(),
        ));
    }
    if total_err > tol * total_val.abs().max(f64::MIN_POSITIVE) {
        // tolerate near-misses at machine precision scale before giving up
        if total_err > 1e3 * f64::EPSILON * total_val.abs() {
            return Err(Error::Accuracy {
                message: format!(
                    "adaptive quadrature stalled at relative error {:.3e} (requested {tol:.3e})",
                    total_err / total_val.abs().max(f64::MIN_POSITIVE)
                ),
                best: total_val,
            });
        }
    }
    Ok(IntegralResult {
        value: total_val,
        error_estimate: total_err,
        evaluations,
    })
}

/// Fixed quadrature grid on `[lo, hi]`: the 15 Kronrod nodes and weights per
/// panel, `panels` equal panels, nodes strictly increasing. Used for
/// wave-packet norms so packet sums and radial integrals share one rule.
pub fn panel_grid(lo: f64, hi: f64, panels: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lo < hi) || panels == 0 {
        return Err(Error::domain("panel_grid needs lo < hi and panels >= 1"));
    }
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(15 * panels);
    let mut weights = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let center = lo + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        for j in 0..15 {
            let (x, w) = if j < 7 {
                (-XGK[j], WGK[j])
            } else if j == 7 {
                (0.0, WGK[7])
            } else {
                (XGK[14 - j], WGK[14 - j])
            };
            nodes.push(center + half * x);
            weights.push(half * w);
        }
    }
    Ok((nodes, weights))
}

/// Exact solid-angle integral of `1/(A - B cos(theta))` over the unit sphere:
/// `(4 pi / B) atanh(B / A)`, with the series limit `4 pi / A (1 + r^2/3 + r^4/5 + ...)`
/// used for `B/A < 1e-4` (covering `B = 0`).
pub fn angular_log_kernel(a: f64, b: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::domain("angular kernel needs B >= 0"));
    }
    if a <= b {
        return Err(Error::Domain(format!(
            "resonant denominator: A = {a} <= B = {b}"
        )));
    }
    let r = b / a;
    if r < 1e-4 {
        let r2 = r * r;
        Ok(4.0 * std::f64::consts::PI / a * (1.0 + r2 / 3.0 + r2 * r2 / 5.0))
    } else {
        Ok(4.0 * std::f64::consts::PI / b * r.atanh())
    }
}

/// Monte-Carlo output with the stratification diagnostic attached.
#[derive(Debug, Clone, Copy)]
pub struct McOutput {
    pub result: IntegralResult,
    /// Fraction of samples that evaluated to exactly zero; a value of 1.0 on
    /// an integrand with nonzero expectation indicates a missed support.
    pub zero_fraction: f64,
}

/// Unbiased Monte-Carlo estimate of the integral of `f` over a box in up to
/// six dimensions. `error_estimate` is the standard error of the mean.
pub fn integrate_mc<F>(f: F, bounds: &[(f64, f64)], cfg: &McConfig) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_mc_full(f, bounds, cfg).map(|o| o.result)
}

pub fn integrate_mc_full<F>(f: F, bounds: &[(f64, f64)], cfg: &McConfig) -> Result<McOutput>
where
    F: Fn(&[f64]) -> f64,
{
    let d = bounds.len();
    if d == 0 || d > 6 {
        return Err(Error::domain("Monte-Carlo integration supports 1 <= d <= 6"));
    }
    if cfg.samples < 1000 {
        return Err(Error::domain("Monte-Carlo needs at least 1000 samples"));
    }
    let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    if volume <= 0.0 {
        return Err(Error::domain("Monte-Carlo box must have positive volume"));
    }
    let strata = if cfg.stratification { 8 } else { 1 };
    let per_stratum = cfg.samples / strata;
    let (lo0, hi0) = bounds[0];
    let step0 = (hi0 - lo0) / strata as f64;

    let mut total = 0.0;
    let mut var_sum = 0.0;
    let mut zeros = 0usize;
    let mut n_total = 0usize;
    let mut point = vec![0.0; d];
    for s in 0..strata {
        // independent per-stratum stream so strata can be recomputed in isolation
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s as u64 + 1)));
        let a0 = lo0 + s as f64 * step0;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..per_stratum {
            point[0] = a0 + step0 * rng.random::<f64>();
            for (j, &(lo, hi)) in bounds.iter().enumerate().skip(1) {
                point[j] = lo + (hi - lo) * rng.random::<f64>();
            }
            let v = f(&point);
            if v == 0.0 {
                zeros += 1;
            }
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let n = per_stratum as f64;
        // each stratum covers volume/strata
        total += mean * volume / strata as f64;
        var_sum += (m2 / (n - 1.0)) / n * (volume / strata as f64).powi(2);
        n_total += per_stratum;
    }
    Ok(McOutput {
        result: IntegralResult {
            value: total,
            error_estimate: var_sum.sqrt(),
            evaluations: n_total,
        },
        zero_fraction: zeros as f64 / n_total as f64,
    })
}
