//! Propagation under effective generators (diagonal in momentum), distances
//! between generator-induced evolutions, time-scale regions and the
//! analytic error-bound evaluators.

use crate::error::{Error, Result};
use crate::generator::{solve_g, EffectiveGenerator, PolyGenerator};
use crate::model::{mu_norm, FormFactor, ModelParams};
use crate::quadrature::panel_grid;
use num_complex::Complex64;

/// A normalized radial wave packet in momentum representation. Norms are
/// discrete quadrature sums `sum_i w_i |amp_i|^2` on the stored grid.
#[derive(Debug, Clone)]
pub struct WavePacket {
    pub p: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub support: (f64, f64),
}

impl WavePacket {
    /// Smooth compactly supported bump on `[p_lo, p_hi]`, normalized.
    pub fn bump(p_lo: f64, p_hi: f64, panels: usize) -> Result<Self> {
        if !(0.0 <= p_lo && p_lo < p_hi) {
            return Err(Error::domain("bump support needs 0 <= p_lo < p_hi"));
        }
        let (p, weights) = panel_grid(p_lo, p_hi, panels)?;
        let mid = 0.5 * (p_lo + p_hi);
        let half = 0.5 * (p_hi - p_lo);
        let amplitudes: Vec<Complex64> = p
            .iter()
            .map(|&pi| {
                let u = (pi - mid) / half;
                let v = if u.abs() < 1.0 {
                    (-1.0 / (1.0 - u * u)).exp()
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            })
            .collect();
        let mut packet = Self {
            p,
            weights,
            amplitudes,
            support: (p_lo, p_hi),
        };
        let n = packet.norm();
        if n == 0.0 {
            return Err(Error::domain("bump profile vanished on the grid"));
        }
        for a in &mut packet.amplitudes {
            *a /= n;
        }
        Ok(packet)
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.amplitudes)
            .map(|(w, a)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// `e^{-i t h(p)} phi`: multiplication by a phase per momentum node.
pub fn propagate(phi: &WavePacket, t: f64, gen: &dyn EffectiveGenerator) -> Result<WavePacket> {
    let mut out = phi.clone();
    for (pi, a) in out.p.iter().zip(&mut out.amplitudes) {
        let h = gen.h(*pi)?;
        *a *= Complex64::from_polar(1.0, -t * h);
    }
    Ok(out)
}

/// `|| (e^{-i t h_a} - e^{-i t h_b}) phi ||`, evaluated exactly on the packet
/// grid. Always in `[0, 2]`.
pub fn generator_distance(
    phi: &WavePacket,
    t: f64,
    gen_a: &dyn EffectiveGenerator,
    gen_b: &dyn EffectiveGenerator,
) -> Result<f64> {
    let mut acc = 0.0;
    for ((pi, w), a) in phi.p.iter().zip(&phi.weights).zip(&phi.amplitudes) {
        let ha = gen_a.h(*pi)?;
        let hb = gen_b.h(*pi)?;
        let diff = Complex64::from_polar(1.0, -t * ha) - Complex64::from_polar(1.0, -t * hb);
        acc += w * a.norm_sqr() * diff.norm_sqr();
    }
    Ok(acc.sqrt())
}

/// Membership in the scaling region
/// `I_N = union over a' of [0, a'] x [0, min(1/2, (N+2)(1-a')))`. Since the
/// cap decreases with `a'`, taking `a' = a` is optimal and the predicate is
/// `b < min(1/2, (N+2)(1-a))`.
pub fn region_member(a: f64, b: f64, n: u32) -> Result<bool> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::domain("region parameter a must lie in [0, 1)"));
    }
    if b < 0.0 {
        return Err(Error::domain("region parameter b must be >= 0"));
    }
    Ok(b < 0.5f64.min(f64::from(n + 2) * (1.0 - a)))
}

/// The cap `b(a) = min(1/2, (N+2)(1-a))` bounding `I_N` from above; the
/// boundary polyline for plotting.
pub fn region_boundary(n: u32, samples: usize) -> Vec<(f64, f64)> {
    (0..samples)
        .map(|i| {
            let a = i as f64 / samples as f64;
            (a, 0.5f64.min(f64::from(n + 2) * (1.0 - a)))
        })
        .collect()
}

/// One row of the non-convergence probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeRow {
    pub mu: f64,
    pub t: f64,
    pub distance: f64,
    /// `t ||Delta phi|| - t^2/2 ||Delta^2 phi||` with
    /// `Delta = h_g - h^(N)`; a rigorous lower bound when positive.
    pub lower_proxy: f64,
}

/// Scaling probe for the breakdown of the order-`N` polynomial generator.
///
/// For each `mu`: packet supported in `[mu^a / 2, mu^a]`, time
/// `t = tau mu^{(N+2)(1-a)}`. When `tau` is not supplied it is fitted at the
/// first `mu` from the proof recipe `tau^2 = C_V / D_V` with
/// `C_V = ||Delta phi|| mu^b`, `D_V = ||Delta^2 phi|| mu^{2b}`.
pub fn nonconvergence_probe(
    n: u32,
    a: f64,
    tau: Option<f64>,
    mu_list: &[f64],
    template: &ModelParams,
    tol: f64,
) -> Result<Vec<ProbeRow>> {
    if n % 2 != 0 {
        return Err(Error::domain("probe order N must be even"));
    }
    let a_min = 1.0 - 1.0 / (2.0 * f64::from(n + 1));
    if !(a > a_min && a < 1.0) {
        return Err(Error::Domain(format!(
            "probe exponent a = {a} outside the admissible interval ({a_min}, 1)"
        )));
    }
    if !matches!(template.form_factor, FormFactor::Nelson { .. }) {
        return Err(Error::domain("probe is defined for the Nelson form factor"));
    }
    let b = f64::from(n + 2) * (1.0 - a);
    let mut fitted_tau = tau;
    let mut rows = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        let mut params = template.clone();
        params.mu = mu;
        let p_hi = mu.powf(a);
        let phi = WavePacket::bump(p_hi / 2.0, p_hi, 6)?;
        let poly = PolyGenerator::build(Some(n), &params, tol)?;
        // Delta = h_g - h^(N) = poly(p) - g(p) per node
        let mut m1 = 0.0; // || Delta phi ||^2
        let mut m2 = 0.0; // || Delta^2 phi ||^2
        let mut deltas = Vec::with_capacity(phi.p.len());
        for (pi, (w, amp)) in phi.p.iter().zip(phi.weights.iter().zip(&phi.amplitudes)) {
            let g = solve_g(*pi, &params, tol)?;
            let delta = poly.g(*pi)? - g;
            deltas.push(delta);
            let wa = w * amp.norm_sqr();
            m1 += wa * delta * delta;
            m2 += wa * delta * delta * delta * delta;
        }
        let nd1 = m1.sqrt();
        let nd2 = m2.sqrt();
        let tau_here = match fitted_tau {
            Some(tv) => tv,
            None => {
                let cv = nd1 * mu.powf(b);
                let dv = nd2 * mu.powf(2.0 * b);
                if dv == 0.0 {
                    return Err(Error::domain("degenerate packet: ||Delta^2 phi|| = 0"));
                }
                let tv = (cv / dv).sqrt();
                fitted_tau = Some(tv);
                tv
            }
        };
        let t = tau_here * mu.powf(b);
        let mut acc = 0.0;
        for ((w, amp), delta) in phi.weights.iter().zip(&phi.amplitudes).zip(&deltas) {
            let diff = Complex64::from_polar(1.0, -t * delta) - Complex64::new(1.0, 0.0);
            acc += w * amp.norm_sqr() * diff.norm_sqr();
        }
        rows.push(ProbeRow {
            mu,
            t,
            distance: acc.sqrt(),
            lower_proxy: t * nd1 - t * t / 2.0 * nd2,
        });
    }
    Ok(rows)
}

/// Which stated right-hand side to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum BoundKind {
    /// Massless first-order bound.
    Thm1,
    /// Adds the momentum-truncated polynomial remainder term.
    Cor24 { n_trunc: u32, p0: f64 },
    /// Massive higher-order bound at odd order `n`.
    Thm2 { n: u32 },
    /// Infrared family `V_a` bound.
    ThmA1 { a: f64 },
}

/// Evaluate a stated error-bound right-hand side literally, with the free
/// constant `c` supplied by the caller. Used for scaling plots, never as
/// ground truth.
pub fn bound_rhs(kind: BoundKind, t: f64, c: f64, params: &ModelParams) -> Result<f64> {
    let mu = params.mu;
    let sqrt_mu = mu.sqrt();
    let nv = mu_norm(&params.form_factor, 1.0, mu, &params.dispersion)?;
    match kind {
        BoundKind::Thm1 => {
            if !params.dispersion.is_massless() {
                return Err(Error::domain("hypothesis violated: omega(k) = |k| requires m = 0"));
            }
            Ok(c * (nv / sqrt_mu + t.abs() * nv * nv / sqrt_mu))
        }
        BoundKind::Cor24 { n_trunc, p0 } => {
            if !params.dispersion.is_massless() {
                return Err(Error::domain("hypothesis violated: omega(k) = |k| requires m = 0"));
            }
            if p0 <= 0.0 {
                return Err(Error::domain("hypothesis violated: P0 must be positive"));
            }
            let base = c * (nv / sqrt_mu + t.abs() * nv * nv / sqrt_mu);
            Ok(base + c * t.abs() * (p0 / mu).powi((n_trunc + 2) as i32))
        }
        BoundKind::Thm2 { n } => {
            let m = params.dispersion.m;
            if n % 2 == 0 {
                return Err(Error::domain("hypothesis violated: order n must be odd"));
            }
            if m < 1.0 / mu {
                return Err(Error::domain("hypothesis violated: massive regime needs m >= 1/mu"));
            }
            let mum = mu * m;
            let fact: f64 = (1..=u64::from(n)).map(|k| k as f64).product();
            let supp = mum.powf(-(f64::from(n) - 1.0) / 2.0);
            let min_factor = 1.0f64.min(nv / (sqrt_mu * m));
            Ok(c.powi(n as i32)
                * fact.sqrt()
                * (nv / sqrt_mu
                    + nv.powi(n as i32) / sqrt_mu * supp
                    + t.abs() / sqrt_mu * nv.powi((n + 1) as i32) * supp * min_factor))
        }
        BoundKind::ThmA1 { a } => {
            if !(0.0..=0.5).contains(&a) {
                return Err(Error::domain("hypothesis violated: a must lie in [0, 1/2]"));
            }
            if a == 0.5 {
                Ok(c * (mu.ln() / mu).sqrt() * (1.0 + t.abs()))
            } else {
                Ok(c * mu.powf(a - 1.0) * (1.0 + t.abs()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorTable;
    use crate::model::{Dispersion, ModelParams};

    fn nelson(mu: f64) -> ModelParams {
        ModelParams::new(mu, Dispersion::massless(), FormFactor::Nelson { lambda: 1.0 }, 0.25)
    }

    fn table(params: &ModelParams, p_max: f64) -> GeneratorTable {
        GeneratorTable::build(params, 10, p_max, 1e-9).unwrap()
    }

    #[test]
    fn bump_is_normalized_and_supported() {
        let phi = WavePacket::bump(1.0, 2.0, 4).unwrap();
        assert!((phi.norm() - 1.0).abs() < 1e-14);
        assert!(phi.p.iter().all(|&p| (1.0..=2.0).contains(&p)));
    }

    #[test]
    fn propagate_unitary_identity_composition() {
        let params = nelson(100.0);
        let gen = table(&params, 20.0);
        let phi = WavePacket::bump(2.0, 10.0, 4).unwrap();
        let same = propagate(&phi, 0.0, &gen).unwrap();
        for (a, b) in phi.amplitudes.iter().zip(&same.amplitudes) {
            assert_eq!(a, b);
        }
        let moved = propagate(&phi, 3.7, &gen).unwrap();
        assert!((moved.norm() - 1.0).abs() <= 1e-14);
        for (a, b) in phi.amplitudes.iter().zip(&moved.amplitudes) {
            assert!((a.norm() - b.norm()).abs() <= 1e-14);
        }
        let two_step = propagate(&propagate(&phi, 1.3, &gen).unwrap(), 2.4, &gen).unwrap();
        for (a, b) in two_step.amplitudes.iter().zip(&moved.amplitudes) {
            assert!((a - b).norm() <= 1e-13);
        }
    }

    #[test]
    fn propagate_outside_domain_errors() {
        let params = nelson(100.0);
        let gen = table(&params, 5.0);
        let phi = WavePacket::bump(4.0, 8.0, 2).unwrap();
        assert!(matches!(propagate(&phi, 1.0, &gen), Err(Error::Domain(_))));
    }

    #[test]
    fn distance_basics() {
        let params = nelson(100.0);
        let gen_a = table(&params, 20.0);
        let gen_b = PolyGenerator::build(Some(2), &params, 1e-9).unwrap();
        let phi = WavePacket::bump(2.0, 10.0, 4).unwrap();
        assert_eq!(generator_distance(&phi, 1.0, &gen_a, &gen_a).unwrap(), 0.0);
        let d = generator_distance(&phi, 5.0, &gen_a, &gen_b).unwrap();
        assert!((0.0..=2.0).contains(&d));
        // small-t linearization: d ~ |t| * || (h_a - h_b) phi ||
        let t = 1e-6;
        let d_small = generator_distance(&phi, t, &gen_a, &gen_b).unwrap();
        let mut lin = 0.0;
        for ((p, w), a) in phi.p.iter().zip(&phi.weights).zip(&phi.amplitudes) {
            let diff = gen_a.h(*p).unwrap() - gen_b.h(*p).unwrap();
            lin += w * a.norm_sqr() * diff * diff;
        }
        let lin = t * lin.sqrt();
        assert!((d_small - lin).abs() <= 1e-3 * lin.max(1e-300));
    }

    #[test]
    fn region_examples_and_monotonicity() {
        assert!(region_member(0.0, 0.49, 2).unwrap());
        assert!(!region_member(0.95, 0.3, 2).unwrap());
        assert!(region_member(0.95, 0.3, 6).unwrap());
        for &(a, b) in &[(0.1, 0.2), (0.6, 0.45), (0.9, 0.25), (0.97, 0.1)] {
            for n in (0..8).step_by(2) {
                if region_member(a, b, n).unwrap() {
                    assert!(region_member(a, b, n + 2).unwrap());
                }
            }
        }
        assert!(region_member(1.0, 0.1, 2).is_err());
    }

    #[test]
    fn probe_domain_checks() {
        let params = nelson(100.0);
        // a below the admissible interval for N = 2 (needs a > 5/6)
        assert!(matches!(
            nonconvergence_probe(2, 0.5, None, &[100.0], &params, 1e-8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn probe_small_tau_linear() {
        let params = nelson(200.0);
        let rows_a = nonconvergence_probe(2, 0.9, Some(1e-4), &[200.0], &params, 1e-8).unwrap();
        let rows_b = nonconvergence_probe(2, 0.9, Some(2e-4), &[200.0], &params, 1e-8).unwrap();
        let ratio = rows_b[0].distance / rows_a[0].distance;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio} not ~2");
        // proxy is a valid lower bound when positive
        for r in rows_a.iter().chain(&rows_b) {
            if r.lower_proxy > 0.0 {
                assert!(r.distance >= r.lower_proxy * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn bound_rhs_formulas() {
        let params = nelson(100.0);
        let nv = mu_norm(&params.form_factor, 1.0, 100.0, &params.dispersion).unwrap();
        let v = bound_rhs(BoundKind::Thm1, 0.0, 2.0, &params).unwrap();
        assert!((v - 2.0 * nv / 10.0).abs() < 1e-12);
        let c = bound_rhs(BoundKind::Cor24 { n_trunc: 2, p0: 5.0 }, 1.0, 2.0, &params).unwrap();
        let base = bound_rhs(BoundKind::Thm1, 1.0, 2.0, &params).unwrap();
        assert!((c - base - 2.0 * (5.0f64 / 100.0).powi(4)).abs() < 1e-12);
        // a = 1/2 branch
        let va = bound_rhs(BoundKind::ThmA1 { a: 0.5 }, 3.0, 1.0, &params).unwrap();
        assert!((va - (100f64.ln() / 100.0).sqrt() * 4.0).abs() < 1e-12);
    }

    #[test]
    fn thm2_min_factor_continuous_at_switch() {
        // pick m so || V ||_mu = sqrt(mu) m at the switch point, then nudge
        let mut params = nelson(100.0);
        let nv = mu_norm(&params.form_factor, 1.0, 100.0, &params.dispersion).unwrap();
        let m_star = nv / 10.0;
        let mut vals = Vec::new();
        for dm in [-1e-6, 1e-6] {
            params.dispersion = Dispersion { m: m_star + dm };
            vals.push(bound_rhs(BoundKind::Thm2 { n: 1 }, 1.0, 1.0, &params).unwrap());
        }
        assert!((vals[0] - vals[1]).abs() <= 1e-4 * vals[0]);
        // hypothesis checks
        params.dispersion = Dispersion { m: 1e-6 };
        assert!(bound_rhs(BoundKind::Thm2 { n: 1 }, 1.0, 1.0, &params).is_err());
        params.dispersion = Dispersion { m: 1.0 };
        assert!(bound_rhs(BoundKind::Thm2 { n: 2 }, 1.0, 1.0, &params).is_err());
    }
}
