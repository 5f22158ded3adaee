//! Brute-force truth: the full Hamiltonian on a boson-number-truncated,
//! momentum-lattice Fock space in one conserved-total-momentum fiber, with
//! Krylov time propagation and direct error measurement against the
//! effective evolution.

pub mod basis;
pub mod lanczos;

use crate::error::{Error, Result};
use crate::generator::{solve_fixed_point, solve_g};
use crate::model::ModelParams;
use basis::{multiset_count, BinomialTable, SectorBasis};
use lanczos::{krylov_propagate, norm, PropagationStats};
use num_complex::Complex64;

/// Discretized field-mode grid `h Z^3 \ {0}` within radius `k_max`; each
/// mode carries quadrature weight `h^3`. The zero mode is excluded (it has
/// zero measure in the continuum and an ill-defined massless coupling).
#[derive(Debug, Clone)]
pub struct MomentumLattice {
    pub h: f64,
    pub k_max: f64,
    pub modes: Vec<[f64; 3]>,
}

impl MomentumLattice {
    pub fn new(h: f64, k_max: f64) -> Result<Self> {
        if !(h > 0.0) || k_max < h {
            return Err(Error::domain("lattice needs h > 0 and k_max >= h"));
        }
        let n_max = (k_max / h).floor() as i64;
        let mut modes = Vec::new();
        for nx in -n_max..=n_max {
            for ny in -n_max..=n_max {
                for nz in -n_max..=n_max {
                    if nx == 0 && ny == 0 && nz == 0 {
                        continue;
                    }
                    let k = [h * nx as f64, h * ny as f64, h * nz as f64];
                    if (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt() <= k_max + 1e-12 {
                        modes.push(k);
                    }
                }
            }
        }
        Ok(Self { h, k_max, modes })
    }

    pub fn weight(&self) -> f64 {
        self.h * self.h * self.h
    }
}

/// One total-momentum fiber of the truncated model.
#[derive(Debug, Clone)]
pub struct FiberSpec {
    pub p_total: [f64; 3],
    pub lattice: MomentumLattice,
    /// Boson-number cutoff, at most 3.
    pub n_max: usize,
    pub params: ModelParams,
}

impl FiberSpec {
    /// Dimension of the truncated fiber space over all lattice modes.
    pub fn dimension(&self) -> u64 {
        let m = self.lattice.modes.len();
        let bin = BinomialTable::new(m + self.n_max, self.n_max);
        (0..=self.n_max).map(|n| multiset_count(&bin, m, n)).sum()
    }
}

/// Default cap on the number of propagated basis states (about 1 GB of
/// state vectors at the default Krylov dimension).
pub const DEFAULT_MAX_STATES: usize = 6_000_000;

/// Sparse fiber Hamiltonian
/// `H(P) = (P - P_f)^2 + mu sum_j omega_j a*_j a_j + mu^{1/2} sum_j V_j h^{3/2} (a_j + a*_j)`.
///
/// Only modes with nonzero coupling enter the stored basis: starting from
/// the vacuum, states containing a decoupled mode keep amplitude exactly
/// zero, so they are dropped from propagation (the reported `dimension`
/// of `FiberSpec::dimension` still counts them).
pub struct FiberHamiltonian {
    diag: Vec<f64>,
    /// CSR adjacency: per state, links to sector `n - 1` parents.
    link_offsets: Vec<u32>,
    link_parent: Vec<u32>,
    link_coeff: Vec<f64>,
    dim: usize,
    sector_offsets: Vec<usize>,
}

impl FiberHamiltonian {
    pub fn build(spec: &FiberSpec, max_states: usize) -> Result<Self> {
        if spec.n_max > 3 {
            return Err(Error::domain("boson cutoff n_max is limited to 3"));
        }
        let lat = &spec.lattice;
        let params = &spec.params;
        let sqrt_w = lat.weight().sqrt();
        // coupled modes only; V = 0 modes decouple exactly from the vacuum
        let mut modes: Vec<[f64; 3]> = Vec::new();
        let mut coupling: Vec<f64> = Vec::new();
        let mut omega: Vec<f64> = Vec::new();
        for k in &lat.modes {
            let rho = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let v = params.v(rho);
            if v != 0.0 {
                modes.push(*k);
                coupling.push(params.mu.sqrt() * v * sqrt_w);
                omega.push(params.dispersion.omega(rho));
            }
        }
        // m = 0 is legal: with no coupled modes only the vacuum survives
        let m = modes.len();
        let bin = BinomialTable::new(m + spec.n_max + 1, spec.n_max + 1);
        let mut sector_offsets = vec![0usize; spec.n_max + 2];
        for n in 0..=spec.n_max {
            let count = multiset_count(&bin, m, n);
            let next = sector_offsets[n] as u64 + count;
            if next > max_states as u64 || next > u32::MAX as u64 {
                return Err(Error::Resource(format!(
                    "fiber dimension {next}+ exceeds the state budget {max_states}"
                )));
            }
            sector_offsets[n + 1] = next as usize;
        }
        let dim = sector_offsets[spec.n_max + 1];
        let p = spec.p_total;
        let mut diag = vec![0.0f64; dim];
        diag[0] = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let mut link_offsets = Vec::with_capacity(dim + 1);
        link_offsets.push(0u32);
        let mut link_parent = Vec::new();
        let mut link_coeff = Vec::new();
        // vacuum has no links
        link_offsets.push(0);
        for n in 1..=spec.n_max {
            if sector_offsets[n + 1] == sector_offsets[n] {
                continue;
            }
            let sector = SectorBasis { m, n };
            let parent_sector = SectorBasis { m, n: n - 1 };
            let mut tuple = vec![0usize; n];
            let mut idx = sector_offsets[n];
            let mut parent = vec![0usize; n - 1];
            loop {
                // diagonal: (P - sum k)^2 + mu sum omega
                let mut pk = p;
                let mut field = 0.0;
                for &j in &tuple {
                    pk[0] -= modes[j][0];
                    pk[1] -= modes[j][1];
                    pk[2] -= modes[j][2];
                    field += omega[j];
                }
                diag[idx] =
                    pk[0] * pk[0] + pk[1] * pk[1] + pk[2] * pk[2] + params.mu * field;
                // one link per distinct mode in the tuple
                let mut t = 0;
                while t < n {
                    let j = tuple[t];
                    let mut mult = 1;
                    while t + mult < n && tuple[t + mult] == j {
                        mult += 1;
                    }
                    parent.clear();
                    parent.extend_from_slice(&tuple[..t]);
                    parent.extend_from_slice(&tuple[t + 1..]);
                    let pr = sector_offsets[n - 1] as u64 + parent_sector.rank(&bin, &parent);
                    link_parent.push(pr as u32);
                    link_coeff.push(coupling[j] * (mult as f64).sqrt());
                    t += mult;
                }
                link_offsets.push(link_parent.len() as u32);
                idx += 1;
                if !sector.next(&mut tuple) {
                    break;
                }
            }
            debug_assert_eq!(idx, sector_offsets[n + 1]);
        }
        Ok(Self {
            diag,
            link_offsets,
            link_parent,
            link_coeff,
            dim,
            sector_offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.sector_offsets[n]..self.sector_offsets[n + 1]
    }

    /// `out = H x`. Symmetric by construction: every stored link is applied
    /// in both directions with the same coefficient.
    pub fn matvec(&self, x: &[Complex64], out: &mut [Complex64]) {
        for i in 0..self.dim {
            out[i] = self.diag[i] * x[i];
        }
        for i in 0..self.dim {
            let lo = self.link_offsets[i] as usize;
            let hi = self.link_offsets[i + 1] as usize;
            for l in lo..hi {
                let pr = self.link_parent[l] as usize;
                let c = self.link_coeff[l];
                out[i] += c * x[pr];
                out[pr] += c * x[i];
            }
        }
    }

    /// Vacuum state of the stored basis.
    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut h_psi = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec(psi, &mut h_psi);
        lanczos::dot(psi, &h_psi).re
    }
}

/// Lattice analog of the self-consistent fixed point: `F` with the integral
/// replaced by the mode sum. Converges to `solve_g` as `h -> 0`.
pub fn solve_g_lattice(
    p_total: [f64; 3],
    lattice: &MomentumLattice,
    params: &ModelParams,
    tol: f64,
) -> Result<f64> {
    let p_abs = (p_total[0] * p_total[0] + p_total[1] * p_total[1] + p_total[2] * p_total[2]).sqrt();
    if p_abs >= params.mu / 2.0 {
        return Ok(0.0);
    }
    let w = lattice.weight();
    let mu = params.mu;
    // precompute per-mode quantities
    let mut v2w = Vec::with_capacity(lattice.modes.len());
    let mut base = Vec::with_capacity(lattice.modes.len());
    for k in &lattice.modes {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let rho = k2.sqrt();
        let v = params.v(rho);
        if v == 0.0 {
            continue;
        }
        let pk = p_total[0] * k[0] + p_total[1] * k[1] + p_total[2] * k[2];
        v2w.push(v * v * w);
        base.push(mu * params.dispersion.omega(rho) - 2.0 * pk + k2);
    }
    if v2w.is_empty() {
        return Ok(0.0);
    }
    let f = |x: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (vw, b) in v2w.iter().zip(&base) {
            let den = b + x;
            if den <= 0.0 {
                return Err(Error::Domain(format!(
                    "resonant lattice denominator {den} at x = {x}"
                )));
            }
            acc += vw / den;
        }
        Ok(mu * acc)
    };
    let fp = |x: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (vw, b) in v2w.iter().zip(&base) {
            let den = b + x;
            acc += vw / (den * den);
        }
        Ok(-mu * acc)
    };
    let upper = f(f64::MIN_POSITIVE.sqrt())? + 1.0;
    solve_fixed_point(f, Some(fp), upper, tol)
}

/// One oracle comparison run.
#[derive(Debug, Clone, Copy)]
pub struct FiberRun {
    pub error: f64,
    pub vacuum_pop: f64,
    pub energy_drift: f64,
    pub norm_dev: f64,
    pub g_lat: f64,
    pub stats: PropagationStats,
}

/// `|| e^{-i t H(P)} Omega - e^{-i t h(P)} Omega ||` with
/// `h(P) = P^2 - g_lat(P)`, plus the conservation diagnostics.
pub fn fiber_error(spec: &FiberSpec, t: f64, krylov_tol: f64, max_states: usize) -> Result<FiberRun> {
    let ham = FiberHamiltonian::build(spec, max_states)?;
    let mut psi = ham.vacuum();
    let e0 = ham.expectation(&psi);
    // energy scale for the relative drift; nonzero whenever V couples
    let mut h_psi = vec![Complex64::new(0.0, 0.0); ham.dim()];
    ham.matvec(&psi, &mut h_psi);
    let scale = norm(&h_psi).max(1e-300);
    let stats = krylov_propagate(|x, out| ham.matvec(x, out), &mut psi, t, krylov_tol, 25)?;
    let n1 = norm(&psi);
    let e1 = ham.expectation(&psi) / (n1 * n1);
    let g_lat = solve_g_lattice(spec.p_total, &spec.lattice, &spec.params, 1e-12)?;
    let p2 = spec.p_total.iter().map(|x| x * x).sum::<f64>();
    let phase = Complex64::from_polar(1.0, -t * (p2 - g_lat));
    let mut err2 = (psi[0] - phase).norm_sqr();
    for a in &psi[1..] {
        err2 += a.norm_sqr();
    }
    Ok(FiberRun {
        error: err2.sqrt(),
        vacuum_pop: psi[0].norm_sqr(),
        energy_drift: (e1 - e0).abs() / scale,
        norm_dev: (n1 - 1.0).abs(),
        g_lat,
        stats,
    })
}

/// Least-squares log-log fit `ln y = exponent * ln x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::domain("log-log fit needs at least 3 points"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("log-log fit needs distinct abscissae"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (exponent * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit { exponent, intercept, residual })
}

/// One row of a mu sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub mu: f64,
    pub t: f64,
    pub error: f64,
    pub vacuum_pop: f64,
    pub energy_drift: f64,
}

/// Run `fiber_error` across `mu_list` at fixed time `t` and fit the log-log
/// decay. Points at the noise floor (< 1e-12) are excluded from the fit.
pub fn sweep_mu(
    template: &FiberSpec,
    mu_list: &[f64],
    t: f64,
    krylov_tol: f64,
    max_states: usize,
) -> Result<(Vec<SweepRow>, ScalingFit)> {
    let mut rows = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        let mut spec = template.clone();
        spec.params.mu = mu;
        let run = fiber_error(&spec, t, krylov_tol, max_states)?;
        rows.push(SweepRow {
            mu,
            t,
            error: run.error,
            vacuum_pop: run.vacuum_pop,
            energy_drift: run.energy_drift,
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &rows {
        if r.error >= 1e-12 {
            xs.push(r.mu);
            ys.push(r.error);
        }
    }
    let fit = fit_loglog(&xs, &ys)?;
    Ok((rows, fit))
}

/// Continuum-limit diagnostic for `solve_g_lattice`.
pub fn lattice_g_convergence(
    p_total: [f64; 3],
    spacings: &[f64],
    k_max: f64,
    params: &ModelParams,
    tol: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let p_abs = (p_total.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let g_cont = solve_g(p_abs, params, tol)?;
    let mut out = Vec::with_capacity(spacings.len());
    for &h in spacings {
        let lat = MomentumLattice::new(h, k_max)?;
        let g_lat = solve_g_lattice(p_total, &lat, params, tol)?;
        out.push((h, g_lat, (g_lat - g_cont).abs()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dispersion, FormFactor};

    fn nelson(mu: f64, m: f64) -> ModelParams {
        ModelParams::new(mu, Dispersion { m }, FormFactor::Nelson { lambda: 1.0 }, 0.25)
    }

    fn small_spec(mu: f64, n_max: usize) -> FiberSpec {
        FiberSpec {
            p_total: [0.0, 0.0, 0.0],
            lattice: MomentumLattice::new(0.5, 1.0).unwrap(),
            n_max,
            params: nelson(mu, 0.0),
        }
    }

    #[test]
    fn lattice_symmetric_and_sized() {
        let lat = MomentumLattice::new(0.5, 1.0).unwrap();
        assert_eq!(lat.modes.len(), 32);
        for k in &lat.modes {
            let neg = [-k[0], -k[1], -k[2]];
            assert!(lat.modes.iter().any(|m| *m == neg));
        }
    }

    #[test]
    fn dimension_counts() {
        let spec = small_spec(10.0, 2);
        // 1 + 32 + C(33, 2)
        assert_eq!(spec.dimension(), 1 + 32 + 33 * 32 / 2);
        let h0 = FiberHamiltonian::build(&FiberSpec { n_max: 0, ..spec.clone() }, 1000).unwrap();
        assert_eq!(h0.dim(), 1);
        assert_eq!(h0.diag[0], 0.0);
    }

    #[test]
    fn one_boson_sector_structure() {
        let spec = small_spec(10.0, 1);
        let ham = FiberHamiltonian::build(&spec, 10_000).unwrap();
        assert_eq!(ham.dim(), 33);
        let c_expected: Vec<f64> = spec
            .lattice
            .modes
            .iter()
            .map(|k| {
                let rho = (k.iter().map(|x| x * x).sum::<f64>()).sqrt();
                10f64.sqrt() * spec.params.v(rho) * 0.5f64.powi(3).sqrt()
            })
            .collect();
        for (i, &c) in c_expected.iter().enumerate() {
            let s = ham.link_offsets[i + 1] as usize;
            let e = ham.link_offsets[i + 2] as usize;
            assert_eq!(e - s, 1);
            assert_eq!(ham.link_parent[s], 0);
            assert!((ham.link_coeff[s] - c).abs() < 1e-14);
        }
    }

    #[test]
    fn matvec_is_symmetric() {
        let spec = small_spec(8.0, 2);
        let ham = FiberHamiltonian::build(&spec, 10_000).unwrap();
        let d = ham.dim();
        let mut s = 77u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<Complex64> = (0..d).map(|_| Complex64::new(rnd(), rnd())).collect();
        let y: Vec<Complex64> = (0..d).map(|_| Complex64::new(rnd(), rnd())).collect();
        let mut hx = vec![Complex64::new(0.0, 0.0); d];
        let mut hy = vec![Complex64::new(0.0, 0.0); d];
        ham.matvec(&x, &mut hx);
        ham.matvec(&y, &mut hy);
        let a = lanczos::dot(&y, &hx);
        let b = lanczos::dot(&hy, &x);
        assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn single_mode_lattice_quadratic_fixed_point() {
        let params = nelson(10.0, 0.0);
        let k = [0.5, 0.0, 0.0];
        let lat = MomentumLattice { h: 0.5, k_max: 0.5, modes: vec![k] };
        let p = [0.1, 0.0, 0.0];
        let g = solve_g_lattice(p, &lat, &params, 1e-12).unwrap();
        let rho = 0.5;
        let v = params.v(rho);
        let w = lat.weight();
        let d = 10.0 * rho - 2.0 * (p[0] * k[0]) + rho * rho;
        // x (d + x) = mu v^2 w
        let expect = 0.5 * (-d + (d * d + 4.0 * 10.0 * v * v * w).sqrt());
        assert!((g - expect).abs() < 1e-10);
    }

    #[test]
    fn lattice_g_converges_to_continuum() {
        // cutoff-sphere mode counting makes the error oscillate in h, so the
        // trend is checked across quartered spacings rather than per halving
        let params = nelson(20.0, 0.0);
        let rows =
            lattice_g_convergence([0.0; 3], &[0.4, 0.2, 0.1, 0.05], 1.0, &params, 1e-10).unwrap();
        assert!(rows[2].2 < rows[0].2, "{rows:?}");
        assert!(rows[3].2 < rows[1].2, "{rows:?}");
        assert!(rows[3].2 < 0.05 * rows[3].1, "{rows:?}");
    }

    #[test]
    fn g_lattice_beyond_half_mu_and_decoupled() {
        let params = nelson(10.0, 0.0);
        let lat = MomentumLattice::new(0.5, 1.0).unwrap();
        assert_eq!(solve_g_lattice([0.0, 0.0, 6.0], &lat, &params, 1e-10).unwrap(), 0.0);
        let free = ModelParams::new(
            10.0,
            Dispersion::massless(),
            FormFactor::Tabulated { rho: vec![2.0, 3.0], v: vec![0.0, 0.0] },
            0.25,
        );
        assert_eq!(solve_g_lattice([0.0; 3], &lat, &free, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn fiber_error_zero_at_t_zero_and_small_t_taylor() {
        let spec = small_spec(10.0, 2);
        let run0 = fiber_error(&spec, 0.0, 1e-10, 100_000).unwrap();
        assert_eq!(run0.error, 0.0);
        // small-t: error ~ t sqrt(<H^2> + g_lat^2) at P = 0 (<H> = 0)
        let ham = FiberHamiltonian::build(&spec, 100_000).unwrap();
        let mut h_psi = vec![Complex64::new(0.0, 0.0); ham.dim()];
        ham.matvec(&ham.vacuum(), &mut h_psi);
        let h2 = h_psi.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let g_lat = solve_g_lattice([0.0; 3], &spec.lattice, &spec.params, 1e-12).unwrap();
        let t = 1e-4;
        let run = fiber_error(&spec, t, 1e-12, 100_000).unwrap();
        let expect = t * (h2 + g_lat * g_lat).sqrt();
        // g_lat relates <H^2> and the phase only to second order; allow 1%
        assert!(
            (run.error - expect).abs() <= 1e-2 * expect,
            "error {} vs Taylor {expect}",
            run.error
        );
    }

    #[test]
    fn conservation_contracts() {
        let spec = small_spec(12.0, 2);
        let run = fiber_error(&spec, 1.0, 1e-9, 100_000).unwrap();
        assert!(run.norm_dev <= 1e-10, "norm deviation {}", run.norm_dev);
        assert!(run.energy_drift <= 1e-8, "energy drift {}", run.energy_drift);
        assert!(run.error >= 0.0 && run.error <= 2.0);
    }

    #[test]
    fn vacuum_persists_more_at_larger_mu() {
        let a = fiber_error(&small_spec(8.0, 2), 1.0, 1e-9, 100_000).unwrap();
        let b = fiber_error(&small_spec(32.0, 2), 1.0, 1e-9, 100_000).unwrap();
        assert!(b.vacuum_pop > a.vacuum_pop, "{} vs {}", a.vacuum_pop, b.vacuum_pop);
        assert!(b.error < a.error);
    }

    #[test]
    fn loglog_fit_exact() {
        let xs = [4.0f64, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-6);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-6);
        assert!(fit.residual < 1e-12);
        assert!(fit_loglog(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn resource_limit_reported() {
        let spec = small_spec(10.0, 3);
        match FiberHamiltonian::build(&spec, 100) {
            Err(Error::Resource(msg)) => assert!(msg.contains("budget")),
            other => panic!("expected resource error, got {:?}", other.map(|h| h.dim())),
        }
    }
}
