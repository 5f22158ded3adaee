//! Command-line entry point: configuration loading, subcommand dispatch and
//! CSV emission.

use crate::effective_dynamics::{
    bound_rhs, nonconvergence_probe, propagate, region_boundary, region_member, BoundKind,
    WavePacket,
};
use crate::error::{Error, Result};
use crate::fock_oracle::{
    fiber_error, solve_g_lattice, sweep_mu, FiberSpec, MomentumLattice, DEFAULT_MAX_STATES,
};
use crate::generator::{
    alpha_coeff, eval_f, g_bounds, solve_g, EffectiveGenerator, GeneratorTable, PolyGenerator,
};
use crate::higher_order::{enumerate_sigma0, eval_fn, solve_gn, wick_pairings};
use crate::model::{
    mu_norm, nelson_mu_norm_sq_closed_form, norm_k_inv_sq, validate, Dispersion, FormFactor,
    ModelParams,
};
use crate::quadrature::{angular_log_kernel, integrate_mc, McConfig};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Serializable run configuration; every field has a default, flags override
/// file values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mu: f64,
    pub mass: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub form_factor: FormFactorConfig,
    pub tolerances: Tolerances,
    pub grid: GridConfig,
    pub mc: McSection,
    pub oracle: OracleSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mu: 100.0,
            mass: 0.0,
            epsilon: 0.25,
            seed: 0,
            form_factor: FormFactorConfig::default(),
            tolerances: Tolerances::default(),
            grid: GridConfig::default(),
            mc: McSection::default(),
            oracle: OracleSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FormFactorConfig {
    /// One of "nelson", "powerlaw", "tabulated".
    pub kind: String,
    pub lambda: f64,
    pub a: f64,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
}

impl Default for FormFactorConfig {
    fn default() -> Self {
        Self { kind: "nelson".into(), lambda: 1.0, a: 0.5, rho: Vec::new(), v: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub quad: f64,
    pub fixed_point: f64,
    pub krylov: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { quad: 1e-10, fixed_point: 1e-9, krylov: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: usize,
    /// Upper end of the radial grid; defaults to `epsilon * mu` when absent.
    pub p_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nodes: 64, p_max: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: usize,
    pub stratification: bool,
}

impl Default for McSection {
    fn default() -> Self {
        Self { samples: 100_000, stratification: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub h: f64,
    pub kmax: f64,
    pub nmax: usize,
    pub ptotal: [f64; 3],
    pub t_grid: Vec<f64>,
    pub max_states: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            h: 0.25,
            kmax: 1.25,
            nmax: 2,
            ptotal: [0.0, 0.0, 0.0],
            t_grid: vec![1.0],
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mu_list: Vec<f64>,
    pub t: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { mu_list: vec![4.0, 8.0, 16.0, 32.0, 64.0], t: 1.0 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("config parse: {e}")))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let form_factor = match self.form_factor.kind.as_str() {
            "nelson" => FormFactor::Nelson { lambda: self.form_factor.lambda },
            "powerlaw" => FormFactor::PowerLaw { a: self.form_factor.a, lambda: self.form_factor.lambda },
            "tabulated" => FormFactor::Tabulated {
                rho: self.form_factor.rho.clone(),
                v: self.form_factor.v.clone(),
            },
            other => return Err(Error::Usage(format!("unknown form factor kind '{other}'"))),
        };
        let mut params = ModelParams::new(
            self.mu,
            Dispersion { m: self.mass },
            form_factor,
            self.epsilon,
        );
        params.quad_tol = self.tolerances.quad;
        validate(&params)?;
        Ok(params)
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            samples: self.mc.samples,
            seed: self.seed,
            stratification: self.mc.stratification,
        }
    }

    fn p_max(&self) -> f64 {
        self.grid
            .p_max
            .unwrap_or(self.epsilon * self.mu)
            .min(self.mu / 2.0 * (1.0 - 1e-9))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "nelson-eff",
    about = "Effective dispersion generators of a tracer particle in a fast Bose field",
    version
)]
struct Cli {
    /// TOML configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    mass: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Momentum cutoff of the form factor.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Master seed for all Monte-Carlo randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker count (accepted for compatibility; execution is sequential).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Report the mu-dependent norms of the configured form factor.
    Norms {
        /// Norm exponent s.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Tabulate the self-consistent generator g(p) on a radial grid.
    SolveG(GridArgs),
    /// Tabulate g_1 and g_3 for a massive field (Monte-Carlo backed).
    Gn {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 8)]
        grid: usize,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        p_max: Option<f64>,
    },
    /// Power-series coefficients alpha_j(mu) and their large-mu limits.
    Coeffs {
        /// Largest (even) coefficient order.
        #[arg(long, default_value_t = 6)]
        j_max: u32,
    },
    /// Query the scaling region I_N, or emit its boundary polyline.
    Region {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Propagate a bump wave packet under a chosen generator.
    Propagate {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        p_lo: f64,
        #[arg(long)]
        p_hi: f64,
        /// "table", "inf", or an even polynomial order ("0", "2", ...).
        #[arg(long, default_value = "table")]
        generator: String,
    },
    /// Generator-breakdown (non-convergence) probe across a mu list.
    Probe {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e3, 1e4, 1e5])]
        mu_list: Vec<f64>,
    },
    /// Brute-force fiber-oracle comparison over a time grid.
    Oracle(OracleArgs),
    /// Oracle mu-sweep with a log-log scaling fit.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        mu_list: Option<Vec<f64>>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        kmax: Option<f64>,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Fast invariant suite over the numerical core.
    Selfcheck,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    p_max: Option<f64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    kmax: Option<f64>,
    #[arg(long)]
    nmax: Option<usize>,
    /// Total momentum as "x,y,z".
    #[arg(long)]
    ptotal: Option<String>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
}

/// CSV writer honoring the output contract: header row, full-precision
/// (round-trippable) decimal floats, NaN forbidden.
pub fn emit_csv<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::domain("CSV row width does not match header"));
        }
        let cells: Vec<String> = row
            .iter()
            .map(|v| {
                if v.is_nan() {
                    Err(Error::domain("NaN cell in CSV output"))
                } else {
                    Ok(format!("{v}"))
                }
            })
            .collect::<Result<_>>()?;
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_table(output: &Option<PathBuf>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    emit_csv(&mut buf, header, rows)?;
    match output {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("usage: {e}");
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(mu) = cli.mu {
        cfg.mu = mu;
    }
    if let Some(mass) = cli.mass {
        cfg.mass = mass;
    }
    if let Some(eps) = cli.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(lambda) = cli.lambda {
        cfg.form_factor.lambda = lambda;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let output = cli.output;
    match cli.cmd {
        Cmd::Norms { s } => {
            let params = cfg.model_params()?;
            let n_s = mu_norm(&params.form_factor, s, params.mu, &params.dispersion)?;
            let n_l2 = mu_norm(&params.form_factor, 0.0, params.mu, &params.dispersion)?;
            let kinv = norm_k_inv_sq(&params.form_factor, &params.dispersion, params.quad_tol)?;
            write_table(
                &output,
                &["mu", "s", "mu_norm", "l2_norm", "kinv_sq_norm"],
                &[vec![params.mu, s, n_s, n_l2, kinv]],
            )
        }
        Cmd::SolveG(args) => {
            let params = cfg.model_params()?;
            let nodes = args.grid.unwrap_or(cfg.grid.nodes);
            let p_max = args.p_max.unwrap_or_else(|| cfg.p_max());
            let table = GeneratorTable::build(&params, nodes, p_max, cfg.tolerances.fixed_point)?;
            let (ps, gs) = table.nodes();
            let rows: Vec<Vec<f64>> = ps.iter().zip(gs).map(|(&p, &g)| vec![p, g]).collect();
            write_table(&output, &["p", "g"], &rows)
        }
        Cmd::Gn { n, grid, samples, p_max } => {
            let params = cfg.model_params()?;
            if params.dispersion.is_massless() {
                return Err(Error::domain("gn requires a massive field; set --mass > 0"));
            }
            let mut mc = cfg.mc_config();
            if let Some(s) = samples {
                mc.samples = s;
            }
            let pm = p_max.unwrap_or_else(|| cfg.p_max());
            let tol = cfg.tolerances.fixed_point;
            let mut rows = Vec::with_capacity(grid);
            for i in 0..grid {
                let p = pm * i as f64 / (grid.max(2) - 1) as f64;
                let g1 = solve_gn(1, p, &params, tol, &mc)?;
                let g3 = solve_gn(n, p, &params, tol.max(1e-6), &mc)?;
                let mc_err = eval_fn(n, p, g3.max(1e-12), &params, &mc)?.error_estimate;
                rows.push(vec![p, g1, g3, mc_err]);
            }
            write_table(&output, &["p", "g1", "g3", "mc_err"], &rows)
        }
        Cmd::Coeffs { j_max } => {
            let params = cfg.model_params()?;
            let g0 = solve_g(0.0, &params, cfg.tolerances.fixed_point)?;
            let kinv = norm_k_inv_sq(&params.form_factor, &params.dispersion, params.quad_tol)?;
            let mut rows = Vec::new();
            for j in (0..=j_max).step_by(2) {
                let a = alpha_coeff(j, g0, &params)?;
                let limit = 2f64.powi(j as i32) / f64::from(j + 1) * kinv;
                rows.push(vec![f64::from(j), a, params.mu.powi(j as i32) * a, limit]);
            }
            write_table(&output, &["j", "alpha_j", "mu_j_alpha_j", "limit"], &rows)
        }
        Cmd::Region { n, a, b, samples } => match (a, b) {
            (Some(a), Some(b)) => {
                let inside = region_member(a, b, n)?;
                if inside {
                    println!("inside");
                } else {
                    let cap = 0.5f64.min(f64::from(n + 2) * (1.0 - a));
                    let constraint = if cap < 0.5 {
                        format!("(N+2)(1-a) = {cap}")
                    } else {
                        "1/2".to_string()
                    };
                    println!("outside: b = {b} >= min(1/2, (N+2)(1-a)) = {constraint}");
                }
                Ok(())
            }
            (None, None) => {
                let rows: Vec<Vec<f64>> =
                    region_boundary(n, samples).into_iter().map(|(a, b)| vec![a, b]).collect();
                write_table(&output, &["a", "b"], &rows)
            }
            _ => Err(Error::Usage("region needs both --a and --b, or neither".into())),
        },
        Cmd::Propagate { t, p_lo, p_hi, generator } => {
            let params = cfg.model_params()?;
            let phi = WavePacket::bump(p_lo, p_hi, 6)?;
            let tol = cfg.tolerances.fixed_point;
            let gen: Box<dyn EffectiveGenerator> = match generator.as_str() {
                "table" => Box::new(GeneratorTable::build(
                    &params,
                    cfg.grid.nodes,
                    p_hi.max(cfg.p_max()),
                    tol,
                )?),
                "inf" => Box::new(PolyGenerator::build(None, &params, tol)?),
                other => {
                    let n: u32 = other.parse().map_err(|_| {
                        Error::Usage(format!("generator must be 'table', 'inf' or an even order, got '{other}'"))
                    })?;
                    Box::new(PolyGenerator::build(Some(n), &params, tol)?)
                }
            };
            let moved = propagate(&phi, t, gen.as_ref())?;
            let rows: Vec<Vec<f64>> = moved
                .p
                .iter()
                .zip(&moved.amplitudes)
                .map(|(&p, a)| vec![p, a.re, a.im, a.norm()])
                .collect();
            write_table(&output, &["p", "re", "im", "abs"], &rows)
        }
        Cmd::Probe { n, a, tau, mu_list } => {
            let params = cfg.model_params()?;
            let rows = nonconvergence_probe(n, a, tau, &mu_list, &params, cfg.tolerances.fixed_point)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.mu, r.t, r.distance, r.lower_proxy])
                .collect();
            write_table(&output, &["mu", "t", "distance", "lower_proxy"], &table)
        }
        Cmd::Oracle(args) => {
            let params = cfg.model_params()?;
            let h = args.h.unwrap_or(cfg.oracle.h);
            let kmax = args.kmax.unwrap_or(cfg.oracle.kmax);
            let nmax = args.nmax.unwrap_or(cfg.oracle.nmax);
            let ptotal = match &args.ptotal {
                Some(s) => parse_vec3(s)?,
                None => cfg.oracle.ptotal,
            };
            let t_grid = args.t_grid.unwrap_or_else(|| cfg.oracle.t_grid.clone());
            let spec = FiberSpec {
                p_total: ptotal,
                lattice: MomentumLattice::new(h, kmax)?,
                n_max: nmax,
                params,
            };
            let mut rows = Vec::with_capacity(t_grid.len());
            for &t in &t_grid {
                let run = fiber_error(&spec, t, cfg.tolerances.krylov, cfg.oracle.max_states)?;
                rows.push(vec![spec.params.mu, t, run.error, run.vacuum_pop, run.energy_drift]);
            }
            write_table(&output, &["mu", "t", "error", "vacuum_pop", "energy_drift"], &rows)
        }
        Cmd::Sweep { mu_list, t, h, kmax, nmax } => {
            let params = cfg.model_params()?;
            let mu_list = mu_list.unwrap_or_else(|| cfg.sweep.mu_list.clone());
            let t = t.unwrap_or(cfg.sweep.t);
            let spec = FiberSpec {
                p_total: cfg.oracle.ptotal,
                lattice: MomentumLattice::new(h.unwrap_or(cfg.oracle.h), kmax.unwrap_or(cfg.oracle.kmax))?,
                n_max: nmax.unwrap_or(cfg.oracle.nmax),
                params,
            };
            let (rows, fit) = sweep_mu(&spec, &mu_list, t, cfg.tolerances.krylov, cfg.oracle.max_states)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.mu, r.t, r.error, r.vacuum_pop, r.energy_drift])
                .collect();
            write_table(&output, &["mu", "t", "error", "vacuum_pop", "energy_drift"], &table)?;
            eprintln!(
                "fit: exponent={} intercept={} residual={}",
                fit.exponent, fit.intercept, fit.residual
            );
            Ok(())
        }
        Cmd::Selfcheck => selfcheck(&cfg),
    }
}

fn parse_vec3(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("expected 'x,y,z', got '{s}'")));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad component '{p}' in '{s}'")))?;
    }
    Ok(out)
}

/// Fast invariant suite; prints one line per check and fails on the first
/// violated invariant.
fn selfcheck(cfg: &RunConfig) -> Result<()> {
    let check = |name: &str, ok: bool| -> Result<()> {
        if ok {
            println!("ok: {name}");
            Ok(())
        } else {
            Err(Error::Accuracy { message: format!("selfcheck failed: {name}"), best: f64::NAN })
        }
    };
    // closed-form mu-norm
    let d = Dispersion::massless();
    let v = FormFactor::Nelson { lambda: 1.0 };
    let n = mu_norm(&v, 1.0, 10.0, &d)?;
    check(
        "nelson mu-norm closed form",
        (n * n - nelson_mu_norm_sq_closed_form(10.0, 1.0)).abs() <= 1e-8 * n * n,
    )?;
    // angular kernel identity
    let k = angular_log_kernel(2.0, 1.0)?;
    check(
        "angular kernel atanh identity",
        (k - 4.0 * std::f64::consts::PI * 0.5f64.atanh()).abs() < 1e-12,
    )?;
    // fixed point residual
    let params = ModelParams::new(100.0, d, v.clone(), 0.25);
    let g0 = solve_g(0.0, &params, 1e-10)?;
    check("fixed point residual", (g0 - eval_f(0.0, g0, &params)?).abs() <= 1e-10)?;
    let (lo, hi) = g_bounds(&params, 0.02)?;
    check("a-priori bracket contains g(0)", lo <= g0 && g0 <= hi)?;
    // combinatorics
    let counts: Vec<usize> = (1..=6).map(|m| enumerate_sigma0(2 * m).len()).collect();
    check("sigma0 catalan counts", counts == vec![1, 1, 2, 5, 14, 42])?;
    let pair_count: usize = enumerate_sigma0(6).iter().map(|s| wick_pairings(s).len()).sum();
    check("sigma0(6) wick pairings", pair_count == 10)?;
    // region examples
    check(
        "region membership",
        region_member(0.0, 0.49, 2)? && !region_member(0.95, 0.3, 2)? && region_member(0.95, 0.3, 6)?,
    )?;
    // MC determinism under the configured seed
    let mc = cfg.mc_config();
    let r1 = integrate_mc(|x| x[0] * x[1], &[(0.0, 1.0), (0.0, 1.0)], &mc)?;
    let r2 = integrate_mc(|x| x[0] * x[1], &[(0.0, 1.0), (0.0, 1.0)], &mc)?;
    check("monte-carlo determinism", r1.value.to_bits() == r2.value.to_bits())?;
    // small oracle conservation run
    let spec = FiberSpec {
        p_total: [0.0; 3],
        lattice: MomentumLattice::new(0.5, 1.0)?,
        n_max: 2,
        params: ModelParams::new(16.0, d, v, 0.25),
    };
    let run = fiber_error(&spec, 1.0, 1e-9, 200_000)?;
    check("oracle unitarity", run.norm_dev <= 1e-10)?;
    check("oracle energy conservation", run.energy_drift <= 1e-8)?;
    let g_lat = solve_g_lattice([0.0; 3], &spec.lattice, &spec.params, 1e-10)?;
    check("lattice generator positive", g_lat > 0.0)?;
    // bound-evaluator sanity
    let b = bound_rhs(BoundKind::Thm1, 0.0, 1.0, &params)?;
    check("bound evaluator finite", b.is_finite() && b > 0.0)?;
    println!("selfcheck: all invariants hold");
    Ok(())
}
