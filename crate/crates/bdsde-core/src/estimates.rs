//! Empirical verification of the a priori estimates and of the
//! truncation/approximation mechanics on solved ensembles.
//!
//! The underlying inequalities hold with unspecified constants, so they are
//! verified in their strongest falsifiable form: the left/right sides are
//! measured, their ratio must be finite, invariant under data scaling and
//! stable under grid refinement. The checkers never assert a particular
//! constant.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::brownian::{sample_brownian_coupled, BrownianBundle};
use crate::calculus::INDICATOR_FLOOR;
use crate::catalog::ClosedForm;
use crate::error::{Error, Result};
use crate::generator::{EvalCtx, GeneratorSpec};
use crate::grid::{make_grid, TimeGrid};
use crate::linalg::{dot, norm};
use crate::math;
use crate::solver::{lp_norms, solve_bdsde, SolutionEnsemble, SolverConfig};
use crate::truncation::{build_h_n, build_step2_data, TruncationParams};

/// Which estimate a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaId {
    /// `Z` controlled by `Y` and the data.
    L31,
    /// Full `S^p × M^p` bound by the data.
    L32,
    /// The pathwise `L^p` inequality (reported per path elsewhere).
    C22,
}

/// Measured sides of one estimate. `ratio = lhs / max(rhs sum, floor)`;
/// terms that do not appear in the given lemma are zero.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub lemma: LemmaId,
    pub lhs: f64,
    pub supy_term: f64,
    pub xi_term: f64,
    pub f0_term: f64,
    pub g0_term: f64,
    pub mixed_g0_term: f64,
    pub ratio: f64,
    pub floor: f64,
    pub mc_stderr: f64,
}

impl EstimateReport {
    pub fn rhs_sum(&self) -> f64 {
        self.supy_term + self.xi_term + self.f0_term + self.g0_term + self.mixed_g0_term
    }
}

const RATIO_FLOOR: f64 = 1e-12;

struct PathTerms {
    z_quad_pow: Vec<f64>,
    sup_y_pow: Vec<f64>,
    xi_pow: Vec<f64>,
    f0_int_pow: Vec<f64>,
    g0_quad_pow: Vec<f64>,
    mixed: Vec<f64>,
}

fn path_terms(
    sol: &SolutionEnsemble,
    gen: &GeneratorSpec,
    bundle: &BrownianBundle,
    p: f64,
) -> Result<PathTerms> {
    if sol.dim_k() != gen.dim_k {
        return Err(Error::dimension(format!(
            "ensemble dimension {} does not match generator dimension {}",
            sol.dim_k(),
            gen.dim_k
        )));
    }
    let off = sol.path_offset();
    if off + sol.paths() > bundle.paths() {
        return Err(Error::dimension(
            "ensemble path range exceeds the bundle",
        ));
    }
    let grid = sol.grid().clone();
    let (paths, n) = (sol.paths(), grid.steps());
    let dt = grid.dt();
    let mut terms = PathTerms {
        z_quad_pow: vec![0.0; paths],
        sup_y_pow: vec![0.0; paths],
        xi_pow: vec![0.0; paths],
        f0_int_pow: vec![0.0; paths],
        g0_quad_pow: vec![0.0; paths],
        mixed: vec![0.0; paths],
    };
    for m in 0..paths {
        let mut z_quad = 0.0;
        let mut sup_y = 0.0_f64;
        let mut f0_int = 0.0;
        let mut g0_quad = 0.0;
        let mut mixed = 0.0;
        for i in 0..n {
            let y_i = sol.y().at(m, i);
            let z_i = sol.z().at(m, i);
            sup_y = sup_y.max(norm(y_i));
            z_quad += dot(z_i, z_i) * dt;
            let ctx = EvalCtx::new(i, bundle.w_at(off + m, i));
            let t_i = grid.node(i);
            let f0 = gen.f0(t_i, &ctx);
            let g0 = gen.g0(t_i, &ctx);
            f0_int += norm(&f0) * dt;
            let g0_sq = dot(&g0, &g0);
            g0_quad += g0_sq * dt;
            let r = norm(y_i);
            if r > INDICATOR_FLOOR {
                mixed += math::powf(r, p - 2.0) * g0_sq * dt;
            }
        }
        sup_y = sup_y.max(norm(sol.y().at(m, n)));
        terms.z_quad_pow[m] = math::powf(z_quad, p / 2.0);
        terms.sup_y_pow[m] = math::powf(sup_y, p);
        terms.xi_pow[m] = math::powf(norm(sol.y().at(m, n)), p);
        terms.f0_int_pow[m] = math::powf(f0_int, p);
        terms.g0_quad_pow[m] = math::powf(g0_quad, p / 2.0);
        terms.mixed[m] = mixed;
    }
    Ok(terms)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linearized Monte Carlo standard error of `mean(lhs) / mean(rhs)`.
fn ratio_stderr(lhs: &[f64], rhs: &[f64], ratio: f64, denom: f64) -> f64 {
    let mf = lhs.len() as f64;
    let mut s2 = 0.0;
    let centered_mean = mean(lhs) - ratio * mean(rhs);
    for (a, b) in lhs.iter().zip(rhs) {
        let v = a - ratio * b - centered_mean;
        s2 += v * v;
    }
    math::sqrt(s2 / (mf * (mf - 1.0).max(1.0))) / denom
}

/// Measures `E[(∫|Z|²)^{p/2}]` against
/// `E[sup|Y|^p + (∫|f⁰|)^p + (∫|g⁰|²)^{p/2}]`.
pub fn check_lemma31(
    sol: &SolutionEnsemble,
    gen: &GeneratorSpec,
    bundle: &BrownianBundle,
    p: f64,
) -> Result<EstimateReport> {
    let t = path_terms(sol, gen, bundle, p)?;
    let lhs = mean(&t.z_quad_pow);
    let supy = mean(&t.sup_y_pow);
    let f0 = mean(&t.f0_int_pow);
    let g0 = mean(&t.g0_quad_pow);
    let denom = (supy + f0 + g0).max(RATIO_FLOOR);
    let ratio = lhs / denom;
    let rhs_per_path: Vec<f64> = (0..sol.paths())
        .map(|m| t.sup_y_pow[m] + t.f0_int_pow[m] + t.g0_quad_pow[m])
        .collect();
    Ok(EstimateReport {
        lemma: LemmaId::L31,
        lhs,
        supy_term: supy,
        xi_term: 0.0,
        f0_term: f0,
        g0_term: g0,
        mixed_g0_term: 0.0,
        ratio,
        floor: RATIO_FLOOR,
        mc_stderr: ratio_stderr(&t.z_quad_pow, &rhs_per_path, ratio, denom),
    })
}

/// Measures `E[sup|Y|^p + (∫|Z|²)^{p/2}]` against
/// `E[|ξ|^p + (∫|f⁰|)^p + (∫|g⁰|²)^{p/2} + ∫|Y|^{p−2} 1_{Y≠0} |g⁰|² ]`.
///
/// The mixed term contains the solution itself; it is evaluated on the
/// solved ensemble and reported as measured.
pub fn check_lemma32(
    sol: &SolutionEnsemble,
    gen: &GeneratorSpec,
    bundle: &BrownianBundle,
    p: f64,
) -> Result<EstimateReport> {
    let t = path_terms(sol, gen, bundle, p)?;
    let paths = sol.paths();
    let lhs_per_path: Vec<f64> = (0..paths)
        .map(|m| t.sup_y_pow[m] + t.z_quad_pow[m])
        .collect();
    let rhs_per_path: Vec<f64> = (0..paths)
        .map(|m| t.xi_pow[m] + t.f0_int_pow[m] + t.g0_quad_pow[m] + t.mixed[m])
        .collect();
    let lhs = mean(&lhs_per_path);
    let xi = mean(&t.xi_pow);
    let f0 = mean(&t.f0_int_pow);
    let g0 = mean(&t.g0_quad_pow);
    let mixed = mean(&t.mixed);
    let denom = (xi + f0 + g0 + mixed).max(RATIO_FLOOR);
    let ratio = lhs / denom;
    Ok(EstimateReport {
        lemma: LemmaId::L32,
        lhs,
        supy_term: 0.0,
        xi_term: xi,
        f0_term: f0,
        g0_term: g0,
        mixed_g0_term: mixed,
        ratio,
        floor: RATIO_FLOOR,
        mc_stderr: ratio_stderr(&lhs_per_path, &rhs_per_path, ratio, denom),
    })
}

/// `S^p` / `M^p` distance between two ensembles on the same grid, with
/// linearized standard errors.
#[derive(Debug, Clone, Copy)]
pub struct DistanceReport {
    pub s_p: f64,
    pub m_p: f64,
    pub s_p_stderr: f64,
    pub m_p_stderr: f64,
}

pub fn ensemble_distance(
    a: &SolutionEnsemble,
    b: &SolutionEnsemble,
    p: f64,
) -> Result<DistanceReport> {
    if a.paths() != b.paths() || a.dim_k() != b.dim_k() || a.grid() != b.grid() {
        return Err(Error::dimension(
            "ensembles must share path count, dimension and grid",
        ));
    }
    if !(p > 0.0) {
        return Err(Error::precondition("p must be positive"));
    }
    let (paths, n) = (a.paths(), a.grid().steps());
    let dt = a.grid().dt();
    let k = a.dim_k();
    let mut sup_pow = vec![0.0; paths];
    let mut quad_pow = vec![0.0; paths];
    let mut diff = vec![0.0; k];
    for m in 0..paths {
        let mut sup = 0.0_f64;
        for i in 0..=n {
            let (ya, yb) = (a.y().at(m, i), b.y().at(m, i));
            for c in 0..k {
                diff[c] = ya[c] - yb[c];
            }
            sup = sup.max(norm(&diff));
        }
        sup_pow[m] = math::powf(sup, p);
        let mut quad = 0.0;
        for i in 0..n {
            let (za, zb) = (a.z().at(m, i), b.z().at(m, i));
            let mut d2 = 0.0;
            for c in 0..za.len() {
                let d = za[c] - zb[c];
                d2 += d * d;
            }
            quad += d2 * dt;
        }
        quad_pow[m] = math::powf(quad, p / 2.0);
    }
    let outer = (1.0f64).min(1.0 / p);
    let report = |pow: &[f64]| -> (f64, f64) {
        let m = mean(pow);
        let mf = pow.len() as f64;
        let mut s2 = 0.0;
        for v in pow {
            s2 += (v - m) * (v - m);
        }
        let se_mean = math::sqrt(s2 / (mf * (mf - 1.0).max(1.0)));
        if m <= 0.0 {
            (0.0, 0.0)
        } else {
            let d = math::powf(m, outer);
            (d, outer * math::powf(m, outer - 1.0) * se_mean)
        }
    };
    let (s_p, s_p_stderr) = report(&sup_pow);
    let (m_p, m_p_stderr) = report(&quad_pow);
    Ok(DistanceReport {
        s_p,
        m_p,
        s_p_stderr,
        m_p_stderr,
    })
}

/// Distances between consecutive truncation levels of the general-stage
/// approximation.
#[derive(Debug, Clone)]
pub struct CauchyStudy {
    pub n_values: Vec<u32>,
    pub p: f64,
    /// `distances[j]` compares levels `n_values[j]` and `n_values[j+1]`.
    pub sp_distances: Vec<f64>,
    pub sp_stderrs: Vec<f64>,
    pub mp_distances: Vec<f64>,
    pub mp_stderrs: Vec<f64>,
}

/// Solves the truncated problems `(q_n(ξ), f − f⁰ + q_n(f⁰), g)` for each
/// level on shared seeds and measures consecutive `S^p`/`M^p` distances.
pub fn cauchy_study_step2(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    n_values: &[u32],
    p: f64,
    config: &SolverConfig,
) -> Result<CauchyStudy> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::precondition(format!(
            "the general-stage study targets p strictly between 1 and 2, got {p}"
        )));
    }
    if n_values.len() < 2 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "n_values must be strictly increasing with at least two levels",
        ));
    }
    let mut solutions = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let truncated = build_step2_data(gen, n);
        let sol = solve_bdsde(&truncated, grid, bundle, config).map_err(|e| {
            Error::config(format!("solver failed at truncation level n = {n}: {e}"))
        })?;
        solutions.push(sol);
    }
    let mut study = CauchyStudy {
        n_values: n_values.to_vec(),
        p,
        sp_distances: Vec::new(),
        sp_stderrs: Vec::new(),
        mp_distances: Vec::new(),
        mp_stderrs: Vec::new(),
    };
    for pair in solutions.windows(2) {
        let d = ensemble_distance(&pair[0], &pair[1], p)?;
        study.sp_distances.push(d.s_p);
        study.sp_stderrs.push(d.s_p_stderr);
        study.mp_distances.push(d.m_p);
        study.mp_stderrs.push(d.m_p_stderr);
    }
    Ok(study)
}

/// Direct Monte Carlo of `E|ξ_{2n} − ξ_n|^p` on the terminal variable
/// alone; the dominated-convergence oracle for the Cauchy study.
pub fn terminal_truncation_gap(
    gen: &GeneratorSpec,
    bundle: &BrownianBundle,
    n_low: u32,
    n_high: u32,
    p: f64,
) -> f64 {
    let d = gen.dim_d;
    let mut acc = 0.0;
    for m in 0..bundle.paths() {
        let view = crate::generator::WPathView::new(bundle.w_path(m), d);
        let xi = (gen.xi)(&view);
        let low = crate::truncation::q_n(&xi, n_low as f64);
        let high = crate::truncation::q_n(&xi, n_high as f64);
        let mut d2 = 0.0;
        for (a, b) in high.iter().zip(&low) {
            d2 += (a - b) * (a - b);
        }
        acc += math::powf(math::sqrt(d2), p);
    }
    acc / bundle.paths() as f64
}

/// Boundedness probe of the bounded-data stage.
#[derive(Debug, Clone, Copy)]
pub struct Step1Report {
    /// Ensemble maximum of `|Y|` over all paths and steps.
    pub sup_y_inf: f64,
    /// The state cutoff the maximum is compared against.
    pub r: f64,
    /// Discrete `M²` norm of `Z`.
    pub z_m2: f64,
    /// Paths whose running maximum exceeds `r`.
    pub violations: usize,
    pub paths: usize,
}

/// Solves with the truncated drift `h_n` and checks `‖Y‖_∞ ≤ r`.
///
/// Requires `g(·,0,0) ≡ 0`; the caller certifies the boundedness of `ξ`
/// and `f⁰` (the probe reports, it does not re-derive the bounds).
pub fn step1_boundedness_probe(
    gen: &GeneratorSpec,
    params: TruncationParams,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
) -> Result<Step1Report> {
    let w_origin = vec![0.0; gen.dim_d];
    let ctx = EvalCtx::new(0, &w_origin);
    let g0 = gen.g0(0.0, &ctx);
    if norm(&g0) > 1e-12 {
        return Err(Error::precondition(format!(
            "the boundedness stage requires g(·,0,0) = 0, got |g⁰| = {}",
            norm(&g0)
        )));
    }
    let truncated = build_h_n(gen, params);
    let sol = solve_bdsde(&truncated, grid, bundle, config)?;
    let (paths, n) = (sol.paths(), grid.steps());
    let mut sup_all = 0.0_f64;
    let mut violations = 0usize;
    for m in 0..paths {
        let mut sup = 0.0_f64;
        for i in 0..=n {
            sup = sup.max(norm(sol.y().at(m, i)));
        }
        sup_all = sup_all.max(sup);
        if sup > params.r {
            violations += 1;
        }
    }
    let z_m2 = lp_norms(&sol, 2.0)?.m_p;
    Ok(Step1Report {
        sup_y_inf: sup_all,
        r: params.r,
        z_m2,
        violations,
        paths,
    })
}

/// Gap between the `Y_0` estimates of two solver runs.
#[derive(Debug, Clone, Copy)]
pub struct UniquenessReport {
    pub y0_gap: f64,
    /// Combined Monte Carlo standard error of the two estimates
    /// (block-resampled; see [`y0_block_stderr`]).
    pub stderr: f64,
    pub y0_a: f64,
    pub y0_b: f64,
}

/// Number of path blocks used by the resampled standard errors.
pub const STDERR_BLOCKS: usize = 8;

/// Monte Carlo standard error of the full-ensemble `Y_0` estimate by block
/// resampling: the ensemble is split into disjoint path blocks, each solved
/// independently, and the block spread is scaled down by `sqrt(blocks)`.
///
/// The per-step regression injects coefficient noise that is common to all
/// paths of one solve, so the naive across-path spread underestimates the
/// estimator noise; disjoint blocks see independent copies of it.
pub fn y0_block_stderr(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
    blocks: usize,
) -> Result<f64> {
    if blocks < 2 || config.paths / blocks < 2 {
        return Err(Error::config(format!(
            "block stderr needs at least 2 blocks of 2 paths, got {blocks} blocks of {}",
            config.paths / blocks.max(1)
        )));
    }
    let block_size = config.paths / blocks;
    let mut estimates = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut cfg = config.clone();
        cfg.path_offset = config.path_offset + b * block_size;
        cfg.paths = block_size;
        let sol = solve_bdsde(gen, grid, bundle, &cfg)?;
        estimates.push(sol.diagnostics.y0.clone());
    }
    let k = gen.dim_k;
    let mut worst = 0.0_f64;
    for a in 0..k {
        let vals: Vec<f64> = estimates.iter().map(|y| y[a]).collect();
        let mean = vals.iter().sum::<f64>() / blocks as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (blocks as f64 - 1.0);
        // Var(block estimate) ≈ blocks · Var(full estimate)
        worst = worst.max(math::sqrt(var / blocks as f64));
    }
    Ok(worst)
}

/// Solves twice — same data, different scheme/seeds per the two configs
/// and bundles — and reports `|Y_0^{(a)} − Y_0^{(b)}|` with a combined
/// block-resampled standard error.
pub fn uniqueness_probe(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle_a: &BrownianBundle,
    bundle_b: &BrownianBundle,
    config_a: &SolverConfig,
    config_b: &SolverConfig,
) -> Result<UniquenessReport> {
    let sol_a = solve_bdsde(gen, grid, bundle_a, config_a)?;
    let sol_b = solve_bdsde(gen, grid, bundle_b, config_b)?;
    let ya = &sol_a.diagnostics.y0;
    let yb = &sol_b.diagnostics.y0;
    let mut gap2 = 0.0;
    for (a, b) in ya.iter().zip(yb) {
        gap2 += (a - b) * (a - b);
    }
    let se_a = y0_block_stderr(gen, grid, bundle_a, config_a, STDERR_BLOCKS)?;
    let se_b = y0_block_stderr(gen, grid, bundle_b, config_b, STDERR_BLOCKS)?;
    Ok(UniquenessReport {
        y0_gap: math::sqrt(gap2),
        stderr: math::sqrt(se_a * se_a + se_b * se_b),
        y0_a: ya.first().copied().unwrap_or(0.0),
        y0_b: yb.first().copied().unwrap_or(0.0),
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub steps: usize,
    /// RMS over paths and grid nodes of `Y_discrete − Y_closed_form`.
    pub error: f64,
    /// `log2(error(N) / error(2N))`; absent on the last row.
    pub empirical_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Solves a closed-form problem over a ladder of grids with coupled seeds
/// and tabulates the discretization error.
///
/// The ladder shares Brownian increments through the refinement anchor
/// `max(n_values)`, so differences between levels are dominated by the
/// scheme bias rather than Monte Carlo noise.
pub fn convergence_study(
    gen: &GeneratorSpec,
    closed_form: ClosedForm,
    horizon: f64,
    n_values: &[usize],
    paths: usize,
    master_seed: u64,
    config: &SolverConfig,
) -> Result<ConvergenceTable> {
    if gen.dim_k != 1 || gen.dim_d != 1 || gen.dim_l != 1 {
        return Err(Error::precondition(
            "registered closed forms are one-dimensional",
        ));
    }
    if n_values.is_empty() {
        return Err(Error::config("n_values must not be empty"));
    }
    let anchor = *n_values.iter().max().expect("nonempty");
    let mut errors = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let grid = make_grid(horizon, n)?;
        let bundle = sample_brownian_coupled(&grid, paths, 1, 1, master_seed, anchor)?;
        let mut cfg = config.clone();
        cfg.paths = paths;
        let sol = solve_bdsde(gen, &grid, &bundle, &cfg)?;
        let b_idx = cfg.frozen_b_index;
        let b_terminal = bundle.b_at(b_idx, n)[0];
        let mut err2 = 0.0;
        let mut count = 0usize;
        for m in 0..paths {
            for i in 0..=n {
                let t = grid.node(i);
                let exact = closed_form.y(
                    t,
                    horizon,
                    bundle.w_at(m, i)[0],
                    bundle.b_at(b_idx, i)[0],
                    b_terminal,
                );
                let gap = sol.y().at(m, i)[0] - exact;
                err2 += gap * gap;
                count += 1;
            }
        }
        errors.push((n, math::sqrt(err2 / count as f64)));
    }
    let mut rows = Vec::with_capacity(errors.len());
    for j in 0..errors.len() {
        let rate = if j + 1 < errors.len() && errors[j + 1].1 > 0.0 {
            Some(math::ln(errors[j].1 / errors[j + 1].1) / math::ln(2.0))
        } else {
            None
        };
        rows.push(ConvergenceRow {
            steps: errors[j].0,
            error: errors[j].1,
            empirical_rate: rate,
        });
    }
    Ok(ConvergenceTable { rows })
}

/// Result of the Gaussian-integral moment oracle.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub p_moment_finite: bool,
    pub square_moment_finite: bool,
    /// Successive-difference contraction ratio observed for the p-th moment
    /// integral (`< 1` means convergent).
    pub p_diff_ratio: f64,
    pub square_diff_ratio: f64,
}

/// Tail integral `2 ∫_δ^∞ x^{-q} φ_σ²(x) dx` of the folded Gaussian, by
/// adaptive Simpson quadrature in logarithmic coordinates.
pub fn gaussian_negative_moment_tail(q: f64, variance: f64, delta: f64) -> f64 {
    let sigma2 = variance;
    let normal = 2.0 / math::sqrt(math::TWO_PI * sigma2);
    let f = |u: f64| {
        // x = e^u, dx = e^u du, integrand x^{-q} φ(x) dx
        let x = math::exp(u);
        normal * math::exp((1.0 - q) * u) * math::exp(-x * x / (2.0 * sigma2))
    };
    let hi = math::ln(12.0 * math::sqrt(sigma2));
    adaptive_simpson(&f, math::ln(delta), hi, 1e-12, 40)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || math::abs(delta) <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Verifies, by quadrature alone, that `E|W_T|^{-β p} < ∞` while
/// `E|W_T|^{-2β} = ∞`: the tail integral's successive differences over a
/// shrinking `δ` chain contract for a convergent integral and grow for a
/// divergent one.
pub fn verify_heavy_tail_moments(beta: f64, p: f64, variance: f64) -> Result<MomentCheck> {
    if !(beta > 0.0) || !(p > 0.0) || !(variance > 0.0) {
        return Err(Error::config(
            "beta, p and the variance must all be positive",
        ));
    }
    let chain = [1e-2, 1e-4, 1e-6, 1e-8];
    let classify = |q: f64| -> (bool, f64) {
        let values: Vec<f64> = chain
            .iter()
            .map(|&d| gaussian_negative_moment_tail(q, variance, d))
            .collect();
        let d1 = values[1] - values[0];
        let d2 = values[2] - values[1];
        let d3 = values[3] - values[2];
        let ratio = if d2.abs() > 0.0 { d3 / d2 } else { 0.0 };
        let consistent = if d1.abs() > 0.0 { d2 / d1 } else { 0.0 };
        // convergent integrals contract (theory: 100^{1-q} < 1), divergent
        // ones grow (100^{q-1} > 1)
        let finite = ratio < 0.95 && consistent < 0.95;
        (finite, ratio)
    };
    let (p_finite, p_ratio) = classify(beta * p);
    let (sq_finite, sq_ratio) = classify(2.0 * beta);
    Ok(MomentCheck {
        p_moment_finite: p_finite,
        square_moment_finite: sq_finite,
        p_diff_ratio: p_ratio,
        square_diff_ratio: sq_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::sample_brownian;
    use crate::catalog;
    use crate::truncation::step1_radius;

    fn quick_config(paths: usize, degree: usize) -> SolverConfig {
        SolverConfig {
            paths,
            basis_degree: degree,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn zero_data_gives_zero_sides_and_floored_ratio() {
        let grid = make_grid(1.0, 8).unwrap();
        let bundle = sample_brownian(&grid, 50, 1, 1, 3).unwrap();
        let entry = catalog::build("zero", None, Some(catalog::XiKind::Const(0.0))).unwrap();
        let sol = solve_bdsde(&entry.gen, &grid, &bundle, &quick_config(50, 1)).unwrap();
        for check in [check_lemma31, check_lemma32] {
            let report = check(&sol, &entry.gen, &bundle, 2.0).unwrap();
            assert_eq!(report.lhs, 0.0);
            assert_eq!(report.rhs_sum(), 0.0);
            assert_eq!(report.ratio, 0.0);
        }
    }

    #[test]
    fn lemma31_martingale_ratio_is_at_most_one() {
        // lhs ≈ T while the supY term alone is E sup W² ≥ T.
        let grid = make_grid(1.0, 32).unwrap();
        let m = 3000;
        let bundle = sample_brownian(&grid, m, 1, 1, 17).unwrap();
        let entry = catalog::build("zero", None, None).unwrap();
        let sol = solve_bdsde(&entry.gen, &grid, &bundle, &quick_config(m, 1)).unwrap();
        let report = check_lemma31(&sol, &entry.gen, &bundle, 2.0).unwrap();
        assert!((report.lhs - 1.0).abs() < 0.1, "lhs {}", report.lhs);
        assert!(report.ratio <= 1.0, "ratio {}", report.ratio);
        assert!(report.ratio > 0.3, "ratio suspiciously small");
        assert!(report.mc_stderr > 0.0 && report.mc_stderr < 0.1);
    }

    #[test]
    fn lemma32_reduces_to_three_terms_when_g0_vanishes() {
        let grid = make_grid(1.0, 16).unwrap();
        let bundle = sample_brownian(&grid, 500, 1, 1, 29).unwrap();
        let entry = catalog::build("monotone_cubic", None, None).unwrap();
        let sol = solve_bdsde(&entry.gen, &grid, &bundle, &quick_config(500, 2)).unwrap();
        let report = check_lemma32(&sol, &entry.gen, &bundle, 1.5).unwrap();
        assert_eq!(report.mixed_g0_term, 0.0);
        assert_eq!(report.g0_term, 0.0);
        assert_eq!(report.f0_term, 0.0);
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
    }

    #[test]
    fn distances_satisfy_the_triangle_inequality() {
        let grid = make_grid(1.0, 8).unwrap();
        let bundle = sample_brownian(&grid, 400, 1, 1, 31).unwrap();
        let cfg = quick_config(400, 2);
        let gen = catalog::build("heavy_tail_xi", Some(0.6), None).unwrap().gen;
        let sols: Vec<SolutionEnsemble> = [2u32, 4, 8]
            .iter()
            .map(|&n| solve_bdsde(&build_step2_data(&gen, n), &grid, &bundle, &cfg).unwrap())
            .collect();
        let p = 1.5;
        let d01 = ensemble_distance(&sols[0], &sols[1], p).unwrap();
        let d12 = ensemble_distance(&sols[1], &sols[2], p).unwrap();
        let d02 = ensemble_distance(&sols[0], &sols[2], p).unwrap();
        assert!(d02.s_p <= d01.s_p + d12.s_p + 1e-12);
        assert!(d02.m_p <= d01.m_p + d12.m_p + 1e-12);
    }

    #[test]
    fn cauchy_study_is_inert_for_bounded_terminal_data() {
        let grid = make_grid(1.0, 8).unwrap();
        let bundle = sample_brownian(&grid, 300, 1, 1, 37).unwrap();
        let entry =
            catalog::build("heavy_tail_xi", None, Some(catalog::XiKind::Const(1.5))).unwrap();
        let study = cauchy_study_step2(
            &entry.gen,
            &grid,
            &bundle,
            &[2, 4, 8],
            1.5,
            &quick_config(300, 2),
        )
        .unwrap();
        // |ξ| = 1.5 ≤ 2 = min(n): truncation never activates and the shared
        // seed makes every level bit-identical.
        for d in study.sp_distances.iter().chain(&study.mp_distances) {
            assert_eq!(*d, 0.0);
        }
    }

    #[test]
    fn heavy_tail_terminal_gaps_decrease() {
        let grid = make_grid(1.0, 4).unwrap();
        let bundle = sample_brownian(&grid, 20_000, 1, 1, 41).unwrap();
        let gen = catalog::build("heavy_tail_xi", Some(0.6), None).unwrap().gen;
        let g24 = terminal_truncation_gap(&gen, &bundle, 2, 4, 1.5);
        let g48 = terminal_truncation_gap(&gen, &bundle, 4, 8, 1.5);
        let g816 = terminal_truncation_gap(&gen, &bundle, 8, 16, 1.5);
        assert!(g24 > g48 && g48 > g816, "gaps {g24}, {g48}, {g816}");
        assert!(g24 > 0.0);
    }

    #[test]
    fn moment_oracle_classifies_the_design_point() {
        // β = 0.6, p = 1.5: βp = 0.9 < 1 (finite), 2β = 1.2 > 1 (infinite).
        let check = verify_heavy_tail_moments(0.6, 1.5, 1.0).unwrap();
        assert!(check.p_moment_finite, "ratio {}", check.p_diff_ratio);
        assert!(
            !check.square_moment_finite,
            "ratio {}",
            check.square_diff_ratio
        );
        // and a comfortably integrable exponent stays finite
        let easy = verify_heavy_tail_moments(0.2, 1.5, 1.0).unwrap();
        assert!(easy.p_moment_finite && easy.square_moment_finite);
    }

    #[test]
    fn quadrature_matches_known_half_normal_moment() {
        // q = 0: 2∫_0^∞ φ = 1; the tail from δ = 1e-8 misses O(δ) mass.
        let v = gaussian_negative_moment_tail(0.0, 1.0, 1e-8);
        assert!((v - 1.0).abs() < 1e-6, "got {v}");
        // q = -1: E|N(0,1)| = sqrt(2/π)
        let m1 = gaussian_negative_moment_tail(-1.0, 1.0, 1e-8);
        let exact = math::sqrt(2.0 / core::f64::consts::PI);
        assert!((m1 - exact).abs() < 1e-6, "got {m1} vs {exact}");
    }

    #[test]
    fn step1_probe_respects_the_radius() {
        let grid = make_grid(1.0, 16).unwrap();
        let m = 500;
        let bundle = sample_brownian(&grid, m, 1, 1, 43).unwrap();
        let entry =
            catalog::build("monotone_cubic", None, Some(catalog::XiKind::Const(0.5))).unwrap();
        let r = step1_radius(&entry.gen, 1.0, 0.5, 0.0).unwrap();
        let params = TruncationParams::new(r, 8).unwrap();
        let report =
            step1_boundedness_probe(&entry.gen, params, &grid, &bundle, &quick_config(m, 2))
                .unwrap();
        assert_eq!(report.violations, 0, "sup |Y| = {}", report.sup_y_inf);
        assert!(report.sup_y_inf <= report.r);
        assert!(report.z_m2.is_finite());
    }

    #[test]
    fn step1_probe_rejects_nonzero_g0() {
        let grid = make_grid(1.0, 4).unwrap();
        let bundle = sample_brownian(&grid, 50, 1, 1, 1).unwrap();
        let entry = catalog::build("linear_g", Some(0.5), None).unwrap();
        let err = step1_boundedness_probe(
            &entry.gen,
            TruncationParams::new(1.0, 4).unwrap(),
            &grid,
            &bundle,
            &quick_config(50, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn identical_uniqueness_runs_have_zero_gap() {
        let grid = make_grid(1.0, 8).unwrap();
        let bundle = sample_brownian(&grid, 800, 1, 1, 47).unwrap();
        let gen = catalog::build("monotone_cubic", None, None).unwrap().gen;
        let cfg = quick_config(800, 2);
        let report = uniqueness_probe(&gen, &grid, &bundle, &bundle, &cfg, &cfg).unwrap();
        assert_eq!(report.y0_gap, 0.0);
        assert!(report.stderr > 0.0);
    }

    #[test]
    fn block_stderr_tracks_seed_to_seed_spread_on_linear_drift() {
        // Y_0-hat carries common regression-coefficient noise, so its true
        // spread across independent ensembles must be matched by the
        // block-resampled estimate (ratio within a factor ~2).
        let grid = make_grid(1.0, 16).unwrap();
        let gen = catalog::build("linear_drift", Some(0.5), None).unwrap().gen;
        let cfg = quick_config(2000, 1);
        let mut y0s = Vec::new();
        for seed in 0..12u64 {
            let bundle = sample_brownian(&grid, 2000, 1, 1, 900 + seed).unwrap();
            let sol = solve_bdsde(&gen, &grid, &bundle, &cfg).unwrap();
            y0s.push(sol.diagnostics.y0[0]);
        }
        let mean = y0s.iter().sum::<f64>() / y0s.len() as f64;
        let true_sd = (y0s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (y0s.len() as f64 - 1.0))
            .sqrt();
        let bundle = sample_brownian(&grid, 2000, 1, 1, 900).unwrap();
        let block_se = y0_block_stderr(&gen, &grid, &bundle, &cfg, STDERR_BLOCKS).unwrap();
        assert!(
            block_se > 0.4 * true_sd && block_se < 2.5 * true_sd,
            "block SE {block_se} vs seed-to-seed sd {true_sd}"
        );
    }

    #[test]
    fn convergence_table_shows_decreasing_errors_for_linear_drift() {
        let gen = catalog::build("linear_drift", Some(1.0), None).unwrap();
        let table = convergence_study(
            &gen.gen,
            gen.closed_form.unwrap(),
            1.0,
            &[8, 16, 32],
            2000,
            53,
            &quick_config(2000, 1),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows[0].error > table.rows[1].error);
        assert!(table.rows[1].error > table.rows[2].error);
        assert!(table.rows[0].empirical_rate.unwrap() > 0.0);
        assert!(table.rows[2].empirical_rate.is_none());
    }
}
