//! Backward-induction solver with regression conditional expectations.
//!
//! Conditionally on a realized backward-driver path, the BDSDE is a BSDE
//! with random (B-measurable) coefficients, so the classical least-squares
//! Monte Carlo backward recursion applies per frozen `B` path:
//!
//! ```text
//! Y_N = ξ(W),
//! Z_i = (1/dt) Ê[ Y_{i+1} ⊗ ΔW_i | W_{t_i} ],
//! Y_i = Ê[ Y_{i+1} + f(t_{i+1}, Y_{i+1}, Z_i) dt | W_{t_i} ]
//!       + Ê[ g(t_{i+1}, Y_{i+1}, Z_{i+1}) | W_{t_i} ] · ΔB_i            (explicit)
//! Y_i : y = Ê[Y_{i+1}|W_{t_i}] + f(t_i, y, Z_i) dt + Ê[g(…)|W_{t_i}]·ΔB_i (implicit)
//! ```
//!
//! `Ê[·|W_{t_i}]` is least-squares projection onto polynomials in the
//! coordinates of `W_{t_i}` fitted across the path ensemble; `ΔB_i` is a
//! known coefficient because all paths share the frozen backward path.
//! Outer statistics over `B` are obtained by repeating the solve over
//! several frozen indices. At the last step the `g` argument `Z_N` is
//! extrapolated one-sidedly as `Z_{N−1}`; at (nearly) deterministic
//! regressor states the projection falls back to the plain sample mean.
//!
//! [`nested_mc_oracle`] runs the same recursion with every conditional
//! expectation computed by fresh sub-simulation from the conditioning
//! state — exponentially expensive but free of regression bias, which
//! makes it a ground-truth oracle for tiny instances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::brownian::BrownianBundle;
use crate::error::{Error, Result};
use crate::generator::{EvalCtx, GeneratorSpec, WPathView};
use crate::grid::TimeGrid;
use crate::linalg::{dot, norm, ridge_least_squares};
use crate::math;
use crate::series::PathArray;

/// Time-stepping scheme for the `f` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    ImplicitPicard,
}

/// Solver configuration; see the module docs for the recursion.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub picard_max_iters: usize,
    pub picard_tol: f64,
    /// Total degree of the polynomial regression basis in `W_{t_i}`.
    pub basis_degree: usize,
    /// Paths taken from the bundle (must not exceed its path count).
    pub paths: usize,
    /// First bundle path used; lets resampling schemes solve on disjoint
    /// blocks of one ensemble.
    pub path_offset: usize,
    /// Outer repetitions over frozen backward paths (used by experiment
    /// drivers; a single solve uses `frozen_b_index` only).
    pub b_path_count: usize,
    /// Which backward path the ensemble is conditioned on.
    pub frozen_b_index: usize,
    /// Sub-simulation count per conditional expectation in the oracle.
    pub nested_inner: usize,
    /// Cap on the total number of oracle sub-simulations.
    pub oracle_budget: u128,
    /// Ridge regularization added to the regression normal equations.
    pub ridge: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Explicit,
            picard_max_iters: 20,
            picard_tol: 1e-10,
            basis_degree: 2,
            paths: 10_000,
            path_offset: 0,
            b_path_count: 1,
            frozen_b_index: 0,
            nested_inner: 32,
            oracle_budget: 50_000_000,
            ridge: 1e-10,
        }
    }
}

/// Per-run numerical diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Condition-number estimate of the regression Gram matrix per step.
    pub cond_numbers: Vec<f64>,
    /// Worst Picard iteration count per step (zeros for the explicit
    /// scheme and for the oracle).
    pub picard_iters: Vec<usize>,
    /// `Y_0` (identical across paths up to the step-0 mean projection).
    pub y0: Vec<f64>,
    /// Within-ensemble spread of the step-0 projection (max over
    /// components). Regression-coefficient noise from earlier steps is
    /// common to all paths and not visible here; resampled standard errors
    /// live in the estimates module.
    pub y0_stderr: f64,
}

/// Discrete `(Y, Z)` ensemble under one frozen backward path.
#[derive(Debug, Clone)]
pub struct SolutionEnsemble {
    /// `paths × (N+1) × k`.
    y: PathArray,
    /// `paths × N × (k·d)`.
    z: PathArray,
    frozen_b_index: usize,
    /// First bundle path this ensemble was solved on; ensemble path `m`
    /// corresponds to bundle path `path_offset + m`.
    path_offset: usize,
    grid: TimeGrid,
    pub diagnostics: Diagnostics,
}

impl SolutionEnsemble {
    pub fn y(&self) -> &PathArray {
        &self.y
    }

    pub fn z(&self) -> &PathArray {
        &self.z
    }

    pub fn frozen_b_index(&self) -> usize {
        self.frozen_b_index
    }

    pub fn path_offset(&self) -> usize {
        self.path_offset
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.y.paths()
    }

    pub fn dim_k(&self) -> usize {
        self.y.width()
    }
}

/// Discrete `S^p` and `M^p` norms of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// `(mean_m sup_i |Y_i|^p)^{1 ∧ 1/p}`.
    pub s_p: f64,
    /// `(mean_m (Σ_i |Z_i|² dt)^{p/2})^{1 ∧ 1/p}`.
    pub m_p: f64,
}

/// Computes the discrete solution-space norms, including the `p < 1`
/// metric convention (outer exponent `1 ∧ 1/p`).
pub fn lp_norms(sol: &SolutionEnsemble, p: f64) -> Result<NormReport> {
    if !(p > 0.0) {
        return Err(Error::precondition(format!("p must be positive, got {p}")));
    }
    let outer = (1.0f64).min(1.0 / p);
    let (paths, n) = (sol.paths(), sol.grid.steps());
    let dt = sol.grid.dt();
    let mut sup_sum = 0.0;
    let mut int_sum = 0.0;
    for m in 0..paths {
        let mut sup = 0.0_f64;
        for i in 0..=n {
            sup = sup.max(norm(sol.y.at(m, i)));
        }
        sup_sum += math::powf(sup, p);
        let mut quad = 0.0;
        for i in 0..n {
            let z = sol.z.at(m, i);
            quad += dot(z, z) * dt;
        }
        int_sum += math::powf(quad, p / 2.0);
    }
    let mf = paths as f64;
    Ok(NormReport {
        s_p: math::powf(sup_sum / mf, outer),
        m_p: math::powf(int_sum / mf, outer),
    })
}

/// Exponent tuples of the monomials of total degree ≤ `degree` in `dim`
/// variables, graded lexicographic, constant first.
fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    for total in 0..=degree as u32 {
        emit_exponents(dim, total, 0, &mut current, &mut out);
    }
    out
}

fn emit_exponents(
    dim: usize,
    remaining: u32,
    pos: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if pos + 1 == dim {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        emit_exponents(dim, remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

fn eval_basis(w: &[f64], exponents: &[Vec<u32>], out: &mut [f64]) {
    for (slot, exps) in out.iter_mut().zip(exponents) {
        let mut v = 1.0;
        for (x, &e) in w.iter().zip(exps) {
            for _ in 0..e {
                v *= x;
            }
        }
        *slot = v;
    }
}

/// One regression stage: either a polynomial projection or, at degenerate
/// regressor states, the plain sample mean.
struct Projection {
    design: Vec<f64>,
    rows: usize,
    cols: usize,
    cond: f64,
    betas: Vec<Vec<f64>>,
}

impl Projection {
    /// Fits all `targets` at once; `cols == 1` means mean fallback.
    fn fit(
        step: usize,
        design: Vec<f64>,
        rows: usize,
        cols: usize,
        targets: &[&[f64]],
        ridge: f64,
    ) -> Result<Self> {
        match ridge_least_squares(&design, rows, cols, targets, ridge) {
            Ok((betas, cond)) => Ok(Projection {
                design,
                rows,
                cols,
                cond,
                betas,
            }),
            Err(Error::SingularRegression { cond, .. }) => {
                Err(Error::SingularRegression { step, cond })
            }
            Err(e) => Err(e),
        }
    }

    /// Appends fits for more targets reusing the same design matrix.
    fn fit_more(&mut self, step: usize, targets: &[&[f64]], ridge: f64) -> Result<usize> {
        let first = self.betas.len();
        match ridge_least_squares(&self.design, self.rows, self.cols, targets, ridge) {
            Ok((betas, _)) => {
                self.betas.extend(betas);
                Ok(first)
            }
            Err(Error::SingularRegression { cond, .. }) => {
                Err(Error::SingularRegression { step, cond })
            }
            Err(e) => Err(e),
        }
    }

    #[inline]
    fn fitted(&self, target_idx: usize, path: usize) -> f64 {
        dot(
            &self.betas[target_idx],
            &self.design[path * self.cols..(path + 1) * self.cols],
        )
    }
}

fn validate_common(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
) -> Result<usize> {
    gen.validate()?;
    if gen.dim_d != bundle.dim_d() || gen.dim_l != bundle.dim_l() {
        return Err(Error::dimension(format!(
            "generator dims (d={}, l={}) do not match bundle dims (d={}, l={})",
            gen.dim_d,
            gen.dim_l,
            bundle.dim_d(),
            bundle.dim_l()
        )));
    }
    if bundle.steps() != grid.steps() {
        return Err(Error::dimension(format!(
            "bundle has {} steps, grid has {}",
            bundle.steps(),
            grid.steps()
        )));
    }
    if config.paths < 2 || config.path_offset + config.paths > bundle.paths() {
        return Err(Error::config(format!(
            "configured path range [{}, {}) must lie within the bundle's {} paths (and hold at least 2)",
            config.path_offset,
            config.path_offset + config.paths,
            bundle.paths()
        )));
    }
    if config.frozen_b_index >= bundle.paths() {
        return Err(Error::config(format!(
            "frozen_b_index {} out of range ({} bundle paths)",
            config.frozen_b_index,
            bundle.paths()
        )));
    }
    if !(config.ridge >= 0.0) {
        return Err(Error::config("ridge must be nonnegative"));
    }
    if config.scheme == Scheme::Explicit && gen.mu > 0.0 && grid.dt() * gen.mu >= 1.0 {
        return Err(Error::config(format!(
            "explicit scheme needs dt·mu < 1 (dt = {}, mu = {})",
            grid.dt(),
            gen.mu
        )));
    }
    Ok(config.paths)
}

/// Solves the BDSDE on the bundle's first `config.paths` forward paths,
/// conditioned on the frozen backward path `config.frozen_b_index`.
pub fn solve_bdsde(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
) -> Result<SolutionEnsemble> {
    let paths = validate_common(gen, grid, bundle, config)?;
    let (k, d, l) = (gen.dim_k, gen.dim_d, gen.dim_l);
    let n = grid.steps();
    let dt = grid.dt();
    let b_idx = config.frozen_b_index;
    let off = config.path_offset;

    let exponents = monomial_exponents(d, config.basis_degree);
    if exponents.len() >= paths {
        return Err(Error::config(format!(
            "basis of size {} needs more than {} paths",
            exponents.len(),
            paths
        )));
    }

    let mut y = PathArray::zeros(paths, n + 1, k);
    let mut z = PathArray::zeros(paths, n, k * d);
    let mut diagnostics = Diagnostics {
        cond_numbers: vec![0.0; n],
        picard_iters: vec![0; n],
        ..Diagnostics::default()
    };

    // Terminal condition, exact per path.
    for m in 0..paths {
        let view = WPathView::new(bundle.w_path(off + m), d);
        let xi = (gen.xi)(&view);
        if xi.len() != k {
            return Err(Error::dimension(format!(
                "terminal condition returned length {}, expected {k}",
                xi.len()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "terminal condition",
                path: m,
                step: n,
            });
        }
        y.at_mut(m, n).copy_from_slice(&xi);
    }

    let mut g_vals = vec![0.0; paths * k * l];
    let mut f_vals = vec![0.0; paths * k];
    let mut z_targets = vec![0.0; k * d * paths];

    for i in (0..n).rev() {
        let t_i = grid.node(i);
        let t_next = grid.node(i + 1);
        let db_i = bundle.db_at(b_idx, i);

        // Design matrix over the current regressor states, with a
        // mean-projection fallback when the states are (nearly) equal.
        let degenerate = {
            let mut spread = 0.0_f64;
            let base = bundle.w_at(off, i);
            for m in 1..paths {
                let w = bundle.w_at(off + m, i);
                for c in 0..d {
                    spread = spread.max((w[c] - base[c]).abs());
                }
            }
            spread < 1e-12
        };
        let cols = if degenerate { 1 } else { exponents.len() };
        let mut design = vec![0.0; paths * cols];
        if degenerate {
            design.fill(1.0);
        } else {
            for m in 0..paths {
                eval_basis(
                    bundle.w_at(off + m, i),
                    &exponents,
                    &mut design[m * cols..(m + 1) * cols],
                );
            }
        }

        // Z regression: targets Y_{i+1,a} ΔW_{i,b} / dt.
        for m in 0..paths {
            let y_next = y.at(m, i + 1);
            let dw = bundle.dw_at(off + m, i);
            for a in 0..k {
                for b in 0..d {
                    z_targets[(a * d + b) * paths + m] = y_next[a] * dw[b] / dt;
                }
            }
        }
        let target_refs: Vec<&[f64]> = (0..k * d)
            .map(|j| &z_targets[j * paths..(j + 1) * paths])
            .collect();
        let mut projection = Projection::fit(i, design, paths, cols, &target_refs, config.ridge)?;
        diagnostics.cond_numbers[i] = projection.cond;
        for m in 0..paths {
            let zi = z.at_mut(m, i);
            for j in 0..k * d {
                zi[j] = projection.fitted(j, m);
            }
        }

        // Coefficient evaluations at the right endpoint.
        for m in 0..paths {
            let y_next = y.at(m, i + 1);
            let z_arg = if i + 1 < n { z.at(m, i + 1) } else { z.at(m, i) };
            let ctx = EvalCtx::new(i + 1, bundle.w_at(off + m, i + 1));
            let g_out = (gen.g)(t_next, y_next, z_arg, &ctx);
            if g_out.len() != k * l {
                return Err(Error::dimension("g returned a wrong-sized block"));
            }
            if g_out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "generator g output",
                    path: m,
                    step: i,
                });
            }
            g_vals[m * k * l..(m + 1) * k * l].copy_from_slice(&g_out);

            let f_out = (gen.f)(t_next, y_next, z.at(m, i), &ctx);
            if f_out.len() != k {
                return Err(Error::dimension("f returned a wrong-sized block"));
            }
            if f_out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "generator f output",
                    path: m,
                    step: i,
                });
            }
            f_vals[m * k..(m + 1) * k].copy_from_slice(&f_out);
        }

        // Y regressands: explicit target, plain Y_{i+1} (for the implicit
        // constant part) and the g block.
        let mut explicit_targets = vec![0.0; k * paths];
        let mut base_targets = vec![0.0; k * paths];
        for m in 0..paths {
            let y_next = y.at(m, i + 1);
            for a in 0..k {
                base_targets[a * paths + m] = y_next[a];
                explicit_targets[a * paths + m] = y_next[a] + dt * f_vals[m * k + a];
            }
        }
        let mut g_targets = vec![0.0; k * l * paths];
        for m in 0..paths {
            for j in 0..k * l {
                g_targets[j * paths + m] = g_vals[m * k * l + j];
            }
        }
        let mut refs: Vec<&[f64]> = Vec::with_capacity(2 * k + k * l);
        for a in 0..k {
            refs.push(&explicit_targets[a * paths..(a + 1) * paths]);
        }
        for a in 0..k {
            refs.push(&base_targets[a * paths..(a + 1) * paths]);
        }
        for j in 0..k * l {
            refs.push(&g_targets[j * paths..(j + 1) * paths]);
        }
        let first = projection.fit_more(i, &refs, config.ridge)?;
        let (expl_at, base_at, g_at) = (first, first + k, first + 2 * k);

        let mut worst_iters = 0usize;
        for m in 0..paths {
            // explicit-step value (also the Picard initialization)
            let mut y_new = vec![0.0; k];
            for a in 0..k {
                let mut v = projection.fitted(expl_at + a, m);
                for b in 0..l {
                    v += projection.fitted(g_at + a * l + b, m) * db_i[b];
                }
                y_new[a] = v;
            }

            if config.scheme == Scheme::ImplicitPicard {
                // constant part of the fixed point
                let mut constant = vec![0.0; k];
                for a in 0..k {
                    let mut v = projection.fitted(base_at + a, m);
                    for b in 0..l {
                        v += projection.fitted(g_at + a * l + b, m) * db_i[b];
                    }
                    constant[a] = v;
                }
                let ctx = EvalCtx::new(i, bundle.w_at(off + m, i));
                let z_i = z.at(m, i);
                let mut converged = false;
                let mut residual = f64::INFINITY;
                for iter in 1..=config.picard_max_iters {
                    let f_out = (gen.f)(t_i, &y_new, z_i, &ctx);
                    if f_out.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite {
                            what: "generator f output",
                            path: m,
                            step: i,
                        });
                    }
                    residual = 0.0;
                    for a in 0..k {
                        let next = constant[a] + dt * f_out[a];
                        residual = residual.max((next - y_new[a]).abs());
                        y_new[a] = next;
                    }
                    if residual <= config.picard_tol {
                        worst_iters = worst_iters.max(iter);
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::PicardDiverged {
                        step: i,
                        residual,
                        iters: config.picard_max_iters,
                    });
                }
            }

            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "solution value",
                    path: m,
                    step: i,
                });
            }
            y.at_mut(m, i).copy_from_slice(&y_new);
        }
        diagnostics.picard_iters[i] = worst_iters;

        // Step-0 estimator spread for the uniqueness/stderr reports.
        if i == 0 {
            let mut stderr_max = 0.0_f64;
            for a in 0..k {
                let (mut s, mut s2) = (0.0, 0.0);
                for m in 0..paths {
                    let mut v = explicit_targets[a * paths + m];
                    for b in 0..l {
                        v += g_targets[(a * l + b) * paths + m] * db_i[b];
                    }
                    s += v;
                    s2 += v * v;
                }
                let mf = paths as f64;
                let var = (s2 / mf - (s / mf) * (s / mf)).max(0.0);
                stderr_max = stderr_max.max(math::sqrt(var / mf));
            }
            diagnostics.y0_stderr = stderr_max;
        }
    }

    diagnostics.y0 = y.at(0, 0).to_vec();
    Ok(SolutionEnsemble {
        y,
        z,
        frozen_b_index: b_idx,
        path_offset: off,
        grid: grid.clone(),
        diagnostics,
    })
}

/// Ground-truth oracle for tiny instances: the same recursion with every
/// conditional expectation computed by fresh sub-simulation (branching
/// `config.nested_inner` ways per step). Requires `N ≤ 8` and a total
/// sub-simulation count within `config.oracle_budget`.
pub fn nested_mc_oracle(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
) -> Result<SolutionEnsemble> {
    let paths = validate_common(gen, grid, bundle, config)?;
    let n = grid.steps();
    if n > 8 {
        return Err(Error::precondition(format!(
            "nested oracle is limited to N ≤ 8 steps, got {n}"
        )));
    }
    let inner = config.nested_inner;
    if inner < 2 {
        return Err(Error::config("nested_inner must be at least 2"));
    }

    // cost(i) = inner · (1 + cost(i+1)), cost(N) = 0; evaluating every step
    // of every outer path sums these.
    let mut cost_from = vec![0u128; n + 1];
    for i in (0..n).rev() {
        cost_from[i] = (inner as u128)
            .checked_mul(1 + cost_from[i + 1])
            .ok_or(Error::BudgetExceeded {
                required: u128::MAX,
                budget: config.oracle_budget,
            })?;
    }
    let per_path: u128 = cost_from.iter().sum();
    let required = per_path.saturating_mul(paths as u128);
    if required > config.oracle_budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: config.oracle_budget,
        });
    }

    let (k, d) = (gen.dim_k, gen.dim_d);
    let off = config.path_offset;
    let mut y = PathArray::zeros(paths, n + 1, k);
    let mut z = PathArray::zeros(paths, n, k * d);

    let mut history = vec![0.0; (n + 1) * d];
    for m in 0..paths {
        // Terminal value on the true path.
        let view = WPathView::new(bundle.w_path(off + m), d);
        let xi = (gen.xi)(&view);
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "terminal condition",
                path: m,
                step: n,
            });
        }
        y.at_mut(m, n).copy_from_slice(&xi);

        for i in 0..n {
            history.copy_from_slice(bundle.w_path(off + m));
            let mut rng = crate::rng::CounterRng::for_stream(
                bundle.master_seed(),
                crate::rng::TAG_ORACLE,
                m as u64,
                i as u64,
            );
            let (y_i, z_i) = branch_value(gen, grid, bundle, config, i, &mut history, &mut rng, m)?;
            y.at_mut(m, i).copy_from_slice(&y_i);
            z.at_mut(m, i).copy_from_slice(&z_i.expect("inner steps return Z"));
        }
    }

    let mut diagnostics = Diagnostics {
        cond_numbers: vec![0.0; n],
        picard_iters: vec![0; n],
        ..Diagnostics::default()
    };
    // Y_0 varies across outer paths only through independent oracle noise.
    let mut y0 = vec![0.0; k];
    for m in 0..paths {
        for a in 0..k {
            y0[a] += y.at(m, 0)[a];
        }
    }
    for v in y0.iter_mut() {
        *v /= paths as f64;
    }
    let mut stderr = 0.0_f64;
    for a in 0..k {
        let mut s2 = 0.0;
        for m in 0..paths {
            let dv = y.at(m, 0)[a] - y0[a];
            s2 += dv * dv;
        }
        stderr = stderr.max(math::sqrt(s2 / (paths as f64 * (paths as f64 - 1.0))));
    }
    diagnostics.y0 = y0;
    diagnostics.y0_stderr = stderr;

    Ok(SolutionEnsemble {
        y,
        z,
        frozen_b_index: config.frozen_b_index,
        path_offset: off,
        grid: grid.clone(),
        diagnostics,
    })
}

/// Recursive branch evaluation of `(Y_i, Z_i)` given the path history up to
/// node `i` (entries `i+1..` of `history` are scratch space).
#[allow(clippy::too_many_arguments)]
fn branch_value(
    gen: &GeneratorSpec,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    config: &SolverConfig,
    i: usize,
    history: &mut [f64],
    rng: &mut crate::rng::CounterRng,
    outer_path: usize,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let (k, d, l) = (gen.dim_k, gen.dim_d, gen.dim_l);
    let n = grid.steps();
    if i == n {
        let view = WPathView::new(history, d);
        let out = (gen.xi)(&view);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "terminal condition",
                path: outer_path,
                step: n,
            });
        }
        return Ok((out, None));
    }
    let dt = grid.dt();
    let sqrt_dt = math::sqrt(dt);
    let inner = config.nested_inner;
    let t_i = grid.node(i);
    let t_next = grid.node(i + 1);
    let db_i = bundle.db_at(config.frozen_b_index, i);

    struct Branch {
        y: Vec<f64>,
        z: Option<Vec<f64>>,
        w_state: Vec<f64>,
    }
    let mut children: Vec<Branch> = Vec::with_capacity(inner);
    let mut z_acc = vec![0.0; k * d];
    for j in 0..inner {
        let mut dw = vec![0.0; d];
        for slot in dw.iter_mut() {
            *slot = sqrt_dt * rng.normal();
        }
        for c in 0..d {
            history[(i + 1) * d + c] = history[i * d + c] + dw[c];
        }
        let w_child = history[(i + 1) * d..(i + 2) * d].to_vec();
        let mut child_rng = rng.child(j as u64);
        let (y_child, z_child) =
            branch_value(gen, grid, bundle, config, i + 1, history, &mut child_rng, outer_path)?;
        for a in 0..k {
            for c in 0..d {
                z_acc[a * d + c] += y_child[a] * dw[c];
            }
        }
        children.push(Branch {
            y: y_child,
            z: z_child,
            w_state: w_child,
        });
    }
    let scale = 1.0 / (inner as f64 * dt);
    for v in z_acc.iter_mut() {
        *v *= scale;
    }

    // g and f averages over the children, using the child's own Z when it
    // exists and the one-sided extrapolation Z_{i+1} := Z_i at the last step.
    let mut g_bar = vec![0.0; k * l];
    let mut e_explicit = vec![0.0; k];
    let mut e_base = vec![0.0; k];
    for child in &children {
        let ctx = EvalCtx::new(i + 1, &child.w_state);
        let z_for_g: &[f64] = child.z.as_deref().unwrap_or(&z_acc);
        let g_out = (gen.g)(t_next, &child.y, z_for_g, &ctx);
        if g_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "generator g output",
                path: outer_path,
                step: i,
            });
        }
        for (acc, v) in g_bar.iter_mut().zip(&g_out) {
            *acc += v;
        }
        let f_out = (gen.f)(t_next, &child.y, &z_acc, &ctx);
        if f_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "generator f output",
                path: outer_path,
                step: i,
            });
        }
        for a in 0..k {
            e_explicit[a] += child.y[a] + dt * f_out[a];
            e_base[a] += child.y[a];
        }
    }
    let inv = 1.0 / inner as f64;
    for v in g_bar.iter_mut() {
        *v *= inv;
    }
    for a in 0..k {
        e_explicit[a] *= inv;
        e_base[a] *= inv;
    }

    let mut y_i = vec![0.0; k];
    for a in 0..k {
        let mut v = e_explicit[a];
        for b in 0..l {
            v += g_bar[a * l + b] * db_i[b];
        }
        y_i[a] = v;
    }
    if config.scheme == Scheme::ImplicitPicard {
        let mut constant = vec![0.0; k];
        for a in 0..k {
            let mut v = e_base[a];
            for b in 0..l {
                v += g_bar[a * l + b] * db_i[b];
            }
            constant[a] = v;
        }
        let w_self = history[i * d..(i + 1) * d].to_vec();
        let ctx = EvalCtx::new(i, &w_self);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..config.picard_max_iters {
            let f_out = (gen.f)(t_i, &y_i, &z_acc, &ctx);
            residual = 0.0;
            for a in 0..k {
                let next = constant[a] + dt * f_out[a];
                residual = residual.max((next - y_i[a]).abs());
                y_i[a] = next;
            }
            if residual <= config.picard_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PicardDiverged {
                step: i,
                residual,
                iters: config.picard_max_iters,
            });
        }
    }
    Ok((y_i, Some(z_acc)))
}
