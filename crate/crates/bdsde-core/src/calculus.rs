//! Discrete forward/backward Itô calculus and identity checkers.
//!
//! The forward integral is the left-endpoint Riemann sum against `ΔW`; the
//! backward integral is, by the defining discrete convention used
//! throughout this crate, the *right-endpoint* Riemann sum against `ΔB`.
//! With these conventions the second-order expansion of a smooth function
//! along a mixed semimartingale
//!
//! ```text
//! X_t = X_0 + ∫ K ds + ∫ G d̄B + ∫ H dW
//! ```
//!
//! carries the backward trace correction with a minus sign and the forward
//! one with a plus sign, which is exactly what [`evaluate_tanaka_identity`]
//! verifies for `φ(x) = (|x|² + ε²)^{p/2}` and, in the `ε = 0` limit, for
//! `|x|^p` with the `1_{x≠0}` convention. The `p = 1`, `ε = 0` case hides a
//! local-time term in the residual; the smoothed check is used there.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::brownian::BrownianBundle;
use crate::error::{Error, Result};
use crate::generator::{EvalCtx, GeneratorSpec};
use crate::grid::TimeGrid;
use crate::linalg::{dot, norm};
use crate::math;
use crate::series::PathArray;

/// Indicator floor: `1_{x ≠ 0}` is realized as `|x| > INDICATOR_FLOOR` to
/// avoid `0^{p-2}` singularities for `p < 2`.
pub const INDICATOR_FLOOR: f64 = 1e-12;

/// Minimum sampled radius required by the unsmoothed check for `p < 2`.
const EPS0_MIN_RADIUS: f64 = 1e-6;

/// Unit direction `x̂ = x / |x|`, the zero vector at `x = 0`.
pub fn hat(x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    if r > 0.0 {
        x.iter().map(|v| v / r).collect()
    } else {
        vec![0.0; x.len()]
    }
}

/// The constant `c(p) = p · ((p − 1) ∧ 1) / 2` of the `L^p` Itô–Tanaka
/// inequality; `p ≥ 1` required.
pub fn c_of_p(p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::precondition(format!("c(p) requires p >= 1, got {p}")));
    }
    Ok(p * (p - 1.0).min(1.0) / 2.0)
}

/// The smoothed norm `u_ε(x) = (|x|² + ε²)^{1/2}` with its derivatives.
///
/// For `ε > 0` this is smooth everywhere; `ε = 0` is allowed and yields
/// `|x|` with the indicator conventions at the origin.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedNorm {
    pub epsilon: f64,
}

impl SmoothedNorm {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::precondition(format!(
                "smoothing level must be nonnegative, got {epsilon}"
            )));
        }
        Ok(SmoothedNorm { epsilon })
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        math::sqrt(dot(x, x) + self.epsilon * self.epsilon)
    }

    /// Gradient `x / u_ε(x)`; the zero vector at `x = 0` when `ε = 0`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.value(x);
        if u == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().map(|v| v / u).collect()
    }

    /// Hessian `(I u² − x ⊗ x) / u³`, row-major `k × k`.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        let u = self.value(x);
        let u3 = u * u * u;
        let mut h = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let mut v = -x[i] * x[j] / u3;
                if i == j {
                    v += 1.0 / u;
                }
                h[i * k + j] = v;
            }
        }
        h
    }
}

/// Derivative machinery of `φ(x) = u_ε(x)^p` used by the identity checker.
#[derive(Debug, Clone, Copy)]
struct PowerOfNorm {
    p: f64,
    epsilon: f64,
}

impl PowerOfNorm {
    fn value(&self, x: &[f64]) -> f64 {
        math::powf(dot(x, x) + self.epsilon * self.epsilon, self.p / 2.0)
    }

    /// `∇φ(x) = p u^{p−2} x`, with the `1_{x ≠ 0}` convention at `ε = 0`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let u2 = dot(x, x) + self.epsilon * self.epsilon;
        if u2 == 0.0 {
            out.fill(0.0);
            return;
        }
        let c = self.p * math::powf(u2, (self.p - 2.0) / 2.0);
        for (o, v) in out.iter_mut().zip(x) {
            *o = c * v;
        }
    }

    /// `trace(D²φ(x) · A Aᵀ) = p u^{p−2} ‖A‖² + p (p−2) u^{p−4} |Aᵀx|²`
    /// for a row-major `k × c` block `A`.
    fn trace_quadratic(&self, x: &[f64], a: &[f64], cols: usize) -> f64 {
        let u2 = dot(x, x) + self.epsilon * self.epsilon;
        if u2 == 0.0 {
            // |x|^{p-2} at the origin: 1 for p = 2 (0^0 convention), 0 for
            // p > 2, and 0 by the indicator for p < 2; the second term
            // always vanishes in the limit.
            return if self.p == 2.0 { self.p * dot(a, a) } else { 0.0 };
        }
        let k = x.len();
        let frob2 = dot(a, a);
        let mut atx2 = 0.0;
        for c in 0..cols {
            let mut s = 0.0;
            for r in 0..k {
                s += a[r * cols + c] * x[r];
            }
            atx2 += s * s;
        }
        self.p * math::powf(u2, (self.p - 2.0) / 2.0) * frob2
            + self.p * (self.p - 2.0) * math::powf(u2, (self.p - 4.0) / 2.0) * atx2
    }
}

fn check_block(values: &[f64], what: &'static str, path: usize, step: usize) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what, path, step });
    }
    Ok(())
}

/// Forward Itô integral `Σ_i H(t_i) ΔW_i` per path.
///
/// `h_values` holds one `k × d` block per `(path, step)`, evaluated at the
/// *left* endpoint `t_i`. Returns a `k`-vector per path.
pub fn forward_ito(
    h_values: &PathArray,
    bundle: &BrownianBundle,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    ito_sum(h_values, bundle, grid, Driver::ForwardW)
}

/// Backward Itô integral `Σ_i G(t_{i+1}) ΔB_i` per path.
///
/// `g_values` holds one `k × ℓ` block per `(path, step)`, evaluated at the
/// *right* endpoint `t_{i+1}` — the defining discrete convention for the
/// backward integral. Returns a `k`-vector per path.
pub fn backward_ito(
    g_values: &PathArray,
    bundle: &BrownianBundle,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    ito_sum(g_values, bundle, grid, Driver::BackwardB)
}

enum Driver {
    ForwardW,
    BackwardB,
}

fn ito_sum(
    values: &PathArray,
    bundle: &BrownianBundle,
    grid: &TimeGrid,
    driver: Driver,
) -> Result<Vec<Vec<f64>>> {
    let n = grid.steps();
    let (dim, what) = match driver {
        Driver::ForwardW => (bundle.dim_d(), "forward integrand"),
        Driver::BackwardB => (bundle.dim_l(), "backward integrand"),
    };
    if values.len() != n || values.paths() > bundle.paths() {
        return Err(Error::dimension(format!(
            "integrand array is {} paths × {} steps; bundle has {} paths × {} steps",
            values.paths(),
            values.len(),
            bundle.paths(),
            n
        )));
    }
    if values.width() % dim != 0 {
        return Err(Error::dimension(format!(
            "integrand width {} is not a multiple of the driver dimension {dim}",
            values.width()
        )));
    }
    let k = values.width() / dim;
    let mut out = Vec::with_capacity(values.paths());
    for m in 0..values.paths() {
        let mut acc = vec![0.0; k];
        for i in 0..n {
            let block = values.at(m, i);
            check_block(block, what, m, i)?;
            let inc = match driver {
                Driver::ForwardW => bundle.dw_at(m, i),
                Driver::BackwardB => bundle.db_at(m, i),
            };
            for r in 0..k {
                acc[r] += dot(&block[r * dim..(r + 1) * dim], inc);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Integrand callable `(t, driver states) → flattened block`.
pub type IntegrandFn = Arc<dyn Fn(f64, &SemiCtx<'_>) -> Vec<f64> + Send + Sync>;

/// The three integrand processes of a simulated semimartingale. Each
/// callable receives the time and the driver states at that node and must
/// return finite values on every grid node of every sampled path.
#[derive(Clone)]
pub struct SemimartingaleSpec {
    pub dim_k: usize,
    pub x0: Vec<f64>,
    /// Drift integrand `K`: `(t, ctx) → k`-vector.
    pub drift: IntegrandFn,
    /// Backward integrand `G`: `(t, ctx) → k × ℓ` block.
    pub backward: IntegrandFn,
    /// Forward integrand `H`: `(t, ctx) → k × d` block.
    pub forward: IntegrandFn,
}

/// Driver states handed to semimartingale integrands.
#[derive(Debug, Clone, Copy)]
pub struct SemiCtx<'a> {
    pub step: usize,
    pub w: &'a [f64],
    pub b: &'a [f64],
}

/// Per-path two-sided evaluation of the `|x|^p` expansion along a
/// simulated semimartingale.
///
/// The right-hand side is split into its six terms; `g_trace_term` is
/// stored *with* its minus sign, so `lhs = Σ terms + residual` per path.
#[derive(Debug, Clone)]
pub struct TanakaReport {
    pub p: f64,
    pub epsilon: f64,
    /// Terminal value of the left side, `φ(X_T)`, per path.
    pub lhs: Vec<f64>,
    pub initial_term: Vec<f64>,
    pub drift_term: Vec<f64>,
    pub backward_term: Vec<f64>,
    pub forward_term: Vec<f64>,
    pub g_trace_term: Vec<f64>,
    pub h_trace_term: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_rms: f64,
    /// Set for the `p = 1`, `ε = 0` case: the residual then absorbs the
    /// local-time term, which is not separately computable.
    pub local_time_flag: bool,
}

impl TanakaReport {
    /// Sum of the stored right-hand-side terms for one path.
    pub fn rhs_sum(&self, path: usize) -> f64 {
        self.initial_term[path]
            + self.drift_term[path]
            + self.backward_term[path]
            + self.forward_term[path]
            + self.g_trace_term[path]
            + self.h_trace_term[path]
    }

    pub fn paths(&self) -> usize {
        self.lhs.len()
    }
}

/// Simulates `X = X_0 + ∫ K ds + ∫ G d̄B + ∫ H dW` on the grid and evaluates
/// both sides of the second-order expansion of `φ = u_ε^p`.
///
/// Endpoint conventions: drift and forward terms use the left node, the
/// backward stochastic term and its trace correction use the right node,
/// matching [`forward_ito`] / [`backward_ito`].
///
/// For `ε = 0` and `p < 2` every sampled `|X_t|` must stay above a small
/// radius, otherwise the `|X|^{p−2}` weights are meaningless and the call
/// fails with a precondition error (use a positive `ε` there instead).
pub fn evaluate_tanaka_identity(
    spec: &SemimartingaleSpec,
    bundle: &BrownianBundle,
    grid: &TimeGrid,
    p: f64,
    epsilon: f64,
) -> Result<TanakaReport> {
    if !(p >= 1.0) {
        return Err(Error::precondition(format!("p must be >= 1, got {p}")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::precondition(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    if spec.x0.len() != spec.dim_k {
        return Err(Error::dimension(format!(
            "x0 has length {}, expected {}",
            spec.x0.len(),
            spec.dim_k
        )));
    }
    let strict_radius = epsilon == 0.0 && p < 2.0;
    let phi = PowerOfNorm { p, epsilon };
    let (paths, n) = (bundle.paths(), grid.steps());
    let (k, d, l) = (spec.dim_k, bundle.dim_d(), bundle.dim_l());
    let dt = grid.dt();

    let mut report = TanakaReport {
        p,
        epsilon,
        lhs: vec![0.0; paths],
        initial_term: vec![0.0; paths],
        drift_term: vec![0.0; paths],
        backward_term: vec![0.0; paths],
        forward_term: vec![0.0; paths],
        g_trace_term: vec![0.0; paths],
        h_trace_term: vec![0.0; paths],
        residual: vec![0.0; paths],
        residual_rms: 0.0,
        local_time_flag: p == 1.0 && epsilon == 0.0,
    };

    let mut grad = vec![0.0; k];
    let mut x = vec![0.0; k];
    let mut x_next = vec![0.0; k];
    let mut residual_sq_sum = 0.0;

    for m in 0..paths {
        x.copy_from_slice(&spec.x0);
        if strict_radius && norm(&x) < EPS0_MIN_RADIUS {
            return Err(Error::precondition(format!(
                "unsmoothed check with p = {p} < 2 requires |X| bounded away from 0; |X_0| = {} on path {m}",
                norm(&x)
            )));
        }
        let mut drift_acc = 0.0;
        let mut fwd_acc = 0.0;
        let mut bwd_acc = 0.0;
        let mut gtr_acc = 0.0;
        let mut htr_acc = 0.0;

        for i in 0..n {
            let (t_i, t_next) = (grid.node(i), grid.node(i + 1));
            let ctx_i = SemiCtx {
                step: i,
                w: bundle.w_at(m, i),
                b: bundle.b_at(m, i),
            };
            let ctx_next = SemiCtx {
                step: i + 1,
                w: bundle.w_at(m, i + 1),
                b: bundle.b_at(m, i + 1),
            };
            let k_i = (spec.drift)(t_i, &ctx_i);
            let h_i = (spec.forward)(t_i, &ctx_i);
            let g_next = (spec.backward)(t_next, &ctx_next);
            check_block(&k_i, "tanaka drift integrand", m, i)?;
            check_block(&h_i, "tanaka forward integrand", m, i)?;
            check_block(&g_next, "tanaka backward integrand", m, i)?;
            if k_i.len() != k || h_i.len() != k * d || g_next.len() != k * l {
                return Err(Error::dimension(
                    "semimartingale integrand returned a wrong-sized block",
                ));
            }

            let dw = bundle.dw_at(m, i);
            let db = bundle.db_at(m, i);
            for r in 0..k {
                x_next[r] = x[r]
                    + k_i[r] * dt
                    + dot(&h_i[r * d..(r + 1) * d], dw)
                    + dot(&g_next[r * l..(r + 1) * l], db);
            }
            check_block(&x_next, "semimartingale state", m, i + 1)?;
            if strict_radius && norm(&x_next) < EPS0_MIN_RADIUS {
                return Err(Error::precondition(format!(
                    "unsmoothed check with p = {p} < 2 hit |X| = {} at path {m}, step {}",
                    norm(&x_next),
                    i + 1
                )));
            }

            // left-endpoint terms
            phi.gradient_into(&x, &mut grad);
            drift_acc += dot(&grad, &k_i) * dt;
            for r in 0..k {
                fwd_acc += grad[r] * dot(&h_i[r * d..(r + 1) * d], dw);
            }
            htr_acc += 0.5 * phi.trace_quadratic(&x, &h_i, d) * dt;

            // right-endpoint terms
            phi.gradient_into(&x_next, &mut grad);
            for r in 0..k {
                bwd_acc += grad[r] * dot(&g_next[r * l..(r + 1) * l], db);
            }
            gtr_acc -= 0.5 * phi.trace_quadratic(&x_next, &g_next, l) * dt;

            core::mem::swap(&mut x, &mut x_next);
        }

        report.lhs[m] = phi.value(&x);
        report.initial_term[m] = phi.value(&spec.x0);
        report.drift_term[m] = drift_acc;
        report.forward_term[m] = fwd_acc;
        report.backward_term[m] = bwd_acc;
        report.g_trace_term[m] = gtr_acc;
        report.h_trace_term[m] = htr_acc;
        let res = report.lhs[m] - report.rhs_sum(m);
        report.residual[m] = res;
        residual_sq_sum += res * res;
    }
    report.residual_rms = math::sqrt(residual_sq_sum / paths as f64);
    Ok(report)
}

/// Per-path evaluation (at `t = 0`) of both sides of the `L^p` inequality
/// satisfied by a BDSDE solution:
///
/// ```text
/// |Y_0|^p + c(p) ∫ |Y|^{p−2} 1_{Y≠0} |Z|² ds
///   ≤ |Y_T|^p + p ∫ |Y|^{p−1} ⟨Ŷ, f⟩ ds + c(p) ∫ |Y|^{p−2} 1_{Y≠0} |g|² ds
///     + p ∫ |Y|^{p−1} ⟨Ŷ, g d̄B⟩ − p ∫ |Y|^{p−1} ⟨Ŷ, Z dW⟩ .
/// ```
#[derive(Debug, Clone)]
pub struct CorollaryReport {
    pub p: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl CorollaryReport {
    /// Fraction of paths with `lhs > rhs + tolerance`.
    pub fn violation_fraction(&self, tolerance: f64) -> f64 {
        let violations = self
            .lhs
            .iter()
            .zip(&self.rhs)
            .filter(|(l, r)| **l > **r + tolerance)
            .count();
        violations as f64 / self.lhs.len() as f64
    }

    /// Violation fraction over a path subset.
    pub fn violation_fraction_where(
        &self,
        tolerance: f64,
        mut keep: impl FnMut(usize) -> bool,
    ) -> f64 {
        let mut kept = 0usize;
        let mut violations = 0usize;
        for m in 0..self.lhs.len() {
            if keep(m) {
                kept += 1;
                if self.lhs[m] > self.rhs[m] + tolerance {
                    violations += 1;
                }
            }
        }
        if kept == 0 {
            0.0
        } else {
            violations as f64 / kept as f64
        }
    }
}

/// Evaluates the inequality above on a discrete `(Y, Z)` ensemble.
///
/// `y` is `paths × (N+1) × k`, `z` is `paths × N × (k·d)`; the backward
/// driver is the frozen path `frozen_b` of the bundle. The stochastic
/// terms are computed through [`forward_ito`] / [`backward_ito`]; the `g`
/// and `|Y|^{p−2}|g|²` terms use right endpoints with `Z_N := Z_{N−1}`,
/// the `f`, `|Z|²` terms left endpoints.
pub fn corollary_inequality(
    y: &PathArray,
    z: &PathArray,
    gen: &GeneratorSpec,
    bundle: &BrownianBundle,
    frozen_b: usize,
    grid: &TimeGrid,
    p: f64,
) -> Result<CorollaryReport> {
    let cp = c_of_p(p)?;
    let (paths, n) = (y.paths(), grid.steps());
    let k = gen.dim_k;
    let d = gen.dim_d;
    let l = gen.dim_l;
    if y.width() != k || y.len() != n + 1 {
        return Err(Error::dimension(format!(
            "Y array is {} × {}, expected width {k} and {} nodes",
            y.width(),
            y.len(),
            n + 1
        )));
    }
    if z.width() != k * d || z.len() != n || z.paths() != paths {
        return Err(Error::dimension("Z array shape mismatch"));
    }
    if frozen_b >= bundle.paths() {
        return Err(Error::config(format!(
            "frozen backward path {frozen_b} out of range ({} paths)",
            bundle.paths()
        )));
    }
    let dt = grid.dt();

    // Integrand arrays for the two stochastic terms, one scalar row each.
    let mut fwd_values = PathArray::zeros(paths, n, d);
    let mut bwd_values = PathArray::zeros(paths, n, l);
    let mut lhs = vec![0.0; paths];
    let mut rhs = vec![0.0; paths];

    for m in 0..paths {
        let mut z_quad = 0.0;
        let mut drift = 0.0;
        let mut g_quad = 0.0;
        for i in 0..n {
            let y_i = y.at(m, i);
            let z_i = z.at(m, i);
            let t_i = grid.node(i);
            let r_i = norm(y_i);
            let hat_i = hat(y_i);
            let w_pow_m1 = math::powf(r_i, p - 1.0); // |Y|^{p-1}, 0^0 = 1 handled below
            let w_pow_m1 = if r_i == 0.0 { 0.0 } else { w_pow_m1 };

            // left-endpoint terms
            if r_i > INDICATOR_FLOOR {
                z_quad += math::powf(r_i, p - 2.0) * dot(z_i, z_i) * dt;
            }
            let ctx = EvalCtx::new(i, bundle.w_at(m, i));
            let f_i = (gen.f)(t_i, y_i, z_i, &ctx);
            check_block(&f_i, "generator f output", m, i)?;
            drift += w_pow_m1 * dot(&hat_i, &f_i) * dt;

            // forward integrand row: |Y_i|^{p-1} Ŷ_iᵀ Z_i
            let row = fwd_values.at_mut(m, i);
            for c in 0..d {
                let mut s = 0.0;
                for r in 0..k {
                    s += hat_i[r] * z_i[r * d + c];
                }
                row[c] = w_pow_m1 * s;
            }

            // right-endpoint terms
            let y_next = y.at(m, i + 1);
            let z_next = if i + 1 < n { z.at(m, i + 1) } else { z.at(m, n - 1) };
            let t_next = grid.node(i + 1);
            let ctx_next = EvalCtx::new(i + 1, bundle.w_at(m, i + 1));
            let g_next = (gen.g)(t_next, y_next, z_next, &ctx_next);
            check_block(&g_next, "generator g output", m, i)?;
            let r_next = norm(y_next);
            if r_next > INDICATOR_FLOOR {
                g_quad += math::powf(r_next, p - 2.0) * dot(&g_next, &g_next) * dt;
            }
            let hat_next = hat(y_next);
            let w_next_pow = if r_next == 0.0 {
                0.0
            } else {
                math::powf(r_next, p - 1.0)
            };
            let row = bwd_values.at_mut(m, i);
            for c in 0..l {
                let mut s = 0.0;
                for r in 0..k {
                    s += hat_next[r] * g_next[r * l + c];
                }
                row[c] = w_next_pow * s;
            }
        }
        lhs[m] = math::powf(norm(y.at(m, 0)), p) + cp * z_quad;
        rhs[m] = math::powf(norm(y.at(m, n)), p) + p * drift + cp * g_quad;
    }

    // Stochastic terms: the forward integral uses each path's own W
    // increments, the backward integral the frozen B path.
    let fwd = forward_ito(&fwd_values, bundle, grid)?;
    for m in 0..paths {
        rhs[m] -= p * fwd[m][0];
    }
    let n_steps = n;
    for m in 0..paths {
        let mut acc = 0.0;
        for i in 0..n_steps {
            acc += dot(bwd_values.at(m, i), bundle.db_at(frozen_b, i));
        }
        rhs[m] += p * acc;
    }

    Ok(CorollaryReport { p, lhs, rhs })
}

/// Ready-made semimartingale specifications used by the identity studies
/// and the command-line front end.
pub mod cases {
    use super::*;

    /// `K = G = H = 0`: the constant path `X ≡ X_0`.
    pub fn constant(x0: Vec<f64>, dim_d: usize, dim_l: usize) -> SemimartingaleSpec {
        let k = x0.len();
        SemimartingaleSpec {
            dim_k: k,
            x0,
            drift: Arc::new(move |_, _| vec![0.0; k]),
            backward: Arc::new(move |_, _| vec![0.0; k * dim_l]),
            forward: Arc::new(move |_, _| vec![0.0; k * dim_d]),
        }
    }

    /// `k = d = 1`, `K = G = 0`, `H = 1`, `X_0 = 0`: `X = W`, for which the
    /// `p = 2`, `ε = 0` expansion is the classical Itô formula for `|x|²`.
    pub fn classical_ito() -> SemimartingaleSpec {
        SemimartingaleSpec {
            dim_k: 1,
            x0: vec![0.0],
            drift: Arc::new(|_, _| vec![0.0]),
            backward: Arc::new(|_, _| vec![0.0]),
            forward: Arc::new(|_, _| vec![1.0]),
        }
    }

    /// `k = 2`, `d = 2`, `ℓ = 1`, bounded smooth integrands of `(t, W, B)`,
    /// started away from the origin. Exercises every term of the identity.
    pub fn smooth_2d() -> SemimartingaleSpec {
        SemimartingaleSpec {
            dim_k: 2,
            x0: vec![1.0, 0.5],
            drift: Arc::new(|t, ctx| {
                vec![
                    0.3 * math::cos(t + ctx.w[0]),
                    -0.2 * math::sin(ctx.w[1] + ctx.b[0]),
                ]
            }),
            backward: Arc::new(|t, ctx| {
                vec![
                    0.4 * math::cos(ctx.w[0] + 2.0 * ctx.b[0]),
                    0.3 * math::sin(t) + 0.1 * math::cos(ctx.w[1]),
                ]
            }),
            forward: Arc::new(|t, ctx| {
                vec![
                    0.5 + 0.2 * math::sin(ctx.w[0]),
                    0.1 * math::cos(ctx.b[0]),
                    0.1 * math::sin(ctx.w[1] + ctx.b[0]),
                    0.4 + 0.1 * math::cos(t),
                ]
            }),
        }
    }
}
