//! The data triple `(xi, f, g)` and executable validators for its
//! structural assumptions.
//!
//! A [`GeneratorSpec`] packages the terminal condition and the two
//! coefficients together with the structural constants `(λ, μ, α, p)` they
//! are declared to satisfy:
//!
//! - `|f(t, y, z₁) − f(t, y, z₂)|² ≤ λ ‖z₁ − z₂‖²` (Lipschitz in `z` at
//!   fixed `y`),
//! - `⟨y − y', f(t, y, z) − f(t, y', z)⟩ ≤ μ |y − y'|²` (monotonicity),
//! - `‖g(t, y₁, z₁) − g(t, y₂, z₂)‖² ≤ λ |y₁ − y₂|² + α ‖z₁ − z₂‖²` with
//!   `α < 1`.
//!
//! The coefficients are black-box callables, so [`validate_assumptions`] can
//! only certify violations, never proofs: `passed == true` means "no
//! violation found over the sampled cloud at the configured tolerance".

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::math;
use crate::rng::{CounterRng, TAG_VALIDATOR};

/// Per-path evaluation context handed to the coefficients: the current
/// forward-driver state. Coefficients must be pure functions of their
/// arguments plus read-only captured state so they can be called from
/// multiple threads.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub step: usize,
    pub w: &'a [f64],
}

impl<'a> EvalCtx<'a> {
    pub fn new(step: usize, w: &'a [f64]) -> Self {
        EvalCtx { step, w }
    }
}

/// View of a full forward-driver path, `(N+1) × d` row-major.
#[derive(Debug, Clone, Copy)]
pub struct WPathView<'a> {
    nodes: &'a [f64],
    dim: usize,
}

impl<'a> WPathView<'a> {
    pub fn new(nodes: &'a [f64], dim: usize) -> Self {
        debug_assert_eq!(nodes.len() % dim, 0);
        WPathView { nodes, dim }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        &self.nodes[node * self.dim..(node + 1) * self.dim]
    }

    /// `W_T`.
    #[inline]
    pub fn terminal(&self) -> &[f64] {
        self.at(self.node_count() - 1)
    }
}

/// Coefficient callable `(t, y, z, ctx) → vector`; `y` has length `k`, `z`
/// is a row-major `k × d` block, the output is `k` (for `f`) or `k × ℓ`
/// (for `g`).
pub type CoeffFn = Arc<dyn Fn(f64, &[f64], &[f64], &EvalCtx<'_>) -> Vec<f64> + Send + Sync>;

/// Terminal condition callable; depends only on the `W` path.
pub type TerminalFn = Arc<dyn Fn(&WPathView<'_>) -> Vec<f64> + Send + Sync>;

/// Deterministic continuous increasing growth bound `φ` used by the growth
/// assumption `|f(t, y, 0)| ≤ |f(t, 0, 0)| + φ(|y|)`.
pub type GrowthFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The data triple `(xi, f, g)` with its structural constants.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub dim_k: usize,
    pub dim_d: usize,
    pub dim_l: usize,
    pub f: CoeffFn,
    pub g: CoeffFn,
    pub xi: TerminalFn,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub p: f64,
    /// Growth bound for the H4 check; validators skip H4 when absent.
    pub phi: Option<GrowthFn>,
}

impl core::fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("dim_k", &self.dim_k)
            .field("dim_d", &self.dim_d)
            .field("dim_l", &self.dim_l)
            .field("lambda", &self.lambda)
            .field("mu", &self.mu)
            .field("alpha", &self.alpha)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

impl GeneratorSpec {
    /// Checks the structural constants.
    pub fn validate(&self) -> Result<()> {
        if self.dim_k == 0 || self.dim_d == 0 || self.dim_l == 0 {
            return Err(Error::config("generator dimensions must be positive"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.p > 1.0) {
            return Err(Error::config(format!("p must exceed 1, got {}", self.p)));
        }
        if !self.mu.is_finite() {
            return Err(Error::config("mu must be finite"));
        }
        Ok(())
    }

    /// `f⁰_t = f(t, 0, 0)`.
    pub fn f0(&self, t: f64, ctx: &EvalCtx<'_>) -> Vec<f64> {
        let y = vec![0.0; self.dim_k];
        let z = vec![0.0; self.dim_k * self.dim_d];
        (self.f)(t, &y, &z, ctx)
    }

    /// `g⁰_t = g(t, 0, 0)`.
    pub fn g0(&self, t: f64, ctx: &EvalCtx<'_>) -> Vec<f64> {
        let y = vec![0.0; self.dim_k];
        let z = vec![0.0; self.dim_k * self.dim_d];
        (self.g)(t, &y, &z, ctx)
    }
}

/// The generator of the difference of two solutions: shifts the
/// coefficients by a reference pair of time functions and recenters, so
/// that `h(t, 0, 0) = 0` while the structural constants are preserved.
pub fn shifted_generator(
    gen: &GeneratorSpec,
    y_ref: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    z_ref: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
) -> GeneratorSpec {
    let k = gen.dim_k;
    let kd = gen.dim_k * gen.dim_d;
    let shift =
        move |coeff: &CoeffFn, t: f64, y: &[f64], z: &[f64], ctx: &EvalCtx<'_>| -> Vec<f64> {
            let yr = y_ref(t);
            let zr = z_ref(t);
            debug_assert_eq!(yr.len(), k);
            debug_assert_eq!(zr.len(), kd);
            let ys: Vec<f64> = y.iter().zip(&yr).map(|(a, b)| a + b).collect();
            let zs: Vec<f64> = z.iter().zip(&zr).map(|(a, b)| a + b).collect();
            let mut out = coeff(t, &ys, &zs, ctx);
            let base = coeff(t, &yr, &zr, ctx);
            for (o, b) in out.iter_mut().zip(&base) {
                *o -= b;
            }
            out
        };

    let f_inner = gen.f.clone();
    let g_inner = gen.g.clone();
    let shift_f = shift.clone();
    let shift_g = shift;
    let k_out = gen.dim_k;
    GeneratorSpec {
        dim_k: gen.dim_k,
        dim_d: gen.dim_d,
        dim_l: gen.dim_l,
        f: Arc::new(move |t, y, z, ctx| shift_f(&f_inner, t, y, z, ctx)),
        g: Arc::new(move |t, y, z, ctx| shift_g(&g_inner, t, y, z, ctx)),
        xi: Arc::new(move |_| vec![0.0; k_out]),
        lambda: gen.lambda,
        mu: gen.mu,
        alpha: gen.alpha,
        p: gen.p,
        phi: None,
    }
}

/// Which assumption a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `z`-Lipschitz continuity of `f` at fixed `y`.
    H2i,
    /// Monotonicity of `f` in `y`.
    H2ii,
    /// Joint Lipschitz bound on `g`.
    H2iii,
    /// Continuity of `y ↦ f(t, y, z)` (small-perturbation probe).
    H3ii,
    /// `g(·, 0, 0) ≡ 0`.
    H3iii,
    /// Growth bound `|f(t, y, 0)| ≤ |f⁰_t| + φ(|y|)`.
    H4,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::H2i => "H2(i)",
            Condition::H2ii => "H2(ii)",
            Condition::H2iii => "H2(iii)",
            Condition::H3ii => "H3(ii)",
            Condition::H3iii => "H3(iii)",
            Condition::H4 => "H4",
        }
    }
}

/// One offending sample.
#[derive(Debug, Clone)]
pub struct Violation {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub y_alt: Vec<f64>,
    pub z_alt: Vec<f64>,
    pub ratio: f64,
}

/// Result of sampling one condition over a cloud.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub condition: Condition,
    pub samples_tested: usize,
    /// Largest observed ratio for the condition (see [`validate_assumptions`]
    /// for the per-condition ratio definitions).
    pub worst_ratio: f64,
    pub violation_count: usize,
    /// At most [`MAX_STORED_VIOLATIONS`] retained samples.
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Violations retained per report; the count field keeps the full tally.
pub const MAX_STORED_VIOLATIONS: usize = 32;

/// Sampling configuration for [`validate_assumptions`].
#[derive(Debug, Clone)]
pub struct SampleCloud {
    /// Times are drawn uniformly from `[0, t_max]`.
    pub t_max: f64,
    /// `y` coordinates are drawn uniformly from `[-y_radius, y_radius]`.
    pub y_radius: f64,
    /// `z` entries are drawn uniformly from `[-z_radius, z_radius]`.
    pub z_radius: f64,
    pub count: usize,
    pub seed: u64,
    /// Relative slack an observed ratio may exceed its bound by before it is
    /// counted as a violation.
    pub tolerance: f64,
}

impl Default for SampleCloud {
    fn default() -> Self {
        SampleCloud {
            t_max: 1.0,
            y_radius: 3.0,
            z_radius: 3.0,
            count: 10_000,
            seed: 0x5eed,
            tolerance: 1e-9,
        }
    }
}

struct ConditionState {
    condition: Condition,
    worst: f64,
    count: usize,
    stored: Vec<Violation>,
}

impl ConditionState {
    fn new(condition: Condition) -> Self {
        ConditionState {
            condition,
            worst: f64::NEG_INFINITY,
            count: 0,
            stored: Vec::new(),
        }
    }

    fn observe(&mut self, ratio: f64, violated: bool, sample: impl FnOnce(f64) -> Violation) {
        if ratio > self.worst {
            self.worst = ratio;
        }
        if violated {
            self.count += 1;
            if self.stored.len() < MAX_STORED_VIOLATIONS {
                self.stored.push(sample(ratio));
            }
        }
    }

    fn finish(self, samples_tested: usize) -> AssumptionReport {
        AssumptionReport {
            condition: self.condition,
            samples_tested,
            worst_ratio: if self.worst.is_finite() { self.worst } else { 0.0 },
            violation_count: self.count,
            passed: self.count == 0,
            violations: self.stored,
        }
    }
}

fn finite_or_err(v: &[f64], what: &'static str, sample: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what,
            path: sample,
            step: 0,
        });
    }
    Ok(())
}

/// Draws random `(t, y, z, y', z')` tuples and checks every declared
/// assumption on them.
///
/// Ratio definitions: H2(i) and H2(iii) report `‖Δcoeff‖² / bound` (bound 1
/// means tight), H2(ii) reports the raw monotonicity quotient
/// `⟨Δy, Δf⟩ / |Δy|²` compared against `μ`, H3(ii) reports a small-step
/// continuity quotient, H3(iii) the norm `‖g(t, 0, 0)‖`, and H4 the excess
/// `|f(t, y, 0)| − |f⁰_t| − φ(|y|)`. H4 is checked only when `phi` is set.
///
/// Evaluation uses the origin forward-driver state; catalog coefficients do
/// not read the context.
pub fn validate_assumptions(
    gen: &GeneratorSpec,
    cloud: &SampleCloud,
) -> Result<Vec<AssumptionReport>> {
    gen.validate()?;
    if !(cloud.t_max >= 0.0) || !cloud.y_radius.is_finite() || !cloud.z_radius.is_finite() {
        return Err(Error::config("sampling ranges must be finite"));
    }
    let k = gen.dim_k;
    let kd = gen.dim_k * gen.dim_d;
    let w_origin = vec![0.0; gen.dim_d];
    let ctx = EvalCtx::new(0, &w_origin);

    let mut states = vec![
        ConditionState::new(Condition::H2i),
        ConditionState::new(Condition::H2ii),
        ConditionState::new(Condition::H2iii),
        ConditionState::new(Condition::H3ii),
        ConditionState::new(Condition::H3iii),
    ];
    if gen.phi.is_some() {
        states.push(ConditionState::new(Condition::H4));
    }

    let mut rng = CounterRng::for_stream(cloud.seed, TAG_VALIDATOR, 0, 0);
    let draw_vec = |len: usize, radius: f64, rng: &mut CounterRng| -> Vec<f64> {
        (0..len)
            .map(|_| (2.0 * rng.uniform() - 1.0) * radius)
            .collect()
    };

    for sample in 0..cloud.count {
        let t = rng.uniform() * cloud.t_max;
        let y = draw_vec(k, cloud.y_radius, &mut rng);
        let y_alt = draw_vec(k, cloud.y_radius, &mut rng);
        let z = draw_vec(kd, cloud.z_radius, &mut rng);
        let z_alt = draw_vec(kd, cloud.z_radius, &mut rng);

        let f_yz = (gen.f)(t, &y, &z, &ctx);
        finite_or_err(&f_yz, "generator f output", sample)?;
        let tol = cloud.tolerance;

        // H2(i): z-Lipschitz at fixed y.
        {
            let f_yz2 = (gen.f)(t, &y, &z_alt, &ctx);
            finite_or_err(&f_yz2, "generator f output", sample)?;
            let dz2 = sq_dist(&z, &z_alt);
            if dz2 > 1e-24 {
                let df2 = sq_dist(&f_yz, &f_yz2);
                let ratio = df2 / (gen.lambda * dz2);
                let violated = ratio > 1.0 + tol;
                states[0].observe(ratio, violated, |r| {
                    violation(t, &y, &z, &y, &z_alt, r)
                });
            }
        }

        // H2(ii): monotonicity quotient against mu.
        {
            let f_y2z = (gen.f)(t, &y_alt, &z, &ctx);
            finite_or_err(&f_y2z, "generator f output", sample)?;
            let dy2 = sq_dist(&y, &y_alt);
            if dy2 > 1e-24 {
                let mut inner = 0.0;
                for a in 0..k {
                    inner += (y[a] - y_alt[a]) * (f_yz[a] - f_y2z[a]);
                }
                let ratio = inner / dy2;
                let violated = ratio > gen.mu + tol.max(1e-12 * gen.mu.abs());
                states[1].observe(ratio, violated, |r| {
                    violation(t, &y, &z, &y_alt, &z, r)
                });
            }
        }

        // H2(iii): joint bound on g.
        {
            let g_a = (gen.g)(t, &y, &z, &ctx);
            let g_b = (gen.g)(t, &y_alt, &z_alt, &ctx);
            finite_or_err(&g_a, "generator g output", sample)?;
            finite_or_err(&g_b, "generator g output", sample)?;
            let den = gen.lambda * sq_dist(&y, &y_alt) + gen.alpha * sq_dist(&z, &z_alt);
            if den > 1e-24 {
                let ratio = sq_dist(&g_a, &g_b) / den;
                let violated = ratio > 1.0 + tol;
                states[2].observe(ratio, violated, |r| {
                    violation(t, &y, &z, &y_alt, &z_alt, r)
                });
            }
        }

        // H3(ii): continuity probe in y. A genuinely continuous coefficient
        // moves O(delta) under a delta-perturbation; a jump moves O(1).
        {
            const DELTA: f64 = 1e-7;
            let mut y_pert = y.clone();
            y_pert[sample % k] += DELTA;
            let f_pert = (gen.f)(t, &y_pert, &z, &ctx);
            finite_or_err(&f_pert, "generator f output", sample)?;
            let ratio = dist(&f_yz, &f_pert) / (1.0 + norm(&f_yz));
            let violated = ratio > 1e-3;
            states[3].observe(ratio, violated, |r| {
                violation(t, &y, &z, &y_pert, &z, r)
            });
        }

        // H3(iii): g vanishes at the origin.
        {
            let g0 = gen.g0(t, &ctx);
            finite_or_err(&g0, "generator g output", sample)?;
            let ratio = norm(&g0);
            let violated = ratio > tol.max(1e-12);
            let zeros_y = vec![0.0; k];
            let zeros_z = vec![0.0; kd];
            states[4].observe(ratio, violated, |r| {
                violation(t, &zeros_y, &zeros_z, &zeros_y, &zeros_z, r)
            });
        }

        // H4: growth bound, when phi is registered.
        if let Some(phi) = &gen.phi {
            let zeros_z = vec![0.0; kd];
            let f_y0 = (gen.f)(t, &y, &zeros_z, &ctx);
            finite_or_err(&f_y0, "generator f output", sample)?;
            let f0 = gen.f0(t, &ctx);
            let bound = norm(&f0) + phi(norm(&y));
            let ratio = norm(&f_y0) - bound;
            let violated = ratio > tol;
            let idx = states.len() - 1;
            states[idx].observe(ratio, violated, |r| {
                violation(t, &y, &zeros_z, &y, &zeros_z, r)
            });
        }
    }

    Ok(states
        .into_iter()
        .map(|s| s.finish(cloud.count))
        .collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(sq_dist(a, b))
}

fn violation(t: f64, y: &[f64], z: &[f64], y_alt: &[f64], z_alt: &[f64], ratio: f64) -> Violation {
    Violation {
        t,
        y: y.to_vec(),
        z: z.to_vec(),
        y_alt: y_alt.to_vec(),
        z_alt: z_alt.to_vec(),
        ratio,
    }
}

/// Convenience: the report for one condition out of a validation run.
pub fn report_for(reports: &[AssumptionReport], condition: Condition) -> Option<&AssumptionReport> {
    reports.iter().find(|r| r.condition == condition)
}

/// Human-readable one-line summary, used by catalog listings.
pub fn summarize(reports: &[AssumptionReport]) -> String {
    let mut out = String::new();
    for r in reports {
        if !out.is_empty() {
            out.push_str("  ");
        }
        out.push_str(r.condition.label());
        out.push_str(if r.passed { " ok" } else { " VIOLATED" });
    }
    out
}
