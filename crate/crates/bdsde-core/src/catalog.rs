//! Built-in test problems addressable by name.
//!
//! Every entry is a full data triple `(xi, f, g)` in one state dimension.
//! Entries with a known closed-form solution double as solver oracles; the
//! others exercise specific structural features (monotone non-Lipschitz
//! drift, a failing monotonicity bound, a terminal condition that is
//! p-integrable but not square-integrable).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::math;

/// How the terminal condition reads the forward path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiKind {
    /// `ξ = W_T` (first coordinate).
    TerminalW,
    /// Constant terminal value.
    Const(f64),
    /// `ξ = |W_T|^{-β}`: p-integrable for `β·p < 1`, square-integrable only
    /// for `β < 1/2`.
    HeavyTail { beta: f64 },
}

/// Closed-form solution attached to a catalog entry (all one-dimensional).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// `f = g = 0`, `ξ = W_T`: `Y_t = W_t`, `Z ≡ 1`.
    Martingale,
    /// `f = a·y`, `g = 0`, `ξ = W_T`: `Y_t = e^{a(T−t)} W_t`,
    /// `Z_t = e^{a(T−t)}`.
    LinearDrift { a: f64 },
    /// `f = 0`, `g ≡ c`, `ξ = W_T`: `Y_t = W_t + c (B_T − B_t)`, `Z ≡ 1`.
    ConstantG { c: f64 },
}

impl ClosedForm {
    /// Exact `Y_t` given the current driver states and the terminal value of
    /// the frozen backward path.
    pub fn y(&self, t: f64, horizon: f64, w_t: f64, b_t: f64, b_terminal: f64) -> f64 {
        match *self {
            ClosedForm::Martingale => w_t,
            ClosedForm::LinearDrift { a } => math::exp(a * (horizon - t)) * w_t,
            ClosedForm::ConstantG { c } => w_t + c * (b_terminal - b_t),
        }
    }

    /// Exact `Z_t` (state-independent for every registered form).
    pub fn z(&self, t: f64, horizon: f64) -> f64 {
        match *self {
            ClosedForm::Martingale | ClosedForm::ConstantG { .. } => 1.0,
            ClosedForm::LinearDrift { a } => math::exp(a * (horizon - t)),
        }
    }
}

/// A named problem: generator plus metadata used by listings and studies.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub gen: GeneratorSpec,
    pub closed_form: Option<ClosedForm>,
    /// Whether the entry satisfies the full assumption set H1–H3 (in
    /// particular `g(·,0,0) ≡ 0` and a monotone drift).
    pub satisfies_h123: bool,
    pub description: String,
}

pub const CATALOG_NAMES: [&str; 6] = [
    "zero",
    "linear_drift",
    "linear_g",
    "monotone_cubic",
    "quadratic_bad",
    "heavy_tail_xi",
];

fn xi_fn(kind: XiKind) -> crate::generator::TerminalFn {
    match kind {
        XiKind::TerminalW => Arc::new(|w| vec![w.terminal()[0]]),
        XiKind::Const(v) => Arc::new(move |_| vec![v]),
        XiKind::HeavyTail { beta } => Arc::new(move |w| {
            let wt = math::abs(w.terminal()[0]).max(1e-300);
            vec![math::powf(wt, -beta)]
        }),
    }
}

/// Builds a catalog problem by name.
///
/// `param` feeds the parametric entries (`linear_drift(a)`, `linear_g(beta)`,
/// `heavy_tail_xi(beta_tail)`); `xi_override` replaces the default terminal
/// condition, e.g. to run `monotone_cubic` with a bounded `ξ`.
pub fn build(name: &str, param: Option<f64>, xi_override: Option<XiKind>) -> Result<CatalogEntry> {
    let base = |f, g, xi_kind: XiKind, lambda, mu| GeneratorSpec {
        dim_k: 1,
        dim_d: 1,
        dim_l: 1,
        f,
        g,
        xi: xi_fn(xi_override.unwrap_or(xi_kind)),
        lambda,
        mu,
        alpha: 0.25,
        p: 2.0,
        phi: None,
    };
    let zero_coeff: crate::generator::CoeffFn = Arc::new(|_t, _y, _z, _| vec![0.0]);

    let entry = match name {
        "zero" => {
            let mut gen = base(zero_coeff.clone(), zero_coeff, XiKind::TerminalW, 1.0, 0.0);
            gen.phi = Some(Arc::new(|_| 0.0));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: Some(ClosedForm::Martingale),
                satisfies_h123: true,
                description: "f = 0, g = 0, xi = W_T (martingale representation)".into(),
            }
        }
        "linear_drift" => {
            let a = param.unwrap_or(1.0);
            if !a.is_finite() {
                return Err(Error::config("linear_drift parameter must be finite"));
            }
            let mut gen = base(
                Arc::new(move |_t, y, _z, _| vec![a * y[0]]),
                zero_coeff,
                XiKind::TerminalW,
                1.0,
                a.max(0.0),
            );
            gen.phi = Some(Arc::new(move |s| math::abs(a) * s));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: Some(ClosedForm::LinearDrift { a }),
                satisfies_h123: true,
                description: format!("f = {a}·y, g = 0, xi = W_T (exponential rescaling)"),
            }
        }
        "linear_g" => {
            // Constant (degree-zero) backward coefficient: the g·ΔB term
            // telescopes exactly, giving the closed form below. Note that
            // g(·,0,0) = beta ≠ 0, so the H3 set does not hold.
            let beta = param.unwrap_or(0.5);
            if !beta.is_finite() {
                return Err(Error::config("linear_g parameter must be finite"));
            }
            let mut gen = base(
                zero_coeff,
                Arc::new(move |_t, _y, _z, _| vec![beta]),
                XiKind::TerminalW,
                1.0,
                0.0,
            );
            gen.phi = Some(Arc::new(|_| 0.0));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: Some(ClosedForm::ConstantG { c: beta }),
                satisfies_h123: false,
                description: format!("f = 0, g = {beta} (constant), xi = W_T"),
            }
        }
        "monotone_cubic" => {
            let mut gen = base(
                Arc::new(|_t, y, z, _| vec![-y[0] * y[0] * y[0] + z[0]]),
                Arc::new(|_t, _y, z, _| vec![0.5 * z[0]]),
                XiKind::TerminalW,
                1.0,
                0.0,
            );
            gen.phi = Some(Arc::new(|s| s * s * s));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: None,
                satisfies_h123: true,
                description: "f = -y^3 + z (monotone, non-Lipschitz), g = z/2, xi = W_T".into(),
            }
        }
        "quadratic_bad" => {
            let mut gen = base(
                Arc::new(|_t, y, _z, _| vec![y[0] * y[0]]),
                zero_coeff,
                XiKind::TerminalW,
                1.0,
                0.0,
            );
            gen.phi = Some(Arc::new(|s| s * s));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: None,
                satisfies_h123: false,
                description: "f = y^2: violates the monotonicity bound (mu = 0)".into(),
            }
        }
        "heavy_tail_xi" => {
            let beta = param.unwrap_or(0.6);
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::config("heavy_tail_xi parameter must be positive"));
            }
            let mut gen = base(
                Arc::new(|_t, y, _z, _| vec![-y[0]]),
                Arc::new(|_t, _y, z, _| vec![0.5 * z[0]]),
                XiKind::HeavyTail { beta },
                1.0,
                0.0,
            );
            gen.phi = Some(Arc::new(|s| s));
            CatalogEntry {
                name: name.into(),
                gen,
                closed_form: None,
                satisfies_h123: true,
                description: format!(
                    "f = -y, g = z/2, xi = |W_T|^(-{beta}): p-integrable, not square-integrable"
                ),
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown catalog problem `{other}`; known: {}",
                CATALOG_NAMES.join(", ")
            )))
        }
    };
    Ok(entry)
}

/// All entries with default parameters.
pub fn all_default() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|n| build(n, None, None).expect("default catalog entries build"))
        .collect()
}
