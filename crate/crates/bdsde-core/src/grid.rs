//! Uniform time grids on `[0, T]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A uniform partition `0 = t_0 < t_1 < … < t_N = T`.
///
/// All processes in this crate live on such a grid; `dt = T / N` and
/// `nodes[i] = T · i / N`, so the endpoints are exact and the nodes are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
    nodes: Vec<f64>,
}

/// Builds a uniform grid over `[0, horizon]` with `steps` intervals.
///
/// Rejects non-positive or non-finite horizons and `steps == 0`.
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::config(format!(
            "grid horizon must be a positive finite real, got {horizon}"
        )));
    }
    if steps == 0 {
        return Err(Error::config("grid must have at least one step"));
    }
    let dt = horizon / steps as f64;
    let nodes = (0..=steps)
        .map(|i| horizon * (i as f64 / steps as f64))
        .collect();
    Ok(TimeGrid {
        horizon,
        steps,
        dt,
        nodes,
    })
}

impl TimeGrid {
    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `N`.
    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The `N + 1` grid nodes.
    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }
}
