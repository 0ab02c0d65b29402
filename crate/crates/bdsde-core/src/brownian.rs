//! Seeded ensembles of the two independent Brownian drivers.
//!
//! A [`BrownianBundle`] holds `M` forward-driver paths `W` (dimension `d`)
//! and `M` backward-driver paths `B` (dimension `ℓ`) on a common grid,
//! together with their increments. Increments are drawn from counter-based
//! streams keyed by `(master_seed, driver tag, path, fine step)`, so
//! regeneration is bit-identical and independent of evaluation order, and
//! the `W` and `B` streams can never overlap.
//!
//! For convergence studies the bundle can be sampled in refinement-coupled
//! mode: increments are drawn on a finer grid of `N · 2^j` steps and coarse
//! increments are pairwise sums, so the grids with `N` and `2N` steps under
//! a shared `finest_steps` anchor satisfy
//! `ΔW^(N)_i = ΔW^(2N)_{2i} + ΔW^(2N)_{2i+1}` exactly.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::math;
use crate::rng::{CounterRng, TAG_B, TAG_W};
use crate::series::PathArray;

/// Ensemble of forward and backward driver paths with their increments.
#[derive(Debug, Clone)]
pub struct BrownianBundle {
    paths: usize,
    dim_d: usize,
    dim_l: usize,
    master_seed: u64,
    steps: usize,
    /// Node values, `paths × (N+1) × d`, `W_0 = 0`.
    w: PathArray,
    /// Node values, `paths × (N+1) × ℓ`, `B_0 = 0`.
    b: PathArray,
    /// Increments, `paths × N × d`.
    dw: PathArray,
    /// Increments, `paths × N × ℓ`.
    db: PathArray,
}

/// Samples a bundle on `grid` without refinement coupling.
pub fn sample_brownian(
    grid: &TimeGrid,
    paths: usize,
    dim_d: usize,
    dim_l: usize,
    master_seed: u64,
) -> Result<BrownianBundle> {
    sample_brownian_coupled(grid, paths, dim_d, dim_l, master_seed, grid.steps())
}

/// Samples a bundle whose increments are pairwise sums of draws made on a
/// `finest_steps` grid; `finest_steps` must equal `grid.steps() · 2^j`.
///
/// Bundles sampled from the same seed and the same `finest_steps` anchor are
/// coupled across grid resolutions.
pub fn sample_brownian_coupled(
    grid: &TimeGrid,
    paths: usize,
    dim_d: usize,
    dim_l: usize,
    master_seed: u64,
    finest_steps: usize,
) -> Result<BrownianBundle> {
    if paths == 0 || dim_d == 0 || dim_l == 0 {
        return Err(Error::config(
            "path count and driver dimensions must be positive",
        ));
    }
    let n = grid.steps();
    if finest_steps % n != 0 || !(finest_steps / n).is_power_of_two() {
        return Err(Error::config(format!(
            "finest_steps {finest_steps} must be steps {n} times a power of two"
        )));
    }

    let mut dw = PathArray::zeros(paths, n, dim_d);
    let mut db = PathArray::zeros(paths, n, dim_l);
    let dt_fine = grid.horizon() / finest_steps as f64;
    let sqrt_dt_fine = math::sqrt(dt_fine);
    let mut scratch = vec![0.0; finest_steps];

    for m in 0..paths {
        for c in 0..dim_d {
            fill_coarse_increments(
                &mut scratch,
                master_seed,
                TAG_W,
                m,
                c,
                finest_steps,
                n,
                sqrt_dt_fine,
            );
            for (i, &v) in scratch[..n].iter().enumerate() {
                dw.at_mut(m, i)[c] = v;
            }
        }
        for c in 0..dim_l {
            fill_coarse_increments(
                &mut scratch,
                master_seed,
                TAG_B,
                m,
                c,
                finest_steps,
                n,
                sqrt_dt_fine,
            );
            for (i, &v) in scratch[..n].iter().enumerate() {
                db.at_mut(m, i)[c] = v;
            }
        }
    }

    let w = accumulate(&dw, paths, n, dim_d);
    let b = accumulate(&db, paths, n, dim_l);
    Ok(BrownianBundle {
        paths,
        dim_d,
        dim_l,
        master_seed,
        steps: n,
        w,
        b,
        dw,
        db,
    })
}

/// Draws `finest` fine increments for one `(path, coordinate)` and folds
/// them pairwise down to `coarse` entries (left in `scratch[..coarse]`).
#[allow(clippy::too_many_arguments)]
fn fill_coarse_increments(
    scratch: &mut [f64],
    master_seed: u64,
    tag: u64,
    path: usize,
    coord: usize,
    finest: usize,
    coarse: usize,
    sqrt_dt_fine: f64,
) {
    for (f, slot) in scratch[..finest].iter_mut().enumerate() {
        let mut rng = CounterRng::for_stream(master_seed, tag, path as u64, f as u64);
        // Coordinates share the per-(path, step) stream; coordinate c is the
        // c-th normal of the stream.
        let mut z = rng.normal();
        for _ in 0..coord {
            z = rng.normal();
        }
        *slot = sqrt_dt_fine * z;
    }
    let mut len = finest;
    while len > coarse {
        len /= 2;
        for i in 0..len {
            scratch[i] = scratch[2 * i] + scratch[2 * i + 1];
        }
    }
}

fn accumulate(inc: &PathArray, paths: usize, steps: usize, dim: usize) -> PathArray {
    let mut nodes = PathArray::zeros(paths, steps + 1, dim);
    for m in 0..paths {
        for i in 0..steps {
            for c in 0..dim {
                let prev = nodes.at(m, i)[c];
                nodes.at_mut(m, i + 1)[c] = prev + inc.at(m, i)[c];
            }
        }
    }
    nodes
}

/// Redraws the forward driver from `new_seed` while keeping the backward
/// paths of `bundle` bit-identical.
///
/// Used by probes that need an independent regression ensemble for the
/// *same* conditional problem: the frozen backward path defines the problem
/// instance, the forward ensemble only feeds the regressions.
pub fn resample_forward(
    bundle: &BrownianBundle,
    grid: &TimeGrid,
    new_seed: u64,
) -> Result<BrownianBundle> {
    let fresh = sample_brownian(
        grid,
        bundle.paths(),
        bundle.dim_d(),
        bundle.dim_l(),
        new_seed,
    )?;
    BrownianBundle::from_increments(grid, fresh.dw, bundle.db.clone(), new_seed)
}

impl BrownianBundle {
    /// Builds a bundle directly from increment arrays (node values are
    /// accumulated); mostly useful in tests that need hand-crafted drivers.
    pub fn from_increments(
        grid: &TimeGrid,
        dw: PathArray,
        db: PathArray,
        master_seed: u64,
    ) -> Result<Self> {
        let n = grid.steps();
        if dw.len() != n || db.len() != n || dw.paths() != db.paths() {
            return Err(Error::dimension(format!(
                "increment arrays must be paths × {n} × dim with matching path counts"
            )));
        }
        let (paths, dim_d, dim_l) = (dw.paths(), dw.width(), db.width());
        let w = accumulate(&dw, paths, n, dim_d);
        let b = accumulate(&db, paths, n, dim_l);
        Ok(BrownianBundle {
            paths,
            dim_d,
            dim_l,
            master_seed,
            steps: n,
            w,
            b,
            dw,
            db,
        })
    }

    #[inline]
    pub fn paths(&self) -> usize {
        self.paths
    }

    #[inline]
    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    #[inline]
    pub fn dim_l(&self) -> usize {
        self.dim_l
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// `W_{t_i}` of one path, length `d`.
    #[inline]
    pub fn w_at(&self, path: usize, node: usize) -> &[f64] {
        self.w.at(path, node)
    }

    /// `B_{t_i}` of one path, length `ℓ`.
    #[inline]
    pub fn b_at(&self, path: usize, node: usize) -> &[f64] {
        self.b.at(path, node)
    }

    /// `ΔW_i = W_{t_{i+1}} − W_{t_i}` of one path, length `d`.
    #[inline]
    pub fn dw_at(&self, path: usize, step: usize) -> &[f64] {
        self.dw.at(path, step)
    }

    /// `ΔB_i` of one path, length `ℓ`.
    #[inline]
    pub fn db_at(&self, path: usize, step: usize) -> &[f64] {
        self.db.at(path, step)
    }

    /// The whole `W` path of one path index as an `(N+1) × d` slice.
    #[inline]
    pub fn w_path(&self, path: usize) -> &[f64] {
        self.w.path(path)
    }

    pub fn w(&self) -> &PathArray {
        &self.w
    }

    pub fn b(&self) -> &PathArray {
        &self.b
    }

    pub fn dw(&self) -> &PathArray {
        &self.dw
    }

    pub fn db(&self) -> &PathArray {
        &self.db
    }
}
