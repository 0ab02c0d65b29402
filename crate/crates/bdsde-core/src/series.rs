//! Flat per-path storage for processes sampled on a time grid.

use alloc::vec;
use alloc::vec::Vec;

/// A dense `paths × len × width` array of `f64`, stored row-major.
///
/// One row per `(path, index)` pair; `width` is the dimension of the stored
/// quantity (`d` for a driver state, `k` for `Y`, `k·d` for a flattened `Z`
/// block, ...). The layout is contiguous per path so a whole path can be
/// handed out as one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    data: Vec<f64>,
    paths: usize,
    len: usize,
    width: usize,
}

impl PathArray {
    pub fn zeros(paths: usize, len: usize, width: usize) -> Self {
        PathArray {
            data: vec![0.0; paths * len * width],
            paths,
            len,
            width,
        }
    }

    pub fn from_raw(data: Vec<f64>, paths: usize, len: usize, width: usize) -> Self {
        assert_eq!(data.len(), paths * len * width, "raw buffer size mismatch");
        PathArray {
            data,
            paths,
            len,
            width,
        }
    }

    #[inline]
    pub fn paths(&self) -> usize {
        self.paths
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// The `width`-sized entry at `(path, idx)`.
    #[inline]
    pub fn at(&self, path: usize, idx: usize) -> &[f64] {
        let start = (path * self.len + idx) * self.width;
        &self.data[start..start + self.width]
    }

    #[inline]
    pub fn at_mut(&mut self, path: usize, idx: usize) -> &mut [f64] {
        let start = (path * self.len + idx) * self.width;
        &mut self.data[start..start + self.width]
    }

    /// The whole path as one `len × width` slice.
    #[inline]
    pub fn path(&self, path: usize) -> &[f64] {
        let start = path * self.len * self.width;
        &self.data[start..start + self.len * self.width]
    }

    #[inline]
    pub fn path_mut(&mut self, path: usize) -> &mut [f64] {
        let start = path * self.len * self.width;
        &mut self.data[start..start + self.len * self.width]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
