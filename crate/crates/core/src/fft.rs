//! Cached FFT plans and batched multi-axis transforms.
//!
//! The transform convention follows the discrete Fourier basis
//! `T_k(x) = exp(i v_k (x + L))` on each axis: the forward transform is
//! unnormalized and the inverse carries the `1/prod N` factor, which callers
//! usually fold into their frequency-space multipliers via [`GridEngine::inv_scale`].

use crate::grid::GridSpec;
use crate::C64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Grids below this size are transformed on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

pub(crate) struct GridEngine {
    grid: GridSpec,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    wave: Vec<Vec<f64>>,
    coord: Vec<Vec<f64>>,
}

type EngineKey = (Vec<u64>, Vec<usize>);

static ENGINES: Lazy<Mutex<HashMap<EngineKey, Arc<GridEngine>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

impl GridEngine {
    pub fn get(grid: &GridSpec) -> Arc<GridEngine> {
        let key = grid.key();
        let mut cache = ENGINES.lock().unwrap();
        if let Some(e) = cache.get(&key) {
            return Arc::clone(e);
        }
        let mut planner = FftPlanner::new();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        let mut wave = Vec::new();
        let mut coord = Vec::new();
        for axis in 0..grid.dim() {
            let n = grid.points()[axis];
            fwd.push(planner.plan_fft_forward(n));
            inv.push(planner.plan_fft_inverse(n));
            wave.push(grid.wavenumbers(axis));
            coord.push(grid.coords(axis));
        }
        let engine = Arc::new(GridEngine {
            grid: grid.clone(),
            fwd,
            inv,
            wave,
            coord,
        });
        cache.insert(key, Arc::clone(&engine));
        engine
    }

    pub fn wave(&self, axis: usize) -> &[f64] {
        &self.wave[axis]
    }

    pub fn coord(&self, axis: usize) -> &[f64] {
        &self.coord[axis]
    }

    /// Factor the unnormalized inverse transform leaves out.
    pub fn inv_scale(&self) -> f64 {
        1.0 / self.grid.total_points() as f64
    }

    /// In-place forward transform over all axes.
    pub fn forward(&self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.grid.total_points());
        for axis in 0..self.grid.dim() {
            self.apply_axis(data, axis, true);
        }
    }

    /// In-place unnormalized inverse transform over all axes.
    pub fn inverse(&self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.grid.total_points());
        for axis in 0..self.grid.dim() {
            self.apply_axis(data, axis, false);
        }
    }

    pub fn forward_copy(&self, src: &[C64]) -> Vec<C64> {
        let mut out = src.to_vec();
        self.forward(&mut out);
        out
    }

    fn apply_axis(&self, data: &mut [C64], axis: usize, forward: bool) {
        let n = self.grid.points()[axis];
        let fft = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };
        let stride: usize = self.grid.points()[..axis].iter().product();
        let parallel = data.len() >= PAR_THRESHOLD;
        if stride == 1 {
            apply_contiguous(data, n, fft, parallel);
        } else {
            apply_strided(data, n, stride, fft, parallel);
        }
    }
}

fn apply_contiguous(data: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>, parallel: bool) {
    let scratch_len = fft.get_inplace_scratch_len();
    if parallel {
        data.par_chunks_exact_mut(n)
            .with_min_len(4)
            .for_each_init(
                || vec![C64::default(); scratch_len],
                |scratch, row| fft.process_with_scratch(row, scratch),
            );
    } else {
        let mut scratch = vec![C64::default(); scratch_len];
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
    }
}

struct SyncPtr(*mut C64);
// SAFETY: used only below, where distinct line indices address disjoint
// element sets of the underlying buffer.
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

impl SyncPtr {
    fn get(&self) -> *mut C64 {
        self.0
    }
}

fn apply_strided(data: &mut [C64], n: usize, stride: usize, fft: &Arc<dyn Fft<f64>>, parallel: bool) {
    let num_lines = data.len() / n;
    let scratch_len = fft.get_inplace_scratch_len();
    let ptr = SyncPtr(data.as_mut_ptr());
    let line_job = |line: usize, buf: &mut [C64], scratch: &mut [C64]| {
        // Line (outer, inner) covers indices outer*n*stride + inner + k*stride,
        // pairwise disjoint across lines.
        let outer = line / stride;
        let inner = line % stride;
        let start = outer * n * stride + inner;
        unsafe {
            let p = ptr.get();
            for (k, b) in buf.iter_mut().enumerate() {
                *b = *p.add(start + k * stride);
            }
        }
        fft.process_with_scratch(buf, scratch);
        unsafe {
            let p = ptr.get();
            for (k, b) in buf.iter().enumerate() {
                *p.add(start + k * stride) = *b;
            }
        }
    };
    if parallel {
        (0..num_lines)
            .into_par_iter()
            .with_min_len(8)
            .for_each_init(
                || (vec![C64::default(); n], vec![C64::default(); scratch_len]),
                |(buf, scratch), line| line_job(line, buf, scratch),
            );
    } else {
        let mut buf = vec![C64::default(); n];
        let mut scratch = vec![C64::default(); scratch_len];
        for line in 0..num_lines {
            line_job(line, &mut buf, &mut scratch);
        }
    }
}
