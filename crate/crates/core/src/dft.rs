//! FFT plumbing shared by the modulators and the radar receiver.
//!
//! Grids are `N x M` column-major matrices (subcarrier/fast-time along rows,
//! symbol/slow-time along columns), so every per-symbol transform runs on a
//! contiguous column slice.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Cached plan for an unnormalized transform (`inverse` uses `e^{+j}`).
pub fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

fn transform_columns(a: &mut DMatrix<Complex64>, inverse: bool, scale: f64) {
    let n = a.nrows();
    if n == 0 {
        return;
    }
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for mut col in a.column_iter_mut() {
        let s = col.as_mut_slice();
        fft.process_with_scratch(s, &mut scratch);
        if scale != 1.0 {
            s.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// `F_N * a` with the unitary DFT `[F_N]_{l,n} = e^{-j2pi nl/N}/sqrt(N)`.
pub fn unitary_dft_columns(a: &mut DMatrix<Complex64>) {
    let s = 1.0 / (a.nrows() as f64).sqrt();
    transform_columns(a, false, s);
}

/// `F_N^H * a`.
pub fn unitary_idft_columns(a: &mut DMatrix<Complex64>) {
    let s = 1.0 / (a.nrows() as f64).sqrt();
    transform_columns(a, true, s);
}

/// Unnormalized transform of each column.
pub fn fft_columns(a: &mut DMatrix<Complex64>, inverse: bool) {
    transform_columns(a, inverse, 1.0);
}

/// Unnormalized transform of each row.
pub fn fft_rows(a: &mut DMatrix<Complex64>, inverse: bool) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return;
    }
    let fft = plan(cols, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); cols];
    for r in 0..rows {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = a[(r, c)];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (c, b) in buf.iter().enumerate() {
            a[(r, c)] = *b;
        }
    }
}

/// Unnormalized 1-D transform of a slice in place.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), inverse).process(buf);
}
