//! Memory-polynomial power amplifier.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::waveform::SampleStream;

/// `y(n) = sum_k sum_m a[k][m] x(n-m) |x(n-m)|^(2k)`, i.e. odd orders
/// `p = 2k + 1`, memory depth `a[k].len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpPaModel {
    pub coeffs: Vec<Vec<Complex64>>,
}

impl MpPaModel {
    pub fn identity() -> Self {
        MpPaModel {
            coeffs: vec![vec![Complex64::new(1.0, 0.0)]],
        }
    }

    pub fn memory_depth(&self) -> usize {
        self.coeffs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Exact memory-polynomial output, history before the first sample is zero.
pub fn apply_pa(stream: &SampleStream, model: &MpPaModel) -> Result<SampleStream> {
    if model.coeffs.is_empty() || model.coeffs.iter().all(Vec::is_empty) {
        return Err(IsacError::Empty("PA coefficients"));
    }
    let x = &stream.samples;
    let out = (0..x.len())
        .map(|n| {
            let mut acc = Complex64::default();
            for (k, row) in model.coeffs.iter().enumerate() {
                for (m, a) in row.iter().enumerate() {
                    if *a == Complex64::default() || m > n {
                        continue;
                    }
                    let v = x[n - m];
                    acc += if k == 0 {
                        a * v
                    } else {
                        a * v * v.norm_sqr().powi(k as i32)
                    };
                }
            }
            acc
        })
        .collect();
    Ok(SampleStream::new(out, stream.fs))
}
