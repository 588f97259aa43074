//! Angle of arrival from per-antenna matched-filter peaks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::detect::Detection;
use super::rdmap::{matched_grid, matched_sum};
use crate::channel::RadarFrame;
use crate::dft;
use crate::error::{IsacError, Result};
use crate::model::{array_steering, check_grids, ArrayConfig, FrameConfig, PowerGrid, SymbolGrid};

/// Receive-beamformed grid `sum_i conj(a_r,i(angle)) y_i`; its noise variance
/// is `Nr sigma^2`.
pub fn combine_antennas(frame: &RadarFrame, angle: f64, arrays: &ArrayConfig) -> Result<DMatrix<Complex64>> {
    let nr = frame.n_antennas();
    if nr == 0 {
        return Err(IsacError::Empty("antennas"));
    }
    let a = array_steering(angle, nr, arrays.element_spacing, arrays.wavelength, None)?;
    let mut out = DMatrix::zeros(frame.antennas[0].nrows(), frame.antennas[0].ncols());
    for (y, w) in frame.antennas.iter().zip(&a) {
        out += y * w.conj();
    }
    Ok(out)
}

/// Complex matched-filter peak of every antenna at a detection's `(delay, doppler)`.
pub fn antenna_snapshots(
    frame: &RadarFrame,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    det: &Detection,
) -> Result<Vec<Complex64>> {
    frame
        .antennas
        .iter()
        .map(|y| matched_grid(y, x, p).map(|g| matched_sum(&g, cfg, det.delay, det.doppler)))
        .collect()
}

/// Angle whose steering vector best matches `z`: zero-padded spatial DFT,
/// quadratic interpolation of the magnitude around the peak bin.
pub fn spatial_peak_angle(z: &[Complex64], arrays: &ArrayConfig) -> Result<f64> {
    let nr = z.len();
    if nr < 2 {
        return Err(IsacError::arg(
            "n_rx",
            "angle estimation needs at least two receive antennas",
        ));
    }
    let ns = (16 * nr).next_power_of_two().max(1024);
    let mut buf = vec![Complex64::default(); ns];
    buf[..nr].copy_from_slice(z);
    dft::plan(ns, false).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|v| v.norm()).collect();
    let k = mag
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > mag[best] { i } else { best });
    let (l, r) = (mag[(k + ns - 1) % ns], mag[(k + 1) % ns]);
    let denom = l - 2.0 * mag[k] + r;
    let delta = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    let mut u = (k as f64 + delta) / ns as f64;
    if u >= 0.5 {
        u -= 1.0;
    }
    // the DFT kernel e^{-j 2 pi i k / ns} matches e^{+j 2 pi i d sin(phi) / lambda}
    let s = (u * arrays.wavelength / arrays.element_spacing).clamp(-1.0, 1.0);
    Ok(s.asin())
}

/// Fills in the angle of each detection.
pub fn estimate_angles(
    frame: &RadarFrame,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    arrays: &ArrayConfig,
    detections: &[Detection],
) -> Result<Vec<Detection>> {
    check_grids(cfg, x, p)?;
    if frame.n_antennas() < 2 {
        return Err(IsacError::arg(
            "n_rx",
            "angle estimation needs at least two receive antennas",
        ));
    }
    let grids: Vec<DMatrix<Complex64>> = frame
        .antennas
        .iter()
        .map(|y| matched_grid(y, x, p))
        .collect::<Result<_>>()?;
    detections
        .iter()
        .map(|d| {
            let z: Vec<Complex64> = grids.iter().map(|g| matched_sum(g, cfg, d.delay, d.doppler)).collect();
            Ok(Detection {
                angle: spatial_peak_angle(&z, arrays)?,
                ..*d
            })
        })
        .collect()
}
