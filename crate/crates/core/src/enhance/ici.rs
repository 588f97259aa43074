//! ICI-aware joint Doppler/delay estimation and fast-time velocity disambiguation.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{cfo_phase_matrix, check_grids, FrameConfig, PowerGrid, SymbolGrid};
use crate::radar_rx::{
    matched_grid, refine_peak, Detection, DetectionReport, Extraction, ExtractionParams, DEFAULT_PAD,
};

/// Fast-time Doppler hypotheses covering `|v| <= max_velocity` in steps of
/// `step` Hz (both ends included, symmetric about zero).
pub fn doppler_grid(cfg: &FrameConfig, max_velocity: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max_velocity >= 0.0) {
        return Err(IsacError::arg("doppler_grid", "needs step > 0 and max_velocity >= 0"));
    }
    let nu_max = cfg.velocity_to_doppler(max_velocity);
    let k = (nu_max / step).ceil() as i64;
    Ok((-k..=k).map(|i| i as f64 * step).collect())
}

/// OMP-like extraction over Doppler hypotheses: every iteration compensates
/// the residual with `D(-nu)` for each grid point, keeps the best
/// `(nu, tau, slow-time bin)`, refines it, and subtracts the reconstructed
/// ICI-distorted echo. With the grid `[0]` this is exactly
/// [`iterative_target_extraction`](crate::radar_rx::iterative_target_extraction).
pub fn ici_joint_estimate(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    doppler_grid: &[f64],
    params: &ExtractionParams,
) -> Result<DetectionReport> {
    ici_joint_extract(y, x, p, cfg, doppler_grid, params).map(|e| e.report)
}

/// [`ici_joint_estimate`] returning the residual as well.
pub fn ici_joint_extract(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    doppler_grid: &[f64],
    params: &ExtractionParams,
) -> Result<Extraction> {
    crate::radar_rx::extract_with_grid(y, x, p, cfg, doppler_grid, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityDisambiguation {
    /// m/s.
    pub velocity: f64,
    pub q: i64,
    /// `(q, |matched peak|)` for every candidate.
    pub scores: Vec<(i64, f64)>,
}

/// Chooses among `coarse.velocity + q v_amb` the candidate whose fast-time
/// compensation `D(-nu_q)` maximises the matched-filter peak near the coarse
/// detection. The fine within-interval velocity is kept unchanged.
pub fn ici_velocity_disambiguate(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    coarse: &Detection,
    q_range: RangeInclusive<i64>,
) -> Result<VelocityDisambiguation> {
    check_grids(cfg, x, p)?;
    let qs: Vec<i64> = q_range.collect();
    if qs.is_empty() {
        return Err(IsacError::Empty("velocity candidates"));
    }
    let v_amb = cfg.velocity_ambiguity();
    let half_tau = 1.0 / (cfg.n_subcarriers as f64 * DEFAULT_PAD as f64 * cfg.subcarrier_spacing);
    let half_nu = 1.0 / (cfg.n_symbols as f64 * DEFAULT_PAD as f64 * cfg.symbol_duration());
    let scores: Vec<(i64, f64)> = qs
        .par_iter()
        .map(|&q| -> Result<(i64, f64)> {
            let nu = cfg.velocity_to_doppler(coarse.velocity + q as f64 * v_amb);
            let mut r = y.clone();
            cfo_phase_matrix(-nu, cfg.n_subcarriers, cfg.elementary_duration()).apply(&mut r);
            let g = matched_grid(&r, x, p)?;
            let (_, _, a) = refine_peak(&g, cfg, coarse.delay, coarse.doppler, half_tau, half_nu);
            Ok((q, a.norm()))
        })
        .collect::<Result<_>>()?;
    let best = scores.iter().fold(scores[0], |b, s| if s.1 > b.1 { *s } else { b });
    Ok(VelocityDisambiguation {
        velocity: coarse.velocity + best.0 as f64 * v_amb,
        q: best.0,
        scores,
    })
}
