//! Closed-form sensing and communication KPIs.
//!
//! Rates and mutual-information rewards are in bits (base-2 logarithms).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{ArrayConfig, FrameConfig, SPEED_OF_LIGHT};

/// Which receiver a subcarrier serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sensing,
    Comm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbBounds {
    /// m^2.
    pub range: f64,
    /// (m/s)^2.
    pub velocity: f64,
    /// rad^2.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    /// m.
    pub range: f64,
    /// m/s.
    pub velocity: f64,
    /// rad.
    pub angle: f64,
}

/// Every KPI of one configuration; all entries nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub crb_range: f64,
    pub crb_velocity: f64,
    pub crb_angle: f64,
    pub res_range: f64,
    pub res_velocity: f64,
    pub res_angle: f64,
    pub pd: f64,
    pub rate: f64,
    pub mi_sensing: f64,
    pub mi_comm: f64,
}

/// Effective bandwidth `df sqrt(N^2 - 1)`.
pub fn effective_bandwidth(cfg: &FrameConfig) -> f64 {
    let n = cfg.n_subcarriers as f64;
    cfg.subcarrier_spacing * (n * n - 1.0).sqrt()
}

/// Effective observation time `Tsym sqrt(M^2 - 1)`.
pub fn effective_duration(cfg: &FrameConfig) -> f64 {
    let m = cfg.n_symbols as f64;
    cfg.symbol_duration() * (m * m - 1.0).sqrt()
}

/// Effective aperture `d sqrt(Nr^2 - 1)`.
pub fn effective_aperture(arrays: &ArrayConfig) -> f64 {
    let n = arrays.n_rx as f64;
    arrays.element_spacing * (n * n - 1.0).sqrt()
}

/// Single-target CRBs for unit-amplitude symbols with uniform power, at
/// post-integration SNR `gamma` (linear). Bounds of unobservable parameters
/// (`N`, `M` or `Nr` equal to one) are infinite.
pub fn crb_bounds(gamma: f64, cfg: &FrameConfig, arrays: &ArrayConfig, angle: f64) -> Result<CrbBounds> {
    if !(gamma > 0.0) {
        return Err(IsacError::arg("gamma", format!("must be > 0, got {gamma}")));
    }
    let cos = angle.cos();
    if cos.abs() < 1e-12 {
        return Err(IsacError::Singular(format!("angle bound at endfire (angle = {angle})")));
    }
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let b = effective_bandwidth(cfg);
    let t = effective_duration(cfg);
    let d = effective_aperture(arrays);
    let lam = arrays.wavelength;
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    Ok(CrbBounds {
        range: 3.0 * c2 * inv(8.0 * gamma * PI * PI * b * b),
        velocity: 3.0 * c2 * inv(8.0 * gamma * PI * PI * cfg.carrier_freq.powi(2) * t * t),
        angle: 3.0 * lam * lam * inv(2.0 * gamma * PI * PI * d * d * cos * cos),
    })
}

/// Range, velocity and angle resolution `c/(2B)`, `lambda/(2 Ttot)`, `0.89 lambda / D`.
pub fn resolutions(cfg: &FrameConfig, arrays: &ArrayConfig) -> Resolutions {
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    Resolutions {
        range: SPEED_OF_LIGHT / 2.0 * inv(effective_bandwidth(cfg)),
        velocity: cfg.wavelength() / 2.0 * inv(effective_duration(cfg)),
        angle: 0.89 * arrays.wavelength * inv(effective_aperture(arrays)),
    }
}

/// `sum log2(1 + P |H|^2 / sigma^2)` over the grid.
pub fn achievable_rate(h: &DMatrix<Complex64>, p: &DMatrix<f64>, noise_var: f64) -> Result<f64> {
    if h.shape() != p.shape() {
        return Err(IsacError::dims(format!("{:?}", h.shape()), format!("{:?}", p.shape())));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0)) {
        return Err(IsacError::arg("power", format!("entries must be >= 0, got {v}")));
    }
    if !(noise_var > 0.0) {
        return Err(IsacError::arg("noise_var", "must be > 0"));
    }
    Ok(h.iter()
        .zip(p.iter())
        .map(|(g, q)| (q * g.norm_sqr() / noise_var).ln_1p() / std::f64::consts::LN_2)
        .sum())
}

/// `(M_s, M_u)`: `sum_n 1{w_n = i} log2(1 + q_{i,n} p_n)` for each receiver.
pub fn mi_reward(assignment: &[Role], powers: &[f64], q_sense: &[f64], q_comm: &[f64]) -> Result<(f64, f64)> {
    let n = assignment.len();
    for (name, len) in [
        ("powers", powers.len()),
        ("q_sense", q_sense.len()),
        ("q_comm", q_comm.len()),
    ] {
        if len != n {
            return Err(IsacError::dims(format!("{n} entries in {name}"), len));
        }
    }
    let mut out = (0.0, 0.0);
    for i in 0..n {
        match assignment[i] {
            Role::Sensing => out.0 += (q_sense[i] * powers[i]).ln_1p() / std::f64::consts::LN_2,
            Role::Comm => out.1 += (q_comm[i] * powers[i]).ln_1p() / std::f64::consts::LN_2,
        }
    }
    Ok(out)
}
