//! Successive strongest-echo extraction, optionally over a grid of fast-time
//! Doppler hypotheses.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::{cell_threshold, estimate_noise_var, per_cell_pfa, Detection, DetectionReport};
use super::rdmap::{
    echo_grid, golden_max, grid_energy, matched_grid, matched_sum, rd_map_from_matched, refine_peak, DEFAULT_PAD,
};
use crate::error::{IsacError, Result};
use crate::model::{cfo_phase_matrix, check_grids, FrameConfig, PowerGrid, SymbolGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionParams {
    pub k_max: usize,
    /// Frame-level false-alarm probability of each detection step.
    pub pfa: f64,
    /// Noise variance of the processed grid; `None` estimates it from the initial map.
    pub noise_var: Option<f64>,
    /// Stop once the residual energy falls below this fraction of the input energy.
    pub residual_floor: f64,
    pub pad_n: usize,
    pub pad_m: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            k_max: 8,
            pfa: 1e-3,
            noise_var: None,
            residual_floor: 0.0,
            pad_n: DEFAULT_PAD,
            pad_m: DEFAULT_PAD,
        }
    }
}

impl ExtractionParams {
    fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(IsacError::arg("k_max", "must be >= 1"));
        }
        if !(self.residual_floor >= 0.0) {
            return Err(IsacError::arg("residual_floor", "must be >= 0"));
        }
        if self.pad_n == 0 || self.pad_m == 0 {
            return Err(IsacError::arg("pad", "zero-padding factors must be >= 1"));
        }
        per_cell_pfa(self.pfa, 1).map(|_| ())
    }
}

/// Extraction output: the report plus the final residual grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub report: DetectionReport,
    pub residual: DMatrix<Complex64>,
}

struct Candidate {
    grid_index: usize,
    row: usize,
    col: usize,
    peak: f64,
}

fn derotate(y: &DMatrix<Complex64>, cfg: &FrameConfig, nu: f64) -> DMatrix<Complex64> {
    let mut r = y.clone();
    if nu != 0.0 {
        cfo_phase_matrix(-nu, cfg.n_subcarriers, cfg.elementary_duration()).apply(&mut r);
    }
    r
}

/// Extraction engine over fast-time Doppler hypotheses; `[0.0]` is the plain
/// extraction.
pub fn extract_with_grid(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    doppler_grid: &[f64],
    params: &ExtractionParams,
) -> Result<Extraction> {
    params.validate()?;
    check_grids(cfg, x, p)?;
    if doppler_grid.is_empty() {
        return Err(IsacError::Empty("doppler_grid"));
    }
    if y.shape() != x.shape() {
        return Err(IsacError::dims(format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    let energy = grid_energy(x, p);
    let (pn, pm) = (params.pad_n, params.pad_m);
    let cells = cfg.n_subcarriers * cfg.n_symbols;
    let eta = cell_threshold(per_cell_pfa(params.pfa, cells)?)?;
    let plain = doppler_grid.len() == 1 && doppler_grid[0] == 0.0;
    let grid_step = if doppler_grid.len() >= 2 {
        let mut s: Vec<f64> = doppler_grid.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };

    let noise_var = match params.noise_var {
        Some(v) => v,
        None => {
            let g = matched_grid(y, x, p)?;
            estimate_noise_var(&rd_map_from_matched(&g, cfg, energy, pn, pm)?, 1)
        }
    };
    let input_energy = y.norm_squared();
    let mut residual = y.clone();
    let mut detections: Vec<Detection> = Vec::new();
    if energy <= 0.0 || !(noise_var > 0.0) {
        return Ok(Extraction {
            report: DetectionReport {
                detections,
                threshold: eta,
                pfa_design: params.pfa,
            },
            residual,
        });
    }
    let tsym = cfg.symbol_duration();
    let half_tau = 1.0 / (cfg.n_subcarriers as f64 * pn as f64 * cfg.subcarrier_spacing);
    let half_nu = 1.0 / (cfg.n_symbols as f64 * pm as f64 * tsym);

    for _ in 0..params.k_max {
        if residual.norm_squared() <= params.residual_floor * input_energy {
            break;
        }
        let best = doppler_grid
            .par_iter()
            .enumerate()
            .map(|(gi, &nu)| -> Result<Candidate> {
                let g = matched_grid(&derotate(&residual, cfg, nu), x, p)?;
                let (row, col, peak) = rd_map_from_matched(&g, cfg, energy, pn, pm)?.peak();
                Ok(Candidate {
                    grid_index: gi,
                    row,
                    col,
                    peak,
                })
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(None::<Candidate>, |acc, c| match acc {
                Some(a) if a.peak >= c.peak => Some(a),
                _ => Some(c),
            })
            .expect("non-empty grid");
        let stat = best.peak * best.peak / (noise_var * energy);
        if stat < eta {
            break;
        }
        let mut nu_c = doppler_grid[best.grid_index];
        let mp = cfg.n_symbols * pm;
        let tau0 = best.row as f64 / (cfg.n_subcarriers as f64 * pn as f64 * cfg.subcarrier_spacing);
        let nu0 = (best.col as f64 - (mp / 2) as f64) / (mp as f64 * tsym);
        let mut g = matched_grid(&derotate(&residual, cfg, nu_c), x, p)?;
        let (mut tau, mut nu_s, mut a) = refine_peak(&g, cfg, tau0, nu0, half_tau, half_nu);
        if !plain && grid_step.is_finite() && grid_step > 0.0 {
            let objective = |v: f64| -> f64 {
                matched_grid(&derotate(&residual, cfg, v), x, p)
                    .map(|gg| matched_sum(&gg, cfg, tau, nu_s).norm_sqr())
                    .unwrap_or(0.0)
            };
            nu_c = golden_max(nu_c - grid_step / 2.0, nu_c + grid_step / 2.0, 24, objective);
            g = matched_grid(&derotate(&residual, cfg, nu_c), x, p)?;
            (tau, nu_s, a) = refine_peak(&g, cfg, tau, nu_s, half_tau, half_nu);
        }
        let nu = nu_s + ((nu_c - nu_s) * tsym).round() / tsym;
        let alpha = a / energy;
        let mut echo = echo_grid(x, p, cfg, tau, nu);
        if !plain {
            cfo_phase_matrix(nu, cfg.n_subcarriers, cfg.elementary_duration()).apply(&mut echo);
        }
        residual -= echo * alpha;
        detections.push(Detection::new(cfg, tau, nu, alpha, a.norm_sqr() / (noise_var * energy)));
    }
    detections.sort_by(|a, b| b.amplitude.norm().total_cmp(&a.amplitude.norm()));
    Ok(Extraction {
        report: DetectionReport {
            detections,
            threshold: eta,
            pfa_design: params.pfa,
        },
        residual,
    })
}

/// Detect the strongest echo, subtract its continuous-parameter
/// reconstruction and repeat until `k_max` targets, the GLRT threshold or the
/// residual-energy floor stops the loop. Targets are sorted by `|amplitude|`.
pub fn iterative_target_extraction(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    params: &ExtractionParams,
) -> Result<DetectionReport> {
    extract_with_grid(y, x, p, cfg, &[0.0], params).map(|e| e.report)
}

/// Unthresholded estimate of the strongest echo: the peak of the padded map,
/// refined to continuous delay and Doppler within one padded bin. The
/// statistic is `|A|^2 / E_g`, the peak power in units of the noise variance
/// times the grid energy.
pub fn estimate_dominant_target(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    pad_n: usize,
    pad_m: usize,
) -> Result<Detection> {
    check_grids(cfg, x, p)?;
    let g = matched_grid(y, x, p)?;
    let energy = grid_energy(x, p);
    let map = rd_map_from_matched(&g, cfg, energy, pad_n, pad_m)?;
    let (i, j, _) = map.peak();
    let (tau, nu, a) = refine_peak(
        &g,
        cfg,
        map.delay_of(i),
        map.doppler_of(j),
        1.0 / (map.values.nrows() as f64 * cfg.subcarrier_spacing),
        1.0 / (map.values.ncols() as f64 * cfg.symbol_duration()),
    );
    Ok(Detection::new(cfg, tau, nu, a / energy, a.norm_sqr() / energy))
}
