//! Phase-noise compensation and PN-based range disambiguation.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Mode, RadarFrame};
use crate::dft;
use crate::error::{IsacError, Result};
use crate::model::{check_grids, FrameConfig, PowerGrid, SymbolGrid};
use crate::phase_noise::{analytic_pn_covariance, PnCovariance, PnModel};
use crate::radar_rx::{echo_grid, grid_energy, matched_grid, rd_map_from_matched, refine_peak, Detection, DEFAULT_PAD};

pub const DEFAULT_PN_ITERS: usize = 3;

/// Minimum number of usable cells for phase extraction.
pub const MIN_PHASE_CELLS: usize = 16;

/// Solves `S z = b` for a symmetric positive definite `S` whose entries vanish
/// beyond `bw` off the diagonal.
fn banded_cholesky_solve(s: &DMatrix<f64>, bw: usize, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut d = s[(j, j)];
        for k in lo..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..(j + bw + 1).min(n) {
            let mut v = s[(i, j)];
            for k in i.saturating_sub(bw)..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        let mut v = z[i];
        for k in i.saturating_sub(bw)..i {
            v -= l[(i, k)] * z[k];
        }
        z[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in i + 1..(i + bw + 1).min(n) {
            v -= l[(k, i)] * z[k];
        }
        z[i] = v / l[(i, i)];
    }
    Some(z)
}

/// MAP phase estimate of one symbol: `xi = C A (A C A + s I)^{-1} b`.
fn map_symbol(c: &[f64], bw: usize, a: &[f64], b: &[f64], reg: f64) -> Vec<f64> {
    let n = a.len();
    let cij = |i: usize, j: usize| {
        let d = i.abs_diff(j);
        if d <= bw {
            c[d]
        } else {
            0.0
        }
    };
    let z = if 4 * bw < n {
        let s = DMatrix::from_fn(n, n, |i, j| a[i] * cij(i, j) * a[j] + if i == j { reg } else { 0.0 });
        banded_cholesky_solve(&s, bw, b)
    } else {
        None
    };
    let z = z.unwrap_or_else(|| {
        let s = DMatrix::from_fn(n, n, |i, j| {
            a[i] * c[i.abs_diff(j)] * a[j] + if i == j { reg } else { 0.0 }
        });
        let rhs = nalgebra::DVector::from_column_slice(b);
        match s.clone().cholesky() {
            Some(ch) => ch.solve(&rhs).as_slice().to_vec(),
            None => s
                .lu()
                .solve(&rhs)
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| vec![0.0; n]),
        }
    });
    let az: Vec<f64> = a.iter().zip(&z).map(|(x, y)| x * y).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw + 1).min(n);
            (lo..hi).map(|j| cij(i, j) * az[j]).sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnCompensation {
    /// Every antenna multiplied by `e^{-j xi}`.
    pub frame: RadarFrame,
    /// Estimated self-referenced phase `xi`, `N x M`.
    pub phase: DMatrix<f64>,
    /// Final dominant-target delay (s) and Doppler (Hz).
    pub delay: f64,
    pub doppler: f64,
    pub amplitude: Complex64,
}

/// Alternating PN compensation around the dominant echo of antenna 0.
///
/// Each pass linearises `y = r e^{j xi} + w` around the current estimate,
/// forms the per-symbol MAP estimate under the analytic intra-symbol prior at
/// the current delay (`sigma^2/2` Tikhonov term), derotates the frame and
/// re-estimates the delay and Doppler. A zero-linewidth model leaves the frame
/// unchanged.
pub fn pn_compensate(
    frame: &RadarFrame,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    model: &PnModel,
    n_iters: usize,
) -> Result<PnCompensation> {
    check_grids(cfg, x, p)?;
    model.validate()?;
    let y = frame.antennas.first().ok_or(IsacError::Empty("antennas"))?;
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let energy = grid_energy(x, p);
    let half_tau = 1.0 / (n as f64 * DEFAULT_PAD as f64 * cfg.subcarrier_spacing);
    let half_nu = 1.0 / (m as f64 * DEFAULT_PAD as f64 * cfg.symbol_duration());

    let g = matched_grid(y, x, p)?;
    let map = rd_map_from_matched(&g, cfg, energy, DEFAULT_PAD, DEFAULT_PAD)?;
    let (i, j, _) = map.peak();
    let (mut tau, mut nu, mut a) = refine_peak(&g, cfg, map.delay_of(i), map.doppler_of(j), half_tau, half_nu);
    let mut xi = DMatrix::<f64>::zeros(n, m);
    let mean_power = y.norm_squared() / (n * m) as f64;

    for _ in 0..n_iters {
        if energy <= 0.0 || a.norm() == 0.0 {
            break;
        }
        let cov = analytic_pn_covariance(model, tau.max(0.0), cfg, true)?;
        let c = cov.intra_symbol();
        if c[0] <= 0.0 {
            break;
        }
        let bw = c.iter().rposition(|v| v.abs() > 1e-12 * c[0]).unwrap_or(0);
        let r = echo_grid(x, p, cfg, tau, nu) * (a / energy);
        let reg = (frame.record.noise_var / 2.0).max(1e-12 * mean_power);
        let cols: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|mm| {
                let mut amp = vec![0.0; n];
                let mut rhs = vec![0.0; n];
                for l in 0..n {
                    let rr = r[(l, mm)] * Complex64::from_polar(1.0, xi[(l, mm)]);
                    let mag = rr.norm();
                    amp[l] = mag;
                    if mag > 0.0 {
                        let e = (rr.conj() * (y[(l, mm)] - rr)).im / mag;
                        rhs[l] = e + mag * xi[(l, mm)];
                    }
                }
                map_symbol(&c, bw, &amp, &rhs, reg)
            })
            .collect();
        for (mm, col) in cols.iter().enumerate() {
            xi.column_mut(mm).copy_from_slice(col);
        }
        let mut yc = y.clone();
        yc.zip_apply(&xi, |v, ph| *v *= Complex64::from_polar(1.0, -ph));
        let g = matched_grid(&yc, x, p)?;
        (tau, nu, a) = refine_peak(&g, cfg, tau, nu, half_tau, half_nu);
    }
    let out = frame.map(|ant| {
        let mut z = ant.clone();
        z.zip_apply(&xi, |v, ph| *v *= Complex64::from_polar(1.0, -ph));
        z
    });
    Ok(PnCompensation {
        frame: out,
        phase: xi,
        delay: tau,
        doppler: nu,
        amplitude: a / energy.max(f64::MIN_POSITIVE),
    })
}

/// Empirical lag covariance of masked phase samples, in the
/// `(2N-1) x (2M-1)` kernel layout, with the number of sample pairs per lag.
pub fn empirical_lag_covariance(phase: &DMatrix<f64>, mask: &DMatrix<bool>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = phase.shape();
    let (np, mp) = (2 * n, 2 * m);
    let autocorr = |f: &dyn Fn(usize, usize) -> f64| -> DMatrix<f64> {
        let mut a = DMatrix::<Complex64>::zeros(np, mp);
        for jj in 0..m {
            for ii in 0..n {
                a[(ii, jj)] = Complex64::new(f(ii, jj), 0.0);
            }
        }
        dft::fft_columns(&mut a, false);
        dft::fft_rows(&mut a, false);
        a.apply(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
        dft::fft_columns(&mut a, true);
        dft::fft_rows(&mut a, true);
        let s = 1.0 / (np * mp) as f64;
        DMatrix::from_fn(2 * n - 1, 2 * m - 1, |i, j| {
            let dl = (i as i64 - (n as i64 - 1)).rem_euclid(np as i64) as usize;
            let dm = (j as i64 - (m as i64 - 1)).rem_euclid(mp as i64) as usize;
            a[(dl, dm)].re * s
        })
    };
    let sums = autocorr(&|i, j| if mask[(i, j)] { phase[(i, j)] } else { 0.0 });
    let counts = autocorr(&|i, j| if mask[(i, j)] { 1.0 } else { 0.0 }).map(|v| v.round());
    let cov = sums.zip_map(&counts, |s, c| if c > 0.0 { s / c } else { 0.0 });
    (cov, counts)
}

/// Count-weighted Frobenius distance between an empirical lag covariance and
/// an analytic kernel, normalised by the weighted norm of the empirical one.
pub fn covariance_matching_cost(empirical: &DMatrix<f64>, counts: &DMatrix<f64>, analytic: &PnCovariance) -> f64 {
    let k = analytic.kernel();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((e, c), a) in empirical.iter().zip(counts.iter()).zip(k.iter()) {
        num += c * (e - a) * (e - a);
        den += c * e * e;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeDisambiguation {
    /// m.
    pub range: f64,
    pub q: i64,
    /// `(q, matching cost)` per candidate.
    pub costs: Vec<(i64, f64)>,
    pub usable_cells: usize,
}

/// Selects the ambiguity interval of a dominant target from the delay
/// dependence of its self-referenced PN covariance.
///
/// The PN phase is read from `arg(y conj(r))` on cells where the
/// reconstructed echo `r` exceeds `3 sigma`; the lag covariance of those
/// samples (noise-phase variance removed at lag zero) is matched against the
/// analytic covariance at `tau + q / df` for every candidate `q`. The fine
/// range within the interval is not changed.
#[allow(clippy::too_many_arguments)]
pub fn pn_range_disambiguate(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    model: &PnModel,
    mode: Mode,
    coarse: &Detection,
    q_range: RangeInclusive<i64>,
    noise_var: f64,
) -> Result<RangeDisambiguation> {
    if mode != Mode::Monostatic {
        return Err(IsacError::RequiresMonostatic);
    }
    check_grids(cfg, x, p)?;
    model.validate()?;
    let qs: Vec<i64> = q_range
        .filter(|q| coarse.delay + *q as f64 / cfg.subcarrier_spacing >= 0.0)
        .collect();
    if qs.is_empty() {
        return Err(IsacError::Empty("range candidates"));
    }
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let energy = grid_energy(x, p);
    let g = matched_grid(y, x, p)?;
    let (tau, nu, a) = refine_peak(
        &g,
        cfg,
        coarse.delay,
        coarse.doppler,
        1.0 / (n as f64 * DEFAULT_PAD as f64 * cfg.subcarrier_spacing),
        1.0 / (m as f64 * DEFAULT_PAD as f64 * cfg.symbol_duration()),
    );
    if energy <= 0.0 {
        return Err(IsacError::LowSnr("no transmitted energy".into()));
    }
    let r = echo_grid(x, p, cfg, tau, nu) * (a / energy);
    let gate = 3.0 * noise_var.max(0.0).sqrt();
    let mask = r.map(|v| v.norm() > gate && v.norm() > 0.0);
    let used = mask.iter().filter(|b| **b).count();
    if used < MIN_PHASE_CELLS.max(n * m / 8) {
        return Err(IsacError::LowSnr(format!(
            "only {used} of {} cells exceed the 3-sigma phase gate",
            n * m
        )));
    }
    let mut phase = DMatrix::from_fn(n, m, |l, mm| {
        if mask[(l, mm)] {
            (y[(l, mm)] * r[(l, mm)].conj()).arg()
        } else {
            0.0
        }
    });
    let mean = phase.iter().sum::<f64>() / used as f64;
    phase.zip_apply(&mask, |v, b| {
        if b {
            *v -= mean
        }
    });
    let noise_phase = r
        .iter()
        .zip(mask.iter())
        .filter(|(_, b)| **b)
        .map(|(v, _)| noise_var / (2.0 * v.norm_sqr()))
        .sum::<f64>()
        / used as f64;
    let (mut emp, counts) = empirical_lag_covariance(&phase, &mask);
    emp[(n - 1, m - 1)] -= noise_phase;

    let costs: Vec<(i64, f64)> = qs
        .par_iter()
        .map(|&q| -> Result<(i64, f64)> {
            let cov = analytic_pn_covariance(model, coarse.delay + q as f64 / cfg.subcarrier_spacing, cfg, true)?;
            Ok((q, covariance_matching_cost(&emp, &counts, &cov)))
        })
        .collect::<Result<_>>()?;
    let best = costs.iter().fold(costs[0], |b, c| if c.1 < b.1 { *c } else { b });
    Ok(RangeDisambiguation {
        range: coarse.range + best.0 as f64 * cfg.range_ambiguity(),
        q: best.0,
        costs,
        usable_cells: used,
    })
}
