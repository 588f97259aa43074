//! Oscillator phase noise: sample paths, the self-referenced multiplicative
//! PN matrix seen by a shared-oscillator receiver, and its covariance.
//!
//! A free-running oscillator with 3 dB linewidth `B` has a Lorentzian
//! spectrum, i.e. its phase is a Wiener process with diffusion rate
//! `D = 4 pi B` (increment variance `D dt`). A PLL-disciplined oscillator is
//! modelled as the same innovations fed through a first-order loop with
//! corner `f_L`: `dphi = -2 pi f_L phi dt + sqrt(D) dW`, an Ornstein-Uhlenbeck
//! process with
//!
//! ```text
//! R(d)  = (B / f_L) exp(-2 pi f_L |d|)
//! S(f)  = D / ((2 pi f)^2 + (2 pi f_L)^2)
//! ```
//!
//! The self-referenced phase `xi(t) = phi(t) - phi(t - tau)` then has
//! covariance `D max(0, tau - |d|)` (free running) or
//! `2R(d) - R(d + tau) - R(d - tau)` (PLL) at time lag `d`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::FrameConfig;
use crate::rng::{self, Stream};

/// Largest `N*M` for which the covariance is checked by a dense eigen decomposition.
pub const PSD_CHECK_MAX_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PnModel {
    FreeRunning {
        /// Hz.
        bw3db: f64,
    },
    Pll {
        /// Hz.
        loop_bw: f64,
        /// Hz.
        bw3db: f64,
    },
}

impl PnModel {
    pub fn validate(&self) -> Result<()> {
        let (bw, loop_bw) = match *self {
            PnModel::FreeRunning { bw3db } => (bw3db, 1.0),
            PnModel::Pll { loop_bw, bw3db } => (bw3db, loop_bw),
        };
        if !(bw.is_finite() && bw >= 0.0) {
            return Err(IsacError::arg("bw3db", format!("must be >= 0, got {bw}")));
        }
        if !(loop_bw.is_finite() && loop_bw > 0.0) {
            return Err(IsacError::arg("loop_bw", format!("must be > 0, got {loop_bw}")));
        }
        Ok(())
    }

    pub fn bw3db(&self) -> f64 {
        match *self {
            PnModel::FreeRunning { bw3db } | PnModel::Pll { bw3db, .. } => bw3db,
        }
    }

    /// `D = 4 pi B`, rad^2/s.
    pub fn diffusion(&self) -> f64 {
        4.0 * PI * self.bw3db()
    }

    /// Stationary autocovariance `R(d)` of the PLL phase; `None` for a free-running oscillator.
    pub fn autocovariance(&self, lag: f64) -> Option<f64> {
        match *self {
            PnModel::FreeRunning { .. } => None,
            PnModel::Pll { loop_bw, bw3db } => Some(bw3db / loop_bw * (-2.0 * PI * loop_bw * lag.abs()).exp()),
        }
    }

    /// One-sided-in-lag phase PSD `S(f)`, rad^2/Hz (two-sided in frequency).
    pub fn psd(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f;
        match *self {
            PnModel::FreeRunning { .. } => self.diffusion() / (w * w),
            PnModel::Pll { loop_bw, .. } => {
                let wl = 2.0 * PI * loop_bw;
                self.diffusion() / (w * w + wl * wl)
            }
        }
    }

    /// `Cov(xi(t), xi(t + lag))` for the self-referenced phase at delay `tau`.
    pub fn phase_difference_covariance(&self, lag: f64, tau: f64) -> f64 {
        let lag = lag.abs();
        match *self {
            PnModel::FreeRunning { .. } => self.diffusion() * (tau - lag).max(0.0),
            PnModel::Pll { .. } => {
                let r = |d: f64| self.autocovariance(d).unwrap_or(0.0);
                2.0 * r(lag) - r(lag + tau) - r(lag - tau)
            }
        }
    }
}

/// Samples the oscillator phase at nondecreasing `times` (s).
///
/// The free-running path starts at zero at `times[0]`; the PLL path starts
/// from its stationary distribution. Both updates are exact for any spacing.
pub fn sample_pn_at<R: Rng + ?Sized>(model: &PnModel, times: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&t0) = times.first() else {
        return out;
    };
    let d = model.diffusion();
    match *model {
        PnModel::FreeRunning { .. } => {
            let mut phi = 0.0;
            let mut prev = t0;
            for &t in times {
                let dt = (t - prev).max(0.0);
                phi += (d * dt).sqrt() * rng::normal(rng);
                out.push(phi);
                prev = t;
            }
        }
        PnModel::Pll { loop_bw, bw3db } => {
            let var = bw3db / loop_bw;
            let mut phi = var.sqrt() * rng::normal(rng);
            let mut prev = t0;
            for &t in times {
                let a = (-2.0 * PI * loop_bw * (t - prev).max(0.0)).exp();
                phi = a * phi + (var * (1.0 - a * a)).max(0.0).sqrt() * rng::normal(rng);
                out.push(phi);
                prev = t;
            }
        }
    }
    out
}

/// `n_samples` phase samples at rate `fs`, deterministic in `seed`.
pub fn sample_pn_path(model: &PnModel, n_samples: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    if !(fs > 0.0) {
        return Err(IsacError::arg("fs", "must be > 0"));
    }
    let times: Vec<f64> = (0..n_samples).map(|k| k as f64 / fs).collect();
    Ok(sample_pn_at(model, &times, &mut rng::stream(seed, Stream::PhaseNoise)))
}

/// Self-referenced phases `xi_k(l,m) = phi(t_lm) - phi(t_lm - tau_k)` for every
/// delay, all drawn from one oscillator path.
pub fn self_referenced_phases<R: Rng + ?Sized>(
    model: &PnModel,
    delays: &[f64],
    cfg: &FrameConfig,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    model.validate()?;
    if let Some(t) = delays.iter().find(|t| !(**t >= 0.0)) {
        return Err(IsacError::arg("tau", format!("must be >= 0, got {t}")));
    }
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let grid: Vec<f64> = (0..n * m).map(|i| cfg.sample_time(i % n, i / n)).collect();
    let mut times: Vec<(f64, usize)> = Vec::with_capacity(grid.len() * (delays.len() + 1));
    for (slot, &t) in grid.iter().enumerate() {
        times.push((t, slot));
        for (k, tau) in delays.iter().enumerate() {
            times.push((t - tau, (k + 1) * grid.len() + slot));
        }
    }
    times.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sorted: Vec<f64> = times.iter().map(|t| t.0).collect();
    let path = sample_pn_at(model, &sorted, rng);
    let mut phase = vec![0.0; times.len()];
    for ((_, slot), v) in times.iter().zip(path) {
        phase[*slot] = v;
    }
    let nm = grid.len();
    Ok((0..delays.len())
        .map(|k| DMatrix::from_fn(n, m, |l, mm| phase[l + n * mm] - phase[(k + 1) * nm + l + n * mm]))
        .collect())
}

/// Multiplicative PN matrix `W(tau)` with entries `e^{j xi(l,m)}`.
pub fn self_referenced_pn(model: &PnModel, tau: f64, cfg: &FrameConfig, seed: u64) -> Result<DMatrix<Complex64>> {
    let mut rng = rng::stream(seed, Stream::PhaseNoise);
    let xi = self_referenced_phases(model, &[tau], cfg, &mut rng)?.remove(0);
    Ok(xi.map(|p| Complex64::from_polar(1.0, p)))
}

/// Toeplitz-block-Toeplitz covariance over the `N*M` grid samples, ordered
/// `i = l + N m`, stored as its lag kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PnCovariance {
    n: usize,
    m: usize,
    /// `(2N-1) x (2M-1)`, entry `(dl + N-1, dm + M-1)`.
    kernel: DMatrix<f64>,
}

impl PnCovariance {
    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Covariance between samples separated by `dl` fast-time and `dm` slow-time steps.
    pub fn lag(&self, dl: i64, dm: i64) -> f64 {
        self.kernel[((dl + self.n as i64 - 1) as usize, (dm + self.m as i64 - 1) as usize)]
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (li, mi) = ((i % self.n) as i64, (i / self.n) as i64);
        let (lj, mj) = ((j % self.n) as i64, (j / self.n) as i64);
        self.lag(lj - li, mj - mi)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let nm = self.n * self.m;
        DMatrix::from_fn(nm, nm, |i, j| self.get(i, j))
    }

    /// First column of the `N x N` intra-symbol block.
    pub fn intra_symbol(&self) -> Vec<f64> {
        (0..self.n as i64).map(|dl| self.lag(dl, 0)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.lag(0, 0) * (self.n * self.m) as f64
    }
}

/// Covariance of the self-referenced phase at delay `tau` on the frame grid.
///
/// With `small_angle` the covariance of `xi` itself is returned; without it
/// (PLL only) the covariance of `e^{j xi}`, `e^{-(v - c)} - e^{-v}`, with `v`
/// the variance and `c` the phase covariance.
pub fn analytic_pn_covariance(model: &PnModel, tau: f64, cfg: &FrameConfig, small_angle: bool) -> Result<PnCovariance> {
    model.validate()?;
    if !(tau >= 0.0) {
        return Err(IsacError::arg("tau", format!("must be >= 0, got {tau}")));
    }
    if !small_angle && matches!(model, PnModel::FreeRunning { .. }) {
        return Err(IsacError::arg(
            "small_angle",
            "the free-running covariance is defined for the phase process only",
        ));
    }
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let dt = cfg.elementary_duration() / n as f64;
    let tsym = cfg.symbol_duration();
    let var = model.phase_difference_covariance(0.0, tau);
    let kernel = DMatrix::from_fn(2 * n - 1, 2 * m - 1, |i, j| {
        let lag = (i as f64 - (n as f64 - 1.0)) * dt + (j as f64 - (m as f64 - 1.0)) * tsym;
        let c = model.phase_difference_covariance(lag, tau);
        if small_angle {
            c
        } else {
            (-(var - c)).exp() - (-var).exp()
        }
    });
    let cov = PnCovariance { n, m, kernel };
    if n * m <= PSD_CHECK_MAX_DIM {
        let eig = nalgebra::SymmetricEigen::new(cov.to_dense());
        let min = eig.eigenvalues.min();
        let scale = cov.lag(0, 0).abs().max(f64::MIN_POSITIVE);
        if min < -1e-9 * scale * (n * m) as f64 {
            return Err(IsacError::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(cov)
}
