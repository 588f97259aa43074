//! Range-Doppler maps and the continuous matched filter behind them.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::RadarFrame;
use crate::dft;
use crate::error::{IsacError, Result};
use crate::model::{check_grids, cis_turns, FrameConfig, PowerGrid, SymbolGrid, SPEED_OF_LIGHT};

/// Default zero-padding factor on both axes.
pub const DEFAULT_PAD: usize = 4;

/// `G = (F_N Y) * P' * conj(X)`: the per-cell channel estimate scaled by the cell energy.
pub fn matched_grid(y: &DMatrix<Complex64>, x: &SymbolGrid, p: &PowerGrid) -> Result<DMatrix<Complex64>> {
    if y.shape() != x.shape() || y.shape() != p.shape() {
        return Err(IsacError::dims(format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    let mut g = y.clone();
    dft::unitary_dft_columns(&mut g);
    let amp = p.amplitudes();
    for ((v, xv), a) in g.iter_mut().zip(x.0.iter()).zip(amp.iter()) {
        *v *= xv.conj() * a;
    }
    Ok(g)
}

/// `E_g = sum P |x|^2`, the peak gain of a unit-amplitude target.
pub fn grid_energy(x: &SymbolGrid, p: &PowerGrid) -> f64 {
    x.0.iter().zip(p.matrix().iter()).map(|(v, q)| v.norm_sqr() * q).sum()
}

/// Complex 2-D matched-filter output on a zero-padded grid.
///
/// Rows are range bins `r = 0..N*pad_n` (delay `r / (N pad_n df)`), columns
/// Doppler bins ordered so the axis increases (`k = j - floor(M pad_m / 2)`,
/// Doppler `k / (M pad_m Tsym)`). Entries are unnormalised: a target of gain
/// `alpha` peaks at `|alpha| E_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub values: DMatrix<Complex64>,
    /// m, increasing.
    pub ranges: Vec<f64>,
    /// m/s, increasing.
    pub velocities: Vec<f64>,
    pub pad_n: usize,
    pub pad_m: usize,
    pub energy: f64,
    pub frame: FrameConfig,
}

impl RangeDopplerMap {
    pub fn magnitude(&self) -> DMatrix<f64> {
        self.values.map(|v| v.norm())
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn delay_of(&self, row: usize) -> f64 {
        row as f64 / (self.values.nrows() as f64 * self.frame.subcarrier_spacing)
    }

    pub fn doppler_of(&self, col: usize) -> f64 {
        let mp = self.values.ncols();
        (col as f64 - (mp / 2) as f64) / (mp as f64 * self.frame.symbol_duration())
    }

    pub fn range_bin_width(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.values.nrows() as f64 * self.frame.subcarrier_spacing)
    }

    pub fn velocity_bin_width(&self) -> f64 {
        self.frame.wavelength() / (2.0 * self.values.ncols() as f64 * self.frame.symbol_duration())
    }

    /// Row of the bin closest to `delay` (cyclic).
    pub fn row_of_delay(&self, delay: f64) -> usize {
        let np = self.values.nrows() as f64;
        ((delay * np * self.frame.subcarrier_spacing).round().rem_euclid(np)) as usize
    }

    /// Column of the bin closest to `doppler` (cyclic).
    pub fn col_of_doppler(&self, doppler: f64) -> usize {
        let mp = self.values.ncols() as f64;
        let k = (doppler * mp * self.frame.symbol_duration()).round();
        ((k + (self.values.ncols() / 2) as f64).rem_euclid(mp)) as usize
    }

    /// Strongest cell, ties to the lowest column-major index.
    pub fn peak(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, -1.0);
        for j in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                let v = self.values[(i, j)].norm();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Plot-ready CSV: header of velocities, first column ranges, body in dB
    /// relative to the map maximum.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mag = self.magnitude();
        let max = mag.max().max(f64::MIN_POSITIVE);
        write!(w, "range_m\\velocity_mps")?;
        for v in &self.velocities {
            write!(w, ",{v:.6}")?;
        }
        writeln!(w)?;
        for (i, r) in self.ranges.iter().enumerate() {
            write!(w, "{r:.6}")?;
            for j in 0..mag.ncols() {
                write!(w, ",{:.3}", 20.0 * (mag[(i, j)] / max).max(1e-30).log10())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Zero-padded 2-D transform of a matched grid.
pub fn rd_map_from_matched(
    g: &DMatrix<Complex64>,
    cfg: &FrameConfig,
    energy: f64,
    pad_n: usize,
    pad_m: usize,
) -> Result<RangeDopplerMap> {
    if pad_n == 0 || pad_m == 0 {
        return Err(IsacError::arg("pad", "zero-padding factors must be >= 1"));
    }
    let (n, m) = g.shape();
    let (np, mp) = (n * pad_n, m * pad_m);
    let mut a = DMatrix::zeros(np, mp);
    a.view_mut((0, 0), (n, m)).copy_from(g);
    // slow time first on the n nonzero rows only
    let fft = dft::plan(mp, false);
    let mut buf = vec![Complex64::default(); mp];
    for i in 0..n {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = a[(i, j)];
        }
        fft.process(&mut buf);
        let half = mp / 2;
        for (j, b) in buf.iter().enumerate() {
            a[(i, (j + half) % mp)] = *b;
        }
    }
    dft::fft_columns(&mut a, true);
    let range_step = SPEED_OF_LIGHT / (2.0 * np as f64 * cfg.subcarrier_spacing);
    let vel_step = cfg.wavelength() / (2.0 * mp as f64 * cfg.symbol_duration());
    Ok(RangeDopplerMap {
        values: a,
        ranges: (0..np).map(|r| r as f64 * range_step).collect(),
        velocities: (0..mp).map(|j| (j as f64 - (mp / 2) as f64) * vel_step).collect(),
        pad_n,
        pad_m,
        energy,
        frame: *cfg,
    })
}

/// Range-Doppler map of one grid (any antenna or combination).
pub fn rd_map(
    y: &DMatrix<Complex64>,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    pad_n: usize,
    pad_m: usize,
) -> Result<RangeDopplerMap> {
    check_grids(cfg, x, p)?;
    let g = matched_grid(y, x, p)?;
    rd_map_from_matched(&g, cfg, grid_energy(x, p), pad_n, pad_m)
}

/// Range-Doppler map of antenna `i` of a frame. Beam-sweeping frames are rejected.
pub fn range_doppler_map(
    frame: &RadarFrame,
    antenna: usize,
    x: &SymbolGrid,
    p: &PowerGrid,
    cfg: &FrameConfig,
    pad_n: usize,
    pad_m: usize,
) -> Result<RangeDopplerMap> {
    if !frame.record.constant_beam {
        return Err(IsacError::BeamSweeping);
    }
    let y = frame
        .antennas
        .get(antenna)
        .ok_or_else(|| IsacError::arg("antenna", format!("index {antenna} out of {}", frame.n_antennas())))?;
    rd_map(y, x, p, cfg, pad_n, pad_m)
}

/// `sum_nm G[n,m] e^{j 2 pi n df tau} e^{-j 2 pi m Tsym nu}` at a continuous point.
pub fn matched_sum(g: &DMatrix<Complex64>, cfg: &FrameConfig, delay: f64, doppler: f64) -> Complex64 {
    let h = slow_time_collapse(g, cfg, doppler);
    fast_time_sum(&h, cfg, delay)
}

fn slow_time_collapse(g: &DMatrix<Complex64>, cfg: &FrameConfig, doppler: f64) -> Vec<Complex64> {
    let tsym = cfg.symbol_duration();
    let c: Vec<Complex64> = (0..g.ncols())
        .map(|m| cis_turns(-(m as f64) * tsym * doppler))
        .collect();
    (0..g.nrows())
        .map(|n| (0..g.ncols()).map(|m| g[(n, m)] * c[m]).sum())
        .collect()
}

fn fast_time_sum(h: &[Complex64], cfg: &FrameConfig, delay: f64) -> Complex64 {
    let step = cfg.subcarrier_spacing * delay;
    let w = cis_turns(step);
    // periodic re-seeding bounds the recursion error
    let mut acc = Complex64::default();
    let mut rot = Complex64::new(1.0, 0.0);
    for (n, v) in h.iter().enumerate() {
        if n % 64 == 0 {
            rot = cis_turns(n as f64 * step);
        }
        acc += v * rot;
        rot *= w;
    }
    acc
}

fn collapse_fast_time(g: &DMatrix<Complex64>, cfg: &FrameConfig, delay: f64) -> Vec<Complex64> {
    let b: Vec<Complex64> = (0..g.nrows())
        .map(|n| cis_turns(n as f64 * cfg.subcarrier_spacing * delay))
        .collect();
    (0..g.ncols())
        .map(|m| (0..g.nrows()).map(|n| g[(n, m)] * b[n]).sum())
        .collect()
}

pub(crate) fn golden_max(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        a
    } else {
        b
    }
}

/// Continuous peak of `|matched_sum|` within `+-half_tau`, `+-half_nu` of a
/// start point, by alternating golden-section searches.
pub fn refine_peak(
    g: &DMatrix<Complex64>,
    cfg: &FrameConfig,
    delay: f64,
    doppler: f64,
    half_tau: f64,
    half_nu: f64,
) -> (f64, f64, Complex64) {
    let (mut tau, mut nu) = (delay, doppler);
    let tsym = cfg.symbol_duration();
    for _ in 0..3 {
        let h = slow_time_collapse(g, cfg, nu);
        tau = golden_max(tau - half_tau, tau + half_tau, 40, |t| {
            fast_time_sum(&h, cfg, t).norm_sqr()
        });
        let s = collapse_fast_time(g, cfg, tau);
        nu = golden_max(nu - half_nu, nu + half_nu, 40, |v| {
            s.iter()
                .enumerate()
                .map(|(m, x)| x * cis_turns(-(m as f64) * tsym * v))
                .sum::<Complex64>()
                .norm_sqr()
        });
    }
    (tau, nu, matched_sum(g, cfg, tau, nu))
}

/// Noiseless time-domain echo `F^H (P' * X * b(tau) c(nu)^T)` of a unit-gain target.
pub fn echo_grid(x: &SymbolGrid, p: &PowerGrid, cfg: &FrameConfig, delay: f64, doppler: f64) -> DMatrix<Complex64> {
    let amp = p.amplitudes();
    let tsym = cfg.symbol_duration();
    let b: Vec<Complex64> = (0..cfg.n_subcarriers)
        .map(|n| cis_turns(-(n as f64) * cfg.subcarrier_spacing * delay))
        .collect();
    let c: Vec<Complex64> = (0..cfg.n_symbols)
        .map(|m| cis_turns(m as f64 * tsym * doppler))
        .collect();
    let mut e = DMatrix::from_fn(cfg.n_subcarriers, cfg.n_symbols, |n, m| {
        x.0[(n, m)] * amp[(n, m)] * b[n] * c[m]
    });
    dft::unitary_idft_columns(&mut e);
    e
}
