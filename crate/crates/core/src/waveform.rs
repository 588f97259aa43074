//! Symbol grids, OFDM and MCPC sample streams, PAPR and ambiguity analysis.

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{IsacError, Result};
use crate::model::{check_grids, cis_turns, FrameConfig, PowerGrid, SymbolGrid};
use crate::rng::{self, Stream};

/// Default oversampling factor for PAPR and ambiguity analysis.
pub const DEFAULT_OVERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
    #[serde(rename = "16qam", alias = "qam16")]
    Qam16,
    UnitModulusRandom,
}

impl FromStr for Constellation {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            "unitmodulusrandom" | "unitmodulus" | "random" => Ok(Constellation::UnitModulusRandom),
            _ => Err(IsacError::UnknownConstellation(s.to_string())),
        }
    }
}

impl Constellation {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let re = if rng.random::<bool>() { s } else { -s };
                let im = if rng.random::<bool>() { s } else { -s };
                Complex64::new(re, im)
            }
            Constellation::Qam16 => {
                // levels {-3,-1,1,3}, mean energy 10
                let s = 1.0 / 10f64.sqrt();
                let re = (2 * rng.random_range(0..4) - 3) as f64;
                let im = (2 * rng.random_range(0..4) - 3) as f64;
                Complex64::new(re * s, im * s)
            }
            Constellation::UnitModulusRandom => Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)),
        }
    }
}

/// Unit-average-energy `N x M` data grid, deterministic in `seed`.
pub fn build_symbol_grid(cfg: &FrameConfig, constellation: Constellation, seed: u64) -> SymbolGrid {
    let mut rng = rng::stream(seed, Stream::Symbols);
    SymbolGrid(DMatrix::from_fn(cfg.n_subcarriers, cfg.n_symbols, |_, _| {
        constellation.draw(&mut rng)
    }))
}

/// Complex samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<Complex64>,
    /// Hz.
    pub fs: f64,
}

impl SampleStream {
    pub fn new(samples: Vec<Complex64>, fs: f64) -> Self {
        SampleStream { samples, fs }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len().max(1) as f64
    }

    /// Columns `t_s,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,re,im")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{:e},{:e},{:e}", k as f64 / self.fs, s.re, s.im)?;
        }
        Ok(())
    }
}

fn cp_samples(cfg: &FrameConfig, fs: f64) -> usize {
    (cfg.cp_duration * fs).round() as usize
}

/// Time-domain OFDM frame, `oversample * N` samples per elementary duration,
/// each symbol preceded by its cyclic prefix of `round(Tcp * Fs)` samples.
///
/// The body of symbol `m` is `(1/sqrt(N)) sum_n sqrt(P[n,m]) x[n,m] e^{j 2 pi n df t}`,
/// so the mean sample power is `Ptot / (N M)` for unit-energy symbols.
pub fn ofdm_modulate(x: &SymbolGrid, p: &PowerGrid, cfg: &FrameConfig, oversample: usize) -> Result<SampleStream> {
    check_grids(cfg, x, p)?;
    if oversample == 0 {
        return Err(IsacError::arg("oversample", "must be >= 1"));
    }
    let n = cfg.n_subcarriers;
    let len = oversample * n;
    let fs = len as f64 * cfg.subcarrier_spacing;
    let ncp = cp_samples(cfg, fs);
    let amp = p.amplitudes();
    let scale = 1.0 / (n as f64).sqrt();
    let ifft = dft::plan(len, true);
    let mut out = Vec::with_capacity(cfg.n_symbols * (len + ncp));
    let mut body = vec![Complex64::default(); len];
    for m in 0..cfg.n_symbols {
        body.iter_mut().for_each(|v| *v = Complex64::default());
        for k in 0..n {
            body[k] = x.0[(k, m)] * amp[(k, m)] * scale;
        }
        ifft.process(&mut body);
        out.extend((0..ncp).map(|i| body[(len - ncp % len + i) % len]));
        out.extend_from_slice(&body);
    }
    Ok(SampleStream::new(out, fs))
}

/// Inverse of [`ofdm_modulate`]: drops each CP, decimates the body to `N`
/// samples and applies the unitary DFT, returning `sqrt(P) * X`.
pub fn ofdm_demodulate(stream: &SampleStream, cfg: &FrameConfig, oversample: usize) -> Result<DMatrix<Complex64>> {
    if oversample == 0 {
        return Err(IsacError::arg("oversample", "must be >= 1"));
    }
    let n = cfg.n_subcarriers;
    let len = oversample * n;
    let ncp = cp_samples(cfg, stream.fs);
    let per = len + ncp;
    if stream.len() != per * cfg.n_symbols {
        return Err(IsacError::dims(per * cfg.n_symbols, stream.len()));
    }
    let mut y = DMatrix::from_fn(n, cfg.n_symbols, |l, m| stream.samples[m * per + ncp + l * oversample]);
    dft::unitary_dft_columns(&mut y);
    Ok(y)
}

/// N x L multicarrier phase-coded pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct McpcConfig {
    pub n_carriers: usize,
    pub code_length: usize,
    /// s.
    pub chip_duration: f64,
    /// `N x L` unit-modulus codes.
    pub codes: DMatrix<Complex64>,
    pub weights: Vec<Complex64>,
    /// Per-chip cyclic prefix, s. Zero disables it.
    pub cp_duration: f64,
}

impl McpcConfig {
    pub fn new(codes: DMatrix<Complex64>, weights: Vec<Complex64>, chip_duration: f64) -> Result<Self> {
        let (n, l) = codes.shape();
        if n == 0 || l == 0 {
            return Err(IsacError::Empty("codes"));
        }
        if weights.len() != n {
            return Err(IsacError::dims(n, weights.len()));
        }
        if codes.iter().any(|c| (c.norm() - 1.0).abs() > 1e-9) {
            return Err(IsacError::arg("codes", "entries must be unit modulus"));
        }
        if !(chip_duration > 0.0) {
            return Err(IsacError::arg("chip_duration", "must be > 0"));
        }
        Ok(McpcConfig {
            n_carriers: n,
            code_length: l,
            chip_duration,
            codes,
            weights,
            cp_duration: 0.0,
        })
    }

    pub fn with_cp(mut self, cp_duration: f64) -> Self {
        self.cp_duration = cp_duration.max(0.0);
        self
    }

    /// `T = L * Tc`.
    pub fn pulse_duration(&self) -> f64 {
        self.code_length as f64 * self.chip_duration
    }

    pub fn carrier_spacing(&self) -> f64 {
        1.0 / self.chip_duration
    }

    pub fn bandwidth(&self) -> f64 {
        self.n_carriers as f64 / self.chip_duration
    }
}

/// P4 polyphase code `phi_k = pi k^2 / L - pi k`.
pub fn p4_code(len: usize) -> Vec<Complex64> {
    let l = len as f64;
    (0..len)
        .map(|k| {
            let k = k as f64;
            Complex64::from_polar(1.0, PI * k * k / l - PI * k)
        })
        .collect()
}

/// Zadoff-Chu sequence with root `u` (coprime with `len`).
pub fn zadoff_chu(len: usize, root: usize) -> Vec<Complex64> {
    let l = len as f64;
    let u = root as f64;
    (0..len)
        .map(|k| {
            let k = k as f64;
            let arg = if len % 2 == 1 { u * k * (k + 1.0) } else { u * k * k };
            Complex64::from_polar(1.0, -PI * arg / l)
        })
        .collect()
}

/// `N x L` code matrix whose row `n` is the base code cyclically shifted by `n`.
pub fn cyclic_shift_codes(base: &[Complex64], n_carriers: usize) -> DMatrix<Complex64> {
    let l = base.len();
    DMatrix::from_fn(n_carriers, l, |n, k| base[(k + n) % l])
}

/// `sum_n coeffs[n] e^{j 2 pi (n - (N-1)/2) t / Tc}` at `t = t0 + k / fs`.
///
/// Shared by the OFDM pulse and every MCPC chip so the two agree bit for bit.
fn tone_sum(coeffs: &[Complex64], tc: f64, fs: f64, t0: f64, n_samples: usize, out: &mut Vec<Complex64>) {
    let centre = (coeffs.len() as f64 - 1.0) / 2.0;
    for k in 0..n_samples {
        let t = t0 + k as f64 / fs;
        let mut acc = Complex64::default();
        for (n, c) in coeffs.iter().enumerate() {
            acc += c * cis_turns((n as f64 - centre) * t / tc);
        }
        out.push(acc);
    }
}

/// Single OFDM pulse of duration `Tc` with centred tones at spacing `1/Tc`.
pub fn ofdm_pulse(weights: &[Complex64], tc: f64, fs: f64) -> SampleStream {
    let n_samples = (tc * fs).round() as usize;
    let mut out = Vec::with_capacity(n_samples);
    tone_sum(weights, tc, fs, 0.0, n_samples, &mut out);
    SampleStream::new(out, fs)
}

/// Complex envelope `sum_n sum_l w_n c[n,l] s(t - l Tc) e^{j 2 pi (n-(N-1)/2) t / Tc}`
/// with 0-based indices and a rectangular chip `s`.
pub fn mcpc_envelope(cfg: &McpcConfig, fs: f64) -> Result<SampleStream> {
    let required = 2.0 * cfg.bandwidth();
    if fs < required {
        return Err(IsacError::Undersampled { fs, required });
    }
    let tc = cfg.chip_duration;
    let per_chip = (tc * fs).round() as usize;
    let per_cp = (cfg.cp_duration * fs).round() as usize;
    let mut out = Vec::with_capacity(cfg.code_length * (per_chip + per_cp));
    let mut coeffs = vec![Complex64::default(); cfg.n_carriers];
    for l in 0..cfg.code_length {
        for (n, c) in coeffs.iter_mut().enumerate() {
            *c = cfg.weights[n] * cfg.codes[(n, l)];
        }
        let start = l as f64 * tc;
        if per_cp > 0 {
            // cyclic copy of the chip tail
            let mut tail = Vec::with_capacity(per_chip);
            tone_sum(&coeffs, tc, fs, start, per_chip, &mut tail);
            out.extend((0..per_cp).map(|i| tail[(per_chip - per_cp % per_chip + i) % per_chip]));
            out.extend(tail);
        } else {
            tone_sum(&coeffs, tc, fs, start, per_chip, &mut out);
        }
    }
    Ok(SampleStream::new(out, fs))
}

/// Peak-to-average power ratio (linear).
pub fn papr(stream: &SampleStream) -> Result<f64> {
    if stream.is_empty() {
        return Err(IsacError::Empty("stream"));
    }
    let mean = stream.mean_power();
    if mean == 0.0 {
        return Ok(1.0);
    }
    let peak = stream.samples.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    Ok(peak / mean)
}

/// `|sum_t s(t) s*(t - tau) e^{j 2 pi nu t}|` normalised so `AF(0,0) = 1`.
///
/// Delays are rounded to whole samples. Rows follow `delays`, columns `dopplers`.
pub fn ambiguity_function(stream: &SampleStream, delays: &[f64], dopplers: &[f64]) -> Result<DMatrix<f64>> {
    if delays.is_empty() {
        return Err(IsacError::Empty("delay grid"));
    }
    if dopplers.is_empty() {
        return Err(IsacError::Empty("doppler grid"));
    }
    if stream.is_empty() {
        return Err(IsacError::Empty("stream"));
    }
    let s = &stream.samples;
    let len = s.len() as i64;
    let shifts: Vec<i64> = delays.iter().map(|d| (d * stream.fs).round() as i64).collect();
    if let Some(bad) = shifts.iter().position(|k| k.abs() >= len) {
        return Err(IsacError::arg(
            "delays",
            format!("delay {} s exceeds the stream support", delays[bad]),
        ));
    }
    let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(IsacError::arg("stream", "all-zero stream"));
    }
    let rows: Vec<Vec<f64>> = shifts
        .par_iter()
        .map(|&k| {
            let lo = k.max(0) as usize;
            let hi = (len + k.min(0)) as usize;
            let prod: Vec<(usize, Complex64)> = (lo..hi)
                .map(|t| (t, s[t] * s[(t as i64 - k) as usize].conj()))
                .collect();
            dopplers
                .iter()
                .map(|&nu| {
                    let step = nu / stream.fs;
                    let acc: Complex64 = prod.iter().map(|(t, v)| v * cis_turns(step * *t as f64)).sum();
                    acc.norm() / energy
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(delays.len(), dopplers.len(), |i, j| rows[i][j]))
}

/// Full width of the region around `peak` where `curve >= level`, linearly
/// interpolated between samples spaced `step` apart.
pub fn mainlobe_width(curve: &[f64], peak: usize, level: f64, step: f64) -> f64 {
    let crossing = |dir: i64| -> f64 {
        let mut i = peak as i64;
        loop {
            let j = i + dir;
            if j < 0 || j >= curve.len() as i64 {
                return (i - peak as i64).abs() as f64 * step;
            }
            let (a, b) = (curve[i as usize], curve[j as usize]);
            if b < level {
                let frac = (a - level) / (a - b);
                return ((i - peak as i64).abs() as f64 + frac) * step;
            }
            i = j;
        }
    };
    crossing(-1) + crossing(1)
}

/// Aperiodic autocorrelation magnitude `|sum_t s(t) s*(t-k)|` for lags
/// `-(len-1)..=(len-1)`, normalised to 1 at lag 0. Computed with an FFT.
pub fn autocorrelation(stream: &SampleStream) -> Vec<f64> {
    let n = stream.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::default(); size];
    buf[..n].copy_from_slice(&stream.samples);
    dft::fft_in_place(&mut buf, false);
    buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
    dft::fft_in_place(&mut buf, true);
    let zero = buf[0].norm();
    (0..2 * n - 1)
        .map(|i| {
            let lag = i as i64 - (n as i64 - 1);
            buf[lag.rem_euclid(size as i64) as usize].norm() / zero
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, m: usize) -> FrameConfig {
        FrameConfig::with_cp_ratio(n, m, 30e3, 0.07, 3.5e9).unwrap()
    }

    #[test]
    fn qpsk_is_constant_modulus_and_deterministic() {
        let c = cfg(64, 8);
        let x = build_symbol_grid(&c, Constellation::Qpsk, 3);
        assert!(x.0.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert_eq!(x, build_symbol_grid(&c, Constellation::Qpsk, 3));
        assert_ne!(x, build_symbol_grid(&c, Constellation::Qpsk, 4));
    }

    #[test]
    fn qam16_unit_energy() {
        let c = cfg(256, 64);
        let x = build_symbol_grid(&c, Constellation::Qam16, 11);
        assert_abs_diff_eq!(x.mean_energy(), 1.0, epsilon = 1e-2);
    }

    #[test]
    fn constellation_names() {
        assert_eq!("QPSK".parse::<Constellation>().unwrap(), Constellation::Qpsk);
        assert_eq!("16qam".parse::<Constellation>().unwrap(), Constellation::Qam16);
        assert!(matches!(
            "8psk".parse::<Constellation>(),
            Err(IsacError::UnknownConstellation(_))
        ));
    }

    #[test]
    fn cp_footnote_value() {
        assert_abs_diff_eq!(cfg(64, 1).cp_duration, 2.33e-6, epsilon = 5e-9);
    }

    #[test]
    fn single_tone_is_dc() {
        let c = FrameConfig::new(1, 2, 30e3, 0.0, 3.5e9, 2.0).unwrap();
        let x = SymbolGrid(DMatrix::from_element(1, 2, Complex64::new(1.0, 0.0)));
        let s = ofdm_modulate(&x, &PowerGrid::uniform(&c), &c, 4).unwrap();
        assert!(s.samples.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn loopback_and_mean_power() {
        let c = cfg(64, 6);
        let x = build_symbol_grid(&c, Constellation::Qpsk, 5);
        let p = PowerGrid::uniform(&c);
        for os in [1, 3, 4] {
            let s = ofdm_modulate(&x, &p, &c, os).unwrap();
            let y = ofdm_demodulate(&s, &c, os).unwrap();
            let want = x.0.zip_map(&p.amplitudes(), |a, b| a * b);
            assert!((&y - &want).norm() / want.norm() < 1e-9);
            // CP samples copy the tail of the body
            let len = os * 64;
            let ncp = (c.cp_duration * s.fs).round() as usize;
            for i in 0..ncp {
                assert_eq!(s.samples[i], s.samples[ncp + len - ncp + i]);
            }
            let want_power = c.total_power / (64.0 * 6.0);
            assert!((s.mean_power() - want_power).abs() / want_power < 0.05);
        }
    }

    #[test]
    fn papr_cases() {
        let flat = SampleStream::new(vec![Complex64::new(0.0, 2.0); 16], 1.0);
        assert_abs_diff_eq!(papr(&flat).unwrap(), 1.0, epsilon = 1e-12);
        assert!(papr(&SampleStream::new(vec![], 1.0)).is_err());

        let n = 8;
        let c = FrameConfig::new(n, 1, 1e3, 0.0, 1e9, n as f64).unwrap();
        let x = SymbolGrid(DMatrix::from_element(n, 1, Complex64::new(1.0, 0.0)));
        let s = ofdm_modulate(&x, &PowerGrid::uniform(&c), &c, 1).unwrap();
        assert_abs_diff_eq!(papr(&s).unwrap(), n as f64, epsilon = 1e-9);

        let scaled = SampleStream::new(s.samples.iter().map(|v| v * Complex64::new(0.3, -2.0)).collect(), 1.0);
        assert_abs_diff_eq!(papr(&scaled).unwrap(), papr(&s).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn ofdm_papr_exceeds_single_carrier() {
        let c = cfg(256, 1);
        for seed in 0..5 {
            let x = build_symbol_grid(&c, Constellation::Qpsk, seed);
            let s = ofdm_modulate(&x, &PowerGrid::uniform(&c), &c, 4).unwrap();
            let sc: Vec<Complex64> = x.0.iter().copied().collect();
            assert!(papr(&s).unwrap() > papr(&SampleStream::new(sc, 1.0)).unwrap());
        }
    }

    #[test]
    fn codes_are_unit_modulus() {
        for v in p4_code(13)
            .iter()
            .chain(zadoff_chu(13, 5).iter())
            .chain(zadoff_chu(16, 3).iter())
        {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
        let m = cyclic_shift_codes(&p4_code(5), 5);
        assert_eq!(m[(1, 0)], m[(0, 1)]);
    }

    #[test]
    fn mcpc_l1_matches_pulse_and_ofdm() {
        let n = 8;
        let tc = 1.0 / 30e3;
        let fs = 4.0 * n as f64 / tc;
        let w: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect();
        let cfg = McpcConfig::new(DMatrix::from_element(n, 1, Complex64::new(1.0, 0.0)), w.clone(), tc).unwrap();
        let g = mcpc_envelope(&cfg, fs).unwrap();
        assert_eq!(g, ofdm_pulse(&w, tc, fs));

        let fc = FrameConfig::new(n, 1, 30e3, 0.0, 1e9, n as f64).unwrap();
        let x = SymbolGrid(DMatrix::from_fn(n, 1, |k, _| w[k]));
        let s = ofdm_modulate(&x, &PowerGrid::uniform(&fc), &fc, 4).unwrap();
        for (k, (a, b)) in g.samples.iter().zip(&s.samples).enumerate() {
            let t = k as f64 / fs;
            let derot = a * cis_turns((n as f64 - 1.0) / 2.0 * t / tc) / (n as f64).sqrt();
            assert!((derot - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mcpc_single_carrier_follows_code() {
        let code = p4_code(6);
        let tc = 1e-6;
        let cfg = McpcConfig::new(
            DMatrix::from_fn(1, 6, |_, l| code[l]),
            vec![Complex64::new(1.0, 0.0)],
            tc,
        )
        .unwrap();
        let g = mcpc_envelope(&cfg, 8e6).unwrap();
        assert_eq!(g.len(), 48);
        for (k, v) in g.samples.iter().enumerate() {
            assert!((v - code[k / 8]).norm() < 1e-12);
        }
        assert!(matches!(mcpc_envelope(&cfg, 1e6), Err(IsacError::Undersampled { .. })));
    }

    #[test]
    fn ambiguity_symmetries() {
        let s: Vec<Complex64> = (0..32)
            .map(|k| Complex64::from_polar(1.0 + 0.1 * (k % 3) as f64, 0.7 * (k * k) as f64))
            .collect();
        let fs = 1.0;
        let stream = SampleStream::new(s.clone(), fs);
        let rev = SampleStream::new(s.iter().rev().map(|v| v.conj()).collect(), fs);
        let delays: Vec<f64> = (-5..=5).map(|d| d as f64).collect();
        let dops: Vec<f64> = (-4..=4).map(|v| v as f64 * 0.03).collect();
        let neg_delays: Vec<f64> = delays.iter().map(|d| -d).collect();
        let neg_dops: Vec<f64> = dops.iter().map(|d| -d).collect();
        let af = ambiguity_function(&stream, &delays, &dops).unwrap();
        let af_neg = ambiguity_function(&stream, &neg_delays, &neg_dops).unwrap();
        let af_rev = ambiguity_function(&rev, &delays, &neg_dops).unwrap();

        let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        for (i, &d) in delays.iter().enumerate() {
            for (j, &nu) in dops.iter().enumerate() {
                let mut acc = Complex64::default();
                for t in 0..32i64 {
                    let u = t - d as i64;
                    if (0..32).contains(&u) {
                        acc +=
                            s[t as usize] * s[u as usize].conj() * Complex64::from_polar(1.0, 2.0 * PI * nu * t as f64);
                    }
                }
                assert_abs_diff_eq!(af[(i, j)], acc.norm() / energy, epsilon = 1e-12);
                assert_abs_diff_eq!(af[(i, j)], af_neg[(i, j)], epsilon = 1e-12);
                assert_abs_diff_eq!(af[(i, j)], af_rev[(i, j)], epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(af[(5, 4)], 1.0, epsilon = 1e-12);
        assert!(ambiguity_function(&stream, &[40.0], &[0.0]).is_err());
        assert!(ambiguity_function(&stream, &[], &[0.0]).is_err());
    }

    #[test]
    fn mainlobe_width_of_triangle() {
        let curve = [0.0, 0.5, 1.0, 0.5, 0.0];
        assert_abs_diff_eq!(mainlobe_width(&curve, 2, 0.5, 1.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mainlobe_width(&curve, 2, 0.75, 2.0), 2.0, epsilon = 1e-12);
    }
}
