//! Shared domain types and the steering/phase primitives.
//!
//! Angles are measured from array broadside; element `i` of a uniform linear
//! array sits at `p_i = i*d` and contributes the phase `2*pi*p_i*sin(angle)/lambda`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};

/// Propagation speed used for every range/delay and velocity/Doppler conversion.
///
/// The rounded value reproduces the published phase-excursion and bound
/// constants to the stated precision.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// `e^{j 2 pi x}` with `x` reduced modulo one first.
#[inline]
pub(crate) fn cis_turns(turns: f64) -> Complex64 {
    let r = turns - turns.round();
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

/// OFDM numerology of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// s.
    pub cp_duration: f64,
    /// Hz.
    pub carrier_freq: f64,
    /// W, sum of all resource-element powers.
    pub total_power: f64,
}

impl FrameConfig {
    pub fn new(
        n_subcarriers: usize,
        n_symbols: usize,
        subcarrier_spacing: f64,
        cp_duration: f64,
        carrier_freq: f64,
        total_power: f64,
    ) -> Result<Self> {
        let cfg = FrameConfig {
            n_subcarriers,
            n_symbols,
            subcarrier_spacing,
            cp_duration,
            carrier_freq,
            total_power,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// CP expressed as a fraction of the elementary duration, unit power per
    /// resource element (`total_power = N*M`).
    pub fn with_cp_ratio(
        n_subcarriers: usize,
        n_symbols: usize,
        subcarrier_spacing: f64,
        cp_ratio: f64,
        carrier_freq: f64,
    ) -> Result<Self> {
        Self::new(
            n_subcarriers,
            n_symbols,
            subcarrier_spacing,
            cp_ratio / subcarrier_spacing,
            carrier_freq,
            (n_subcarriers * n_symbols) as f64,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_symbols == 0 {
            return Err(IsacError::InvalidConfig(
                "frame needs at least one subcarrier and one symbol".into(),
            ));
        }
        for (name, v) in [
            ("subcarrier_spacing", self.subcarrier_spacing),
            ("carrier_freq", self.carrier_freq),
            ("total_power", self.total_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(IsacError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.cp_duration.is_finite() && self.cp_duration >= 0.0) {
            return Err(IsacError::InvalidConfig(format!(
                "cp_duration must be >= 0, got {}",
                self.cp_duration
            )));
        }
        Ok(())
    }

    /// `T = 1/df`.
    pub fn elementary_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// `Tsym = Tcp + T`.
    pub fn symbol_duration(&self) -> f64 {
        self.cp_duration + self.elementary_duration()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Fast-time sampling rate `N*df`.
    pub fn sample_rate(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing
    }

    pub fn bandwidth(&self) -> f64 {
        self.sample_rate()
    }

    /// Fast-time/slow-time sampling instant of sample `l` in symbol `m`
    /// (CP removed).
    pub fn sample_time(&self, l: usize, m: usize) -> f64 {
        m as f64 * self.symbol_duration()
            + self.cp_duration
            + l as f64 * self.elementary_duration() / self.n_subcarriers as f64
    }

    /// Monostatic round-trip delay of a target at `range`.
    pub fn range_to_delay(range: f64) -> f64 {
        2.0 * range / SPEED_OF_LIGHT
    }

    pub fn delay_to_range(delay: f64) -> f64 {
        delay * SPEED_OF_LIGHT / 2.0
    }

    /// Monostatic Doppler shift of a target moving at `velocity` (positive = approaching).
    pub fn velocity_to_doppler(&self, velocity: f64) -> f64 {
        2.0 * velocity / self.wavelength()
    }

    pub fn doppler_to_velocity(&self, doppler: f64) -> f64 {
        doppler * self.wavelength() / 2.0
    }

    /// Slow-time unambiguous velocity span `lambda / (2 Tsym)`.
    pub fn velocity_ambiguity(&self) -> f64 {
        self.wavelength() / (2.0 * self.symbol_duration())
    }

    /// Range ambiguity `c / (2 df)`.
    pub fn range_ambiguity(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing)
    }
}

/// Transmit, radar-receive and communication-receive array sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_comm: usize,
    /// m.
    pub element_spacing: f64,
    /// m.
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize, n_comm: usize, element_spacing: f64, wavelength: f64) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 || n_comm == 0 {
            return Err(IsacError::InvalidConfig("array sizes must be >= 1".into()));
        }
        if !(element_spacing > 0.0 && wavelength > 0.0) {
            return Err(IsacError::InvalidConfig(
                "element spacing and wavelength must be > 0".into(),
            ));
        }
        Ok(ArrayConfig {
            n_tx,
            n_rx,
            n_comm,
            element_spacing,
            wavelength,
        })
    }

    /// Single-antenna everywhere, half-wavelength spacing.
    pub fn siso(frame: &FrameConfig) -> Self {
        let wavelength = frame.wavelength();
        ArrayConfig {
            n_tx: 1,
            n_rx: 1,
            n_comm: 1,
            element_spacing: wavelength / 2.0,
            wavelength,
        }
    }

    /// `D = d*sqrt(Nr^2 - 1)`.
    pub fn aperture(&self) -> f64 {
        let nr = self.n_rx as f64;
        self.element_spacing * (nr * nr - 1.0).sqrt()
    }
}

/// Point target (or propagation path).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// s.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
    /// rad.
    pub aod: f64,
    /// rad.
    pub aoa: f64,
    pub gain: Complex64,
}

impl Target {
    /// Monostatic target at `range` m moving at `velocity` m/s, seen at `angle`.
    pub fn monostatic(frame: &FrameConfig, range: f64, velocity: f64, angle: f64, gain: Complex64) -> Self {
        Target {
            delay: FrameConfig::range_to_delay(range),
            doppler: frame.velocity_to_doppler(velocity),
            aod: angle,
            aoa: angle,
            gain,
        }
    }

    pub fn range(&self) -> f64 {
        FrameConfig::delay_to_range(self.delay)
    }
}

/// Oscillator offsets between the ISAC transmitter and the receivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncOffsets {
    /// Radar-RX carrier frequency offset, Hz.
    pub cfo: f64,
    /// Radar-RX clock offset, s.
    pub clock_offset: f64,
    /// Communication-RX carrier frequency offset, Hz.
    pub comm_cfo: f64,
}

impl SyncOffsets {
    pub fn is_zero(&self) -> bool {
        self.cfo == 0.0 && self.clock_offset == 0.0 && self.comm_cfo == 0.0
    }
}

/// `N x M` data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid(pub DMatrix<Complex64>);

impl SymbolGrid {
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn mean_energy(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.0.len().max(1) as f64
    }
}

/// `N x M` nonnegative resource-element powers. The signal model consumes
/// their square roots.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid(DMatrix<f64>);

impl PowerGrid {
    /// Checks nonnegativity and that the entries add up to `total_power`.
    pub fn new(p: DMatrix<f64>, total_power: f64) -> Result<Self> {
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(IsacError::arg("power", "entries must be finite and >= 0"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - total_power).abs() > 1e-9 * total_power.abs().max(f64::MIN_POSITIVE) {
            return Err(IsacError::arg(
                "power",
                format!("entries sum to {sum}, budget is {total_power}"),
            ));
        }
        Ok(PowerGrid(p))
    }

    /// Rescales a nonnegative pattern so it meets the frame budget.
    pub fn normalized(pattern: DMatrix<f64>, total_power: f64) -> Result<Self> {
        let sum: f64 = pattern.iter().sum();
        if !(sum > 0.0) || pattern.iter().any(|v| *v < 0.0) {
            return Err(IsacError::arg("power", "pattern must be nonnegative with positive sum"));
        }
        PowerGrid::new(pattern * (total_power / sum), total_power)
    }

    pub fn uniform(cfg: &FrameConfig) -> Self {
        let n = cfg.n_subcarriers * cfg.n_symbols;
        PowerGrid(DMatrix::from_element(
            cfg.n_subcarriers,
            cfg.n_symbols,
            cfg.total_power / n as f64,
        ))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Entrywise square root (the amplitude map).
    pub fn amplitudes(&self) -> DMatrix<f64> {
        self.0.map(f64::sqrt)
    }
}

pub(crate) fn check_grids(cfg: &FrameConfig, x: &SymbolGrid, p: &PowerGrid) -> Result<()> {
    let want = (cfg.n_subcarriers, cfg.n_symbols);
    if x.shape() != want {
        return Err(IsacError::dims(format!("{want:?} symbols"), format!("{:?}", x.shape())));
    }
    if p.shape() != want {
        return Err(IsacError::dims(format!("{want:?} powers"), format!("{:?}", p.shape())));
    }
    Ok(())
}

/// `[b(tau)]_n = e^{-j 2 pi n df tau}`.
pub fn freq_steering(delay: f64, n: usize, subcarrier_spacing: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| cis_turns(-(k as f64) * subcarrier_spacing * delay))
        .collect()
}

/// `[c(nu)]_m = e^{j 2 pi m Tsym nu}`.
pub fn time_steering(doppler: f64, m: usize, symbol_duration: f64) -> Vec<Complex64> {
    (0..m)
        .map(|k| cis_turns(k as f64 * symbol_duration * doppler))
        .collect()
}

/// ULA steering vector; `positions` overrides the uniform `i*d` layout.
pub fn array_steering(
    angle: f64,
    n_elem: usize,
    spacing: f64,
    wavelength: f64,
    positions: Option<&[f64]>,
) -> Result<Vec<Complex64>> {
    if n_elem == 0 {
        return Err(IsacError::arg("n_elem", "must be >= 1"));
    }
    let s = angle.sin() / wavelength;
    match positions {
        Some(p) => {
            if p.len() != n_elem {
                return Err(IsacError::dims(n_elem, p.len()));
            }
            Ok(p.iter().map(|&pi| cis_turns(pi * s)).collect())
        }
        None => Ok((0..n_elem).map(|i| cis_turns(i as f64 * spacing * s)).collect()),
    }
}

/// Diagonal fast-time phase rotation `D(nu) = diag(e^{j 2 pi T l nu / N})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagonal(pub Vec<Complex64>);

impl PhaseDiagonal {
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.0.clone()))
    }

    /// `D * a`, i.e. scales row `l` of `a`.
    pub fn apply(&self, a: &mut DMatrix<Complex64>) {
        for mut col in a.column_iter_mut() {
            for (v, d) in col.iter_mut().zip(&self.0) {
                *v *= d;
            }
        }
    }

    pub fn inverse(&self) -> PhaseDiagonal {
        PhaseDiagonal(self.0.iter().map(|d| d.conj()).collect())
    }
}

pub fn cfo_phase_matrix(doppler: f64, n: usize, elementary_duration: f64) -> PhaseDiagonal {
    let step = elementary_duration * doppler / n as f64;
    PhaseDiagonal((0..n).map(|l| cis_turns(l as f64 * step)).collect())
}

/// Maximum phase excursion `2 pi T nu = 4 pi v fc / (c df)` of `D(nu)` for a
/// monostatic target at speed `velocity`.
pub fn max_phase_excursion(velocity: f64, carrier_freq: f64, subcarrier_spacing: f64) -> f64 {
    4.0 * PI * velocity.abs() * carrier_freq / (SPEED_OF_LIGHT * subcarrier_spacing)
}

/// Dense unitary DFT matrix `[F_N]_{l,n} = e^{-j 2 pi n l / N} / sqrt(N)`.
pub fn unitary_dft_matrix(n: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |l, k| cis_turns(-(((l * k) % n) as f64) / n as f64) * s)
}
