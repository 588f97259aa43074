//! Self-interference and impaired MIMO channel matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{array_steering, cis_turns, ArrayConfig, FrameConfig, Target};
use crate::rng::{self, Stream};

/// Frequency-flat TX-to-RX leakage, identical on every symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SiChannel {
    /// `Nr x Nt`.
    pub h: DMatrix<Complex64>,
}

/// Line-of-sight coupling `g a_r(phi) a_t(theta)^T` with `||H||_F = 10^(coupling_db/20)`
/// and a seeded common phase. `-inf` dB yields the zero matrix.
pub fn build_si_channel(
    arrays: &ArrayConfig,
    coupling_db: f64,
    tx_angle: f64,
    rx_angle: f64,
    seed: u64,
) -> Result<SiChannel> {
    let (nt, nr) = (arrays.n_tx, arrays.n_rx);
    if coupling_db == f64::NEG_INFINITY {
        return Ok(SiChannel {
            h: DMatrix::zeros(nr, nt),
        });
    }
    if coupling_db.is_nan() {
        return Err(IsacError::arg("coupling_db", "NaN"));
    }
    let ar = array_steering(rx_angle, nr, arrays.element_spacing, arrays.wavelength, None)?;
    let at = array_steering(tx_angle, nt, arrays.element_spacing, arrays.wavelength, None)?;
    let phase: f64 = rng::stream(seed, Stream::SiChannel).random_range(0.0..1.0);
    let g = cis_turns(phase) * (10f64.powf(coupling_db / 20.0) / ((nr * nt) as f64).sqrt());
    Ok(SiChannel {
        h: DMatrix::from_fn(nr, nt, |i, j| g * ar[i] * at[j]),
    })
}

/// Array non-idealities: mutual coupling `C_ij = rho^|i-j| e^{j psi |i-j|}`,
/// per-element gain/phase calibration errors and element position jitter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayImpairments {
    pub coupling: f64,
    /// rad.
    pub coupling_phase: f64,
    /// Relative gain error standard deviation.
    pub cal_gain_std: f64,
    /// rad.
    pub cal_phase_std: f64,
    /// m.
    pub spacing_jitter: f64,
}

impl ArrayImpairments {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cal_gain_std", self.cal_gain_std),
            ("cal_phase_std", self.cal_phase_std),
            ("spacing_jitter", self.spacing_jitter),
        ] {
            if !(v >= 0.0) {
                return Err(IsacError::arg(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.coupling.abs()) {
            return Err(IsacError::arg("coupling", "|rho| must be < 1"));
        }
        Ok(())
    }
}

fn coupling_matrix(n: usize, rho: f64, psi: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j) as i32;
        Complex64::from_polar(rho.powi(k), psi * k as f64)
    })
}

fn calibration<R: Rng + ?Sized>(n: usize, imp: &ArrayImpairments, rng: &mut R) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let g = imp.cal_gain_std * rng::normal(rng);
            let ph = imp.cal_phase_std * rng::normal(rng);
            Complex64::from_polar(1.0 + g, ph)
        })
        .collect()
}

fn positions<R: Rng + ?Sized>(n: usize, d: f64, jitter: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|i| i as f64 * d + jitter * rng::normal(rng)).collect()
}

/// `C_R Gamma_R A_R Delta A_T^H Gamma_T^H C_T^H` at subcarrier `n`, symbol `m`,
/// with `Delta = diag(alpha_k e^{-j 2 pi n df tau_k} e^{j 2 pi m Tsym nu_k})`.
///
/// The impairment draws depend only on `seed`, so every `(n, m)` sees the
/// same array. Without impairments this is the clean `A_R Delta A_T^H`.
pub fn build_impaired_mimo_channel(
    arrays: &ArrayConfig,
    frame: &FrameConfig,
    paths: &[Target],
    imp: &ArrayImpairments,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    imp.validate()?;
    let (nt, nr) = (arrays.n_tx, arrays.n_rx);
    let mut r = rng::stream(seed, Stream::ArrayErrors);
    let gamma_r = calibration(nr, imp, &mut r);
    let gamma_t = calibration(nt, imp, &mut r);
    let pos_r = positions(nr, arrays.element_spacing, imp.spacing_jitter, &mut r);
    let pos_t = positions(nt, arrays.element_spacing, imp.spacing_jitter, &mut r);

    let k = paths.len();
    let mut ar = DMatrix::zeros(nr, k);
    let mut at = DMatrix::zeros(nt, k);
    let mut delta = Vec::with_capacity(k);
    for (j, p) in paths.iter().enumerate() {
        let a = array_steering(p.aoa, nr, arrays.element_spacing, arrays.wavelength, Some(&pos_r))?;
        ar.column_mut(j).copy_from_slice(&a);
        let a = array_steering(p.aod, nt, arrays.element_spacing, arrays.wavelength, Some(&pos_t))?;
        at.column_mut(j).copy_from_slice(&a);
        delta.push(
            p.gain
                * cis_turns(-(n as f64) * frame.subcarrier_spacing * p.delay)
                * cis_turns(m as f64 * frame.symbol_duration() * p.doppler),
        );
    }
    let delta = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(delta));
    let left = coupling_matrix(nr, imp.coupling, imp.coupling_phase)
        * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gamma_r))
        * ar;
    let right = coupling_matrix(nt, imp.coupling, imp.coupling_phase)
        * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gamma_t))
        * at;
    Ok(left * delta * right.adjoint())
}
