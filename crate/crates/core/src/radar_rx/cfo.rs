//! Bistatic carrier-frequency-offset estimation from comb pilots.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::RadarFrame;
use crate::error::{IsacError, Result};
use crate::model::{cfo_phase_matrix, FrameConfig, PowerGrid};

/// Pilot symbols carrying power only on every `comb`-th subcarrier, which
/// makes their fast-time samples periodic with period `N / comb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPattern {
    pub symbols: Vec<usize>,
    pub comb: usize,
}

impl PilotPattern {
    pub fn validate(&self, cfg: &FrameConfig) -> Result<()> {
        if self.symbols.is_empty() {
            return Err(IsacError::InsufficientPilots("no pilot symbols".into()));
        }
        if self.comb < 2 {
            return Err(IsacError::InsufficientPilots(
                "comb spacing < 2 leaves a single fast-time period".into(),
            ));
        }
        if cfg.n_subcarriers % self.comb != 0 {
            return Err(IsacError::arg("comb", format!("must divide N = {}", cfg.n_subcarriers)));
        }
        if let Some(m) = self.symbols.iter().find(|m| **m >= cfg.n_symbols) {
            return Err(IsacError::arg(
                "symbols",
                format!("pilot symbol {m} beyond M = {}", cfg.n_symbols),
            ));
        }
        Ok(())
    }

    /// Power grid with the pilot symbols restricted to the comb, each keeping its total power.
    pub fn apply(&self, p: &PowerGrid, cfg: &FrameConfig) -> Result<PowerGrid> {
        self.validate(cfg)?;
        let mut q: DMatrix<f64> = p.matrix().clone();
        for &m in &self.symbols {
            let total: f64 = q.column(m).sum();
            let on: f64 = (0..cfg.n_subcarriers).step_by(self.comb).map(|n| q[(n, m)]).sum();
            let scale = if on > 0.0 { total / on } else { 0.0 };
            for n in 0..cfg.n_subcarriers {
                q[(n, m)] = if n % self.comb == 0 { q[(n, m)] * scale } else { 0.0 };
            }
        }
        PowerGrid::normalized(q, p.total())
    }
}

/// CFO estimate. The clock offset shifts every delay equally and is not
/// observable from a single radar receiver; delays stay biased by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfoEstimate {
    /// Hz.
    pub cfo: f64,
    pub clock_offset_observable: bool,
}

/// Least-squares slope of the fast-time phase ramp of `D(df)` from the
/// lag-`N/R` correlation of the periodic pilot symbols, summed over antennas.
/// Unambiguous for `|df| < R df_sc / 2`.
pub fn estimate_cfo_clock(frame: &RadarFrame, cfg: &FrameConfig, pilots: &PilotPattern) -> Result<CfoEstimate> {
    pilots.validate(cfg)?;
    let n = cfg.n_subcarriers;
    let lag = n / pilots.comb;
    let mut acc = Complex64::default();
    for y in &frame.antennas {
        if y.nrows() != n {
            return Err(IsacError::dims(n, y.nrows()));
        }
        for &m in &pilots.symbols {
            for l in 0..n - lag {
                acc += y[(l, m)].conj() * y[(l + lag, m)];
            }
        }
    }
    let seg = lag as f64 * cfg.elementary_duration() / n as f64;
    Ok(CfoEstimate {
        cfo: acc.arg() / (2.0 * std::f64::consts::PI * seg),
        clock_offset_observable: false,
    })
}

/// Applies `D(-df)` to every antenna.
pub fn compensate_cfo(frame: &RadarFrame, cfg: &FrameConfig, cfo: f64) -> RadarFrame {
    let d = cfo_phase_matrix(-cfo, cfg.n_subcarriers, cfg.elementary_duration());
    let mut out = frame.map(|y| {
        let mut z = y.clone();
        d.apply(&mut z);
        z
    });
    out.record.cfo -= cfo;
    out
}
