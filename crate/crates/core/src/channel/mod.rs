//! Radar and communication observations on the fast-time/slow-time grid.

mod array;
mod pa;
mod scenario;

pub use array::{build_impaired_mimo_channel, build_si_channel, ArrayImpairments, SiChannel};
pub use pa::{apply_pa, MpPaModel};
pub use scenario::{
    constant_beam, ArraySpec, BeamSpec, FrameSpec, Mode, PathSpec, Scenario, ScenarioFile, SiSpec, TargetSpec,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::Result;
use crate::model::{
    array_steering, cfo_phase_matrix, check_grids, freq_steering, time_steering, FrameConfig, PowerGrid, SymbolGrid,
    Target,
};
use crate::phase_noise::{self, PnModel};
use crate::rng::{self, Stream};

/// Hardware effects applied on the radar path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Impairments {
    #[default]
    None,
    /// Per-target fast-time Doppler rotation `D(nu_k)`.
    IciExact,
    PhaseNoise {
        model: PnModel,
    },
    Both {
        model: PnModel,
    },
}

impl Impairments {
    pub fn ici(&self) -> bool {
        matches!(self, Impairments::IciExact | Impairments::Both { .. })
    }

    pub fn phase_noise(&self) -> Option<PnModel> {
        match *self {
            Impairments::PhaseNoise { model } | Impairments::Both { model } => Some(model),
            _ => None,
        }
    }
}

/// What produced a [`RadarFrame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub impairments: Impairments,
    pub cfo: f64,
    pub clock_offset: f64,
    pub noise_var: f64,
    pub constant_beam: bool,
    pub seed: u64,
}

/// Per-RX-antenna `N x M` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    pub antennas: Vec<DMatrix<Complex64>>,
    pub record: FrameRecord,
}

impl RadarFrame {
    pub fn n_antennas(&self) -> usize {
        self.antennas.len()
    }

    pub fn antenna(&self, i: usize) -> &DMatrix<Complex64> {
        &self.antennas[i]
    }

    /// Frame with every antenna mapped through `f`, same record.
    pub fn map(&self, f: impl Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>) -> RadarFrame {
        RadarFrame {
            antennas: self.antennas.iter().map(f).collect(),
            record: self.record.clone(),
        }
    }
}

/// `P' * X * (b(tau) c(nu)^T) * (1 s^T)` with `s_m = a_t(theta)^T f_m`.
#[allow(clippy::too_many_arguments)]
fn target_grid(
    cfg: &FrameConfig,
    amp: &DMatrix<f64>,
    x: &SymbolGrid,
    beams: &DMatrix<Complex64>,
    delay: f64,
    doppler: f64,
    aod: f64,
    spacing: f64,
    wavelength: f64,
) -> Result<DMatrix<Complex64>> {
    let b = freq_steering(delay, cfg.n_subcarriers, cfg.subcarrier_spacing);
    let c = time_steering(doppler, cfg.n_symbols, cfg.symbol_duration());
    let at = array_steering(aod, beams.nrows(), spacing, wavelength, None)?;
    let s: Vec<Complex64> = (0..cfg.n_symbols)
        .map(|m| at.iter().zip(beams.column(m).iter()).map(|(a, f)| a * f).sum())
        .collect();
    Ok(DMatrix::from_fn(cfg.n_subcarriers, cfg.n_symbols, |n, m| {
        x.0[(n, m)] * amp[(n, m)] * b[n] * c[m] * s[m]
    }))
}

fn add_noise(y: &mut DMatrix<Complex64>, var: f64, seed: u64, stream: Stream, index: u64) {
    if var > 0.0 {
        let mut r = rng::substream(seed, stream, index);
        for v in y.iter_mut() {
            *v += rng::complex_normal(&mut r, var);
        }
    }
}

/// Noiseless per-antenna echo sum; `ici`/`pn` select the per-target factors.
fn radar_echoes(
    sc: &Scenario,
    x: &SymbolGrid,
    p: &PowerGrid,
    ici: bool,
    pn: Option<(&PnModel, u64)>,
) -> Result<Vec<DMatrix<Complex64>>> {
    let cfg = &sc.frame;
    let arrays = &sc.arrays;
    let amp = p.amplitudes();
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let nr = arrays.n_rx;
    let rx_gains: Vec<Vec<Complex64>> = sc
        .targets
        .iter()
        .map(|t| {
            array_steering(t.aoa, nr, arrays.element_spacing, arrays.wavelength, None)
                .map(|a| a.iter().map(|v| v * t.gain).collect())
        })
        .collect::<Result<_>>()?;
    let bias = |t: &Target| (t.delay + sc.sync.clock_offset, t.doppler + sc.sync.cfo);

    let mut out = vec![DMatrix::zeros(n, m); nr];
    if !ici && pn.is_none() {
        for (t, g) in sc.targets.iter().zip(&rx_gains) {
            let (tau, nu) = bias(t);
            let grid = target_grid(
                cfg,
                &amp,
                x,
                &sc.tx_beams,
                tau,
                nu,
                t.aod,
                arrays.element_spacing,
                arrays.wavelength,
            )?;
            for (y, gi) in out.iter_mut().zip(g) {
                *y += &grid * *gi;
            }
        }
        let d = cfo_phase_matrix(sc.sync.cfo, n, cfg.elementary_duration());
        for y in out.iter_mut() {
            dft::unitary_idft_columns(y);
            if sc.sync.cfo != 0.0 {
                d.apply(y);
            }
        }
        return Ok(out);
    }

    let pn_phases = match pn {
        Some((model, seed)) => {
            let delays: Vec<f64> = sc.targets.iter().map(|t| t.delay).collect();
            let mut r = rng::stream(seed, Stream::PhaseNoise);
            Some(phase_noise::self_referenced_phases(model, &delays, cfg, &mut r)?)
        }
        None => None,
    };
    let global = cfo_phase_matrix(sc.sync.cfo, n, cfg.elementary_duration());
    for (k, (t, g)) in sc.targets.iter().zip(&rx_gains).enumerate() {
        let (tau, nu) = bias(t);
        let mut term = target_grid(
            cfg,
            &amp,
            x,
            &sc.tx_beams,
            tau,
            nu,
            t.aod,
            arrays.element_spacing,
            arrays.wavelength,
        )?;
        dft::unitary_idft_columns(&mut term);
        if ici {
            cfo_phase_matrix(nu, n, cfg.elementary_duration()).apply(&mut term);
        } else if sc.sync.cfo != 0.0 {
            global.apply(&mut term);
        }
        if let Some(xi) = &pn_phases {
            term.zip_apply(&xi[k], |v, ph| *v *= Complex64::from_polar(1.0, ph));
        }
        for (y, gi) in out.iter_mut().zip(g) {
            *y += &term * *gi;
        }
    }
    Ok(out)
}

/// Simulates one radar frame.
///
/// Without impairments, antenna `i` observes
/// `D(df) F^H (P' * X * sum_k alpha_k^i b(tau_k + dtau) c(nu_k + df)^T * (1 a_t^T F)) + Z`.
/// `IciExact` replaces the global `D(df)` by the per-target `D(nu_k + df)`;
/// phase noise multiplies each target term by `W(tau_k)`, all targets sharing
/// one oscillator path.
pub fn simulate_radar_frame(
    sc: &Scenario,
    x: &SymbolGrid,
    p: &PowerGrid,
    impairments: Impairments,
    seed: u64,
) -> Result<RadarFrame> {
    check_grids(&sc.frame, x, p)?;
    sc.validate()?;
    let pn = impairments.phase_noise();
    let mut antennas = radar_echoes(sc, x, p, impairments.ici(), pn.as_ref().map(|m| (m, seed)))?;
    for (i, y) in antennas.iter_mut().enumerate() {
        add_noise(y, sc.noise_radar, seed, Stream::RadarNoise, i as u64);
    }
    Ok(RadarFrame {
        antennas,
        record: FrameRecord {
            impairments,
            cfo: sc.sync.cfo,
            clock_offset: sc.sync.clock_offset,
            noise_var: sc.noise_radar,
            constant_beam: sc.constant_beam(),
            seed,
        },
    })
}

/// Frequency-domain comm channel `H_c[n,m] = sum_k alpha'_k b_n(tau'_k) c_m(nu'_k) (v_m^H a_c(phi'_k)) (a_t(theta'_k)^T f_m)`.
pub fn comm_channel(sc: &Scenario, quasi_static: bool) -> Result<DMatrix<Complex64>> {
    let cfg = &sc.frame;
    let a = &sc.arrays;
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let mut h = DMatrix::zeros(n, m);
    for path in &sc.comm_paths {
        let nu = if quasi_static { 0.0 } else { path.doppler };
        let b = freq_steering(path.delay, n, cfg.subcarrier_spacing);
        let c = time_steering(nu, m, cfg.symbol_duration());
        let ac = array_steering(path.aoa, a.n_comm, a.element_spacing, a.wavelength, None)?;
        let at = array_steering(path.aod, a.n_tx, a.element_spacing, a.wavelength, None)?;
        let beam: Vec<Complex64> = (0..m)
            .map(|j| {
                let rx: Complex64 = sc
                    .rx_comm_beams
                    .column(j)
                    .iter()
                    .zip(&ac)
                    .map(|(v, x)| v.conj() * x)
                    .sum();
                let tx: Complex64 = sc.tx_beams.column(j).iter().zip(&at).map(|(f, x)| x * f).sum();
                rx * tx
            })
            .collect();
        for j in 0..m {
            for i in 0..n {
                h[(i, j)] += path.gain * b[i] * c[j] * beam[j];
            }
        }
    }
    Ok(h)
}

/// `Y_c = D(df') F^H (P' * X * H_c) + Z_c`.
pub fn simulate_comm_frame(sc: &Scenario, x: &SymbolGrid, p: &PowerGrid, seed: u64) -> Result<DMatrix<Complex64>> {
    check_grids(&sc.frame, x, p)?;
    let h = comm_channel(sc, sc.quasi_static)?;
    let amp = p.amplitudes();
    let mut y = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| x.0[(i, j)] * amp[(i, j)] * h[(i, j)]);
    dft::unitary_idft_columns(&mut y);
    if sc.sync.comm_cfo != 0.0 {
        cfo_phase_matrix(sc.sync.comm_cfo, sc.frame.n_subcarriers, sc.frame.elementary_duration()).apply(&mut y);
    }
    add_noise(&mut y, sc.noise_comm, seed, Stream::CommNoise, 0);
    Ok(y)
}
