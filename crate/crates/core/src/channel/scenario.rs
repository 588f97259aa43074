//! Scenario files (TOML) and the validated [`Scenario`] they produce.
//!
//! All physical quantities are SI: seconds, hertz, metres, m/s, radians,
//! watts. Target strength is given as an SNR in dB relative to the radar
//! noise power, `|alpha|^2 = SNR * noise_radar`.
//!
//! ```toml
//! seed = 7                      # mandatory
//! mode = "monostatic"           # or "bistatic"
//! constellation = "qpsk"        # qpsk | 16qam | unit_modulus_random
//! noise_radar = 1.0             # W
//! noise_comm = 1.0              # W
//! allow_range_ambiguity = false # skip the CP check (delays wrap on the grid)
//! quasi_static = false          # comm paths without Doppler
//!
//! [frame]
//! n_subcarriers = 1024
//! n_symbols = 16
//! subcarrier_spacing = 60e3
//! carrier_freq = 28e9
//! cp_ratio = 0.07               # Tcp * df; or cp_duration = 1.17e-6
//! # total_power = 16384.0       # default N*M (unit power per cell)
//!
//! [arrays]                      # all optional
//! n_tx = 1
//! n_rx = 1
//! n_comm = 1
//! # element_spacing = 5.36e-3  # default lambda/2
//!
//! [tx_beam]
//! angle = 0.0                   # constant beam; or sweep = [..] one angle per symbol
//!
//! [[targets]]
//! range = 30.0                  # or delay = ...
//! velocity = 0.0                # or doppler = ...
//! angle = 0.0                   # monostatic; bistatic uses aod / aoa
//! snr_db = 30.0
//! # phase = 0.0                 # default: uniform random, seeded
//!
//! [[comm_paths]]
//! delay = 0.0
//! doppler = 0.0
//! aod = 0.0
//! aoa = 0.0
//! gain_db = 0.0
//! phase = 0.0
//!
//! [sync]                        # bistatic only
//! cfo = 0.0
//! clock_offset = 0.0
//! comm_cfo = 0.0
//!
//! [phase_noise]
//! kind = "free_running"         # or "pll" with loop_bw
//! bw3db = 100e3
//!
//! [si]
//! coupling_db = -40.0
//! tx_angle = 0.0
//! rx_angle = 0.0
//!
//! [experiment]                  # free-form options of the chosen experiment
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{array_steering, ArrayConfig, FrameConfig, SyncOffsets, Target};
use crate::phase_noise::PnModel;
use crate::rng::{self, Stream};
use crate::waveform::Constellation;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Monostatic,
    Bistatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    pub subcarrier_spacing: f64,
    pub carrier_freq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    #[serde(default = "one_usize")]
    pub n_tx: usize,
    #[serde(default = "one_usize")]
    pub n_rx: usize,
    #[serde(default = "one_usize")]
    pub n_comm: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing: Option<f64>,
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec {
            n_tx: 1,
            n_rx: 1,
            n_comm: 1,
            element_spacing: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aod: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aoa: Option<f64>,
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub doppler: f64,
    #[serde(default)]
    pub aod: f64,
    #[serde(default)]
    pub aoa: f64,
    #[serde(default)]
    pub gain_db: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiSpec {
    #[serde(default = "default_coupling")]
    pub coupling_db: f64,
    #[serde(default)]
    pub tx_angle: f64,
    #[serde(default)]
    pub rx_angle: f64,
}

impl Default for SiSpec {
    fn default() -> Self {
        SiSpec {
            coupling_db: default_coupling(),
            tx_angle: 0.0,
            rx_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    #[serde(default)]
    pub angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
}

/// On-disk scenario, echoed verbatim into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    pub frame: FrameSpec,
    #[serde(default)]
    pub arrays: ArraySpec,
    #[serde(default = "one_f64")]
    pub noise_radar: f64,
    #[serde(default = "one_f64")]
    pub noise_comm: f64,
    #[serde(default = "default_constellation")]
    pub constellation: Constellation,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub comm_paths: Vec<PathSpec>,
    #[serde(default)]
    pub sync: SyncOffsets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_noise: Option<PnModel>,
    #[serde(default)]
    pub si: SiSpec,
    #[serde(default)]
    pub tx_beam: BeamSpec,
    #[serde(default)]
    pub allow_range_ambiguity: bool,
    #[serde(default)]
    pub quasi_static: bool,
    #[serde(default)]
    pub experiment: toml::Table,
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn default_coupling() -> f64 {
    -40.0
}

fn default_constellation() -> Constellation {
    Constellation::Qpsk
}

fn field(path: impl Into<String>, message: impl Into<String>) -> IsacError {
    IsacError::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| field("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(
                if path == "." { String::new() } else { path },
                e.into_inner().message().to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IsacError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Validates the file and draws the seeded target phases.
    pub fn build(&self) -> Result<Scenario> {
        let f = &self.frame;
        let cp = match (f.cp_ratio, f.cp_duration) {
            (Some(_), Some(_)) => return Err(field("frame", "give either cp_ratio or cp_duration, not both")),
            (Some(r), None) => r / f.subcarrier_spacing,
            (None, Some(d)) => d,
            (None, None) => 0.07 / f.subcarrier_spacing,
        };
        let total = f.total_power.unwrap_or((f.n_subcarriers * f.n_symbols) as f64);
        let frame = FrameConfig::new(
            f.n_subcarriers,
            f.n_symbols,
            f.subcarrier_spacing,
            cp,
            f.carrier_freq,
            total,
        )
        .map_err(|e| field("frame", e.to_string()))?;
        let lambda = frame.wavelength();
        let a = &self.arrays;
        let arrays = ArrayConfig::new(
            a.n_tx,
            a.n_rx,
            a.n_comm,
            a.element_spacing.unwrap_or(lambda / 2.0),
            lambda,
        )
        .map_err(|e| field("arrays", e.to_string()))?;
        for (name, v) in [("noise_radar", self.noise_radar), ("noise_comm", self.noise_comm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(field(name, format!("must be >= 0, got {v}")));
            }
        }
        if let Some(pn) = &self.phase_noise {
            pn.validate().map_err(|e| field("phase_noise", e.to_string()))?;
        }

        let mut phase_rng = rng::stream(self.seed, Stream::TargetPhase);
        let mut targets = Vec::with_capacity(self.targets.len());
        let mut snr_db = Vec::with_capacity(self.targets.len());
        for (k, t) in self.targets.iter().enumerate() {
            let at = |name: &str| format!("targets[{k}].{name}");
            let delay = match (t.range, t.delay) {
                (Some(_), Some(_)) => return Err(field(at("range"), "give either range or delay")),
                (Some(r), None) => FrameConfig::range_to_delay(r),
                (None, Some(d)) => d,
                (None, None) => return Err(field(at("range"), "missing range or delay")),
            };
            if !(delay >= 0.0) {
                return Err(field(at("range"), "must be >= 0"));
            }
            let doppler = match (t.velocity, t.doppler) {
                (Some(_), Some(_)) => return Err(field(at("velocity"), "give either velocity or doppler")),
                (Some(v), None) => frame.velocity_to_doppler(v),
                (None, Some(d)) => d,
                (None, None) => 0.0,
            };
            let angle = t.angle.unwrap_or(0.0);
            let aod = t.aod.unwrap_or(angle);
            let aoa = t.aoa.unwrap_or(angle);
            if self.mode == Mode::Monostatic && aod != aoa {
                return Err(field(at("aoa"), "monostatic targets need aod == aoa"));
            }
            let drawn: f64 = phase_rng.random_range(0.0..std::f64::consts::TAU);
            let phase = t.phase.unwrap_or(drawn);
            let amp = (10f64.powf(t.snr_db / 10.0) * self.noise_radar).sqrt();
            targets.push(Target {
                delay,
                doppler,
                aod,
                aoa,
                gain: Complex64::from_polar(amp, phase),
            });
            snr_db.push(t.snr_db);
        }

        let comm_paths = self
            .comm_paths
            .iter()
            .map(|p| Target {
                delay: p.delay,
                doppler: p.doppler,
                aod: p.aod,
                aoa: p.aoa,
                gain: Complex64::from_polar(10f64.powf(p.gain_db / 20.0), p.phase),
            })
            .collect::<Vec<_>>();
        if let Some(k) = comm_paths.iter().position(|p| !(p.delay >= 0.0)) {
            return Err(field(format!("comm_paths[{k}].delay"), "must be >= 0"));
        }

        let tx_beams = match &self.tx_beam.sweep {
            Some(angles) => {
                if angles.len() != frame.n_symbols {
                    return Err(field(
                        "tx_beam.sweep",
                        format!("needs one angle per symbol ({}), got {}", frame.n_symbols, angles.len()),
                    ));
                }
                let cols = angles
                    .iter()
                    .map(|&th| steer_beam(&arrays, arrays.n_tx, th))
                    .collect::<Result<Vec<_>>>()?;
                DMatrix::from_fn(arrays.n_tx, frame.n_symbols, |i, m| cols[m][i])
            }
            None => constant_beam(&arrays, arrays.n_tx, self.tx_beam.angle, frame.n_symbols)?,
        };
        let comm_angle = comm_paths.first().map_or(0.0, |p| p.aoa);
        let rx_comm_beams = DMatrix::from_fn(arrays.n_comm, frame.n_symbols, |i, _| {
            array_steering(comm_angle, arrays.n_comm, arrays.element_spacing, lambda, None).unwrap()[i]
                / (arrays.n_comm as f64).sqrt()
        });

        let scenario = Scenario {
            seed: self.seed,
            mode: self.mode,
            frame,
            arrays,
            targets,
            target_snr_db: snr_db,
            comm_paths,
            sync: self.sync,
            noise_radar: self.noise_radar,
            noise_comm: self.noise_comm,
            tx_beams,
            rx_comm_beams,
            constellation: self.constellation,
            phase_noise: self.phase_noise,
            si: self.si.clone(),
            allow_range_ambiguity: self.allow_range_ambiguity,
            quasi_static: self.quasi_static,
        };
        scenario.validate().map_err(|e| match e {
            IsacError::Scenario { .. } => e,
            other => field("targets", other.to_string()),
        })?;
        Ok(scenario)
    }
}

/// `conj(a_t(theta)) / sqrt(Nt)`, so that `a_t(theta)^T f = sqrt(Nt)`.
fn steer_beam(arrays: &ArrayConfig, n: usize, angle: f64) -> Result<Vec<Complex64>> {
    let a = array_steering(angle, n, arrays.element_spacing, arrays.wavelength, None)?;
    let s = 1.0 / (n as f64).sqrt();
    Ok(a.iter().map(|v| v.conj() * s).collect())
}

/// Same beam on every symbol.
pub fn constant_beam(arrays: &ArrayConfig, n: usize, angle: f64, n_symbols: usize) -> Result<DMatrix<Complex64>> {
    let f = steer_beam(arrays, n, angle)?;
    Ok(DMatrix::from_fn(n, n_symbols, |i, _| f[i]))
}

/// Validated simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub mode: Mode,
    pub frame: FrameConfig,
    pub arrays: ArrayConfig,
    pub targets: Vec<Target>,
    /// Per-target SNR the gains were derived from, dB.
    pub target_snr_db: Vec<f64>,
    pub comm_paths: Vec<Target>,
    pub sync: SyncOffsets,
    /// W.
    pub noise_radar: f64,
    /// W.
    pub noise_comm: f64,
    /// `Nt x M`, column `m` is the beam of symbol `m`.
    pub tx_beams: DMatrix<Complex64>,
    /// `Nc x M`.
    pub rx_comm_beams: DMatrix<Complex64>,
    pub constellation: Constellation,
    pub phase_noise: Option<PnModel>,
    pub si: SiSpec,
    pub allow_range_ambiguity: bool,
    pub quasi_static: bool,
}

impl Scenario {
    /// Monostatic scenario without targets, constant broadside beam.
    pub fn monostatic(frame: FrameConfig, arrays: ArrayConfig, noise_radar: f64) -> Self {
        Scenario {
            seed: 0,
            mode: Mode::Monostatic,
            frame,
            arrays,
            targets: Vec::new(),
            target_snr_db: Vec::new(),
            comm_paths: Vec::new(),
            sync: SyncOffsets::default(),
            noise_radar,
            noise_comm: noise_radar,
            tx_beams: constant_beam(&arrays, arrays.n_tx, 0.0, frame.n_symbols).unwrap(),
            rx_comm_beams: DMatrix::from_element(
                arrays.n_comm,
                frame.n_symbols,
                Complex64::new(1.0 / (arrays.n_comm as f64).sqrt(), 0.0),
            ),
            constellation: Constellation::Qpsk,
            phase_noise: None,
            si: SiSpec::default(),
            allow_range_ambiguity: false,
            quasi_static: false,
        }
    }

    /// Adds a monostatic target of the given SNR (dB) and gain phase.
    pub fn add_target(&mut self, range: f64, velocity: f64, angle: f64, snr_db: f64, phase: f64) -> &mut Self {
        let amp = (10f64.powf(snr_db / 10.0) * self.noise_radar).sqrt();
        self.targets.push(Target::monostatic(
            &self.frame,
            range,
            velocity,
            angle,
            Complex64::from_polar(amp, phase),
        ));
        self.target_snr_db.push(snr_db);
        self
    }

    /// Points the constant transmit beam at `angle`.
    pub fn set_tx_beam(&mut self, angle: f64) -> &mut Self {
        self.tx_beams = constant_beam(&self.arrays, self.arrays.n_tx, angle, self.frame.n_symbols).unwrap();
        self
    }

    pub fn constant_beam(&self) -> bool {
        let f = &self.tx_beams;
        (1..f.ncols()).all(|m| f.column(m) == f.column(0))
    }

    /// Mode, CP and beam-shape invariants.
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.tx_beams.shape() != (self.arrays.n_tx, self.frame.n_symbols) {
            return Err(IsacError::dims(
                format!("{}x{} tx beams", self.arrays.n_tx, self.frame.n_symbols),
                format!("{:?}", self.tx_beams.shape()),
            ));
        }
        if self.rx_comm_beams.shape() != (self.arrays.n_comm, self.frame.n_symbols) {
            return Err(IsacError::dims(
                format!("{}x{} comm beams", self.arrays.n_comm, self.frame.n_symbols),
                format!("{:?}", self.rx_comm_beams.shape()),
            ));
        }
        if self.mode == Mode::Monostatic {
            if !self.sync.is_zero() {
                return Err(field("sync", "monostatic sensing has no CFO or clock offset"));
            }
            if let Some(k) = self.targets.iter().position(|t| t.aod != t.aoa) {
                return Err(field(format!("targets[{k}].aoa"), "monostatic targets need aod == aoa"));
            }
        }
        if !self.allow_range_ambiguity {
            self.check_cp()?;
        }
        let comm_spread = delay_spread(&self.comm_paths);
        if comm_spread > self.frame.cp_duration {
            return Err(IsacError::CyclicPrefix(format!(
                "comm delay spread {comm_spread:e} s exceeds Tcp {:e} s",
                self.frame.cp_duration
            )));
        }
        Ok(())
    }

    /// Monostatic: the furthest round trip must fit in the CP; bistatic:
    /// the delay spread must.
    pub fn check_cp(&self) -> Result<()> {
        let tcp = self.frame.cp_duration;
        let (what, value) = match self.mode {
            Mode::Monostatic => (
                "round-trip delay",
                self.targets.iter().map(|t| t.delay).fold(0.0, f64::max),
            ),
            Mode::Bistatic => ("delay spread", delay_spread(&self.targets)),
        };
        if value > tcp * (1.0 + 1e-12) {
            return Err(IsacError::CyclicPrefix(format!(
                "{what} {value:e} s exceeds Tcp {tcp:e} s"
            )));
        }
        Ok(())
    }
}

fn delay_spread(paths: &[Target]) -> f64 {
    if paths.is_empty() {
        return 0.0;
    }
    let max = paths.iter().map(|t| t.delay).fold(f64::MIN, f64::max);
    let min = paths.iter().map(|t| t.delay).fold(f64::MAX, f64::min);
    max - min
}
