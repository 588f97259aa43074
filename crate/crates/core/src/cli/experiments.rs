//! The named experiments. Each one reads its options from the scenario's
//! `[experiment]` table, writes CSV artifacts and returns a KPI document.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::output::{ArtifactWriter, CsvTable};
use super::Experiment;
use crate::alloc::{
    crb_aware_allocation, frontier_area, max_comm_rate, rate, rms_bandwidth, scalarized_pareto, AllocationProblem,
};
use crate::channel::{comm_channel, simulate_radar_frame, Impairments, Scenario, ScenarioFile};
use crate::enhance::{ici_velocity_disambiguate, pn_compensate, pn_range_disambiguate, DEFAULT_PN_ITERS};
use crate::error::{IsacError, Result};
use crate::kpi::{achievable_rate, crb_bounds, mi_reward, resolutions, KpiReport, Role};
use crate::model::{max_phase_excursion, ArrayConfig, FrameConfig, PowerGrid, SymbolGrid};
use crate::phase_noise::PnModel;
use crate::radar_rx::{
    estimate_dominant_target, estimate_noise_var, glrt_detect, grid_energy, iterative_target_extraction, per_cell_pfa,
    rd_map, theoretical_pd, ExtractionParams, RangeDopplerMap,
};
use crate::rng::{self, Stream};
use crate::waveform::{
    ambiguity_function, autocorrelation, build_symbol_grid, cyclic_shift_codes, mainlobe_width, mcpc_envelope,
    ofdm_pulse, p4_code, papr, McpcConfig,
};

/// Per-trial values and the candidate scores of one disambiguation run.
type TrialRow = (Vec<f64>, Vec<(i64, f64)>);

pub(super) fn run(experiment: Experiment, file: &ScenarioFile, out: &mut ArtifactWriter) -> Result<Value> {
    let sc = file.build()?;
    match experiment {
        Experiment::RangeProfile => range_profile(&sc, options(file)?, out),
        Experiment::IciImpact => ici_impact(&sc, options(file)?, out),
        Experiment::PnImpact => pn_impact(&sc, options(file)?, out),
        Experiment::IciExploit => ici_exploit(&sc, options(file)?, out),
        Experiment::PnExploit => pn_exploit(&sc, options(file)?, out),
        Experiment::DetectionRoc => detection_roc(&sc, options(file)?, out),
        Experiment::CrbSweep => crb_sweep(&sc, options(file)?, out),
        Experiment::AllocFrontier => alloc_frontier(&sc, options(file)?, out),
        Experiment::McpcAnalysis => mcpc_analysis(options(file)?, out),
    }
}

fn options<T: DeserializeOwned>(file: &ScenarioFile) -> Result<T> {
    serde_path_to_error::deserialize(toml::Value::Table(file.experiment.clone())).map_err(|e| {
        let path = e.path().to_string();
        IsacError::Scenario {
            path: if path == "." {
                "experiment".into()
            } else {
                format!("experiment.{path}")
            },
            message: e.into_inner().to_string(),
        }
    })
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    rng::substream(seed, Stream::Trial, trial).next_u64()
}

fn db(x: f64) -> f64 {
    10.0 * x.max(1e-300).log10()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn frame_inputs(sc: &Scenario, seed: u64) -> (SymbolGrid, PowerGrid) {
    (
        build_symbol_grid(&sc.frame, sc.constellation, seed),
        PowerGrid::uniform(&sc.frame),
    )
}

fn need_pn(sc: &Scenario, experiment: &str) -> Result<PnModel> {
    sc.phase_noise
        .ok_or_else(|| IsacError::InvalidConfig(format!("{experiment} needs a [phase_noise] table")))
}

fn need_target(sc: &Scenario, experiment: &str) -> Result<()> {
    if sc.targets.is_empty() {
        return Err(IsacError::InvalidConfig(format!(
            "{experiment} needs at least one target"
        )));
    }
    Ok(())
}

/// Noise-normalised map statistic `|map|^2 / (E_g sigma^2)`.
fn statistic(map: &RangeDopplerMap, noise: f64) -> DMatrix<f64> {
    map.values.map(|v| v.norm_sqr() / (map.energy * noise))
}

/// Per range bin, the strongest statistic over Doppler.
fn profile(stat: &DMatrix<f64>) -> Vec<f64> {
    stat.row_iter().map(|r| r.max()).collect()
}

/// Index of the dominant target (largest gain).
fn dominant(sc: &Scenario) -> usize {
    (0..sc.targets.len())
        .max_by(|a, b| {
            sc.targets[*a]
                .gain
                .norm()
                .total_cmp(&sc.targets[*b].gain.norm())
                .then(b.cmp(a))
        })
        .unwrap_or(0)
}

/// Integrated SNR of target `k` on a uniform-power grid.
fn integrated_snr(sc: &Scenario, k: usize, energy: f64) -> f64 {
    let beam = sc.arrays.n_tx as f64;
    sc.targets[k].gain.norm_sqr() * beam * energy / sc.noise_radar
}

fn impairments(ici: bool, pn: Option<PnModel>) -> Impairments {
    match (ici, pn) {
        (false, None) => Impairments::None,
        (true, None) => Impairments::IciExact,
        (false, Some(model)) => Impairments::PhaseNoise { model },
        (true, Some(model)) => Impairments::Both { model },
    }
}

fn default_pad() -> usize {
    4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RangeProfileOpts {
    #[serde(default = "default_true")]
    ici: bool,
    #[serde(default = "default_pad")]
    pad: usize,
    #[serde(default = "default_pfa")]
    pfa: f64,
    #[serde(default = "default_k_max")]
    k_max: usize,
}

fn default_pfa() -> f64 {
    1e-3
}

fn default_k_max() -> usize {
    8
}

fn range_profile(sc: &Scenario, o: RangeProfileOpts, out: &mut ArtifactWriter) -> Result<Value> {
    let cfg = sc.frame;
    let (x, p) = frame_inputs(sc, trial_seed(sc.seed, 0));
    let frame = simulate_radar_frame(sc, &x, &p, impairments(o.ici, sc.phase_noise), sc.seed)?;
    let y = &frame.antennas[0];
    let map = rd_map(y, &x, &p, &cfg, o.pad, o.pad)?;
    let mut text = Vec::new();
    map.write_csv(&mut text).map_err(|e| IsacError::Io(e.to_string()))?;
    out.raw("rd_map.csv", &text)?;

    let stat = statistic(&map, sc.noise_radar);
    let mut prof = CsvTable::new(["range_m", "power_db"]);
    for (r, v) in map.ranges.iter().zip(profile(&stat)) {
        prof.push(vec![*r, db(v)]);
    }
    out.csv("range_profile.csv", &prof)?;

    let params = ExtractionParams {
        k_max: o.k_max,
        pfa: o.pfa,
        noise_var: Some(sc.noise_radar),
        pad_n: o.pad,
        pad_m: o.pad,
        ..Default::default()
    };
    let report = iterative_target_extraction(y, &x, &p, &cfg, &params)?;
    let mut dets = CsvTable::new(["range_m", "velocity_mps", "amplitude_db", "statistic_db"]);
    for d in &report.detections {
        dets.push(vec![
            d.range,
            d.velocity,
            20.0 * d.amplitude.norm().max(1e-300).log10(),
            db(d.statistic),
        ]);
    }
    out.csv("detections.csv", &dets)?;

    let energy = grid_energy(&x, &p);
    let kpis = frame_kpis(sc, energy, o.pfa)?;
    Ok(json!({
        "experiment": "range-profile",
        "detections": report.detections.len(),
        "threshold": report.threshold,
        "kpis": kpis,
        "max_phase_excursion_rad": sc.targets.iter().map(|t| max_phase_excursion(cfg.doppler_to_velocity(t.doppler), cfg.carrier_freq, cfg.subcarrier_spacing)).collect::<Vec<_>>(),
    }))
}

/// KPIs of the dominant target on a uniform grid: bounds, resolutions, Pd,
/// the communication rate of the scenario's links and the MI rewards of an
/// all-sensing and an all-communication assignment.
fn frame_kpis(sc: &Scenario, energy: f64, pfa: f64) -> Result<KpiReport> {
    let cfg = &sc.frame;
    let res = resolutions(cfg, &sc.arrays);
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let p = PowerGrid::uniform(cfg);
    let (crb, pd, q_sense) = if sc.targets.is_empty() {
        (None, 0.0, 0.0)
    } else {
        let k = dominant(sc);
        let gamma = integrated_snr(sc, k, energy);
        let angle = if sc.arrays.n_rx > 1 { sc.targets[k].aoa } else { 0.0 };
        let crb = crb_bounds(gamma, cfg, &sc.arrays, angle)?;
        let pd = theoretical_pd(gamma, per_cell_pfa(pfa, n * m)?)?;
        let q: f64 = sc.targets.iter().map(|t| t.gain.norm_sqr()).sum::<f64>() * sc.arrays.n_tx as f64 / sc.noise_radar;
        (Some(crb), pd, q)
    };
    let (rate_bits, q_comm) = if sc.comm_paths.is_empty() {
        (0.0, vec![0.0; n * m])
    } else {
        let h = comm_channel(sc, sc.quasi_static)?;
        let r = achievable_rate(&h, p.matrix(), sc.noise_comm)?;
        (r, h.iter().map(|v| v.norm_sqr() / sc.noise_comm).collect())
    };
    let powers: Vec<f64> = p.matrix().iter().copied().collect();
    let qs = vec![q_sense; n * m];
    let (mi_s, _) = mi_reward(&vec![Role::Sensing; n * m], &powers, &qs, &q_comm)?;
    let (_, mi_c) = mi_reward(&vec![Role::Comm; n * m], &powers, &qs, &q_comm)?;
    let inf = f64::INFINITY;
    Ok(KpiReport {
        crb_range: crb.map_or(inf, |c| c.range),
        crb_velocity: crb.map_or(inf, |c| c.velocity),
        crb_angle: crb.map_or(inf, |c| c.angle),
        res_range: res.range,
        res_velocity: res.velocity,
        res_angle: res.angle,
        pd,
        rate: rate_bits,
        mi_sensing: mi_s,
        mi_comm: mi_c,
    })
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct IciImpactOpts {
    #[serde(default = "default_velocities")]
    velocities: Vec<f64>,
    #[serde(default = "default_pad")]
    pad: usize,
    #[serde(default = "default_impact_pfa")]
    pfa: f64,
    /// Half-width of the sidelobe-floor window around the dominant target, unpadded bins.
    #[serde(default = "default_floor_bins")]
    floor_bins: usize,
}

fn default_velocities() -> Vec<f64> {
    vec![0.0, 80.0]
}

fn default_impact_pfa() -> f64 {
    1e-2
}

fn default_floor_bins() -> usize {
    100
}

/// Median statistic in a window of `floor_bins` around the dominant target,
/// excluding 5 bins around it and 3 bins around every other target.
fn sidelobe_floor(sc: &Scenario, stat: &DMatrix<f64>, pad: usize, floor_bins: usize) -> f64 {
    let cfg = &sc.frame;
    let np = stat.nrows();
    let bin = 1.0 / (cfg.n_subcarriers as f64 * cfg.subcarrier_spacing);
    let rows = |tau: f64| tau * np as f64 * cfg.subcarrier_spacing;
    let k = dominant(sc);
    let centre = rows(sc.targets[k].delay);
    let mut vals = Vec::new();
    let half = (floor_bins * pad) as f64;
    for r in 0..np {
        let rf = r as f64;
        if (rf - centre).abs() > half {
            continue;
        }
        let near = sc.targets.iter().enumerate().any(|(i, t)| {
            let guard = if i == k { 5.0 } else { 3.0 };
            (rf - rows(t.delay)).abs() * bin / pad as f64 <= guard * bin
        });
        if !near {
            vals.extend(stat.row(r).iter().copied());
        }
    }
    median(vals)
}

fn with_velocity(sc: &Scenario, v: f64) -> Scenario {
    let mut s = sc.clone();
    for t in &mut s.targets {
        t.doppler = s.frame.velocity_to_doppler(v);
    }
    s
}

fn ici_impact(sc: &Scenario, o: IciImpactOpts, out: &mut ArtifactWriter) -> Result<Value> {
    need_target(sc, "ici-impact")?;
    if o.velocities.is_empty() {
        return Err(IsacError::Scenario {
            path: "experiment.velocities".into(),
            message: "needs at least one velocity".into(),
        });
    }
    let cfg = sc.frame;
    let (x, p) = frame_inputs(sc, trial_seed(sc.seed, 0));
    let range_bin = cfg.range_ambiguity() / cfg.n_subcarriers as f64;
    let mut header = vec!["range_m".to_string()];
    header.extend(o.velocities.iter().map(|v| format!("power_db@{v}mps")));
    let mut columns = Vec::new();
    let mut ranges = Vec::new();
    let mut dets = CsvTable::new(["set_velocity_mps", "range_m", "velocity_mps", "statistic_db"]);
    let mut per_velocity = Vec::new();
    for &v in &o.velocities {
        let s = with_velocity(sc, v);
        let frame = simulate_radar_frame(&s, &x, &p, Impairments::IciExact, sc.seed)?;
        let map = rd_map(&frame.antennas[0], &x, &p, &cfg, o.pad, o.pad)?;
        let stat = statistic(&map, sc.noise_radar);
        let floor = sidelobe_floor(sc, &stat, o.pad, o.floor_bins);
        let noise = estimate_noise_var(&map, 1);
        let report = glrt_detect(&map, noise, o.pfa, 1)?;
        for d in &report.detections {
            dets.push(vec![v, d.range, d.velocity, db(d.statistic)]);
        }
        let found: Vec<bool> = sc
            .targets
            .iter()
            .map(|t| report.has_range(t.range(), range_bin))
            .collect();
        per_velocity.push(json!({
            "velocity_mps": v,
            "max_phase_excursion_rad": max_phase_excursion(v, cfg.carrier_freq, cfg.subcarrier_spacing),
            "sidelobe_floor_db": db(floor),
            "targets_detected": found,
        }));
        columns.push(profile(&stat));
        ranges = map.ranges.clone();
    }
    let mut table = CsvTable::new(header);
    for (i, r) in ranges.iter().enumerate() {
        let mut row = vec![*r];
        row.extend(columns.iter().map(|c| db(c[i])));
        table.push(row);
    }
    out.csv("range_profile.csv", &table)?;
    out.csv("detections.csv", &dets)?;
    let floors: Vec<f64> = per_velocity
        .iter()
        .map(|v| v["sidelobe_floor_db"].as_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(json!({
        "experiment": "ici-impact",
        "target_ranges_m": sc.targets.iter().map(|t| t.range()).collect::<Vec<_>>(),
        "range_bin_m": range_bin,
        "per_velocity": per_velocity,
        "floor_rise_db": floors.last().unwrap_or(&f64::NAN) - floors[0],
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PnImpactOpts {
    #[serde(default = "default_pad")]
    pad: usize,
    #[serde(default = "default_pn_iters")]
    iterations: usize,
    /// Half-width of the search window for weak-target peaks, padded bins.
    #[serde(default = "default_margin_bins")]
    margin_bins: usize,
}

fn default_pn_iters() -> usize {
    DEFAULT_PN_ITERS
}

fn default_margin_bins() -> usize {
    4
}

/// Peak statistic near `delay` over the map median, dB.
fn margin_db(stat: &DMatrix<f64>, delay: f64, cfg: &FrameConfig, bins: usize) -> f64 {
    let np = stat.nrows();
    let k = (delay * np as f64 * cfg.subcarrier_spacing).round() as i64;
    let mut peak = 0.0f64;
    for r in k - bins as i64..=k + bins as i64 {
        peak = peak.max(stat.row(r.rem_euclid(np as i64) as usize).max());
    }
    db(peak / median(stat.iter().copied().collect()))
}

fn pn_impact(sc: &Scenario, o: PnImpactOpts, out: &mut ArtifactWriter) -> Result<Value> {
    need_target(sc, "pn-impact")?;
    let model = need_pn(sc, "pn-impact")?;
    let cfg = sc.frame;
    let (x, p) = frame_inputs(sc, trial_seed(sc.seed, 0));
    let ideal = simulate_radar_frame(sc, &x, &p, Impairments::None, sc.seed)?;
    let noisy = simulate_radar_frame(sc, &x, &p, Impairments::PhaseNoise { model }, sc.seed)?;
    let comp = pn_compensate(&noisy, &x, &p, &cfg, &model, o.iterations)?;
    let maps = [
        rd_map(&ideal.antennas[0], &x, &p, &cfg, o.pad, o.pad)?,
        rd_map(&noisy.antennas[0], &x, &p, &cfg, o.pad, o.pad)?,
        rd_map(&comp.frame.antennas[0], &x, &p, &cfg, o.pad, o.pad)?,
    ];
    let stats: Vec<DMatrix<f64>> = maps.iter().map(|m| statistic(m, sc.noise_radar)).collect();
    let profiles: Vec<Vec<f64>> = stats.iter().map(profile).collect();
    let mut table = CsvTable::new(["range_m", "ideal_db", "pn_db", "compensated_db"]);
    for (i, r) in maps[0].ranges.iter().enumerate() {
        table.push(vec![*r, db(profiles[0][i]), db(profiles[1][i]), db(profiles[2][i])]);
    }
    out.csv("range_profile.csv", &table)?;
    let mut phase = CsvTable::new(["subcarrier", "symbol", "phase_rad"]);
    for m in 0..cfg.n_symbols {
        for n in 0..cfg.n_subcarriers {
            phase.push(vec![n as f64, m as f64, comp.phase[(n, m)]]);
        }
    }
    out.csv("estimated_phase.csv", &phase)?;

    let med: Vec<f64> = stats.iter().map(|s| median(s.iter().copied().collect())).collect();
    let k = dominant(sc);
    let weak: Vec<Value> = sc
        .targets
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, t)| {
            let m: Vec<f64> = stats
                .iter()
                .map(|s| margin_db(s, t.delay, &cfg, o.margin_bins))
                .collect();
            json!({
                "range_m": t.range(),
                "margin_ideal_db": m[0],
                "margin_pn_db": m[1],
                "margin_compensated_db": m[2],
                "recovered_db": m[2] - m[1],
            })
        })
        .collect();
    Ok(json!({
        "experiment": "pn-impact",
        "floor_rise_db": db(med[1] / med[0]),
        "floor_after_compensation_db": db(med[2] / med[0]),
        "weak_targets": weak,
        "dominant_range_m": FrameConfig::delay_to_range(comp.delay),
    }))
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct IciExploitOpts {
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_q_min_v")]
    q_min: i64,
    #[serde(default = "default_q_max_v")]
    q_max: i64,
    #[serde(default = "default_pad")]
    pad: usize,
}

fn default_q_min_v() -> i64 {
    -3
}

fn default_q_max_v() -> i64 {
    3
}

fn ici_exploit(sc: &Scenario, o: IciExploitOpts, out: &mut ArtifactWriter) -> Result<Value> {
    need_target(sc, "ici-exploit")?;
    let cfg = sc.frame;
    let truth = cfg.doppler_to_velocity(sc.targets[dominant(sc)].doppler);
    let v_amb = cfg.velocity_ambiguity();
    let rows: Vec<TrialRow> = (0..o.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(sc.seed, t);
            let (x, p) = frame_inputs(sc, seed);
            let frame = simulate_radar_frame(sc, &x, &p, Impairments::IciExact, seed)?;
            let y = &frame.antennas[0];
            let coarse = estimate_dominant_target(y, &x, &p, &cfg, o.pad, o.pad)?;
            let d = ici_velocity_disambiguate(y, &x, &p, &cfg, &coarse, o.q_min..=o.q_max)?;
            let correct = (d.velocity - truth).abs() < v_amb / 2.0;
            Ok((
                vec![
                    t as f64,
                    truth,
                    coarse.velocity,
                    d.q as f64,
                    d.velocity,
                    correct as u8 as f64,
                ],
                d.scores,
            ))
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new([
        "trial",
        "true_velocity_mps",
        "coarse_velocity_mps",
        "q",
        "estimated_velocity_mps",
        "correct",
    ]);
    let mut hits = 0usize;
    for (r, _) in &rows {
        hits += (r[5] > 0.5) as usize;
        table.push(r.clone());
    }
    out.csv("trials.csv", &table)?;
    let mut scores = CsvTable::new(["q", "score"]);
    if let Some((_, s)) = rows.first() {
        for (q, v) in s {
            scores.push(vec![*q as f64, *v]);
        }
    }
    out.csv("scores.csv", &scores)?;
    Ok(json!({
        "experiment": "ici-exploit",
        "true_velocity_mps": truth,
        "velocity_ambiguity_mps": v_amb,
        "max_phase_excursion_rad": max_phase_excursion(truth, cfg.carrier_freq, cfg.subcarrier_spacing),
        "trials": o.trials,
        "success_rate": if o.trials > 0 { hits as f64 / o.trials as f64 } else { f64::NAN },
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PnExploitOpts {
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    q_min: i64,
    #[serde(default = "default_q_max_r")]
    q_max: i64,
    #[serde(default = "default_pad")]
    pad: usize,
}

fn default_q_max_r() -> i64 {
    3
}

fn pn_exploit(sc: &Scenario, o: PnExploitOpts, out: &mut ArtifactWriter) -> Result<Value> {
    need_target(sc, "pn-exploit")?;
    let model = need_pn(sc, "pn-exploit")?;
    let cfg = sc.frame;
    let truth = sc.targets[dominant(sc)].range();
    let r_amb = cfg.range_ambiguity();
    let rows: Vec<TrialRow> = (0..o.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(sc.seed, t);
            let (x, p) = frame_inputs(sc, seed);
            let frame = simulate_radar_frame(sc, &x, &p, Impairments::PhaseNoise { model }, seed)?;
            let y = &frame.antennas[0];
            let coarse = estimate_dominant_target(y, &x, &p, &cfg, o.pad, o.pad)?;
            let row = |q: f64, est: f64, costs: Vec<(i64, f64)>| {
                let correct = (est - truth).abs() < r_amb / 2.0;
                (vec![t as f64, truth, coarse.range, q, est, correct as u8 as f64], costs)
            };
            match pn_range_disambiguate(
                y,
                &x,
                &p,
                &cfg,
                &model,
                sc.mode,
                &coarse,
                o.q_min..=o.q_max,
                sc.noise_radar,
            ) {
                Ok(d) => Ok(row(d.q as f64, d.range, d.costs)),
                Err(IsacError::LowSnr(_)) => Ok(row(f64::NAN, f64::NAN, Vec::new())),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new([
        "trial",
        "true_range_m",
        "coarse_range_m",
        "q",
        "estimated_range_m",
        "correct",
    ]);
    let mut hits = 0usize;
    for (r, _) in &rows {
        hits += (r[5] > 0.5) as usize;
        table.push(r.clone());
    }
    out.csv("trials.csv", &table)?;
    let mut costs = CsvTable::new(["q", "cost"]);
    if let Some((_, c)) = rows.first() {
        for (q, v) in c {
            costs.push(vec![*q as f64, *v]);
        }
    }
    out.csv("costs.csv", &costs)?;
    Ok(json!({
        "experiment": "pn-exploit",
        "true_range_m": truth,
        "range_ambiguity_m": r_amb,
        "trials": o.trials,
        "success_rate": if o.trials > 0 { hits as f64 / o.trials as f64 } else { f64::NAN },
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RocOpts {
    #[serde(default = "default_roc_trials")]
    trials: usize,
    #[serde(default = "default_roc_pfa")]
    pfa: Vec<f64>,
    #[serde(default = "default_roc_gamma")]
    gamma_db: Vec<f64>,
}

fn default_roc_trials() -> usize {
    1000
}

fn default_roc_pfa() -> Vec<f64> {
    vec![1e-3, 1e-2, 5e-2]
}

fn default_roc_gamma() -> Vec<f64> {
    (0..=9).map(|k| 2.0 * k as f64).collect()
}

/// Monostatic SISO copy of `sc` with one on-grid target of integrated SNR `gamma`.
fn single_target(sc: &Scenario, delay: f64, doppler: f64, gamma: Option<f64>, energy: f64) -> Scenario {
    let mut s = Scenario::monostatic(sc.frame, ArrayConfig::siso(&sc.frame), sc.noise_radar);
    s.allow_range_ambiguity = sc.allow_range_ambiguity;
    if let Some(g) = gamma {
        let snr_db = db(g / energy);
        s.add_target(
            FrameConfig::delay_to_range(delay),
            sc.frame.doppler_to_velocity(doppler),
            0.0,
            snr_db,
            0.0,
        );
    }
    s
}

fn detection_roc(sc: &Scenario, o: RocOpts, out: &mut ArtifactWriter) -> Result<Value> {
    let cfg = sc.frame;
    let (n, m) = (cfg.n_subcarriers, cfg.n_symbols);
    let dt = 1.0 / (n as f64 * cfg.subcarrier_spacing);
    let dn = 1.0 / (m as f64 * cfg.symbol_duration());
    let (row, col) = match sc.targets.first() {
        Some(t) => ((t.delay / dt).round() as i64, (t.doppler / dn).round() as i64),
        None => ((n / 8) as i64, 0),
    };
    let delay = row as f64 * dt;
    let doppler = col as f64 * dn;
    let energy = grid_energy(&frame_inputs(sc, 0).0, &PowerGrid::uniform(&cfg));
    let mut levels: Vec<Option<f64>> = vec![None];
    levels.extend(o.gamma_db.iter().map(|g| Some(10f64.powf(g / 10.0))));
    let counts: Vec<Vec<usize>> = levels
        .iter()
        .enumerate()
        .map(|(li, gamma)| {
            let s = single_target(sc, delay, doppler, *gamma, energy);
            let hits: Vec<Vec<bool>> = (0..o.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(sc.seed ^ ((li as u64) << 32), t);
                    let (x, p) = frame_inputs(sc, seed);
                    let f = simulate_radar_frame(&s, &x, &p, Impairments::None, seed)?;
                    let map = rd_map(&f.antennas[0], &x, &p, &cfg, 1, 1)?;
                    o.pfa
                        .iter()
                        .map(|pfa| {
                            let rep = glrt_detect(&map, sc.noise_radar, *pfa, 1)?;
                            Ok(match gamma {
                                None => !rep.is_empty(),
                                Some(_) => rep.detections.iter().any(|d| {
                                    (d.delay - delay).abs() < 0.5 * dt && (d.doppler - doppler).abs() < 0.5 * dn
                                }),
                            })
                        })
                        .collect::<Result<Vec<bool>>>()
                })
                .collect::<Result<_>>()?;
            Ok((0..o.pfa.len()).map(|k| hits.iter().filter(|h| h[k]).count()).collect())
        })
        .collect::<Result<_>>()?;
    let trials = o.trials.max(1) as f64;
    let mut fa = CsvTable::new(["pfa_design", "pfa_empirical", "trials"]);
    for (k, pfa) in o.pfa.iter().enumerate() {
        fa.push(vec![*pfa, counts[0][k] as f64 / trials, o.trials as f64]);
    }
    out.csv("false_alarm.csv", &fa)?;
    let mut roc = CsvTable::new(["pfa_design", "gamma_db", "pd_empirical", "pd_theory"]);
    let mut worst: f64 = 0.0;
    for (k, pfa) in o.pfa.iter().enumerate() {
        let cell = per_cell_pfa(*pfa, n * m)?;
        for (gi, g) in o.gamma_db.iter().enumerate() {
            let emp = counts[gi + 1][k] as f64 / trials;
            let theory = theoretical_pd(10f64.powf(g / 10.0), cell)?;
            worst = worst.max((emp - theory).abs());
            roc.push(vec![*pfa, *g, emp, theory]);
        }
    }
    out.csv("roc.csv", &roc)?;
    Ok(json!({
        "experiment": "detection-roc",
        "trials": o.trials,
        "target_range_m": FrameConfig::delay_to_range(delay),
        "target_velocity_mps": cfg.doppler_to_velocity(doppler),
        "false_alarm": o.pfa.iter().enumerate().map(|(k, p)| json!({"design": p, "empirical": counts[0][k] as f64 / trials})).collect::<Vec<_>>(),
        "max_pd_deviation": worst,
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CrbOpts {
    #[serde(default = "default_crb_trials")]
    trials: usize,
    #[serde(default = "default_crb_gamma")]
    gamma_db: Vec<f64>,
    #[serde(default = "default_pad")]
    pad: usize,
}

fn default_crb_trials() -> usize {
    200
}

fn default_crb_gamma() -> Vec<f64> {
    (0..=8).map(|k| -5.0 + 5.0 * k as f64).collect()
}

fn crb_sweep(sc: &Scenario, o: CrbOpts, out: &mut ArtifactWriter) -> Result<Value> {
    let cfg = sc.frame;
    let siso = ArrayConfig::siso(&cfg);
    let dt = 1.0 / (cfg.n_subcarriers as f64 * cfg.subcarrier_spacing);
    let dn = 1.0 / (cfg.n_symbols as f64 * cfg.symbol_duration());
    let (delay0, doppler0) = sc.targets.first().map_or((8.0 * dt, 0.0), |t| (t.delay, t.doppler));
    let energy = grid_energy(&frame_inputs(sc, 0).0, &PowerGrid::uniform(&cfg));
    let mut table = CsvTable::new([
        "gamma_db",
        "rmse_range_m",
        "crb_range_m",
        "rmse_velocity_mps",
        "crb_velocity_mps",
    ]);
    let mut eff = Vec::new();
    for (gi, g) in o.gamma_db.iter().enumerate() {
        let gamma = 10f64.powf(g / 10.0);
        let errs: Vec<(f64, f64)> = (0..o.trials as u64)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(sc.seed ^ ((gi as u64) << 32), t);
                let mut r = rng::stream(seed, Stream::Trial);
                let delay = delay0 + dt * r.random_range(-0.5..0.5);
                let doppler = doppler0 + dn * r.random_range(-0.5..0.5);
                let mut s = single_target(sc, delay, doppler, Some(gamma), energy);
                s.targets[0].gain =
                    Complex64::from_polar(s.targets[0].gain.norm(), r.random_range(0.0..std::f64::consts::TAU));
                let (x, p) = frame_inputs(sc, seed);
                let f = simulate_radar_frame(&s, &x, &p, Impairments::None, seed)?;
                let d = estimate_dominant_target(&f.antennas[0], &x, &p, &cfg, o.pad, o.pad)?;
                Ok((
                    d.range - FrameConfig::delay_to_range(delay),
                    d.velocity - cfg.doppler_to_velocity(doppler),
                ))
            })
            .collect::<Result<_>>()?;
        let n = errs.len().max(1) as f64;
        let rmse_r = (errs.iter().map(|e| e.0 * e.0).sum::<f64>() / n).sqrt();
        let rmse_v = (errs.iter().map(|e| e.1 * e.1).sum::<f64>() / n).sqrt();
        let crb = crb_bounds(gamma, &cfg, &siso, 0.0)?;
        table.push(vec![*g, rmse_r, crb.range.sqrt(), rmse_v, crb.velocity.sqrt()]);
        eff.push(json!({"gamma_db": g, "range_ratio": rmse_r / crb.range.sqrt(), "velocity_ratio": rmse_v / crb.velocity.sqrt()}));
    }
    out.csv("crb.csv", &table)?;
    Ok(json!({
        "experiment": "crb-sweep",
        "trials": o.trials,
        "rmse_over_sqrt_crb": eff,
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AllocOpts {
    /// Resource blocks; the gains of adjacent subcarriers are averaged per block.
    #[serde(default = "default_blocks")]
    blocks: usize,
    #[serde(default)]
    total_power: Option<f64>,
    #[serde(default)]
    g_comm: Option<Vec<f64>>,
    #[serde(default)]
    g_sense: Option<Vec<f64>>,
    #[serde(default)]
    interference_caps: Vec<f64>,
    #[serde(default = "default_weights")]
    weights: Vec<f64>,
    #[serde(default = "default_weights")]
    lambda_w: Vec<f64>,
}

fn default_blocks() -> usize {
    16
}

fn default_weights() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn alloc_frontier(sc: &Scenario, o: AllocOpts, out: &mut ArtifactWriter) -> Result<Value> {
    let cfg = sc.frame;
    let n = cfg.n_subcarriers;
    let (g_comm, g_sense) = match (o.g_comm, o.g_sense) {
        (Some(c), Some(s)) => (c, s),
        (c, s) => {
            if o.blocks == 0 || n % o.blocks != 0 {
                return Err(IsacError::Scenario {
                    path: "experiment.blocks".into(),
                    message: format!("must divide the {n} subcarriers"),
                });
            }
            let per = n / o.blocks;
            let c = match c {
                Some(c) => c,
                None => {
                    if sc.comm_paths.is_empty() {
                        return Err(IsacError::InvalidConfig(
                            "alloc-frontier needs comm_paths or experiment.g_comm".into(),
                        ));
                    }
                    let h = comm_channel(sc, sc.quasi_static)?;
                    (0..o.blocks)
                        .map(|b| {
                            let rows = h.rows(b * per, per);
                            rows.iter().map(|v| v.norm_sqr()).sum::<f64>() / rows.len() as f64 / sc.noise_comm
                        })
                        .collect()
                }
            };
            let s = match s {
                Some(s) => s,
                None => {
                    let q: f64 = sc.targets.iter().map(|t| t.gain.norm_sqr()).sum::<f64>() * sc.arrays.n_tx as f64
                        / sc.noise_radar
                        * cfg.n_symbols as f64;
                    vec![q; o.blocks]
                }
            };
            (c, s)
        }
    };
    let k = g_comm.len();
    let problem = AllocationProblem {
        g_comm,
        g_sense,
        total_power: o.total_power.unwrap_or(k as f64),
        rate_floor: 0.0,
        interference_caps: o.interference_caps,
    };
    problem.validate()?;
    let points = scalarized_pareto(&problem, &o.weights)?;
    let mut frontier = CsvTable::new(["mi_comm_bits", "mi_sensing_bits", "comm_blocks"]);
    for pt in &points {
        let nc = pt.result.assignment.iter().filter(|r| **r == Role::Comm).count();
        frontier.push(vec![pt.mi_comm, pt.mi_sensing, nc as f64]);
    }
    out.csv("frontier.csv", &frontier)?;

    let block_spacing = cfg.subcarrier_spacing * (n / k.max(1)) as f64;
    let mut trade = CsvTable::new(["lambda_w", "rate_bits", "rms_bandwidth_hz"]);
    for lw in &o.lambda_w {
        let p = crb_aware_allocation(&problem.g_comm, problem.total_power, *lw)?;
        trade.push(vec![*lw, rate(&problem.g_comm, &p), rms_bandwidth(&p, block_spacing)]);
    }
    out.csv("crb_tradeoff.csv", &trade)?;
    Ok(json!({
        "experiment": "alloc-frontier",
        "blocks": k,
        "total_power": problem.total_power,
        "max_comm_rate_bits": max_comm_rate(&problem)?,
        "frontier_points": points.len(),
        "frontier_area": frontier_area(&points),
    }))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct McpcOpts {
    #[serde(default = "default_eight")]
    n_carriers: usize,
    #[serde(default = "default_eight")]
    code_len: usize,
    #[serde(default = "default_chip")]
    chip_duration: f64,
    /// Samples per chip per carrier: `fs = oversample * N / Tc`.
    #[serde(default = "default_oversample")]
    oversample: usize,
    /// Doppler cut half-span in units of `1/T`.
    #[serde(default = "default_span")]
    doppler_span: f64,
    #[serde(default = "default_points")]
    doppler_points: usize,
    /// Points per axis of the ambiguity surface.
    #[serde(default = "default_surface")]
    surface_points: usize,
}

fn default_eight() -> usize {
    8
}

fn default_chip() -> f64 {
    1e-6
}

fn default_oversample() -> usize {
    16
}

fn default_span() -> f64 {
    3.0
}

fn default_points() -> usize {
    401
}

fn default_surface() -> usize {
    33
}

fn mcpc_analysis(o: McpcOpts, out: &mut ArtifactWriter) -> Result<Value> {
    if o.oversample == 0 || o.doppler_points < 3 || o.surface_points < 2 {
        return Err(IsacError::Scenario {
            path: "experiment".into(),
            message: "needs oversample >= 1, doppler_points >= 3 and surface_points >= 2".into(),
        });
    }
    let n = o.n_carriers;
    let tc = o.chip_duration;
    let fs = o.oversample as f64 * n as f64 / tc;
    let ones = vec![Complex64::new(1.0, 0.0); n];
    let single = McpcConfig::new(DMatrix::from_element(n, 1, Complex64::new(1.0, 0.0)), ones.clone(), tc)?;
    let identical = mcpc_envelope(&single, fs)? == ofdm_pulse(&ones, tc, fs);
    let cfg = McpcConfig::new(cyclic_shift_codes(&p4_code(o.code_len), n), ones, tc)?;
    let s = mcpc_envelope(&cfg, fs)?;

    let mut env = CsvTable::new(["time_s", "real", "imag", "magnitude"]);
    for (i, v) in s.samples.iter().enumerate() {
        env.push(vec![i as f64 / fs, v.re, v.im, v.norm()]);
    }
    out.csv("envelope.csv", &env)?;

    let ac = autocorrelation(&s);
    let centre = s.len() - 1;
    let mut act = CsvTable::new(["delay_s", "magnitude_db"]);
    for (i, v) in ac.iter().enumerate() {
        act.push(vec![(i as f64 - centre as f64) / fs, 20.0 * v.max(1e-15).log10()]);
    }
    out.csv("autocorrelation.csv", &act)?;

    let t = cfg.pulse_duration();
    let half = (o.doppler_points / 2) as i64;
    let step = o.doppler_span / (half as f64 * t);
    let dopplers: Vec<f64> = (-half..=half).map(|k| k as f64 * step).collect();
    let cut: Vec<f64> = ambiguity_function(&s, &[0.0], &dopplers)?
        .row(0)
        .iter()
        .copied()
        .collect();
    let mut dc = CsvTable::new(["doppler_hz", "magnitude_db"]);
    for (f, v) in dopplers.iter().zip(&cut) {
        dc.push(vec![*f, 20.0 * v.max(1e-15).log10()]);
    }
    out.csv("doppler_cut.csv", &dc)?;

    let k = o.surface_points;
    let reach = (s.len() - 1) as f64 / fs;
    let delays: Vec<f64> = (0..k)
        .map(|i| -reach + 2.0 * reach * i as f64 / (k - 1) as f64)
        .collect();
    let sd: Vec<f64> = (0..k)
        .map(|i| -o.doppler_span / t + 2.0 * o.doppler_span / t * i as f64 / (k - 1) as f64)
        .collect();
    let af = ambiguity_function(&s, &delays, &sd)?;
    let mut surf = CsvTable::new(["delay_s", "doppler_hz", "magnitude_db"]);
    for (i, d) in delays.iter().enumerate() {
        for (j, f) in sd.iter().enumerate() {
            surf.push(vec![*d, *f, 20.0 * af[(i, j)].max(1e-15).log10()]);
        }
    }
    out.csv("ambiguity.csv", &surf)?;

    let level = std::f64::consts::FRAC_1_SQRT_2;
    let delay_width = mainlobe_width(&ac, centre, level, 1.0 / fs);
    let doppler_width = mainlobe_width(&cut, half as usize, level, step);
    Ok(json!({
        "experiment": "mcpc-analysis",
        "single_chip_matches_ofdm": identical,
        "papr_db": db(papr(&s)?),
        "pulse_duration_s": t,
        "delay_mainlobe_s": delay_width,
        "delay_mainlobe_over_chip_per_carrier": delay_width / (tc / n as f64),
        "doppler_mainlobe_hz": doppler_width,
        "doppler_mainlobe_times_duration": doppler_width * t,
    }))
}
