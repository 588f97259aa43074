use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofdm_isac::channel::{build_si_channel, simulate_radar_frame, Impairments, Mode, Scenario};
use ofdm_isac::enhance::{
    covariance_matching_cost, design_si_nulling, doppler_grid, empirical_lag_covariance, ici_joint_estimate,
    ici_joint_extract, ici_velocity_disambiguate, pn_compensate, pn_range_disambiguate, transmit_target_gain,
    ConstraintMode,
};
use ofdm_isac::phase_noise::{analytic_pn_covariance, PnModel};
use ofdm_isac::radar_rx::{estimate_dominant_target, iterative_target_extraction, ExtractionParams};
use ofdm_isac::waveform::{build_symbol_grid, Constellation};
use ofdm_isac::{array_steering, ArrayConfig, FrameConfig, IsacError, PowerGrid, SymbolGrid};

fn inputs(cfg: &FrameConfig, seed: u64) -> (SymbolGrid, PowerGrid) {
    (
        build_symbol_grid(cfg, Constellation::Qpsk, seed),
        PowerGrid::uniform(cfg),
    )
}

fn scene(cfg: FrameConfig, targets: &[(f64, f64, f64)]) -> Scenario {
    let mut sc = Scenario::monostatic(cfg, ArrayConfig::siso(&cfg), 1.0);
    for (i, &(r, v, snr)) in targets.iter().enumerate() {
        sc.add_target(r, v, 0.0, snr, 1.1 * i as f64 + 0.4);
    }
    sc
}

fn params(k_max: usize) -> ExtractionParams {
    ExtractionParams {
        k_max,
        pfa: 1e-3,
        noise_var: Some(1.0),
        ..ExtractionParams::default()
    }
}

#[test]
fn zero_doppler_grid_reduces_to_plain_extraction() {
    let cfg = FrameConfig::with_cp_ratio(128, 8, 120e3, 0.07, 28e9).unwrap();
    let (x, p) = inputs(&cfg, 2);
    for targets in [
        vec![(10.0, 0.0, 20.0), (50.0, 0.0, 5.0)],
        vec![(20.0, 35.0, 15.0), (70.0, -12.0, 3.0)],
    ] {
        let f = simulate_radar_frame(&scene(cfg, &targets), &x, &p, Impairments::IciExact, 4).unwrap();
        let a = ici_joint_estimate(f.antenna(0), &x, &p, &cfg, &[0.0], &params(4)).unwrap();
        let b = iterative_target_extraction(f.antenna(0), &x, &p, &cfg, &params(4)).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a.threshold, b.threshold);
        for (u, v) in a.detections.iter().zip(&b.detections) {
            assert_eq!(
                (u.delay, u.doppler, u.amplitude, u.statistic),
                (v.delay, v.doppler, v.amplitude, v.statistic)
            );
            assert_eq!(u.angle.to_bits(), v.angle.to_bits());
        }
    }
    let f = simulate_radar_frame(&scene(cfg, &[]), &x, &p, Impairments::None, 4).unwrap();
    assert!(matches!(
        ici_joint_estimate(f.antenna(0), &x, &p, &cfg, &[], &params(2)),
        Err(IsacError::Empty(_))
    ));
}

#[test]
fn single_fast_target_cancels_in_one_step() {
    let cfg = FrameConfig::with_cp_ratio(256, 8, 60e3, 0.07, 28e9).unwrap();
    let (x, p) = inputs(&cfg, 3);
    let mut sc = scene(cfg, &[(40.0, 80.0, 30.0)]);
    sc.noise_radar = 0.0;
    let f = simulate_radar_frame(&sc, &x, &p, Impairments::IciExact, 1).unwrap();
    let nu = cfg.velocity_to_doppler(80.0);
    let grid = doppler_grid(&cfg, 100.0, nu / 8.0).unwrap();
    assert!(grid.contains(&0.0) && grid.len() % 2 == 1);
    let ext = ici_joint_extract(
        f.antenna(0),
        &x,
        &p,
        &cfg,
        &grid,
        &ExtractionParams {
            noise_var: Some(1e-12),
            ..params(1)
        },
    )
    .unwrap();
    let before = f.antenna(0).norm_squared();
    let after = ext.residual.norm_squared();
    assert!(after <= 0.01 * before, "residual fraction {}", after / before);
    assert_eq!(ext.report.len(), 1);
    assert!((ext.report.detections[0].velocity - 80.0).abs() < cfg.velocity_ambiguity() / 8.0);
}

#[test]
fn velocity_disambiguation() {
    let n = 256;
    let cfg = FrameConfig::with_cp_ratio(n, 16, 100e6 / n as f64, 0.07, 60e9).unwrap();
    let v_amb = cfg.velocity_ambiguity();
    let mut ok = 0;
    for seed in 0..20 {
        let (x, p) = inputs(&cfg, seed);
        for (v, q_true) in [(0.2 * v_amb, 0), (1.7 * v_amb, 2)] {
            let f = simulate_radar_frame(&scene(cfg, &[(15.0, v, 20.0)]), &x, &p, Impairments::IciExact, seed).unwrap();
            let coarse = estimate_dominant_target(f.antenna(0), &x, &p, &cfg, 4, 4).unwrap();
            let d = ici_velocity_disambiguate(f.antenna(0), &x, &p, &cfg, &coarse, -3..=3).unwrap();
            let want = ((v - coarse.velocity) / v_amb).round() as i64;
            assert_eq!(want, q_true);
            assert_eq!(d.scores.len(), 7);
            assert!((d.velocity - coarse.velocity - d.q as f64 * v_amb).abs() < 1e-9 * v_amb);
            ok += usize::from(d.q == want);
        }
    }
    assert!(ok >= 38, "{ok}/40");

    let (x, p) = inputs(&cfg, 0);
    let f = simulate_radar_frame(&scene(cfg, &[]), &x, &p, Impairments::None, 0).unwrap();
    let coarse = estimate_dominant_target(f.antenna(0), &x, &p, &cfg, 4, 4).unwrap();
    #[allow(clippy::reversed_empty_ranges)]
    let empty = 1..=0;
    assert!(ici_velocity_disambiguate(f.antenna(0), &x, &p, &cfg, &coarse, empty).is_err());
}

#[test]
fn velocity_disambiguation_separates_targets_in_one_bin() {
    let n = 256;
    let cfg = FrameConfig::with_cp_ratio(n, 16, 100e6 / n as f64, 0.07, 60e9).unwrap();
    let v_amb = cfg.velocity_ambiguity();
    let (x, p) = inputs(&cfg, 5);
    let truth = [(8.0, 0.3 * v_amb), (20.0, 1.3 * v_amb)];
    let sc = scene(cfg, &[(truth[0].0, truth[0].1, 30.0), (truth[1].0, truth[1].1, 30.0)]);
    let f = simulate_radar_frame(&sc, &x, &p, Impairments::IciExact, 5).unwrap();
    let rep = iterative_target_extraction(f.antenna(0), &x, &p, &cfg, &params(2)).unwrap();
    assert_eq!(rep.len(), 2);
    let mut qs = Vec::new();
    for (r, v) in truth {
        let coarse = rep
            .detections
            .iter()
            .min_by(|a, b| (a.range - r).abs().total_cmp(&(b.range - r).abs()))
            .unwrap();
        assert!((coarse.velocity - 0.3 * v_amb).abs() < 0.05 * v_amb);
        let d = ici_velocity_disambiguate(f.antenna(0), &x, &p, &cfg, coarse, -2..=2).unwrap();
        assert!((d.velocity - v).abs() < 0.05 * v_amb, "{} vs {v}", d.velocity);
        qs.push(d.q);
    }
    assert_eq!(qs, vec![0, 1]);
}

#[test]
fn zero_linewidth_compensation_is_identity() {
    let cfg = FrameConfig::with_cp_ratio(128, 8, 120e3, 0.07, 28e9).unwrap();
    let (x, p) = inputs(&cfg, 1);
    let f = simulate_radar_frame(&scene(cfg, &[(30.0, 5.0, 25.0)]), &x, &p, Impairments::None, 3).unwrap();
    let out = pn_compensate(&f, &x, &p, &cfg, &PnModel::FreeRunning { bw3db: 0.0 }, 3).unwrap();
    assert!((out.frame.antenna(0) - f.antenna(0)).norm() <= 1e-12 * f.antenna(0).norm());
    assert!(out.phase.iter().all(|v| v.abs() < 1e-12));
    let d = estimate_dominant_target(f.antenna(0), &x, &p, &cfg, 4, 4).unwrap();
    assert!((out.delay - d.delay).abs() < 1e-3 / (128.0 * 120e3));
}

#[test]
fn analytic_matching_cost_is_minimised_at_the_true_delay() {
    let cfg = FrameConfig::with_cp_ratio(32, 4, 1e6, 0.07, 28e9).unwrap();
    let model = PnModel::Pll {
        loop_bw: 1e5,
        bw3db: 2e4,
    };
    let (_, counts) = empirical_lag_covariance(&DMatrix::zeros(32, 4), &DMatrix::from_element(32, 4, true));
    assert_eq!(counts[(31, 3)], 128.0);
    for fine in [0.1e-6, 0.45e-6, 0.8e-6] {
        for q_true in 0..4 {
            let tau = fine + q_true as f64 / cfg.subcarrier_spacing;
            let empirical = analytic_pn_covariance(&model, tau, &cfg, true)
                .unwrap()
                .kernel()
                .clone();
            let costs: Vec<f64> = (0..4)
                .map(|q| {
                    let a =
                        analytic_pn_covariance(&model, fine + q as f64 / cfg.subcarrier_spacing, &cfg, true).unwrap();
                    covariance_matching_cost(&empirical, &counts, &a)
                })
                .collect();
            assert!(costs[q_true] < 1e-12);
            for (q, c) in costs.iter().enumerate() {
                if q != q_true {
                    assert!(*c > costs[q_true]);
                }
            }
        }
    }
}

#[test]
fn range_disambiguation_in_the_first_interval() {
    let cfg = FrameConfig::with_cp_ratio(256, 10, 120e3, 0.07, 28e9).unwrap();
    let model = PnModel::Pll {
        loop_bw: 1e6,
        bw3db: 20e3,
    };
    let mut ok = 0;
    for seed in 0..10 {
        let (x, p) = inputs(&cfg, seed);
        let f = simulate_radar_frame(
            &scene(cfg, &[(40.0, 0.0, 30.0)]),
            &x,
            &p,
            Impairments::PhaseNoise { model },
            seed,
        )
        .unwrap();
        let coarse = estimate_dominant_target(f.antenna(0), &x, &p, &cfg, 4, 4).unwrap();
        let d = pn_range_disambiguate(
            f.antenna(0),
            &x,
            &p,
            &cfg,
            &model,
            Mode::Monostatic,
            &coarse,
            0..=3,
            1.0,
        )
        .unwrap();
        assert!((d.range - coarse.range - d.q as f64 * cfg.range_ambiguity()).abs() < 1e-6);
        assert!(d.usable_cells > 0);
        ok += usize::from(d.q == 0);
        assert!(matches!(
            pn_range_disambiguate(f.antenna(0), &x, &p, &cfg, &model, Mode::Bistatic, &coarse, 0..=3, 1.0),
            Err(IsacError::RequiresMonostatic)
        ));
    }
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn si_nulling_examples() {
    let cfg = FrameConfig::with_cp_ratio(64, 4, 120e3, 0.07, 28e9).unwrap();
    let l = cfg.wavelength();
    let arrays = ArrayConfig::new(8, 8, 1, l / 2.0, l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f_rf = DMatrix::from_fn(8, 2, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)));
    let f_bb = vec![DMatrix::from_fn(2, 1, |_, _| {
        Complex64::new(rng.random(), rng.random())
    })];

    let zero = design_si_nulling(&DMatrix::zeros(8, 8), &f_rf, &f_bb, 3, ConstraintMode::Digital).unwrap();
    assert_eq!(zero.residual, 0.0);
    assert!((zero.w_rf.adjoint() * &zero.w_rf - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-12);

    let si = build_si_channel(&arrays, -30.0, 0.1, -0.2, 2).unwrap();
    let res = design_si_nulling(&si.h, &f_rf, &f_bb, 2, ConstraintMode::Digital).unwrap();
    assert_eq!(res.rank, 1);
    assert!(res.residual <= 1e-10 && res.bound_met);
    let eff = &si.h * &f_rf * &f_bb[0];
    assert!((res.w_rf.adjoint() * &eff).norm() <= 1e-10 * eff.norm());
    assert!((res.w_rf.adjoint() * &res.w_rf - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-12);

    let um = design_si_nulling(&si.h, &f_rf, &f_bb, 2, ConstraintMode::UnitModulusAnalog).unwrap();
    assert!(um.w_rf.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    assert_eq!(um.bound_met, um.residual <= 1e-3);

    let full = DMatrix::from_fn(2, 2, |i, j| Complex64::new((i + 2 * j + 1) as f64, (i * j) as f64));
    let err = design_si_nulling(
        &full,
        &DMatrix::identity(2, 2),
        &[DMatrix::identity(2, 2)],
        1,
        ConstraintMode::Digital,
    );
    assert!(matches!(err, Err(IsacError::Infeasible(_))));
}

#[test]
fn transmit_gain_examples() {
    let l = 0.01;
    let arrays = ArrayConfig::new(8, 1, 1, l / 2.0, l).unwrap();
    let theta = 0.35;
    let a = array_steering(theta, 8, l / 2.0, l, None).unwrap();
    let f = DMatrix::from_iterator(8, 1, a.iter().map(|v| v / 8f64.sqrt()));
    let one = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    let g = transmit_target_gain(&f, &one, theta, &arrays).unwrap();
    assert!((g[0] - 8.0).abs() < 1e-12);

    // orthogonal: steering toward the next null of the uniform array
    let null = (theta.sin() + 2.0 / 8.0).asin();
    let b = array_steering(null, 8, l / 2.0, l, None).unwrap();
    let fo = DMatrix::from_iterator(8, 1, b.iter().copied());
    assert!(transmit_target_gain(&fo, &one, theta, &arrays).unwrap()[0] < 1e-20);

    let two = DMatrix::from_fn(8, 2, |i, j| if j == 0 { f[(i, 0)] } else { fo[(i, 0)] });
    let bb = DMatrix::<Complex64>::identity(2, 2);
    let g2 = transmit_target_gain(&two, &bb, theta, &arrays).unwrap();
    assert_eq!(g2.len(), 2);
    let s = 2.5;
    let scaled = transmit_target_gain(&(&two * Complex64::new(s, 0.0)), &bb, theta, &arrays).unwrap();
    for (u, v) in g2.iter().zip(&scaled) {
        assert!((v - s * s * u).abs() <= 1e-12 * v.max(1.0));
    }
    assert!(transmit_target_gain(&two, &one, theta, &arrays).is_err());
}
