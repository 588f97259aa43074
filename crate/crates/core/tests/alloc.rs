use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofdm_isac::alloc::{
    crb_aware_allocation, evaluate_assignment, frontier_area, greedy_mi_allocation, max_comm_rate, rate,
    rms_bandwidth_term, scalarized_pareto, waterfilling, AllocationProblem,
};
use ofdm_isac::kpi::{mi_reward, Role};

fn problem(seed: u64, n: usize, floor: f64) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AllocationProblem {
        g_comm: (0..n).map(|_| rng.random::<f64>() * 10.0).collect(),
        g_sense: (0..n).map(|_| rng.random::<f64>() * 10.0).collect(),
        total_power: 4.0,
        rate_floor: floor,
        interference_caps: vec![],
    }
}

fn assignment(mask: u32, n: usize) -> Vec<Role> {
    (0..n)
        .map(|i| if mask >> i & 1 == 1 { Role::Comm } else { Role::Sensing })
        .collect()
}

#[test]
fn waterfilling_equal_and_zero_gains() {
    let p = waterfilling(&[2.0; 5], 3.0).unwrap();
    assert!(p.iter().all(|v| (v - 0.6).abs() < 1e-12));
    let p = waterfilling(&[1.0, 0.0, 3.0], 2.0).unwrap();
    assert_eq!(p[1], 0.0);
    assert!(waterfilling(&[0.0, 0.0], 1.0).is_err());
}

#[test]
fn waterfilling_matches_grid_search() {
    let g = [2.0, 1.0, 0.5];
    let p = waterfilling(&g, 1.0).unwrap();
    let mut best = 0.0f64;
    let steps = 1000;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let q = [
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            best = best.max(rate(&g, &q));
        }
    }
    let got = rate(&g, &p);
    assert!(got >= best - 1e-12 && got - best < 1e-3, "{got} vs {best}");
}

#[test]
fn waterfilling_kkt_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let g: Vec<f64> = (0..24).map(|_| rng.random::<f64>().powi(3) * 20.0).collect();
        let total = rng.random::<f64>() * 5.0 + 0.1;
        let p = waterfilling(&g, total).unwrap();
        assert!((p.iter().sum::<f64>() - total).abs() <= 1e-9 * total);
        let levels: Vec<f64> = g
            .iter()
            .zip(&p)
            .filter(|(_, p)| **p > 0.0)
            .map(|(g, p)| g / (1.0 + g * p))
            .collect();
        let inv_mu = levels[0];
        assert!(levels.iter().all(|v| (v - inv_mu).abs() <= 1e-6 * inv_mu));
        for (gi, pi) in g.iter().zip(&p) {
            if *pi == 0.0 {
                assert!(gi / inv_mu <= 1.0 + 1e-6);
            }
        }
    }
}

#[test]
fn crb_aware_endpoints_and_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 5.0 + 0.1).collect();
    let p = crb_aware_allocation(&g, 2.0, 1.0).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-9 && (p[15] - 1.0).abs() < 1e-9);
    assert!(p[1..15].iter().all(|v| v.abs() < 1e-9));
    let p0 = crb_aware_allocation(&g, 2.0, 0.0).unwrap();
    let wf = waterfilling(&g, 2.0).unwrap();
    assert!(p0.iter().zip(&wf).all(|(a, b)| (a - b).abs() < 1e-6));

    let (mut prev_w, mut prev_r) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..=20 {
        let p = crb_aware_allocation(&g, 2.0, k as f64 / 20.0).unwrap();
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-9 && p.iter().all(|v| *v >= 0.0));
        let (w, r) = (rms_bandwidth_term(&p), rate(&g, &p));
        assert!(w >= prev_w - 1e-9 && r <= prev_r + 1e-9);
        prev_w = w;
        prev_r = r;
    }
    assert!(crb_aware_allocation(&g, 2.0, 1.5).is_err());
}

#[test]
fn greedy_zero_floor_senses_everywhere() {
    let pr = problem(1, 12, 0.0);
    let r = greedy_mi_allocation(&pr).unwrap();
    assert!(r.assignment.iter().all(|w| *w == Role::Sensing));
    assert!(r.feasible && r.mi_comm == 0.0);
}

#[test]
fn greedy_rejects_unreachable_floor() {
    let mut pr = problem(2, 8, 0.0);
    pr.rate_floor = max_comm_rate(&pr).unwrap() * 1.01;
    assert!(greedy_mi_allocation(&pr).is_err());
}

#[test]
fn greedy_dominates_random_assignments() {
    for seed in 0..5 {
        let n = 8;
        let mut pr = problem(100 + seed, n, 0.0);
        pr.rate_floor = 0.4 * max_comm_rate(&pr).unwrap();
        let g = greedy_mi_allocation(&pr).unwrap();
        assert!(g.mi_comm >= pr.rate_floor * (1.0 - 1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = 0;
        while seen < 1000 {
            let w = assignment(rng.random::<u32>() & 0xff, n);
            if let Some(r) = evaluate_assignment(&pr, &w).unwrap() {
                assert!(g.mi_sensing >= r.mi_sensing * (1.0 - 1e-9));
                seen += 1;
            }
        }
        let best = (0..1u32 << n)
            .filter_map(|m| evaluate_assignment(&pr, &assignment(m, n)).unwrap())
            .map(|r| r.mi_sensing)
            .fold(0.0, f64::max);
        assert!(g.mi_sensing >= 0.95 * best, "seed {seed}: {} vs {best}", g.mi_sensing);
    }
}

#[test]
fn greedy_beats_fixed_half_split() {
    for seed in 0..100 {
        let pr = problem(1000 + seed, 16, 0.0);
        let g = greedy_mi_allocation(&pr).unwrap();
        let half: Vec<Role> = (0..16)
            .map(|i| if i < 8 { Role::Sensing } else { Role::Comm })
            .collect();
        let gs: Vec<f64> = pr.g_sense[..8].to_vec();
        let ps = waterfilling(&gs, pr.total_power / 2.0).unwrap();
        let gu: Vec<f64> = pr.g_comm[8..].to_vec();
        let pu = waterfilling(&gu, pr.total_power / 2.0).unwrap();
        let powers: Vec<f64> = ps.into_iter().chain(pu).collect();
        let (ms, _) = mi_reward(&half, &powers, &pr.g_sense, &pr.g_comm).unwrap();
        assert!(g.mi_sensing >= ms);
    }
}

#[test]
fn results_respect_budget_caps_and_recompute() {
    for seed in 0..20 {
        let mut pr = problem(500 + seed, 10, 0.0);
        pr.rate_floor = 0.3 * max_comm_rate(&pr).unwrap();
        pr.interference_caps = vec![0.3; 10];
        let r = greedy_mi_allocation(&pr).unwrap();
        assert!(r.powers.iter().sum::<f64>() <= pr.total_power * (1.0 + 1e-9));
        for (i, w) in r.assignment.iter().enumerate() {
            if *w == Role::Sensing {
                assert!(r.powers[i] <= 0.3 + 1e-12);
            }
        }
        let (ms, mu) = mi_reward(&r.assignment, &r.powers, &pr.g_sense, &pr.g_comm).unwrap();
        assert_eq!((ms, mu), (r.mi_sensing, r.mi_comm));
        assert!(r.mi_comm >= pr.rate_floor * (1.0 - 1e-9));
    }
}

#[test]
fn frontier_is_non_dominated_and_grows_with_budget() {
    let weights: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let pr = problem(7, 10, 0.0);
    let front = scalarized_pareto(&pr, &weights).unwrap();
    assert!(!front.is_empty());
    for a in &front {
        for b in &front {
            let dom = b.mi_sensing >= a.mi_sensing
                && b.mi_comm >= a.mi_comm
                && (b.mi_sensing > a.mi_sensing || b.mi_comm > a.mi_comm);
            assert!(!dom);
        }
    }
    assert!(front.windows(2).all(|w| w[0].mi_comm <= w[1].mi_comm));

    let only_sense = scalarized_pareto(&pr, &[1.0]).unwrap();
    let zero_floor = greedy_mi_allocation(&pr).unwrap();
    assert_eq!(only_sense.len(), 1);
    assert!((only_sense[0].mi_sensing - zero_floor.mi_sensing).abs() < 1e-12);

    let mut prev = 0.0;
    for total in [1.0, 2.0, 4.0, 8.0] {
        let p = AllocationProblem {
            total_power: total,
            ..pr.clone()
        };
        let area = frontier_area(&scalarized_pareto(&p, &weights).unwrap());
        assert!(area >= prev, "budget {total}: {area} < {prev}");
        prev = area;
    }
    assert!(scalarized_pareto(&pr, &[1.2]).is_err());
}
