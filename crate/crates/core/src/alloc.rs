//! Subcarrier power allocation and sensing/communication assignment.
//!
//! The sequential decision problem is reduced to one slot with known
//! channel state: the objective and constraints are those of the per-slot
//! reward, solved exactly or greedily.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::kpi::{mi_reward, Role};

const BISECTION_STEPS: usize = 200;

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

fn check_total(total: f64) -> Result<()> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(IsacError::arg("total_power", format!("must be > 0, got {total}")));
    }
    Ok(())
}

fn check_gains(g: &[f64]) -> Result<()> {
    if let Some(v) = g.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(IsacError::arg("gains", format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// `sum log2(1 + g p)`.
pub fn rate(gains: &[f64], powers: &[f64]) -> f64 {
    gains.iter().zip(powers).map(|(g, p)| log2_1p(g * p)).sum()
}

/// Water-filling with per-subcarrier caps: `p_n = min(cap_n, max(0, mu - 1/g_n))`
/// with `mu` set by bisection to spend `total` (or every cap if they sum to less).
pub fn waterfilling_capped(gains: &[f64], total: f64, caps: &[f64]) -> Result<Vec<f64>> {
    check_gains(gains)?;
    if !(total >= 0.0) {
        return Err(IsacError::arg("total_power", "must be >= 0"));
    }
    if caps.len() != gains.len() {
        return Err(IsacError::dims(gains.len(), caps.len()));
    }
    if gains.iter().all(|g| *g == 0.0) {
        return Err(IsacError::Infeasible("all gains are zero".into()));
    }
    let fill = |mu: f64| -> Vec<f64> {
        gains
            .iter()
            .zip(caps)
            .map(|(g, c)| {
                if *g > 0.0 {
                    (mu - 1.0 / g).clamp(0.0, c.max(0.0))
                } else {
                    0.0
                }
            })
            .collect()
    };
    let cap_sum: f64 = gains
        .iter()
        .zip(caps)
        .filter(|(g, _)| **g > 0.0)
        .map(|(_, c)| c.max(0.0))
        .sum();
    if cap_sum <= total {
        return Ok(fill(f64::INFINITY));
    }
    if total == 0.0 {
        return Ok(vec![0.0; gains.len()]);
    }
    let mut lo = 0.0;
    let mut hi = gains.iter().filter(|g| **g > 0.0).map(|g| 1.0 / g).fold(0.0, f64::max) + total;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > total {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut p = fill(lo);
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        let free: f64 = p
            .iter()
            .zip(caps)
            .filter(|(v, c)| **v < c.max(0.0))
            .map(|(v, _)| *v)
            .sum();
        if free > 0.0 {
            let k = 1.0 + (total - s) / free;
            for (v, c) in p.iter_mut().zip(caps) {
                if *v < c.max(0.0) {
                    *v = (*v * k).min(c.max(0.0));
                }
            }
        }
    }
    Ok(p)
}

/// Rate-maximising power allocation `p_n = max(0, mu - 1/g_n)` with `sum p = total`.
pub fn waterfilling(gains: &[f64], total: f64) -> Result<Vec<f64>> {
    check_total(total)?;
    waterfilling_capped(gains, total, &vec![f64::INFINITY; gains.len()])
}

/// Fixed-centre RMS-bandwidth surrogate `sum p_n (n - (N-1)/2)^2`.
pub fn rms_bandwidth_term(powers: &[f64]) -> f64 {
    let c = (powers.len() as f64 - 1.0) / 2.0;
    powers.iter().enumerate().map(|(n, p)| p * (n as f64 - c).powi(2)).sum()
}

/// RMS bandwidth in Hz of a power profile about the band centre.
pub fn rms_bandwidth(powers: &[f64], subcarrier_spacing: f64) -> f64 {
    let total: f64 = powers.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    subcarrier_spacing * (rms_bandwidth_term(powers) / total).sqrt()
}

/// Scale `kappa` that makes the RMS term comparable to the rate at uniform power.
pub fn crb_weight_scale(gains: &[f64], total: f64) -> f64 {
    let n = gains.len() as f64;
    let w_mean = rms_bandwidth_term(&vec![1.0; gains.len()]) / n;
    if w_mean <= 0.0 {
        return 0.0;
    }
    let r: f64 = gains.iter().map(|g| log2_1p(g * total / n)).sum();
    r / (total * w_mean)
}

/// Maximises `(1 - lw) sum log2(1 + g_n p_n) + lw kappa sum p_n (n - (N-1)/2)^2`
/// over the power simplex, `kappa` from [`crb_weight_scale`].
///
/// The problem is concave; the KKT conditions give
/// `p_n = max(0, (1 - lw) / (ln2 (mu - lw kappa w_n)) - 1/g_n)` with the
/// multiplier `mu > lw kappa max w` found by bisection. `lw = 1` splits the
/// budget equally over the two edge subcarriers and `lw = 0` is water-filling.
pub fn crb_aware_allocation(gains: &[f64], total: f64, lambda_w: f64) -> Result<Vec<f64>> {
    check_gains(gains)?;
    check_total(total)?;
    if !(0.0..=1.0).contains(&lambda_w) {
        return Err(IsacError::arg(
            "lambda_w",
            format!("must lie in [0, 1], got {lambda_w}"),
        ));
    }
    let n = gains.len();
    if n == 0 {
        return Err(IsacError::Empty("gains"));
    }
    if lambda_w == 0.0 {
        return waterfilling(gains, total);
    }
    if lambda_w == 1.0 || n == 1 {
        let mut p = vec![0.0; n];
        if n == 1 {
            p[0] = total;
        } else {
            p[0] = total / 2.0;
            p[n - 1] = total / 2.0;
        }
        return Ok(p);
    }
    let c = (n as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..n).map(|i| (i as f64 - c).powi(2)).collect();
    let kappa = crb_weight_scale(gains, total);
    let lk = lambda_w * kappa;
    let a = (1.0 - lambda_w) / std::f64::consts::LN_2;
    let fill = |mu: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if gains[i] > 0.0 && mu > lk * w[i] {
                    (a / (mu - lk * w[i]) - 1.0 / gains[i]).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let w_pos = (0..n)
        .filter(|i| gains[*i] > 0.0)
        .map(|i| w[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let w_zero = (0..n)
        .filter(|i| gains[*i] == 0.0)
        .map(|i| w[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if w_pos == f64::NEG_INFINITY {
        // no usable gain: only the linear term remains
        let edges: Vec<usize> = (0..n).filter(|i| w[*i] == w_zero).collect();
        let mut p = vec![0.0; n];
        for i in &edges {
            p[*i] = total / edges.len() as f64;
        }
        return Ok(p);
    }
    let mut lo = lk * w_pos;
    let mut hi = lo + a * gains.iter().fold(0.0, |m: f64, g| m.max(*g)) + 1.0;
    while fill(hi).iter().sum::<f64>() > total {
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > total {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mu = hi;
    if lk * w_zero > mu {
        // marginal utility of the zero-gain edge beats the solution above
        let mu = lk * w_zero;
        let mut p = fill(mu);
        let spent: f64 = p.iter().sum();
        let edges: Vec<usize> = (0..n).filter(|i| gains[*i] == 0.0 && w[*i] == w_zero).collect();
        for i in &edges {
            p[*i] = (total - spent).max(0.0) / edges.len() as f64;
        }
        return Ok(p);
    }
    let mut p = fill(mu);
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v *= total / s);
    }
    Ok(p)
}

/// One-slot allocation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationProblem {
    /// Communication SINR per watt on each subcarrier.
    pub g_comm: Vec<f64>,
    /// Sensing SINR per watt on each subcarrier.
    pub g_sense: Vec<f64>,
    pub total_power: f64,
    /// Minimum communication MI, bits.
    pub rate_floor: f64,
    /// Per-subcarrier cap on sensing power (interference to cooperative users); empty means none.
    #[serde(default)]
    pub interference_caps: Vec<f64>,
}

impl AllocationProblem {
    pub fn validate(&self) -> Result<()> {
        check_gains(&self.g_comm)?;
        check_gains(&self.g_sense)?;
        check_total(self.total_power)?;
        if self.g_comm.len() != self.g_sense.len() {
            return Err(IsacError::dims(self.g_comm.len(), self.g_sense.len()));
        }
        if self.g_comm.is_empty() {
            return Err(IsacError::Empty("subcarriers"));
        }
        if !(self.rate_floor >= 0.0) {
            return Err(IsacError::arg("rate_floor", "must be >= 0"));
        }
        if !self.interference_caps.is_empty() && self.interference_caps.len() != self.g_comm.len() {
            return Err(IsacError::dims(self.g_comm.len(), self.interference_caps.len()));
        }
        if self.interference_caps.iter().any(|c| !(*c >= 0.0)) {
            return Err(IsacError::arg("interference_caps", "must be >= 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.g_comm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_comm.is_empty()
    }

    fn cap(&self, n: usize) -> f64 {
        self.interference_caps.get(n).copied().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub powers: Vec<f64>,
    pub assignment: Vec<Role>,
    pub mi_sensing: f64,
    pub mi_comm: f64,
    pub feasible: bool,
}

/// Smallest power on `set` whose water-filled rate reaches `floor`, with that allocation.
fn min_power_for_rate(g: &[f64], set: &[usize], floor: f64, budget: f64) -> Option<(f64, Vec<f64>)> {
    if floor <= 0.0 {
        return Some((0.0, vec![0.0; set.len()]));
    }
    let gs: Vec<f64> = set.iter().map(|i| g[*i]).collect();
    if gs.iter().all(|v| *v == 0.0) {
        return None;
    }
    let r = |p: f64| -> (f64, Vec<f64>) {
        let w = waterfilling_capped(&gs, p, &vec![f64::INFINITY; gs.len()]).unwrap_or_else(|_| vec![0.0; gs.len()]);
        (rate(&gs, &w), w)
    };
    if r(budget).0 < floor {
        return None;
    }
    let (mut lo, mut hi) = (0.0, budget);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if r(mid).0 >= floor {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * budget {
            break;
        }
    }
    let (_, w) = r(hi);
    Some((hi, w))
}

/// Completes an assignment: minimal comm power for the floor on the comm
/// subcarriers, the rest water-filled on sensing within the caps.
fn evaluate(problem: &AllocationProblem, assignment: &[Role]) -> Option<AllocationResult> {
    let n = problem.len();
    let comm: Vec<usize> = (0..n).filter(|i| assignment[*i] == Role::Comm).collect();
    let sense: Vec<usize> = (0..n).filter(|i| assignment[*i] == Role::Sensing).collect();
    let (pc, wc) = min_power_for_rate(&problem.g_comm, &comm, problem.rate_floor, problem.total_power)?;
    let mut powers = vec![0.0; n];
    for (i, v) in comm.iter().zip(&wc) {
        powers[*i] = *v;
    }
    let rest = (problem.total_power - pc).max(0.0);
    let gs: Vec<f64> = sense.iter().map(|i| problem.g_sense[*i]).collect();
    if !sense.is_empty() && rest > 0.0 && gs.iter().any(|g| *g > 0.0) {
        let caps: Vec<f64> = sense.iter().map(|i| problem.cap(*i)).collect();
        let ws = waterfilling_capped(&gs, rest, &caps).ok()?;
        for (i, v) in sense.iter().zip(&ws) {
            powers[*i] = *v;
        }
    }
    let (ms, mu) = mi_reward(assignment, &powers, &problem.g_sense, &problem.g_comm).ok()?;
    Some(AllocationResult {
        powers,
        assignment: assignment.to_vec(),
        mi_sensing: ms,
        mi_comm: mu,
        feasible: true,
    })
}

/// Greedy assignment. Subcarriers are ordered by descending comm gain and,
/// separately, by descending comm-to-sensing gain ratio (ties to the lower
/// index). Every prefix of either order is given to communications with the
/// minimal power that meets the floor, the remainder is water-filled on
/// sensing and clipped to the interference caps. The best prefix (ties to the
/// shorter one) is then improved by single role flips and comm/sensing swaps,
/// scanned in index order, until no move raises the sensing MI. Errors if no
/// assignment reaches the floor.
pub fn greedy_mi_allocation(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let n = problem.len();
    let by_comm = sorted_desc(n, |i| problem.g_comm[i]);
    let by_ratio = sorted_desc(n, |i| problem.g_comm[i] / problem.g_sense[i].max(f64::MIN_POSITIVE));
    let candidates: Vec<Option<AllocationResult>> = [by_comm, by_ratio]
        .iter()
        .flat_map(|order| (0..=n).map(move |k| (order, k)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(order, k)| {
            let mut w = vec![Role::Sensing; n];
            for i in &order[..k] {
                w[*i] = Role::Comm;
            }
            evaluate(problem, &w)
        })
        .collect();
    let mut best: Option<AllocationResult> = None;
    for c in candidates.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| better(&c, b)) {
            best = Some(c);
        }
    }
    let best = best.ok_or_else(|| {
        IsacError::Infeasible(format!(
            "rate floor {} bits exceeds the all-communication rate",
            problem.rate_floor
        ))
    })?;
    Ok(local_search(problem, best))
}

fn sorted_desc(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| key(*b).total_cmp(&key(*a)).then(a.cmp(b)));
    order
}

fn better(c: &AllocationResult, b: &AllocationResult) -> bool {
    c.mi_sensing > b.mi_sensing * (1.0 + 1e-12) + 1e-15
}

fn local_search(problem: &AllocationProblem, mut best: AllocationResult) -> AllocationResult {
    let n = problem.len();
    loop {
        let mut moved = false;
        for i in 0..n {
            let mut w = best.assignment.clone();
            w[i] = match w[i] {
                Role::Sensing => Role::Comm,
                Role::Comm => Role::Sensing,
            };
            if let Some(c) = evaluate(problem, &w) {
                if better(&c, &best) {
                    best = c;
                    moved = true;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if best.assignment[i] != Role::Comm || best.assignment[j] != Role::Sensing {
                    continue;
                }
                let mut w = best.assignment.clone();
                w.swap(i, j);
                if let Some(c) = evaluate(problem, &w) {
                    if better(&c, &best) {
                        best = c;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            return best;
        }
    }
}

/// Optimal completion of a fixed assignment (minimal comm power, capped
/// sensing water-filling), or `None` if it cannot meet the floor.
pub fn evaluate_assignment(problem: &AllocationProblem, assignment: &[Role]) -> Result<Option<AllocationResult>> {
    problem.validate()?;
    if assignment.len() != problem.len() {
        return Err(IsacError::dims(problem.len(), assignment.len()));
    }
    Ok(evaluate(problem, assignment))
}

/// Largest communication MI: all power water-filled on every subcarrier.
pub fn max_comm_rate(problem: &AllocationProblem) -> Result<f64> {
    problem.validate()?;
    let w = waterfilling(&problem.g_comm, problem.total_power)?;
    Ok(rate(&problem.g_comm, &w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub mi_sensing: f64,
    pub mi_comm: f64,
    pub result: AllocationResult,
}

/// Number of rate floors swept between zero and the maximal comm rate.
pub const PARETO_FLOORS: usize = 33;

/// Scalarised frontier: greedy solutions over a sweep of rate floors, the
/// best one for each weight `w` of `w M_s + (1 - w) M_u`, reduced to the
/// non-dominated set sorted by increasing `M_u`.
pub fn scalarized_pareto(problem: &AllocationProblem, weights: &[f64]) -> Result<Vec<FrontierPoint>> {
    problem.validate()?;
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(IsacError::arg("weights", format!("must lie in [0, 1], got {w}")));
    }
    let c_max = max_comm_rate(problem)?;
    let sweep: Vec<AllocationResult> = (0..PARETO_FLOORS)
        .into_par_iter()
        .filter_map(|j| {
            let floor = c_max * j as f64 / (PARETO_FLOORS - 1) as f64 * (1.0 - 1e-9);
            greedy_mi_allocation(&AllocationProblem {
                rate_floor: floor,
                ..problem.clone()
            })
            .ok()
        })
        .collect();
    let mut picked: Vec<FrontierPoint> = Vec::new();
    for w in weights {
        let best = sweep.iter().fold(None::<&AllocationResult>, |b, r| {
            let score = w * r.mi_sensing + (1.0 - w) * r.mi_comm;
            match b {
                Some(x) if w * x.mi_sensing + (1.0 - w) * x.mi_comm >= score => Some(x),
                _ => Some(r),
            }
        });
        if let Some(r) = best {
            if !picked.iter().any(|p| p.result == *r) {
                picked.push(FrontierPoint {
                    mi_sensing: r.mi_sensing,
                    mi_comm: r.mi_comm,
                    result: r.clone(),
                });
            }
        }
    }
    let dominated = |a: &FrontierPoint, b: &FrontierPoint| {
        b.mi_sensing >= a.mi_sensing && b.mi_comm >= a.mi_comm && (b.mi_sensing > a.mi_sensing || b.mi_comm > a.mi_comm)
    };
    let mut front: Vec<FrontierPoint> = picked
        .iter()
        .filter(|a| !picked.iter().any(|b| dominated(a, b)))
        .cloned()
        .collect();
    front.sort_by(|a, b| {
        a.mi_comm
            .total_cmp(&b.mi_comm)
            .then(b.mi_sensing.total_cmp(&a.mi_sensing))
    });
    Ok(front)
}

/// Area dominated by a frontier (staircase from the origin).
pub fn frontier_area(points: &[FrontierPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.mi_comm, p.mi_sensing)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut area = 0.0;
    let mut prev_u = 0.0;
    for (i, (u, _)) in pts.iter().enumerate() {
        let s_max = pts[i..].iter().map(|p| p.1).fold(0.0, f64::max);
        area += (u - prev_u) * s_max;
        prev_u = *u;
    }
    area
}
