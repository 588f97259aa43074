//! GLRT detection on range-Doppler maps and the Marcum-Q detection probability.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::rdmap::RangeDopplerMap;
use crate::error::{IsacError, Result};
use crate::model::FrameConfig;

/// One resolved target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// m.
    pub range: f64,
    /// m/s.
    pub velocity: f64,
    /// rad, `NaN` until angles are estimated.
    pub angle: f64,
    /// Estimated complex gain `alpha`.
    pub amplitude: Complex64,
    /// Normalised GLRT statistic `|map|^2 / (sigma^2 E_g n_ant)`.
    pub statistic: f64,
    /// s.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
}

impl Detection {
    pub(crate) fn new(cfg: &FrameConfig, delay: f64, doppler: f64, amplitude: Complex64, statistic: f64) -> Self {
        Detection {
            range: FrameConfig::delay_to_range(delay),
            velocity: cfg.doppler_to_velocity(doppler),
            angle: f64::NAN,
            amplitude,
            statistic,
            delay,
            doppler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detections: Vec<Detection>,
    /// Threshold on the normalised statistic.
    pub threshold: f64,
    /// Frame-level false-alarm probability.
    pub pfa_design: f64,
}

impl DetectionReport {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Whether some detection lies within `tol` metres of `range`.
    pub fn has_range(&self, range: f64, tol: f64) -> bool {
        self.detections.iter().any(|d| (d.range - range).abs() <= tol)
    }
}

fn check_pfa(pfa: f64) -> Result<()> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(IsacError::arg("pfa", format!("must lie in (0, 1), got {pfa}")));
    }
    Ok(())
}

/// Per-cell false-alarm rate whose maximum over `cells` independent cells has rate `pfa`.
pub fn per_cell_pfa(pfa: f64, cells: usize) -> Result<f64> {
    check_pfa(pfa)?;
    if cells == 0 {
        return Err(IsacError::Empty("cells"));
    }
    Ok(-((-pfa).ln_1p() / cells as f64).exp_m1())
}

/// Threshold on the normalised statistic for a per-cell false-alarm rate.
pub fn cell_threshold(pfa_cell: f64) -> Result<f64> {
    check_pfa(pfa_cell)?;
    Ok(-pfa_cell.ln())
}

/// Noise variance implied by the map median: an exponential cell of mean
/// `sigma^2 E_g n_ant` has median `ln 2` times that.
pub fn estimate_noise_var(map: &RangeDopplerMap, n_antennas: usize) -> f64 {
    let mut p: Vec<f64> = map.values.iter().map(|v| v.norm_sqr()).collect();
    if p.is_empty() || map.energy <= 0.0 {
        return 0.0;
    }
    let mid = p.len() / 2;
    let (_, med, _) = p.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *med / (map.energy * std::f64::consts::LN_2 * n_antennas.max(1) as f64)
}

/// Cyclic 3x3 local maximum, ties resolved towards the lowest column-major index.
pub(crate) fn is_local_max(pw: &nalgebra::DMatrix<f64>, i: usize, j: usize) -> bool {
    let (r, c) = pw.shape();
    let v = pw[(i, j)];
    let me = i + r * j;
    for dj in [c - 1, 0, 1] {
        for di in [r - 1, 0, 1] {
            if di == 0 && dj == 0 {
                continue;
            }
            let (ii, jj) = ((i + di) % r, (j + dj) % c);
            let w = pw[(ii, jj)];
            let other = ii + r * jj;
            if w > v || (w == v && other < me) {
                return false;
            }
        }
    }
    true
}

/// GLRT over every map cell. The cell threshold makes the frame-level
/// (max-over-cells) false-alarm rate equal `pfa` for independent cells; with
/// zero padding the cell count is that of the unpadded grid. Above-threshold
/// cells are grouped into their 3x3 local maxima.
pub fn glrt_detect(map: &RangeDopplerMap, noise_var: f64, pfa: f64, n_antennas: usize) -> Result<DetectionReport> {
    check_pfa(pfa)?;
    if !(noise_var > 0.0) {
        return Err(IsacError::arg("noise_var", "must be > 0"));
    }
    if n_antennas == 0 {
        return Err(IsacError::arg("n_antennas", "must be >= 1"));
    }
    let cells = map.n_cells() / (map.pad_n * map.pad_m);
    let eta = cell_threshold(per_cell_pfa(pfa, cells)?)?;
    let scale = noise_var * map.energy * n_antennas as f64;
    let stat = map.values.map(|v| v.norm_sqr() / scale);
    let mut detections = Vec::new();
    for j in 0..stat.ncols() {
        for i in 0..stat.nrows() {
            if stat[(i, j)] >= eta && is_local_max(&stat, i, j) {
                let amp = map.values[(i, j)] / map.energy;
                detections.push(Detection::new(
                    &map.frame,
                    map.delay_of(i),
                    map.doppler_of(j),
                    amp,
                    stat[(i, j)],
                ));
            }
        }
    }
    detections.sort_by(|a, b| b.statistic.total_cmp(&a.statistic));
    Ok(DetectionReport {
        detections,
        threshold: eta,
        pfa_design: pfa,
    })
}

/// Exponentially scaled modified Bessel function `I0(z) e^{-z}`, `z >= 0`.
pub fn bessel_i0e(z: f64) -> f64 {
    let z = z.abs();
    if z < 30.0 {
        let q = z * z / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-z).exp()
    } else {
        let e = 8.0 * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let odd = (2 * k - 1) as f64;
            let ratio = odd * odd / (k as f64 * e);
            if ratio >= 1.0 {
                break;
            }
            term *= ratio;
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// First-order Marcum Q-function `Q1(a, b)`.
///
/// Uses the Poisson-mixture series `Q1 = sum_k Pois(k; a^2/2) P(Pois(b^2/2) <= k)`
/// (absolute tolerance 1e-16) and falls back to quadrature of the defining
/// integral for `a^2/2 > 1e4`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(IsacError::arg(
            "marcum_q1",
            format!("needs finite a, b >= 0, got ({a}, {b})"),
        ));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let lam = a * a / 2.0;
    let x = b * b / 2.0;
    if lam > 1e4 {
        return Ok(marcum_quadrature(a, b));
    }
    if lam > x {
        return Ok((1.0 - poisson_mixture(x, lam, true)).clamp(0.0, 1.0));
    }
    Ok(poisson_mixture(lam, x, false).clamp(0.0, 1.0))
}

/// `sum_k Pois(k; outer) P(Pois(inner) <= k)`, or `< k` when `strict`.
fn poisson_mixture(outer: f64, inner: f64, strict: bool) -> f64 {
    let (ln_outer, ln_inner) = (outer.ln(), inner.ln());
    let mut lp = -outer;
    let mut lpx = -inner;
    let mut ls = if strict { f64::NEG_INFINITY } else { lpx };
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        sum += (lp + ls).exp();
        let kf = (k + 1) as f64;
        if outer == 0.0 {
            break;
        }
        if kf > outer {
            let r = outer / kf;
            let tail = lp.exp() * r / (1.0 - r);
            if tail < 1e-17 {
                break;
            }
        }
        lp += ln_outer - kf.ln();
        if strict {
            ls = log_add(ls, lpx);
            lpx += ln_inner - kf.ln();
        } else {
            lpx += ln_inner - kf.ln();
            ls = log_add(ls, lpx);
        }
        k += 1;
    }
    sum
}

fn marcum_quadrature(a: f64, b: f64) -> f64 {
    let lo = b.max(a - 40.0);
    let hi = a + 40.0;
    if lo >= hi {
        return 0.0;
    }
    let n = 8000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| x * (-(x - a) * (x - a) / 2.0).exp() * bessel_i0e(a * x);
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * h / 3.0).clamp(0.0, 1.0)
}

/// `Pd = Q1(sqrt(2 gamma), sqrt(-2 ln pfa))` for post-integration SNR `gamma` (linear).
pub fn theoretical_pd(gamma: f64, pfa: f64) -> Result<f64> {
    check_pfa(pfa)?;
    if !(gamma >= 0.0) {
        return Err(IsacError::arg("gamma", format!("must be >= 0, got {gamma}")));
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    marcum_q1((2.0 * gamma).sqrt(), (-2.0 * pfa.ln()).sqrt())
}
