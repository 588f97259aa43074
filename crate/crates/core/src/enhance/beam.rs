//! Hybrid beamformers: SI-nulling combiner design and transmit target gain.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{array_steering, ArrayConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Digital,
    UnitModulusAnalog,
}

/// Residual bound reported for unit-modulus analog combiners.
pub const UNIT_MODULUS_RESIDUAL_BOUND: f64 = 1e-3;

/// Hybrid precoders and combiners; the baseband parts are indexed per `(n, m)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// `Nt x Lt`.
    pub f_rf: DMatrix<Complex64>,
    /// `Lt x Ns` each.
    pub f_bb: Vec<DMatrix<Complex64>>,
    /// `Nr x Lr`.
    pub w_rf: DMatrix<Complex64>,
    /// `Ns x Lr` each.
    pub w_bb: Vec<DMatrix<Complex64>>,
    pub mode: ConstraintMode,
}

impl BeamformerSet {
    pub fn validate(&self) -> Result<()> {
        let lt = self.f_rf.ncols();
        if let Some(f) = self.f_bb.iter().find(|f| f.nrows() != lt) {
            return Err(IsacError::dims(format!("{lt} rows in F_BB"), f.nrows()));
        }
        let lr = self.w_rf.ncols();
        if let Some(w) = self.w_bb.iter().find(|w| w.ncols() != lr) {
            return Err(IsacError::dims(format!("{lr} columns in W_BB"), w.ncols()));
        }
        if self.mode == ConstraintMode::UnitModulusAnalog {
            let off = |m: &DMatrix<Complex64>| m.iter().any(|v| (v.norm() - 1.0).abs() > 1e-9);
            if off(&self.f_rf) || off(&self.w_rf) {
                return Err(IsacError::InvalidConfig(
                    "analog beamformers must have unit-modulus entries".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiNulling {
    /// `Nr x Lr`.
    pub w_rf: DMatrix<Complex64>,
    /// `||W^H H F_RF F_BB||_F / ||H F_RF F_BB||_F` (0 when the SI is zero).
    pub residual: f64,
    /// Rank of the effective SI.
    pub rank: usize,
    /// Whether the residual meets the bound of the chosen mode.
    pub bound_met: bool,
}

/// Stacked effective SI `H_SI F_RF [F_BB_1 ... F_BB_K]`.
fn effective_si(
    h_si: &DMatrix<Complex64>,
    f_rf: &DMatrix<Complex64>,
    f_bb: &[DMatrix<Complex64>],
) -> Result<DMatrix<Complex64>> {
    if h_si.ncols() != f_rf.nrows() {
        return Err(IsacError::dims(
            format!("F_RF with {} rows", h_si.ncols()),
            f_rf.nrows(),
        ));
    }
    let hf = h_si * f_rf;
    if f_bb.is_empty() {
        return Ok(hf);
    }
    let cols: usize = f_bb.iter().map(|f| f.ncols()).sum();
    let mut e = DMatrix::zeros(h_si.nrows(), cols);
    let mut at = 0;
    for f in f_bb {
        if f.nrows() != f_rf.ncols() {
            return Err(IsacError::dims(format!("F_BB with {} rows", f_rf.ncols()), f.nrows()));
        }
        e.view_mut((0, at), (h_si.nrows(), f.ncols())).copy_from(&(&hf * f));
        at += f.ncols();
    }
    Ok(e)
}

/// Combiner whose columns span part of the left null space of the effective
/// SI, so that `W_RF^H H_SI F_RF F_BB = 0`.
///
/// Needs `Nr - rank >= Lr`; otherwise the configuration is infeasible. In
/// unit-modulus mode the orthonormal solution is projected entrywise onto
/// unit modulus and the residual is checked against
/// [`UNIT_MODULUS_RESIDUAL_BOUND`] instead of 1e-10.
pub fn design_si_nulling(
    h_si: &DMatrix<Complex64>,
    f_rf: &DMatrix<Complex64>,
    f_bb: &[DMatrix<Complex64>],
    lr: usize,
    mode: ConstraintMode,
) -> Result<SiNulling> {
    if lr == 0 {
        return Err(IsacError::arg("lr", "must be >= 1"));
    }
    let e = effective_si(h_si, f_rf, f_bb)?;
    let nr = e.nrows();
    let mut padded = DMatrix::zeros(nr, e.ncols().max(nr));
    padded.view_mut((0, 0), e.shape()).copy_from(&e);
    let svd = padded.svd(true, false);
    let u = svd.u.ok_or_else(|| IsacError::Singular("SVD failed".into()))?;
    let s = &svd.singular_values;
    let smax = s.max();
    let rank = if smax > 0.0 {
        s.iter().filter(|v| **v > 1e-12 * smax * nr as f64).count()
    } else {
        0
    };
    if nr < rank + lr {
        return Err(IsacError::Infeasible(format!(
            "SI null space has dimension {} < Lr = {lr} (Nr = {nr}, rank = {rank})",
            nr - rank
        )));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|a, b| s[*a].total_cmp(&s[*b]));
    let mut w = DMatrix::zeros(nr, lr);
    for (k, idx) in order.iter().take(lr).enumerate() {
        w.set_column(k, &u.column(*idx));
    }
    if mode == ConstraintMode::UnitModulusAnalog {
        w.apply(|v| {
            *v = if v.norm() > 0.0 {
                *v / v.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
        });
    }
    let norm = e.norm();
    let residual = if norm > 0.0 {
        (w.adjoint() * &e).norm() / norm
    } else {
        0.0
    };
    let bound = match mode {
        ConstraintMode::Digital => 1e-10,
        ConstraintMode::UnitModulusAnalog => UNIT_MODULUS_RESIDUAL_BOUND,
    };
    Ok(SiNulling {
        w_rf: w,
        residual,
        rank,
        bound_met: residual <= bound,
    })
}

/// Per-stream transmit gain `|a_t^H(theta) [F_RF F_BB]_{:,s}|^2`.
pub fn transmit_target_gain(
    f_rf: &DMatrix<Complex64>,
    f_bb: &DMatrix<Complex64>,
    theta: f64,
    arrays: &ArrayConfig,
) -> Result<Vec<f64>> {
    if f_rf.ncols() != f_bb.nrows() {
        return Err(IsacError::dims(
            format!("F_BB with {} rows", f_rf.ncols()),
            f_bb.nrows(),
        ));
    }
    let a = array_steering(theta, f_rf.nrows(), arrays.element_spacing, arrays.wavelength, None)?;
    let f = f_rf * f_bb;
    Ok(f.column_iter()
        .map(|col| {
            col.iter()
                .zip(&a)
                .map(|(v, ai)| ai.conj() * v)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect())
}
