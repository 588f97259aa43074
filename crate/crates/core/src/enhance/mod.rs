//! Impairment mitigation and exploitation: ICI-aware estimation, PN
//! compensation, velocity and range disambiguation, SI-nulling beamformers.

mod beam;
mod ici;
mod pn;

pub use beam::{
    design_si_nulling, transmit_target_gain, BeamformerSet, ConstraintMode, SiNulling, UNIT_MODULUS_RESIDUAL_BOUND,
};
pub use ici::{doppler_grid, ici_joint_estimate, ici_joint_extract, ici_velocity_disambiguate, VelocityDisambiguation};
pub use pn::{
    covariance_matching_cost, empirical_lag_covariance, pn_compensate, pn_range_disambiguate, PnCompensation,
    RangeDisambiguation, DEFAULT_PN_ITERS, MIN_PHASE_CELLS,
};
