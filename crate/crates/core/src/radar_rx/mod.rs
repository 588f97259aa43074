//! Radar receive processing: range-Doppler maps, GLRT detection, successive
//! target extraction, angle and CFO estimation.

mod angle;
mod cfo;
mod detect;
mod extract;
mod rdmap;

pub use angle::{antenna_snapshots, combine_antennas, estimate_angles, spatial_peak_angle};
pub use cfo::{compensate_cfo, estimate_cfo_clock, CfoEstimate, PilotPattern};
pub use detect::{
    bessel_i0e, cell_threshold, estimate_noise_var, glrt_detect, marcum_q1, per_cell_pfa, theoretical_pd, Detection,
    DetectionReport,
};
pub use extract::{
    estimate_dominant_target, extract_with_grid, iterative_target_extraction, Extraction, ExtractionParams,
};
pub use rdmap::{
    echo_grid, grid_energy, matched_grid, matched_sum, range_doppler_map, rd_map, rd_map_from_matched, refine_peak,
    RangeDopplerMap, DEFAULT_PAD,
};
