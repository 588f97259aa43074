#ifndef OFDM_ISAC_H
#define OFDM_ISAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum IsacStatus {
  ISAC_STATUS_OK = 0,
  ISAC_STATUS_NULL_POINTER = 1,
  ISAC_STATUS_INVALID_ARGUMENT = 2,
  ISAC_STATUS_DIMENSION_MISMATCH = 3,
  ISAC_STATUS_INFEASIBLE = 4,
  ISAC_STATUS_SINGULAR = 5,
  ISAC_STATUS_BUFFER_TOO_SMALL = 6,
  ISAC_STATUS_INTERNAL = 7,
} IsacStatus;

// Opaque antenna-array configuration.
typedef struct IsacArrayConfig IsacArrayConfig;

// Opaque frame configuration.
typedef struct IsacFrameConfig IsacFrameConfig;

// Range (m^2), velocity ((m/s)^2) and angle (rad^2) bounds.
typedef struct IsacCrb {
  double range;
  double velocity;
  double angle;
} IsacCrb;

// Range (m), velocity (m/s) and angle (rad) resolutions.
typedef struct IsacResolutions {
  double range;
  double velocity;
  double angle;
} IsacResolutions;

// Outcome of a greedy allocation in bits.
typedef struct IsacMiReward {
  double mi_sensing;
  double mi_comm;
} IsacMiReward;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *isac_version(void);

// Length in bytes of the last error message of this thread, including the
// terminating NUL; 0 when the last call succeeded.
size_t isac_last_error_length(void);

// Copies the last error message of this thread into `buf` (NUL-terminated).
// Writes an empty string when there is no error.
//
// # Safety
// `buf` must point to `len` writable bytes.
enum IsacStatus isac_last_error_message(char *buf, size_t len);

// Creates a frame of `n` subcarriers and `m` symbols with spacing `df` (Hz),
// cyclic prefix `cp_ratio / df` and carrier `fc` (Hz); total power `n m`.
//
// # Safety
// `out` must be a valid pointer; the handle must be released with
// [`isac_frame_config_free`].
enum IsacStatus isac_frame_config_new(size_t n,
                                      size_t m,
                                      double df,
                                      double cp_ratio,
                                      double fc,
                                      struct IsacFrameConfig **out);

// Releases a frame handle; null is ignored.
//
// # Safety
// `cfg` must come from [`isac_frame_config_new`] and not be used afterwards.
void isac_frame_config_free(struct IsacFrameConfig *cfg);

// OFDM symbol duration including the cyclic prefix (s).
//
// # Safety
// `cfg` must be a live handle and `out` valid.
enum IsacStatus isac_frame_symbol_duration(const struct IsacFrameConfig *cfg, double *out);

// Creates an array description: `n_tx`, `n_rx`, `n_comm` elements with
// spacing `spacing` (m) at wavelength `wavelength` (m).
//
// # Safety
// `out` must be valid; release with [`isac_array_config_free`].
enum IsacStatus isac_array_config_new(size_t n_tx,
                                      size_t n_rx,
                                      size_t n_comm,
                                      double spacing,
                                      double wavelength,
                                      struct IsacArrayConfig **out);

// Releases an array handle; null is ignored.
//
// # Safety
// `arrays` must come from [`isac_array_config_new`] and not be used afterwards.
void isac_array_config_free(struct IsacArrayConfig *arrays);

// Detection probability `Q1(sqrt(2 gamma), sqrt(-2 ln pfa))` for linear SNR `gamma`.
//
// # Safety
// `out` must be valid.
enum IsacStatus isac_theoretical_pd(double gamma, double pfa, double *out);

// Largest ICI phase `2 pi (2 |v| fc / c) / df` (rad) over one OFDM symbol.
//
// # Safety
// `out` must be valid.
enum IsacStatus isac_max_phase_excursion(double velocity, double fc, double df, double *out);

// Single-target CRBs at linear SNR `gamma` and angle `angle` (rad).
//
// # Safety
// Handles must be live and `out` valid.
enum IsacStatus isac_crb_bounds(double gamma,
                                const struct IsacFrameConfig *cfg,
                                const struct IsacArrayConfig *arrays,
                                double angle,
                                struct IsacCrb *out);

// Range, velocity and angle resolutions.
//
// # Safety
// Handles must be live and `out` valid.
enum IsacStatus isac_resolutions(const struct IsacFrameConfig *cfg,
                                 const struct IsacArrayConfig *arrays,
                                 struct IsacResolutions *out);

// Water-filling of `total` over `n` gains into `powers_out`.
//
// # Safety
// `gains` and `powers_out` must hold `n` elements.
enum IsacStatus isac_waterfilling(const double *gains, size_t n, double total, double *powers_out);

// Greedy sensing/communication split of `n` subcarriers. Writes the powers,
// the roles (0 sensing, 1 communication) and the achieved MI.
//
// # Safety
// `g_comm`, `g_sense`, `powers_out` and `roles_out` must hold `n` elements;
// `reward_out` must be valid.
enum IsacStatus isac_greedy_allocation(const double *g_comm,
                                       const double *g_sense,
                                       size_t n,
                                       double total,
                                       double rate_floor,
                                       double *powers_out,
                                       uint8_t *roles_out,
                                       struct IsacMiReward *reward_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFDM_ISAC_H */
