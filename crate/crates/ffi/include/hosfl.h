#ifndef HOSFL_H
#define HOSFL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HosflStatus {
  HOSFL_STATUS_OK = 0,
  HOSFL_STATUS_NULL_POINTER = 1,
  HOSFL_STATUS_INVALID_UTF8 = 2,
  HOSFL_STATUS_INVALID_CONFIG = 3,
  HOSFL_STATUS_RUNTIME = 4,
  HOSFL_STATUS_BUFFER_TOO_SMALL = 5,
  HOSFL_STATUS_INVALID_ARGUMENT = 6,
  HOSFL_STATUS_PANIC = 7,
} HosflStatus;

/**
 * Opaque simulation handle.
 */
typedef struct HosflSimulation HosflSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *hosfl_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *hosfl_version(void);

/**
 * Builds a simulation from a TOML experiment document.
 *
 * # Safety
 * `config_toml` must be a valid NUL-terminated string and `out` a valid
 * pointer. The handle must be released with [`hosfl_simulation_free`].
 */
enum HosflStatus hosfl_simulation_new(const char *config_toml, struct HosflSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`hosfl_simulation_new`] not yet freed.
 */
void hosfl_simulation_free(struct HosflSimulation *sim);

/**
 * Runs one round; writes the mean training loss to `out_loss` if non-null.
 * A failed round leaves the simulation unchanged.
 *
 * # Safety
 * `sim` must be a live handle; `out_loss` null or valid.
 */
enum HosflStatus hosfl_simulation_step(struct HosflSimulation *sim, double *out_loss);

/**
 * Rounds completed so far.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum HosflStatus hosfl_simulation_round(const struct HosflSimulation *sim, uint64_t *out);

/**
 * Evaluation loss and accuracy; accuracy is NaN for regression.
 *
 * # Safety
 * `sim` must be a live handle; outputs valid pointers.
 */
enum HosflStatus hosfl_simulation_evaluate(const struct HosflSimulation *sim,
                                           double *out_loss,
                                           double *out_accuracy);

/**
 * Cumulative live bytes of one message kind. `kind` indexes
 * ActivationUp, LabelUp, GradDown, ModelUp, ModelDown, ScalarUp,
 * ScalarDown, SeedDown in that order.
 *
 * # Safety
 * `sim` must be a live handle; `out` valid.
 */
enum HosflStatus hosfl_simulation_bytes(const struct HosflSimulation *sim,
                                        uint32_t kind,
                                        uint64_t *out);

/**
 * Writes the 64-character hex checksum of the parameters plus NUL into
 * `buf`, which must hold at least 65 bytes.
 *
 * # Safety
 * `sim` must be a live handle; `buf` valid for `len` bytes.
 */
enum HosflStatus hosfl_simulation_checksum(const struct HosflSimulation *sim,
                                           char *buf,
                                           uintptr_t len);

/**
 * Hideable perturbation passes for the reference edge setup at the given
 * client depth.
 *
 * # Safety
 * `out` must be valid.
 */
enum HosflStatus hosfl_latency_max_perturbations(uint64_t client_layers, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOSFL_H */
