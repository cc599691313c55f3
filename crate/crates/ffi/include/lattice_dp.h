#ifndef LATTICE_DP_H
#define LATTICE_DP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LDP_BACKEND_REFERENCE 0

#define LDP_BACKEND_THREADED 1

#define LDP_BACKEND_EMULATED 2

#define LDP_KERNEL_SCALE 0

#define LDP_KERNEL_BINARY_COLLISION 1

/**
 * Result of every fallible call.
 */
typedef enum LdpStatus {
  LDP_STATUS_OK = 0,
  LDP_STATUS_BOUNDS = 1,
  LDP_STATUS_INVALID_CONFIG = 2,
  LDP_STATUS_SHAPE = 3,
  LDP_STATUS_LIFECYCLE = 4,
  LDP_STATUS_ALLOC = 5,
  LDP_STATUS_CONCURRENCY = 6,
  LDP_STATUS_TYPE = 7,
  LDP_STATUS_MISSING_CONSTANT = 8,
  LDP_STATUS_PLAN = 9,
  LDP_STATUS_DEVICE = 10,
  LDP_STATUS_CONTRACT_VIOLATION = 11,
  LDP_STATUS_SINGULAR_STATE = 12,
  LDP_STATUS_IO = 13,
  /**
   * A required pointer argument was null.
   */
  LDP_STATUS_NULL_POINTER = 14,
  /**
   * Bad enum code, non-UTF-8 key, or similar.
   */
  LDP_STATUS_INVALID_ARGUMENT = 15,
  /**
   * A Rust panic was caught at the boundary.
   */
  LDP_STATUS_PANIC = 16,
} LdpStatus;

/**
 * Opaque target device.
 */
typedef struct LdpDevice LdpDevice;

/**
 * Opaque host field (structure-of-arrays, padded).
 */
typedef struct LdpField LdpField;

/**
 * Handle to a target allocation. Plain value; copy freely.
 */
typedef struct LdpBuffer {
  uint64_t device;
  uint32_t slot;
  uint32_t generation;
} LdpBuffer;

/**
 * Launch decomposition. `tpb` of 0 selects the default.
 */
typedef struct LdpLaunchConfig {
  size_t vvl;
  size_t workers;
  size_t tpb;
} LdpLaunchConfig;

/**
 * Instrumentation counters of a device.
 */
typedef struct LdpCounters {
  uint64_t launches;
  uint64_t chunks;
  uint64_t copies_to_target;
  uint64_t copies_from_target;
  uint64_t masked_copies;
  uint64_t pack_phases;
  uint64_t unpack_phases;
  uint64_t elements_packed;
  uint64_t last_packed_len;
  uint64_t bytes_to_target;
  uint64_t bytes_from_target;
  uint64_t constant_updates;
} LdpCounters;

/**
 * One benchmark measurement.
 */
typedef struct LdpBenchResult {
  double elapsed_s;
  double sites_per_s;
  double bytes_per_s;
  uint64_t launches;
} LdpBenchResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ldp_last_error(void);

/**
 * Static, nul-terminated name of a status code; "unknown" if out of range.
 */
const char *ldp_status_name(int32_t status);

/**
 * Creates a device. `arena_cap` bounds the emulated arena in doubles; 0
 * means unbounded.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpStatus ldp_device_new(uint32_t backend_code, size_t arena_cap, struct LdpDevice **out);

/**
 * Destroys a device and everything allocated on it. Null is a no-op.
 *
 * # Safety
 * `dev` must come from [`ldp_device_new`] and not be used afterwards.
 */
void ldp_device_free(struct LdpDevice *dev);

/**
 * Creates a zeroed host field of `ncomp` components on an `nx*ny*nz` lattice.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpStatus ldp_field_new(size_t nx, size_t ny, size_t nz, size_t ncomp, struct LdpField **out);

/**
 * Null is a no-op.
 *
 * # Safety
 * `field` must come from [`ldp_field_new`] and not be used afterwards.
 */
void ldp_field_free(struct LdpField *field);

/**
 * Number of real lattice sites; 0 for a null field.
 *
 * # Safety
 * `field` must be null or valid.
 */
size_t ldp_field_nsites(const struct LdpField *field);

/**
 * Stride between components in the storage; 0 for a null field.
 *
 * # Safety
 * `field` must be null or valid.
 */
size_t ldp_field_padded_sites(const struct LdpField *field);

/**
 * # Safety
 * `field` and `out` must be valid.
 */
enum LdpStatus ldp_field_get(const struct LdpField *field, size_t c, size_t s, double *out);

/**
 * # Safety
 * `field` must be valid.
 */
enum LdpStatus ldp_field_set(struct LdpField *field, size_t c, size_t s, double value);

/**
 * Pointer to the `nsites` real values of component `c`. Valid until the
 * field is freed.
 *
 * # Safety
 * `field` and `out` must be valid.
 */
enum LdpStatus ldp_field_component(struct LdpField *field, size_t c, double **out);

/**
 * Allocates a zeroed target buffer.
 *
 * # Safety
 * `dev` and `out` must be valid.
 */
enum LdpStatus ldp_malloc(struct LdpDevice *dev,
                          size_t nx,
                          size_t ny,
                          size_t nz,
                          size_t ncomp,
                          struct LdpBuffer *out);

/**
 * # Safety
 * `dev` must be valid.
 */
enum LdpStatus ldp_free(struct LdpDevice *dev, struct LdpBuffer buf);

/**
 * Doubles currently allocated on the device; 0 for a null device.
 *
 * # Safety
 * `dev` must be null or valid.
 */
size_t ldp_occupancy(const struct LdpDevice *dev);

/**
 * # Safety
 * `dev` and `field` must be valid.
 */
enum LdpStatus ldp_copy_to_target(struct LdpDevice *dev,
                                  struct LdpBuffer buf,
                                  const struct LdpField *field);

/**
 * # Safety
 * `dev` and `field` must be valid.
 */
enum LdpStatus ldp_copy_from_target(struct LdpDevice *dev,
                                    struct LdpField *field,
                                    struct LdpBuffer buf);

/**
 * Copies the sites whose flag is non-zero. `nflags` must equal the site count.
 *
 * # Safety
 * `dev`, `field` and `flags[0..nflags]` must be valid.
 */
enum LdpStatus ldp_copy_to_target_masked(struct LdpDevice *dev,
                                         struct LdpBuffer buf,
                                         const struct LdpField *field,
                                         const uint8_t *flags,
                                         size_t nflags);

/**
 * # Safety
 * `dev`, `field` and `flags[0..nflags]` must be valid.
 */
enum LdpStatus ldp_copy_from_target_masked(struct LdpDevice *dev,
                                           struct LdpField *field,
                                           struct LdpBuffer buf,
                                           const uint8_t *flags,
                                           size_t nflags);

/**
 * # Safety
 * `dev` and `key` must be valid.
 */
enum LdpStatus ldp_set_constant_double(struct LdpDevice *dev, const char *key, double value);

/**
 * # Safety
 * `dev` and `key` must be valid.
 */
enum LdpStatus ldp_set_constant_int(struct LdpDevice *dev, const char *key, int64_t value);

/**
 * Row-major array of shape `dims[0..ndims]` (1 or 2 dims).
 *
 * # Safety
 * `dev`, `key`, `values[0..n]` and `dims[0..ndims]` must be valid.
 */
enum LdpStatus ldp_set_constant_double_array(struct LdpDevice *dev,
                                             const char *key,
                                             const double *values,
                                             size_t n,
                                             const size_t *dims,
                                             size_t ndims);

/**
 * # Safety
 * `dev`, `key`, `values[0..n]` and `dims[0..ndims]` must be valid.
 */
enum LdpStatus ldp_set_constant_int_array(struct LdpDevice *dev,
                                          const char *key,
                                          const int64_t *values,
                                          size_t n,
                                          const size_t *dims,
                                          size_t ndims);

/**
 * Stores the D3Q19 tables and relaxation times the collision kernel reads.
 *
 * # Safety
 * `dev` must be valid.
 */
enum LdpStatus ldp_upload_d3q19(struct LdpDevice *dev, double tau_f, double tau_g);

/**
 * Scales a 3-component buffer in place by the constant `"a"`.
 *
 * # Safety
 * `dev` and `cfg` must be valid.
 */
enum LdpStatus ldp_launch_scale(struct LdpDevice *dev,
                                struct LdpBuffer buf,
                                const struct LdpLaunchConfig *cfg);

/**
 * One collision step on the 19-component distributions `f` and `g`.
 *
 * # Safety
 * `dev` and `cfg` must be valid.
 */
enum LdpStatus ldp_launch_binary_collision(struct LdpDevice *dev,
                                           struct LdpBuffer f,
                                           struct LdpBuffer g,
                                           const struct LdpLaunchConfig *cfg);

/**
 * Waits for outstanding launches and reports the first deferred kernel error.
 *
 * # Safety
 * `dev` must be valid.
 */
enum LdpStatus ldp_sync(struct LdpDevice *dev);

/**
 * # Safety
 * `dev` and `out` must be valid.
 */
enum LdpStatus ldp_counters(const struct LdpDevice *dev, struct LdpCounters *out);

/**
 * # Safety
 * `dev` must be valid.
 */
enum LdpStatus ldp_reset_counters(struct LdpDevice *dev);

/**
 * Times `iterations` launches of a kernel on its seeded random state.
 *
 * # Safety
 * `cfg` and `out` must be valid.
 */
enum LdpStatus ldp_benchmark(uint32_t kernel_code,
                             uint32_t backend_code,
                             size_t nx,
                             size_t ny,
                             size_t nz,
                             const struct LdpLaunchConfig *cfg,
                             size_t iterations,
                             uint64_t seed,
                             struct LdpBenchResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATTICE_DP_H */
