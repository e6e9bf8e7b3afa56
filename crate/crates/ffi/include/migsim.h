#ifndef MIGSIM_H
#define MIGSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MigsimLayout {
  MIGSIM_LAYOUT_LOCAL = 0,
  MIGSIM_LAYOUT_STRIPED1D = 1,
  MIGSIM_LAYOUT_ROWS2D = 2,
} MigsimLayout;

typedef enum MigsimPermutation {
  MIGSIM_PERMUTATION_ORDERED = 0,
  MIGSIM_PERMUTATION_INTRA_BLOCK_SHUFFLE = 1,
  MIGSIM_PERMUTATION_BLOCK_SHUFFLE = 2,
  MIGSIM_PERMUTATION_FULL_BLOCK_SHUFFLE = 3,
} MigsimPermutation;

typedef enum MigsimStatus {
  MIGSIM_STATUS_OK = 0,
  MIGSIM_STATUS_NULL_POINTER = 1,
  MIGSIM_STATUS_INVALID_ARGUMENT = 2,
  MIGSIM_STATUS_CONFIG_ERROR = 3,
  MIGSIM_STATUS_RUN_ERROR = 4,
  MIGSIM_STATUS_TIMEOUT = 5,
  MIGSIM_STATUS_PANIC = 6,
} MigsimStatus;

typedef enum MigsimStrategy {
  MIGSIM_STRATEGY_SERIAL_SPAWN = 0,
  MIGSIM_STRATEGY_RECURSIVE_SPAWN = 1,
  MIGSIM_STRATEGY_SERIAL_REMOTE_SPAWN = 2,
  MIGSIM_STRATEGY_RECURSIVE_REMOTE_SPAWN = 3,
} MigsimStrategy;

/**
 * Opaque machine configuration.
 */
typedef struct MigsimConfig MigsimConfig;

/**
 * Headline numbers of one simulated run.
 */
typedef struct MigsimRunSummary {
  double bandwidth_mb_per_sec;
  uint64_t sim_cycles;
  uint64_t bytes_moved;
  uint64_t migrations;
  uint64_t spawns;
  uint64_t threads;
  bool verified;
} MigsimRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a configuration holding the default 8-node, 64-nodelet machine.
 */
struct MigsimConfig *migsim_config_new(void);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `cfg` must be null or a handle from [`migsim_config_new`] that has not
 * been freed.
 */
void migsim_config_free(struct MigsimConfig *cfg);

/**
 * Sets one parameter by name, e.g. `("nodes", "1")`. The change is
 * rejected if it would make the configuration invalid.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` must be NUL-terminated.
 */
enum MigsimStatus migsim_config_set(struct MigsimConfig *cfg, const char *key, const char *value);

/**
 * Total nodelets of the configured machine, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
size_t migsim_config_total_nodelets(const struct MigsimConfig *cfg);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *migsim_last_error(void);

/**
 * Runs STREAM ADD over `2^scale` elements.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum MigsimStatus migsim_run_stream(const struct MigsimConfig *cfg,
                                    uint32_t scale,
                                    size_t threads,
                                    enum MigsimStrategy strategy,
                                    struct MigsimRunSummary *out);

/**
 * Runs the pointer chase with one chain per thread.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum MigsimStatus migsim_run_chase(const struct MigsimConfig *cfg,
                                   uint64_t elements,
                                   uint64_t block_size,
                                   enum MigsimPermutation permutation,
                                   uint64_t seed,
                                   size_t threads,
                                   struct MigsimRunSummary *out);

/**
 * Runs SpMV on the `n × n` five-point Laplacian with `x[i] = i mod 7 - 3`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum MigsimStatus migsim_run_spmv_laplacian(const struct MigsimConfig *cfg,
                                            size_t n,
                                            enum MigsimLayout layout,
                                            size_t threads,
                                            struct MigsimRunSummary *out);

/**
 * Issue-limited bandwidth of one core in MB/s.
 *
 * # Safety
 * `out_mb_per_sec` must be writable.
 */
enum MigsimStatus migsim_peak_core_bw(uint64_t freq_hz,
                                      uint64_t mem_ops,
                                      uint64_t total_insts,
                                      uint64_t word_bytes,
                                      double *out_mb_per_sec);

/**
 * Aggregate channel bandwidth of the configured machine in MB/s.
 *
 * # Safety
 * `cfg` must be a live handle and `out_mb_per_sec` writable.
 */
enum MigsimStatus migsim_ncdimm_peak(const struct MigsimConfig *cfg, double *out_mb_per_sec);

/**
 * Cores per nodelet needed to saturate a channel with the given mix.
 *
 * # Safety
 * `cfg` must be a live handle and `out_cores` writable.
 */
enum MigsimStatus migsim_what_if_cores(const struct MigsimConfig *cfg,
                                       uint64_t mem_ops,
                                       uint64_t total_insts,
                                       uint64_t *out_cores);

/**
 * Library version as a static NUL-terminated string.
 */
const char *migsim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIGSIM_H */
