/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef CZIC_H
#define CZIC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CzicStatus {
  CZIC_STATUS_OK = 0,
  CZIC_STATUS_DOMAIN = 1,
  CZIC_STATUS_REGIME = 2,
  CZIC_STATUS_INVALID_CORRELATION = 3,
  CZIC_STATUS_MALFORMED = 4,
  CZIC_STATUS_DEGENERATE = 5,
  CZIC_STATUS_CODEBOOK_CAP = 6,
  CZIC_STATUS_IO = 7,
  CZIC_STATUS_NULL_POINTER = 8,
  CZIC_STATUS_OUT_OF_RANGE = 9,
  CZIC_STATUS_PANIC = 10,
} CzicStatus;

typedef enum CzicRegime {
  CZIC_REGIME_WEAK = 0,
  CZIC_REGIME_STRONG_CAPACITY = 1,
  CZIC_REGIME_UNKNOWN_GAP = 2,
  CZIC_REGIME_VERY_STRONG = 3,
  CZIC_REGIME_ULTRA_STRONG = 4,
} CzicRegime;

typedef enum CzicBound {
  CZIC_BOUND_INNER = 0,
  CZIC_BOUND_LEMMA1 = 1,
  CZIC_BOUND_COR1 = 2,
  CZIC_BOUND_COR2 = 3,
  CZIC_BOUND_COR3 = 4,
  CZIC_BOUND_THM3 = 5,
  CZIC_BOUND_COR4 = 6,
  CZIC_BOUND_WEAK = 7,
  CZIC_BOUND_STRONG_CAP = 8,
} CzicBound;

typedef enum CzicLemma1Mode {
  CZIC_LEMMA1_MODE_FULL = 0,
  CZIC_LEMMA1_MODE_BOUNDARY = 1,
} CzicLemma1Mode;

typedef enum CzicDecoder {
  CZIC_DECODER_JOINT_ML = 0,
  CZIC_DECODER_SUCCESSIVE = 1,
} CzicDecoder;

typedef enum CzicCodebook {
  CZIC_CODEBOOK_EXPLICIT = 0,
  CZIC_CODEBOOK_IMPLICIT = 1,
} CzicCodebook;

typedef enum CzicVerdict {
  CZIC_VERDICT_HOLDS = 0,
  CZIC_VERDICT_VIOLATED = 1,
  CZIC_VERDICT_INCONCLUSIVE = 2,
} CzicVerdict;

// Opaque discrete memoryless channel.
typedef struct CzicDmChannel CzicDmChannel;

// Opaque sampled frontier.
typedef struct CzicFrontier CzicFrontier;

typedef struct CzicChannel {
  double a;
  double p1;
  double p2;
} CzicChannel;

// `R1 <= r1_max`, `R2 <= r2_max`, `R1 + R2 <= sum_max`; absent constraints are +inf.
typedef struct CzicConstraintSet {
  double r1_max;
  double r2_max;
  double sum_max;
} CzicConstraintSet;

typedef struct CzicGridSpec {
  size_t alpha;
  size_t rho;
  size_t r2;
  enum CzicLemma1Mode lemma1_mode;
} CzicGridSpec;

typedef struct CzicRatePair {
  double r1;
  double r2;
} CzicRatePair;

typedef struct CzicSimConfig {
  struct CzicChannel channel;
  double alpha;
  size_t n;
  double r1;
  double r2;
  size_t trials;
  uint64_t seed;
  enum CzicDecoder decoder1;
  enum CzicCodebook codebook;
} CzicSimConfig;

typedef struct CzicTrialSummary {
  uint64_t m1;
  uint64_t m2;
  uint64_t err1_count;
  uint64_t err2_count;
  double err1_rate;
  double err2_rate;
  double ci1[2];
  double ci2[2];
  double empirical_power[2];
} CzicTrialSummary;

typedef struct CzicSearchConfig {
  size_t restarts;
  size_t levels;
  size_t sweeps;
  double initial_step;
  uint32_t halvings;
  size_t samples;
  size_t refine;
  uint64_t seed;
} CzicSearchConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *czic_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *czic_version(void);

// Regime of `channel` and the thresholds `[1, t2, t3, t4]` on `|a|`.
//
// # Safety
// `regime` must be valid for a write; `thresholds` must hold 4 doubles.
enum CzicStatus czic_classify_regime(struct CzicChannel channel,
                                     enum CzicRegime *regime,
                                     double *thresholds);

// Constraint set of `bound` at one parameter point: `(rho1, rho2, rho12)`
// for lemma1, `(gamma)` for cor1, `(alpha, beta)` for cor3 and `(alpha)` for
// the rest. Unused entries are ignored.
//
// # Safety
// `point` must hold 3 doubles and `out` must be valid for a write.
enum CzicStatus czic_constraint_set(enum CzicBound bound,
                                    struct CzicChannel channel,
                                    const double *point,
                                    struct CzicConstraintSet *out);

// Default sweep resolution: 201 power splits, 101 correlations, 401 R2 levels.
struct CzicGridSpec czic_grid_default(void);

// Sweeps `bound` into a new frontier handle.
//
// # Safety
// `grid` must point to a grid spec and `out` must be valid for a write.
enum CzicStatus czic_region_frontier(enum CzicBound bound,
                                     struct CzicChannel channel,
                                     const struct CzicGridSpec *grid,
                                     struct CzicFrontier **out);

// Number of samples in `frontier`, 0 for null.
//
// # Safety
// `frontier` must be null or a live handle.
size_t czic_frontier_len(const struct CzicFrontier *frontier);

// Sample `index` in descending R2 order.
//
// # Safety
// `frontier` must be a live handle and `out` valid for a write.
enum CzicStatus czic_frontier_point(const struct CzicFrontier *frontier,
                                    size_t index,
                                    struct CzicRatePair *out);

// Interpolated R1 at `r2` (0 beyond the top of the frontier).
//
// # Safety
// `frontier` must be a live handle and `out` valid for a write.
enum CzicStatus czic_frontier_r1_at(const struct CzicFrontier *frontier, double r2, double *out);

// Releases a frontier handle. Null is ignored.
//
// # Safety
// `frontier` must be null or a handle not yet freed.
void czic_frontier_free(struct CzicFrontier *frontier);

// Upper concave envelope of `frontier` as a new handle.
//
// # Safety
// `frontier` must be a live handle and `out` valid for a write.
enum CzicStatus czic_frontier_convexify(const struct CzicFrontier *frontier,
                                        struct CzicFrontier **out);

// Largest `R1_outer(R2) - R1_inner(R2)` and where it occurs. `r2_at_max` may be null.
//
// # Safety
// Both handles must be live; `gap` must be valid for a write.
enum CzicStatus czic_directed_gap(const struct CzicFrontier *outer,
                                  const struct CzicFrontier *inner,
                                  double *gap,
                                  double *r2_at_max);

// Whether `point` lies under `frontier` with slack `tol` on both axes.
//
// # Safety
// `frontier` must be a live handle and `out` valid for a write.
enum CzicStatus czic_frontier_contains(const struct CzicFrontier *frontier,
                                       struct CzicRatePair point,
                                       double tol,
                                       bool *out);

// Writes `frontier` as `r2_bits,r1_bits` CSV to `path`.
//
// # Safety
// `frontier` must be a live handle and `path` a NUL-terminated UTF-8 string.
enum CzicStatus czic_frontier_write_csv(const struct CzicFrontier *frontier, const char *path);

// Sample estimates of `[I(X1;Y1|U), I(U;Y2), I(X1,X2;Y1)]` and their
// standard errors. `std_err` may be null.
//
// # Safety
// `values` must hold 3 doubles; `std_err` must be null or hold 3 doubles.
enum CzicStatus czic_estimate_rates(struct CzicChannel channel,
                                    double alpha,
                                    size_t samples,
                                    uint64_t seed,
                                    double *values,
                                    double *std_err);

// Runs the random-coding trials described by `config`.
//
// # Safety
// `config` must point to a config and `out` be valid for a write.
enum CzicStatus czic_run_trials(const struct CzicSimConfig *config, struct CzicTrialSummary *out);

struct CzicSearchConfig czic_search_config_default(void);

// Parses a channel from its JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for a write.
enum CzicStatus czic_dm_channel_from_json(const char *json, struct CzicDmChannel **out);

// Releases a channel handle. Null is ignored.
//
// # Safety
// `channel` must be null or a handle not yet freed.
void czic_dm_channel_free(struct CzicDmChannel *channel);

// Sampled check of the strong interference condition. `margin` receives the
// smallest margin seen when the verdict is `Holds`, the violating margin
// when `Violated`, and NaN otherwise; it may be null.
//
// # Safety
// Handles and `config` must be live; `verdict` must be valid for a write.
enum CzicStatus czic_dm_check_strong_interference(const struct CzicDmChannel *channel,
                                                  const struct CzicSearchConfig *config,
                                                  enum CzicVerdict *verdict,
                                                  double *margin);

// Randomized search of the superposition inner region.
//
// # Safety
// Handles and `config` must be live; `out` must be valid for a write.
enum CzicStatus czic_dm_inner_region(const struct CzicDmChannel *channel,
                                     const struct CzicSearchConfig *config,
                                     struct CzicFrontier **out);

// Randomized search of the outer region.
//
// # Safety
// Handles and `config` must be live; `out` must be valid for a write.
enum CzicStatus czic_dm_outer_region(const struct CzicDmChannel *channel,
                                     const struct CzicSearchConfig *config,
                                     struct CzicFrontier **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CZIC_H */
