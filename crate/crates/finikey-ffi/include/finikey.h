#ifndef FINIKEY_H
#define FINIKEY_H

/* Generated by cbindgen from the finikey-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define FINIKEY_PROTOCOL_BB84 0

#define FINIKEY_PROTOCOL_SIX_STATE 1

/**
 * Status code of every fallible call.
 */
typedef enum FinikeyStatus {
  FinikeyStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  FinikeyStatus_NullArgument = 1,
  /**
   * An argument violated the operation's domain (reported, never computed
   * around).
   */
  FinikeyStatus_InvalidArgument = 2,
  /**
   * No result exists below the documented search cap.
   */
  FinikeyStatus_NotFound = 3,
  /**
   * The request exceeded the resource budget.
   */
  FinikeyStatus_ResourceLimit = 4,
  /**
   * The library panicked; the out parameters are untouched.
   */
  FinikeyStatus_Internal = 5,
} FinikeyStatus;

/**
 * Opaque handle bundling a protocol, a failure budget, and the
 * error-correction inefficiency.
 */
typedef struct FinikeyCalculator FinikeyCalculator;

/**
 * Key length with its per-term breakdown.
 */
typedef struct FinikeyKeyRate {
  uint64_t ell;
  double rate;
  double q_pess;
  double delta_v;
  double delta_n;
  double leak_per_bit;
  double h_ae_pess;
  bool q_pess_clamped;
  bool d_warning;
} FinikeyKeyRate;

/**
 * Optimized split, budget allocation, and the resulting key rate.
 */
typedef struct FinikeyOptimum {
  uint64_t best_n;
  double eps_pa;
  double eps_bar;
  double eps_pe;
  double eps_ec;
  uint64_t evaluations;
  struct FinikeyKeyRate key_rate;
} FinikeyOptimum;

/**
 * Aggregated fluctuation-validation report.
 */
typedef struct FinikeyTrialReport {
  uint64_t trials;
  uint64_t violation_count;
  double violation_fraction;
  double delta_v_used;
  double mean_qhat;
  double max_abs_deviation;
  bool d_warning;
} FinikeyTrialReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a calculator handle. On success `*out` owns the handle; release it
 * with `finikey_calculator_free`.
 */
enum FinikeyStatus finikey_calculator_new(uint32_t protocol,
                                          uint32_t d,
                                          uint32_t n_pe,
                                          double eps_pa,
                                          double eps_bar,
                                          double eps_pe,
                                          double eps_ec,
                                          double ec_inefficiency,
                                          struct FinikeyCalculator **out);

/**
 * Release a handle created by `finikey_calculator_new`. Null is a no-op.
 */
void finikey_calculator_free(struct FinikeyCalculator *calc);

/**
 * Key length for one fixed run. Pass a negative `measured_leak` to use the
 * built-in leak model; a nonnegative value overrides it with the real
 * error-correction transcript length in bits.
 */
enum FinikeyStatus finikey_key_rate(const struct FinikeyCalculator *calc,
                                    uint64_t total_signals,
                                    uint64_t raw_key_len,
                                    double q_obs,
                                    double measured_leak,
                                    struct FinikeyKeyRate *out);

/**
 * Maximize the key length over the split and the budget allocation.
 */
enum FinikeyStatus finikey_optimize(const struct FinikeyCalculator *calc,
                                    uint64_t total_signals,
                                    double q_obs,
                                    struct FinikeyOptimum *out);

/**
 * Smallest run size with a positive optimized key. Returns `NotFound` when
 * no positive key exists below the search cap.
 */
enum FinikeyStatus finikey_critical_n(const struct FinikeyCalculator *calc,
                                      double q_obs,
                                      uint64_t *out);

/**
 * Binary entropy in bits.
 */
enum FinikeyStatus finikey_binary_entropy(double x, double *out);

/**
 * Collective-attack bound on Eve's per-signal uncertainty at error rate `q`
 * for the protocol's default parameters.
 */
enum FinikeyStatus finikey_entropy_bound(uint32_t protocol, double q, double *out);

/**
 * Asymptotic secret-key fraction at error rate `q`.
 */
enum FinikeyStatus finikey_asymptotic_rate(uint32_t protocol, double q, double *out);

/**
 * Rapid estimate of the privacy-amplification overhead at run size `n`.
 */
enum FinikeyStatus finikey_rapid_delta_n(uint64_t total_signals, double *out);

/**
 * Rapid estimate of the fluctuation allowance at run size `n`.
 */
enum FinikeyStatus finikey_rapid_delta_v(uint64_t total_signals, double *out);

/**
 * Smallest run size whose rapid overhead stays below `r_inf`.
 */
enum FinikeyStatus finikey_rapid_case_1(double r_inf, uint64_t *out);

/**
 * Smallest run size whose rapid fluctuation allowance meets `target_dv`.
 */
enum FinikeyStatus finikey_rapid_case_2(double target_dv, uint64_t *out);

/**
 * Monte Carlo validation of the fluctuation bound: `trials` empirical rates
 * over `m` samples each, with one deterministic substream per trial.
 */
enum FinikeyStatus finikey_validate_delta_v(double q_true,
                                            uint64_t m,
                                            uint64_t trials,
                                            double eps_pe,
                                            uint32_t d,
                                            uint64_t seed,
                                            struct FinikeyTrialReport *out);

/**
 * Sample one full run at true error rate `q_true` and evaluate the bound on
 * the sampled estimate. Deterministic for a given seed.
 */
enum FinikeyStatus finikey_simulate_run(const struct FinikeyCalculator *calc,
                                        uint64_t total_signals,
                                        double q_true,
                                        uint64_t seed,
                                        struct FinikeyKeyRate *out);

/**
 * Static description of a status code.
 */
const char *finikey_status_message(enum FinikeyStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINIKEY_H */
