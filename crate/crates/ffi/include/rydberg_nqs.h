#ifndef RYDBERG_NQS_H
#define RYDBERG_NQS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RnqsStatus {
  RNQS_STATUS_OK = 0,
  RNQS_STATUS_INVALID_ARGUMENT = 1,
  RNQS_STATUS_LENGTH_MISMATCH = 2,
  RNQS_STATUS_TOO_LARGE = 3,
  RNQS_STATUS_NOT_CONVERGED = 4,
  RNQS_STATUS_PARSE = 5,
  RNQS_STATUS_NO_CROSSING = 6,
  RNQS_STATUS_IO = 7,
  RNQS_STATUS_NULL_POINTER = 8,
  RNQS_STATUS_BUFFER_TOO_SMALL = 9,
  RNQS_STATUS_PANIC = 10,
} RnqsStatus;

/**
 * Rydberg Hamiltonian on a square array.
 */
typedef struct RnqsModel RnqsModel;

/**
 * Autoregressive GRU wavefunction.
 */
typedef struct RnqsRnn RnqsRnn;

/**
 * Lowest levels and eigenvectors from exact diagonalization.
 */
typedef struct RnqsSpectrum RnqsSpectrum;

/**
 * Dense state vector over the `2^N` basis.
 */
typedef struct RnqsState RnqsState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, empty after a success.
 * The pointer stays valid until the next `rnqs_*` call on the same thread.
 */
const char *rnqs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rnqs_version(void);

/**
 * Builds `H = −(Ω/2) Σ σˣ − δ Σ n + Σ V₀/r⁶ n n` on an `lx × ly` array,
 * keeping interactions up to neighbor shell `cutoff` (1 to 3).
 */
enum RnqsStatus rnqs_model_new(size_t lx,
                               size_t ly,
                               double omega,
                               double delta,
                               double v0,
                               size_t cutoff,
                               struct RnqsModel **out);

void rnqs_model_free(struct RnqsModel *model);

enum RnqsStatus rnqs_model_n_sites(const struct RnqsModel *model, size_t *out);

/**
 * Diagonal matrix element `⟨σ|H|σ⟩`.
 */
enum RnqsStatus rnqs_model_diagonal_energy(const struct RnqsModel *model,
                                           const uint8_t *bits,
                                           size_t n_sites,
                                           double *out);

/**
 * Lowest `n_states` levels by exact diagonalization.
 */
enum RnqsStatus rnqs_solve_spectrum(const struct RnqsModel *model,
                                    size_t n_states,
                                    struct RnqsSpectrum **out);

void rnqs_spectrum_free(struct RnqsSpectrum *spectrum);

enum RnqsStatus rnqs_spectrum_e0(const struct RnqsSpectrum *spectrum, double *out);

/**
 * `e1 − e0`, or NaN when only one level was computed.
 */
enum RnqsStatus rnqs_spectrum_gap(const struct RnqsSpectrum *spectrum, double *out);

enum RnqsStatus rnqs_spectrum_n_levels(const struct RnqsSpectrum *spectrum, size_t *out);

/**
 * Copies the computed levels, ascending, into `buf`.
 */
enum RnqsStatus rnqs_spectrum_energies(const struct RnqsSpectrum *spectrum,
                                       double *buf,
                                       size_t len);

/**
 * New handle holding a copy of the ground state.
 */
enum RnqsStatus rnqs_spectrum_ground_state(const struct RnqsSpectrum *spectrum,
                                           struct RnqsState **out);

void rnqs_state_free(struct RnqsState *state);

enum RnqsStatus rnqs_state_dim(const struct RnqsState *state, size_t *out);

/**
 * Born probabilities `|ψ(σ)|²` in basis-index order.
 */
enum RnqsStatus rnqs_state_probabilities(const struct RnqsState *state, double *buf, size_t len);

/**
 * `⟨|N|⟩` with `N = (1/N) Σ (−1)^{x+y} Sᶻ`.
 */
enum RnqsStatus rnqs_state_staggered_magnetization(const struct RnqsState *state,
                                                   const struct RnqsModel *model,
                                                   double *out);

/**
 * `|⟨a|b⟩|²`.
 */
enum RnqsStatus rnqs_state_fidelity(const struct RnqsState *a,
                                    const struct RnqsState *b,
                                    double *out);

/**
 * Draws `n_samples` computational-basis outcomes as basis indices.
 */
enum RnqsStatus rnqs_state_sample(const struct RnqsState *state,
                                  size_t n_samples,
                                  uint64_t seed,
                                  uint64_t *indices);

/**
 * Glorot-initialized GRU wavefunction on the model's lattice (snake order).
 */
enum RnqsStatus rnqs_rnn_new(const struct RnqsModel *model,
                             size_t n_hidden,
                             uint64_t seed,
                             struct RnqsRnn **out);

void rnqs_rnn_free(struct RnqsRnn *rnn);

/**
 * `log ψ(σ)`.
 */
enum RnqsStatus rnqs_rnn_log_psi(const struct RnqsRnn *rnn,
                                 const uint8_t *bits,
                                 size_t n_sites,
                                 double *out);

/**
 * Variational Monte Carlo with Adam and the baseline-subtracted gradient.
 * `energies`, if not null, receives the sampled energy of every epoch and
 * must hold `epochs` values.
 */
enum RnqsStatus rnqs_rnn_train(struct RnqsRnn *rnn,
                               const struct RnqsModel *model,
                               size_t n_samples,
                               size_t epochs,
                               double learning_rate,
                               uint64_t seed,
                               double *energies);

/**
 * Exact `⟨ψ|H|ψ⟩` by enumeration (at most 16 sites).
 */
enum RnqsStatus rnqs_rnn_exact_energy(const struct RnqsRnn *rnn,
                                      const struct RnqsModel *model,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDBERG_NQS_H */
