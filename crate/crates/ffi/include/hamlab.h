#ifndef HAMLAB_H
#define HAMLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum HamlabStatus {
  HAMLAB_STATUS_OK = 0,
  HAMLAB_STATUS_NULL_POINTER = 1,
  HAMLAB_STATUS_INVALID_UTF8 = 2,
  HAMLAB_STATUS_INVALID_INPUT = 3,
  HAMLAB_STATUS_DIMENSION_MISMATCH = 4,
  HAMLAB_STATUS_OUT_OF_DOMAIN = 5,
  HAMLAB_STATUS_RESONANCE = 6,
  HAMLAB_STATUS_BUDGET_EXCEEDED = 7,
  HAMLAB_STATUS_THRESHOLD_VIOLATION = 8,
  HAMLAB_STATUS_NUMERICAL_FAILURE = 9,
  HAMLAB_STATUS_IO = 10,
  HAMLAB_STATUS_PANIC = 11,
} HamlabStatus;

// Transform direction for [`hamlab_normal_form_transform`].
typedef enum HamlabDirection {
  // `Φ_m`, from normal-form to original coordinates (`H∘Φ_m = h_m + remainder`).
  HAMLAB_DIRECTION_FORWARD = 0,
  HAMLAB_DIRECTION_INVERSE = 1,
} HamlabDirection;

// Opaque Hamiltonian `H = α·Ĩ + V` with float coefficients.
typedef struct HamlabHamiltonian HamlabHamiltonian;

// Opaque Birkhoff normal form.
typedef struct HamlabNormalForm HamlabNormalForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hamlab_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into the library.
const char *hamlab_last_error_message(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void hamlab_string_free(char *s);

// Parses `{"n", "alpha", "s", "V"}` into a new handle.
//
// # Safety
// `json` must be NUL-terminated; `out` must be writable.
enum HamlabStatus hamlab_hamiltonian_from_json(const char *json, struct HamlabHamiltonian **out);

// # Safety
// `h` must come from [`hamlab_hamiltonian_from_json`] or be NULL.
void hamlab_hamiltonian_free(struct HamlabHamiltonian *h);

// Number of degrees of freedom, or 0 for NULL.
//
// # Safety
// `h` must be a live handle or NULL.
size_t hamlab_hamiltonian_dimension(const struct HamlabHamiltonian *h);

// Serializes the Hamiltonian back to JSON.
//
// # Safety
// `h` must be a live handle; `out` must be writable.
enum HamlabStatus hamlab_hamiltonian_to_json(const struct HamlabHamiltonian *h, char **out);

// `H(z)` for `z = (q, p)` of length `2n`.
//
// # Safety
// `z` must point to `len` doubles; `out` must be writable.
enum HamlabStatus hamlab_hamiltonian_energy(const struct HamlabHamiltonian *h,
                                            const double *z,
                                            size_t len,
                                            double *out);

// Hamiltonian vector field `(∂H/∂p, −∂H/∂q)` written into `out[0..len]`.
//
// # Safety
// `z` and `out` must each point to `len` doubles.
enum HamlabStatus hamlab_hamiltonian_vector_field(const struct HamlabHamiltonian *h,
                                                  const double *z,
                                                  size_t len,
                                                  double *out);

// Normal form of order `2m` with the default working degree `2m + 4`.
//
// # Safety
// `h` must be a live handle; `out` must be writable.
enum HamlabStatus hamlab_normal_form(const struct HamlabHamiltonian *h,
                                     uint32_t m,
                                     struct HamlabNormalForm **out);

// # Safety
// `nf` must come from [`hamlab_normal_form`] or be NULL.
void hamlab_normal_form_free(struct HamlabNormalForm *nf);

// Majorant of the remainder on the ball of radius `r`.
//
// # Safety
// `nf` must be a live handle; `out` must be writable.
enum HamlabStatus hamlab_normal_form_remainder(const struct HamlabNormalForm *nf,
                                               double r,
                                               double *out);

// Transformed Hamiltonian `h_m(Ĩ(z)) + remainder(z)` at `z`.
//
// # Safety
// `z` must point to `len` doubles; `out` must be writable.
enum HamlabStatus hamlab_normal_form_value(const struct HamlabNormalForm *nf,
                                           const double *z,
                                           size_t len,
                                           double *out);

// Applies the normalizing transform (or its inverse) to `z`.
//
// # Safety
// `z` and `out` must each point to `len` doubles.
enum HamlabStatus hamlab_normal_form_transform(const struct HamlabNormalForm *nf,
                                               const double *z,
                                               size_t len,
                                               enum HamlabDirection direction,
                                               double *out);

// Normal form report (coefficients and majorants at `radius`) as JSON.
//
// # Safety
// `nf` must be a live handle; `out` must be writable.
enum HamlabStatus hamlab_normal_form_to_json(const struct HamlabNormalForm *nf,
                                             double radius,
                                             char **out);

// `γ̂ = min_{0<|k|₁≤K} |k·α| |k|₁^τ`.
//
// # Safety
// `alpha` must point to `n` doubles; `out` must be writable.
enum HamlabStatus hamlab_estimate_gamma(const double *alpha,
                                        size_t n,
                                        double tau,
                                        uint64_t k_max,
                                        double *out);

// Quadratic steepness check of the symmetric `n × n` matrix `beta`
// (row-major). Writes 1 or 0 to `passed` and, when `verdict_json` is not
// NULL, the full verdict as JSON.
//
// # Safety
// `beta` must point to `n*n` doubles; `passed` must be writable.
enum HamlabStatus hamlab_sdm_check_quadratic(const double *beta,
                                             size_t n,
                                             double gamma_p,
                                             double tau_p,
                                             uint32_t l_max,
                                             int32_t *passed,
                                             char **verdict_json);

// Runs an experiment spec and returns its summary JSON. Artifacts are
// written to `out_dir` when it is not NULL.
//
// # Safety
// `spec_json` and `out_dir` must be NUL-terminated (or `out_dir` NULL);
// `summary` must be writable.
enum HamlabStatus hamlab_run_experiment(const char *spec_json, const char *out_dir, char **summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAMLAB_H */
