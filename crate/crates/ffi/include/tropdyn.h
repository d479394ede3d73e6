#ifndef TROPDYN_H
#define TROPDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum td_status {
  TD_STATUS_OK = 0,
  /**
   * Malformed expression, number or index.
   */
  TD_STATUS_SYNTAX = 1,
  /**
   * Invalid argument, map or configuration.
   */
  TD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numeric or domain failure.
   */
  TD_STATUS_DOMAIN = 3,
  /**
   * A value hit the midpoint of the projection.
   */
  TD_STATUS_MIDPOINT = 4,
  TD_STATUS_NULL_POINTER = 5,
  TD_STATUS_INVALID_UTF8 = 6,
  /**
   * Index outside a handle's bounds.
   */
  TD_STATUS_OUT_OF_RANGE = 7,
  TD_STATUS_PANIC = 8,
} td_status;

/**
 * Opaque parsed expression.
 */
typedef struct td_expr td_expr;

/**
 * Opaque lattice field.
 */
typedef struct td_field td_field;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the calling thread's last error message, or NULL. Free with
 * `td_string_free`.
 */
char *td_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void td_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *td_version(void);

/**
 * Parses a max-plus expression over `arity` variables (`x, y, z, w` or
 * `v0, v1, ...`).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum td_status td_expr_parse(const char *text_ptr, size_t arity, struct td_expr **out);

/**
 * # Safety
 * `e` must be NULL or a handle from `td_expr_parse`, not yet freed.
 */
void td_expr_free(struct td_expr *e);

/**
 * Evaluates at a comma-separated rational point; writes `"p/q"`.
 *
 * # Safety
 * Pointers must be valid; `e` must be a live handle.
 */
enum td_status td_expr_eval(const struct td_expr *e, const char *point, char **out);

/**
 * Normal form `max(P) - max(Q)` as JSON.
 *
 * # Safety
 * Pointers must be valid; `e` must be a live handle.
 */
enum td_status td_expr_normal_form_json(const struct td_expr *e, char **out);

/**
 * Dequantized family as text, e.g. `(1 + w + 1) / (z)`.
 *
 * # Safety
 * Pointers must be valid; `e` must be a live handle.
 */
enum td_status td_expr_dequantize(const struct td_expr *e, char **out);

/**
 * Exact period detection for the recurrence of order `arity` defined by
 * `e`. `found` is set to 0 when no period exists within the bounds.
 *
 * # Safety
 * Pointers must be valid; `e` must be a live handle.
 */
enum td_status td_period(const struct td_expr *e,
                         const char *init,
                         size_t max_transient,
                         size_t max_period,
                         bool *found,
                         size_t *transient,
                         size_t *period);

/**
 * Leading Kontsevich-cycle coefficient for an index such as `"1^2 3"`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum td_status td_igusa(const char *index, char **out);

/**
 * Symbol of a rational in `[0, 1]`; `TD_STATUS_MIDPOINT` at `1/2`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum td_status td_project(const char *v, uint8_t *out);

/**
 * Output symbols of the interaction of two maps (built-in names or
 * `pl:` specs) started at `x` and driven by a `0`/`1` string.
 *
 * # Safety
 * Pointers must be valid.
 */
enum td_status td_interaction(const char *f0,
                              const char *f1,
                              const char *x,
                              const char *symbols,
                              char **out);

/**
 * Evolves the cell automaton from a comma-separated row.
 *
 * # Safety
 * Pointers must be valid.
 */
enum td_status td_lvca_evolve(const char *l,
                              const char *row,
                              size_t steps,
                              const char *background,
                              struct td_field **out);

/**
 * # Safety
 * `f` must be NULL or a handle from `td_lvca_evolve`, not yet freed.
 */
void td_field_free(struct td_field *f);

/**
 * Number of rows (time steps plus one) and columns.
 *
 * # Safety
 * Pointers must be valid; `f` must be a live handle.
 */
enum td_status td_field_dims(const struct td_field *f, size_t *rows, size_t *cols);

/**
 * Exact value at time `s`, cell `n`.
 *
 * # Safety
 * Pointers must be valid; `f` must be a live handle.
 */
enum td_status td_field_value(const struct td_field *f, size_t s, size_t n, char **out);

/**
 * Number of cells violating the recurrence; 0 for every evolved field.
 *
 * # Safety
 * Pointers must be valid; `f` must be a live handle.
 */
enum td_status td_field_audit(const struct td_field *f, size_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TROPDYN_H */
