#ifndef GOTCHA_H
#define GOTCHA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum GotchaStatus {
  GOTCHA_STATUS_OK = 0,
  GOTCHA_STATUS_NULL_POINTER = 1,
  GOTCHA_STATUS_INVALID_ARGUMENT = 2,
  GOTCHA_STATUS_INVALID_UTF8 = 3,
  GOTCHA_STATUS_OVERFLOW = 4,
  GOTCHA_STATUS_DUPLICATE_USER = 5,
  GOTCHA_STATUS_SESSION_NOT_FOUND = 6,
  GOTCHA_STATUS_SESSION_EXPIRED = 7,
  GOTCHA_STATUS_LOCKED_OUT = 8,
  GOTCHA_STATUS_STORE = 9,
  GOTCHA_STATUS_PANIC = 255,
} GotchaStatus;

/**
 * Opaque authenticator handle.
 */
typedef struct GotchaAuthenticator GotchaAuthenticator;

/**
 * Heap bytes owned by the library until passed to [`gotcha_buffer_free`].
 */
typedef struct GotchaBuffer {
  uint8_t *data;
  size_t len;
} GotchaBuffer;

/**
 * A 128-bit session token.
 */
typedef struct GotchaToken {
  uint8_t bytes[16];
} GotchaToken;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next call on this thread.
 */
const char *gotcha_last_error_message(void);

/**
 * Releases a buffer. A zeroed buffer is ignored.
 *
 * # Safety
 * `buffer` must have been filled by this library and not freed before.
 */
void gotcha_buffer_free(struct GotchaBuffer buffer);

/**
 * Number of orders within distance `alpha` of a fixed order of `k` items.
 *
 * # Safety
 * `out` must be writable.
 */
enum GotchaStatus gotcha_count_close(size_t k, size_t alpha, uint64_t *out);

/**
 * The loose upper bound on [`gotcha_count_close`].
 *
 * # Safety
 * `out` must be writable.
 */
enum GotchaStatus gotcha_count_close_upper_bound(size_t k, size_t alpha, uint64_t *out);

/**
 * PNG of canonical inkblot `j` (one-based) for generation seed `seed`.
 *
 * # Safety
 * `seed` must be valid for `seed_len` bytes; `out` must be writable.
 */
enum GotchaStatus gotcha_inkblot_png(const uint8_t *seed,
                                     size_t seed_len,
                                     size_t j,
                                     struct GotchaBuffer *out);

/**
 * Creates an authenticator. `store_path` may be null for an in-memory store.
 *
 * # Safety
 * `store_path` must be null or a valid string; `out` must be writable.
 */
enum GotchaStatus gotcha_authenticator_new(size_t k,
                                           size_t alpha,
                                           uint8_t hash_cost,
                                           const char *store_path,
                                           struct GotchaAuthenticator **out);

/**
 * Destroys a handle. Null is ignored.
 *
 * # Safety
 * `auth` must be null or a handle from [`gotcha_authenticator_new`] not freed before.
 */
void gotcha_authenticator_free(struct GotchaAuthenticator *auth);

/**
 * Starts a registration; the token names the session.
 *
 * # Safety
 * Strings must be valid; `token` must be writable.
 */
enum GotchaStatus gotcha_register_begin(const struct GotchaAuthenticator *auth,
                                        const char *username,
                                        const char *password,
                                        struct GotchaToken *token);

/**
 * Discards the current inkblots; `token` is replaced by the new session's token.
 *
 * # Safety
 * `token` must be readable and writable.
 */
enum GotchaStatus gotcha_register_reject(const struct GotchaAuthenticator *auth,
                                         struct GotchaToken *token);

/**
 * PNG of registration image `j` (one-based, as presented).
 *
 * # Safety
 * `token` must be readable and `out` writable.
 */
enum GotchaStatus gotcha_register_inkblot_png(const struct GotchaAuthenticator *auth,
                                              const struct GotchaToken *token,
                                              size_t j,
                                              struct GotchaBuffer *out);

/**
 * Stores the account with `count` labels given in presentation order.
 *
 * # Safety
 * `labels` must point to `count` valid strings.
 */
enum GotchaStatus gotcha_register_complete(const struct GotchaAuthenticator *auth,
                                           const struct GotchaToken *token,
                                           const char *const *labels,
                                           size_t count);

/**
 * Starts a login and reports the number of images.
 *
 * # Safety
 * Strings must be valid; `token` and `k` must be writable.
 */
enum GotchaStatus gotcha_login_begin(const struct GotchaAuthenticator *auth,
                                     const char *username,
                                     const char *password,
                                     struct GotchaToken *token,
                                     size_t *k);

/**
 * UTF-8 bytes of wire label `i` (zero-based), without a terminator.
 *
 * # Safety
 * `token` must be readable and `out` writable.
 */
enum GotchaStatus gotcha_login_label(const struct GotchaAuthenticator *auth,
                                     const struct GotchaToken *token,
                                     size_t i,
                                     struct GotchaBuffer *out);

/**
 * Writes the alphabetical display order: `order[d]` is the zero-based wire index of the `d`-th label shown.
 *
 * # Safety
 * `order` must be writable for `len` elements.
 */
enum GotchaStatus gotcha_login_display_order(const struct GotchaAuthenticator *auth,
                                             const struct GotchaToken *token,
                                             size_t *order,
                                             size_t len);

/**
 * PNG of login image `j` (one-based, canonical).
 *
 * # Safety
 * `token` must be readable and `out` writable.
 */
enum GotchaStatus gotcha_login_inkblot_png(const struct GotchaAuthenticator *auth,
                                           const struct GotchaToken *token,
                                           size_t j,
                                           struct GotchaBuffer *out);

/**
 * Answers the login. `assignment[i]` is the one-based image chosen for wire label `i`.
 *
 * # Safety
 * `assignment` must be readable for `len` elements; `accepted` writable.
 */
enum GotchaStatus gotcha_login_complete(const struct GotchaAuthenticator *auth,
                                        const struct GotchaToken *token,
                                        const uint32_t *assignment,
                                        size_t len,
                                        bool *accepted);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOTCHA_H */
