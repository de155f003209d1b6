#ifndef CATALOG_H
#define CATALOG_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CatalogStatus {
  CATALOG_STATUS_OK = 0,
  CATALOG_STATUS_NULL_ARGUMENT = 1,
  CATALOG_STATUS_INVALID_UTF8 = 2,
  CATALOG_STATUS_INVALID_JSON = 3,
  CATALOG_STATUS_INVALID_ARGUMENT = 4,
  CATALOG_STATUS_NOT_FOUND = 5,
  CATALOG_STATUS_STORAGE = 6,
  CATALOG_STATUS_PROVIDER = 7,
  CATALOG_STATUS_PANIC = 8,
} CatalogStatus;

/**
 * Opaque handle to an open catalog.
 */
typedef struct CatalogHandle CatalogHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *catalog_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void catalog_string_free(char *s);

/**
 * Open the catalog described by a TOML config file. Queries are embedded
 * with the configured provider, so results match the HTTP service.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum CatalogStatus catalog_open(const char *config_path, struct CatalogHandle **out);

/**
 * Open an empty in-memory catalog that embeds with the built-in mock
 * provider.
 *
 * # Safety
 * `out` must be writable.
 */
enum CatalogStatus catalog_open_in_memory(struct CatalogHandle **out);

/**
 * # Safety
 * `h` must come from `catalog_open*` and not have been closed.
 */
void catalog_close(struct CatalogHandle *h);

/**
 * Load an exported catalog directory (cards.jsonl plus its sidecar).
 *
 * # Safety
 * `h` must be a live handle; `dir` a NUL-terminated string.
 */
enum CatalogStatus catalog_load_dir(const struct CatalogHandle *h,
                                    const char *dir,
                                    size_t *cards_loaded);

/**
 * # Safety
 * `h` must be a live handle; `out` writable.
 */
enum CatalogStatus catalog_card_count(const struct CatalogHandle *h, size_t *out);

/**
 * List cards. `request_json` is
 * `{"filter": {...}, "order": {"kind": "newest"}, "offset": 0, "limit": 24}`;
 * every key is optional. Writes a page `{total, offset, limit, cards}`.
 *
 * # Safety
 * `h` must be a live handle; `request_json` NUL-terminated; `out` writable.
 */
enum CatalogStatus catalog_cards_list(const struct CatalogHandle *h,
                                      const char *request_json,
                                      char **out);

/**
 * Top-`k` cards by similarity to `query`. Writes a JSON array of cards with
 * a `score` field.
 *
 * # Safety
 * `h` must be a live handle; `query` NUL-terminated; `out` writable.
 */
enum CatalogStatus catalog_cards_search(const struct CatalogHandle *h,
                                        const char *query,
                                        size_t k,
                                        char **out);

/**
 * Fresh client token for bookmark and dismissal calls.
 *
 * # Safety
 * `out` must be writable.
 */
enum CatalogStatus catalog_client_token_new(char **out);

/**
 * # Safety
 * `h` must be a live handle; `client` and `card_id` NUL-terminated.
 */
enum CatalogStatus catalog_bookmark_set(const struct CatalogHandle *h,
                                        const char *client_token,
                                        const char *card_id,
                                        bool bookmarked);

/**
 * # Safety
 * `h` must be a live handle; `client` NUL-terminated; `out` writable.
 */
enum CatalogStatus catalog_bookmarks_list(const struct CatalogHandle *h,
                                          const char *client_token,
                                          char **out);

/**
 * Hide a card from one client's listings and searches.
 *
 * # Safety
 * `h` must be a live handle; `client` and `card_id` NUL-terminated.
 */
enum CatalogStatus catalog_dismiss(const struct CatalogHandle *h,
                                   const char *client_token,
                                   const char *card_id);

/**
 * The ten aspects as `[{name, color, index}]`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CatalogStatus catalog_aspects(char **out);

/**
 * Render a pipeline report (as JSON) into the source-by-stage CSV table.
 *
 * # Safety
 * `report_json` must be NUL-terminated; `out` writable.
 */
enum CatalogStatus catalog_funnel_table(const char *report_json, char **out);

/**
 * Cohen's kappa between two JSON arrays of string labels.
 *
 * # Safety
 * Both label arguments must be NUL-terminated; `out` writable.
 */
enum CatalogStatus catalog_cohen_kappa(const char *labels_a, const char *labels_b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CATALOG_H */
