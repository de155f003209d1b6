#include <stdio.h>
#include <string.h>

#include "catalog.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke <catalog-dir>\n");
        return 2;
    }
    CatalogHandle *h = NULL;
    if (catalog_open_in_memory(&h) != CATALOG_STATUS_OK) {
        fprintf(stderr, "open: %s\n", catalog_last_error());
        return 1;
    }
    size_t loaded = 0;
    if (catalog_load_dir(h, argv[1], &loaded) != CATALOG_STATUS_OK) {
        fprintf(stderr, "load: %s\n", catalog_last_error());
        return 1;
    }
    printf("cards %zu\n", loaded);

    char *hits = NULL;
    if (catalog_cards_search(h, "privacy", 2, &hits) != CATALOG_STATUS_OK || strstr(hits, "\"score\"") == NULL) {
        fprintf(stderr, "search: %s\n", catalog_last_error());
        return 1;
    }
    catalog_string_free(hits);

    size_t n = 0;
    CatalogStatus s = catalog_card_count(NULL, &n);
    printf("null handle -> %d (%s)\n", (int)s, catalog_last_error());

    catalog_close(h);
    return 0;
}
