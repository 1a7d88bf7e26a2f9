#include <stdio.h>
#include <string.h>

#include "jansson_private.h"

static int failures;

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,    \
                    __LINE__, #cond);                                 \
            failures++;                                               \
        }                                                             \
    } while (0)

int main(void)
{
    char *s = jsonp_strndup("hello", 3);
    CHECK(s && strcmp(s, "hel") == 0);
    jsonp_free(s);

    s = jsonp_strdup("");
    CHECK(s && s[0] == '\0');
    jsonp_free(s);

    /* len + 1 wraps to zero. */
    CHECK(jsonp_strndup("x", (size_t)-1) == NULL);

    if (failures) {
        fprintf(stderr, "%d failure(s)\n", failures);
        return 1;
    }
    printf("all memory checks passed\n");
    return 0;
}
