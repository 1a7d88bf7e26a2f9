#include <stdio.h>
#include <string.h>

#include "utility.h"

static int failures;

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,    \
                    __LINE__, #cond);                                 \
            failures++;                                               \
        }                                                             \
    } while (0)

static int unescapes_to(const char *in, const char *want)
{
    char buf[64];
    strcpy(buf, in);
    unescape_string(buf);
    if (strcmp(buf, want) != 0) {
        fprintf(stderr, "unescape(\"%s\") gave \"%s\"\n", in, buf);
        return 0;
    }
    return 1;
}

int main(void)
{
    char esc[5];

    CHECK(unescapes_to("a\\tb", "a\tb"));
    CHECK(unescapes_to("\\x41\\x4a", "AJ"));
    CHECK(unescapes_to("\\u0041", "A"));
    CHECK(unescapes_to("one\\\ntwo", "onetwo"));
    CHECK(unescapes_to("one\\\r\ntwo", "onetwo"));
    CHECK(unescapes_to("\\q", "\\q"));
    CHECK(unescapes_to("a\\\\b", "a\\b"));
    CHECK(unescapes_to("[\\\\-]", "[\\-]"));

    CHECK(strcmp(escape_character('\n', &esc), "\\n") == 0);
    CHECK(strcmp(escape_character('\x01', &esc), "\\x01") == 0);
    CHECK(is_identifier_char('_', true) && !is_identifier_char('1', true));
    CHECK(count_characters("h\xc3\xa9llo", 0, 6) == 5);
    CHECK(match_class("a-z_", 'q') && match_class("a-z_", '_') && !match_class("a-z", 'A'));

    if (failures) {
        fprintf(stderr, "%d failure(s)\n", failures);
        return 1;
    }
    printf("all utility checks passed\n");
    return 0;
}
