/* Scaffolding around jsonp_strndup: allocation wrappers. */
#include <stdlib.h>
#include <string.h>

#include "jansson_private.h"

void *jsonp_malloc(size_t size)
{
    return malloc(size);
}

void jsonp_free(void *ptr)
{
    if(!ptr)
        return;

    free(ptr);
}

char *jsonp_strndup(const char *str, size_t len)
{
    char *new_str;

    new_str = jsonp_malloc(len + 1);
    if(!new_str)
        return NULL;

    memcpy(new_str, str, len);
    new_str[len] = '\0';
    return new_str;
}

char *jsonp_strdup(const char *str)
{
    return jsonp_strndup(str, strlen(str));
}
