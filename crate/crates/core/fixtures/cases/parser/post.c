/* Scaffolding around parse_object: flat JSON objects with integer values. */
#include <ctype.h>
#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "parser.h"

typedef struct {
    const char *input;
    size_t pos;
    char error[160];
} lex_t;

static void *jsonp_malloc(size_t size)
{
    return malloc(size);
}

static void jsonp_free(void *ptr)
{
    free(ptr);
}

static void set_error(lex_t *s, const char *source, const char *fmt, ...)
{
    va_list ap;
    int n = snprintf(s->error, sizeof(s->error), "%s: ", source);
    if (n < 0 || (size_t)n >= sizeof(s->error))
        return;
    va_start(ap, fmt);
    vsnprintf(s->error + n, sizeof(s->error) - (size_t)n, fmt, ap);
    va_end(ap);
}

json_t *json_object(void)
{
    json_t *json = calloc(1, sizeof(json_t));
    if (!json)
        return NULL;
    json->type = JSON_OBJECT;
    json->refcount = 1;
    return json;
}

json_t *json_integer(long value)
{
    json_t *json = calloc(1, sizeof(json_t));
    if (!json)
        return NULL;
    json->type = JSON_INTEGER;
    json->refcount = 1;
    json->integer = value;
    return json;
}

void json_decref(json_t *json)
{
    size_t i;
    if (!json || --json->refcount > 0)
        return;
    for (i = 0; i < json->size; i++) {
        jsonp_free(json->keys[i]);
        json_decref(json->values[i]);
    }
    free(json->keys);
    free(json->values);
    free(json);
}

/* Takes ownership of value, also on failure. Duplicate keys are refused. */
int json_object_set_new_nocheck(json_t *object, const char *key, json_t *value)
{
    char *copy;
    if (json_object_get(object, key)) {
        json_decref(value);
        return -1;
    }
    if (object->size == object->capacity) {
        size_t capacity = object->capacity ? object->capacity * 2 : 4;
        char **keys = realloc(object->keys, capacity * sizeof(char *));
        json_t **values;
        if (!keys) {
            json_decref(value);
            return -1;
        }
        object->keys = keys;
        values = realloc(object->values, capacity * sizeof(json_t *));
        if (!values) {
            json_decref(value);
            return -1;
        }
        object->values = values;
        object->capacity = capacity;
    }
    copy = jsonp_malloc(strlen(key) + 1);
    if (!copy) {
        json_decref(value);
        return -1;
    }
    strcpy(copy, key);
    object->keys[object->size] = copy;
    object->values[object->size] = value;
    object->size++;
    return 0;
}

json_t *json_object_get(const json_t *object, const char *key)
{
    size_t i;
    for (i = 0; i < object->size; i++) {
        if (strcmp(object->keys[i], key) == 0)
            return object->values[i];
    }
    return NULL;
}

long json_integer_value(const json_t *json)
{
    return json && json->type == JSON_INTEGER ? json->integer : 0;
}

static void skip_ws(lex_t *s)
{
    while (isspace((unsigned char)s->input[s->pos]))
        s->pos++;
}

static char peek(lex_t *s)
{
    return s->input[s->pos];
}

static char *parse_key(lex_t *s)
{
    size_t start, len;
    char *key;
    skip_ws(s);
    if (peek(s) != '"') {
        set_error(s, "<input>", "string or '}' expected");
        return NULL;
    }
    start = ++s->pos;
    while (s->input[s->pos] && s->input[s->pos] != '"')
        s->pos++;
    if (!s->input[s->pos]) {
        set_error(s, "<input>", "unterminated string");
        return NULL;
    }
    len = s->pos - start;
    s->pos++;
    key = jsonp_malloc(len + 1);
    if (!key)
        return NULL;
    memcpy(key, s->input + start, len);
    key[len] = '\0';
    return key;
}

static json_t *parse_value(lex_t *s);

static json_t *parse_object(lex_t *s)
{
    json_t *object = json_object();
    if (!object)
        return NULL;

    skip_ws(s);
    if (peek(s) == '}') {
        s->pos++;
        return object;
    }

    while (1) {
        char *key;
        int ours = 1;
        json_t *value;

        key = parse_key(s);
        if (!key)
            goto error;

        skip_ws(s);
        if (peek(s) != ':') {
            jsonp_free(key);
            set_error(s, "<input>", "':' expected");
            goto error;
        }
        s->pos++;

        value = parse_value(s);
        if (!value) {
            jsonp_free(key);
            goto error;
        }

        if (json_object_set_new_nocheck(object, key, value)) {
            set_error(s, "<internal>", "Unable to add key \"%s\"", key);
            if(ours)
                jsonp_free(key);
            goto error;
        }
        jsonp_free(key);

        skip_ws(s);
        if (peek(s) == '}')
            break;
        if (peek(s) != ',') {
            set_error(s, "<input>", "'}' expected");
            goto error;
        }
        s->pos++;
    }
    s->pos++;
    return object;

error:
    json_decref(object);
    return NULL;
}

static json_t *parse_value(lex_t *s)
{
    skip_ws(s);
    if (peek(s) == '{') {
        s->pos++;
        return parse_object(s);
    }
    if (peek(s) == '-' || isdigit((unsigned char)peek(s))) {
        char *end;
        long v = strtol(s->input + s->pos, &end, 10);
        s->pos = (size_t)(end - s->input);
        return json_integer(v);
    }
    set_error(s, "<input>", "unexpected character");
    return NULL;
}

json_t *json_loads(const char *input, char *error, size_t error_size)
{
    lex_t s;
    json_t *result;
    s.input = input;
    s.pos = 0;
    s.error[0] = '\0';
    result = parse_value(&s);
    if (!result && error && error_size)
        snprintf(error, error_size, "%s", s.error);
    return result;
}
