#ifndef PARSER_H
#define PARSER_H

#include <stddef.h>

typedef enum { JSON_OBJECT, JSON_INTEGER } json_type;

typedef struct json_t {
    json_type type;
    size_t refcount;
    long integer;
    size_t size;
    size_t capacity;
    char **keys;
    struct json_t **values;
} json_t;

json_t *json_object(void);
json_t *json_integer(long value);
void json_decref(json_t *json);
int json_object_set_new_nocheck(json_t *object, const char *key, json_t *value);
json_t *json_object_get(const json_t *object, const char *key);
long json_integer_value(const json_t *json);
json_t *json_loads(const char *input, char *error, size_t error_size);

#endif
