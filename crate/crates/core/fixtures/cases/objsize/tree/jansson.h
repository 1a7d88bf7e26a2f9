#ifndef JANSSON_H
#define JANSSON_H

#include <stddef.h>

typedef enum { JSON_OBJECT, JSON_INTEGER } json_type;

typedef struct json_t {
    json_type type;
    size_t refcount;
} json_t;

#define json_is_object(json) ((json) && (json)->type == JSON_OBJECT)

json_t *json_object(void);
json_t *json_integer(long value);
void json_decref(json_t *json);
int json_object_set(json_t *object, const char *key, json_t *value);
json_t *json_object_get(const json_t *object, const char *key);
unsigned int json_object_size(const json_t *json);

#endif
