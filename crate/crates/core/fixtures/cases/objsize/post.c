/* Scaffolding for json_object_size: objects keep their members in a small
 * open-coded table whose element count lives in `size`. */
#include <stdlib.h>
#include <string.h>

#include "jansson.h"

typedef struct {
    size_t size;
    size_t order;
    char **keys;
    json_t **values;
} hashtable_t;

typedef struct {
    json_t json;
    hashtable_t hashtable;
} json_object_t;

typedef struct {
    json_t json;
    long value;
} json_integer_t;

#define json_to_object(json_) ((json_object_t *)(json_))

json_t *json_object(void)
{
    json_object_t *object = calloc(1, sizeof(json_object_t));
    if (!object)
        return NULL;
    object->json.type = JSON_OBJECT;
    object->json.refcount = 1;
    return &object->json;
}

json_t *json_integer(long value)
{
    json_integer_t *integer = calloc(1, sizeof(json_integer_t));
    if (!integer)
        return NULL;
    integer->json.type = JSON_INTEGER;
    integer->json.refcount = 1;
    integer->value = value;
    return &integer->json;
}

void json_decref(json_t *json)
{
    size_t i;
    json_object_t *object;
    if (!json || --json->refcount > 0)
        return;
    if (json->type == JSON_OBJECT) {
        object = json_to_object(json);
        for (i = 0; i < object->hashtable.size; i++) {
            free(object->hashtable.keys[i]);
            json_decref(object->hashtable.values[i]);
        }
        free(object->hashtable.keys);
        free(object->hashtable.values);
    }
    free(json);
}

json_t *json_object_get(const json_t *json, const char *key)
{
    size_t i;
    json_object_t *object;
    if (!json_is_object(json))
        return NULL;
    object = json_to_object(json);
    for (i = 0; i < object->hashtable.size; i++) {
        if (strcmp(object->hashtable.keys[i], key) == 0)
            return object->hashtable.values[i];
    }
    return NULL;
}

/* Steals the reference to value. */
int json_object_set(json_t *json, const char *key, json_t *value)
{
    json_object_t *object;
    hashtable_t *ht;
    char **keys;
    json_t **values;
    if (!json_is_object(json) || !value || json_object_get(json, key)) {
        json_decref(value);
        return -1;
    }
    object = json_to_object(json);
    ht = &object->hashtable;
    keys = realloc(ht->keys, (ht->size + 1) * sizeof(char *));
    if (!keys) {
        json_decref(value);
        return -1;
    }
    ht->keys = keys;
    values = realloc(ht->values, (ht->size + 1) * sizeof(json_t *));
    if (!values) {
        json_decref(value);
        return -1;
    }
    ht->values = values;
    ht->keys[ht->size] = malloc(strlen(key) + 1);
    if (!ht->keys[ht->size]) {
        json_decref(value);
        return -1;
    }
    strcpy(ht->keys[ht->size], key);
    ht->values[ht->size] = value;
    ht->size++;
    ht->order++;
    return 0;
}

unsigned int json_object_size(const json_t *json)
{
    json_object_t *object;
    if(!json_is_object(json))
        return -1;

    object = json_to_object(json);
    return object->hashtable.size;
}
