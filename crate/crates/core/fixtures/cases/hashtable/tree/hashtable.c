/* Scaffolding around hashtable_add: chained buckets, string keys, and a
 * NULL key that always hashes to bucket zero. */
#include <stdlib.h>
#include <string.h>

#include "hashtable.h"

static size_t string_hash(const void *key)
{
    const unsigned char *s = key;
    size_t h = 5381;
    if (!s)
        return 0;
    while (*s)
        h = h * 33 + *s++;
    return h;
}

static int string_cmp(const void *k1, const void *k2)
{
    return strcmp(k1, k2);
}

enum cc_stat hashtable_new(HashTable **out)
{
    HashTable *table = calloc(1, sizeof(HashTable));
    if (!table)
        return CC_ERR_ALLOC;
    table->capacity = 8;
    table->buckets = calloc(table->capacity, sizeof(TableEntry *));
    if (!table->buckets) {
        free(table);
        return CC_ERR_ALLOC;
    }
    table->hash = string_hash;
    table->key_cmp = string_cmp;
    *out = table;
    return CC_OK;
}

void hashtable_destroy(HashTable *table)
{
    size_t i;
    for (i = 0; i < table->capacity; i++) {
        TableEntry *e = table->buckets[i];
        while (e) {
            TableEntry *next = e->next;
            free(e);
            e = next;
        }
    }
    free(table->buckets);
    free(table);
}

enum cc_stat hashtable_add(HashTable *table, void *key, void *val)
{
    const size_t hash = table->hash(key);
    const size_t i = hash & (table->capacity - 1);
    TableEntry *replace = table->buckets[i];
    TableEntry *new_entry;

    while (replace) {
        if (table->key_cmp(replace->key, key) == 0) {
            replace->value = val;
            return CC_OK;
        }
        replace = replace->next;
    }

    new_entry = malloc(sizeof(TableEntry));
    if (!new_entry)
        return CC_ERR_ALLOC;
    new_entry->key = key;
    new_entry->value = val;
    new_entry->hash = hash;
    new_entry->next = table->buckets[i];
    table->buckets[i] = new_entry;
    table->size++;
    return CC_OK;
}

enum cc_stat hashtable_get(HashTable *table, void *key, void **out)
{
    const size_t i = table->hash(key) & (table->capacity - 1);
    TableEntry *e;
    for (e = table->buckets[i]; e; e = e->next) {
        if (e->key == key || (e->key && key && table->key_cmp(e->key, key) == 0)) {
            *out = e->value;
            return CC_OK;
        }
    }
    return CC_ERR_KEY_NOT_FOUND;
}

size_t hashtable_size(const HashTable *table)
{
    return table->size;
}
