#ifndef HASHTABLE_H
#define HASHTABLE_H

#include <stddef.h>

enum cc_stat { CC_OK = 0, CC_ERR_ALLOC = 1, CC_ERR_KEY_NOT_FOUND = 6 };

typedef struct table_entry_s {
    void *key;
    void *value;
    size_t hash;
    struct table_entry_s *next;
} TableEntry;

typedef struct hashtable_s {
    size_t capacity;
    size_t size;
    TableEntry **buckets;
    size_t (*hash)(const void *key);
    int (*key_cmp)(const void *k1, const void *k2);
} HashTable;

enum cc_stat hashtable_new(HashTable **out);
void hashtable_destroy(HashTable *table);
enum cc_stat hashtable_add(HashTable *table, void *key, void *val);
enum cc_stat hashtable_get(HashTable *table, void *key, void **out);
size_t hashtable_size(const HashTable *table);

#endif
