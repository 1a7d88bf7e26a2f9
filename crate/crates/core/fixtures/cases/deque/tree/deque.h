#ifndef DEQUE_H
#define DEQUE_H

#include <stddef.h>

enum cc_stat { CC_OK = 0, CC_ERR_ALLOC = 1, CC_ERR_OUT_OF_RANGE = 8 };

typedef struct deque_s {
    size_t size;
    size_t capacity;
    size_t first;
    size_t last;
    void **buffer;
} Deque;

enum cc_stat deque_new(Deque **out);
void deque_destroy(Deque *deque);
enum cc_stat deque_add_last(Deque *deque, void *element);
enum cc_stat deque_remove_at(Deque *deque, size_t index, void **out);
size_t deque_size(const Deque *deque);

#endif
