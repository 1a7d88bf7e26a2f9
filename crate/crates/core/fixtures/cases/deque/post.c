/* Scaffolding around deque_remove_at: a power-of-two ring buffer. */
#include <stdlib.h>
#include <string.h>

#include "deque.h"

enum cc_stat deque_new(Deque **out)
{
    Deque *deque = calloc(1, sizeof(Deque));
    if (!deque)
        return CC_ERR_ALLOC;
    deque->capacity = 8;
    deque->buffer = calloc(deque->capacity, sizeof(void *));
    if (!deque->buffer) {
        free(deque);
        return CC_ERR_ALLOC;
    }
    *out = deque;
    return CC_OK;
}

void deque_destroy(Deque *deque)
{
    free(deque->buffer);
    free(deque);
}

static enum cc_stat expand(Deque *deque)
{
    size_t new_capacity = deque->capacity * 2;
    void **buffer = calloc(new_capacity, sizeof(void *));
    size_t i;
    if (!buffer)
        return CC_ERR_ALLOC;
    for (i = 0; i < deque->size; i++)
        buffer[i] = deque->buffer[(deque->first + i) & (deque->capacity - 1)];
    free(deque->buffer);
    deque->buffer = buffer;
    deque->first = 0;
    deque->last = deque->size;
    deque->capacity = new_capacity;
    return CC_OK;
}

enum cc_stat deque_add_last(Deque *deque, void *element)
{
    if (deque->size >= deque->capacity && expand(deque) != CC_OK)
        return CC_ERR_ALLOC;
    deque->buffer[deque->last] = element;
    deque->last = (deque->last + 1) & (deque->capacity - 1);
    deque->size++;
    return CC_OK;
}

enum cc_stat deque_remove_at(Deque *deque, size_t index, void **out)
{
    if (index >= deque->size)
        return CC_ERR_OUT_OF_RANGE;

    const size_t c = deque->capacity - 1;
    const size_t l = deque->last & c;
    const size_t f = deque->first & c;
    const size_t p = (deque->first + index) & c;
    void *removed  = deque->buffer[p];

    if (out)
        *out = removed;

    if (p < l) {
        memmove(&deque->buffer[p], &deque->buffer[p + 1], (l - p - 1) * sizeof(void *));
        deque->last = (l - 1) & c;
    } else {
        memmove(&deque->buffer[f + 1], &deque->buffer[f], (p - f) * sizeof(void *));
        deque->first = (f + 1) & c;
    }
    deque->size--;
    return CC_OK;
}

size_t deque_size(const Deque *deque)
{
    return deque->size;
}
