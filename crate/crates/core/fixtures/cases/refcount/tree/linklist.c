/* Scaffolding around list_insert: a sorted singly linked list with
 * per-node reference counts. */
#include <stdlib.h>

#include "linklist.h"

#define ATOMIC_READ(x) (x)

typedef node_t entry_t;

static node_t *retain_ref(refcnt_t *refcnt, node_t *node)
{
    if (node) {
        node->refs++;
        refcnt->live++;
    }
    return node;
}

static void release_ref(refcnt_t *refcnt, node_t *node)
{
    if (node) {
        node->refs--;
        refcnt->live--;
    }
}

static entry_t *create_entry(list_t *list, int value)
{
    entry_t *entry = calloc(1, sizeof(entry_t));
    if (!entry)
        return NULL;
    entry->node = entry;
    entry->refcnt = &list->refcnt;
    entry->value = value;
    return entry;
}

static void destroy_entry(entry_t *entry)
{
    free(entry);
}

void list_init(list_t *list)
{
    list->head.next = NULL;
    list->head.node = &list->head;
    list->head.refcnt = &list->refcnt;
    list->head.refs = 0;
    list->refcnt.live = 0;
    list->closed = 0;
}

void list_destroy(list_t *list)
{
    node_t *n = list->head.next;
    while (n) {
        node_t *next = n->next;
        destroy_entry(n);
        n = next;
    }
    list->head.next = NULL;
}

int list_count(const list_t *list)
{
    int n = 0;
    const node_t *p;
    for (p = list->head.next; p; p = p->next)
        n++;
    return n;
}

/* First node whose value is not below `value`, or the head as a stand-in
 * for the end of the list. Returned retained. */
static node_t *find_next(list_t *list, int value)
{
    node_t *n = list->head.next;
    while (n && n->value < value)
        n = n->next;
    return retain_ref(&list->refcnt, n ? n : &list->head);
}

/* Predecessor of `next`, retained; NULL once the list is closed. */
static node_t *find_prev(list_t *list, node_t *next)
{
    node_t *p = &list->head;
    if (list->closed)
        return NULL;
    while (p->next && p->next != next)
        p = p->next;
    return retain_ref(&list->refcnt, p);
}

/* Step `prev` forward after a concurrent change. The old reference is the
 * caller's to drop. */
static node_t *help_insert(node_t *prev, node_t *next)
{
    node_t *p = ATOMIC_READ(prev->next);
    (void)next;
    return retain_ref(prev->refcnt, p);
}

int list_insert(list_t *list, int value)
{
    entry_t *entry = create_entry(list, value);
    node_t *next, *prev;

    if (!entry)
        return -1;
    next = find_next(list, value);
    prev = find_prev(list, next == &list->head ? NULL : next);

    if (!prev) {
        destroy_entry(entry);
        return -1;
    }
    while (1) {
        if (ATOMIC_READ(prev->next) != (next == &list->head ? NULL : ATOMIC_READ(next->node))) {
            prev = help_insert(prev, next);
            continue;
        }
        entry->next = prev->next;
        prev->next = entry;
        release_ref(prev->refcnt, ATOMIC_READ(prev->node));
        release_ref(next->refcnt, ATOMIC_READ(next->node));
        return 0;
    }
}
