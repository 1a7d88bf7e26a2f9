#ifndef LINKLIST_H
#define LINKLIST_H

typedef struct {
    int live;
} refcnt_t;

typedef struct node_s {
    struct node_s *next;
    /* Points back at the node itself; references are taken on this. */
    struct node_s *node;
    refcnt_t *refcnt;
    int refs;
    int value;
} node_t;

typedef struct {
    node_t head;
    refcnt_t refcnt;
    int closed;
} list_t;

void list_init(list_t *list);
void list_destroy(list_t *list);
int list_insert(list_t *list, int value);
int list_count(const list_t *list);

#endif
