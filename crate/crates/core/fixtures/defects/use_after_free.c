#include <stdlib.h>

int read_after_free(void)
{
    int *p = malloc(sizeof(int));
    if (!p)
        return 0;
    *p = 7;
    free(p);
    return *p;
}
