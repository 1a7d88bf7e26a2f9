void store_one(void)
{
    int *p = 0;
    *p = 1;
}
