int branch_on_garbage(int flag)
{
    int x;
    if (flag)
        x = 1;
    if (x > 0)
        return 1;
    return 0;
}
