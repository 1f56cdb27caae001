/*@ ensures \result == 2 * x; */
int twice(int x)
{
    return x + x;
}

/*@ ensures \result == 2 * y; */
int g(int y)
{
    int r = twice(y);
    /*@ assert r == 2 * y; */
    return r;
}
