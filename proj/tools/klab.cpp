#include <cstdio>
int main() { std::puts("klab: scaffolding"); return 0; }
