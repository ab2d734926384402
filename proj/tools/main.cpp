#include <cstdio>

int main() {
    std::puts("flowmarket: CLI under construction");
    return 1;
}
