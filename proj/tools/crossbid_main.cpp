#include <cstdio>

int main() {
    std::puts("crossbid: CLI under construction");
    return 0;
}
