#include <cstdio>

int main() {
  std::puts("pqmotion CLI placeholder");
  return 0;
}
