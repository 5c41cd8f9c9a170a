#include <cstdio>

int main() {
  std::puts("xggm cli: not wired up yet");
  return 0;
}
