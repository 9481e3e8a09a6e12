// Placeholder entry point; subcommands land together with the pipeline.
#include <cstdio>

int main() {
  std::puts("locgan: not yet wired up");
  return 2;
}
