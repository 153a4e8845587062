#include "cli.hpp"
#include "promptdt/runtime.hpp"

int main(int argc, char** argv) {
  promptdt::tune_allocator();
  return promptdt::cli::run(argc, argv);
}
