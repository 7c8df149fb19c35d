#include "ltx/cli.hpp"

int main(int argc, char** argv) { return ltx::cli::run(argc, argv); }
