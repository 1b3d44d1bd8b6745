#include "fedism/cli.hpp"

int main(int argc, char** argv) { return fedism::cli::main(argc, argv); }
