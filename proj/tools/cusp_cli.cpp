#include "cusp/cli.hpp"

int main(int argc, char** argv) { return cusp::cli::run(argc, argv); }
