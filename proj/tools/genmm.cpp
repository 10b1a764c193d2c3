#include "genmm/cli.hpp"

int main(int argc, char** argv) { return genmm::cli::run(argc, argv); }
