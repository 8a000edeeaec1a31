#include "dnm/cli.hpp"

int main(int argc, char** argv) { return dnm::cli::run(argc, argv); }
