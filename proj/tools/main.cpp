#include "cli.hpp"

int main(int argc, char** argv) { return twpa::cli::run_cli(argc, argv); }
