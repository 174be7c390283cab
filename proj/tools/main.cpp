#include "cli.hpp"

int main(int argc, char** argv) { return seqdi::cli::run_cli(argc, argv); }
