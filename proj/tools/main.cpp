#include "cli.hpp"

int main(int argc, char** argv) { return vins::cli::run_cli(argc, argv); }
