#include "cli.hpp"

int main(int argc, char** argv) { return margmc::cli::run_cli(argc, argv); }
