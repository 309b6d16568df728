#include "cli.hpp"

int main(int argc, char** argv) { return trimodal::cli::run_cli(argc, argv); }
