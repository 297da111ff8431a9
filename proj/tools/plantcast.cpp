#include "plantcast/cli.hpp"

int main(int argc, char** argv) { return plantcast::cli::cli_main(argc, argv); }
