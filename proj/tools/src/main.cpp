#include "hkflow_cli/commands.hpp"

int main(int argc, char** argv) { return hkflow::cli::run_cli(argc, argv); }
