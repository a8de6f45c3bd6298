#include "bem/commands.hpp"

int main(int argc, char** argv) { return bem::cli::run_cli(argc, argv); }
