#include "cli_commands.hpp"

int main(int argc, char** argv) { return hierduals::cli::run(argc, argv); }
