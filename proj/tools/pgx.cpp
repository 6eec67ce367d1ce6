// Command-line entry point; subcommands are wired up in cli.hpp.
#include "pgx/cli.hpp"

int main(int argc, char** argv) { return pgx::cli_main(argc, argv); }
