#pragma once

// Placeholder during bring-up; the full subcommand set lands with the CLI.
#include <cstdio>

namespace pgx {

inline int cli_main(int, char**) {
    std::puts("pgx: not yet wired");
    return 1;
}

} // namespace pgx
