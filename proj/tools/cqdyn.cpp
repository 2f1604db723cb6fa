// Command-line front end. Subcommands are filled in alongside the library
// modules; see README for usage.

#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::fprintf(stderr, "cqdyn: not yet wired up\n");
    return 2;
}
