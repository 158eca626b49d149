#include <vector>

#include "fedtrack/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fedtrack::cli_main(args);
}
