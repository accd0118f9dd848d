#include <vector>

#include "lbcnet/cli.hpp"

int main(int argc, char** argv) {
    return lbcnet::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
