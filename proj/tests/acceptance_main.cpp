#include <cstring>
#include <string>

#include "cableperc/acceptance.hpp"

int main(int argc, char** argv) {
    bool quick = false;
    int only = -1;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--quick")) quick = true;
        if (!std::strcmp(argv[i], "--only") && i + 1 < argc) only = std::atoi(argv[++i]);
    }
    auto results = cableperc::run_acceptance(quick, only);
    return cableperc::report_acceptance(results) == 0 ? 0 : 1;
}
