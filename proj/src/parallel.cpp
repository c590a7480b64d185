#include "sslab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace sslab {

int thread_count() {
    if (const char* env = std::getenv("SSLAB_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace sslab
