#include "segdesic/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace segdesic {

namespace {

int resolve_from_env() {
    const char* env = std::getenv("SEGDESIC_THREADS");
    if (env != nullptr) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& worker_override() {
    static std::atomic<int> value{0};
    return value;
}

} // namespace

int worker_count() {
    int n = worker_override().load(std::memory_order_relaxed);
    if (n > 0) return n;
    static const int from_env = resolve_from_env();
    return from_env;
}

void set_worker_count(int n) {
    worker_override().store(n < 0 ? 0 : n, std::memory_order_relaxed);
}

} // namespace segdesic
