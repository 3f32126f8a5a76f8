#include "epg/runtime.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace epg {

namespace {

template <class T>
std::optional<T> env_number(const char* name)
{
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    T out{};
    const auto end = v + std::strlen(v);
    const auto [ptr, ec] = std::from_chars(v, end, out);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return out;
}

}  // namespace

void tune_allocator()
{
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

int thread_count()
{
    const int hw = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    const auto n = env_number<int>("EPG_THREADS");
    return n && *n > 0 ? std::min(*n, hw) : 1;
}

std::optional<std::uint64_t> seed_override() { return env_number<std::uint64_t>("EPG_SEED"); }

}  // namespace epg
