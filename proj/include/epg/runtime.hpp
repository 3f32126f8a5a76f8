#pragma once

#include <cstdint>
#include <optional>

namespace epg {

// Keeps freed tensor buffers in the heap instead of returning them to the
// kernel; training allocates and drops the same large blocks every step.
void tune_allocator();

// EPG_THREADS, clamped to [1, hardware threads]; 1 when unset or invalid.
int thread_count();

// EPG_SEED when set to a valid unsigned integer.
std::optional<std::uint64_t> seed_override();

}  // namespace epg
