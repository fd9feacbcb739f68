#pragma once

#include <atomic>
#include <cstdint>

namespace ssa2d {

// Global counters for tensor buffer allocations and arithmetic work.
// Used by the benchmark harness to check that forward cost depends only
// on configuration and input shape, never on scene content.
struct MemStats {
  static std::atomic<std::int64_t>& current_bytes() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& peak_bytes() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& op_count() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }

  static void on_alloc(std::int64_t bytes) {
    const std::int64_t cur = current_bytes().fetch_add(bytes) + bytes;
    std::int64_t peak = peak_bytes().load();
    while (cur > peak && !peak_bytes().compare_exchange_weak(peak, cur)) {
    }
  }
  static void on_free(std::int64_t bytes) { current_bytes().fetch_sub(bytes); }
  static void add_ops(std::int64_t n) { op_count().fetch_add(n); }

  // Resets the transient-peak and op counters. Live bytes are kept so the
  // peak reflects allocations made after the reset.
  static void reset_transients() {
    peak_bytes().store(current_bytes().load());
    op_count().store(0);
  }
};

}  // namespace ssa2d
