#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssa2d/container.hpp"
#include "ssa2d/synth.hpp"

namespace ssa2d {

// Dataset on disk: clip_<id>.stc files plus a manifest of "id seed" lines.
struct DatasetEntry {
  std::int64_t id;
  std::uint64_t seed;
};

struct Dataset {
  std::string dir;
  std::vector<DatasetEntry> entries;
  std::size_t size() const { return entries.size(); }
};

void write_clip(const std::string& path, const ClipRecord& rec);
ClipRecord read_clip(const std::string& path);

std::string clip_path(const std::string& dir, std::int64_t id);

// Renders n_clips deterministic clips (clip_seed = base_seed + id) and a manifest.
void generate_dataset(const std::string& dir, const SynthConfig& cfg, std::int64_t n_clips,
                      std::uint64_t base_seed);

Dataset open_dataset(const std::string& dir);

// Deterministic shuffled batch schedule over one epoch; the final partial
// batch is emitted.
std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed);

}  // namespace ssa2d
