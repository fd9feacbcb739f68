#include "ssa2d/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace ssa2d {

void write_clip(const std::string& path, const ClipRecord& rec) {
  std::vector<ContainerTensor> ts;
  ts.push_back(ContainerTensor::make_f32("video", {rec.T, rec.H, rec.W, 3}, rec.video));
  ts.push_back(ContainerTensor::make_i32("actor_gt", {rec.T, rec.H, rec.W}, rec.actor_gt));
  ts.push_back(ContainerTensor::make_i32("action_gt", {rec.T, rec.H, rec.W}, rec.action_gt));
  ts.push_back(ContainerTensor::make_u8("mask_gt", {rec.T, rec.H, rec.W}, rec.mask_gt));
  write_container(path, ts);
}

ClipRecord read_clip(const std::string& path) {
  const auto ts = read_container(path);
  const auto& video = find_tensor(ts, "video");
  if (video.dims.size() != 4 || video.dims[3] != 3)
    throw std::runtime_error("read_clip: bad video shape in " + path);
  ClipRecord rec;
  rec.T = video.dims[0];
  rec.H = video.dims[1];
  rec.W = video.dims[2];
  rec.video = video.f32;
  rec.actor_gt = find_tensor(ts, "actor_gt").i32;
  rec.action_gt = find_tensor(ts, "action_gt").i32;
  rec.mask_gt = find_tensor(ts, "mask_gt").u8;
  const std::size_t pix = static_cast<std::size_t>(rec.T * rec.H * rec.W);
  if (rec.actor_gt.size() != pix || rec.action_gt.size() != pix || rec.mask_gt.size() != pix)
    throw std::runtime_error("read_clip: label volume size mismatch in " + path);
  return rec;
}

std::string clip_path(const std::string& dir, std::int64_t id) {
  return dir + "/clip_" + std::to_string(id) + ".stc";
}

void generate_dataset(const std::string& dir, const SynthConfig& cfg, std::int64_t n_clips,
                      std::uint64_t base_seed) {
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
  if (!manifest) throw std::runtime_error("generate_dataset: cannot write manifest in " + dir);
  for (std::int64_t id = 0; id < n_clips; ++id) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(id);
    write_clip(clip_path(dir, id), generate_clip(cfg, seed));
    manifest << id << " " << seed << "\n";
  }
}

Dataset open_dataset(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw std::runtime_error("open_dataset: missing manifest in " + dir);
  Dataset ds;
  ds.dir = dir;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    DatasetEntry e{};
    if (!(is >> e.id >> e.seed)) throw std::runtime_error("open_dataset: bad manifest line: " + line);
    if (!fs::exists(clip_path(dir, e.id)))
      throw std::runtime_error("open_dataset: missing clip file for id " + std::to_string(e.id));
    ds.entries.push_back(e);
  }
  return ds;
}

std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw std::runtime_error("batch_schedule: batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + batch_size));
  }
  return batches;
}

}  // namespace ssa2d
