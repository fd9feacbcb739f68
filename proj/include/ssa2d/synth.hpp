#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssa2d {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic actor-action benchmark: colored shapes (actor classes 1..3)
// translating with one of four motions (action classes 1..4) over a clip.
struct SynthConfig {
  std::int64_t T = 8;
  std::int64_t H = 32;
  std::int64_t W = 32;
  int actors_min = 1;
  int actors_max = 3;
  int size_min = 3;  // shape half-extent in pixels
  int size_max = 5;
  int speed_min = 1;  // pixels per frame
  int speed_max = 2;
  bool noise_background = false;
  std::uint64_t seed = 0;
};

constexpr int kNumActorClasses = 4;   // background + circle, square, triangle
constexpr int kNumActionClasses = 5;  // background + right, left, up, down

struct ActorDesc {
  int shape_class;   // 1..3
  int action_class;  // 1..4
  int half_extent;
  int speed;
  int cx0, cy0;  // center at frame 0
};

struct ClipRecord {
  std::int64_t T, H, W;
  std::vector<float> video;          // [T,H,W,3] in [0,1]
  std::vector<std::int32_t> actor_gt;   // [T,H,W]
  std::vector<std::int32_t> action_gt;  // [T,H,W]
  std::vector<std::uint8_t> mask_gt;    // [T,H,W], mask_gt = (actor_gt > 0)
  std::uint64_t clip_seed = 0;
  std::vector<ActorDesc> actors;
};

// Deterministic function of (cfg, clip_seed). Later-drawn actors win
// overlapping pixels; no anti-aliasing, so label/color correspondence is exact.
ClipRecord generate_clip(const SynthConfig& cfg, std::uint64_t clip_seed);

// Fixed per-class colors used by the renderer (and by frame dumps).
void actor_class_color(int cls, float rgb[3]);

}  // namespace ssa2d
