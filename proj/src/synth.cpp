#include "ssa2d/synth.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace ssa2d {

namespace {

// motion unit vectors per action class: right, left, up, down
constexpr int kDx[5] = {0, 1, -1, 0, 0};
constexpr int kDy[5] = {0, 0, 0, -1, 1};

bool inside_shape(int shape_class, int dx, int dy, int r) {
  switch (shape_class) {
    case 1:  // circle
      return dx * dx + dy * dy <= r * r;
    case 2:  // square
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case 3: {  // upward isoceles triangle
      if (dy < -r || dy > r) return false;
      const int half = (dy + r) / 2;
      return std::abs(dx) <= half;
    }
    default:
      return false;
  }
}

}  // namespace

void actor_class_color(int cls, float rgb[3]) {
  switch (cls) {
    case 1:
      rgb[0] = 1.0f; rgb[1] = 0.2f; rgb[2] = 0.2f;
      break;
    case 2:
      rgb[0] = 0.2f; rgb[1] = 1.0f; rgb[2] = 0.2f;
      break;
    case 3:
      rgb[0] = 0.2f; rgb[1] = 0.2f; rgb[2] = 1.0f;
      break;
    default:
      rgb[0] = rgb[1] = rgb[2] = 0.0f;
      break;
  }
}

ClipRecord generate_clip(const SynthConfig& cfg, std::uint64_t clip_seed) {
  if (cfg.T < 1 || cfg.H < 4 || cfg.W < 4) throw ConfigError("generate_clip: degenerate volume");
  if (cfg.size_min < 1 || cfg.size_min > cfg.size_max) throw ConfigError("generate_clip: bad size range");
  if (cfg.speed_min < 0 || cfg.speed_min > cfg.speed_max) throw ConfigError("generate_clip: bad speed range");
  if (cfg.actors_min < 0 || cfg.actors_min > cfg.actors_max) throw ConfigError("generate_clip: bad actor range");
  if (2 * cfg.size_min + 1 > std::min(cfg.H, cfg.W)) throw ConfigError("generate_clip: shape cannot fit in frame");

  std::seed_seq sseq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                     static_cast<std::uint32_t>(clip_seed), static_cast<std::uint32_t>(clip_seed >> 32)};
  std::mt19937 rng(sseq);

  ClipRecord rec;
  rec.T = cfg.T;
  rec.H = cfg.H;
  rec.W = cfg.W;
  rec.clip_seed = clip_seed;
  const std::int64_t pix = cfg.T * cfg.H * cfg.W;
  rec.video.assign(pix * 3, 0.0f);
  rec.actor_gt.assign(pix, 0);
  rec.action_gt.assign(pix, 0);
  rec.mask_gt.assign(pix, 0);

  if (cfg.noise_background) {
    std::uniform_real_distribution<float> bg(0.0f, 0.35f);
    for (auto& v : rec.video) v = bg(rng);
  } else {
    std::fill(rec.video.begin(), rec.video.end(), 0.5f);
  }

  std::uniform_int_distribution<int> n_actors_d(cfg.actors_min, cfg.actors_max);
  const int n_actors = n_actors_d(rng);

  std::uniform_int_distribution<int> shape_d(1, 3);
  std::uniform_int_distribution<int> action_d(1, 4);
  std::uniform_int_distribution<int> size_d(cfg.size_min, cfg.size_max);

  for (int a = 0; a < n_actors; ++a) {
    ActorDesc d;
    d.shape_class = shape_d(rng);
    d.action_class = action_d(rng);
    d.half_extent = size_d(rng);

    const int travel_axis = (kDx[d.action_class] != 0) ? static_cast<int>(cfg.W)
                                                       : static_cast<int>(cfg.H);
    const int slack = travel_axis - 1 - 2 * d.half_extent;
    const int steps = static_cast<int>(cfg.T) - 1;
    const int v_fit = steps > 0 ? slack / steps : cfg.speed_max;
    if (v_fit < cfg.speed_min)
      throw ConfigError("generate_clip: no speed in range keeps the shape inside the frame");
    std::uniform_int_distribution<int> speed_dd(cfg.speed_min, std::min(cfg.speed_max, v_fit));
    d.speed = speed_dd(rng);

    const int r = d.half_extent;
    const int travel = d.speed * steps;
    int x_lo = r, x_hi = static_cast<int>(cfg.W) - 1 - r;
    int y_lo = r, y_hi = static_cast<int>(cfg.H) - 1 - r;
    if (kDx[d.action_class] > 0) x_hi -= travel;
    if (kDx[d.action_class] < 0) x_lo += travel;
    if (kDy[d.action_class] > 0) y_hi -= travel;
    if (kDy[d.action_class] < 0) y_lo += travel;
    if (x_lo > x_hi || y_lo > y_hi)
      throw ConfigError("generate_clip: shape trajectory cannot fit in frame");
    d.cx0 = std::uniform_int_distribution<int>(x_lo, x_hi)(rng);
    d.cy0 = std::uniform_int_distribution<int>(y_lo, y_hi)(rng);
    rec.actors.push_back(d);

    float rgb[3];
    actor_class_color(d.shape_class, rgb);
    for (std::int64_t t = 0; t < cfg.T; ++t) {
      const int cx = d.cx0 + kDx[d.action_class] * d.speed * static_cast<int>(t);
      const int cy = d.cy0 + kDy[d.action_class] * d.speed * static_cast<int>(t);
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!inside_shape(d.shape_class, dx, dy, r)) continue;
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || x >= cfg.W || y < 0 || y >= cfg.H)
            throw ConfigError("generate_clip: actor escaped the frame");
          const std::int64_t p = (t * cfg.H + y) * cfg.W + x;
          rec.actor_gt[p] = d.shape_class;
          rec.action_gt[p] = d.action_class;
          rec.mask_gt[p] = 1;
          rec.video[p * 3 + 0] = rgb[0];
          rec.video[p * 3 + 1] = rgb[1];
          rec.video[p * 3 + 2] = rgb[2];
        }
      }
    }
  }
  return rec;
}

}  // namespace ssa2d
