#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ssa2d {

struct MetricOptions {
  // Protocol assumptions, reported in the output header.
  bool miou_includes_background = false;
  // ave averages per-class accuracy over classes present in ground truth.
};

struct TaskMetrics {
  double glo = 0.0;
  double ave = 0.0;
  double miou = 0.0;
  std::vector<double> class_acc;            // -1 where class absent from gt
  std::vector<double> class_iou;            // -1 where class absent from gt and pred
  std::vector<std::int64_t> gt_count;
  std::vector<std::int64_t> pred_count;
  std::vector<std::int64_t> intersection;
  std::int64_t total_pixels = 0;
  std::int64_t correct_pixels = 0;
};

// Maps (actor, action) pairs onto a flat label space:
// 0 = both-background, 1..P = valid non-background pairs, P+1 = invalid pair.
struct PairSpace {
  std::vector<std::pair<int, int>> valid;

  static PairSpace cross_product(int num_actor, int num_action) {
    PairSpace ps;
    for (int a = 1; a < num_actor; ++a)
      for (int b = 1; b < num_action; ++b) ps.valid.emplace_back(a, b);
    return ps;
  }

  int num_labels() const { return static_cast<int>(valid.size()) + 2; }
  int invalid_label() const { return static_cast<int>(valid.size()) + 1; }
  int label(int actor, int action) const;
};

// Per-pixel segmentation metrics for one task. Labels must lie in
// [0, num_classes); class 0 is background.
TaskMetrics evaluate(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt,
                     int num_classes, const MetricOptions& opt = {});

struct MetricReport {
  TaskMetrics actor;
  TaskMetrics action;
  TaskMetrics joint;
  MetricOptions options;
  std::int64_t clip_count = 0;

  std::string to_key_value() const;
  std::string to_json() const;
};

// Full three-task evaluation; joint labels are formed through the pair space
// (an invalid predicted pair scores as an error, never as a valid class).
MetricReport evaluate_all(const std::vector<std::int32_t>& pred_actor,
                          const std::vector<std::int32_t>& pred_action,
                          const std::vector<std::int32_t>& gt_actor,
                          const std::vector<std::int32_t>& gt_action, int num_actor,
                          int num_action, const PairSpace& pairs, const MetricOptions& opt = {});

}  // namespace ssa2d
