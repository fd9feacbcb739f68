#include "ssa2d/metrics.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ssa2d {

int PairSpace::label(int actor, int action) const {
  if (actor == 0 && action == 0) return 0;
  for (std::size_t i = 0; i < valid.size(); ++i)
    if (valid[i].first == actor && valid[i].second == action) return static_cast<int>(i) + 1;
  return invalid_label();
}

TaskMetrics evaluate(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& gt,
                     int num_classes, const MetricOptions& opt) {
  if (pred.size() != gt.size()) throw std::runtime_error("evaluate: pred/gt size mismatch");
  TaskMetrics m;
  m.gt_count.assign(num_classes, 0);
  m.pred_count.assign(num_classes, 0);
  m.intersection.assign(num_classes, 0);
  m.class_acc.assign(num_classes, -1.0);
  m.class_iou.assign(num_classes, -1.0);
  m.total_pixels = static_cast<std::int64_t>(pred.size());

  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], g = gt[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes)
      throw std::runtime_error("evaluate: label out of range [0," + std::to_string(num_classes) + ")");
    ++m.gt_count[g];
    ++m.pred_count[p];
    if (p == g) {
      ++m.intersection[p];
      ++m.correct_pixels;
    }
  }
  m.glo = m.total_pixels > 0 ? static_cast<double>(m.correct_pixels) / m.total_pixels : 1.0;

  double acc_sum = 0.0;
  int acc_n = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (m.gt_count[c] > 0) {
      m.class_acc[c] = static_cast<double>(m.intersection[c]) / m.gt_count[c];
      acc_sum += m.class_acc[c];
      ++acc_n;
    }
  }
  m.ave = acc_n > 0 ? acc_sum / acc_n : 1.0;

  double iou_sum = 0.0;
  int iou_n = 0;
  const int c0 = opt.miou_includes_background ? 0 : 1;
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t uni = m.gt_count[c] + m.pred_count[c] - m.intersection[c];
    if (uni > 0) m.class_iou[c] = static_cast<double>(m.intersection[c]) / uni;
    if (c >= c0 && uni > 0) {
      iou_sum += m.class_iou[c];
      ++iou_n;
    }
  }
  m.miou = iou_n > 0 ? iou_sum / iou_n : 1.0;
  return m;
}

MetricReport evaluate_all(const std::vector<std::int32_t>& pred_actor,
                          const std::vector<std::int32_t>& pred_action,
                          const std::vector<std::int32_t>& gt_actor,
                          const std::vector<std::int32_t>& gt_action, int num_actor,
                          int num_action, const PairSpace& pairs, const MetricOptions& opt) {
  MetricReport r;
  r.options = opt;
  r.actor = evaluate(pred_actor, gt_actor, num_actor, opt);
  r.action = evaluate(pred_action, gt_action, num_action, opt);

  std::vector<std::int32_t> jp(pred_actor.size()), jg(gt_actor.size());
  for (std::size_t i = 0; i < jp.size(); ++i) {
    jp[i] = pairs.label(pred_actor[i], pred_action[i]);
    jg[i] = pairs.label(gt_actor[i], gt_action[i]);
  }
  // num_labels includes the invalid slot; it only ever appears in predictions
  // and carries no IoU weight of its own.
  TaskMetrics joint = evaluate(jp, jg, pairs.num_labels(), opt);
  {
    // recompute mIoU excluding the invalid slot from the class mean
    double iou_sum = 0.0;
    int iou_n = 0;
    const int c0 = opt.miou_includes_background ? 0 : 1;
    for (int c = c0; c < pairs.invalid_label(); ++c) {
      if (joint.class_iou[c] >= 0.0) {
        iou_sum += joint.class_iou[c];
        ++iou_n;
      }
    }
    joint.miou = iou_n > 0 ? iou_sum / iou_n : 1.0;
  }
  r.joint = joint;
  return r;
}

namespace {

void emit_task(std::ostringstream& os, const std::string& name, const TaskMetrics& m) {
  os << name << ".glo=" << m.glo << "\n";
  os << name << ".ave=" << m.ave << "\n";
  os << name << ".miou=" << m.miou << "\n";
  for (std::size_t c = 0; c < m.class_iou.size(); ++c) {
    if (m.class_acc[c] >= 0.0) os << name << ".class_acc." << c << "=" << m.class_acc[c] << "\n";
    if (m.class_iou[c] >= 0.0) os << name << ".class_iou." << c << "=" << m.class_iou[c] << "\n";
  }
  os << name << ".pixels=" << m.total_pixels << "\n";
  os << name << ".correct=" << m.correct_pixels << "\n";
}

nlohmann::json task_json(const TaskMetrics& m) {
  nlohmann::json j;
  j["glo"] = m.glo;
  j["ave"] = m.ave;
  j["miou"] = m.miou;
  j["class_acc"] = m.class_acc;
  j["class_iou"] = m.class_iou;
  j["gt_count"] = m.gt_count;
  j["pred_count"] = m.pred_count;
  j["intersection"] = m.intersection;
  j["pixels"] = m.total_pixels;
  j["correct"] = m.correct_pixels;
  return j;
}

}  // namespace

std::string MetricReport::to_key_value() const {
  std::ostringstream os;
  os.precision(10);
  os << "# protocol: miou_includes_background="
     << (options.miou_includes_background ? "true" : "false") << "\n";
  os << "# protocol: ave averages per-class accuracy over classes present in ground truth\n";
  os << "# protocol: classes absent from both prediction and ground truth are skipped\n";
  os << "clips=" << clip_count << "\n";
  emit_task(os, "actor", actor);
  emit_task(os, "action", action);
  emit_task(os, "joint", joint);
  return os.str();
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["protocol"]["miou_includes_background"] = options.miou_includes_background;
  j["protocol"]["ave_over_gt_classes"] = true;
  j["clips"] = clip_count;
  j["actor"] = task_json(actor);
  j["action"] = task_json(action);
  j["joint"] = task_json(joint);
  return j.dump(2);
}

}  // namespace ssa2d
