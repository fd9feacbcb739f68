#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ssa2d/container.hpp"
#include "ssa2d/dataset.hpp"
#include "ssa2d/losses.hpp"
#include "ssa2d/metrics.hpp"
#include "ssa2d/network.hpp"
#include "ssa2d/optim.hpp"

namespace ssa2d {

struct TrainSchedule {
  // Two-phase schedule: initial-rate epochs then fine-tune epochs.
  int phase1_epochs = 5;
  int phase2_epochs = 6;
  double lr_phase1 = 1e-4;
  double lr_phase2 = 1e-5;
  std::size_t batch_size = 2;
  int accumulation_steps = 1;
  std::int64_t max_steps = 0;  // 0 = run the full schedule
  std::int64_t checkpoint_every = 0;
  std::int64_t eval_every = 0;
  double grad_clip_norm = 10.0;
  std::uint64_t shuffle_seed = 0;
};

struct StepRecord {
  std::int64_t step;
  double l_actor, l_action, l_mask, total, lr;
};

inline std::string format_step(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "step=%lld l_actor=%.9g l_action=%.9g l_mask=%.9g total=%.9g lr=%.9g",
                static_cast<long long>(r.step), r.l_actor, r.l_action, r.l_mask, r.total, r.lr);
  return std::string(buf);
}

template <class S>
Tensor<S> labels_to_onehot(const std::vector<std::int32_t>& labels, std::int64_t T, std::int64_t H,
                           std::int64_t W, int num_classes) {
  Tensor<S> t(Shape{T, H, W, num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) throw std::runtime_error("labels_to_onehot: label out of range");
    t.at(static_cast<std::int64_t>(i) * num_classes + c) = S(1);
  }
  return t;
}

template <class S>
Tensor<S> mask_to_tensor(const std::vector<std::uint8_t>& mask, std::int64_t T, std::int64_t H,
                         std::int64_t W) {
  Tensor<S> t(Shape{T, H, W, 1});
  for (std::size_t i = 0; i < mask.size(); ++i) t.at(static_cast<std::int64_t>(i)) = mask[i] ? S(1) : S(0);
  return t;
}

template <class S>
Tensor<S> video_to_tensor(const ClipRecord& rec) {
  return Tensor<S>(Shape{rec.T, rec.H, rec.W, 3},
                   std::vector<S>(rec.video.begin(), rec.video.end()));
}

// Per-pixel argmax over the channel axis; ties go to the lowest class index.
template <class S>
std::vector<std::int32_t> argmax_channels(const Tensor<S>& probs) {
  const std::int64_t C = probs.channels();
  const std::int64_t rows = probs.numel() / C;
  std::vector<std::int32_t> out(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* p = probs.ptr() + r * C;
    int best = 0;
    for (std::int64_t c = 1; c < C; ++c)
      if (p[c] > p[best]) best = static_cast<int>(c);
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

template <class S>
void save_checkpoint(const std::string& path, SSA2DModel<S>& model) {
  std::vector<ContainerTensor> ts;
  for (auto& [name, p] : model.parameters()) {
    std::vector<float> data(p->data->begin(), p->data->end());
    ts.push_back(ContainerTensor::make_f32(name, p->shape, std::move(data)));
  }
  write_container(path, ts);
}

template <class S>
void load_checkpoint(const std::string& path, SSA2DModel<S>& model) {
  const auto ts = read_container(path);
  for (auto& [name, p] : model.parameters()) {
    const auto& t = find_tensor(ts, name);
    if (t.dims != p->shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + name + "'");
    std::copy(t.f32.begin(), t.f32.end(), p->data->begin());
  }
}

template <class S>
struct ClipLosses {
  Tensor<S> l_actor, l_action, l_mask, total;
};

// Losses for one clip. Teacher forcing substitutes the ground-truth
// STU-Mask for the predicted one inside the forward pass.
template <class S>
ClipLosses<S> clip_losses(Tape<S>* tape, SSA2DModel<S>& model, const ClipRecord& rec,
                          const LossWeights<S>& w, bool teacher_forcing) {
  const auto& cfg = model.config();
  Tensor<S> v = video_to_tensor<S>(rec);
  Tensor<S> teacher = mask_to_tensor<S>(rec.mask_gt, rec.T, rec.H, rec.W);
  DetectionOutput<S> out = model.forward(tape, v, teacher_forcing ? &teacher : nullptr);

  Tensor<S> actor_gt = labels_to_onehot<S>(rec.actor_gt, rec.T, rec.H, rec.W, cfg.c_actor);
  Tensor<S> action_gt = labels_to_onehot<S>(rec.action_gt, rec.T, rec.H, rec.W, cfg.c_action);
  Tensor<S> mask_fg = slice_channels(tape, out.stu_mask, 1, 2);

  ClipLosses<S> l;
  l.l_actor = actor_loss(tape, out.actor_d, actor_gt, w.dice_epsilon);
  l.l_action = action_loss(tape, out.action_d, action_gt, w.dice_epsilon);
  l.l_mask = mask_loss(tape, mask_fg, teacher, w.dice_epsilon);
  l.total = total_loss(tape, l.l_actor, l.l_action, l.l_mask, w);
  return l;
}

struct TrainResult {
  std::vector<StepRecord> log;
  std::string checkpoint_path;
};

// Joint three-branch training with teacher-forced STU-Mask. Deterministic
// given the schedule's shuffle seed and the model's init seed.
template <class S>
TrainResult train(SSA2DModel<S>& model, const std::vector<ClipRecord>& clips,
                  const TrainSchedule& sched, const LossWeights<S>& w,
                  const std::string& out_dir = "", std::ostream* log_stream = nullptr) {
  if (clips.empty()) throw std::runtime_error("train: empty dataset");
  typename AdamOptimizer<S>::Hyper hyper;
  hyper.lr = static_cast<S>(sched.lr_phase1);
  hyper.grad_clip_norm = static_cast<S>(sched.grad_clip_norm);
  AdamOptimizer<S> opt(model.parameters(), hyper);

  TrainResult result;
  std::int64_t step = 0;
  const int total_epochs = sched.phase1_epochs + sched.phase2_epochs;
  bool done = false;
  int accum = 0;

  for (int epoch = 0; epoch < total_epochs && !done; ++epoch) {
    opt.set_lr(static_cast<S>(epoch < sched.phase1_epochs ? sched.lr_phase1 : sched.lr_phase2));
    const auto batches =
        batch_schedule(clips.size(), sched.batch_size, sched.shuffle_seed + static_cast<std::uint64_t>(epoch));
    for (const auto& batch : batches) {
      Tape<S> tape;
      double a_actor = 0, a_action = 0, a_mask = 0;
      std::vector<Tensor<S>> totals;
      for (std::size_t idx : batch) {
        ClipLosses<S> l = clip_losses(&tape, model, clips[idx], w, /*teacher_forcing=*/true);
        const double la = l.l_actor.item(), lb = l.l_action.item(), lm = l.l_mask.item();
        if (!std::isfinite(la)) throw std::runtime_error("train: non-finite actor loss at step " + std::to_string(step + 1));
        if (!std::isfinite(lb)) throw std::runtime_error("train: non-finite action loss at step " + std::to_string(step + 1));
        if (!std::isfinite(lm)) throw std::runtime_error("train: non-finite mask loss at step " + std::to_string(step + 1));
        a_actor += la;
        a_action += lb;
        a_mask += lm;
        totals.push_back(l.total);
      }
      const S inv = S(1) / static_cast<S>(batch.size());
      Tensor<S> batch_loss = weighted_sum<S>(&tape, totals, std::vector<S>(totals.size(), inv));
      tape.backward(batch_loss);

      ++accum;
      if (accum >= sched.accumulation_steps) {
        opt.clip_gradients();
        opt.step();
        opt.zero_grad();
        accum = 0;
      }

      ++step;
      StepRecord rec;
      rec.step = step;
      rec.l_actor = a_actor / static_cast<double>(batch.size());
      rec.l_action = a_action / static_cast<double>(batch.size());
      rec.l_mask = a_mask / static_cast<double>(batch.size());
      rec.total = static_cast<double>(w.w_actor) * rec.l_actor +
                  static_cast<double>(w.w_action) * rec.l_action +
                  static_cast<double>(w.w_mask) * rec.l_mask;
      rec.lr = static_cast<double>(opt.lr());
      result.log.push_back(rec);
      if (log_stream) (*log_stream) << format_step(rec) << "\n";

      if (!out_dir.empty() && sched.checkpoint_every > 0 && step % sched.checkpoint_every == 0)
        save_checkpoint(out_dir + "/ckpt_step" + std::to_string(step) + ".stc", model);

      if (sched.max_steps > 0 && step >= sched.max_steps) {
        done = true;
        break;
      }
    }
  }
  if (!out_dir.empty()) {
    result.checkpoint_path = out_dir + "/checkpoint.stc";
    save_checkpoint(result.checkpoint_path, model);
  }
  return result;
}

struct InferenceResult {
  std::vector<std::int32_t> actor_pred, action_pred, mask_pred;  // [T,H,W]
};

// Forward without teacher mask; per-pixel argmax at input resolution.
template <class S>
InferenceResult infer(SSA2DModel<S>& model, const ClipRecord& clip) {
  Tensor<S> v = video_to_tensor<S>(clip);
  DetectionOutput<S> out = model.forward(nullptr, v, nullptr);
  InferenceResult r;
  r.actor_pred = argmax_channels(out.actor_d);
  r.action_pred = argmax_channels(out.action_d);
  r.mask_pred = argmax_channels(out.stu_mask);
  return r;
}

struct BenchmarkRow {
  int actor_count;
  double median_ms_per_frame;
  std::int64_t op_count;
  std::int64_t peak_transient_bytes;
};

// Runs forward-only inference for clips with varying actor counts and
// reports instrumented cost. The claim under test: cost is a function of
// configuration and input shape only.
template <class S>
std::vector<BenchmarkRow> benchmark(SSA2DModel<S>& model, const SynthConfig& synth_cfg,
                                    const std::vector<int>& actor_counts, int repeats) {
  std::vector<BenchmarkRow> rows;
  for (int count : actor_counts) {
    SynthConfig sc = synth_cfg;
    sc.actors_min = sc.actors_max = count;
    ClipRecord clip = generate_clip(sc, 1234);
    Tensor<S> v = video_to_tensor<S>(clip);

    model.forward(nullptr, v, nullptr);  // warm-up

    MemStats::reset_transients();
    model.forward(nullptr, v, nullptr);
    BenchmarkRow row;
    row.actor_count = count;
    row.op_count = MemStats::op_count().load();
    row.peak_transient_bytes = MemStats::peak_bytes().load() - MemStats::current_bytes().load();

    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      model.forward(nullptr, v, nullptr);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    row.median_ms_per_frame = median / static_cast<double>(clip.T);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ssa2d
