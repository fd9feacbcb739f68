#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssa2d/layers.hpp"
#include "ssa2d/losses.hpp"
#include "ssa2d/synth.hpp"

namespace ssa2d {

// Architecture profile: stride schedules, channel widths, class counts and
// the four ablation toggles.
struct NetworkConfig {
  enum class Profile { kToy, kPaper };

  Profile profile = Profile::kToy;
  std::int64_t T = 8, H = 32, W = 32;
  int c_actor = kNumActorClasses;
  int c_action = kNumActionClasses;
  std::int64_t c_ap = 16;

  std::vector<Triple> encoder_strides;
  std::vector<std::int64_t> encoder_channels;
  std::vector<Triple> decoder_strides;       // actor and action branches
  std::vector<Triple> decoder_strides_mask;  // STU-Mask branch
  std::int64_t decoder_channels = 16;

  std::vector<std::int64_t> atrous_rates{1, 2};
  std::int64_t atrous_branch_channels = 8;

  bool ap_infusion = true;
  bool ssa_masking = true;
  bool atrous = true;
  bool multi_scale = true;
  bool ap_add_mode = false;       // feature addition instead of concatenation
  bool action_sigmoid = false;    // per-channel sigmoid action head
  double mask_threshold = -1.0;   // < 0: use the raw foreground probability

  std::uint64_t seed = 0;

  static NetworkConfig toy(std::int64_t T = 8, std::int64_t H = 32, std::int64_t W = 32,
                           int c_actor = kNumActorClasses, int c_action = kNumActionClasses) {
    NetworkConfig c;
    c.profile = Profile::kToy;
    c.T = T;
    c.H = H;
    c.W = W;
    c.c_actor = c_actor;
    c.c_action = c_action;
    c.encoder_strides = {{1, 2, 2}, {2, 2, 2}};
    c.encoder_channels = {16, 32};
    c.decoder_strides = {{2, 2, 2}};
    c.decoder_strides_mask = {{2, 2, 2}, {1, 2, 2}};
    return c;
  }

  // 16x224x224 input, encoder output T/4 x H/16 x W/16 = 4x14x14,
  // actor/action decoder 8x56x56, mask decoder 8x112x112.
  static NetworkConfig paper(std::int64_t channels = 16) {
    NetworkConfig c;
    c.profile = Profile::kPaper;
    c.T = 16;
    c.H = 224;
    c.W = 224;
    c.encoder_strides = {{1, 2, 2}, {2, 2, 2}, {2, 2, 2}, {1, 2, 2}};
    c.encoder_channels = {channels, channels, 2 * channels, 2 * channels};
    c.decoder_strides = {{2, 2, 2}, {1, 2, 2}};
    c.decoder_strides_mask = {{2, 2, 2}, {1, 2, 2}, {1, 2, 2}};
    c.decoder_channels = channels;
    return c;
  }

  Triple encoder_shape() const {
    Triple s{T, H, W};
    for (const auto& st : encoder_strides)
      for (int a = 0; a < 3; ++a) s[a] /= st[a];
    return s;
  }
  Triple branch_shape(const std::vector<Triple>& strides) const {
    Triple s = encoder_shape();
    for (const auto& st : strides)
      for (int a = 0; a < 3; ++a) s[a] *= st[a];
    return s;
  }

  void validate() const {
    if (encoder_strides.size() != encoder_channels.size() || encoder_strides.empty())
      throw ConfigError("config: encoder stride/channel schedules must be non-empty and equal length");
    Triple s{T, H, W};
    for (const auto& st : encoder_strides)
      for (int a = 0; a < 3; ++a) {
        if (st[a] < 1 || s[a] % st[a] != 0)
          throw ConfigError("config: input shape " + std::to_string(s[a]) +
                            " not divisible by encoder stride " + std::to_string(st[a]));
        s[a] /= st[a];
      }
    auto check_branch = [&](const std::vector<Triple>& strides, const char* name) {
      Triple b = encoder_shape();
      for (const auto& st : strides)
        for (int a = 0; a < 3; ++a) b[a] *= st[a];
      if (T % b[0] != 0 || H % b[1] != 0 || W % b[2] != 0)
        throw ConfigError(std::string("config: ") + name +
                          " branch shape does not divide the input shape");
    };
    check_branch(decoder_strides, "actor/action");
    check_branch(decoder_strides_mask, "mask");
    if (c_actor < 2 || c_action < 2) throw ConfigError("config: class counts must be >= 2");
    if (c_ap < 1 || decoder_channels < 1) throw ConfigError("config: channel widths must be >= 1");
    if (atrous && atrous_rates.empty()) throw ConfigError("config: atrous toggle needs rates");
  }
};

template <class S>
struct DetectionOutput {
  Tensor<S> actor_d;   // [T,H,W,C_actor], channel-softmaxed
  Tensor<S> action_d;  // [T,H,W,C_action]
  Tensor<S> stu_mask;  // [T,H,W,2]
  Tensor<S> f_mask;    // foreground map at the mask decoder resolution, [.,.,.,1]
};

template <class S>
class SSA2DModel {
 public:
  struct DecoderBranch {
    std::optional<AtrousBlock<S>> atrous;
    struct Stage {
      Conv3DParams<S> deconv;
      Conv3DParams<S> fuse;
      int skip_index;  // encoder stage providing the skip, -1 for none
    };
    std::vector<Stage> stages;
    std::optional<Conv3DParams<S>> pyramid_fuse;
  };

  explicit SSA2DModel(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    std::mt19937 rng(static_cast<std::uint32_t>(cfg.seed * 0x9e3779b9ull + 1));

    std::int64_t in_ch = 3;
    for (std::size_t i = 0; i < cfg.encoder_strides.size(); ++i) {
      encoder_.push_back(make_conv_params<S>({3, 3, 3}, in_ch, cfg.encoder_channels[i],
                                             cfg.encoder_strides[i], {1, 1, 1}, rng));
      in_ch = cfg.encoder_channels[i];
    }

    actor_branch_ = make_branch(cfg.decoder_strides, rng);
    action_branch_ = make_branch(cfg.decoder_strides, rng);
    mask_branch_ = make_branch(cfg.decoder_strides_mask, rng);

    const std::int64_t dc = cfg.decoder_channels;
    ap_head_ = make_conv_params<S>({1, 1, 1}, dc, cfg.c_ap, {1, 1, 1}, {0, 0, 0}, rng);
    actor_head_ = make_conv_params<S>({1, 1, 1}, cfg.c_ap, cfg.c_actor, {1, 1, 1}, {0, 0, 0}, rng);
    mask_head_ = make_conv_params<S>({1, 1, 1}, dc, 2, {1, 1, 1}, {0, 0, 0}, rng);

    if (cfg.ap_infusion && !cfg.ap_add_mode) {
      infusion_ = make_conv_params<S>({3, 3, 3}, dc + cfg.c_ap, dc, {1, 1, 1}, {1, 1, 1}, rng);
    } else {
      if (cfg.ap_infusion && cfg.ap_add_mode)
        ap_project_ = make_conv_params<S>({1, 1, 1}, cfg.c_ap, dc, {1, 1, 1}, {0, 0, 0}, rng);
      infusion_ = make_conv_params<S>({3, 3, 3}, dc, dc, {1, 1, 1}, {1, 1, 1}, rng);
    }
    action_head_ = make_conv_params<S>({1, 1, 1}, cfg.ssa_masking ? 2 * dc : dc, cfg.c_action,
                                       {1, 1, 1}, {0, 0, 0}, rng);
  }

  const NetworkConfig& config() const { return cfg_; }

  std::pair<Tensor<S>, std::vector<Tensor<S>>> encoder_forward(Tape<S>* tape,
                                                               const Tensor<S>& v) const {
    if (v.shape != Shape{cfg_.T, cfg_.H, cfg_.W, 3})
      throw ConfigError("encoder_forward: input shape " + shape_str(v.shape) +
                        " does not match configured clip shape");
    std::vector<Tensor<S>> skips;
    Tensor<S> x = v;
    for (const auto& layer : encoder_) {
      x = relu(tape, conv3d(tape, x, layer));
      skips.push_back(x);
    }
    return {x, skips};
  }

  Tensor<S> decoder_forward(Tape<S>* tape, const DecoderBranch& branch, const Tensor<S>& f_enc,
                            const std::vector<Tensor<S>>& skips) const {
    Tensor<S> x = f_enc;
    if (branch.atrous) x = relu(tape, branch.atrous->forward(tape, x));
    std::vector<Tensor<S>> stage_outputs;
    for (const auto& stage : branch.stages) {
      x = relu(tape, deconv3d(tape, x, stage.deconv));
      if (stage.skip_index >= 0) {
        Tensor<S> skip = resize_nearest(tape, skips[static_cast<std::size_t>(stage.skip_index)],
                                        {x.shape[0], x.shape[1], x.shape[2]});
        x = concat_channels(tape, x, skip);
      }
      x = relu(tape, conv3d(tape, x, stage.fuse));
      stage_outputs.push_back(x);
    }
    if (branch.pyramid_fuse && stage_outputs.size() > 1) {
      // upsample every coarser stage output to the finest stage and merge
      Tensor<S> cat = stage_outputs.back();
      const Triple target{cat.shape[0], cat.shape[1], cat.shape[2]};
      for (std::size_t i = 0; i + 1 < stage_outputs.size(); ++i) {
        Tensor<S> up = resize_nearest(tape, stage_outputs[i], target);
        cat = concat_channels(tape, cat, up);
      }
      x = relu(tape, conv3d(tape, cat, *branch.pyramid_fuse));
    }
    return x;
  }

  // f_act = Conv3D(<f_a, f_ap>); with the toggle off the kernel sees f_a alone.
  Tensor<S> ap_infusion(Tape<S>* tape, const Tensor<S>& f_a, const Tensor<S>& f_ap) const {
    if (!cfg_.ap_infusion) return relu(tape, conv3d(tape, f_a, infusion_));
    if (f_a.shape[0] != f_ap.shape[0] || f_a.shape[1] != f_ap.shape[1] ||
        f_a.shape[2] != f_ap.shape[2])
      throw ShapeError("ap_infusion: misaligned feature volumes");
    if (cfg_.ap_add_mode) {
      Tensor<S> proj = conv3d(tape, f_ap, *ap_project_);
      return relu(tape, conv3d(tape, add(tape, f_a, proj), infusion_));
    }
    return relu(tape, conv3d(tape, concat_channels(tape, f_a, f_ap), infusion_));
  }

  // f'' = <f_act * f_mask, f_act>; identity when the toggle is off.
  Tensor<S> ssa_masking(Tape<S>* tape, const Tensor<S>& f_act, const Tensor<S>& f_mask) const {
    if (!cfg_.ssa_masking) return f_act;
    if (f_act.shape[0] != f_mask.shape[0] || f_act.shape[1] != f_mask.shape[1] ||
        f_act.shape[2] != f_mask.shape[2] || f_mask.shape[3] != 1)
      throw ShapeError("ssa_masking: mask shape " + shape_str(f_mask.shape) +
                       " misaligned with features " + shape_str(f_act.shape));
    Tensor<S> filtered = elementwise_mul(tape, f_act, f_mask);
    return concat_channels(tape, filtered, f_act);
  }

  // Full three-branch forward. teacher_mask, when given, is a {0,1} volume at
  // input resolution used in place of the predicted STU-Mask.
  DetectionOutput<S> forward(Tape<S>* tape, const Tensor<S>& v,
                             const Tensor<S>* teacher_mask = nullptr) const {
    auto [f_enc, skips] = encoder_forward(tape, v);

    Tensor<S> actor_feat = decoder_forward(tape, actor_branch_, f_enc, skips);
    Tensor<S> f_ap = relu(tape, conv3d(tape, actor_feat, ap_head_));
    Tensor<S> actor_logits = conv3d(tape, f_ap, actor_head_);
    Tensor<S> actor_probs = softmax_channels(tape, actor_logits);

    Tensor<S> mask_feat = decoder_forward(tape, mask_branch_, f_enc, skips);
    Tensor<S> mask_scores = softmax_channels(tape, conv3d(tape, mask_feat, mask_head_));
    Tensor<S> f_mask_pred = slice_channels(tape, mask_scores, 1, 2);

    Tensor<S> f_a = decoder_forward(tape, action_branch_, f_enc, skips);
    Tensor<S> f_act = ap_infusion(tape, f_a, f_ap);

    const Triple act_shape{f_act.shape[0], f_act.shape[1], f_act.shape[2]};
    Tensor<S> mask_for_filter;
    if (teacher_mask) {
      if (teacher_mask->shape != Shape{cfg_.T, cfg_.H, cfg_.W, 1})
        throw ContractError("forward: teacher mask must be [T,H,W,1] at input resolution");
      mask_for_filter = resize_nearest<S>(nullptr, *teacher_mask, act_shape);
    } else {
      Tensor<S> m = f_mask_pred;
      if (cfg_.mask_threshold >= 0.0) {
        Tensor<S> thr(m.shape);
        for (std::int64_t i = 0; i < m.numel(); ++i)
          thr.at(i) = m.at(i) >= static_cast<S>(cfg_.mask_threshold) ? S(1) : S(0);
        m = thr;
      }
      mask_for_filter = resize_nearest(tape, m, act_shape);
    }
    Tensor<S> f_act2 = ssa_masking(tape, f_act, mask_for_filter);

    Tensor<S> action_logits = conv3d(tape, f_act2, action_head_);
    Tensor<S> action_probs = cfg_.action_sigmoid ? sigmoid(tape, action_logits)
                                                 : softmax_channels(tape, action_logits);

    const Triple bs = cfg_.branch_shape(cfg_.decoder_strides);
    const Triple ms = cfg_.branch_shape(cfg_.decoder_strides_mask);
    const Triple up_branch{cfg_.T / bs[0], cfg_.H / bs[1], cfg_.W / bs[2]};
    const Triple up_mask{cfg_.T / ms[0], cfg_.H / ms[1], cfg_.W / ms[2]};

    DetectionOutput<S> out;
    out.actor_d = upsample_trilinear(tape, actor_probs, up_branch);
    out.action_d = upsample_trilinear(tape, action_probs, up_branch);
    out.stu_mask = upsample_trilinear(tape, mask_scores, up_mask);
    out.f_mask = f_mask_pred;
    return out;
  }

  // Stable hierarchical parameter names for checkpointing and the optimizer.
  std::vector<std::pair<std::string, Tensor<S>*>> parameters() {
    std::vector<std::pair<std::string, Tensor<S>*>> ps;
    auto add_conv = [&](const std::string& name, Conv3DParams<S>& c) {
      ps.emplace_back(name + ".kernel", &c.kernel);
      ps.emplace_back(name + ".bias", &c.bias);
    };
    for (std::size_t i = 0; i < encoder_.size(); ++i)
      add_conv("encoder." + std::to_string(i), encoder_[i]);
    auto add_branch = [&](const std::string& name, DecoderBranch& b) {
      if (b.atrous) {
        for (std::size_t i = 0; i < b.atrous->branches.size(); ++i)
          add_conv(name + ".atrous." + std::to_string(i), b.atrous->branches[i]);
        add_conv(name + ".atrous.fuse", b.atrous->fuse);
      }
      for (std::size_t i = 0; i < b.stages.size(); ++i) {
        add_conv(name + ".stage" + std::to_string(i) + ".deconv", b.stages[i].deconv);
        add_conv(name + ".stage" + std::to_string(i) + ".fuse", b.stages[i].fuse);
      }
      if (b.pyramid_fuse) add_conv(name + ".pyramid", *b.pyramid_fuse);
    };
    add_branch("actor", actor_branch_);
    add_branch("action", action_branch_);
    add_branch("mask", mask_branch_);
    add_conv("ap_head", ap_head_);
    add_conv("actor_head", actor_head_);
    add_conv("mask_head", mask_head_);
    if (ap_project_) add_conv("ap_project", *ap_project_);
    add_conv("infusion", infusion_);
    add_conv("action_head", action_head_);
    return ps;
  }

  const DecoderBranch& actor_branch() const { return actor_branch_; }
  const DecoderBranch& action_branch() const { return action_branch_; }
  const DecoderBranch& mask_branch() const { return mask_branch_; }

 private:
  DecoderBranch make_branch(const std::vector<Triple>& strides, std::mt19937& rng) {
    DecoderBranch b;
    const std::int64_t enc_ch = cfg_.encoder_channels.back();
    const std::int64_t dc = cfg_.decoder_channels;
    std::int64_t in_ch = enc_ch;
    if (cfg_.atrous) {
      b.atrous = AtrousBlock<S>::make(enc_ch, cfg_.atrous_branch_channels, dc, cfg_.atrous_rates,
                                      {3, 3, 3}, rng);
      in_ch = dc;
    }
    const int num_enc = static_cast<int>(cfg_.encoder_strides.size());
    for (std::size_t i = 0; i < strides.size(); ++i) {
      typename DecoderBranch::Stage st;
      const Triple s = strides[i];
      st.deconv = make_conv_params<S>({s[0], s[1], s[2]}, in_ch, dc, s, {0, 0, 0}, rng);
      st.skip_index = num_enc - 2 - static_cast<int>(i);
      const std::int64_t fuse_in =
          dc + (st.skip_index >= 0 ? cfg_.encoder_channels[static_cast<std::size_t>(st.skip_index)] : 0);
      st.fuse = make_conv_params<S>({3, 3, 3}, fuse_in, dc, {1, 1, 1}, {1, 1, 1}, rng);
      b.stages.push_back(std::move(st));
      in_ch = dc;
    }
    if (cfg_.multi_scale && strides.size() > 1) {
      b.pyramid_fuse = make_conv_params<S>(
          {1, 1, 1}, dc * static_cast<std::int64_t>(strides.size()), dc, {1, 1, 1}, {0, 0, 0}, rng);
    }
    return b;
  }

  NetworkConfig cfg_;
  std::vector<Conv3DParams<S>> encoder_;
  DecoderBranch actor_branch_, action_branch_, mask_branch_;
  Conv3DParams<S> ap_head_, actor_head_, mask_head_;
  std::optional<Conv3DParams<S>> ap_project_;
  Conv3DParams<S> infusion_;
  Conv3DParams<S> action_head_;
};

}  // namespace ssa2d
