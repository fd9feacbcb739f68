#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ssa2d/config.hpp"
#include "ssa2d/container.hpp"
#include "ssa2d/dataset.hpp"
#include "ssa2d/metrics.hpp"
#include "ssa2d/network.hpp"
#include "ssa2d/train.hpp"

namespace fs = std::filesystem;
using namespace ssa2d;

namespace {

void init_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SSA2D_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::parse_file(path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("config: override '" + ov + "' is not key=value");
    cfg.apply(ov.substr(0, eq), ov.substr(eq + 1));
  }
  cfg.finalize();
  return cfg;
}

// Fixed frame-dump palette; identical labels always map to identical pixels.
void action_class_color(int cls, unsigned char rgb[3]) {
  static const unsigned char palette[5][3] = {
      {0, 0, 0}, {255, 128, 0}, {0, 255, 255}, {255, 0, 255}, {255, 255, 0}};
  const int c = (cls >= 0 && cls < 5) ? cls : 0;
  rgb[0] = palette[c][0];
  rgb[1] = palette[c][1];
  rgb[2] = palette[c][2];
}

void write_ppm(const std::string& path, std::int64_t H, std::int64_t W,
               const std::vector<unsigned char>& rgb) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << W << " " << H << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void dump_frames(const std::string& dir, const std::string& task, const std::vector<std::int32_t>& labels,
                 std::int64_t T, std::int64_t H, std::int64_t W, bool actor_palette) {
  for (std::int64_t t = 0; t < T; ++t) {
    std::vector<unsigned char> img(static_cast<std::size_t>(H * W * 3));
    for (std::int64_t i = 0; i < H * W; ++i) {
      const int cls = labels[static_cast<std::size_t>(t * H * W + i)];
      unsigned char rgb[3];
      if (actor_palette) {
        float fc[3];
        actor_class_color(cls, fc);
        rgb[0] = static_cast<unsigned char>(fc[0] * 255.0f);
        rgb[1] = static_cast<unsigned char>(fc[1] * 255.0f);
        rgb[2] = static_cast<unsigned char>(fc[2] * 255.0f);
      } else {
        action_class_color(cls, rgb);
      }
      img[static_cast<std::size_t>(i * 3 + 0)] = rgb[0];
      img[static_cast<std::size_t>(i * 3 + 1)] = rgb[1];
      img[static_cast<std::size_t>(i * 3 + 2)] = rgb[2];
    }
    char name[64];
    std::snprintf(name, sizeof(name), "/%s_%04lld.ppm", task.c_str(), static_cast<long long>(t));
    write_ppm(dir + name, H, W, img);
  }
}

std::vector<ClipRecord> load_all_clips(const Dataset& ds) {
  std::vector<ClipRecord> clips;
  clips.reserve(ds.size());
  for (const auto& e : ds.entries) clips.push_back(read_clip(clip_path(ds.dir, e.id)));
  return clips;
}

int cmd_gen_data(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out, std::int64_t clips, std::int64_t seed_flag) {
  RunConfig cfg = load_config(config_path, overrides);
  if (seed_flag >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed_flag);
    cfg.finalize();
  }
  generate_dataset(out, cfg.synth, clips, cfg.seed);
  std::cout << "wrote " << clips << " clips to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& data, const std::string& out) {
  if (!fs::exists(data)) {
    std::cerr << "error: data directory not found: " << data << "\n";
    return 2;
  }
  RunConfig cfg = load_config(config_path, overrides);
  fs::create_directories(out);
  const Dataset ds = open_dataset(data);
  const std::vector<ClipRecord> clips = load_all_clips(ds);

  SSA2DModel<float> model(cfg.net);
  std::ofstream log(out + "/train.log", std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + out + "/train.log");
  const TrainResult r = train(model, clips, cfg.schedule, cfg.loss, out, &log);
  std::cout << "trained " << r.log.size() << " steps; checkpoint: " << r.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& ckpt, const std::string& data, const std::string& report_path,
             bool oracle) {
  RunConfig cfg = load_config(config_path, overrides);
  const Dataset ds = open_dataset(data);
  const std::vector<ClipRecord> clips = load_all_clips(ds);

  std::vector<std::int32_t> pa, pb, ga, gb;
  if (oracle) {
    for (const auto& c : clips) {
      pa.insert(pa.end(), c.actor_gt.begin(), c.actor_gt.end());
      pb.insert(pb.end(), c.action_gt.begin(), c.action_gt.end());
    }
  } else {
    SSA2DModel<float> model(cfg.net);
    load_checkpoint(ckpt, model);
    for (const auto& c : clips) {
      InferenceResult r = infer(model, c);
      pa.insert(pa.end(), r.actor_pred.begin(), r.actor_pred.end());
      pb.insert(pb.end(), r.action_pred.begin(), r.action_pred.end());
    }
  }
  for (const auto& c : clips) {
    ga.insert(ga.end(), c.actor_gt.begin(), c.actor_gt.end());
    gb.insert(gb.end(), c.action_gt.begin(), c.action_gt.end());
  }
  const PairSpace pairs = PairSpace::cross_product(cfg.net.c_actor, cfg.net.c_action);
  MetricReport rep = evaluate_all(pa, pb, ga, gb, cfg.net.c_actor, cfg.net.c_action, pairs, cfg.metrics);
  rep.clip_count = static_cast<std::int64_t>(clips.size());

  std::ofstream f(report_path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + report_path);
  f << rep.to_key_value();
  std::ofstream j(report_path + ".json", std::ios::trunc);
  j << rep.to_json() << "\n";
  std::cout << rep.to_key_value();
  return 0;
}

int cmd_infer(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& ckpt, const std::string& input, const std::string& out,
              bool dump) {
  RunConfig cfg = load_config(config_path, overrides);
  const ClipRecord clip = read_clip(input);
  SSA2DModel<float> model(cfg.net);
  load_checkpoint(ckpt, model);
  const InferenceResult r = infer(model, clip);

  fs::create_directories(out);
  std::vector<ContainerTensor> ts;
  ts.push_back(ContainerTensor::make_i32("actor_pred", {clip.T, clip.H, clip.W}, r.actor_pred));
  ts.push_back(ContainerTensor::make_i32("action_pred", {clip.T, clip.H, clip.W}, r.action_pred));
  ts.push_back(ContainerTensor::make_i32("mask_pred", {clip.T, clip.H, clip.W}, r.mask_pred));
  write_container(out + "/prediction.stc", ts);
  if (dump) {
    dump_frames(out, "actor", r.actor_pred, clip.T, clip.H, clip.W, true);
    dump_frames(out, "action", r.action_pred, clip.T, clip.H, clip.W, false);
    dump_frames(out, "mask", r.mask_pred, clip.T, clip.H, clip.W, false);
  }
  std::cout << "wrote " << out << "/prediction.stc\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& ckpt, bool init, const std::string& actors, int repeats) {
  RunConfig cfg = load_config(config_path, overrides);
  SSA2DModel<float> model(cfg.net);
  if (!init) load_checkpoint(ckpt, model);

  std::vector<int> counts;
  std::istringstream is(actors);
  std::string item;
  while (std::getline(is, item, ',')) counts.push_back(std::stoi(item));

  const auto rows = benchmark(model, cfg.synth, counts, repeats);
  std::cout << "actors median_ms_per_frame op_count peak_transient_bytes\n";
  for (const auto& r : rows)
    std::cout << r.actor_count << " " << r.median_ms_per_frame << " " << r.op_count << " "
              << r.peak_transient_bytes << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_threads();
  CLI::App app{"SSA2D single-shot actor-action detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, data, out, ckpt, input, report_path, actors = "1,4,8";
  std::vector<std::string> overrides;
  std::int64_t clips = 10, seed_flag = -1;
  bool oracle = false, dump = false, init = false;
  int repeats = 20;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);
  gen->add_option("--out", out, "output dataset directory")->required();
  gen->add_option("--clips", clips, "number of clips");
  gen->add_option("--seed", seed_flag, "seed override");

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr);
  tr->add_option("--data", data, "dataset directory")->required();
  tr->add_option("--out", out, "output directory")->required();
  bool no_ap = false, no_ssa = false, no_atrous = false, no_ms = false;
  tr->add_flag("--no-ap-infusion", no_ap, "disable AP-Infusion");
  tr->add_flag("--no-ssa-masking", no_ssa, "disable SSA-Masking");
  tr->add_flag("--no-atrous", no_atrous, "disable atrous blocks");
  tr->add_flag("--no-multi-scale", no_ms, "disable the feature pyramid");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev);
  ev->add_option("--ckpt", ckpt, "checkpoint file");
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--report", report_path, "report output path")->required();
  ev->add_flag("--oracle", oracle, "score ground truth against itself");

  auto* in = app.add_subcommand("infer", "run inference on one clip");
  add_common(in);
  in->add_option("--ckpt", ckpt, "checkpoint file")->required();
  in->add_option("--input", input, "input clip .stc")->required();
  in->add_option("--out", out, "output directory")->required();
  in->add_flag("--dump-frames", dump, "write per-frame color-mapped .ppm images");

  auto* be = app.add_subcommand("bench", "benchmark forward inference cost");
  add_common(be);
  be->add_option("--ckpt", ckpt, "checkpoint file");
  be->add_flag("--init", init, "benchmark a freshly initialized model");
  be->add_option("--actors", actors, "comma list of actor counts");
  be->add_option("--repeats", repeats, "timing repeats per actor count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, overrides, out, clips, seed_flag);
    if (tr->parsed()) {
      if (no_ap) overrides.push_back("net.ap_infusion=false");
      if (no_ssa) overrides.push_back("net.ssa_masking=false");
      if (no_atrous) overrides.push_back("net.atrous=false");
      if (no_ms) overrides.push_back("net.multi_scale=false");
      return cmd_train(config_path, overrides, data, out);
    }
    if (ev->parsed()) {
      if (!oracle && ckpt.empty()) {
        std::cerr << "error: eval requires --ckpt unless --oracle is given\n";
        return 2;
      }
      return cmd_eval(config_path, overrides, ckpt, data, report_path, oracle);
    }
    if (in->parsed()) return cmd_infer(config_path, overrides, ckpt, input, out, dump);
    if (be->parsed()) {
      if (!init && ckpt.empty()) {
        std::cerr << "error: bench requires --ckpt or --init\n";
        return 2;
      }
      return cmd_bench(config_path, overrides, ckpt, init, actors, repeats);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
