#include "ssa2d/config.hpp"

#include <fstream>
#include <sstream>

namespace ssa2d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<std::int64_t> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects a comma list");
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
    kv[key] = value;
  }
  return kv;
}

void RunConfig::apply(const std::string& key, const std::string& v) {
  if (key == "profile") {
    if (v == "toy")
      net.profile = NetworkConfig::Profile::kToy;
    else if (v == "paper")
      net.profile = NetworkConfig::Profile::kPaper;
    else
      throw ConfigError("config: key 'profile' expects toy|paper, got '" + v + "'");
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else if (key == "input.t") {
    net.T = synth.T = parse_int(key, v);
  } else if (key == "input.h") {
    net.H = synth.H = parse_int(key, v);
  } else if (key == "input.w") {
    net.W = synth.W = parse_int(key, v);
  } else if (key == "net.c_actor") {
    net.c_actor = static_cast<int>(parse_int(key, v));
  } else if (key == "net.c_action") {
    net.c_action = static_cast<int>(parse_int(key, v));
  } else if (key == "net.c_ap") {
    net.c_ap = parse_int(key, v);
  } else if (key == "net.decoder_channels") {
    net.decoder_channels = parse_int(key, v);
  } else if (key == "net.encoder_channels") {
    net.encoder_channels = parse_int_list(key, v);
  } else if (key == "net.atrous_rates") {
    net.atrous_rates = parse_int_list(key, v);
  } else if (key == "net.atrous_branch_channels") {
    net.atrous_branch_channels = parse_int(key, v);
  } else if (key == "net.ap_infusion") {
    net.ap_infusion = parse_bool(key, v);
  } else if (key == "net.ssa_masking") {
    net.ssa_masking = parse_bool(key, v);
  } else if (key == "net.atrous") {
    net.atrous = parse_bool(key, v);
  } else if (key == "net.multi_scale") {
    net.multi_scale = parse_bool(key, v);
  } else if (key == "net.ap_add_mode") {
    net.ap_add_mode = parse_bool(key, v);
  } else if (key == "net.action_sigmoid") {
    net.action_sigmoid = parse_bool(key, v);
  } else if (key == "net.mask_threshold") {
    net.mask_threshold = parse_double(key, v);
  } else if (key == "synth.actors_min") {
    synth.actors_min = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.actors_max") {
    synth.actors_max = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.size_min") {
    synth.size_min = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.size_max") {
    synth.size_max = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.speed_min") {
    synth.speed_min = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.speed_max") {
    synth.speed_max = static_cast<int>(parse_int(key, v));
  } else if (key == "synth.noise_background") {
    synth.noise_background = parse_bool(key, v);
  } else if (key == "train.phase1_epochs") {
    schedule.phase1_epochs = static_cast<int>(parse_int(key, v));
  } else if (key == "train.phase2_epochs") {
    schedule.phase2_epochs = static_cast<int>(parse_int(key, v));
  } else if (key == "train.lr1") {
    schedule.lr_phase1 = parse_double(key, v);
  } else if (key == "train.lr2") {
    schedule.lr_phase2 = parse_double(key, v);
  } else if (key == "train.batch_size") {
    schedule.batch_size = static_cast<std::size_t>(parse_int(key, v));
  } else if (key == "train.accumulation_steps") {
    schedule.accumulation_steps = static_cast<int>(parse_int(key, v));
  } else if (key == "train.max_steps") {
    schedule.max_steps = parse_int(key, v);
  } else if (key == "train.checkpoint_every") {
    schedule.checkpoint_every = parse_int(key, v);
  } else if (key == "train.eval_every") {
    schedule.eval_every = parse_int(key, v);
  } else if (key == "train.grad_clip_norm") {
    schedule.grad_clip_norm = parse_double(key, v);
  } else if (key == "loss.w_actor") {
    loss.w_actor = static_cast<float>(parse_double(key, v));
  } else if (key == "loss.w_action") {
    loss.w_action = static_cast<float>(parse_double(key, v));
  } else if (key == "loss.w_mask") {
    loss.w_mask = static_cast<float>(parse_double(key, v));
  } else if (key == "loss.dice_epsilon") {
    loss.dice_epsilon = static_cast<float>(parse_double(key, v));
  } else if (key == "metric.miou_includes_background") {
    metrics.miou_includes_background = parse_bool(key, v);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void RunConfig::finalize() {
  NetworkConfig preset = (net.profile == NetworkConfig::Profile::kPaper)
                             ? NetworkConfig::paper(net.decoder_channels)
                             : NetworkConfig::toy(net.T, net.H, net.W, net.c_actor, net.c_action);
  if (net.encoder_strides.empty()) {
    net.encoder_strides = preset.encoder_strides;
    net.decoder_strides = preset.decoder_strides;
    net.decoder_strides_mask = preset.decoder_strides_mask;
  }
  if (net.encoder_channels.empty()) net.encoder_channels = preset.encoder_channels;
  if (net.encoder_channels.size() != net.encoder_strides.size())
    throw ConfigError("config: net.encoder_channels must list one width per encoder stage");
  if (net.profile == NetworkConfig::Profile::kPaper) {
    net.T = synth.T = preset.T;
    net.H = synth.H = preset.H;
    net.W = synth.W = preset.W;
  }
  net.seed = seed;
  synth.seed = seed;
  schedule.shuffle_seed = seed;
  net.validate();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) cfg.apply(k, v);
  cfg.finalize();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace ssa2d
