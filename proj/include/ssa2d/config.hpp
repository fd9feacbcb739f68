#pragma once

#include <map>
#include <string>

#include "ssa2d/losses.hpp"
#include "ssa2d/metrics.hpp"
#include "ssa2d/network.hpp"
#include "ssa2d/synth.hpp"
#include "ssa2d/train.hpp"

namespace ssa2d {

// Merged run configuration parsed from flat "key = value" lines with '#'
// comments and dotted keys. Unknown keys are rejected.
struct RunConfig {
  NetworkConfig net;
  SynthConfig synth;
  TrainSchedule schedule;
  LossWeights<float> loss;
  MetricOptions metrics;
  std::uint64_t seed = 0;

  // Parses file contents; every error names the offending key.
  static RunConfig parse(const std::string& text);
  static RunConfig parse_file(const std::string& path);

  // Applies one "key=value" override (CLI flags).
  void apply(const std::string& key, const std::string& value);

  // Re-derives the stride schedules from profile + input shape and
  // validates everything.
  void finalize();
};

std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace ssa2d
