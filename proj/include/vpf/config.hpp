#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "vpf/data.hpp"
#include "vpf/pipeline.hpp"

namespace vpf::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parsed `key = value` file. Keys before the first `[name]` header go to
/// `base`; later keys go to the named block.
struct KeyValues {
  std::map<std::string, std::string> base;
  std::map<std::string, std::map<std::string, std::string>> blocks;
};

KeyValues parse(const std::string& text, const std::string& origin = "<config>");
KeyValues load(const std::string& path);

/// Base keys overlaid with the block named by `profile`, or by the base
/// `profile` key when empty. "paper" and "" select no block.
std::map<std::string, std::string> resolve(const KeyValues& kv, const std::string& profile = "");

struct Experiment {
  std::string profile;
  uint64_t seed = 1;
  /// 0 in the file means one per available core.
  int workers = 1;
  data::DatasetOptions data;
  pipeline::ModelConfig model;
  pipeline::TrainConfig train;
  double level = 0.43;
  int resolution = 128;
  int eval_samples = 100000;
  int log_every = 100;
  int checkpoint_every = 1000;
};

/// Builds an experiment from resolved keys; unknown keys and malformed
/// values throw ConfigError. `seed` drives data, model and trainer seeds.
Experiment experiment(const std::map<std::string, std::string>& kv);

/// Re-derives the seeds of `e` from a new master seed.
void reseed(Experiment& e, uint64_t seed);

/// Resolved settings, one `key = value` per line.
std::string describe(const Experiment& e);

}  // namespace vpf::config
