#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "envlabel/focal_trainer.hpp"

namespace envlabel::focal {

struct SeparableSpec {
  std::size_t samples = 600;
  double prototype_scale = 3.0;  // std-dev of the per-class prototype entries
  double noise = 0.3;            // std-dev of the per-sample noise
  std::uint64_t seed = 7;
};

/// Labels drawn uniformly per head; features are the sum of one random
/// prototype vector per (head, class) plus Gaussian noise, so every head is
/// linearly separable up to the noise.
std::vector<SyntheticSample> make_separable_dataset(const ToyModelConfig& config, const SeparableSpec& spec);

/// One record per line: {"features": [...], "labels": [six class indices]}.
std::string format_sample(const SyntheticSample& sample);
SyntheticSample parse_sample(std::string_view line);
std::vector<SyntheticSample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<SyntheticSample>& data, const std::filesystem::path& path);

/// Self-describing text checkpoint: header, config echo, then each parameter
/// block as "param <name> <count>" followed by its values in shortest
/// round-trip form.
std::string format_checkpoint(const ToyModel& model);
ToyModel parse_checkpoint(std::string_view text);
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace envlabel::focal
