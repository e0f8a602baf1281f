#include "envlabel/toy_data.hpp"

#include <fstream>
#include <sstream>

#include "envlabel/errors.hpp"
#include "envlabel/random.hpp"
#include "envlabel/record.hpp"

namespace envlabel::focal {

std::vector<SyntheticSample> make_separable_dataset(const ToyModelConfig& config, const SeparableSpec& spec) {
  config.check();
  Rng rng(spec.seed);
  std::array<std::vector<std::vector<double>>, kHeads> prototypes;
  for (std::size_t h = 0; h < kHeads; ++h) {
    prototypes[h].resize(config.class_counts[h]);
    for (auto& proto : prototypes[h]) {
      proto.resize(config.input_dim);
      for (double& v : proto) v = spec.prototype_scale * rng.normal();
    }
  }
  std::vector<SyntheticSample> data(spec.samples);
  for (auto& s : data) {
    s.features.assign(config.input_dim, 0.0);
    for (std::size_t h = 0; h < kHeads; ++h) {
      s.targets[h] = rng.below(config.class_counts[h]);
      const auto& proto = prototypes[h][s.targets[h]];
      for (std::size_t i = 0; i < config.input_dim; ++i) s.features[i] += proto[i];
    }
    for (double& v : s.features) v += spec.noise * rng.normal();
  }
  return data;
}

std::string format_sample(const SyntheticSample& sample) {
  Json j;
  j["features"] = sample.features;
  j["labels"] = sample.targets;
  return j.dump();
}

SyntheticSample parse_sample(std::string_view line) {
  const Json j = parse_json_strict(line);
  if (!j.is_object()) throw ParseError("", "sample is not an object");
  for (const auto& item : j.items()) {
    if (item.key() != "features" && item.key() != "labels") throw ParseError(item.key(), "unknown field");
  }
  SyntheticSample s;
  const auto f = j.find("features");
  if (f == j.end() || !f->is_array() || f->empty()) throw ParseError("features", "expected a non-empty array");
  for (const auto& v : *f) {
    if (!v.is_number()) throw ParseError("features", "expected numbers");
    s.features.push_back(v.get<double>());
  }
  const auto l = j.find("labels");
  if (l == j.end() || !l->is_array() || l->size() != kHeads) throw ParseError("labels", "expected six class indices");
  for (std::size_t h = 0; h < kHeads; ++h) {
    const auto& v = (*l)[h];
    if (!v.is_number_unsigned()) throw ParseError("labels", "expected non-negative integers");
    s.targets[h] = v.get<std::size_t>();
  }
  return s;
}

std::vector<SyntheticSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<SyntheticSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_sample(line));
    } catch (const ParseError& e) {
      throw ParseError(e.field(), path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const std::vector<SyntheticSample>& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  for (const auto& s : data) out << format_sample(s) << '\n';
}

}  // namespace envlabel::focal
