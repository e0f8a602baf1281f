#include <charconv>
#include <fstream>
#include <sstream>

#include "envlabel/errors.hpp"
#include "envlabel/toy_data.hpp"

namespace envlabel::focal {

namespace {

constexpr std::string_view kMagic = "envlabel-toy-model";
constexpr int kVersion = 1;

void put_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double get_double(const std::string& token) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw FormatError("checkpoint: bad number \"" + token + "\"");
  }
  return v;
}

std::size_t get_size(std::istream& in, std::string_view what) {
  long long v = -1;
  if (!(in >> v) || v < 0) throw FormatError("checkpoint: bad value for " + std::string(what));
  return static_cast<std::size_t>(v);
}

void expect_key(std::istream& in, std::string_view key) {
  std::string token;
  if (!(in >> token) || token != key) {
    throw FormatError("checkpoint: expected \"" + std::string(key) + "\", found \"" + token + "\"");
  }
}

}  // namespace

std::string format_checkpoint(const ToyModel& model) {
  const ToyModelConfig& c = model.config;
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  out += "input_dim " + std::to_string(c.input_dim) + "\n";
  out += "trunk_widths " + std::to_string(c.trunk_widths.size());
  for (auto w : c.trunk_widths) out += " " + std::to_string(w);
  out += "\nhead_hidden " + std::to_string(c.head_hidden) + "\n";
  out += "class_counts";
  for (auto k : c.class_counts) out += " " + std::to_string(k);
  out += "\nlearning_rate ";
  put_double(out, c.learning_rate);
  out += "\nepochs " + std::to_string(c.epochs) + "\n";
  out += "batch_size " + std::to_string(c.batch_size) + "\n";
  out += "seed " + std::to_string(c.seed) + "\n";

  const auto names = model.parameter_names();
  const auto blocks = model.parameters();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out += "param " + names[b] + " " + std::to_string(blocks[b].size()) + "\n";
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      if (i > 0) out += (i % 8 == 0) ? '\n' : ' ';
      put_double(out, blocks[b][i]);
    }
    out += "\n";
  }
  out += "end\n";
  return out;
}

ToyModel parse_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw FormatError("checkpoint: missing header");
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));

  ToyModelConfig c;
  expect_key(in, "input_dim");
  c.input_dim = get_size(in, "input_dim");
  expect_key(in, "trunk_widths");
  c.trunk_widths.resize(get_size(in, "trunk_widths"));
  for (auto& w : c.trunk_widths) w = get_size(in, "trunk_widths");
  expect_key(in, "head_hidden");
  c.head_hidden = get_size(in, "head_hidden");
  expect_key(in, "class_counts");
  for (auto& k : c.class_counts) k = get_size(in, "class_counts");
  std::string token;
  expect_key(in, "learning_rate");
  in >> token;
  c.learning_rate = get_double(token);
  expect_key(in, "epochs");
  c.epochs = get_size(in, "epochs");
  expect_key(in, "batch_size");
  c.batch_size = get_size(in, "batch_size");
  expect_key(in, "seed");
  unsigned long long seed = 0;
  if (!(in >> seed)) throw FormatError("checkpoint: bad seed");
  c.seed = seed;

  ToyModel model;
  try {
    model = ToyModel::zeros(c);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const auto names = model.parameter_names();
  auto blocks = model.parameters();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    expect_key(in, "param");
    std::string name;
    in >> name;
    if (name != names[b]) throw FormatError("checkpoint: expected block " + names[b] + ", found " + name);
    if (get_size(in, name) != blocks[b].size()) throw FormatError("checkpoint: wrong size for " + name);
    for (double& v : blocks[b]) {
      if (!(in >> token)) throw FormatError("checkpoint: truncated block " + name);
      v = get_double(token);
    }
  }
  expect_key(in, "end");
  return model;
}

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << format_checkpoint(model);
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace envlabel::focal
