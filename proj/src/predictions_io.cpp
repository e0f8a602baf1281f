#include "envlabel/predictions_io.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "envlabel/errors.hpp"
#include "envlabel/record.hpp"

namespace envlabel {

FramePrediction parse_prediction(std::string_view line) {
  const Json j = parse_json_strict(line);
  if (!j.is_object()) throw ParseError("", "prediction is not an object");
  for (const auto& item : j.items()) {
    if (item.key() != "frame_id" && item.key() != "scores" && !parse_category(item.key())) {
      throw ParseError(item.key(), "unknown field");
    }
  }
  FramePrediction p;
  const auto id = j.find("frame_id");
  if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
    throw ParseError("frame_id", "missing or not a non-empty string");
  }
  p.frame_id = id->get<std::string>();

  for (Category c : kCategories) {
    const std::string key(category_key(c));
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(key, "missing category");
    if (!it->is_string()) throw ParseError(key, "expected a class name");
    const auto& name = it->get_ref<const std::string&>();
    bool found = false;
    for (std::size_t k = 0; k < class_count(c); ++k) {
      if (class_name(c, k) == name) {
        p.classes[static_cast<std::size_t>(c)] = k;
        found = true;
      }
    }
    if (!found) throw ParseError(key, "unknown value \"" + name + "\"");
  }

  if (const auto sc = j.find("scores"); sc != j.end() && !sc->is_null()) {
    if (!sc->is_object()) throw ParseError("scores", "expected an object");
    for (const auto& item : sc->items()) {
      const auto c = parse_category(item.key());
      const std::string field = "scores." + item.key();
      if (!c) throw ParseError(field, "unknown category");
      if (!item.value().is_array() || item.value().size() != class_count(*c)) {
        throw ParseError(field, "expected " + std::to_string(class_count(*c)) + " scores");
      }
      std::vector<double> v;
      for (const auto& x : item.value()) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) throw ParseError(field, "non-finite score");
        v.push_back(x.get<double>());
      }
      p.scores[static_cast<std::size_t>(*c)] = std::move(v);
    }
  }
  return p;
}

std::string format_prediction(const FramePrediction& p) {
  Json j;
  j["frame_id"] = p.frame_id;
  for (Category c : kCategories) {
    j[std::string(category_key(c))] = std::string(class_name(c, p.classes[static_cast<std::size_t>(c)]));
  }
  Json scores = Json::object();
  for (Category c : kCategories) {
    if (const auto& s = p.scores[static_cast<std::size_t>(c)]) scores[std::string(category_key(c))] = *s;
  }
  if (!scores.empty()) j["scores"] = std::move(scores);
  return j.dump();
}

std::vector<FramePrediction> parse_predictions(std::string_view text) {
  std::vector<FramePrediction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_prediction(line));
    } catch (const ParseError& e) {
      throw ParseError(e.field(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

EvaluationInput align_predictions(const std::vector<FramePrediction>& predictions,
                                  const std::vector<FrameAnnotation>& ground_truth) {
  std::map<std::string, EnvironmentLabel> truth;
  for (const auto& a : ground_truth) {
    if (!validate(a, ValidationMode::Final).empty()) continue;
    truth.emplace(a.frame_id, *a.label.complete());
  }

  EvaluationInput input;
  for (Category c : kCategories) {
    metrics::CategoryData d;
    d.name = std::string(category_title(c));
    d.n_classes = class_count(c);
    input.categories.push_back(std::move(d));
  }
  std::array<bool, kCategoryCount> all_scored;
  all_scored.fill(true);
  for (const auto& p : predictions) {
    const auto it = truth.find(p.frame_id);
    if (it == truth.end()) {
      input.unmatched.push_back(p.frame_id);
      continue;
    }
    ++input.matched;
    for (Category c : kCategories) {
      const auto k = static_cast<std::size_t>(c);
      auto& d = input.categories[k];
      d.truth.push_back(class_index(it->second, c));
      d.predicted.push_back(p.classes[k]);
      if (p.scores[k]) {
        d.scores.push_back(*p.scores[k]);
      } else {
        all_scored[k] = false;
      }
    }
  }
  for (std::size_t k = 0; k < kCategoryCount; ++k) {
    if (!all_scored[k]) input.categories[k].scores.clear();
  }
  return input;
}

}  // namespace envlabel
