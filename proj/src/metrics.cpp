#include "envlabel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "envlabel/record.hpp"

namespace envlabel::metrics {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(cells_.begin(), cells_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion(std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t n_classes) {
  ConfusionMatrix cm(n_classes);
  for (const auto& [t, p] : pairs) {
    if (t >= n_classes || p >= n_classes) {
      throw std::out_of_range("confusion: class index " + std::to_string(std::max(t, p)) +
                              " out of range for " + std::to_string(n_classes) + " classes");
    }
    ++cm.at(t, p);
  }
  return cm;
}

Summary summarize(const ConfusionMatrix& cm, Averaging averaging) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("summarize: empty confusion matrix");
  const std::size_t n = cm.n_classes();

  Summary s;
  s.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  s.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t predicted = 0;
    std::uint64_t actual = 0;
    for (std::size_t k = 0; k < n; ++k) {
      predicted += cm.at(k, c);
      actual += cm.at(c, k);
    }
    const double tp = static_cast<double>(cm.at(c, c));
    ClassScores& cs = s.per_class[c];
    cs.support = actual;
    cs.precision_defined = predicted > 0;
    cs.recall_defined = actual > 0;
    cs.precision = cs.precision_defined ? tp / static_cast<double>(predicted) : 0.0;
    cs.recall = cs.recall_defined ? tp / static_cast<double>(actual) : 0.0;
    cs.f1 = (cs.precision + cs.recall) > 0.0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    s.has_undefined = s.has_undefined || !cs.precision_defined || !cs.recall_defined;
  }

  switch (averaging) {
    case Averaging::Macro: {
      for (const auto& cs : s.per_class) {
        s.precision += cs.precision;
        s.recall += cs.recall;
        s.f1 += cs.f1;
      }
      s.precision /= static_cast<double>(n);
      s.recall /= static_cast<double>(n);
      s.f1 /= static_cast<double>(n);
      break;
    }
    case Averaging::Weighted: {
      for (const auto& cs : s.per_class) {
        const double w = static_cast<double>(cs.support) / static_cast<double>(total);
        s.precision += w * cs.precision;
        s.recall += w * cs.recall;
        s.f1 += w * cs.f1;
      }
      break;
    }
    case Averaging::Micro:
      // Single-label multi-class: pooled precision = pooled recall = accuracy.
      s.precision = s.accuracy;
      s.recall = s.accuracy;
      s.f1 = s.accuracy;
      break;
  }
  return s;
}

std::optional<double> auprc(std::span<const ScoredPrediction> predictions, std::size_t cls) {
  std::vector<std::pair<double, bool>> ranked;
  ranked.reserve(predictions.size());
  std::size_t positives = 0;
  for (const auto& p : predictions) {
    if (cls >= p.scores.size()) throw std::out_of_range("auprc: class index out of range");
    const bool pos = p.truth == cls;
    positives += pos ? 1 : 0;
    ranked.emplace_back(p.scores[cls], pos);
  }
  if (positives == 0) return std::nullopt;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    const double threshold = ranked[i].first;
    while (i < ranked.size() && ranked[i].first == threshold) {
      tp += ranked[i].second ? 1 : 0;
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return std::clamp(area, 0.0, 1.0);
}

MetricsReport evaluate(std::span<const CategoryData> categories, Averaging averaging) {
  MetricsReport report;
  report.averaging = averaging;
  double auprc_sum = 0.0;
  std::size_t auprc_n = 0;
  for (const auto& cat : categories) {
    if (cat.truth.size() != cat.predicted.size()) {
      throw std::invalid_argument("evaluate: " + cat.name + ": " + std::to_string(cat.truth.size()) +
                                  " truths vs " + std::to_string(cat.predicted.size()) + " predictions");
    }
    if (!cat.scores.empty() && cat.scores.size() != cat.truth.size()) {
      throw std::invalid_argument("evaluate: " + cat.name + ": score vectors not aligned");
    }
    if (cat.truth.empty()) throw std::invalid_argument("evaluate: " + cat.name + ": no samples");

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<ScoredPrediction> scored;
    pairs.reserve(cat.truth.size());
    scored.reserve(cat.truth.size());
    for (std::size_t i = 0; i < cat.truth.size(); ++i) {
      pairs.emplace_back(cat.truth[i], cat.predicted[i]);
      ScoredPrediction sp;
      sp.truth = cat.truth[i];
      if (cat.scores.empty()) {
        sp.scores.assign(cat.n_classes, 0.0);
        if (cat.predicted[i] < cat.n_classes) sp.scores[cat.predicted[i]] = 1.0;
      } else {
        if (cat.scores[i].size() != cat.n_classes) {
          throw std::invalid_argument("evaluate: " + cat.name + ": score vector of length " +
                                      std::to_string(cat.scores[i].size()));
        }
        sp.scores = cat.scores[i];
      }
      scored.push_back(std::move(sp));
    }

    CategoryReport cr;
    cr.name = cat.name;
    cr.confusion = confusion(pairs, cat.n_classes);
    cr.summary = summarize(cr.confusion, averaging);
    double sum = 0.0;
    std::size_t computable = 0;
    for (std::size_t c = 0; c < cat.n_classes; ++c) {
      cr.class_auprc.push_back(auprc(scored, c));
      if (cr.class_auprc.back()) {
        sum += *cr.class_auprc.back();
        ++computable;
      }
    }
    if (computable > 0) {
      cr.auprc = sum / static_cast<double>(computable);
      auprc_sum += *cr.auprc;
      ++auprc_n;
    }
    report.mean_accuracy += cr.summary.accuracy;
    report.mean_precision += cr.summary.precision;
    report.mean_recall += cr.summary.recall;
    report.mean_f1 += cr.summary.f1;
    report.categories.push_back(std::move(cr));
  }
  if (!report.categories.empty()) {
    const auto k = static_cast<double>(report.categories.size());
    report.mean_accuracy /= k;
    report.mean_precision /= k;
    report.mean_recall /= k;
    report.mean_f1 /= k;
  }
  if (auprc_n > 0) report.mean_auprc = auprc_sum / static_cast<double>(auprc_n);
  return report;
}

namespace {

std::string cell(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? cell(*v) : "n/a"; }

void row(std::string& out, const std::string& name, const std::string& acc, const std::string& p,
         const std::string& r, const std::string& f1, const std::string& ap) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s | %8s | %9s | %6s | %8s | %5s\n", name.c_str(), acc.c_str(), p.c_str(),
                r.c_str(), f1.c_str(), ap.c_str());
  out += buf;
}

}  // namespace

std::string MetricsReport::to_table() const {
  std::string out;
  row(out, "Category", "Accuracy", "Precision", "Recall", "F1-Score", "AUPRC");
  out += std::string(20, '-') + "-+-" + std::string(8, '-') + "-+-" + std::string(9, '-') + "-+-" +
         std::string(6, '-') + "-+-" + std::string(8, '-') + "-+-" + std::string(5, '-') + "\n";
  for (const auto& c : categories) {
    row(out, c.name, cell(c.summary.accuracy), cell(c.summary.precision), cell(c.summary.recall),
        cell(c.summary.f1), cell(c.auprc));
  }
  row(out, "Mean", cell(mean_accuracy), cell(mean_precision), cell(mean_recall), cell(mean_f1), cell(mean_auprc));
  bool undefined = false;
  for (const auto& c : categories) undefined = undefined || c.summary.has_undefined;
  if (undefined) out += "note: undefined per-class precision or recall counted as 0\n";
  return out;
}

std::string MetricsReport::to_records() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  std::string out;
  for (const auto& c : categories) {
    Json j;
    j["category"] = c.name;
    j["accuracy"] = c.summary.accuracy;
    j["precision"] = c.summary.precision;
    j["recall"] = c.summary.recall;
    j["f1"] = c.summary.f1;
    j["auprc"] = opt(c.auprc);
    j["undefined_terms"] = c.summary.has_undefined;
    Json cm = Json::array();
    for (std::size_t t = 0; t < c.confusion.n_classes(); ++t) {
      Json r = Json::array();
      for (std::size_t p = 0; p < c.confusion.n_classes(); ++p) r.push_back(c.confusion.at(t, p));
      cm.push_back(std::move(r));
    }
    j["confusion"] = std::move(cm);
    out += j.dump();
    out += '\n';
  }
  Json m;
  m["category"] = "mean";
  m["accuracy"] = mean_accuracy;
  m["precision"] = mean_precision;
  m["recall"] = mean_recall;
  m["f1"] = mean_f1;
  m["auprc"] = opt(mean_auprc);
  out += m.dump();
  out += '\n';
  return out;
}

}  // namespace envlabel::metrics
