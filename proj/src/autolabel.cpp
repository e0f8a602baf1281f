#include "envlabel/autolabel.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "envlabel/errors.hpp"
#include "envlabel/record.hpp"

namespace envlabel {

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest DatasetManifest::parse(std::string_view text, std::filesystem::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 2 || cols.size() > 3) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    ManifestEntry e;
    e.frame_id = cols[0];
    if (e.frame_id.empty()) throw FormatError("manifest line " + std::to_string(line_no) + ": empty frame_id");
    if (!seen.insert(e.frame_id).second) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": duplicate frame_id " + e.frame_id);
    }
    e.image = cols[1].empty() || cols[1] == "-" ? std::filesystem::path{} : m.root / cols[1];
    if (cols.size() == 3 && !cols[2].empty() && cols[2] != "-") e.cloud = m.root / cols[2];
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

const ManifestEntry* DatasetManifest::find(const std::string& frame_id) const {
  for (const auto& e : entries) {
    if (e.frame_id == frame_id) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Suggestion and merge

Suggestion suggest_precipitation(const PointCloud& cloud, const LidarSpec& spec, ClassifyOptions options) {
  Suggestion s;
  s.frame_id = cloud.frame_id;
  const ClutterResult result = classify_clutter(cloud, spec, options);
  s.intensity = precipitation_intensity(result, spec);
  s.clutter_fraction = result.fraction;
  if (cloud.empty()) s.diagnostics.push_back("empty point cloud; defaulting to Light");
  return s;
}

FrameAnnotation human_part(const FrameAnnotation& stored) {
  FrameAnnotation h;
  h.frame_id = stored.frame_id;
  for (Category c : kCategories) {
    if (c == Category::Precipitation) continue;
    if (stored.provenance[c] == Source::Human) {
      h.provenance[c] = Source::Human;
    } else {
      continue;
    }
    switch (c) {
      case Category::Daytime: h.label.daytime = stored.label.daytime; break;
      case Category::Fog: h.label.fog = stored.label.fog; break;
      case Category::Road: h.label.road = stored.label.road; break;
      case Category::Roadside: h.label.roadside = stored.label.roadside; break;
      case Category::Infrastructure: h.label.infrastructure = stored.label.infrastructure; break;
      case Category::Precipitation: break;
    }
  }
  h.label.precipitation_kind = stored.label.precipitation_kind;
  if (stored.provenance[Category::Precipitation] == Source::Human) {
    h.label.precipitation_intensity = stored.label.precipitation_intensity;
  }
  h.provenance[Category::Precipitation] = h.label.has(Category::Precipitation) ? Source::Human : Source::Unset;
  h.updated_at = stored.updated_at;
  return h;
}

FrameAnnotation merge(const std::optional<Suggestion>& suggestion, const FrameAnnotation& human,
                      Timestamp updated_at) {
  if (suggestion && suggestion->frame_id != human.frame_id) {
    throw std::invalid_argument("merge: suggestion for " + suggestion->frame_id + " applied to " +
                                human.frame_id);
  }
  if (const auto v = validate(human, ValidationMode::Draft); !v.empty()) {
    throw std::invalid_argument("merge: human input for " + human.frame_id + " is invalid: " +
                                v.front().field + ": " + v.front().message);
  }

  FrameAnnotation out;
  out.frame_id = human.frame_id;
  out.updated_at = updated_at;
  out.label = human.label;
  for (Category c : kCategories) {
    out.provenance[c] = human.label.has(c) ? Source::Human : Source::Unset;
  }

  const auto kind = human.label.precipitation_kind;
  if (kind == PrecipitationKind::None) {
    out.label.precipitation_intensity.reset();
    out.provenance[Category::Precipitation] = Source::Human;
  } else if (!human.label.precipitation_intensity && suggestion) {
    out.label.precipitation_intensity = suggestion->intensity;
    out.provenance[Category::Precipitation] = Source::Auto;
  }
  if (suggestion) out.clutter_fraction = suggestion->clutter_fraction;
  return out;
}

// ---------------------------------------------------------------------------
// Batch

std::string_view to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::Processed: return "processed";
    case FrameStatus::Failed: return "failed";
    case FrameStatus::Skipped: return "skipped";
  }
  return "unknown";
}

std::string BatchReport::to_records() const {
  std::string out;
  for (const auto& f : frames) {
    Json j;
    j["frame_id"] = f.frame_id;
    j["status"] = std::string(to_string(f.status));
    j["message"] = f.message;
    out += j.dump();
    out += '\n';
  }
  Json s;
  s["frame_id"] = nullptr;
  s["status"] = "summary";
  s["message"] = "processed=" + std::to_string(processed) + " failed=" + std::to_string(failed) +
                 " skipped=" + std::to_string(skipped);
  s["processed"] = processed;
  s["failed"] = failed;
  s["skipped"] = skipped;
  out += s.dump();
  out += '\n';
  return out;
}

BatchReport run_batch(const DatasetManifest& manifest, const LidarSpec& spec, AnnotationStore& store,
                      const BatchOptions& options) {
  spec.check();
  BatchReport report;
  for (const auto& entry : manifest.entries) {
    FrameOutcome outcome{entry.frame_id, FrameStatus::Processed, ""};
    try {
      const auto stored = store.get(entry.frame_id);
      FrameAnnotation human;
      human.frame_id = entry.frame_id;
      if (stored) human = human_part(*stored);

      if (!entry.cloud) {
        outcome.status = FrameStatus::Skipped;
        outcome.message = "no point cloud referenced";
      } else {
        const PointCloud cloud = load_point_cloud_file(*entry.cloud, entry.frame_id);
        const Suggestion s = suggest_precipitation(cloud, spec, options.classify);
        FrameAnnotation merged = merge(s, human, options.now);
        if (!options.dry_run) store.put(std::move(merged));
        std::ostringstream msg;
        msg << "intensity=" << to_string(s.intensity) << " clutter_fraction=" << s.clutter_fraction;
        for (const auto& d : s.diagnostics) msg << "; " << d;
        outcome.message = msg.str();
      }
    } catch (const std::exception& e) {
      outcome.status = FrameStatus::Failed;
      outcome.message = e.what();
    }
    switch (outcome.status) {
      case FrameStatus::Processed: ++report.processed; break;
      case FrameStatus::Failed: ++report.failed; break;
      case FrameStatus::Skipped: ++report.skipped; break;
    }
    report.frames.push_back(std::move(outcome));
  }
  if (!options.dry_run && !store.path().empty()) store.compact();
  return report;
}

// ---------------------------------------------------------------------------
// Histogram

namespace {

template <typename E>
LabelHistogram::Row zero_row(std::string category) {
  LabelHistogram::Row row{std::move(category), {}};
  for (auto name : enum_names<E>()) row.counts.emplace_back(std::string(name), 0);
  return row;
}

void bump(LabelHistogram::Row& row, std::string_view value) {
  for (auto& [name, count] : row.counts) {
    if (name == value) {
      ++count;
      return;
    }
  }
}

}  // namespace

LabelHistogram LabelHistogram::zero() {
  LabelHistogram h;
  h.rows.push_back(zero_row<Daytime>("daytime"));
  h.rows.push_back(zero_row<PrecipitationKind>("precipitation_kind"));
  h.rows.push_back(zero_row<Intensity>("precipitation_intensity"));
  h.rows.push_back(zero_row<Fog>("fog"));
  h.rows.push_back(zero_row<Surface>("road"));
  h.rows.push_back(zero_row<Surface>("roadside"));
  h.rows.push_back(zero_row<Infrastructure>("infrastructure"));
  return h;
}

std::size_t LabelHistogram::count(std::string_view category, std::string_view value) const {
  for (const auto& row : rows) {
    if (row.category != category) continue;
    for (const auto& [name, c] : row.counts) {
      if (name == value) return c;
    }
  }
  return 0;
}

std::string LabelHistogram::to_table() const {
  std::ostringstream out;
  out << "frames: " << frames << "\n";
  for (const auto& row : rows) {
    out << row.category << "\n";
    for (const auto& [name, c] : row.counts) {
      out << "  ";
      out.width(14);
      out << std::left << name;
      out.width(8);
      out << std::right << c << "\n";
    }
  }
  return out.str();
}

std::string LabelHistogram::to_json() const {
  Json j;
  j["frames"] = frames;
  Json cats = Json::object();
  for (const auto& row : rows) {
    Json counts = Json::object();
    for (const auto& [name, c] : row.counts) counts[name] = c;
    cats[row.category] = std::move(counts);
  }
  j["categories"] = std::move(cats);
  return j.dump();
}

LabelHistogram stats(const std::vector<FrameAnnotation>& annotations) {
  LabelHistogram h = LabelHistogram::zero();
  for (const auto& a : annotations) {
    if (!validate(a, ValidationMode::Final).empty()) continue;
    const LabelDraft& l = a.label;
    ++h.frames;
    bump(h.rows[0], to_string(*l.daytime));
    bump(h.rows[1], to_string(*l.precipitation_kind));
    if (l.precipitation_intensity) bump(h.rows[2], to_string(*l.precipitation_intensity));
    bump(h.rows[3], to_string(*l.fog));
    bump(h.rows[4], to_string(*l.road));
    bump(h.rows[5], to_string(*l.roadside));
    bump(h.rows[6], to_string(*l.infrastructure));
  }
  return h;
}

LabelHistogram stats(const AnnotationStore& store) { return stats(store.all()); }

}  // namespace envlabel
