#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "envlabel/label_model.hpp"
#include "envlabel/pointcloud.hpp"
#include "envlabel/store.hpp"

namespace envlabel {

struct ManifestEntry {
  std::string frame_id;
  std::filesystem::path image;                // resolved against the manifest root
  std::optional<std::filesystem::path> cloud;  // absent for image-only frames ("-" or empty)
};

/// Tab-separated manifest: frame_id, image path, cloud path. Relative paths
/// resolve against the manifest's directory. Blank lines and lines starting
/// with '#' are ignored.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  /// Throws FormatError for malformed lines or duplicate frame ids.
  static DatasetManifest load(const std::filesystem::path& path);
  static DatasetManifest parse(std::string_view text, std::filesystem::path root);

  const ManifestEntry* find(const std::string& frame_id) const;
};

/// LiDAR-derived precipitation intensity for one frame. Kind (rain or snow)
/// is never suggested.
struct Suggestion {
  std::string frame_id;
  Intensity intensity = Intensity::Light;
  double clutter_fraction = 0.0;
  std::vector<std::string> diagnostics;
};

Suggestion suggest_precipitation(const PointCloud& cloud, const LidarSpec& spec,
                                 ClassifyOptions options = {});

/// Categories of `stored` that a human entered. Precipitation kind is always
/// human-entered; the intensity only when precipitation provenance is Human.
FrameAnnotation human_part(const FrameAnnotation& stored);

/// Combines a suggestion with human input. Human values win for every
/// category they set; a human kind of None drops any intensity. Throws
/// std::invalid_argument if the frame ids differ or `human` is not
/// Draft-valid.
FrameAnnotation merge(const std::optional<Suggestion>& suggestion, const FrameAnnotation& human,
                      Timestamp updated_at);

enum class FrameStatus { Processed, Failed, Skipped };
std::string_view to_string(FrameStatus status);

struct FrameOutcome {
  std::string frame_id;
  FrameStatus status = FrameStatus::Processed;
  std::string message;
};

struct BatchReport {
  std::vector<FrameOutcome> frames;
  std::size_t processed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;

  /// One record per frame, then a summary record.
  std::string to_records() const;
};

struct BatchOptions {
  Timestamp now{};
  bool dry_run = false;
  ClassifyOptions classify{};
};

/// Suggests and merges every manifest frame into `store`, then compacts it.
/// Per-frame failures are recorded in the report, never thrown.
BatchReport run_batch(const DatasetManifest& manifest, const LidarSpec& spec, AnnotationStore& store,
                      const BatchOptions& options);

/// Per-category value counts over Final-valid annotations.
struct LabelHistogram {
  struct Row {
    std::string category;  // record key: daytime, precipitation_kind, ...
    std::vector<std::pair<std::string, std::size_t>> counts;
  };
  std::vector<Row> rows;
  std::size_t frames = 0;

  static LabelHistogram zero();
  std::size_t count(std::string_view category, std::string_view value) const;
  std::string to_table() const;
  std::string to_json() const;
};

LabelHistogram stats(const std::vector<FrameAnnotation>& annotations);
LabelHistogram stats(const AnnotationStore& store);

}  // namespace envlabel
