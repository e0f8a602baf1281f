#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "envlabel/label_model.hpp"

namespace envlabel {

/// Append-only annotation log with last-write-wins per frame_id.
///
/// Each put appends one complete line with a single write(2); a torn final
/// line left by a crash is skipped on load and never disturbs earlier
/// records. Compaction rewrites the live set to a temporary file and renames
/// it over the log. All mutation goes through one writer lock; readers share.
class AnnotationStore {
 public:
  struct Options {
    bool read_only = false;
    bool fsync = true;
    /// Compact once the log holds this many superseded lines (0 disables).
    std::size_t compact_after = 256;
  };

  struct LoadIssue {
    std::size_t line = 0;
    std::string frame_id;  // empty if the line was unreadable
    std::string message;
  };

  /// Opens or creates the log at `path`. Read-only stores require the file to
  /// exist. A writable store truncates a torn final line before appending.
  /// Throws std::runtime_error on I/O failure.
  explicit AnnotationStore(std::filesystem::path path);
  AnnotationStore(std::filesystem::path path, Options options);
  /// Purely in-memory store (tests, dry runs).
  AnnotationStore();
  ~AnnotationStore();

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  std::optional<FrameAnnotation> get(const std::string& frame_id) const;
  /// Live records ordered by frame_id.
  std::vector<FrameAnnotation> all() const;
  std::size_t size() const;
  const std::vector<LoadIssue>& load_issues() const { return issues_; }
  const std::filesystem::path& path() const { return path_; }

  /// Stores `annotation` unless a record with a later updated_at exists;
  /// returns the record that is live afterwards. Throws std::invalid_argument
  /// if the annotation fails Draft validation, std::logic_error if read-only.
  FrameAnnotation put(FrameAnnotation annotation);

  /// Like put, but first moves updated_at to max(updated_at, stored + 1 ms) so
  /// that the write always wins. Used for interactive edits.
  FrameAnnotation put_latest(FrameAnnotation annotation);

  /// Rewrites the log to exactly one line per live record, ordered by frame_id.
  void compact();

 private:
  FrameAnnotation put_locked(FrameAnnotation annotation);
  void append_line(const std::string& line);
  void open_for_append();
  void load();
  void compact_locked();

  std::filesystem::path path_;
  Options options_;
  int fd_ = -1;
  std::size_t superseded_ = 0;
  std::optional<std::uintmax_t> torn_offset_;  // start of an unterminated final line
  std::map<std::string, FrameAnnotation> records_;
  std::vector<LoadIssue> issues_;
  mutable std::shared_mutex mutex_;
};

}  // namespace envlabel
