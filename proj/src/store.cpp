#include "envlabel/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include "envlabel/errors.hpp"
#include "envlabel/record.hpp"

namespace envlabel {

namespace {

[[noreturn]] void throw_errno(const std::string& what, const std::filesystem::path& p) {
  throw std::runtime_error(what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const std::filesystem::path& p) {
  const char* ptr = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, ptr, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write failed for", p);
    }
    ptr += n;
    left -= static_cast<std::size_t>(n);
  }
}

}  // namespace

AnnotationStore::AnnotationStore() : options_{.read_only = false, .fsync = false, .compact_after = 0} {}

AnnotationStore::AnnotationStore(std::filesystem::path path) : AnnotationStore(std::move(path), Options{}) {}

AnnotationStore::AnnotationStore(std::filesystem::path path, Options options)
    : path_(std::move(path)), options_(options) {
  if (!std::filesystem::exists(path_)) {
    if (options_.read_only) throw std::runtime_error("annotation store not found: " + path_.string());
  } else {
    load();
  }
  if (!options_.read_only) {
    // Drop a torn tail so the next append starts on a fresh line.
    if (torn_offset_) std::filesystem::resize_file(path_, *torn_offset_);
    open_for_append();
  }
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationStore::open_for_append() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("cannot open", path_);
}

void AnnotationStore::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read annotation store " + path_.string());
  std::string line;
  std::size_t line_no = 0;
  std::uintmax_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool torn = in.eof();  // no terminating newline
    if (torn) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        issues_.push_back({line_no, "", "truncated final record ignored"});
      }
      torn_offset_ = offset;
      break;
    }
    offset += line.size() + 1;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      FrameAnnotation a = deserialize(line);
      auto it = records_.find(a.frame_id);
      if (it == records_.end()) {
        records_.emplace(a.frame_id, std::move(a));
      } else {
        ++superseded_;
        if (a.updated_at >= it->second.updated_at) it->second = std::move(a);
      }
    } catch (const ParseError& e) {
      std::string frame_id;
      try {
        const auto j = Json::parse(line);
        if (j.is_object() && j.contains("frame_id") && j["frame_id"].is_string()) {
          frame_id = j["frame_id"].get<std::string>();
        }
      } catch (const std::exception&) {
      }
      issues_.push_back({line_no, frame_id, e.what()});
    }
  }
}

std::optional<FrameAnnotation> AnnotationStore::get(const std::string& frame_id) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find(frame_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<FrameAnnotation> AnnotationStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<FrameAnnotation> out;
  out.reserve(records_.size());
  for (const auto& [id, a] : records_) out.push_back(a);
  return out;
}

std::size_t AnnotationStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

FrameAnnotation AnnotationStore::put(FrameAnnotation annotation) {
  std::unique_lock lock(mutex_);
  return put_locked(std::move(annotation));
}

FrameAnnotation AnnotationStore::put_latest(FrameAnnotation annotation) {
  std::unique_lock lock(mutex_);
  if (const auto it = records_.find(annotation.frame_id); it != records_.end()) {
    const Timestamp floor = it->second.updated_at + std::chrono::milliseconds{1};
    if (annotation.updated_at < floor) annotation.updated_at = floor;
  }
  return put_locked(std::move(annotation));
}

FrameAnnotation AnnotationStore::put_locked(FrameAnnotation annotation) {
  if (options_.read_only) throw std::logic_error("annotation store is read-only");
  const std::string line = serialize(annotation);  // validates
  auto it = records_.find(annotation.frame_id);
  if (it != records_.end() && it->second.updated_at > annotation.updated_at) return it->second;

  if (!path_.empty()) append_line(line + "\n");
  if (it == records_.end()) {
    it = records_.emplace(annotation.frame_id, std::move(annotation)).first;
  } else {
    it->second = std::move(annotation);
    ++superseded_;
  }
  FrameAnnotation live = it->second;
  if (!path_.empty() && options_.compact_after > 0 && superseded_ >= options_.compact_after) {
    compact_locked();
  }
  return live;
}

void AnnotationStore::append_line(const std::string& line) {
  write_all(fd_, line, path_);
  if (options_.fsync && ::fsync(fd_) != 0) throw_errno("fsync failed for", path_);
}

void AnnotationStore::compact() {
  std::unique_lock lock(mutex_);
  if (options_.read_only) throw std::logic_error("annotation store is read-only");
  compact_locked();
}

void AnnotationStore::compact_locked() {
  superseded_ = 0;
  if (path_.empty()) return;
  std::string payload;
  for (const auto& [id, a] : records_) {
    payload += to_json(a).dump();
    payload += '\n';
  }
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("cannot open", tmp);
  try {
    write_all(fd, payload, tmp);
    if (options_.fsync && ::fsync(fd) != 0) throw_errno("fsync failed for", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::filesystem::rename(tmp, path_);
  if (options_.fsync) {
    const auto dir = path_.has_parent_path() ? path_.parent_path() : std::filesystem::path(".");
    const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }
  open_for_append();
}

}  // namespace envlabel
