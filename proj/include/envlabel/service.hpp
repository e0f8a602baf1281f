#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "envlabel/autolabel.hpp"
#include "envlabel/pointcloud.hpp"
#include "envlabel/store.hpp"

namespace httplib {
class Server;
}

namespace envlabel {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  LidarSpec spec;
  bool read_only = false;
};

/// HTTP/JSON annotation service backing the review UI.
///
///   GET  /healthz
///   GET  /api/frames?offset=&limit=
///   GET  /api/frames/{id}
///   GET  /api/frames/{id}/image
///   PUT  /api/frames/{id}/annotation
///   GET  /api/stats
///   GET  /api/export
///
/// Handlers run concurrently; every write goes through the store's single
/// writer. Point-cloud suggestions are computed on first request and cached.
class AnnotationService {
 public:
  AnnotationService(ServiceConfig config, AnnotationStore& store, DatasetManifest manifest);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds the listening socket and returns the port. Throws
  /// std::runtime_error if the address is unavailable.
  int bind();
  /// Serves until stop(); bind() must have succeeded. Returns at once if
  /// stop() was already called.
  void run();
  /// Safe from any thread, before or during run().
  void stop();
  int port() const { return port_; }

  /// Cached LiDAR suggestion for a manifest frame; nullopt without a cloud.
  std::optional<Suggestion> suggestion_for(const std::string& frame_id);

 private:
  void install_routes();
  bool known_frame(const std::string& frame_id) const;

  ServiceConfig config_;
  AnnotationStore& store_;
  DatasetManifest manifest_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;
  std::mutex run_mutex_;
  bool running_ = false;
  bool stop_requested_ = false;
  std::mutex cache_mutex_;
  std::map<std::string, std::optional<Suggestion>> suggestions_;
};

}  // namespace envlabel
