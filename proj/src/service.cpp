#include "envlabel/service.hpp"

#include <httplib.h>

#include <fstream>
#include <set>
#include <sstream>

#include "envlabel/errors.hpp"
#include "envlabel/record.hpp"

namespace envlabel {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = "") {
  Json body;
  body["error"] = message;
  if (!field.empty()) body["field"] = field;
  send_json(res, status, body);
}

std::string completion(const std::optional<FrameAnnotation>& a) {
  if (!a) return "unlabeled";
  if (validate(*a, ValidationMode::Final).empty()) return "complete";
  for (Category c : kCategories) {
    if (a->label.has(c)) return "partial";
  }
  return "unlabeled";
}

std::string image_url(const std::string& frame_id) { return "/api/frames/" + frame_id + "/image"; }

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  return "application/octet-stream";
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t pos = 0;
  const unsigned long long n = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(key);
  return static_cast<std::size_t>(n);
}

}  // namespace

AnnotationService::AnnotationService(ServiceConfig config, AnnotationStore& store, DatasetManifest manifest)
    : config_(std::move(config)),
      store_(store),
      manifest_(std::move(manifest)),
      server_(std::make_unique<httplib::Server>()) {
  config_.spec.check();
  // httplib defaults to SO_REUSEPORT, which would let a second instance share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ < 0) {
    throw std::runtime_error("cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  }
  return port_;
}

void AnnotationService::run() {
  {
    std::lock_guard lock(run_mutex_);
    if (stop_requested_) return;
    running_ = true;
  }
  server_->listen_after_bind();
}

void AnnotationService::stop() {
  bool started;
  {
    std::lock_guard lock(run_mutex_);
    stop_requested_ = true;
    started = running_;
  }
  // Once run() has committed to listening, stopping early would be lost.
  if (started) server_->wait_until_ready();
  server_->stop();
}

bool AnnotationService::known_frame(const std::string& frame_id) const {
  return manifest_.find(frame_id) != nullptr || store_.get(frame_id).has_value();
}

std::optional<Suggestion> AnnotationService::suggestion_for(const std::string& frame_id) {
  {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = suggestions_.find(frame_id); it != suggestions_.end()) return it->second;
  }
  std::optional<Suggestion> s;
  const ManifestEntry* entry = manifest_.find(frame_id);
  if (entry != nullptr && entry->cloud) {
    try {
      s = suggest_precipitation(load_point_cloud_file(*entry->cloud, frame_id), config_.spec);
    } catch (const std::exception&) {
      s.reset();
    }
  }
  std::lock_guard lock(cache_mutex_);
  return suggestions_.emplace(frame_id, std::move(s)).first->second;
}

void AnnotationService::install_routes() {
  auto& srv = *server_;

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"}});
  });

  srv.Get("/api/frames", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t offset = 0;
    std::size_t limit = 50;
    try {
      offset = query_size(req, "offset", 0);
      limit = query_size(req, "limit", 50);
    } catch (const std::exception&) {
      send_error(res, 400, "offset and limit must be non-negative integers");
      return;
    }
    std::vector<std::string> ids;
    std::set<std::string> listed;
    for (const auto& e : manifest_.entries) {
      ids.push_back(e.frame_id);
      listed.insert(e.frame_id);
    }
    const auto records = store_.all();
    for (const auto& a : records) {
      if (!listed.count(a.frame_id)) ids.push_back(a.frame_id);
    }
    Json frames = Json::array();
    for (std::size_t i = offset; i < ids.size() && i < offset + limit; ++i) {
      const ManifestEntry* entry = manifest_.find(ids[i]);
      Json f;
      f["frame_id"] = ids[i];
      f["status"] = completion(store_.get(ids[i]));
      f["image_url"] = entry != nullptr && !entry->image.empty() ? Json(image_url(ids[i])) : Json(nullptr);
      frames.push_back(std::move(f));
    }
    Json body;
    body["total"] = ids.size();
    body["offset"] = offset;
    body["limit"] = limit;
    body["frames"] = std::move(frames);
    send_json(res, 200, body);
  });

  srv.Get(R"(/api/frames/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!known_frame(id)) {
      send_error(res, 404, "unknown frame " + id);
      return;
    }
    const auto stored = store_.get(id);
    const auto s = suggestion_for(id);
    const ManifestEntry* entry = manifest_.find(id);
    Json body;
    body["annotation"] = stored ? to_json(*stored) : Json(nullptr);
    if (s) {
      body["auto_suggestion"] = Json{{"intensity", std::string(to_string(s->intensity))},
                                     {"clutter_fraction", s->clutter_fraction}};
    } else {
      body["auto_suggestion"] = nullptr;
    }
    body["image_url"] = entry != nullptr && !entry->image.empty() ? Json(image_url(id)) : Json(nullptr);
    send_json(res, 200, body);
  });

  srv.Get(R"(/api/frames/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const ManifestEntry* entry = manifest_.find(id);
    if (entry == nullptr || entry->image.empty()) {
      send_error(res, 404, "no image for frame " + id);
      return;
    }
    std::ifstream in(entry->image, std::ios::binary);
    if (!in) {
      send_error(res, 404, "image file missing for frame " + id);
      return;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    res.status = 200;
    res.set_content(buf.str(), content_type_for(entry->image));
  });

  srv.Put(R"(/api/frames/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (config_.read_only) {
      send_error(res, 403, "service is read-only");
      return;
    }
    if (!known_frame(id)) {
      send_error(res, 404, "unknown frame " + id);
      return;
    }
    FrameAnnotation human;
    try {
      human = human_draft_from_json(parse_json_strict(req.body), id);
    } catch (const ParseError& e) {
      send_error(res, 400, e.what(), e.field());
      return;
    }
    if (const auto violations = validate(human, ValidationMode::Draft); !violations.empty()) {
      Json list = Json::array();
      for (const auto& v : violations) list.push_back(Json{{"field", v.field}, {"message", v.message}});
      send_json(res, 422, Json{{"error", "annotation violates the label hierarchy"}, {"violations", list}});
      return;
    }
    try {
      const FrameAnnotation merged = merge(suggestion_for(id), human, now_utc());
      const FrameAnnotation live = store_.put_latest(merged);
      send_json(res, 200, to_json(live));
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(stats(store_).to_json(), "application/json");
  });

  srv.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    std::string out;
    for (const auto& a : store_.all()) {
      out += to_json(a).dump();
      out += '\n';
    }
    res.status = 200;
    res.set_content(out, "application/x-ndjson");
  });
}

}  // namespace envlabel
