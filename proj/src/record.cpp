#include "envlabel/record.hpp"

#include <array>
#include <set>
#include <stdexcept>
#include <vector>

#include "envlabel/errors.hpp"

namespace envlabel {

namespace {

constexpr std::array<std::string_view, 11> kRecordKeys = {
    "frame_id", "daytime", "precipitation_kind", "precipitation_intensity", "fog", "road",
    "roadside", "infrastructure", "provenance", "clutter_fraction", "updated_at"};

template <typename E>
Json enum_json(const std::optional<E>& v) {
  return v ? Json(std::string(to_string(*v))) : Json(nullptr);
}

template <typename E>
std::optional<E> read_enum(const Json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(std::string(key), "expected a string or null");
  const auto& text = it->template get_ref<const std::string&>();
  auto value = parse_enum<E>(text);
  if (!value) throw ParseError(std::string(key), "unknown value \"" + text + "\"");
  return value;
}

void read_label(const Json& obj, LabelDraft& label) {
  label.daytime = read_enum<Daytime>(obj, "daytime");
  label.precipitation_kind = read_enum<PrecipitationKind>(obj, "precipitation_kind");
  label.precipitation_intensity = read_enum<Intensity>(obj, "precipitation_intensity");
  label.fog = read_enum<Fog>(obj, "fog");
  label.road = read_enum<Surface>(obj, "road");
  label.roadside = read_enum<Surface>(obj, "roadside");
  label.infrastructure = read_enum<Infrastructure>(obj, "infrastructure");
}

}  // namespace

Json parse_json_strict(std::string_view text) {
  // Track the keys seen at each open object; nlohmann keeps the last duplicate silently.
  std::vector<std::set<std::string>> seen;
  std::string duplicate;
  auto callback = [&](int /*depth*/, Json::parse_event_t event, Json& parsed) {
    switch (event) {
      case Json::parse_event_t::object_start: seen.emplace_back(); break;
      case Json::parse_event_t::object_end:
        if (!seen.empty()) seen.pop_back();
        break;
      case Json::parse_event_t::key: {
        const auto& key = parsed.get_ref<const std::string&>();
        if (!seen.empty() && !seen.back().insert(key).second && duplicate.empty()) duplicate = key;
        break;
      }
      default: break;
    }
    return true;
  };
  Json value;
  try {
    value = Json::parse(text.begin(), text.end(), callback);
  } catch (const Json::parse_error& e) {
    throw ParseError("", std::string("malformed record: ") + e.what());
  }
  if (!duplicate.empty()) throw ParseError(duplicate, "duplicate field");
  return value;
}

Json to_json(const FrameAnnotation& a) {
  Json j;
  j["frame_id"] = a.frame_id;
  j["daytime"] = enum_json(a.label.daytime);
  j["precipitation_kind"] = enum_json(a.label.precipitation_kind);
  j["precipitation_intensity"] = enum_json(a.label.precipitation_intensity);
  j["fog"] = enum_json(a.label.fog);
  j["road"] = enum_json(a.label.road);
  j["roadside"] = enum_json(a.label.roadside);
  j["infrastructure"] = enum_json(a.label.infrastructure);
  Json prov = Json::object();
  for (Category c : kCategories) prov[std::string(category_key(c))] = std::string(to_string(a.provenance[c]));
  j["provenance"] = std::move(prov);
  j["clutter_fraction"] = a.clutter_fraction ? Json(*a.clutter_fraction) : Json(nullptr);
  j["updated_at"] = format_timestamp(a.updated_at);
  return j;
}

FrameAnnotation from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("", "record is not an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : kRecordKeys) known = known || key == item.key();
    if (!known) throw ParseError(item.key(), "unknown field");
  }
  for (auto key : kRecordKeys) {
    if (!j.contains(std::string(key))) throw ParseError(std::string(key), "missing field");
  }

  FrameAnnotation a;
  const auto& id = j.at("frame_id");
  if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
    throw ParseError("frame_id", "expected a non-empty string");
  }
  a.frame_id = id.get<std::string>();
  read_label(j, a.label);

  const auto& prov = j.at("provenance");
  if (!prov.is_object()) throw ParseError("provenance", "expected an object");
  for (const auto& item : prov.items()) {
    if (!parse_category(item.key())) throw ParseError("provenance." + item.key(), "unknown category");
  }
  for (Category c : kCategories) {
    const std::string key(category_key(c));
    const auto it = prov.find(key);
    if (it == prov.end()) throw ParseError("provenance." + key, "missing field");
    if (!it->is_string()) throw ParseError("provenance." + key, "expected a string");
    const auto src = parse_enum<Source>(it->get_ref<const std::string&>());
    if (!src) throw ParseError("provenance." + key, "unknown value \"" + it->get<std::string>() + "\"");
    a.provenance[c] = *src;
  }

  const auto& cf = j.at("clutter_fraction");
  if (!cf.is_null()) {
    if (!cf.is_number()) throw ParseError("clutter_fraction", "expected a number or null");
    a.clutter_fraction = cf.get<double>();
  }

  const auto& ts = j.at("updated_at");
  if (!ts.is_string()) throw ParseError("updated_at", "expected an RFC-3339 string");
  a.updated_at = parse_timestamp(ts.get_ref<const std::string&>());
  return a;
}

std::string serialize(const FrameAnnotation& a) {
  const auto violations = validate(a, ValidationMode::Draft);
  if (!violations.empty()) {
    throw std::invalid_argument("cannot serialize invalid annotation " + a.frame_id + ": " +
                                violations.front().field + ": " + violations.front().message);
  }
  return to_json(a).dump();
}

FrameAnnotation deserialize(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return from_json(parse_json_strict(line));
}

FrameAnnotation human_draft_from_json(const Json& body, std::string frame_id) {
  if (!body.is_object()) throw ParseError("", "body is not an object");
  for (const auto& item : body.items()) {
    bool known = false;
    for (auto key : kRecordKeys) known = known || key == item.key();
    if (!known) throw ParseError(item.key(), "unknown field");
  }
  if (const auto it = body.find("frame_id"); it != body.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("frame_id", "expected a string");
    if (it->get_ref<const std::string&>() != frame_id) {
      throw ParseError("frame_id", "does not match the addressed frame");
    }
  }
  FrameAnnotation a;
  a.frame_id = std::move(frame_id);
  read_label(body, a.label);
  for (Category c : kCategories) a.provenance[c] = a.label.has(c) ? Source::Human : Source::Unset;
  return a;
}

}  // namespace envlabel
