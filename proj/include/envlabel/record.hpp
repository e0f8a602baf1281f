#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "envlabel/label_model.hpp"

// Line-record encoding of FrameAnnotation: one JSON object per line with the
// keys frame_id, daytime, precipitation_kind, precipitation_intensity, fog,
// road, roadside, infrastructure, provenance, clutter_fraction, updated_at.
// Category values are null while unset.
namespace envlabel {

using Json = nlohmann::ordered_json;

/// Parses one JSON value, rejecting objects with repeated keys. Throws ParseError.
Json parse_json_strict(std::string_view text);

Json to_json(const FrameAnnotation& annotation);
/// Requires every record key; rejects unknown keys and unknown enum values.
FrameAnnotation from_json(const Json& record);

/// Single-line record without trailing newline. Throws std::invalid_argument
/// unless the annotation passes Draft validation.
std::string serialize(const FrameAnnotation& annotation);
FrameAnnotation deserialize(std::string_view line);

/// Reads the human-entered part of a record as sent by a client: category keys
/// may be omitted or null; provenance, clutter_fraction and updated_at are
/// ignored if present; any other key is rejected. Returned categories carry
/// Human provenance.
FrameAnnotation human_draft_from_json(const Json& body, std::string frame_id);

}  // namespace envlabel
