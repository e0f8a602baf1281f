#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Environment-condition taxonomy: six independent categories per frame, with
// precipitation split into kind and intensity so that it can co-occur with fog
// and road and roadside surfaces are labeled separately.
namespace envlabel {

enum class Daytime { Day, Night, Twilight };
enum class PrecipitationKind { None, Rain, Snow };
enum class Intensity { Light, Heavy };
enum class Fog { None, LightFog, DenseFog };
enum class Surface { Dry, Wet, PartialSnow, FullSnow };
enum class Infrastructure { Urban, Suburban, Highway, Rural };

enum class Category { Daytime, Precipitation, Fog, Road, Roadside, Infrastructure };
inline constexpr std::size_t kCategoryCount = 6;
inline constexpr std::array<Category, kCategoryCount> kCategories = {
    Category::Daytime, Category::Precipitation, Category::Fog,
    Category::Road,    Category::Roadside,      Category::Infrastructure};

/// Where a category's value came from.
enum class Source { Unset, Auto, Human };

enum class ValidationMode { Draft, Final };

// Closed name tables. parse_enum never yields a value outside these.
template <typename E>
std::span<const std::string_view> enum_names();

template <> std::span<const std::string_view> enum_names<Daytime>();
template <> std::span<const std::string_view> enum_names<PrecipitationKind>();
template <> std::span<const std::string_view> enum_names<Intensity>();
template <> std::span<const std::string_view> enum_names<Fog>();
template <> std::span<const std::string_view> enum_names<Surface>();
template <> std::span<const std::string_view> enum_names<Infrastructure>();
template <> std::span<const std::string_view> enum_names<Source>();

template <typename E>
std::string_view to_string(E value) {
  return enum_names<E>()[static_cast<std::size_t>(value)];
}

template <typename E>
std::optional<E> parse_enum(std::string_view text) {
  const auto names = enum_names<E>();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  return std::nullopt;
}

/// Record key for a category ("daytime", "precipitation", ...).
std::string_view category_key(Category c);
/// Display name used in report tables ("Road Condition", ...).
std::string_view category_title(Category c);
std::optional<Category> parse_category(std::string_view key);

struct Precipitation {
  PrecipitationKind kind = PrecipitationKind::None;
  std::optional<Intensity> intensity;  // present iff kind != None

  bool operator==(const Precipitation&) const = default;
};

/// A complete label: all six categories assigned.
struct EnvironmentLabel {
  Daytime daytime = Daytime::Day;
  Precipitation precipitation;
  Fog fog = Fog::None;
  Surface road = Surface::Dry;
  Surface roadside = Surface::Dry;
  Infrastructure infrastructure = Infrastructure::Urban;

  bool operator==(const EnvironmentLabel&) const = default;
};

/// A possibly partial label as stored and exchanged while annotation is in
/// progress. Every field may be missing.
struct LabelDraft {
  std::optional<Daytime> daytime;
  std::optional<PrecipitationKind> precipitation_kind;
  std::optional<Intensity> precipitation_intensity;
  std::optional<Fog> fog;
  std::optional<Surface> road;
  std::optional<Surface> roadside;
  std::optional<Infrastructure> infrastructure;

  bool operator==(const LabelDraft&) const = default;

  bool has(Category c) const;
  void clear(Category c);

  /// The complete label, if every category is set and precipitation is consistent.
  std::optional<EnvironmentLabel> complete() const;
  static LabelDraft from(const EnvironmentLabel& label);
};

struct Provenance {
  std::array<Source, kCategoryCount> sources{};

  Source& operator[](Category c) { return sources[static_cast<std::size_t>(c)]; }
  Source operator[](Category c) const { return sources[static_cast<std::size_t>(c)]; }
  bool operator==(const Provenance&) const = default;
};

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// RFC-3339 UTC with millisecond precision, e.g. "2024-03-01T12:00:00.000Z".
std::string format_timestamp(Timestamp t);
/// Accepts "Z" or a numeric offset and up to nine fractional digits
/// (truncated to milliseconds). Throws ParseError.
Timestamp parse_timestamp(std::string_view text);
Timestamp now_utc();

struct FrameAnnotation {
  std::string frame_id;
  LabelDraft label;
  Provenance provenance;
  std::optional<double> clutter_fraction;
  Timestamp updated_at{};

  bool operator==(const FrameAnnotation&) const = default;
};

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Empty iff the annotation satisfies the hierarchy constraints for `mode`.
/// Final additionally requires all six categories.
std::vector<Violation> validate(const FrameAnnotation& annotation, ValidationMode mode);

// Category values as class indices, used by the trainer and the metrics.
// Precipitation is the joint of kind and intensity:
// None, LightRain, HeavyRain, LightSnow, HeavySnow.
std::size_t class_count(Category c);
std::size_t class_index(const EnvironmentLabel& label, Category c);
std::string_view class_name(Category c, std::size_t index);
/// Sets category `c` of `label` from a class index. Throws std::out_of_range.
void assign_class(EnvironmentLabel& label, Category c, std::size_t index);

}  // namespace envlabel
