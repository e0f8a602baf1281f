#include "envlabel/label_model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "envlabel/errors.hpp"

namespace envlabel {

namespace {
constexpr std::array<std::string_view, 3> kDaytimeNames = {"Day", "Night", "Twilight"};
constexpr std::array<std::string_view, 3> kKindNames = {"None", "Rain", "Snow"};
constexpr std::array<std::string_view, 2> kIntensityNames = {"Light", "Heavy"};
constexpr std::array<std::string_view, 3> kFogNames = {"None", "LightFog", "DenseFog"};
constexpr std::array<std::string_view, 4> kSurfaceNames = {"Dry", "Wet", "PartialSnow", "FullSnow"};
constexpr std::array<std::string_view, 4> kInfrastructureNames = {"Urban", "Suburban", "Highway",
                                                                  "Rural"};
constexpr std::array<std::string_view, 3> kSourceNames = {"Unset", "Auto", "Human"};
constexpr std::array<std::string_view, kCategoryCount> kCategoryKeys = {
    "daytime", "precipitation", "fog", "road", "roadside", "infrastructure"};
constexpr std::array<std::string_view, kCategoryCount> kCategoryTitles = {
    "Daytime", "Precipitation", "Fog", "Road Condition", "Roadside Condition", "Infrastructure"};
constexpr std::array<std::string_view, 5> kPrecipitationClasses = {"None", "LightRain", "HeavyRain",
                                                                   "LightSnow", "HeavySnow"};
}  // namespace

template <>
std::span<const std::string_view> enum_names<Daytime>() { return kDaytimeNames; }
template <>
std::span<const std::string_view> enum_names<PrecipitationKind>() { return kKindNames; }
template <>
std::span<const std::string_view> enum_names<Intensity>() { return kIntensityNames; }
template <>
std::span<const std::string_view> enum_names<Fog>() { return kFogNames; }
template <>
std::span<const std::string_view> enum_names<Surface>() { return kSurfaceNames; }
template <>
std::span<const std::string_view> enum_names<Infrastructure>() { return kInfrastructureNames; }
template <>
std::span<const std::string_view> enum_names<Source>() { return kSourceNames; }

std::string_view category_key(Category c) { return kCategoryKeys[static_cast<std::size_t>(c)]; }
std::string_view category_title(Category c) { return kCategoryTitles[static_cast<std::size_t>(c)]; }

std::optional<Category> parse_category(std::string_view key) {
  for (std::size_t i = 0; i < kCategoryKeys.size(); ++i) {
    if (kCategoryKeys[i] == key) return static_cast<Category>(i);
  }
  return std::nullopt;
}

bool LabelDraft::has(Category c) const {
  switch (c) {
    case Category::Daytime: return daytime.has_value();
    case Category::Precipitation:
      return precipitation_kind.has_value() || precipitation_intensity.has_value();
    case Category::Fog: return fog.has_value();
    case Category::Road: return road.has_value();
    case Category::Roadside: return roadside.has_value();
    case Category::Infrastructure: return infrastructure.has_value();
  }
  return false;
}

void LabelDraft::clear(Category c) {
  switch (c) {
    case Category::Daytime: daytime.reset(); break;
    case Category::Precipitation:
      precipitation_kind.reset();
      precipitation_intensity.reset();
      break;
    case Category::Fog: fog.reset(); break;
    case Category::Road: road.reset(); break;
    case Category::Roadside: roadside.reset(); break;
    case Category::Infrastructure: infrastructure.reset(); break;
  }
}

std::optional<EnvironmentLabel> LabelDraft::complete() const {
  if (!daytime || !precipitation_kind || !fog || !road || !roadside || !infrastructure) {
    return std::nullopt;
  }
  const bool wants_intensity = *precipitation_kind != PrecipitationKind::None;
  if (wants_intensity != precipitation_intensity.has_value()) return std::nullopt;
  EnvironmentLabel label;
  label.daytime = *daytime;
  label.precipitation = {*precipitation_kind, precipitation_intensity};
  label.fog = *fog;
  label.road = *road;
  label.roadside = *roadside;
  label.infrastructure = *infrastructure;
  return label;
}

LabelDraft LabelDraft::from(const EnvironmentLabel& label) {
  LabelDraft d;
  d.daytime = label.daytime;
  d.precipitation_kind = label.precipitation.kind;
  d.precipitation_intensity = label.precipitation.intensity;
  d.fog = label.fog;
  d.road = label.road;
  d.roadside = label.roadside;
  d.infrastructure = label.infrastructure;
  return d;
}

// ---------------------------------------------------------------------------
// Timestamps

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss tod{t - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

namespace {

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
  if (pos + count > text.size()) throw ParseError("updated_at", "truncated timestamp");
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char ch = text[pos + i];
    if (ch < '0' || ch > '9') throw ParseError("updated_at", "expected digit in timestamp");
    value = value * 10 + (ch - '0');
  }
  pos += count;
  return value;
}

void expect(std::string_view text, std::size_t& pos, char a, char b = '\0') {
  if (pos >= text.size() || (text[pos] != a && (b == '\0' || text[pos] != b))) {
    throw ParseError("updated_at", std::string("expected '") + a + "' in timestamp");
  }
  ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  const int y = read_digits(text, pos, 4);
  expect(text, pos, '-');
  const int mo = read_digits(text, pos, 2);
  expect(text, pos, '-');
  const int d = read_digits(text, pos, 2);
  expect(text, pos, 'T', 't');
  const int h = read_digits(text, pos, 2);
  expect(text, pos, ':');
  const int mi = read_digits(text, pos, 2);
  expect(text, pos, ':');
  const int s = read_digits(text, pos, 2);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
    throw ParseError("updated_at", "timestamp out of range");
  }

  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) throw ParseError("updated_at", "empty fractional seconds");
    if (digits > 9) throw ParseError("updated_at", "more than nine fractional digits");
    for (std::size_t i = digits; i < 3; ++i) millis *= 10;
  }

  minutes offset{0};
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '-' ? -1 : 1;
    ++pos;
    const int oh = read_digits(text, pos, 2);
    expect(text, pos, ':');
    const int om = read_digits(text, pos, 2);
    if (oh > 23 || om > 59) throw ParseError("updated_at", "offset out of range");
    offset = minutes{sign * (oh * 60 + om)};
  } else {
    throw ParseError("updated_at", "missing UTC offset");
  }
  if (pos != text.size()) throw ParseError("updated_at", "trailing characters in timestamp");

  const auto local = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{millis};
  return time_point_cast<milliseconds>(local - offset);
}

Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate(const FrameAnnotation& a, ValidationMode mode) {
  std::vector<Violation> out;
  const LabelDraft& l = a.label;

  if (a.frame_id.empty()) out.push_back({"frame_id", "frame_id is empty"});

  if (l.precipitation_kind == PrecipitationKind::None && l.precipitation_intensity) {
    out.push_back({"precipitation_intensity", "intensity without precipitation kind"});
  }

  for (Category c : kCategories) {
    const Source src = a.provenance[c];
    const bool has = l.has(c);
    if (src == Source::Unset && has) {
      out.push_back({std::string(category_key(c)), "value present but provenance is Unset"});
    } else if (src != Source::Unset && !has) {
      out.push_back({std::string(category_key(c)),
                     "provenance " + std::string(to_string(src)) + " without a value"});
    }
  }

  if (a.provenance[Category::Precipitation] == Source::Auto) {
    if (!a.clutter_fraction) {
      out.push_back({"clutter_fraction", "auto precipitation requires a clutter fraction"});
    }
    if (!l.precipitation_intensity) {
      out.push_back({"precipitation_intensity", "auto precipitation requires an intensity"});
    }
  }
  if (a.clutter_fraction) {
    const double f = *a.clutter_fraction;
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
      out.push_back({"clutter_fraction", "clutter fraction outside [0, 1]"});
    }
  }

  if (mode == ValidationMode::Final) {
    for (Category c : kCategories) {
      if (!l.has(c)) out.push_back({std::string(category_key(c)), "category not set"});
    }
    if (l.has(Category::Precipitation) && !l.precipitation_kind) {
      out.push_back({"precipitation_kind", "precipitation kind not set"});
    }
    if (l.precipitation_kind && *l.precipitation_kind != PrecipitationKind::None &&
        !l.precipitation_intensity) {
      out.push_back({"precipitation_intensity", "precipitation kind without intensity"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Class indices

std::size_t class_count(Category c) {
  switch (c) {
    case Category::Daytime: return kDaytimeNames.size();
    case Category::Precipitation: return kPrecipitationClasses.size();
    case Category::Fog: return kFogNames.size();
    case Category::Road:
    case Category::Roadside: return kSurfaceNames.size();
    case Category::Infrastructure: return kInfrastructureNames.size();
  }
  return 0;
}

std::size_t class_index(const EnvironmentLabel& label, Category c) {
  switch (c) {
    case Category::Daytime: return static_cast<std::size_t>(label.daytime);
    case Category::Precipitation: {
      const auto& p = label.precipitation;
      if (p.kind == PrecipitationKind::None) return 0;
      const std::size_t heavy = p.intensity == Intensity::Heavy ? 1 : 0;
      return (p.kind == PrecipitationKind::Rain ? 1 : 3) + heavy;
    }
    case Category::Fog: return static_cast<std::size_t>(label.fog);
    case Category::Road: return static_cast<std::size_t>(label.road);
    case Category::Roadside: return static_cast<std::size_t>(label.roadside);
    case Category::Infrastructure: return static_cast<std::size_t>(label.infrastructure);
  }
  return 0;
}

std::string_view class_name(Category c, std::size_t index) {
  if (index >= class_count(c)) throw std::out_of_range("class index out of range");
  switch (c) {
    case Category::Daytime: return kDaytimeNames[index];
    case Category::Precipitation: return kPrecipitationClasses[index];
    case Category::Fog: return kFogNames[index];
    case Category::Road:
    case Category::Roadside: return kSurfaceNames[index];
    case Category::Infrastructure: return kInfrastructureNames[index];
  }
  return {};
}

void assign_class(EnvironmentLabel& label, Category c, std::size_t index) {
  if (index >= class_count(c)) throw std::out_of_range("class index out of range");
  switch (c) {
    case Category::Daytime: label.daytime = static_cast<Daytime>(index); break;
    case Category::Precipitation:
      if (index == 0) {
        label.precipitation = {PrecipitationKind::None, std::nullopt};
      } else {
        const auto kind = index <= 2 ? PrecipitationKind::Rain : PrecipitationKind::Snow;
        const auto intensity = (index % 2 == 0) ? Intensity::Heavy : Intensity::Light;
        label.precipitation = {kind, intensity};
      }
      break;
    case Category::Fog: label.fog = static_cast<Fog>(index); break;
    case Category::Road: label.road = static_cast<Surface>(index); break;
    case Category::Roadside: label.roadside = static_cast<Surface>(index); break;
    case Category::Infrastructure: label.infrastructure = static_cast<Infrastructure>(index); break;
  }
}

}  // namespace envlabel
