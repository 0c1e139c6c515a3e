#pragma once

// Domain vocabulary shared by every module: object classes, the color
// palette, the 3x3 placement grid, per-class contact parameters and layouts.

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace traylab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  Vec2& operator+=(Vec2 b) { x += b.x; y += b.y; return *this; }
  Vec2& operator-=(Vec2 b) { x -= b.x; y -= b.y; return *this; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

enum class ObjectClass : std::uint8_t { bottle, martini_glass, wine_glass, flute_glass, champagne_glass };

struct ClassInfo {
  std::string_view name;
  double cog_height;
  double base_radius;
  double mass;
};

const ClassInfo& class_info(ObjectClass cls);
std::string_view to_string(ObjectClass cls);
std::optional<ObjectClass> parse_object_class(std::string_view name);

inline constexpr std::array<ObjectClass, 3> kThreeClasses{
    ObjectClass::bottle, ObjectClass::martini_glass, ObjectClass::wine_glass};
inline constexpr std::array<ObjectClass, 5> kFiveClasses{
    ObjectClass::bottle, ObjectClass::martini_glass, ObjectClass::wine_glass,
    ObjectClass::flute_glass, ObjectClass::champagne_glass};

enum class Color : std::uint8_t { purple, red, green, blue, olive, cyan, brown, pink, orange, gray, yellow };

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

std::string_view to_string(Color color);
std::optional<Color> parse_color(std::string_view name);
Rgb color_rgb(Color color);

/// The ten colors scenes are generated from. Yellow is accepted when parsing
/// model output but never generated.
inline constexpr std::array<Color, 10> kPalette{
    Color::purple, Color::red, Color::green, Color::blue, Color::olive,
    Color::cyan, Color::brown, Color::pink, Color::orange, Color::gray};
inline constexpr std::array<Color, 11> kAllColors{
    Color::purple, Color::red, Color::green, Color::blue, Color::olive, Color::cyan,
    Color::brown, Color::pink, Color::orange, Color::gray, Color::yellow};

/// 1-based (row, column) on the 3x3 grid.
struct GridCell {
  int row = 1;
  int column = 1;
  auto operator<=>(const GridCell&) const = default;
};

inline constexpr double kGridSpacing = 0.9;

bool is_valid(GridCell cell);
/// Tray-relative position of a cell center: rows run along x, columns along -y.
Vec2 cell_position(GridCell cell);
std::string row_token(int row);
std::string column_token(int column);
std::optional<int> parse_row_token(std::string_view token);
std::optional<int> parse_column_token(std::string_view token);

struct PhysicsParams {
  double sliding_friction = 0.5;
  double armature = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
  double mass = 1.0;
  bool operator==(const PhysicsParams&) const = default;
};

bool is_valid(const PhysicsParams& params);

/// Interval with independently open or closed ends.
struct Bound {
  double lo = 0.0;
  double hi = 1.0;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Ranges of the four estimated parameters; mass is never estimated.
struct ParamRanges {
  Bound sliding_friction{0.1, 1.0, true, false};
  Bound armature{0.0, 1.0, true, true};
  Bound stiffness{0.0, 1.0, true, true};
  Bound damping{0.0, 10.0, true, true};
};

using ClassParamMap = std::map<ObjectClass, PhysicsParams>;

struct LayoutEntry {
  int object_id = 0;
  ObjectClass cls = ObjectClass::bottle;
  GridCell cell;
  Color color = Color::purple;
  bool operator==(const LayoutEntry&) const = default;
};

struct SceneLayout {
  std::vector<LayoutEntry> entries;
  bool operator==(const SceneLayout&) const = default;

  const LayoutEntry* find(Color color) const;
  const LayoutEntry* find(GridCell cell) const;
};

/// Throws StructuralError on duplicate ids, cells or colors, or off-grid cells.
void validate_layout(const SceneLayout& layout);

/// Distinct classes present, in catalog order.
std::vector<ObjectClass> classes_in(const SceneLayout& layout);

}  // namespace traylab
