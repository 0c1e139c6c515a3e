#include "traylab/catalog.hpp"

#include <algorithm>
#include <set>

#include "traylab/errors.hpp"

namespace traylab {
namespace {

// Bottle, martini and wine geometry/masses are the reference values; the base
// radii of the glasses and the flute/champagne heights are our own constants.
constexpr std::array<ClassInfo, 5> kClassTable{{
    {"bottle", 1.1, 0.40, 20.0},
    {"martini_glass", 0.5, 0.35, 10.0},
    {"wine_glass", 0.9, 0.30, 4.0},
    {"flute_glass", 0.8, 0.25, 15.0},
    {"champagne_glass", 0.6, 0.30, 15.0},
}};

struct ColorInfo {
  std::string_view name;
  Rgb rgb;
};

constexpr std::array<ColorInfo, 11> kColorTable{{
    {"purple", {128, 0, 128}},
    {"red", {255, 0, 0}},
    {"green", {0, 128, 0}},
    {"blue", {0, 0, 255}},
    {"olive", {128, 128, 0}},
    {"cyan", {0, 255, 255}},
    {"brown", {139, 69, 19}},
    {"pink", {255, 192, 203}},
    {"orange", {255, 165, 0}},
    {"gray", {128, 128, 128}},
    {"yellow", {255, 255, 0}},
}};

}  // namespace

const ClassInfo& class_info(ObjectClass cls) { return kClassTable[static_cast<std::size_t>(cls)]; }

std::string_view to_string(ObjectClass cls) { return class_info(cls).name; }

std::optional<ObjectClass> parse_object_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassTable.size(); ++i) {
    if (kClassTable[i].name == name) return static_cast<ObjectClass>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Color color) { return kColorTable[static_cast<std::size_t>(color)].name; }

std::optional<Color> parse_color(std::string_view name) {
  for (std::size_t i = 0; i < kColorTable.size(); ++i) {
    if (kColorTable[i].name == name) return static_cast<Color>(i);
  }
  // Appears in model output; same swatch.
  if (name == "grey") return Color::gray;
  return std::nullopt;
}

Rgb color_rgb(Color color) { return kColorTable[static_cast<std::size_t>(color)].rgb; }

bool is_valid(GridCell cell) {
  return cell.row >= 1 && cell.row <= 3 && cell.column >= 1 && cell.column <= 3;
}

Vec2 cell_position(GridCell cell) {
  return {(cell.row - 2) * kGridSpacing, (2 - cell.column) * kGridSpacing};
}

std::string row_token(int row) { return "row_" + std::to_string(row); }
std::string column_token(int column) { return "column_" + std::to_string(column); }

namespace {
std::optional<int> parse_indexed(std::string_view token, std::string_view prefix) {
  if (token.size() != prefix.size() + 1 || token.substr(0, prefix.size()) != prefix) return std::nullopt;
  const char digit = token.back();
  if (digit < '1' || digit > '3') return std::nullopt;
  return digit - '0';
}
}  // namespace

std::optional<int> parse_row_token(std::string_view token) { return parse_indexed(token, "row_"); }
std::optional<int> parse_column_token(std::string_view token) { return parse_indexed(token, "column_"); }

bool is_valid(const PhysicsParams& p) {
  return p.sliding_friction > 0.0 && p.sliding_friction <= 1.0 && p.armature >= 0.0 &&
         p.stiffness >= 0.0 && p.damping >= 0.0 && p.mass > 0.0;
}

const LayoutEntry* SceneLayout::find(Color color) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const LayoutEntry& e) { return e.color == color; });
  return it == entries.end() ? nullptr : &*it;
}

const LayoutEntry* SceneLayout::find(GridCell cell) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const LayoutEntry& e) { return e.cell == cell; });
  return it == entries.end() ? nullptr : &*it;
}

void validate_layout(const SceneLayout& layout) {
  std::set<int> ids;
  std::set<GridCell> cells;
  std::set<Color> colors;
  for (const auto& e : layout.entries) {
    if (!is_valid(e.cell)) {
      throw StructuralError("object " + std::to_string(e.object_id) + " is off the 3x3 grid");
    }
    if (!ids.insert(e.object_id).second) {
      throw StructuralError("duplicate object id " + std::to_string(e.object_id));
    }
    if (!cells.insert(e.cell).second) {
      throw StructuralError("duplicate grid cell (" + row_token(e.cell.row) + ", " +
                            column_token(e.cell.column) + ")");
    }
    if (!colors.insert(e.color).second) {
      throw StructuralError("duplicate color " + std::string(to_string(e.color)));
    }
  }
}

std::vector<ObjectClass> classes_in(const SceneLayout& layout) {
  std::set<ObjectClass> present;
  for (const auto& e : layout.entries) present.insert(e.cls);
  return {present.begin(), present.end()};
}

}  // namespace traylab
