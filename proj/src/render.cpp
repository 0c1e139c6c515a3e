#include "traylab/render.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "traylab/errors.hpp"
#include "traylab/format.hpp"

namespace traylab {

Raster::Raster(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

Rgb Raster::at(int column, int row) const {
  const std::size_t i = (static_cast<std::size_t>(row) * width + column) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Raster::set(int column, int row, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(row) * width + column) * 3;
  pixels[i] = c.r;
  pixels[i + 1] = c.g;
  pixels[i + 2] = c.b;
}

namespace {

struct Disc {
  Vec2 center;
  double radius;
  Rgb color;
};

std::vector<Disc> scene_discs(const SceneLayout& layout, double tray_radius) {
  std::vector<Disc> discs;
  discs.push_back({{0.0, 0.0}, tray_radius, kTrayRgb});
  for (const auto& e : layout.entries) {
    discs.push_back({cell_position(e.cell), class_info(e.cls).base_radius, color_rgb(e.color)});
  }
  return discs;
}

// Pixel-center sampling; later discs paint over earlier ones.
void render_row(Raster& out, const std::vector<Disc>& discs, int row) {
  const double x = (row + 0.5 - kRasterSize / 2.0) / kPixelsPerUnit;
  for (int column = 0; column < kRasterSize; ++column) {
    const double y = (kRasterSize / 2.0 - (column + 0.5)) / kPixelsPerUnit;
    Rgb c = kGroundRgb;
    for (const auto& d : discs) {
      const double dx = x - d.center.x;
      const double dy = y - d.center.y;
      if (dx * dx + dy * dy <= d.radius * d.radius) c = d.color;
    }
    out.set(column, row, c);
  }
}

void check_same_shape(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size()) {
    throw StructuralError("PSNR needs rasters of equal size (" + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height) + ")");
  }
}

double psnr_from_sum(std::uint64_t squared_sum, std::size_t samples) {
  if (squared_sum == 0) return kPsnrCap;
  const double mse = static_cast<double>(squared_sum) / static_cast<double>(samples);
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

}  // namespace

Raster render_top_down(const SceneLayout& layout, double tray_radius) {
  const auto discs = scene_discs(layout, tray_radius);
  Raster out(kRasterSize, kRasterSize, kGroundRgb);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < kRasterSize; ++row) render_row(out, discs, row);
  return out;
}

Raster render_top_down_serial(const SceneLayout& layout, double tray_radius) {
  const auto discs = scene_discs(layout, tray_radius);
  Raster out(kRasterSize, kRasterSize, kGroundRgb);
  for (int row = 0; row < kRasterSize; ++row) render_row(out, discs, row);
  return out;
}

double psnr(const Raster& a, const Raster& b) {
  check_same_shape(a, b);
  const auto n = static_cast<long>(a.pixels.size());
  std::uint64_t sum = 0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
  for (long i = 0; i < n; ++i) {
    const long d = static_cast<long>(a.pixels[i]) - static_cast<long>(b.pixels[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return psnr_from_sum(sum, a.pixels.size());
}

double psnr_serial(const Raster& a, const Raster& b) {
  check_same_shape(a, b);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const long d = static_cast<long>(a.pixels[i]) - static_cast<long>(b.pixels[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return psnr_from_sum(sum, a.pixels.size());
}

std::vector<Color> misplaced_colors(const SceneLayout& predicted, const SceneLayout& reference) {
  std::set<Color> out;
  for (const auto& p : predicted.entries) {
    const LayoutEntry* r = reference.find(p.color);
    if (r == nullptr || r->cell != p.cell || r->cls != p.cls) out.insert(p.color);
  }
  for (const auto& r : reference.entries) {
    if (predicted.find(r.color) == nullptr) out.insert(r.color);
  }
  return {out.begin(), out.end()};
}

std::vector<Color> misplaced_colors_from_images(const Raster& predicted, const Raster& reference, int min_pixels) {
  check_same_shape(predicted, reference);
  auto nearest = [](Rgb c) {
    Color best = kAllColors[0];
    long best_d = std::numeric_limits<long>::max();
    for (Color candidate : kAllColors) {
      const Rgb p = color_rgb(candidate);
      const long dr = long{c.r} - p.r, dg = long{c.g} - p.g, db = long{c.b} - p.b;
      const long d = dr * dr + dg * dg + db * db;
      if (d < best_d) {
        best_d = d;
        best = candidate;
      }
    }
    return best;
  };
  std::map<Color, int> counts;
  for (int row = 0; row < predicted.height; ++row) {
    for (int column = 0; column < predicted.width; ++column) {
      const Rgb a = predicted.at(column, row);
      const Rgb b = reference.at(column, row);
      if (a == b) continue;
      for (Rgb c : {a, b}) {
        if (c == kTrayRgb || c == kGroundRgb) continue;
        ++counts[nearest(c)];
      }
    }
  }
  std::vector<Color> out;
  for (const auto& [color, n] : counts) {
    if (n >= min_pixels) out.push_back(color);
  }
  return out;
}

std::string convergence_csv(std::span<const double> values) {
  if (values.empty()) throw StructuralError("convergence log is empty");
  std::ostringstream out;
  out << "iteration,value,running_min\n";
  double best = values[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    best = std::min(best, values[i]);
    out << (i + 1) << ',' << format_fixed(values[i], 6) << ',' << format_fixed(best, 6) << '\n';
  }
  return out.str();
}

void export_convergence(std::span<const double> values, const std::filesystem::path& path) {
  const std::string text = convergence_csv(values);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace traylab
