#pragma once

// Top-down rasterization of layouts, PSNR, and misplaced-color detection.
//
// Camera: 256x256 pixels centered on the tray, 64 pixels per length unit
// (half-extent 2.0). A world point (x, y) lands on column 128 - 64*y and
// row 128 + 64*x, so the image is the view from above with +x pointing down.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "traylab/catalog.hpp"

namespace traylab {

inline constexpr int kRasterSize = 256;
inline constexpr double kPixelsPerUnit = 64.0;
inline constexpr Rgb kGroundRgb{255, 255, 255};
inline constexpr Rgb kTrayRgb{180, 180, 180};
inline constexpr double kPsnrCap = 99.0;

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  Raster() = default;
  Raster(int w, int h, Rgb fill);

  Rgb at(int column, int row) const;
  void set(int column, int row, Rgb c);
  bool operator==(const Raster&) const = default;
};

/// Gray tray disc on white ground, one filled disc per instance (class base
/// radius, palette color). Rows are rendered in parallel.
Raster render_top_down(const SceneLayout& layout, double tray_radius = 1.8);
Raster render_top_down_serial(const SceneLayout& layout, double tray_radius = 1.8);

/// 10*log10(255^2 / MSE) over all channels, capped at 99 dB. The squared-error
/// sum is accumulated in integers, so the parallel and serial versions agree exactly.
double psnr(const Raster& a, const Raster& b);
double psnr_serial(const Raster& a, const Raster& b);

/// Colors in `predicted` whose cell or class differs from `reference`, plus
/// reference colors missing from `predicted` and predicted colors absent from
/// `reference`. Palette order.
std::vector<Color> misplaced_colors(const SceneLayout& predicted, const SceneLayout& reference);

/// Image-only variant for runs without a reference layout: every pixel that
/// differs is classified to the nearest palette color in either image
/// (ignoring tray and ground); colors covering at least `min_pixels` are reported.
std::vector<Color> misplaced_colors_from_images(const Raster& predicted, const Raster& reference, int min_pixels = 8);

std::vector<std::uint8_t> encode_png(const Raster& raster);
Raster decode_png(std::span<const std::uint8_t> bytes);
void write_png(const Raster& raster, const std::filesystem::path& path);
Raster read_png(const std::filesystem::path& path);

/// CSV with columns iteration (1-based), value, running_min.
std::string convergence_csv(std::span<const double> values);
void export_convergence(std::span<const double> values, const std::filesystem::path& path);

}  // namespace traylab
