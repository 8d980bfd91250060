#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "prp/geometry.hpp"

namespace prp {

// Binary PPM (P6, 8-bit RGB), PGM (P5, 8-bit) and PFM (Pf, little-endian float32).
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& img);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Grid<float>& img);
Grid<float> read_pfm(const std::filesystem::path& path);

/// Every view shares one camera. Views are ordered by frame index.
struct Dataset {
  std::vector<RenderedView> views;

  int size() const { return static_cast<int>(views.size()); }
  const RenderedView& operator[](int i) const { return views[static_cast<std::size_t>(i)]; }
};

/// Writes manifest.json plus frames/NNNNN.ppm and frames/NNNNN.pfm. Invalid depth is stored as 0.
void write_dataset(const std::vector<RenderedView>& views, const std::filesystem::path& dir);

/// Throws IoError (naming the frame) on missing or corrupt files and
/// DimensionMismatchError when an image or depth map disagrees with the manifest size.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace prp
