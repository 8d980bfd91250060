#include "prp/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

namespace prp {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

// Netpbm header tokens, skipping '#' comments. Consumes the single whitespace byte after the last token.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

int parse_dim(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError("corrupt header in '" + path.string() + "'");
  }
}

void check_stream(const std::istream& in, const fs::path& path) {
  if (!in) throw IoError("truncated data in '" + path.string() + "'");
}

}  // namespace

void write_ppm(const fs::path& path, const RgbImage& img) {
  auto out = open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  static_assert(sizeof(Rgb8) == 3);
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size() * 3));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  if (next_token(in) != "P6") throw IoError("'" + path.string() + "' is not a binary PPM");
  const int w = parse_dim(next_token(in), path);
  const int h = parse_dim(next_token(in), path);
  if (next_token(in) != "255") throw IoError("'" + path.string() + "' must have maxval 255");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size() * 3));
  check_stream(in, path);
  return img;
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& img) {
  auto out = open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
  auto in = open_in(path);
  if (next_token(in) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM");
  const int w = parse_dim(next_token(in), path);
  const int h = parse_dim(next_token(in), path);
  if (next_token(in) != "255") throw IoError("'" + path.string() + "' must have maxval 255");
  Grid<std::uint8_t> img(w, h);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  check_stream(in, path);
  return img;
}

void write_pfm(const fs::path& path, const Grid<float>& img) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  auto out = open_out(path);
  out << "Pf\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  // PFM stores rows bottom to top.
  for (int y = img.height() - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(&img(0, y)), static_cast<std::streamsize>(sizeof(float) * img.width()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Grid<float> read_pfm(const fs::path& path) {
  auto in = open_in(path);
  if (next_token(in) != "Pf") throw IoError("'" + path.string() + "' is not a greyscale PFM");
  const int w = parse_dim(next_token(in), path);
  const int h = parse_dim(next_token(in), path);
  double scale = 0.0;
  try {
    scale = std::stod(next_token(in));
  } catch (const std::exception&) {
    throw IoError("corrupt PFM scale in '" + path.string() + "'");
  }
  if (scale == 0.0) throw IoError("corrupt PFM scale in '" + path.string() + "'");
  const bool swap = (scale > 0.0) != (std::endian::native == std::endian::big);
  Grid<float> img(w, h);
  for (int y = h - 1; y >= 0; --y)
    in.read(reinterpret_cast<char*>(&img(0, y)), static_cast<std::streamsize>(sizeof(float) * w));
  check_stream(in, path);
  if (swap) {
    for (float& v : img.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  return img;
}

namespace {

std::string frame_stem(int idx) {
  std::ostringstream s;
  s << std::setw(5) << std::setfill('0') << idx;
  return s.str();
}

}  // namespace

void write_dataset(const std::vector<RenderedView>& views, const fs::path& dir) {
  if (views.empty()) throw IoError("refusing to write an empty dataset");
  const CameraIntrinsics& cam = views.front().cam;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw IoError("cannot create '" + (dir / "frames").string() + "': " + ec.message());

  nlohmann::json manifest = {{"width", cam.width}, {"height", cam.height}, {"fx", cam.fx},
                             {"fy", cam.fy},       {"cx", cam.cx},         {"cy", cam.cy}};
  manifest["frames"] = nlohmann::json::array();
  for (const auto& v : views) {
    if (!(v.cam == cam)) throw IoError("frame " + std::to_string(v.frame_index) + ": camera differs from frame 0");
    const std::string stem = frame_stem(v.frame_index);
    write_ppm(dir / "frames" / (stem + ".ppm"), v.image);
    write_pfm(dir / "frames" / (stem + ".pfm"), v.depth.values());
    const Mat4 m = v.pose.matrix();
    nlohmann::json c2w = nlohmann::json::array();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) c2w.push_back(m(r, c));
    manifest["frames"].push_back({{"idx", v.frame_index},
                                  {"c2w", c2w},
                                  {"image", "frames/" + stem + ".ppm"},
                                  {"depth", "frames/" + stem + ".pfm"}});
  }
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in '" + dir.string() + "'");
}

Dataset read_dataset(const fs::path& dir) {
  nlohmann::json manifest;
  {
    auto in = open_in(dir / "manifest.json");
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& ex) {
      throw IoError("corrupt manifest in '" + dir.string() + "': " + ex.what());
    }
  }
  CameraIntrinsics cam;
  std::map<int, nlohmann::json> entries;
  try {
    cam = {manifest.at("fx").get<double>(), manifest.at("fy").get<double>(), manifest.at("cx").get<double>(),
           manifest.at("cy").get<double>(), manifest.at("width").get<int>(), manifest.at("height").get<int>()};
    for (const auto& f : manifest.at("frames")) {
      const int idx = f.at("idx").get<int>();
      if (!entries.emplace(idx, f).second) throw IoError("frame " + std::to_string(idx) + ": listed twice in manifest");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("corrupt manifest in '" + dir.string() + "': " + ex.what());
  }
  try {
    cam.validate();
  } catch (const InvalidSpecError& ex) {
    throw IoError(std::string("manifest intrinsics are invalid: ") + ex.what());
  }
  if (entries.empty()) throw IoError("manifest in '" + dir.string() + "' lists no frames");

  Dataset ds;
  int expected = 0;
  for (const auto& [idx, f] : entries) {
    const std::string frame = "frame " + std::to_string(expected);
    if (idx != expected) throw IoError(frame + ": missing from manifest");
    RenderedView v;
    v.cam = cam;
    v.frame_index = idx;
    std::string image_rel, depth_rel;
    try {
      const auto& c2w = f.at("c2w");
      if (c2w.size() != 16) throw IoError(frame + ": c2w must hold 16 numbers");
      Mat4 m;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = c2w.at(static_cast<std::size_t>(4 * r + c)).get<double>();
      v.pose = PoseSE3::from_matrix(m);
      image_rel = f.at("image").get<std::string>();
      depth_rel = f.at("depth").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(frame + ": malformed manifest entry: " + ex.what());
    }
    try {
      v.pose.validate();
    } catch (const InvalidSpecError& ex) {
      throw IoError(frame + ": " + ex.what());
    }
    try {
      v.image = read_ppm(dir / image_rel);
    } catch (const IoError& ex) {
      throw IoError(frame + ": " + ex.what());
    }
    Grid<float> depth;
    try {
      depth = read_pfm(dir / depth_rel);
    } catch (const IoError& ex) {
      throw IoError(frame + ": " + ex.what());
    }
    if (v.image.width() != cam.width || v.image.height() != cam.height)
      throw DimensionMismatchError(frame + ": image is " + std::to_string(v.image.width()) + "x" +
                                   std::to_string(v.image.height()) + ", manifest says " +
                                   std::to_string(cam.width) + "x" + std::to_string(cam.height));
    if (depth.width() != cam.width || depth.height() != cam.height)
      throw DimensionMismatchError(frame + ": depth map is " + std::to_string(depth.width()) + "x" +
                                   std::to_string(depth.height()) + ", manifest says " +
                                   std::to_string(cam.width) + "x" + std::to_string(cam.height));
    v.depth = DepthMap(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) v.depth.set(x, y, depth(x, y));
    ds.views.push_back(std::move(v));
    ++expected;
  }
  // A trailing frame dropped from the manifest still has its files on disk.
  const std::string stem = frame_stem(expected);
  if (fs::exists(dir / "frames" / (stem + ".ppm")) || fs::exists(dir / "frames" / (stem + ".pfm")))
    throw IoError("frame " + std::to_string(expected) + ": files present but missing from manifest");
  return ds;
}

}  // namespace prp
