#include "prp/adaptation.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace prp {

std::vector<PixelPoint> nms(const Heatmap& heatmap, int radius, double threshold) {
  if (radius < 1) throw InvalidSpecError("nms radius must be >= 1");
  const int w = heatmap.width(), h = heatmap.height();
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(heatmap.size()); ++i) {
    const float v = heatmap.data()[i];
    if (static_cast<double>(v) >= threshold && v > 0.0f) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return heatmap.data()[a] > heatmap.data()[b]; });
  Grid<std::uint8_t> suppressed(w, h, 0);
  std::vector<PixelPoint> kept;
  for (const int i : order) {
    const int x = i % w, y = i / w;
    if (suppressed(x, y)) continue;
    kept.push_back({x, y, heatmap(x, y)});
    for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy)
      for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) suppressed(xx, yy) = 1;
  }
  return kept;
}

void AdaptationParams::validate() const {
  if (window_len < 1) throw InvalidSpecError("adaptation window must hold at least one frame");
  if (n_sampled < 0 || n_sampled >= window_len) throw InvalidSpecError("n_sampled must be in [0, window_len)");
  if (patch < 1 || patch % 2 == 0) throw InvalidSpecError("adaptation patch must be odd");
  if (nms_radius < 1) throw InvalidSpecError("nms radius must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidSpecError("detection threshold must be in [0, 1]");
}

Heatmap transfer_mask(const RenderedView& sampled, const Heatmap& sampled_heatmap, const RenderedView& reference,
                      const AdaptationParams& params, const PrPParams& prp) {
  Heatmap mask(reference.cam.width, reference.cam.height, 0.0f);
  const int r = params.patch / 2;
  for (const PixelPoint& p : nms(sampled_heatmap, params.nms_radius, params.threshold)) {
    const ReprojectResult res = reproject(Vec2(p.x, p.y), sampled, reference, prp);
    if (!res.ok()) continue;
    const Eigen::Vector2i q = round_pixel(res.pixel);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (!sampled_heatmap.contains(p.x + dx, p.y + dy) || !mask.contains(q.x() + dx, q.y() + dy)) continue;
        float& m = mask(q.x() + dx, q.y() + dy);
        m = std::max(m, sampled_heatmap(p.x + dx, p.y + dy));
      }
    }
  }
  return mask;
}

Heatmap aggregate(const Heatmap& reference, const std::vector<Heatmap>& masks, Aggregation mode) {
  Heatmap out = reference;
  for (const Heatmap& m : masks) {
    if (m.width() != out.width() || m.height() != out.height()) throw ShapeError("mask size differs from reference");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (mode == Aggregation::kMax) out.data()[i] = std::max(out.data()[i], m.data()[i]);
      else out.data()[i] += m.data()[i];
    }
  }
  if (mode == Aggregation::kMean) {
    const float n = static_cast<float>(masks.size() + 1);
    for (float& v : out.values()) v /= n;
  } else if (mode == Aggregation::kSum) {
    for (float& v : out.values()) v = std::min(v, 1.0f);
  }
  return out;
}

std::vector<int> sample_window(int reference, const AdaptationParams& params) {
  params.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                    static_cast<std::uint32_t>(reference)};
  std::mt19937_64 rng(seq);
  std::vector<int> pool(static_cast<std::size_t>(params.window_len - 1));
  std::iota(pool.begin(), pool.end(), reference + 1);
  // Partial Fisher-Yates.
  for (int i = 0; i < params.n_sampled; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(params.n_sampled));
  std::sort(pool.begin(), pool.end());
  return pool;
}

PseudoLabels adapt_reference(const std::vector<RenderedView>& views, const std::vector<Heatmap>& heatmaps,
                             int reference, const AdaptationParams& params, const PrPParams& prp) {
  params.validate();
  prp.validate();
  if (heatmaps.size() != views.size()) throw ShapeError("need one heatmap per view");
  if (reference < 0 || reference + params.window_len > static_cast<int>(views.size()))
    throw EmptySceneError("reference frame " + std::to_string(reference) + " has no full window of " +
                          std::to_string(params.window_len) + " frames");
  const auto ref = static_cast<std::size_t>(reference);
  std::vector<Heatmap> masks;
  for (const int r : sample_window(reference, params)) {
    const auto i = static_cast<std::size_t>(r);
    masks.push_back(transfer_mask(views[i], heatmaps[i], views[ref], params, prp));
  }
  const Heatmap agg = aggregate(heatmaps[ref], masks, params.aggregation);
  return {views[ref].frame_index, nms(agg, params.nms_radius, params.threshold)};
}

std::vector<PseudoLabels> projective_adaptation(const std::vector<RenderedView>& views, const Detector& detector,
                                                const AdaptationParams& params, const PrPParams& prp,
                                                std::vector<int> references) {
  params.validate();
  const int n = static_cast<int>(views.size());
  if (n < params.window_len)
    throw EmptySceneError("sequence of " + std::to_string(n) + " frames is shorter than the adaptation window");
  if (references.empty()) {
    references.resize(static_cast<std::size_t>(n - params.window_len + 1));
    std::iota(references.begin(), references.end(), 0);
  }
  std::vector<Heatmap> heatmaps(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) heatmaps[i] = detector(views[i].image);

  std::vector<PseudoLabels> out(references.size());
  const int count = static_cast<int>(references.size());
  // Exceptions must not cross the parallel region.
  std::vector<std::exception_ptr> errors(references.size());
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < count; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      out[i] = adapt_reference(views, heatmaps, references[i], params, prp);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_labels(const std::vector<PseudoLabels>& labels, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& l : labels)
    for (const auto& p : l.points) out << l.frame << ' ' << p.x << ' ' << p.y << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<PseudoLabels> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::map<int, PseudoLabels> by_frame;
  std::vector<int> order;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int f = 0;
    PixelPoint p;
    std::string extra;
    if (!(ls >> f >> p.x >> p.y) || (ls >> extra))
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected 'frame_idx x y'");
    auto [it, inserted] = by_frame.try_emplace(f, PseudoLabels{f, {}});
    if (inserted) order.push_back(f);
    it->second.points.push_back(p);
  }
  std::vector<PseudoLabels> out;
  for (const int f : order) out.push_back(std::move(by_frame[f]));
  return out;
}

}  // namespace prp
