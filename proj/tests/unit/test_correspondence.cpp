#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "prp/correspondence.hpp"
#include "prp/errors.hpp"
#include "prp/reference/serial.hpp"
#include "prp/scene.hpp"
#include "support.hpp"

namespace prp {
namespace {

namespace fs = std::filesystem;

CameraIntrinsics narrow_camera() { return {200.0, 200.0, 32.0, 24.0, 64, 48}; }

RenderedView view_of(const SceneSpec& s, const CameraIntrinsics& cam, const PoseSE3& pose, int index = 0) {
  RenderedView v = render_view(s, cam, pose);
  v.frame_index = index;
  return v;
}

std::vector<CellQuad> diagonal(int hc, int wc) {
  std::vector<CellQuad> d;
  for (int h = 0; h < hc; ++h)
    for (int w = 0; w < wc; ++w) d.push_back({h, w, h, w});
  return d;
}

TEST(PairSampler, OffsetsStayInBounds) {
  PairSamplingParams p;
  p.seed = 11;
  PairSampler sampler(1000, p);
  std::map<int, int> offsets;
  for (int i = 0; i < 20000; ++i) {
    const FramePair f = sampler.next();
    const int k = f.dst - f.src;
    ASSERT_GE(k, 70);
    ASSERT_LE(k, 150);
    ASSERT_GE(f.src, 0);
    ASSERT_LT(f.dst, 1000);
    ++offsets[k];
  }
  EXPECT_EQ(offsets.begin()->first, 70);
  EXPECT_EQ(offsets.rbegin()->first, 150);
}

TEST(PairSampler, TwoFramesHaveOnePair) {
  PairSamplingParams p;
  p.lambda_l = p.lambda_u = 1;
  PairSampler sampler(2, p);
  EXPECT_EQ(sampler.admissible_pairs(), 1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sampler.next(), (FramePair{0, 1}));
}

TEST(PairSampler, FixedSeedRepeats) {
  PairSamplingParams p;
  p.seed = 99;
  PairSampler a(400, p), b(400, p);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(PairSampler, UniformOverAdmissiblePairs) {
  PairSamplingParams p;
  p.lambda_l = 2;
  p.lambda_u = 3;
  p.seed = 4;
  PairSampler sampler(6, p);
  ASSERT_EQ(sampler.admissible_pairs(), 7);  // offsets 2: 4 pairs, 3: 3 pairs
  std::map<std::pair<int, int>, int> counts;
  constexpr int kDraws = 70000;
  for (int i = 0; i < kDraws; ++i) {
    const FramePair f = sampler.next();
    ++counts[{f.src, f.dst}];
  }
  ASSERT_EQ(counts.size(), 7u);
  for (const auto& [pair, n] : counts) EXPECT_NEAR(n, kDraws / 7.0, 400.0);
}

TEST(PairSampler, TooFewFramesIsAnEmptyScene) {
  EXPECT_THROW(PairSampler(70, PairSamplingParams{}), EmptySceneError);
  PairSamplingParams bad;
  bad.lambda_l = 5;
  bad.lambda_u = 4;
  EXPECT_THROW(PairSampler(100, bad), InvalidSpecError);
}

TEST(Dense, IdentityPairIsIdentityMap) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(60.0, 48, 40);
  std::mt19937_64 rng(3);
  const RenderedView v = view_of(test::fronto_plane_scene(2.0), cam, test::random_pose(rng, 10.0, 0.2));
  const CorrespondenceMap m = dense_correspondences(v, v, PrPParams{});
  EXPECT_EQ(m.valid_count(), static_cast<std::size_t>(cam.width * cam.height));
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) EXPECT_LT((m.target(x, y) - Vec2(x, y)).norm(), 1e-9);
}

TEST(Dense, IdentityPairOnSceneWithBackground) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(60.0, 48, 40);
  const RenderedView v = view_of(default_scene(), cam, PoseSE3::look_at({1.6, -1.4, 1.2}, {0.0, 0.0, 0.3}));
  const CorrespondenceMap m = dense_correspondences(v, v, PrPParams{});
  std::size_t covered = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!v.depth.valid(x, y)) continue;
      ++covered;
      ASSERT_TRUE(m.valid(x, y)) << x << "," << y;
      EXPECT_LT((m.target(x, y) - Vec2(x, y)).norm(), 1e-9);
    }
  EXPECT_GE(m.valid_count(), covered);
  EXPECT_GT(covered, static_cast<std::size_t>(cam.width * cam.height / 3));
}

TEST(Dense, TranslationGivesUniformShift) {
  const CameraIntrinsics cam = narrow_camera();
  const SceneSpec s = test::fronto_plane_scene(1.0);
  const double dx = 0.01;
  const RenderedView a = view_of(s, cam, PoseSE3{}), b = view_of(s, cam, test::translated({dx, 0.0, 0.0}), 1);
  const CorrespondenceMap m = dense_correspondences(a, b, PrPParams{});
  const double shift = -cam.fx * dx / 1.0;
  int valid = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (x + shift < -0.5) {
        EXPECT_EQ(m.reason(x, y), RejectReason::kOutOfBounds);
        continue;
      }
      ASSERT_TRUE(m.valid(x, y)) << x << "," << y << " " << to_string(m.reason(x, y));
      EXPECT_NEAR(m.target_x(x, y), x + shift, 1e-5);
      EXPECT_NEAR(m.target_y(x, y), y, 1e-5);
      ++valid;
    }
  EXPECT_EQ(static_cast<std::size_t>(valid), m.valid_count());
}

TEST(Dense, OccludedStripIsMarked) {
  // Foreground x <= 0 at z = 1.5 hides part of the background at z = 4 once the camera moves left.
  const CameraIntrinsics cam{80.0, 80.0, 48.0, 36.0, 96, 72};
  const double z_fg = 1.5, z_bg = 4.0, tx = -0.2;
  const SceneSpec s = test::two_plane_scene(z_fg, z_bg, 0.0);
  const RenderedView a = view_of(s, cam, PoseSE3{}), b = view_of(s, cam, test::translated({tx, 0.0, 0.0}), 1);
  const CorrespondenceMap m = dense_correspondences(a, b, PrPParams{});
  // Background X is hidden from b when tx + (X - tx) * z_fg / z_bg <= 0.
  const double r = z_fg / z_bg;
  const double x_hidden = -tx * (1.0 - r) / r;
  const double u_end = cam.cx + cam.fx * x_hidden / z_bg;
  const int window_reach = PrPParams{}.window / 2;
  int strip = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (x > cam.cx + window_reach && x < u_end - 0.5) {
        EXPECT_EQ(m.reason(x, y), RejectReason::kOccluded) << x << "," << y;
        ++strip;
      }
      if (x < cam.cx - window_reach) {
        EXPECT_TRUE(m.valid(x, y)) << x << "," << y;
      }
      const double dst_x = cam.cx + cam.fx * ((x - cam.cx) / cam.fx * z_bg - tx) / z_bg;
      if (x > u_end + 0.5 && dst_x - (cam.cx + cam.fx * (0.0 - tx) / z_fg) > window_reach + 1 &&
          dst_x < cam.width - 0.5) {
        EXPECT_TRUE(m.valid(x, y)) << x << "," << y << " " << to_string(m.reason(x, y));
      }
    }
  EXPECT_GT(strip, 2 * cam.height);
}

TEST(Dense, ValidTargetsAreInBounds) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(50.0, 40, 32);
  TrajectorySpec t;
  t.center = {0.0, 0.0, 0.3};
  t.frames = 12;
  t.arc_deg = 90.0;
  const auto poses = generate_trajectory(t);
  const RenderedView a = view_of(default_scene(), cam, poses[0]), b = view_of(default_scene(), cam, poses[7], 7);
  const CorrespondenceMap m = dense_correspondences(a, b, PrPParams{});
  EXPECT_EQ(m.src_frame, 0);
  EXPECT_EQ(m.dst_frame, 7);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (m.valid(x, y)) {
        EXPECT_TRUE(cam.in_bounds(m.target(x, y)));
      }
}

TEST(Dense, ForwardBackwardConsistency) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(44.0, 128, 96);
  const PoseSE3 pa = PoseSE3::look_at({1.5, -1.4, 1.2}, {0.0, 0.0, 0.3});
  const PoseSE3 pb = PoseSE3::look_at({1.3, -1.6, 1.3}, {0.05, 0.0, 0.3});
  const RenderedView a = view_of(default_scene(), cam, pa), b = view_of(default_scene(), cam, pb, 1);
  const PrPParams params;
  const CorrespondenceMap ab = dense_correspondences(a, b, params);
  int checked = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!ab.valid(x, y)) continue;
      // Smooth-surface points only: a flat depth window on both ends.
      const auto da = robust_depth(Vec2(x, y), a.depth, PrPParams{1e9, params.window});
      if (std::abs(da - robust_depth(Vec2(x, y), a.depth, PrPParams{1e-9, params.window})) > params.eps_d) continue;
      const Vec2 q = ab.target(x, y);
      const Vec2 qr(std::round(q.x()), std::round(q.y()));
      if (!cam.in_bounds(qr)) continue;
      const ReprojectResult back = reproject(qr, b, a, params);
      if (!back.ok()) continue;
      EXPECT_LE((back.pixel - Vec2(x, y)).norm(), 1.0 + 1e-9) << x << "," << y;
      ++checked;
    }
  EXPECT_GT(static_cast<std::size_t>(checked), ab.valid_count() / 5);
}

TEST(Dense, MapFilesRoundTrip) {
  const CameraIntrinsics cam = narrow_camera();
  const SceneSpec s = test::fronto_plane_scene(1.0, 0.1);
  const RenderedView a = view_of(s, cam, PoseSE3{}), b = view_of(s, cam, test::translated({0.01, 0.0, 0.0}), 1);
  const CorrespondenceMap m = dense_correspondences(a, b, PrPParams{});
  const fs::path dir = fs::temp_directory_path() / "prp_corr_roundtrip";
  fs::create_directories(dir);
  write_correspondence_map(m, dir, "p");
  const CorrespondenceMap back = read_correspondence_map(dir, "p");
  fs::remove_all(dir);
  EXPECT_EQ(back.reason, m.reason);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (m.valid(x, y)) {
        EXPECT_FLOAT_EQ(back.target_x(x, y), static_cast<float>(m.target_x(x, y)));
      }
}

TEST(Cells, CountsAndCrop) {
  const CellCorrespondence s = cell_correspondence_homography(Mat3::Identity(), 70, 45, 64, 64, 8, 4.0);
  EXPECT_EQ(s.src_wc, 8);
  EXPECT_EQ(s.src_hc, 5);
  EXPECT_EQ(s.src_crop_width, 64);
  EXPECT_EQ(s.src_crop_height, 40);
  EXPECT_EQ(s.dst_wc, 8);
  EXPECT_EQ(s.dst_hc, 8);
}

TEST(Cells, CellCentreIsGeometric) {
  EXPECT_EQ(cell_center(0, 0, 8), Vec2(3.5, 3.5));
  EXPECT_EQ(cell_center(2, 5, 8), Vec2(43.5, 19.5));
}

TEST(Cells, IdentityPairGivesDiagonal) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(55.0, 64, 64);
  std::mt19937_64 rng(12);
  const RenderedView v = view_of(test::fronto_plane_scene(1.5), cam, test::random_pose(rng, 15.0, 0.3));
  const CellCorrespondence s = cell_correspondence_prp(v, v, 8, 4.0, PrPParams{});
  EXPECT_EQ(s.positives, diagonal(8, 8));
  EXPECT_EQ(s.positives, test::brute_cells_prp(v, v, 8, 4.0, PrPParams{}));
}

TEST(Cells, IdentityHomographyGivesDiagonal) {
  const CellCorrespondence s = cell_correspondence_homography(Mat3::Identity(), 64, 48, 64, 48, 8, 4.0);
  EXPECT_EQ(s.positives, diagonal(6, 8));
}

TEST(Cells, FourPixelShiftMatchesRightNeighbour) {
  Mat3 h = Mat3::Identity();
  h(0, 2) = 4.0;
  const CellCorrespondence s = cell_correspondence_homography(h, 64, 64, 64, 64, 8, 4.0);
  std::vector<CellQuad> want;
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      want.push_back({r, c, r, c});
      if (c + 1 < 8) want.push_back({r, c, r, c + 1});
    }
  EXPECT_EQ(s.positives, want);
  EXPECT_EQ(s.positives, test::brute_cells_homography(h, 64, 64, 64, 64, 8, 4.0));
}

TEST(Cells, BehindCameraGivesZeroRows) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(50.0, 32, 32);
  const SceneSpec s = test::fronto_plane_scene(2.0);
  const RenderedView a = view_of(s, cam, PoseSE3{});
  PoseSE3 turned;
  turned.rotation = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitY()).toRotationMatrix();
  turned.translation = {0.0, 0.0, 0.5};
  const RenderedView b = view_of(s, cam, turned, 1);
  EXPECT_EQ(reproject(Vec2(16, 16), a, b, PrPParams{}).reason, RejectReason::kBehindCamera);
  EXPECT_TRUE(cell_correspondence_prp(a, b, 8, 4.0, PrPParams{}).positives.empty());
}

TEST(Cells, PositivesNestAsEpsGrows) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(50.0, 64, 56);
  TrajectorySpec t;
  t.center = {0.0, 0.0, 0.3};
  t.frames = 20;
  t.arc_deg = 60.0;
  t.jitter_deg = 2.0;
  const auto poses = generate_trajectory(t);
  const RenderedView a = view_of(default_scene(), cam, poses[2]), b = view_of(default_scene(), cam, poses[9], 9);
  std::vector<CellQuad> prev;
  for (const double eps : {1.0, 2.0, 4.0, 6.0, 8.0, 12.0}) {
    const auto cur = cell_correspondence_prp(a, b, 8, eps, PrPParams{}).positives;
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) << eps;
    EXPECT_GE(cur.size(), prev.size());
    prev = cur;
  }
  EXPECT_FALSE(prev.empty());
}

TEST(Cells, PositivesPassTheDistanceTest) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Mat3 h = Mat3::Identity() + 0.05 * Mat3::Random();
    h(0, 2) = std::uniform_real_distribution<double>(-6, 6)(rng);
    h(1, 2) = std::uniform_real_distribution<double>(-6, 6)(rng);
    h(2, 0) *= 0.01;
    h(2, 1) *= 0.01;
    const CellCorrespondence s = cell_correspondence_homography(h, 48, 40, 48, 40, 8, 4.0);
    for (const auto& q : s.positives) {
      const Vec3 t = h * cell_center(q[0], q[1], 8).homogeneous();
      EXPECT_LE((t.hnormalized() - cell_center(q[2], q[3], 8)).norm(), 4.0 + 1e-12);
    }
  }
}

TEST(Cells, RandomHomographiesMatchBruteForce) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 h;
    h << 1 + 0.2 * u(rng), 0.2 * u(rng), 8 * u(rng), 0.2 * u(rng), 1 + 0.2 * u(rng), 8 * u(rng), 2e-3 * u(rng),
        2e-3 * u(rng), 1.0;
    for (const double eps : {2.0, 4.0, 8.0})
      ASSERT_EQ(cell_correspondence_homography(h, 32, 32, 32, 32, 8, eps).positives,
                test::brute_cells_homography(h, 32, 32, 32, 32, 8, eps))
          << trial;
  }
}

TEST(Cells, RandomPosePairsMatchBruteForce) {
  std::mt19937_64 rng(6);
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(55.0, 64, 48);
  std::uniform_real_distribution<double> az(-3.1, 3.1), el(0.6, 1.6), step(-0.25, 0.25);
  for (int trial = 0; trial < 20; ++trial) {
    const double a0 = az(rng);
    const Vec3 eye(2.0 * std::cos(a0), 2.0 * std::sin(a0), el(rng));
    const Vec3 eye2 = eye + Vec3(step(rng), step(rng), step(rng));
    const RenderedView a = view_of(default_scene(), cam, PoseSE3::look_at(eye, {0.0, 0.0, 0.3}));
    const RenderedView b = view_of(default_scene(), cam, PoseSE3::look_at(eye2, {0.1, 0.0, 0.3}), 1);
    ASSERT_EQ(cell_correspondence_prp(a, b, 8, 4.0, PrPParams{}).positives,
              test::brute_cells_prp(a, b, 8, 4.0, PrPParams{}))
        << trial;
  }
}

TEST(Cells, SerialReferenceAgrees) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(55.0, 64, 48);
  const RenderedView a = view_of(default_scene(), cam, PoseSE3::look_at({1.6, -1.2, 1.0}, {0.0, 0.0, 0.3}));
  const RenderedView b = view_of(default_scene(), cam, PoseSE3::look_at({1.4, -1.3, 1.1}, {0.0, 0.1, 0.3}), 1);
  EXPECT_EQ(cell_correspondence_prp(a, b, 8, 4.0, PrPParams{}).positives,
            serial::cell_correspondence_prp(a, b, 8, 4.0, PrPParams{}).positives);
  const CorrespondenceMap m = dense_correspondences(a, b, PrPParams{}), ms = serial::dense_correspondences(a, b, PrPParams{});
  EXPECT_EQ(m.reason, ms.reason);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (m.valid(x, y)) {
        ASSERT_EQ(m.target(x, y), ms.target(x, y));
      }
}

TEST(Cells, RotationOnlyPlaneAgreesWithHomography) {
  const CameraIntrinsics cam = CameraIntrinsics::from_hfov(50.0, 64, 64);
  const SceneSpec s = test::fronto_plane_scene(3.0);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    PoseSE3 pa, pb;
    pa.rotation = test::random_rotation(rng, 8.0);
    pb.rotation = test::random_rotation(rng, 8.0);
    const RenderedView a = view_of(s, cam, pa), b = view_of(s, cam, pb, 1);
    const Mat3 h = test::rotation_homography(cam, pa, cam, pb);
    const auto prp_s = cell_correspondence_prp(a, b, 8, 4.0, PrPParams{}).positives;
    EXPECT_EQ(prp_s, cell_correspondence_homography(h, 64, 64, 64, 64, 8, 4.0).positives) << trial;
    EXPECT_FALSE(prp_s.empty());
  }
}

TEST(Cells, PositivesFileRoundTrip) {
  Mat3 h = Mat3::Identity();
  h(0, 2) = 4.0;
  const CellCorrespondence s = cell_correspondence_homography(h, 32, 32, 32, 32, 8, 4.0);
  const fs::path p = fs::temp_directory_path() / "prp_cells.txt";
  write_cell_correspondence(s, p);
  EXPECT_EQ(read_cell_positives(p), s.positives);
  fs::remove(p);
}

TEST(Cells, SingularHomographyIsRejected) {
  EXPECT_THROW(cell_correspondence_homography(Mat3::Zero(), 32, 32, 32, 32, 8, 4.0), ShapeError);
}

}  // namespace
}  // namespace prp
