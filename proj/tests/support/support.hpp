#pragma once
// Test-only oracles and scene builders. Nothing here calls the kernels it checks.

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "prp/correspondence.hpp"
#include "prp/estimation.hpp"
#include "prp/losses.hpp"
#include "prp/scene.hpp"

namespace prp::test {

// --- geometry -----------------------------------------------------------------------------

/// Pixel + ray distance to world point, in long double.
Vec3 oracle_backproject(const Vec2& p, double d, const CameraIntrinsics& cam, const PoseSE3& pose);
/// World point to pixel in long double; z is the camera-frame depth.
Vec2 oracle_project(const Vec3& x, const CameraIntrinsics& cam, const PoseSE3& pose, double* z = nullptr);

/// Rotation angle in degrees from the unit quaternion of R.
double quaternion_angle_deg(const Mat3& r);

Mat3 random_rotation(std::mt19937_64& rng, double max_deg);
PoseSE3 random_pose(std::mt19937_64& rng, double max_deg, double max_translation);
CameraIntrinsics random_camera(std::mt19937_64& rng);

/// Homography of a pure camera rotation between two views sharing one centre.
Mat3 rotation_homography(const CameraIntrinsics& k1, const PoseSE3& c2w_1, const CameraIntrinsics& k2,
                         const PoseSE3& c2w_2);

// --- scenes -------------------------------------------------------------------------------

/// Textured plane facing the origin, perpendicular to +z at distance z.
SceneSpec fronto_plane_scene(double z, double half_extent = 50.0,
                             TextureSpec::Kind kind = TextureSpec::Kind::kCheckerNoise);

/// Foreground half-plane x <= edge_x at depth z_fg in front of a background plane at z_bg.
SceneSpec two_plane_scene(double z_fg, double z_bg, double edge_x);

/// Camera looking down +z from `eye` with no rotation.
PoseSE3 translated(const Vec3& eye);

// --- correspondence -----------------------------------------------------------------------

/// Every (src cell, dst cell) pair tested by hand against the reprojected (or transferred) centre.
std::vector<CellQuad> brute_cells_prp(const RenderedView& src, const RenderedView& dst, int cell, double eps_s,
                                      const PrPParams& params);
std::vector<CellQuad> brute_cells_homography(const Mat3& h, int src_w, int src_h, int dst_w, int dst_h, int cell,
                                             double eps_s);

// --- losses -------------------------------------------------------------------------------

using PositiveSet = std::set<CellQuad>;

/// Hinge descriptor loss in long double with a plain nested loop.
long double oracle_descriptor_loss(const Eigen::MatrixXd& a, int a_wc, const Eigen::MatrixXd& b, int b_wc,
                                   const PositiveSet& s, const DescriptorLossParams& params);
long double oracle_detector_loss(const Eigen::MatrixXd& logits, const std::vector<int>& targets);

// --- evaluation ---------------------------------------------------------------------------

/// (1/t) * integral over [0, t] of the fraction of errors <= e, by the midpoint rule with the given step.
double numeric_auc(const std::vector<double>& errors, double t, double step = 1e-4);

/// Horn's closed-form absolute orientation (unit quaternion from the 4x4 eigenproblem).
PoseSE3 horn_alignment(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const std::vector<double>& w);

double weighted_cost(const PoseSE3& t, const std::vector<Vec3>& p, const std::vector<Vec3>& q,
                     const std::vector<double>& w);

}  // namespace prp::test
