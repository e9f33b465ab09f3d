// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sparse3d {

namespace {
constexpr double kPi = 3.14159265358979323846;
}  // namespace

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // lands in [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

bool RigidTransform::is_rotation_valid(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Eigen::Matrix4d RigidTransform::as_homogeneous() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::from_yaw_translation(double yaw, const Vec3& t) {
  RigidTransform rt;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  rt.rotation << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  rt.translation = t;
  return rt;
}

Vec3 transform_center(const Vec3& center, const RigidTransform& source,
                      const RigidTransform& target) {
  if (!source.is_rotation_valid())
    throw ValidationError("transform_center: source rotation is not orthonormal");
  if (!target.is_rotation_valid())
    throw ValidationError("transform_center: target rotation is not orthonormal");
  const Eigen::Matrix4d m =
      target.as_homogeneous() * source.inverse().as_homogeneous();
  const Eigen::Vector4d p = m * center.homogeneous();
  return p.head<3>();
}

Vec3 apply_horizontal_offset(const Vec3& center, double x_offset) {
  return Vec3(center.x() + x_offset, center.y(), center.z());
}

double viewing_angle(double x, double z) {
  if (x == 0.0 && z == 0.0)
    throw ValidationError("viewing_angle: undefined at the origin");
  return std::atan2(x, z);
}

double rotation_from_alpha(double alpha, double theta) {
  return wrap_angle(alpha + theta);
}

double alpha_from_rotation(double rotation_y, double theta) {
  return wrap_angle(rotation_y - theta);
}

std::array<Vec3, 8> box3d_corners(const Label3D& label) {
  const double hw = label.width * 0.5;
  const double hl = label.length * 0.5;
  // Counterclockwise from above, starting at (+w/2, +l/2).
  const double xs[4] = {hw, -hw, -hw, hw};
  const double zs[4] = {hl, hl, -hl, -hl};
  const double c = std::cos(label.rotation_y);
  const double s = std::sin(label.rotation_y);

  std::array<Vec3, 8> corners;
  for (int face = 0; face < 2; ++face) {
    const double y = face == 0 ? 0.0 : -label.height;
    for (int i = 0; i < 4; ++i) {
      const double rx = c * xs[i] + s * zs[i];
      const double rz = -s * xs[i] + c * zs[i];
      corners[static_cast<std::size_t>(face * 4 + i)] =
          label.location + Vec3(rx, y, rz);
    }
  }
  return corners;
}

BBox2D project_box(const std::array<Vec3, 8>& corners, const CameraRig& rig) {
  double min_u = std::numeric_limits<double>::infinity();
  double max_u = -min_u;
  double min_v = min_u;
  double max_v = -min_u;
  for (const Vec3& c : corners) {
    if (c.z() <= kMinCameraDepth)
      throw ValidationError("project_box: corner at or behind the camera");
    const Eigen::Vector3d p = rig.projection * c.homogeneous();
    if (p.z() <= kMinCameraDepth)
      throw ValidationError("project_box: corner projects behind the image plane");
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  BBox2D box;
  const double w = static_cast<double>(rig.image_width);
  const double h = static_cast<double>(rig.image_height);
  box.left = std::clamp(min_u, 0.0, w);
  box.right = std::clamp(max_u, 0.0, w);
  box.top = std::clamp(min_v, 0.0, h);
  box.bottom = std::clamp(max_v, 0.0, h);
  return box;
}

double iou2d(const BBox2D& a, const BBox2D& b) {
  if (!a.is_valid() || !b.is_valid())
    throw ValidationError("iou2d: degenerate rectangle (negative extent)");
  const double ix = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double iy = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace sparse3d
