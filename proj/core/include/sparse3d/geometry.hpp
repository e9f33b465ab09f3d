// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Camera-frame 3D geometry for monocular detection labels.
//
// Conventions (camera coordinates): x right, y down, z forward. A 3D box
// is anchored at the center of its bottom face; the box spans [y-h, y]
// vertically. At rotation_y = 0 the box length runs along +z, so yaw is
// measured from the optical axis. The observation angle alpha relates to
// the global yaw through the viewing angle theta = atan2(x, z):
//     rotation_y = alpha + theta.

#ifndef SPARSE3D_GEOMETRY_HPP_
#define SPARSE3D_GEOMETRY_HPP_

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>

#include "sparse3d/error.hpp"

namespace sparse3d {

using Vec3 = Eigen::Vector3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

// Points at or behind this camera-frame depth cannot be projected.
inline constexpr double kMinCameraDepth = 0.1;

// Wraps an angle into (-pi, pi]; exact multiples of -pi map to +pi.
double wrap_angle(double a);

// SE(3) pose: p_camera = rotation * p_world + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  bool is_rotation_valid(double tol = 1e-9) const;
  Eigen::Matrix4d as_homogeneous() const;
  RigidTransform inverse() const;

  static RigidTransform identity() { return {}; }
  static RigidTransform from_yaw_translation(double yaw, const Vec3& t);
};

// Axis-aligned image-plane rectangle, pixels.
struct BBox2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() * height(); }
  bool is_valid() const { return right >= left && bottom >= top; }
};

// Intrinsics, pose, and image bounds of one camera.
struct CameraRig {
  Mat34 projection = Mat34::Zero();   // 3x4 projection matrix
  RigidTransform extrinsic;           // world -> camera
  int image_width = 0;
  int image_height = 0;
};

// One annotated object. Field order mirrors the on-disk label layout.
struct Label3D {
  std::string class_name = "Car";
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  BBox2D bbox2d;
  double height = 0.0;   // meters
  double width = 0.0;
  double length = 0.0;
  Vec3 location = Vec3::Zero();   // bottom-face center, camera frame
  double rotation_y = 0.0;
  std::optional<double> score;
};

// Moves a camera-frame point from the source camera into the target
// camera: applies [R_t|T_t] * [R_s|T_s]^-1 through 4x4 homogeneous lifts.
// Throws ValidationError if either rotation is not orthonormal.
Vec3 transform_center(const Vec3& center, const RigidTransform& source,
                      const RigidTransform& target);

// Shifts a point laterally in the camera frame; y and z are untouched.
Vec3 apply_horizontal_offset(const Vec3& center, double x_offset);

// Viewing angle theta = atan2(x, z) of a ground point. Throws
// ValidationError at the origin, where the direction is undefined.
double viewing_angle(double x, double z);

// Global yaw that preserves the observation angle at viewing angle theta,
// wrapped into (-pi, pi].
double rotation_from_alpha(double alpha, double theta);

// Inverse of the above: alpha = rotation_y - theta, wrapped.
double alpha_from_rotation(double rotation_y, double theta);

// The 8 box corners in camera coordinates. Order: bottom face first
// (y = location.y), then the top face (y = location.y - h), each face
// counterclockwise from (+w/2, +l/2) when viewed from above at yaw 0.
std::array<Vec3, 8> box3d_corners(const Label3D& label);

// Projects the corners, takes the pixel-space envelope, and clamps it to
// the image bounds. Throws ValidationError if any corner lies at depth
// <= kMinCameraDepth.
BBox2D project_box(const std::array<Vec3, 8>& corners, const CameraRig& rig);

// Intersection-over-union of axis-aligned rectangles; 0 when either has
// zero area.
double iou2d(const BBox2D& a, const BBox2D& b);

}  // namespace sparse3d

#endif  // SPARSE3D_GEOMETRY_HPP_
