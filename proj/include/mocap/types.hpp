#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mocap/error.hpp"

namespace mocap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double degrees) { return degrees * kPi / 180.0; }

// Body_25B keypoint layout (COCO order plus neck, head top and feet).
namespace body25b {

inline constexpr std::size_t kCount = 25;

enum Landmark : int {
  nose = 0,
  l_eye = 1,
  r_eye = 2,
  l_ear = 3,
  r_ear = 4,
  l_shoulder = 5,
  r_shoulder = 6,
  l_elbow = 7,
  r_elbow = 8,
  l_wrist = 9,
  r_wrist = 10,
  l_hip = 11,
  r_hip = 12,
  l_knee = 13,
  r_knee = 14,
  l_ankle = 15,
  r_ankle = 16,
  upper_neck = 17,
  head_top = 18,
  l_big_toe = 19,
  l_small_toe = 20,
  l_heel = 21,
  r_big_toe = 22,
  r_small_toe = 23,
  r_heel = 24,
};

inline constexpr std::array<std::string_view, kCount> kNames = {
    "Nose",     "LEye",      "REye",      "LEar",      "REar",      "LShoulder", "RShoulder",
    "LElbow",   "RElbow",    "LWrist",    "RWrist",    "LHip",      "RHip",      "LKnee",
    "RKnee",    "LAnkle",    "RAnkle",    "UpperNeck", "HeadTop",   "LBigToe",   "LSmallToe",
    "LHeel",    "RBigToe",   "RSmallToe", "RHeel"};

// The 21 landmarks consumed by marker augmentation: everything except the
// eyes and ears, which carry no segment pose information.
inline constexpr std::array<int, 21> kAugmentationSubset = {
    nose,      l_shoulder, r_shoulder, l_elbow,     r_elbow, l_wrist,    r_wrist,
    l_hip,     r_hip,      l_knee,     r_knee,      l_ankle, r_ankle,    upper_neck,
    head_top,  l_big_toe,  l_small_toe, l_heel,     r_big_toe, r_small_toe, r_heel};

inline std::optional<int> index_of(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

}  // namespace body25b

}  // namespace mocap
