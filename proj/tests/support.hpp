#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mocap/anthro.hpp"
#include "mocap/rig.hpp"

namespace testing {

using namespace mocap;

inline CameraModel camera_at(const std::string& id, const Vec3& pos, const Vec3& target, double f = 1000.0) {
  CameraModel c;
  c.id = id;
  c.intrinsics = intrinsics_matrix(f, f, 960.0, 540.0);
  c.rotation = look_at_rotation(pos, target);
  c.center = pos;
  return c;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

/// Axis-aligned unit cube, outward winding.
inline BodyMesh unit_cube() {
  BodyMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

/// Closed cylinder along z with `around` segments and `rings` levels.
inline BodyMesh cylinder(double r, double h, int around = 256, int rings = 8) {
  BodyMesh m;
  for (int j = 0; j <= rings; ++j) {
    for (int k = 0; k < around; ++k) {
      const double a = 2.0 * kPi * k / around;
      m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), h * j / rings);
    }
  }
  auto id = [&](int j, int k) { return j * around + (k % around); };
  for (int j = 0; j < rings; ++j) {
    for (int k = 0; k < around; ++k) {
      m.faces.push_back({id(j, k), id(j, k + 1), id(j + 1, k + 1)});
      m.faces.push_back({id(j, k), id(j + 1, k + 1), id(j + 1, k)});
    }
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, 0);
  const int top = bottom + 1;
  m.vertices.emplace_back(0, 0, h);
  for (int k = 0; k < around; ++k) {
    m.faces.push_back({bottom, id(0, k + 1), id(0, k)});
    m.faces.push_back({top, id(rings, k), id(rings, k + 1)});
  }
  m.landmarks["MID"] = id(rings / 2, 0);
  return m;
}

/// UV sphere centred at the origin.
inline BodyMesh sphere(double r, int stacks = 200, int slices = 400) {
  BodyMesh m;
  m.vertices.emplace_back(0, 0, -r);
  for (int i = 1; i < stacks; ++i) {
    const double phi = -kPi / 2 + kPi * i / stacks;
    for (int k = 0; k < slices; ++k) {
      const double th = 2.0 * kPi * k / slices;
      m.vertices.emplace_back(r * std::cos(phi) * std::cos(th), r * std::cos(phi) * std::sin(th), r * std::sin(phi));
    }
  }
  m.vertices.emplace_back(0, 0, r);
  const int top = static_cast<int>(m.vertices.size()) - 1;
  auto id = [&](int i, int k) { return 1 + (i - 1) * slices + (k % slices); };
  for (int k = 0; k < slices; ++k) m.faces.push_back({0, id(1, k + 1), id(1, k)});
  for (int i = 1; i + 1 < stacks; ++i) {
    for (int k = 0; k < slices; ++k) {
      m.faces.push_back({id(i, k), id(i, k + 1), id(i + 1, k + 1)});
      m.faces.push_back({id(i, k), id(i + 1, k + 1), id(i + 1, k)});
    }
  }
  for (int k = 0; k < slices; ++k) m.faces.push_back({top, id(stacks - 1, k), id(stacks - 1, k + 1)});
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mocap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
