#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "neto/geometry.hpp"
#include "neto/shapes.hpp"
#include "neto/types.hpp"

namespace neto {

/// Virtual turntable: cameras on a circle of constant elevation looking at
/// the origin, each with a monitor plane behind the object along its view
/// axis. The shape must sit inside the unit bound.
struct RigSpec {
  int n_views = 8;
  int width = 64;
  int height = 64;
  double fov_deg = 40.0;
  double camera_distance = 3.0;
  double elevation_deg = 15.0;
  double monitor_distance = 2.5;
  /// Half-extent of the active monitor area; 0 auto-sizes each view's plane
  /// to 1.5x its exit-ray footprint.
  double monitor_extent = 0.0;
  int gt_resolution = 256;
  OpticalConstants constants;
  /// When set, multi-bounce pixels carry the oracle's actual landing point
  /// as Q (the decoded-but-wrong value a physical rig would produce).
  bool corrupt_multibounce_q = false;
};

enum class PixelTag { TwoBounce, MultiBounce, TIR, Background };

const char* pixel_tag_name(PixelTag tag);
PixelTag pixel_tag_by_name(const std::string& name);

struct CorrespondenceRecord {
  int u = 0;  ///< pixel column
  int v = 0;  ///< pixel row
  int mask = 0;
  PixelTag tag = PixelTag::Background;
  std::optional<Vec3> q;      ///< monitor hit, world coordinates
  std::optional<Vec2> q_uv;   ///< same hit in the plane frame
};

struct ViewData {
  int index = 0;
  double azimuth_deg = 0.0;
  Camera camera;
  MonitorPlane plane;
  std::vector<CorrespondenceRecord> records;  ///< row-major, v outer
};

struct Dataset {
  RigSpec rig;
  ShapeSpec shape;
  std::uint64_t seed = 0;
  std::vector<ViewData> views;
  std::filesystem::path root;

  std::array<std::int64_t, 4> tag_counts() const;  ///< indexed by PixelTag
};

/// Builds the camera for view `k` of the rig.
Camera rig_camera(const RigSpec& rig, int k);
/// Azimuth of view `k` in degrees.
double rig_azimuth_deg(const RigSpec& rig, int k);
/// Monitor plane behind the object as seen from `cam`, extent unset; data
/// generation sizes the extent per view, other callers pick their own.
MonitorPlane rig_plane(const RigSpec& rig, const Camera& cam);

/// Traces every pixel of every view with the exact multi-bounce oracle and
/// writes manifest.json, view_<k>.csv, and gt.obj into `out_dir`. Returns
/// the dataset as loaded. Throws ConfigError when a fixed monitor_extent
/// fails to cover an exit ray.
Dataset generate_dataset(const ShapeSpec& shape, const RigSpec& rig,
                         std::uint64_t seed,
                         const std::filesystem::path& out_dir);

/// Bit-exact round trip of generate_dataset's output. Throws FormatError
/// with file and line diagnostics.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace neto
