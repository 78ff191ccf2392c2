#include "neto/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neto/bounce_oracle.hpp"
#include "neto/mesh.hpp"
#include "neto/parallel.hpp"

namespace neto {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
constexpr double kGtBound = 1.1;

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw FormatError("expected a 3-vector in manifest");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}
Vec2 vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw FormatError("expected a 2-vector in manifest");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

json shape_to_json(const ShapeSpec& s) {
  json j;
  j["type"] = shape_name(s);
  std::visit(
      [&j](const auto& spec) {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, SphereSpec>) {
          j["center"] = vec_to_json(spec.center);
          j["radius"] = spec.radius;
        } else if constexpr (std::is_same_v<S, TorusSpec>) {
          j["center"] = vec_to_json(spec.center);
          j["major"] = spec.major;
          j["minor"] = spec.minor;
        } else if constexpr (std::is_same_v<S, RoundedBoxSpec>) {
          j["center"] = vec_to_json(spec.center);
          j["half"] = vec_to_json(spec.half);
          j["rounding"] = spec.rounding;
        } else if constexpr (std::is_same_v<S, BarbellSpec>) {
          j["center_a"] = vec_to_json(spec.center_a);
          j["center_b"] = vec_to_json(spec.center_b);
          j["radius_a"] = spec.radius_a;
          j["radius_b"] = spec.radius_b;
        } else {
          j["center_a"] = vec_to_json(spec.center_a);
          j["center_b"] = vec_to_json(spec.center_b);
          j["radius"] = spec.radius;
          j["half_height"] = spec.half_height;
        }
      },
      s);
  return j;
}

ShapeSpec shape_from_json(const json& j) {
  ShapeSpec s = shape_by_name(j.at("type").get<std::string>());
  std::visit(
      [&j](auto& spec) {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, SphereSpec>) {
          spec.center = vec3_from_json(j.at("center"));
          spec.radius = j.at("radius").get<double>();
        } else if constexpr (std::is_same_v<S, TorusSpec>) {
          spec.center = vec3_from_json(j.at("center"));
          spec.major = j.at("major").get<double>();
          spec.minor = j.at("minor").get<double>();
        } else if constexpr (std::is_same_v<S, RoundedBoxSpec>) {
          spec.center = vec3_from_json(j.at("center"));
          spec.half = vec3_from_json(j.at("half"));
          spec.rounding = j.at("rounding").get<double>();
        } else if constexpr (std::is_same_v<S, BarbellSpec>) {
          spec.center_a = vec3_from_json(j.at("center_a"));
          spec.center_b = vec3_from_json(j.at("center_b"));
          spec.radius_a = j.at("radius_a").get<double>();
          spec.radius_b = j.at("radius_b").get<double>();
        } else {
          spec.center_a = vec2_from_json(j.at("center_a"));
          spec.center_b = vec2_from_json(j.at("center_b"));
          spec.radius = j.at("radius").get<double>();
          spec.half_height = j.at("half_height").get<double>();
        }
      },
      s);
  return s;
}

void write_double(std::string& row, double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  row += buf;
}

}  // namespace

MonitorPlane rig_plane(const RigSpec& rig, const Camera& cam) {
  MonitorPlane plane;
  const Vec3 z = cam.rotation.col(2);
  plane.origin = rig.monitor_distance * z;
  plane.normal = -z;
  plane.u_axis = cam.rotation.col(0);
  plane.v_axis = cam.rotation.col(1);
  plane.extent = Vec2::Zero();
  return plane;
}

const char* pixel_tag_name(PixelTag tag) {
  switch (tag) {
    case PixelTag::TwoBounce: return "TwoBounce";
    case PixelTag::MultiBounce: return "MultiBounce";
    case PixelTag::TIR: return "TIR";
    case PixelTag::Background: return "Background";
  }
  return "Unknown";
}

PixelTag pixel_tag_by_name(const std::string& name) {
  if (name == "TwoBounce") return PixelTag::TwoBounce;
  if (name == "MultiBounce") return PixelTag::MultiBounce;
  if (name == "TIR") return PixelTag::TIR;
  if (name == "Background") return PixelTag::Background;
  throw FormatError("unknown pixel tag '" + name + "'");
}

std::array<std::int64_t, 4> Dataset::tag_counts() const {
  std::array<std::int64_t, 4> counts{0, 0, 0, 0};
  for (const auto& view : views)
    for (const auto& r : view.records)
      counts[static_cast<int>(r.tag)] += 1;
  return counts;
}

double rig_azimuth_deg(const RigSpec& rig, int k) {
  return 360.0 * double(k) / double(rig.n_views);
}

Camera rig_camera(const RigSpec& rig, int k) {
  const double az = rig_azimuth_deg(rig, k) * M_PI / 180.0;
  const double el = rig.elevation_deg * M_PI / 180.0;
  const Vec3 pos = rig.camera_distance *
                   Vec3(std::cos(el) * std::cos(az),
                        std::cos(el) * std::sin(az), std::sin(el));
  return look_at_camera(pos, Vec3::Zero(), rig.fov_deg, rig.width, rig.height);
}

Dataset generate_dataset(const ShapeSpec& shape, const RigSpec& rig,
                         std::uint64_t seed,
                         const std::filesystem::path& out_dir) {
  if (rig.n_views < 1 || rig.width < 1 || rig.height < 1)
    throw ConfigError("rig must have at least one view and pixel");
  std::filesystem::create_directories(out_dir);

  Dataset ds;
  ds.rig = rig;
  ds.shape = shape;
  ds.seed = seed;
  ds.root = out_dir;
  ds.views.resize(rig.n_views);

  for (int k = 0; k < rig.n_views; ++k) {
    ViewData& view = ds.views[k];
    view.index = k;
    view.azimuth_deg = rig_azimuth_deg(rig, k);
    view.camera = rig_camera(rig, k);
    view.plane = rig_plane(rig, view.camera);
    view.records.assign(static_cast<std::size_t>(rig.width) * rig.height, {});

    parallel_chunks(static_cast<std::size_t>(rig.height), [&](int, std::size_t lo,
                                                              std::size_t hi) {
      for (std::size_t j = lo; j < hi; ++j) {
        for (int i = 0; i < rig.width; ++i) {
          CorrespondenceRecord& rec =
              view.records[j * static_cast<std::size_t>(rig.width) + i];
          rec.u = i;
          rec.v = static_cast<int>(j);
          const Ray ray = pixel_ray(
              view.camera, Vec2(double(i) + 0.5, double(j) + 0.5));
          const BounceResult b =
              brute_force_bounce_count(shape, ray, rig.constants);
          if (b.tir) {
            rec.tag = PixelTag::TIR;
            rec.mask = 1;
          } else if (b.count == 0) {
            rec.tag = PixelTag::Background;
            rec.mask = 0;
          } else if (b.count == 2 && !b.bailed) {
            Ray out_ray{b.last_point, b.last_dir};
            const auto q = intersect_plane(view.plane, out_ray);
            if (q) {
              rec.tag = PixelTag::TwoBounce;
              rec.mask = 1;
              rec.q = *q;
              rec.q_uv = view.plane.to_uv(*q);
            } else {
              // A two-refraction path that never reaches the monitor cannot
              // be decoded by the rig; it degrades to the no-Q class.
              rec.tag = PixelTag::MultiBounce;
              rec.mask = 1;
            }
          } else {
            rec.tag = PixelTag::MultiBounce;
            rec.mask = 1;
            if (rig.corrupt_multibounce_q && !b.bailed &&
                b.last_dir.squaredNorm() > 0.5) {
              Ray out_ray{b.last_point, b.last_dir};
              const auto q = intersect_plane(view.plane, out_ray);
              if (q) {
                rec.q = *q;
                rec.q_uv = view.plane.to_uv(*q);
              }
            }
          }
        }
      }
    });

    // Plane extent: fixed from the rig, or 1.5x the exit footprint.
    if (rig.monitor_extent > 0.0) {
      view.plane.extent = Vec2(rig.monitor_extent, rig.monitor_extent);
      for (const auto& rec : view.records) {
        if (rec.q_uv && (std::abs(rec.q_uv->x()) > rig.monitor_extent ||
                         std::abs(rec.q_uv->y()) > rig.monitor_extent)) {
          throw ConfigError(
              "monitor extent " + std::to_string(rig.monitor_extent) +
              " does not cover exit ray at view " + std::to_string(k) +
              " pixel (" + std::to_string(rec.u) + ", " +
              std::to_string(rec.v) + ")");
        }
      }
    } else {
      Vec2 peak = Vec2::Zero();
      for (const auto& rec : view.records)
        if (rec.q_uv) peak = peak.cwiseMax(rec.q_uv->cwiseAbs());
      view.plane.extent = peak.maxCoeff() > 0.0 ? Vec2(1.5 * peak) : Vec2(1, 1);
    }
  }

  // Manifest.
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["seed"] = seed;
  json jrig;
  jrig["n_views"] = rig.n_views;
  jrig["width"] = rig.width;
  jrig["height"] = rig.height;
  jrig["fov_deg"] = rig.fov_deg;
  jrig["camera_distance"] = rig.camera_distance;
  jrig["elevation_deg"] = rig.elevation_deg;
  jrig["monitor_distance"] = rig.monitor_distance;
  jrig["monitor_extent"] = rig.monitor_extent;
  jrig["gt_resolution"] = rig.gt_resolution;
  jrig["corrupt_multibounce_q"] = rig.corrupt_multibounce_q;
  manifest["rig"] = jrig;
  manifest["optical"] = {{"n_outside", rig.constants.n_outside},
                         {"n_inside", rig.constants.n_inside}};
  manifest["shape"] = shape_to_json(shape);
  json jviews = json::array();
  for (const auto& view : ds.views) {
    json jv;
    jv["index"] = view.index;
    jv["azimuth_deg"] = view.azimuth_deg;
    jv["extent"] = vec_to_json(view.plane.extent);
    jviews.push_back(jv);
  }
  manifest["views"] = jviews;
  {
    std::ofstream os(out_dir / "manifest.json", std::ios::trunc);
    if (!os) throw FormatError("cannot write manifest.json");
    os << manifest.dump(2) << '\n';
  }

  // Per-view CSV.
  for (const auto& view : ds.views) {
    const auto path = out_dir / ("view_" + std::to_string(view.index) + ".csv");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << "u,v,mask,tag,qx,qy,qz,quv_u,quv_v\n";
    std::string row;
    for (const auto& rec : view.records) {
      row.clear();
      row += std::to_string(rec.u);
      row += ',';
      row += std::to_string(rec.v);
      row += ',';
      row += std::to_string(rec.mask);
      row += ',';
      row += pixel_tag_name(rec.tag);
      row += ',';
      if (rec.q) {
        write_double(row, rec.q->x());
        row += ',';
        write_double(row, rec.q->y());
        row += ',';
        write_double(row, rec.q->z());
        row += ',';
        write_double(row, rec.q_uv->x());
        row += ',';
        write_double(row, rec.q_uv->y());
      } else {
        row += ",,,,";
      }
      row += '\n';
      os << row;
    }
    if (!os) throw FormatError("write failed for " + path.string());
  }

  // Ground-truth mesh for the metrics stage.
  ShapeField field(shape);
  TriangleMesh gt = marching_cubes(field, Vec3(-kGtBound, -kGtBound, -kGtBound),
                                   Vec3(kGtBound, kGtBound, kGtBound),
                                   rig.gt_resolution);
  save_obj(out_dir / "gt.obj", gt);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw FormatError("cannot open " + manifest_path.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + manifest_path.string() + ": " +
                      e.what());
  }
  const int version = manifest.at("format_version").get<int>();
  if (version != kFormatVersion)
    throw FormatError("dataset format version " + std::to_string(version) +
                      " is not supported; this build reads version " +
                      std::to_string(kFormatVersion));

  Dataset ds;
  ds.root = dir;
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  const json& jrig = manifest.at("rig");
  ds.rig.n_views = jrig.at("n_views").get<int>();
  ds.rig.width = jrig.at("width").get<int>();
  ds.rig.height = jrig.at("height").get<int>();
  ds.rig.fov_deg = jrig.at("fov_deg").get<double>();
  ds.rig.camera_distance = jrig.at("camera_distance").get<double>();
  ds.rig.elevation_deg = jrig.at("elevation_deg").get<double>();
  ds.rig.monitor_distance = jrig.at("monitor_distance").get<double>();
  ds.rig.monitor_extent = jrig.at("monitor_extent").get<double>();
  ds.rig.gt_resolution = jrig.at("gt_resolution").get<int>();
  ds.rig.corrupt_multibounce_q = jrig.at("corrupt_multibounce_q").get<bool>();
  ds.rig.constants.n_outside = manifest.at("optical").at("n_outside").get<double>();
  ds.rig.constants.n_inside = manifest.at("optical").at("n_inside").get<double>();
  ds.shape = shape_from_json(manifest.at("shape"));

  const json& jviews = manifest.at("views");
  ds.views.resize(ds.rig.n_views);
  if (static_cast<int>(jviews.size()) != ds.rig.n_views)
    throw FormatError("manifest view list does not match n_views");

  for (int k = 0; k < ds.rig.n_views; ++k) {
    ViewData& view = ds.views[k];
    view.index = k;
    view.azimuth_deg = rig_azimuth_deg(ds.rig, k);
    view.camera = rig_camera(ds.rig, k);
    view.plane = rig_plane(ds.rig, view.camera);
    view.plane.extent = vec2_from_json(jviews[k].at("extent"));

    const auto path = dir / ("view_" + std::to_string(k) + ".csv");
    std::ifstream vs(path);
    if (!vs) throw FormatError("cannot open " + path.string());
    std::string line;
    long line_no = 0;
    auto fail = [&](const std::string& why) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " +
                        why);
    };
    if (!std::getline(vs, line)) fail("missing header");
    ++line_no;
    if (line == "u,v,mask,tag,qx,qy,qz,quv_u,quv_v\r")
      line.pop_back();
    if (line != "u,v,mask,tag,qx,qy,qz,quv_u,quv_v")
      fail("unexpected header '" + line + "'");

    const std::size_t expected =
        static_cast<std::size_t>(ds.rig.width) * ds.rig.height;
    view.records.reserve(expected);
    while (std::getline(vs, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::array<std::string, 9> fields;
      std::size_t start = 0;
      for (int f = 0; f < 9; ++f) {
        const std::size_t comma = line.find(',', start);
        if (f < 8) {
          if (comma == std::string::npos) fail("expected 9 fields");
          fields[f] = line.substr(start, comma - start);
          start = comma + 1;
        } else {
          if (comma != std::string::npos) fail("too many fields");
          fields[f] = line.substr(start);
        }
      }
      CorrespondenceRecord rec;
      try {
        rec.u = std::stoi(fields[0]);
        rec.v = std::stoi(fields[1]);
        rec.mask = std::stoi(fields[2]);
      } catch (const std::exception&) {
        fail("malformed integer field");
      }
      try {
        rec.tag = pixel_tag_by_name(fields[3]);
      } catch (const FormatError& e) {
        fail(e.what());
      }
      const bool has_q = !fields[4].empty();
      if (has_q) {
        try {
          rec.q = Vec3(std::stod(fields[4]), std::stod(fields[5]),
                       std::stod(fields[6]));
          rec.q_uv = Vec2(std::stod(fields[7]), std::stod(fields[8]));
        } catch (const std::exception&) {
          fail("malformed float field");
        }
      }
      if (rec.mask != 0 && rec.mask != 1) fail("mask must be 0 or 1");
      if ((rec.tag == PixelTag::Background) != (rec.mask == 0))
        fail("mask and tag disagree");
      view.records.push_back(rec);
    }
    if (view.records.size() != expected)
      fail("expected " + std::to_string(expected) + " records, found " +
           std::to_string(view.records.size()));
  }
  return ds;
}

}  // namespace neto
