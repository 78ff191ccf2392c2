#include "neto/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace neto {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    // stoull wraps negative input around instead of failing.
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    const std::uint64_t i = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an unsigned integer: '" +
                      v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::string fmt_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  // Dispatch table keyed by the serialized name; keep in sync with
  // serialize_config below.
  if (key == "rig.n_views") cfg.rig.n_views = static_cast<int>(parse_int(key, value));
  else if (key == "rig.width") cfg.rig.width = static_cast<int>(parse_int(key, value));
  else if (key == "rig.height") cfg.rig.height = static_cast<int>(parse_int(key, value));
  else if (key == "rig.fov_deg") cfg.rig.fov_deg = parse_double(key, value);
  else if (key == "rig.camera_distance") cfg.rig.camera_distance = parse_double(key, value);
  else if (key == "rig.elevation_deg") cfg.rig.elevation_deg = parse_double(key, value);
  else if (key == "rig.monitor_distance") cfg.rig.monitor_distance = parse_double(key, value);
  else if (key == "rig.monitor_extent") cfg.rig.monitor_extent = parse_double(key, value);
  else if (key == "rig.gt_resolution") cfg.rig.gt_resolution = static_cast<int>(parse_int(key, value));
  else if (key == "rig.corrupt_multibounce_q") cfg.rig.corrupt_multibounce_q = parse_bool(key, value);
  else if (key == "optics.n_outside") cfg.rig.constants.n_outside = parse_double(key, value);
  else if (key == "optics.n_inside") cfg.rig.constants.n_inside = parse_double(key, value);
  else if (key == "shape.type") cfg.shape = value;
  else if (key == "net.depth") cfg.net_depth = static_cast<int>(parse_int(key, value));
  else if (key == "net.width") cfg.net_width = static_cast<int>(parse_int(key, value));
  else if (key == "net.enc_freqs") cfg.net_enc_freqs = static_cast<int>(parse_int(key, value));
  else if (key == "net.log_s_init") cfg.net_log_s_init = parse_double(key, value);
  else if (key == "net.init_radius") cfg.init_radius = parse_double(key, value);
  else if (key == "net.init_steps") cfg.init_steps = static_cast<int>(parse_int(key, value));
  else if (key == "sampling.n_coarse") cfg.sampling.n_coarse = static_cast<int>(parse_int(key, value));
  else if (key == "sampling.n_importance_rounds") cfg.sampling.n_importance_rounds = static_cast<int>(parse_int(key, value));
  else if (key == "sampling.n_importance_per_round") cfg.sampling.n_importance_per_round = static_cast<int>(parse_int(key, value));
  else if (key == "sampling.interior_step_offset") cfg.sampling.interior_step_offset = parse_double(key, value);
  else if (key == "sampling.opacity_threshold") cfg.sampling.opacity_threshold = parse_double(key, value);
  else if (key == "sampling.scene_bound") cfg.sampling.scene_bound = parse_double(key, value);
  else if (key == "sampling.n_segment_samples") cfg.sampling.n_segment_samples = static_cast<int>(parse_int(key, value));
  else if (key == "sampling.sdf_threshold") cfg.sampling.sdf_threshold = parse_double(key, value);
  else if (key == "sampling.mode") {
    if (value == "volume") cfg.sampling.mode = IntersectMode::kVolume;
    else if (value == "surface") cfg.sampling.mode = IntersectMode::kSurface;
    else throw ConfigError("config key 'sampling.mode': expected volume or surface, got '" + value + "'");
  }
  else if (key == "loss.refraction") cfg.loss.refraction = parse_double(key, value);
  else if (key == "loss.eikonal") cfg.loss.eikonal = parse_double(key, value);
  else if (key == "loss.mask") cfg.loss.mask = parse_double(key, value);
  else if (key == "train.batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "train.iterations") cfg.iterations = parse_int(key, value);
  else if (key == "train.seed") cfg.seed = parse_u64(key, value);
  else if (key == "train.mask_mix") cfg.mask_mix = parse_double(key, value);
  else if (key == "train.lr") cfg.lr = parse_double(key, value);
  else if (key == "train.checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(key, value));
  else if (key == "train.enable_refraction") cfg.enable_refraction = parse_bool(key, value);
  else if (key == "train.enable_eikonal") cfg.enable_eikonal = parse_bool(key, value);
  else if (key == "train.enable_mask") cfg.enable_mask = parse_bool(key, value);
  else if (key == "train.enable_occlusion_check") cfg.enable_occlusion_check = parse_bool(key, value);
  else if (key == "extract.resolution") cfg.extract_resolution = static_cast<int>(parse_int(key, value));
  else if (key == "eval.tau") cfg.eval_tau = parse_double(key, value);
  else if (key == "eval.samples") cfg.eval_samples = static_cast<int>(parse_int(key, value));
  else if (key == "eval.seed") cfg.eval_seed = parse_u64(key, value);
  else if (key == "run.threads") cfg.threads = static_cast<int>(parse_int(key, value));
  else if (key == "run.data_dir") cfg.data_dir = value;
  else if (key == "run.out_dir") cfg.out_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": empty key");
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "eval.samples = " << cfg.eval_samples << '\n';
  os << "eval.seed = " << cfg.eval_seed << '\n';
  os << "eval.tau = " << fmt_double(cfg.eval_tau) << '\n';
  os << "extract.resolution = " << cfg.extract_resolution << '\n';
  os << "loss.eikonal = " << fmt_double(cfg.loss.eikonal) << '\n';
  os << "loss.mask = " << fmt_double(cfg.loss.mask) << '\n';
  os << "loss.refraction = " << fmt_double(cfg.loss.refraction) << '\n';
  os << "net.depth = " << cfg.net_depth << '\n';
  os << "net.enc_freqs = " << cfg.net_enc_freqs << '\n';
  os << "net.init_radius = " << fmt_double(cfg.init_radius) << '\n';
  os << "net.init_steps = " << cfg.init_steps << '\n';
  os << "net.log_s_init = " << fmt_double(cfg.net_log_s_init) << '\n';
  os << "net.width = " << cfg.net_width << '\n';
  os << "optics.n_inside = " << fmt_double(cfg.rig.constants.n_inside) << '\n';
  os << "optics.n_outside = " << fmt_double(cfg.rig.constants.n_outside) << '\n';
  os << "rig.camera_distance = " << fmt_double(cfg.rig.camera_distance) << '\n';
  os << "rig.corrupt_multibounce_q = "
     << (cfg.rig.corrupt_multibounce_q ? "true" : "false") << '\n';
  os << "rig.elevation_deg = " << fmt_double(cfg.rig.elevation_deg) << '\n';
  os << "rig.fov_deg = " << fmt_double(cfg.rig.fov_deg) << '\n';
  os << "rig.gt_resolution = " << cfg.rig.gt_resolution << '\n';
  os << "rig.height = " << cfg.rig.height << '\n';
  os << "rig.monitor_distance = " << fmt_double(cfg.rig.monitor_distance) << '\n';
  os << "rig.monitor_extent = " << fmt_double(cfg.rig.monitor_extent) << '\n';
  os << "rig.n_views = " << cfg.rig.n_views << '\n';
  os << "rig.width = " << cfg.rig.width << '\n';
  os << "run.data_dir = " << cfg.data_dir << '\n';
  os << "run.out_dir = " << cfg.out_dir << '\n';
  os << "run.threads = " << cfg.threads << '\n';
  os << "sampling.interior_step_offset = "
     << fmt_double(cfg.sampling.interior_step_offset) << '\n';
  os << "sampling.mode = "
     << (cfg.sampling.mode == IntersectMode::kSurface ? "surface" : "volume")
     << '\n';
  os << "sampling.n_coarse = " << cfg.sampling.n_coarse << '\n';
  os << "sampling.n_importance_per_round = "
     << cfg.sampling.n_importance_per_round << '\n';
  os << "sampling.n_importance_rounds = " << cfg.sampling.n_importance_rounds
     << '\n';
  os << "sampling.n_segment_samples = " << cfg.sampling.n_segment_samples << '\n';
  os << "sampling.opacity_threshold = "
     << fmt_double(cfg.sampling.opacity_threshold) << '\n';
  os << "sampling.scene_bound = " << fmt_double(cfg.sampling.scene_bound) << '\n';
  os << "sampling.sdf_threshold = " << fmt_double(cfg.sampling.sdf_threshold)
     << '\n';
  os << "shape.type = " << cfg.shape << '\n';
  os << "train.batch_size = " << cfg.batch_size << '\n';
  os << "train.checkpoint_every = " << cfg.checkpoint_every << '\n';
  os << "train.enable_eikonal = " << (cfg.enable_eikonal ? "true" : "false") << '\n';
  os << "train.enable_mask = " << (cfg.enable_mask ? "true" : "false") << '\n';
  os << "train.enable_occlusion_check = "
     << (cfg.enable_occlusion_check ? "true" : "false") << '\n';
  os << "train.enable_refraction = "
     << (cfg.enable_refraction ? "true" : "false") << '\n';
  os << "train.iterations = " << cfg.iterations << '\n';
  os << "train.lr = " << fmt_double(cfg.lr) << '\n';
  os << "train.mask_mix = " << fmt_double(cfg.mask_mix) << '\n';
  os << "train.seed = " << cfg.seed << '\n';
  return os.str();
}

void write_resolved_config(const RunConfig& cfg,
                           const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << serialize_config(cfg);
  if (!os) throw ConfigError("write failed for " + path.string());
}

}  // namespace neto
