#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "neto/dataset.hpp"
#include "neto/loss.hpp"
#include "neto/sampling.hpp"
#include "neto/train.hpp"
#include "neto/types.hpp"

namespace neto {

/// Every knob of the pipeline in one flat structure. Serialized as a
/// key = value file so a run can be replayed exactly from the resolved copy
/// written next to its outputs.
struct RunConfig {
  RigSpec rig;  ///< capture geometry, optics, and the oracle corruption flag
  std::string shape = "sphere";

  int net_depth = 4;
  int net_width = 128;
  int net_enc_freqs = 5;
  double net_log_s_init = 3.0;
  double init_radius = 0.5;
  int init_steps = 2000;

  SamplingConfig sampling;
  LossWeights loss;

  int batch_size = 512;
  std::int64_t iterations = 5000;
  std::uint64_t seed = 1;
  double mask_mix = 0.25;
  double lr = 5e-4;
  int checkpoint_every = 0;
  bool enable_refraction = true;
  bool enable_eikonal = true;
  bool enable_mask = true;
  bool enable_occlusion_check = true;

  int extract_resolution = 128;
  double eval_tau = 0.01;
  int eval_samples = 100000;
  std::uint64_t eval_seed = 0;

  int threads = 0;  ///< 0 uses all available cores

  std::string data_dir;
  std::string out_dir;
};

/// Applies one parsed key to the config. Unknown keys and unparsable values
/// raise ConfigError naming the key.
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

/// Reads a flat key = value file ('#' starts a comment) on top of `cfg`.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Full round-trippable dump of the config, one key per line.
std::string serialize_config(const RunConfig& cfg);

void write_resolved_config(const RunConfig& cfg,
                           const std::filesystem::path& path);

/// Trainer view of the run config.
template <typename T>
TrainConfig<T> make_train_config(const RunConfig& cfg) {
  TrainConfig<T> tc;
  tc.batch_size = cfg.batch_size;
  tc.iterations = cfg.iterations;
  tc.seed = cfg.seed;
  tc.mask_mix = cfg.mask_mix;
  tc.weights = cfg.loss;
  tc.enable_refraction = cfg.enable_refraction;
  tc.enable_eikonal = cfg.enable_eikonal;
  tc.enable_mask = cfg.enable_mask;
  tc.enable_occlusion_check = cfg.enable_occlusion_check;
  tc.sampling.n_coarse = cfg.sampling.n_coarse;
  tc.sampling.n_importance_rounds = cfg.sampling.n_importance_rounds;
  tc.sampling.n_importance_per_round = cfg.sampling.n_importance_per_round;
  tc.sampling.near = static_cast<T>(cfg.sampling.near);
  tc.sampling.far = static_cast<T>(cfg.sampling.far);
  tc.sampling.interior_step_offset =
      static_cast<T>(cfg.sampling.interior_step_offset);
  tc.sampling.opacity_threshold = static_cast<T>(cfg.sampling.opacity_threshold);
  tc.sampling.scene_bound = static_cast<T>(cfg.sampling.scene_bound);
  tc.sampling.mode = cfg.sampling.mode;
  tc.sampling.n_segment_samples = cfg.sampling.n_segment_samples;
  tc.sampling.sdf_threshold = static_cast<T>(cfg.sampling.sdf_threshold);
  tc.adam.lr = static_cast<T>(cfg.lr);
  return tc;
}

}  // namespace neto
