// Command line front end for the reconstruction toolkit.
//
// Subcommands: gen-data, train, extract, eval, trace. Exit codes: 0 on
// success, 2 for unusable command lines or configuration, 1 for runtime
// failures (broken files, empty fields, I/O).

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "neto/checkpoint.hpp"
#include "neto/config.hpp"
#include "neto/dataset.hpp"
#include "neto/mesh.hpp"
#include "neto/metrics.hpp"
#include "neto/mlp.hpp"
#include "neto/parallel.hpp"
#include "neto/shapes.hpp"
#include "neto/tracer.hpp"
#include "neto/train.hpp"

namespace fs = std::filesystem;
using namespace neto;

namespace {

// Precedence, lowest to highest: built-in defaults, NETO_SEED, the --config
// file, explicit flags. Each subcommand applies its flags after this.
RunConfig base_config(const std::string& config_file) {
  RunConfig cfg;
  if (const char* env = std::getenv("NETO_SEED")) {
    try {
      apply_config_entry(cfg, "train.seed", env);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("NETO_SEED is not an unsigned integer: '") +
                        env + "'");
    }
  }
  if (!config_file.empty()) load_config_file(cfg, config_file);
  return cfg;
}

void apply_threads(int threads) {
  if (threads < 0) throw ConfigError("--threads must be >= 0");
  set_thread_cap(threads);
  Eigen::setNbThreads(threads);
}

int run_gen_data(const std::string& config_file, CLI::App* sub,
                 const std::string& shape, const std::string& out,
                 std::uint64_t seed, int views, int width, int height,
                 int gt_resolution, double monitor_extent, double fov,
                 double camera_distance, double elevation,
                 double monitor_distance, bool corrupt, int threads) {
  RunConfig cfg = base_config(config_file);
  if (sub->count("--shape")) cfg.shape = shape;
  if (sub->count("--seed")) cfg.seed = seed;
  if (sub->count("--views")) cfg.rig.n_views = views;
  if (sub->count("--width")) cfg.rig.width = width;
  if (sub->count("--height")) cfg.rig.height = height;
  if (sub->count("--gt-resolution")) cfg.rig.gt_resolution = gt_resolution;
  if (sub->count("--monitor-extent")) cfg.rig.monitor_extent = monitor_extent;
  if (sub->count("--fov")) cfg.rig.fov_deg = fov;
  if (sub->count("--camera-distance")) cfg.rig.camera_distance = camera_distance;
  if (sub->count("--elevation")) cfg.rig.elevation_deg = elevation;
  if (sub->count("--monitor-distance")) cfg.rig.monitor_distance = monitor_distance;
  if (sub->count("--corrupt-multibounce-q")) cfg.rig.corrupt_multibounce_q = corrupt;
  if (sub->count("--threads")) cfg.threads = threads;
  if (sub->count("--out")) cfg.data_dir = out;
  if (cfg.data_dir.empty())
    throw ConfigError("gen-data needs --out (or run.data_dir in the config)");
  apply_threads(cfg.threads);

  const Dataset ds =
      generate_dataset(shape_by_name(cfg.shape), cfg.rig, cfg.seed, cfg.data_dir);
  write_resolved_config(cfg, fs::path(cfg.data_dir) / "config.resolved");

  const auto counts = ds.tag_counts();
  std::cout << "wrote " << ds.views.size() << " views to " << cfg.data_dir
            << "\npixels: two-bounce " << counts[0] << ", multi-bounce "
            << counts[1] << ", tir " << counts[2] << ", background "
            << counts[3] << '\n';
  return 0;
}

int run_train(const std::string& config_file, CLI::App* sub,
              const std::string& data, const std::string& out,
              std::uint64_t seed, std::int64_t iterations, int batch_size,
              double lr, int checkpoint_every, const std::string& resume,
              bool surface_mode, bool no_occlusion, bool no_eikonal,
              bool no_mask, bool no_refraction, int net_depth, int net_width,
              int enc_freqs, int init_steps, double init_radius,
              double mask_mix, int threads, bool verbose) {
  RunConfig cfg = base_config(config_file);
  if (sub->count("--data")) cfg.data_dir = data;
  if (sub->count("--out")) cfg.out_dir = out;
  if (sub->count("--seed")) cfg.seed = seed;
  if (sub->count("--iterations")) cfg.iterations = iterations;
  if (sub->count("--batch-size")) cfg.batch_size = batch_size;
  if (sub->count("--lr")) cfg.lr = lr;
  if (sub->count("--checkpoint-every")) cfg.checkpoint_every = checkpoint_every;
  if (sub->count("--net-depth")) cfg.net_depth = net_depth;
  if (sub->count("--net-width")) cfg.net_width = net_width;
  if (sub->count("--enc-freqs")) cfg.net_enc_freqs = enc_freqs;
  if (sub->count("--init-steps")) cfg.init_steps = init_steps;
  if (sub->count("--init-radius")) cfg.init_radius = init_radius;
  if (sub->count("--mask-mix")) cfg.mask_mix = mask_mix;
  if (sub->count("--threads")) cfg.threads = threads;
  if (surface_mode) cfg.sampling.mode = IntersectMode::kSurface;
  if (no_occlusion) cfg.enable_occlusion_check = false;
  if (no_eikonal) cfg.enable_eikonal = false;
  if (no_mask) cfg.enable_mask = false;
  if (no_refraction) cfg.enable_refraction = false;
  if (cfg.data_dir.empty())
    throw ConfigError("train needs --data (or run.data_dir in the config)");
  if (cfg.out_dir.empty())
    throw ConfigError("train needs --out (or run.out_dir in the config)");
  apply_threads(cfg.threads);

  const Dataset ds = load_dataset(cfg.data_dir);

  auto params = make_mlp<float>(cfg.net_depth, cfg.net_width, cfg.net_enc_freqs,
                                cfg.seed, static_cast<float>(cfg.net_log_s_init));
  if (resume.empty()) {
    const auto rep = init_sphere<float>(params, static_cast<float>(cfg.init_radius),
                                        cfg.seed, cfg.init_steps);
    if (verbose)
      std::cerr << "init: " << rep.steps << " steps, rms value "
                << rep.rms_value << ", rms grad deviation " << rep.rms_grad
                << '\n';
  }

  fs::create_directories(cfg.out_dir);
  write_resolved_config(cfg, fs::path(cfg.out_dir) / "config.resolved");

  TrainRunOptions opt;
  opt.out_dir = cfg.out_dir;
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.verbose = verbose;
  if (!resume.empty()) opt.resume_state = resume;

  const auto rep =
      run_training<float>(ds, std::move(params), make_train_config<float>(cfg), opt);
  std::cout << "trained iterations [" << rep.start_iteration << ", "
            << rep.end_iteration << ") in " << rep.wallclock_s << " s, "
            << rep.aborted_steps << " aborted steps\ncheckpoint: "
            << rep.checkpoint_path.string() << '\n';
  return 0;
}

int run_extract(const std::string& checkpoint, const std::string& out,
                int resolution, double bound, bool force, int threads) {
  if (resolution < 8)
    throw ConfigError("--resolution must be at least 8");
  if (!(bound > 0)) throw ConfigError("--bound must be positive");
  if (fs::exists(out) && !force)
    throw ConfigError(out + " exists; pass --force to overwrite");
  apply_threads(threads);

  const MlpParams<double> params = load_checkpoint(checkpoint);
  const MlpFieldRef<double> field(params);
  const Vec3 b(bound, bound, bound);
  const TriangleMesh mesh = marching_cubes(field, -b, b, resolution);
  save_obj(out, mesh);
  std::cout << "wrote " << mesh.vertices.size() << " vertices, "
            << mesh.triangles.size() << " triangles, area "
            << mesh_area(mesh) << " to " << out << '\n';
  return 0;
}

int run_eval(const std::string& recon, const std::string& gt, double tau,
             int samples, std::uint64_t seed, const std::string& out,
             int threads) {
  apply_threads(threads);
  const TriangleMesh a = load_obj(recon);
  const TriangleMesh b = load_obj(gt);
  const MetricsReport rep = evaluate(a, b, tau, samples, seed);
  const std::string json = metrics_to_json(rep);
  if (!out.empty()) {
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + out);
    os << json << '\n';
  }
  std::cout << json << '\n';
  return 0;
}

int run_trace(const std::string& config_file, CLI::App* sub,
              const std::string& checkpoint, const std::string& shape,
              int view, double px, double py, bool surface_mode,
              bool no_occlusion, int threads) {
  RunConfig cfg = base_config(config_file);
  if (sub->count("--shape")) cfg.shape = shape;
  if (surface_mode) cfg.sampling.mode = IntersectMode::kSurface;
  apply_threads(sub->count("--threads") ? threads : cfg.threads);

  if (view < 0 || view >= cfg.rig.n_views)
    throw ConfigError("--view out of range for the rig");

  const Camera cam = rig_camera(cfg.rig, view);
  MonitorPlane plane = rig_plane(cfg.rig, cam);
  const double extent =
      cfg.rig.monitor_extent > 0 ? cfg.rig.monitor_extent : 2.0;
  plane.extent = Vec2(extent, extent);

  const Vec2 pixel(sub->count("--px") ? px : cfg.rig.width / 2.0,
                   sub->count("--py") ? py : cfg.rig.height / 2.0);
  const Ray ray = pixel_ray(cam, pixel);

  // The field comes from a trained checkpoint or an analytic shape.
  std::optional<MlpParams<double>> params;
  std::optional<MlpFieldRef<double>> net_field;
  std::optional<ShapeField> analytic;
  const FieldBatchT<double>* field = nullptr;
  double s = 0;
  if (!checkpoint.empty()) {
    params = load_checkpoint(checkpoint);
    s = params->sharpness();
    net_field.emplace(*params);
    field = &*net_field;
  } else {
    analytic.emplace(shape_by_name(cfg.shape));
    s = 600.0;  // sharp enough that section weights act like a hard surface
    field = &*analytic;
  }

  SamplingConfig sampling = cfg.sampling;
  auto path = trace_two_bounce<double>(*field, s, ray, plane,
                                       cfg.rig.constants, sampling);
  if (path.status == PathStatus::ValidTwoBounce && !no_occlusion &&
      check_self_occlusion<double>(*field, s, path.entry, path.dir_interior,
                                   sampling)) {
    path.status = PathStatus::SelfOccluded;
  }
  std::cout << "view " << view << " pixel (" << pixel.x() << ", " << pixel.y()
            << ")\n";
  dump_path(std::cout, path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural refraction-consistent surface reconstruction"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "simulate a capture dataset");
  std::string g_config, g_shape, g_out;
  std::uint64_t g_seed = 1;
  int g_views = 8, g_width = 64, g_height = 64, g_gtres = 256, g_threads = 0;
  double g_extent = 0, g_fov = 40, g_dist = 3, g_elev = 15, g_mon = 2.5;
  bool g_corrupt = false;
  gen->add_option("--config", g_config, "key = value configuration file");
  gen->add_option("--shape", g_shape,
                  "sphere, torus, box, barbell, or cylinders");
  gen->add_option("--out", g_out, "output dataset directory");
  gen->add_option("--seed", g_seed, "rng seed (NETO_SEED is the fallback)");
  gen->add_option("--views", g_views, "number of camera views");
  gen->add_option("--width", g_width, "image width in pixels");
  gen->add_option("--height", g_height, "image height in pixels");
  gen->add_option("--gt-resolution", g_gtres, "reference mesh grid resolution");
  gen->add_option("--monitor-extent", g_extent,
                  "half extent of the active monitor area (0 = auto)");
  gen->add_option("--fov", g_fov, "vertical field of view in degrees");
  gen->add_option("--camera-distance", g_dist, "camera distance from origin");
  gen->add_option("--elevation", g_elev, "camera elevation in degrees");
  gen->add_option("--monitor-distance", g_mon, "monitor distance behind origin");
  gen->add_flag("--corrupt-multibounce-q", g_corrupt,
                "give multi-bounce pixels their (wrong) decoded location");
  gen->add_option("--threads", g_threads, "worker threads (0 = all cores)");

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "optimize a field on a dataset");
  std::string t_config, t_data, t_out, t_resume;
  std::uint64_t t_seed = 1;
  std::int64_t t_iters = 5000;
  int t_batch = 512, t_ckpt = 0, t_depth = 4, t_width = 128, t_freqs = 5;
  int t_init_steps = 2000, t_threads = 0;
  double t_lr = 5e-4, t_init_radius = 0.5, t_mask_mix = 0.25;
  bool t_surface = false, t_no_occ = false, t_no_eik = false;
  bool t_no_mask = false, t_no_refr = false, t_verbose = false;
  train->add_option("--config", t_config, "key = value configuration file");
  train->add_option("--data", t_data, "dataset directory from gen-data");
  train->add_option("--out", t_out, "run output directory");
  train->add_option("--seed", t_seed, "rng seed (NETO_SEED is the fallback)");
  train->add_option("--iterations", t_iters, "optimization steps");
  train->add_option("--batch-size", t_batch, "rays per step");
  train->add_option("--lr", t_lr, "adam learning rate");
  train->add_option("--checkpoint-every", t_ckpt,
                    "interim checkpoint period (0 = final only)");
  train->add_option("--resume", t_resume, "optimizer state file to resume from");
  train->add_flag("--surface-mode", t_surface,
                  "bisected surface intersections instead of volume rendering");
  train->add_flag("--no-occlusion-check", t_no_occ,
                  "keep self-occluded rays in the refraction loss");
  train->add_flag("--no-eikonal", t_no_eik, "disable the eikonal term");
  train->add_flag("--no-mask", t_no_mask, "disable the mask term");
  train->add_flag("--no-refraction", t_no_refr, "disable the refraction term");
  train->add_option("--net-depth", t_depth, "hidden layers");
  train->add_option("--net-width", t_width, "units per hidden layer");
  train->add_option("--enc-freqs", t_freqs, "positional encoding octaves");
  train->add_option("--init-steps", t_init_steps, "sphere fit steps before training");
  train->add_option("--init-radius", t_init_radius, "sphere fit radius");
  train->add_option("--mask-mix", t_mask_mix, "background share of each batch");
  train->add_option("--threads", t_threads, "worker threads (0 = all cores)");
  train->add_flag("--verbose", t_verbose, "progress lines on stderr");

  // extract ----------------------------------------------------------------
  auto* extract = app.add_subcommand("extract", "isosurface of a checkpoint");
  std::string x_ckpt, x_out;
  int x_res = 128, x_threads = 0;
  double x_bound = 1.0;
  bool x_force = false;
  extract->add_option("--checkpoint", x_ckpt, "field checkpoint")->required();
  extract->add_option("--out", x_out, "output OBJ path")->required();
  extract->add_option("--resolution", x_res, "marching cubes grid resolution");
  extract->add_option("--bound", x_bound, "half extent of the extraction box");
  extract->add_flag("--force", x_force, "overwrite an existing output file");
  extract->add_option("--threads", x_threads, "worker threads (0 = all cores)");

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "compare two meshes");
  std::string e_recon, e_gt, e_out;
  double e_tau = 0.01;
  int e_samples = 100000, e_threads = 0;
  std::uint64_t e_seed = 0;
  eval->add_option("--recon", e_recon, "reconstructed mesh OBJ")->required();
  eval->add_option("--gt", e_gt, "reference mesh OBJ")->required();
  eval->add_option("--tau", e_tau, "distance threshold for precision/recall");
  eval->add_option("--samples", e_samples, "surface samples per mesh");
  eval->add_option("--seed", e_seed, "sampling seed");
  eval->add_option("--out", e_out, "also write the JSON report here");
  eval->add_option("--threads", e_threads, "worker threads (0 = all cores)");

  // trace ------------------------------------------------------------------
  auto* trace = app.add_subcommand("trace", "dump one refraction path");
  std::string r_config, r_ckpt, r_shape = "sphere";
  int r_view = 0, r_threads = 0;
  double r_px = 0, r_py = 0;
  bool r_surface = false, r_no_occ = false;
  trace->add_option("--config", r_config, "key = value configuration file");
  auto* r_ckpt_opt =
      trace->add_option("--checkpoint", r_ckpt, "trace a trained field");
  trace->add_option("--shape", r_shape, "trace an analytic shape")
      ->excludes(r_ckpt_opt);
  trace->add_option("--view", r_view, "rig view index");
  trace->add_option("--px", r_px, "pixel x (default: image center)");
  trace->add_option("--py", r_py, "pixel y (default: image center)");
  trace->add_flag("--surface-mode", r_surface, "bisected intersections");
  trace->add_flag("--no-occlusion-check", r_no_occ,
                  "skip the self-occlusion test");
  trace->add_option("--threads", r_threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
    if (gen->parsed())
      return run_gen_data(g_config, gen, g_shape, g_out, g_seed, g_views,
                          g_width, g_height, g_gtres, g_extent, g_fov, g_dist,
                          g_elev, g_mon, g_corrupt, g_threads);
    if (train->parsed())
      return run_train(t_config, train, t_data, t_out, t_seed, t_iters,
                       t_batch, t_lr, t_ckpt, t_resume, t_surface, t_no_occ,
                       t_no_eik, t_no_mask, t_no_refr, t_depth, t_width,
                       t_freqs, t_init_steps, t_init_radius, t_mask_mix,
                       t_threads, t_verbose);
    if (extract->parsed())
      return run_extract(x_ckpt, x_out, x_res, x_bound, x_force, x_threads);
    if (eval->parsed())
      return run_eval(e_recon, e_gt, e_tau, e_samples, e_seed, e_out,
                      e_threads);
    if (trace->parsed())
      return run_trace(r_config, trace, r_ckpt, r_shape, r_view, r_px, r_py,
                       r_surface, r_no_occ, r_threads);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
