#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "neto/adam.hpp"
#include "neto/dataset.hpp"
#include "neto/loss.hpp"
#include "neto/mlp.hpp"
#include "neto/sampling.hpp"
#include "neto/shapes.hpp"
#include "neto/tracer.hpp"
#include "neto/train.hpp"

using namespace neto;
namespace fs = std::filesystem;

namespace {

// One shared miniature capture per shape; generating it is the slow part.
const Dataset& sphere_ds() {
  static const Dataset ds = [] {
    const fs::path dir = "test_tmp/train_sphere";
    fs::remove_all(dir);
    RigSpec rig;
    rig.n_views = 2;
    rig.width = 12;
    rig.height = 12;
    rig.gt_resolution = 32;
    return generate_dataset(shape_by_name("sphere"), rig, 11, dir);
  }();
  return ds;
}

const Dataset& barbell_ds() {
  static const Dataset ds = [] {
    const fs::path dir = "test_tmp/train_barbell";
    fs::remove_all(dir);
    RigSpec rig;
    rig.n_views = 2;
    rig.width = 16;
    rig.height = 16;
    rig.gt_resolution = 32;
    return generate_dataset(shape_by_name("barbell"), rig, 13, dir);
  }();
  return ds;
}

// Small double-precision net fitted to a centered ball so that rays actually
// refract; all gradient probes run against it. Fitted once, copied out.
MlpParams<double> small_net() {
  static const MlpParams<double> fitted = [] {
    auto p = make_mlp<double>(2, 16, 3, 3, 2.5);
    init_sphere<double>(p, 0.42, 5, 400, 256);
    return p;
  }();
  return fitted;
}

TrainConfig<double> small_config() {
  TrainConfig<double> cfg;
  cfg.batch_size = 12;
  cfg.seed = 4;
  cfg.mask_mix = 0.25;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("batch composition follows the configured mix") {
  Trainer<double> tr(sphere_ds(), small_net(), small_config());
  const auto plan = tr.make_plan(0);
  REQUIRE(plan.rays.size() == 12);
  int bg = 0, sup = 0;
  for (const auto& rp : plan.rays) {
    if (rp.supervised) {
      ++sup;
      CHECK(rp.has_q);
      CHECK(rp.kappa > 0.0);
    } else {
      ++bg;
      CHECK_FALSE(rp.has_q);
      CHECK(rp.mask == 0);
    }
  }
  CHECK(bg == 3);  // llround(0.25 * 12)
  CHECK(sup == 9);

  // Plans are a pure function of the iteration index.
  const auto again = tr.make_plan(0);
  REQUIRE(again.rays.size() == plan.rays.size());
  for (std::size_t i = 0; i < plan.rays.size(); ++i) {
    CHECK(plan.rays[i].ray.origin == again.rays[i].ray.origin);
    CHECK(plan.rays[i].ray.dir == again.rays[i].ray.dir);
    CHECK(plan.rays[i].status == again.rays[i].status);
  }
  const auto other = tr.make_plan(1);
  bool any_diff = false;
  for (std::size_t i = 0; i < plan.rays.size(); ++i) {
    if (plan.rays[i].ray.dir != other.rays[i].ray.dir) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("loss terms recombine and match independent recomputation") {
  const auto params = small_net();
  auto cfg = small_config();
  cfg.batch_size = 24;
  Trainer<double> tr(sphere_ds(), params, cfg);
  const auto plan = tr.make_plan(2);
  const BatchResult res = tr.eval_plan(plan, nullptr);

  CHECK(res.total ==
        doctest::Approx(cfg.weights.refraction * res.refraction +
                        cfg.weights.eikonal * res.eikonal +
                        cfg.weights.mask * res.mask)
            .epsilon(1e-9));
  CHECK(res.n_valid + res.n_miss + res.n_tir + res.n_self_occluded +
            res.n_low_opacity ==
        24 - res.n_background);

  // Refraction term: replaying at the planning parameters must reproduce the
  // tracer's landing points, so the term equals a direct re-trace.
  MlpFieldRef<double> field(params);
  const double s = params.sharpness();
  double refr = 0.0;
  int n_valid = 0;
  for (const auto& rp : plan.rays) {
    if (!rp.valid) continue;
    ++n_valid;
    const auto& plane = sphere_ds().views[static_cast<std::size_t>(rp.view)].plane;
    const auto path = trace_two_bounce<double>(field, s, rp.ray, plane,
                                               sphere_ds().rig.constants,
                                               cfg.sampling);
    REQUIRE(path.status == PathStatus::ValidTwoBounce);
    refr += rp.kappa * rp.kappa * (*path.q_virtual - rp.q).squaredNorm();
  }
  CHECK(n_valid == res.n_valid);
  CHECK(res.n_valid > 0);
  CHECK(res.refraction == doctest::Approx(refr).epsilon(1e-9));

  // Mask term: mean clamped cross entropy over the whole batch, recomputed
  // from the frozen entry samples.
  double mask_sum = 0.0;
  for (const auto& rp : plan.rays) {
    double opacity = 0.0;
    if (rp.entry_ts.size() >= 2) {
      MatXT<double> pts(3, rp.entry_ts.size());
      for (Eigen::Index i = 0; i < rp.entry_ts.size(); ++i)
        pts.col(i) = rp.ray.origin + rp.entry_ts[i] * rp.ray.dir;
      VecXT<double> g;
      mlp_values(params, pts, g);
      VecXT<double> alpha, w;
      opacity = section_weights<double>(g, s, alpha, w);
    }
    mask_sum += bce(rp.mask, clamp_opacity(opacity));
  }
  CHECK(res.mask == doctest::Approx(mask_sum / 24.0).epsilon(1e-9));
}

TEST_CASE("eikonal term averages over the frozen sample count") {
  const auto params = small_net();
  auto cfg = small_config();
  cfg.enable_refraction = false;  // keep every eikonal point at its frozen spot
  cfg.enable_mask = false;
  Trainer<double> tr(sphere_ds(), params, cfg);
  const auto plan = tr.make_plan(1);
  const BatchResult res = tr.eval_plan(plan, nullptr);

  std::int64_t n_pts = 0;
  double sq = 0.0;
  for (const auto& rp : plan.rays) {
    MatXT<double> pts(3, rp.entry_ts.size() + rp.exit_ts.size());
    for (Eigen::Index i = 0; i < rp.entry_ts.size(); ++i)
      pts.col(i) = rp.ray.origin + rp.entry_ts[i] * rp.ray.dir;
    for (Eigen::Index j = 0; j < rp.exit_ts.size(); ++j)
      pts.col(rp.entry_ts.size() + j) = rp.exit_pts_frozen.col(j);
    n_pts += pts.cols();
    if (pts.cols() == 0) continue;
    VecXT<double> val;
    MatXT<double> grad;
    mlp_value_grad(params, pts, val, grad);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double e = grad.col(i).norm() - 1.0;
      sq += e * e;
    }
  }
  REQUIRE(n_pts == plan.n_eik_pts);
  REQUIRE(n_pts > 0);
  CHECK(res.eikonal == doctest::Approx(sq / double(n_pts)).epsilon(1e-9));
  CHECK(res.refraction == 0.0);
  CHECK(res.mask == 0.0);
}

TEST_CASE("disabled terms drop out of the total") {
  const auto params = small_net();
  auto cfg = small_config();
  Trainer<double> all(sphere_ds(), params, cfg);
  const auto plan = all.make_plan(3);
  const BatchResult full = all.eval_plan(plan, nullptr);

  cfg.enable_eikonal = false;
  Trainer<double> no_eik(sphere_ds(), params, cfg);
  const BatchResult part = no_eik.eval_plan(no_eik.make_plan(3), nullptr);
  CHECK(part.eikonal == 0.0);
  CHECK(part.refraction == doctest::Approx(full.refraction).epsilon(1e-12));
  CHECK(part.total ==
        doctest::Approx(full.total - cfg.weights.eikonal * full.eikonal)
            .epsilon(1e-9));
}

TEST_CASE("self-occluded rays are excluded from the refraction set") {
  const auto params = small_net();
  auto cfg = small_config();
  cfg.batch_size = 64;
  Trainer<double> tr(barbell_ds(), params, cfg);

  // The small net models a centered ball, so occlusion verdicts against it
  // are not the oracle's; what matters is the bookkeeping: flagged rays must
  // be frozen out of the valid set.
  bool saw_occluded = false;
  for (int it = 0; it < 8 && !saw_occluded; ++it) {
    const auto plan = tr.make_plan(it);
    const auto res = tr.eval_plan(plan, nullptr);
    int occluded = 0;
    for (const auto& rp : plan.rays) {
      if (rp.status == PathStatus::SelfOccluded) {
        ++occluded;
        CHECK_FALSE(rp.valid);
        saw_occluded = true;
      }
      if (rp.valid) CHECK(rp.status == PathStatus::ValidTwoBounce);
    }
    CHECK(occluded == res.n_self_occluded);
  }

  // With the check disabled the same batches keep those rays.
  cfg.enable_occlusion_check = false;
  Trainer<double> off(barbell_ds(), params, cfg);
  for (int it = 0; it < 8; ++it) {
    const auto plan = off.make_plan(it);
    for (const auto& rp : plan.rays) {
      CHECK(rp.status != PathStatus::SelfOccluded);
    }
  }
}

TEST_CASE("analytic gradients match finite differences through the replay") {
  for (const bool surface_mode : {false, true}) {
    CAPTURE(surface_mode);
    const auto params = small_net();
    auto cfg = small_config();
    cfg.batch_size = 8;
    if (surface_mode) cfg.sampling.mode = IntersectMode::kSurface;

    Trainer<double> tr(sphere_ds(), params, cfg);
    const auto plan = tr.make_plan(0);
    auto grads = MlpGrads<double>::zeros_like(params);
    const BatchResult res = tr.eval_plan(plan, &grads);
    REQUIRE_FALSE(res.aborted);
    REQUIRE(res.n_valid > 0);

    auto probe = [&](double* slot, double analytic) {
      const double keep = *slot;
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      *slot = keep + h;
      const double lp = tr.plan_loss(plan);
      *slot = keep - h;
      const double lm = tr.plan_loss(plan);
      *slot = keep;
      const double fd = (lp - lm) / (2 * h);
      const double scale = std::max({1e-5, std::abs(fd), std::abs(analytic)});
      CHECK(std::abs(fd - analytic) / scale < 1e-3);
    };

    auto& mutable_params = tr.params();
    Rng pick(17);
    for (int l = 0; l <= mutable_params.depth; ++l) {
      for (int t = 0; t < 6; ++t) {
        auto& w = mutable_params.w[l];
        const auto i = pick.uniform_index(static_cast<std::uint64_t>(w.rows()));
        const auto j = pick.uniform_index(static_cast<std::uint64_t>(w.cols()));
        probe(&w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
              grads.w[l](static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(j)));
      }
      auto& b = mutable_params.b[l];
      const auto k = pick.uniform_index(static_cast<std::uint64_t>(b.size()));
      probe(&b[static_cast<Eigen::Index>(k)],
            grads.b[l][static_cast<Eigen::Index>(k)]);
    }
    probe(&mutable_params.log_s, grads.log_s);
  }
}

TEST_CASE("a poisoned parameter aborts the step without touching state") {
  auto params = small_net();
  params.w[1](3, 3) = std::numeric_limits<double>::quiet_NaN();
  Trainer<double> tr(sphere_ds(), params, small_config());
  const auto before = tr.params().w[1];
  const BatchResult res = tr.step();
  CHECK(res.aborted);
  CHECK(tr.iteration() == 1);
  const auto& after = tr.params().w[1];
  REQUIRE(before.rows() == after.rows());
  for (Eigen::Index i = 0; i < before.size(); ++i) {
    const double a = before.data()[i];
    const double b = after.data()[i];
    CHECK((a == b || (std::isnan(a) && std::isnan(b))));
  }
}

TEST_CASE("a dataset with nothing to supervise is rejected") {
  Dataset ds;
  ds.rig.n_views = 1;
  ViewData view;
  view.index = 0;
  view.plane.extent = Vec2(1, 1);
  CorrespondenceRecord rec;
  rec.tag = PixelTag::TwoBounce;  // hits the object but carries no location
  rec.mask = 1;
  view.records.assign(16, rec);
  ds.views.push_back(view);
  CHECK_THROWS_AS(
      (Trainer<double>(ds, make_mlp<double>(2, 8, 2, 1), TrainConfig<double>{})),
      ConfigError);
}

TEST_CASE("training loop logs, checkpoints, and resumes deterministically") {
  const fs::path out_a = "test_tmp/run_a";
  const fs::path out_b = "test_tmp/run_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  TrainConfig<double> cfg;
  cfg.batch_size = 8;
  cfg.iterations = 4;
  cfg.seed = 2;

  TrainRunOptions opt;
  opt.out_dir = out_a;
  opt.checkpoint_every = 2;
  const auto rep = run_training<double>(sphere_ds(), small_net(), cfg, opt);
  CHECK(rep.start_iteration == 0);
  CHECK(rep.end_iteration == 4);
  CHECK(fs::exists(rep.checkpoint_path));
  CHECK(fs::exists(rep.state_path));
  CHECK(fs::exists(out_a / "checkpoint_000002.bin"));
  CHECK(fs::exists(out_a / "train_log.csv"));

  std::ifstream log(out_a / "train_log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header ==
        "iter,total,refraction,eikonal,mask,n_valid,n_occluded,n_tir,n_miss,"
        "wallclock_s");
  int rows = 0;
  for (std::string line; std::getline(log, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 4);

  // Stop at 2, resume to 4: the final parameters must match the straight run.
  TrainConfig<double> cfg_b = cfg;
  cfg_b.iterations = 2;
  TrainRunOptions opt_b;
  opt_b.out_dir = out_b;
  run_training<double>(sphere_ds(), small_net(), cfg_b, opt_b);

  TrainConfig<double> cfg_c = cfg;
  TrainRunOptions opt_c;
  opt_c.out_dir = out_b;
  opt_c.resume_state = out_b / "state_final.nets";
  const auto rep_c = run_training<double>(sphere_ds(), small_net(), cfg_c,
                                          opt_c);
  CHECK(rep_c.start_iteration == 2);
  CHECK(rep_c.end_iteration == 4);

  const auto pa = load_checkpoint(out_a / "checkpoint_final.bin");
  const auto pb = load_checkpoint(out_b / "checkpoint_final.bin");
  for (std::size_t l = 0; l < pa.w.size(); ++l) {
    CHECK(pa.w[l] == pb.w[l]);
    CHECK(pa.b[l] == pb.b[l]);
  }
}

}  // TEST_SUITE
