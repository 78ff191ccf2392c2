#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neto/adam.hpp"
#include "neto/checkpoint.hpp"
#include "neto/dataset.hpp"
#include "neto/loss.hpp"
#include "neto/mlp.hpp"
#include "neto/parallel.hpp"
#include "neto/rng.hpp"
#include "neto/sampling.hpp"
#include "neto/tracer.hpp"
#include "neto/types.hpp"

namespace neto {

template <typename T>
struct TrainConfig {
  int batch_size = 512;
  std::int64_t iterations = 5000;
  std::uint64_t seed = 1;
  /// Share of each batch drawn from background pixels; the rest comes from
  /// pixels that carry a decoded monitor location.
  double mask_mix = 0.25;
  LossWeights weights;
  bool enable_refraction = true;
  bool enable_eikonal = true;
  bool enable_mask = true;
  bool enable_occlusion_check = true;
  SamplingConfigT<T> sampling;
  AdamConfig<T> adam;
};

/// Scalar outcome of one optimization step. The per-term values are reported
/// unweighted; `total` is their weighted sum. Status counts cover the
/// supervised (correspondence-carrying) part of the batch; background rays
/// feed only the mask term and are tallied in n_background.
struct BatchResult {
  double total = 0;
  double refraction = 0;
  double eikonal = 0;
  double mask = 0;
  int n_valid = 0;
  int n_miss = 0;
  int n_tir = 0;
  int n_self_occluded = 0;
  int n_low_opacity = 0;
  int n_background = 0;
  bool aborted = false;              ///< non-finite step, parameters untouched
  std::vector<int> non_finite_rays;  ///< batch indices that produced it
};

/// Two-stage optimizer for the refraction consistency objective.
///
/// Each step first traces the batch without gradients and freezes everything
/// discrete about it: the sample positions along every ray, the surface/miss
/// decisions, the set of rays whose simulated path is respected by the loss,
/// and the self-occlusion verdicts. The differentiable stage then replays the
/// frozen plan against the current parameters: field values at the frozen
/// entry samples rebuild the weight chain and the expected entry depth, the
/// refracted interior ray rebuilds the exit chain, and the second refraction
/// lands on the monitor plane. Gradients flow back through that whole replay
/// by hand-written adjoints, including the dependence of both surface points
/// and surface normals on the parameters. Freezing the plan makes the loss a
/// smooth function of the parameters almost everywhere, so its analytic
/// gradient can be checked against finite differences.
///
/// For rays outside the frozen valid set the replay degenerates to the mask
/// term (opacity of the entry chain) and the eikonal term. Eikonal samples at
/// positions that move with the parameters (the exit chain of a valid ray)
/// contribute their full position-dependent gradient; samples on rays that
/// were never refracted sit at frozen positions.
///
/// The dataset must outlive the trainer.
template <typename T>
class Trainer {
 public:
  /// Frozen per-ray tracing plan (stage one output).
  struct RayPlan {
    RayT<T> ray;
    int view = 0;
    int mask = 0;
    bool supervised = false;  ///< drawn from the correspondence pool
    bool has_q = false;
    Vec3T<T> q = Vec3T<T>::Zero();
    T kappa = T(1);  ///< 1 / monitor half-diagonal of the ray's view
    PathStatus status = PathStatus::Miss;
    bool valid = false;        ///< frozen membership in the refraction set
    bool entry_found = false;  ///< frozen surface decision (mask in surface mode)
    VecXT<T> entry_ts;
    VecXT<T> exit_ts;            ///< parameters along the interior ray
    MatXT<T> exit_pts_frozen;    ///< 3 x K2 snapshot for frozen-point eikonal
    T entry_lo = T(0), entry_hi = T(0);  ///< surface-mode bisection brackets
    T exit_lo = T(0), exit_hi = T(0);
    bool entry_bracket = false;
    bool exit_bracket = false;
  };

  struct BatchPlan {
    std::int64_t iter = 0;
    std::vector<RayPlan> rays;
    std::int64_t n_eik_pts = 0;  ///< frozen eikonal normalizer
  };

  Trainer(const Dataset& ds, MlpParams<T> params, TrainConfig<T> cfg)
      : ds_(&ds), params_(std::move(params)), cfg_(std::move(cfg)) {
    opt_ = AdamState<T>::zeros_like(params_);
    planes_.reserve(ds.views.size());
    for (const auto& view : ds.views) {
      PlaneT pl;
      pl.origin = view.plane.origin.template cast<T>();
      pl.normal = view.plane.normal.template cast<T>();
      const double hd = view.plane.half_diagonal();
      if (!(hd > 0.0))
        throw ConfigError("view " + std::to_string(view.index) +
                          " has an empty monitor extent");
      pl.kappa = T(1.0 / hd);
      planes_.push_back(pl);
    }
    for (std::size_t vi = 0; vi < ds.views.size(); ++vi) {
      const auto& recs = ds.views[vi].records;
      for (std::size_t ri = 0; ri < recs.size(); ++ri) {
        if (recs[ri].q.has_value())
          pool_q_.push_back({static_cast<int>(vi), static_cast<int>(ri)});
        else if (recs[ri].tag == PixelTag::Background)
          pool_bg_.push_back({static_cast<int>(vi), static_cast<int>(ri)});
      }
    }
    if (pool_q_.empty() && pool_bg_.empty())
      throw ConfigError("dataset has no trainable pixels");
  }

  /// Stage one: samples the batch for `iter` and traces it with the current
  /// parameters, freezing all discrete decisions.
  BatchPlan make_plan(std::int64_t iter) const {
    BatchPlan plan;
    plan.iter = iter;
    const int m = cfg_.batch_size;
    plan.rays.resize(m);

    Rng rng = Rng(cfg_.seed).fork(static_cast<std::uint64_t>(iter));
    int n_bg = pool_bg_.empty()
                   ? 0
                   : static_cast<int>(std::llround(cfg_.mask_mix * m));
    if (pool_q_.empty()) n_bg = m;
    n_bg = std::min(n_bg, m);
    for (int i = 0; i < m; ++i) {
      const bool from_bg = i < n_bg;
      const auto& pool = from_bg ? pool_bg_ : pool_q_;
      const auto [vi, ri] = pool[rng.uniform_index(pool.size())];
      const auto& view = ds_->views[static_cast<std::size_t>(vi)];
      const auto& rec = view.records[static_cast<std::size_t>(ri)];
      RayPlan& rp = plan.rays[static_cast<std::size_t>(i)];
      const Ray r =
          pixel_ray(view.camera, Vec2(rec.u + 0.5, rec.v + 0.5));
      rp.ray.origin = r.origin.template cast<T>();
      rp.ray.dir = r.dir.template cast<T>().normalized();
      rp.view = vi;
      rp.mask = rec.mask;
      rp.supervised = !from_bg;
      rp.has_q = rec.q.has_value();
      if (rp.has_q) rp.q = rec.q->template cast<T>();
      rp.kappa = planes_[static_cast<std::size_t>(vi)].kappa;
    }

    MlpFieldRef<T> field(params_);
    const T s = params_.sharpness();
    parallel_chunks(m, [&](int, int lo, int hi) {
      for (int i = lo; i < hi; ++i)
        trace_into_plan(field, s, plan.rays[static_cast<std::size_t>(i)]);
    });

    for (const RayPlan& rp : plan.rays)
      plan.n_eik_pts += rp.entry_ts.size() + rp.exit_ts.size();
    return plan;
  }

  /// Stage two: loss of the frozen plan under the current parameters, plus
  /// parameter gradients when `grads` is non-null. `grads` must be zeroed and
  /// shaped like the parameters.
  BatchResult eval_plan(const BatchPlan& plan, MlpGrads<T>* grads) const {
    const int m = static_cast<int>(plan.rays.size());
    BatchResult res;
    for (const RayPlan& rp : plan.rays) {
      if (!rp.supervised) {
        ++res.n_background;
        continue;
      }
      switch (rp.status) {
        case PathStatus::ValidTwoBounce: ++res.n_valid; break;
        case PathStatus::Miss: ++res.n_miss; break;
        case PathStatus::TIRExit: ++res.n_tir; break;
        case PathStatus::SelfOccluded: ++res.n_self_occluded; break;
        case PathStatus::LowOpacity: ++res.n_low_opacity; break;
      }
    }

    const int workers = worker_count();
    std::vector<WorkerScratch> ws(static_cast<std::size_t>(workers));
    if (grads) {
      for (auto& w : ws) {
        w.grads = MlpGrads<T>::zeros_like(params_);
        w.want_grads = true;
      }
    }
    parallel_chunks(m, [&](int w, int lo, int hi) {
      WorkerScratch& sc = ws[static_cast<std::size_t>(w)];
      for (int i = lo; i < hi; ++i) eval_ray(plan, i, sc);
    });

    double refr = 0, eik_sq = 0, mask_bce = 0;
    T sbar = T(0);
    for (const auto& w : ws) {
      refr += w.refr;
      eik_sq += w.eik_sq;
      mask_bce += w.mask_bce;
      sbar += w.sbar;
      res.non_finite_rays.insert(res.non_finite_rays.end(), w.bad.begin(),
                                 w.bad.end());
    }
    if (grads) {
      for (const auto& w : ws) grads->add(w.grads);
      grads->log_s += sbar * params_.sharpness();
    }

    res.refraction = cfg_.enable_refraction ? refr : 0.0;
    res.eikonal = (cfg_.enable_eikonal && plan.n_eik_pts > 0)
                      ? eik_sq / static_cast<double>(plan.n_eik_pts)
                      : 0.0;
    res.mask = cfg_.enable_mask && m > 0 ? mask_bce / m : 0.0;
    res.total = cfg_.weights.refraction * res.refraction +
                cfg_.weights.eikonal * res.eikonal +
                cfg_.weights.mask * res.mask;

    bool finite = std::isfinite(res.total);
    if (grads && finite) {
      for (const auto& mat : grads->w) finite = finite && mat.allFinite();
      for (const auto& vec : grads->b) finite = finite && vec.allFinite();
      finite = finite && std::isfinite(static_cast<double>(grads->log_s));
    }
    res.aborted = !res.non_finite_rays.empty() || !finite;
    return res;
  }

  /// Loss value of a frozen plan; used by finite-difference checks.
  double plan_loss(const BatchPlan& plan) const {
    return eval_plan(plan, nullptr).total;
  }

  /// One optimization step. On a non-finite batch the parameters and the
  /// optimizer state are left untouched and the result is marked aborted.
  BatchResult step() {
    const BatchPlan plan = make_plan(iter_);
    MlpGrads<T> grads = MlpGrads<T>::zeros_like(params_);
    BatchResult res = eval_plan(plan, &grads);
    if (!res.aborted) adam_step(params_, grads, opt_, cfg_.adam);
    ++iter_;
    return res;
  }

  MlpParams<T>& params() { return params_; }
  const MlpParams<T>& params() const { return params_; }
  AdamState<T>& opt_state() { return opt_; }
  const TrainConfig<T>& config() const { return cfg_; }
  std::int64_t iteration() const { return iter_; }
  void set_iteration(std::int64_t it) { iter_ = it; }

 private:
  struct PlaneT {
    Vec3T<T> origin = Vec3T<T>::Zero();
    Vec3T<T> normal = Vec3T<T>::Zero();
    T kappa = T(1);
  };

  struct WorkerScratch {
    bool want_grads = false;
    MlpGrads<T> grads;
    double refr = 0;
    double eik_sq = 0;
    double mask_bce = 0;
    T sbar = T(0);
    std::vector<int> bad;
  };

  void trace_into_plan(const MlpFieldRef<T>& field, T s, RayPlan& rp) const {
    if (rp.has_q) {
      RefractionPathT<T> path = trace_two_bounce<T>(
          field, s, rp.ray, ds_->views[static_cast<std::size_t>(rp.view)].plane,
          ds_->rig.constants, cfg_.sampling);
      if (path.status == PathStatus::ValidTwoBounce &&
          cfg_.enable_occlusion_check &&
          check_self_occlusion<T>(field, s, path.entry, path.dir_interior,
                                  cfg_.sampling)) {
        path.status = PathStatus::SelfOccluded;
      }
      rp.status = path.status;
      rp.valid = path.status == PathStatus::ValidTwoBounce;
      rp.entry_found = path.status != PathStatus::Miss;
      rp.entry_ts = path.entry.ts;
      find_bracket(path.entry.ts, path.entry.gs, rp.entry_lo, rp.entry_hi,
                   rp.entry_bracket);
      if (path.exit && path.exit->ts.size() > 0) {
        rp.exit_ts = path.exit->ts;
        find_bracket(path.exit->ts, path.exit->gs, rp.exit_lo, rp.exit_hi,
                     rp.exit_bracket);
        const Vec3T<T> o2 =
            path.entry.point + cfg_.sampling.interior_step_offset * path.dir_interior;
        rp.exit_pts_frozen.resize(3, rp.exit_ts.size());
        for (Eigen::Index j = 0; j < rp.exit_ts.size(); ++j)
          rp.exit_pts_frozen.col(j) = o2 + rp.exit_ts[j] * path.dir_interior;
      }
    } else {
      const VolumeHitT<T> hit =
          volume_intersect<T>(field, s, rp.ray, cfg_.sampling, false);
      rp.status = PathStatus::Miss;
      rp.valid = false;
      rp.entry_found = hit.surface;
      rp.entry_ts = hit.hit.ts;
    }
  }

  /// First g > 0 to g <= 0 interval of a frozen sample plan.
  static void find_bracket(const VecXT<T>& ts, const VecXT<T>& gs, T& lo,
                           T& hi, bool& found) {
    found = false;
    for (Eigen::Index i = 0; i + 1 < gs.size(); ++i) {
      if (gs[i] > T(0) && gs[i + 1] <= T(0)) {
        lo = ts[i];
        hi = ts[i + 1];
        found = true;
        return;
      }
    }
  }

  /// Root of the (optionally sign-flipped) field along o + t d inside a
  /// frozen bracket; mirrors the tracer's bisection.
  T bisect_field(const Vec3T<T>& o, const Vec3T<T>& d, T lo, T hi,
                 bool flip) const {
    MatXT<T> pt(3, 1);
    VecXT<T> v;
    for (int i = 0; i < 40; ++i) {
      const T mid = (lo + hi) / T(2);
      pt.col(0) = o + mid * d;
      mlp_values(params_, pt, v);
      const T g = flip ? -v[0] : v[0];
      if (g > T(0)) lo = mid; else hi = mid;
    }
    return (lo + hi) / T(2);
  }

  static Vec3T<T> normalize_or_unitz(const Vec3T<T>& y, T& len) {
    len = y.norm();
    return len > T(1e-12) ? Vec3T<T>(y / len) : Vec3T<T>::UnitZ();
  }

  /// Adjoint of u = y / |y|; zero when the forward fell back to a constant.
  static Vec3T<T> normalize_pullback(const Vec3T<T>& u, T len,
                                     const Vec3T<T>& ubar) {
    if (!(len > T(1e-12))) return Vec3T<T>::Zero();
    return (ubar - u * u.dot(ubar)) / len;
  }

  void eval_ray(const BatchPlan& plan, int index, WorkerScratch& sc) const {
    const RayPlan& rp = plan.rays[static_cast<std::size_t>(index)];
    const int m = cfg_.batch_size;
    const T s = params_.sharpness();
    const bool surface_mode = cfg_.sampling.mode == IntersectMode::kSurface;
    const T w_refr = cfg_.enable_refraction ? T(cfg_.weights.refraction) : T(0);
    const T w_eik = (cfg_.enable_eikonal && plan.n_eik_pts > 0)
                        ? T(cfg_.weights.eikonal /
                            static_cast<double>(plan.n_eik_pts))
                        : T(0);
    const T w_mask = cfg_.enable_mask ? T(cfg_.weights.mask / m) : T(0);

    double ray_refr = 0, ray_eik = 0, ray_mask = 0;

    const Eigen::Index k1 = rp.entry_ts.size();
    if (k1 < 2) {
      // The ray never entered the scene volume; its opacity is exactly zero.
      if (cfg_.enable_mask) {
        ray_mask = bce(rp.mask, clamp_opacity(T(0)));
        sc.mask_bce += ray_mask;
      }
      if (!std::isfinite(ray_mask)) sc.bad.push_back(index);
      return;
    }

    // Entry chain forward at frozen sample positions.
    MatXT<T> x_entry(3, k1);
    for (Eigen::Index i = 0; i < k1; ++i)
      x_entry.col(i) = rp.ray.origin + rp.entry_ts[i] * rp.ray.dir;
    MlpState<T> st_entry;
    VecXT<T> val_e;
    MatXT<T> grad_e;
    mlp_value_grad(params_, x_entry, val_e, grad_e,
                   sc.want_grads ? &st_entry : nullptr);

    VecXT<T> alpha_e, w_e;
    T opacity_e = T(0);
    T st_sum = T(0);
    if (!surface_mode) {
      opacity_e = section_weights(val_e, s, alpha_e, w_e);
      for (Eigen::Index i = 0; i < w_e.size(); ++i)
        st_sum += w_e[i] * rp.entry_ts[i];
    } else {
      opacity_e = rp.entry_found ? T(1) : T(0);
    }
    if (cfg_.enable_mask)
      ray_mask = bce(rp.mask, clamp_opacity(opacity_e));

    if (cfg_.enable_eikonal && plan.n_eik_pts > 0) {
      for (Eigen::Index i = 0; i < k1; ++i) {
        const T e = grad_e.col(i).norm();
        ray_eik += static_cast<double>((e - T(1)) * (e - T(1)));
      }
    }

    // Replay of the frozen two-refraction path.
    const PlaneT& plane = planes_[static_cast<std::size_t>(rp.view)];
    const T eta_in = T(ds_->rig.constants.n_outside / ds_->rig.constants.n_inside);
    const T eta_out = T(ds_->rig.constants.n_inside / ds_->rig.constants.n_outside);
    const T delta = cfg_.sampling.interior_step_offset;

    bool replayed = false;
    // Forward values kept for the backward sweep.
    T t_entry = T(0), that_exit = T(0);
    Vec3T<T> p1, n1, d1, o2, p2, n2, d2, qv;
    T len_y1 = T(0), len_draw = T(0), len_y2 = T(0), len_d2raw = T(0);
    T tau = T(0), plane_denom = T(0);
    T opacity_x = T(0), stp_sum = T(0);
    MlpState<T> st_p1, st_p2, st_exit;
    MatXT<T> grad_p1, grad_p2, grad_x, x_exit;
    VecXT<T> val_p1, val_p2, val_x, alpha_x, w_x;
    const Eigen::Index k2 = rp.exit_ts.size();

    const bool want_replay =
        rp.valid && cfg_.enable_refraction &&
        (!surface_mode || (rp.entry_bracket && rp.exit_bracket)) &&
        (surface_mode || k2 >= 2);
    if (want_replay) {
      replayed = replay_forward(rp, s, surface_mode, delta, plane, eta_in,
                                eta_out, t_entry, that_exit, p1, n1, d1, o2,
                                p2, n2, d2, qv, len_y1, len_draw, len_y2,
                                len_d2raw, tau, plane_denom, opacity_x,
                                stp_sum, st_p1, st_p2, st_exit, grad_p1,
                                grad_p2, grad_x, x_exit, val_p1, val_p2,
                                val_x, alpha_x, w_x, val_e, alpha_e, w_e,
                                st_sum, opacity_e);
      if (replayed) {
        ray_refr = static_cast<double>(rp.kappa) * static_cast<double>(rp.kappa) *
                   static_cast<double>((qv - rp.q).squaredNorm());
        if (!surface_mode && cfg_.enable_eikonal && plan.n_eik_pts > 0) {
          for (Eigen::Index j = 0; j < k2; ++j) {
            const T e = grad_x.col(j).norm();
            ray_eik += static_cast<double>((e - T(1)) * (e - T(1)));
          }
        }
      }
    }

    // Exit samples that the replay did not visit still carry the eikonal
    // term, at their frozen stage-one positions.
    const bool frozen_exit_eik =
        k2 > 0 && (!replayed || surface_mode) && cfg_.enable_eikonal &&
        plan.n_eik_pts > 0;
    MlpState<T> st_frozen;
    VecXT<T> val_f;
    MatXT<T> grad_f;
    if (frozen_exit_eik) {
      mlp_value_grad(params_, rp.exit_pts_frozen, val_f, grad_f,
                     sc.want_grads ? &st_frozen : nullptr);
      for (Eigen::Index j = 0; j < k2; ++j) {
        const T e = grad_f.col(j).norm();
        ray_eik += static_cast<double>((e - T(1)) * (e - T(1)));
      }
    }

    if (cfg_.enable_mask) sc.mask_bce += ray_mask;
    if (cfg_.enable_eikonal) sc.eik_sq += ray_eik;
    if (replayed) sc.refr += ray_refr;
    if (!std::isfinite(ray_mask) || !std::isfinite(ray_eik) ||
        !std::isfinite(ray_refr)) {
      sc.bad.push_back(index);
      return;
    }
    if (!sc.want_grads) return;

    // ---- backward sweep ----
    Vec3T<T> p1bar = Vec3T<T>::Zero();
    T that_exit_bar = T(0);
    Vec3T<T> o2bar = Vec3T<T>::Zero(), d1bar = Vec3T<T>::Zero();

    if (replayed) {
      // Monitor residual through the plane hit.
      const Vec3T<T> qbar =
          T(2) * w_refr * rp.kappa * rp.kappa * (qv - rp.q);
      const Vec3T<T> core =
          qbar - plane.normal * (d2.dot(qbar) / plane_denom);
      Vec3T<T> p2bar = core;
      const Vec3T<T> d2bar = tau * core;

      // Second refraction.
      const Vec3T<T> d2rawbar = normalize_pullback(d2, len_d2raw, d2bar);
      Vec3T<T> n2bar = Vec3T<T>::Zero();
      refract_pullback<T>(d1, n2, eta_out, d2rawbar, d1bar, n2bar);
      const Vec3T<T> y2bar = normalize_pullback(n2, len_y2, n2bar);
      const Vec3T<T> vb_p2 = -y2bar;  // exit normal reads the flipped field

      // Exit surface point: normal dependence first, then the depth chain.
      {
        VecXT<T> ub = VecXT<T>::Zero(1);
        MatXT<T> vb(3, 1), dx;
        vb.col(0) = vb_p2;
        mlp_pullback(params_, st_p2, ub, vb, sc.grads, &dx);
        p2bar += dx.col(0);
      }
      that_exit_bar = d1.dot(p2bar);
      o2bar += p2bar;
      d1bar += that_exit * p2bar;

      if (!surface_mode) {
        // Expected-depth quotient and the exit weight chain.
        const T og = std::max(opacity_x, T(1e-9));
        const T stbar = that_exit_bar / og;
        T oxbar = opacity_x > T(1e-9) ? -that_exit_bar * stp_sum / (og * og)
                                      : T(0);
        VecXT<T> wbar(k2 - 1);
        for (Eigen::Index j = 0; j + 1 < k2; ++j)
          wbar[j] = stbar * rp.exit_ts[j] + oxbar;
        VecXT<T> gbar_flip = VecXT<T>::Zero(k2);
        VecXT<T> gflip = -val_x;
        sc.sbar += section_weights_pullback(gflip, s, alpha_x, wbar, gbar_flip);

        VecXT<T> ub = -gbar_flip;  // adjoint on the raw field values
        MatXT<T> vb = MatXT<T>::Zero(3, k2);
        if (w_eik > T(0)) {
          for (Eigen::Index j = 0; j < k2; ++j) {
            const T e = grad_x.col(j).norm();
            if (e > T(1e-12))
              vb.col(j) = T(2) * w_eik * (e - T(1)) / e * grad_x.col(j);
          }
        }
        MatXT<T> dx;
        mlp_pullback(params_, st_exit, ub, vb, sc.grads, &dx);
        for (Eigen::Index j = 0; j < k2; ++j) {
          o2bar += dx.col(j);
          d1bar += rp.exit_ts[j] * dx.col(j);
        }
      } else {
        // Implicit root along the interior ray: t solves gflip(o2 + t d1) = 0.
        const Vec3T<T> y2full = -grad_p2.col(0);  // flipped-field gradient
        const T dd = y2full.dot(d1);
        if (std::abs(static_cast<double>(dd)) > 1e-12) {
          const T inv = T(1) / dd;
          o2bar += that_exit_bar * (-inv) * y2full;
          d1bar += that_exit_bar * (-that_exit * inv) * y2full;
          VecXT<T> ub(1);
          ub[0] = that_exit_bar * inv;  // -(-tbar/dd) on the raw field
          MatXT<T> vb = MatXT<T>::Zero(3, 1);
          mlp_pullback(params_, st_p2, ub, vb, sc.grads);
        }
      }

      p1bar += o2bar;
      d1bar += delta * o2bar;

      // First refraction.
      const Vec3T<T> d1rawbar = normalize_pullback(d1, len_draw, d1bar);
      Vec3T<T> dcam_bar = Vec3T<T>::Zero(), n1bar = Vec3T<T>::Zero();
      refract_pullback<T>(rp.ray.dir, n1, eta_in, d1rawbar, dcam_bar, n1bar);
      const Vec3T<T> y1bar = normalize_pullback(n1, len_y1, n1bar);
      {
        VecXT<T> ub = VecXT<T>::Zero(1);
        MatXT<T> vb(3, 1), dx;
        vb.col(0) = y1bar;
        mlp_pullback(params_, st_p1, ub, vb, sc.grads, &dx);
        p1bar += dx.col(0);
      }
      if (surface_mode) {
        const Vec3T<T> y1full = grad_p1.col(0);
        const T dd = y1full.dot(rp.ray.dir);
        const T tbar = rp.ray.dir.dot(p1bar);
        if (std::abs(static_cast<double>(dd)) > 1e-12) {
          VecXT<T> ub(1);
          ub[0] = -tbar / dd;
          MatXT<T> vb = MatXT<T>::Zero(3, 1);
          mlp_pullback(params_, st_p1, ub, vb, sc.grads);
        }
      }
    }

    // Frozen-position eikonal on the exit samples.
    if (frozen_exit_eik && w_eik > T(0)) {
      VecXT<T> ub = VecXT<T>::Zero(k2);
      MatXT<T> vb = MatXT<T>::Zero(3, k2);
      bool any = false;
      for (Eigen::Index j = 0; j < k2; ++j) {
        const T e = grad_f.col(j).norm();
        if (e > T(1e-12)) {
          vb.col(j) = T(2) * w_eik * (e - T(1)) / e * grad_f.col(j);
          any = true;
        }
      }
      if (any) mlp_pullback(params_, st_frozen, ub, vb, sc.grads);
    }

    // Entry chain backward: expected depth (when replayed), mask opacity,
    // and the entry-sample eikonal term.
    VecXT<T> gbar_e = VecXT<T>::Zero(k1);
    if (!surface_mode) {
      T obar = T(0);
      if (w_mask > T(0)) obar += w_mask * bce_grad(rp.mask, opacity_e);
      T that_bar = T(0);
      if (replayed) that_bar = rp.ray.dir.dot(p1bar);
      const T og = std::max(opacity_e, T(1e-9));
      const T stbar = that_bar / og;
      obar += opacity_e > T(1e-9) ? -that_bar * st_sum / (og * og) : T(0);
      VecXT<T> wbar(k1 - 1);
      for (Eigen::Index i = 0; i + 1 < k1; ++i)
        wbar[i] = stbar * rp.entry_ts[i] + obar;
      sc.sbar += section_weights_pullback(val_e, s, alpha_e, wbar, gbar_e);
    }
    MatXT<T> vbar_e = MatXT<T>::Zero(3, k1);
    if (w_eik > T(0)) {
      for (Eigen::Index i = 0; i < k1; ++i) {
        const T e = grad_e.col(i).norm();
        if (e > T(1e-12))
          vbar_e.col(i) = T(2) * w_eik * (e - T(1)) / e * grad_e.col(i);
      }
    }
    if ((gbar_e.array() != T(0)).any() || (vbar_e.array() != T(0)).any())
      mlp_pullback(params_, st_entry, gbar_e, vbar_e, sc.grads);

    if (sc.want_grads && replayed) {
      // Guard against adjoint blowups that stay finite in the loss value.
      if (!p1bar.allFinite() || !d1bar.allFinite()) sc.bad.push_back(index);
    }
  }

  /// Differentiable forward replay of a frozen valid ray. Returns false when
  /// a guard that held during stage one no longer holds (possible only for
  /// perturbed parameters); the ray then contributes nothing to the
  /// refraction term.
  bool replay_forward(const RayPlan& rp, T s, bool surface_mode, T delta,
                      const PlaneT& plane, T eta_in, T eta_out, T& t_entry,
                      T& that_exit, Vec3T<T>& p1, Vec3T<T>& n1, Vec3T<T>& d1,
                      Vec3T<T>& o2, Vec3T<T>& p2, Vec3T<T>& n2, Vec3T<T>& d2,
                      Vec3T<T>& qv, T& len_y1, T& len_draw, T& len_y2,
                      T& len_d2raw, T& tau, T& plane_denom, T& opacity_x,
                      T& stp_sum, MlpState<T>& st_p1, MlpState<T>& st_p2,
                      MlpState<T>& st_exit, MatXT<T>& grad_p1,
                      MatXT<T>& grad_p2, MatXT<T>& grad_x, MatXT<T>& x_exit,
                      VecXT<T>& val_p1, VecXT<T>& val_p2, VecXT<T>& val_x,
                      VecXT<T>& alpha_x, VecXT<T>& w_x, const VecXT<T>& val_e,
                      const VecXT<T>& alpha_e, const VecXT<T>& w_e, T st_sum,
                      T opacity_e) const {
    const Eigen::Index k2 = rp.exit_ts.size();
    if (surface_mode) {
      t_entry = bisect_field(rp.ray.origin, rp.ray.dir, rp.entry_lo,
                             rp.entry_hi, false);
    } else {
      t_entry = st_sum / std::max(opacity_e, T(1e-9));
    }
    p1 = rp.ray.origin + t_entry * rp.ray.dir;

    MatXT<T> pt(3, 1);
    pt.col(0) = p1;
    mlp_value_grad(params_, pt, val_p1, grad_p1, &st_p1);
    n1 = normalize_or_unitz(grad_p1.col(0), len_y1);
    if (!(rp.ray.dir.dot(n1) < T(0))) return false;
    const auto r1 = refract<T>(rp.ray.dir, n1, eta_in);
    if (r1.tir) return false;
    const Vec3T<T> draw = r1.dir;
    len_draw = draw.norm();
    if (!(len_draw > T(1e-12))) return false;
    d1 = draw / len_draw;
    o2 = p1 + delta * d1;

    if (surface_mode) {
      that_exit = bisect_field(o2, d1, rp.exit_lo, rp.exit_hi, true);
    } else {
      if (k2 < 2) return false;
      x_exit.resize(3, k2);
      for (Eigen::Index j = 0; j < k2; ++j)
        x_exit.col(j) = o2 + rp.exit_ts[j] * d1;
      mlp_value_grad(params_, x_exit, val_x, grad_x, &st_exit);
      VecXT<T> gflip = -val_x;
      opacity_x = section_weights(gflip, s, alpha_x, w_x);
      stp_sum = T(0);
      for (Eigen::Index j = 0; j < w_x.size(); ++j)
        stp_sum += w_x[j] * rp.exit_ts[j];
      that_exit = stp_sum / std::max(opacity_x, T(1e-9));
    }
    p2 = o2 + that_exit * d1;

    pt.col(0) = p2;
    mlp_value_grad(params_, pt, val_p2, grad_p2, &st_p2);
    n2 = normalize_or_unitz(Vec3T<T>(-grad_p2.col(0)), len_y2);
    if (!(d1.dot(n2) < T(0))) return false;
    const auto r2 = refract<T>(d1, n2, eta_out);
    if (r2.tir) return false;
    len_d2raw = r2.dir.norm();
    if (!(len_d2raw > T(1e-12))) return false;
    d2 = r2.dir / len_d2raw;

    plane_denom = d2.dot(plane.normal);
    if (std::abs(static_cast<double>(plane_denom)) < 1e-12) return false;
    tau = (plane.origin - p2).dot(plane.normal) / plane_denom;
    if (tau <= T(0)) return false;
    qv = p2 + tau * d2;
    return true;
  }

  const Dataset* ds_;
  MlpParams<T> params_;
  TrainConfig<T> cfg_;
  AdamState<T> opt_;
  std::int64_t iter_ = 0;
  std::vector<std::pair<int, int>> pool_q_, pool_bg_;  ///< (view, record)
  std::vector<PlaneT> planes_;
};

struct TrainRunOptions {
  std::filesystem::path out_dir;
  int checkpoint_every = 0;  ///< 0 keeps only the final pair
  std::string log_name = "train_log.csv";
  std::optional<std::filesystem::path> resume_state;
  bool verbose = false;
};

struct TrainRunReport {
  std::int64_t start_iteration = 0;
  std::int64_t end_iteration = 0;
  int aborted_steps = 0;
  std::filesystem::path checkpoint_path;
  std::filesystem::path state_path;
  double wallclock_s = 0;
};

/// Runs (or resumes) the optimization loop, writing one CSV row per step and
/// periodic checkpoint pairs: the portable field snapshot plus the native
/// optimizer state used by --resume. LowOpacity rays are folded into the
/// n_miss column; both outcomes exclude the ray from the refraction set.
template <typename T>
TrainRunReport run_training(const Dataset& ds, MlpParams<T> params,
                            const TrainConfig<T>& cfg,
                            const TrainRunOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  Trainer<T> trainer(ds, std::move(params), cfg);

  if (opt.resume_state) {
    std::int64_t it = 0;
    load_train_state<T>(*opt.resume_state, trainer.params(),
                        trainer.opt_state(), it);
    trainer.set_iteration(it);
  }

  TrainRunReport rep;
  rep.start_iteration = trainer.iteration();

  const fs::path log_path = opt.out_dir / opt.log_name;
  const bool fresh = trainer.iteration() == 0;
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log) throw ConfigError("cannot open " + log_path.string());
  if (fresh)
    log << "iter,total,refraction,eikonal,mask,n_valid,n_occluded,n_tir,"
           "n_miss,wallclock_s\n";

  const auto t0 = std::chrono::steady_clock::now();
  char row[256];
  while (trainer.iteration() < cfg.iterations) {
    const std::int64_t it = trainer.iteration();
    const BatchResult r = trainer.step();
    if (r.aborted) {
      ++rep.aborted_steps;
      std::cerr << "step " << it << ": non-finite batch skipped; rays:";
      if (r.non_finite_rays.empty()) std::cerr << " (reduction)";
      for (int idx : r.non_finite_rays) std::cerr << ' ' << idx;
      std::cerr << '\n';
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::snprintf(row, sizeof(row),
                  "%lld,%.9g,%.9g,%.9g,%.9g,%d,%d,%d,%d,%.3f\n",
                  static_cast<long long>(it), r.total, r.refraction, r.eikonal,
                  r.mask, r.n_valid, r.n_self_occluded, r.n_tir,
                  r.n_miss + r.n_low_opacity, wall);
    log << row;
    if (opt.verbose && (it % 100 == 0)) {
      std::cerr << "iter " << it << " total " << r.total << " valid "
                << r.n_valid << '\n';
    }
    const std::int64_t done = trainer.iteration();
    if (opt.checkpoint_every > 0 && done % opt.checkpoint_every == 0 &&
        done < cfg.iterations) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06lld.bin",
                    static_cast<long long>(done));
      save_checkpoint(opt.out_dir / name,
                      cast_params<double>(trainer.params()));
      std::snprintf(name, sizeof(name), "state_%06lld.nets",
                    static_cast<long long>(done));
      save_train_state<T>(opt.out_dir / name, trainer.params(),
                          trainer.opt_state(), done);
    }
  }
  log.flush();

  rep.end_iteration = trainer.iteration();
  rep.checkpoint_path = opt.out_dir / "checkpoint_final.bin";
  rep.state_path = opt.out_dir / "state_final.nets";
  save_checkpoint(rep.checkpoint_path, cast_params<double>(trainer.params()));
  save_train_state<T>(rep.state_path, trainer.params(), trainer.opt_state(),
                      trainer.iteration());
  rep.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

}  // namespace neto
