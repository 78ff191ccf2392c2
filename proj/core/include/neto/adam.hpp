#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "neto/mlp.hpp"
#include "neto/types.hpp"

namespace neto {

template <typename T>
struct AdamConfig {
  T lr = T(5e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
struct AdamState {
  std::vector<MatXT<T>> mw, vw;
  std::vector<VecXT<T>> mb, vb;
  T m_logs = T(0), v_logs = T(0);
  std::int64_t step = 0;

  static AdamState zeros_like(const MlpParams<T>& p) {
    AdamState s;
    for (const auto& m : p.w) {
      s.mw.push_back(MatXT<T>::Zero(m.rows(), m.cols()));
      s.vw.push_back(MatXT<T>::Zero(m.rows(), m.cols()));
    }
    for (const auto& v : p.b) {
      s.mb.push_back(VecXT<T>::Zero(v.size()));
      s.vb.push_back(VecXT<T>::Zero(v.size()));
    }
    return s;
  }
};

template <typename T>
void adam_step(MlpParams<T>& p, const MlpGrads<T>& g, AdamState<T>& s,
               const AdamConfig<T>& cfg) {
  s.step += 1;
  const T bc1 = T(1) - std::pow(cfg.beta1, T(s.step));
  const T bc2 = T(1) - std::pow(cfg.beta2, T(s.step));
  const T lr = cfg.lr * std::sqrt(bc2) / bc1;
  auto upd = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (T(1) - cfg.beta1) * grad;
    v = (cfg.beta2 * v.array() +
         (T(1) - cfg.beta2) * grad.array().square())
            .matrix();
    param.array() -= lr * m.array() / (v.array().sqrt() + cfg.eps);
  };
  for (std::size_t i = 0; i < p.w.size(); ++i) upd(p.w[i], g.w[i], s.mw[i], s.vw[i]);
  for (std::size_t i = 0; i < p.b.size(); ++i) upd(p.b[i], g.b[i], s.mb[i], s.vb[i]);
  s.m_logs = cfg.beta1 * s.m_logs + (T(1) - cfg.beta1) * g.log_s;
  s.v_logs = cfg.beta2 * s.v_logs + (T(1) - cfg.beta2) * g.log_s * g.log_s;
  p.log_s -= lr * s.m_logs / (std::sqrt(s.v_logs) + cfg.eps);
}

struct SphereInitReport {
  double rms_value = 0;   ///< residual against the target distance
  double rms_grad = 0;    ///< residual against the target gradient
  int steps = 0;
};

/// Fits the field to the signed distance of a centered sphere so training
/// starts from a well behaved surface. Re-seeds the weights with
/// geometric_init, then supervises values and gradients on points drawn
/// uniformly from [-extent, extent]^3. Fitting from a random start instead
/// settles into a constant field whose spatial gradient is zero everywhere.
template <typename T>
SphereInitReport init_sphere(MlpParams<T>& p, T radius, std::uint64_t seed,
                             int steps = 2000, int batch = 512,
                             T extent = T(1.1)) {
  geometric_init(p, radius, seed);
  AdamConfig<T> cfg;
  cfg.lr = T(1e-3);
  AdamState<T> opt = AdamState<T>::zeros_like(p);
  MlpGrads<T> grads = MlpGrads<T>::zeros_like(p);
  Rng root(seed);
  const T lambda_g = T(0.1);

  MatXT<T> pts(3, batch), grad, vbar(3, batch);
  VecXT<T> val, ubar(batch);
  MlpState<T> st;
  SphereInitReport report;
  for (int it = 0; it < steps; ++it) {
    Rng rng = root.fork(static_cast<std::uint64_t>(it));
    for (int j = 0; j < batch; ++j)
      for (int c = 0; c < 3; ++c)
        pts(c, j) = static_cast<T>(rng.uniform(-double(extent), double(extent)));
    mlp_value_grad(p, pts, val, grad, &st);
    T sq_v = T(0), sq_g = T(0);
    for (int j = 0; j < batch; ++j) {
      const Vec3T<T> x = pts.col(j);
      const T r = x.norm();
      const T target = r - radius;
      const Vec3T<T> tgrad = r > T(1e-9) ? Vec3T<T>(x / r) : Vec3T<T>(1, 0, 0);
      ubar[j] = T(2) * (val[j] - target) / T(batch);
      vbar.col(j) = T(2) * lambda_g * (grad.col(j) - tgrad) / T(batch);
      sq_v += (val[j] - target) * (val[j] - target);
      sq_g += (grad.col(j) - tgrad).squaredNorm();
    }
    grads.set_zero();
    mlp_pullback(p, st, ubar, vbar, grads);
    grads.log_s = T(0);  // sharpness is not part of the fit
    const T saved_logs = p.log_s;
    adam_step(p, grads, opt, cfg);
    p.log_s = saved_logs;
    report.rms_value = std::sqrt(double(sq_v) / batch);
    report.rms_grad = std::sqrt(double(sq_g) / (3.0 * batch));
    report.steps = it + 1;
  }
  return report;
}

}  // namespace neto
