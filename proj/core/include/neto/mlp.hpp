#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "neto/field.hpp"
#include "neto/rng.hpp"
#include "neto/types.hpp"

namespace neto {

/// Fully connected scalar field: positional encoding, `depth` hidden layers
/// of `width` units with scaled softplus activations, linear output. The
/// sharpness `s = exp(log_s)` is carried here because it is trained jointly
/// with the network weights.
template <typename T>
struct MlpParams {
  int depth = 4;
  int width = 128;
  int enc_freqs = 5;
  std::vector<MatXT<T>> w;  ///< depth+1 matrices, layer 0 first
  std::vector<VecXT<T>> b;
  T log_s = T(3);

  int in_dim() const { return 3 + 6 * enc_freqs; }
  T sharpness() const { return std::exp(log_s); }
};

template <typename T>
struct MlpGrads {
  std::vector<MatXT<T>> w;
  std::vector<VecXT<T>> b;
  T log_s = T(0);

  static MlpGrads zeros_like(const MlpParams<T>& p) {
    MlpGrads g;
    g.w.reserve(p.w.size());
    g.b.reserve(p.b.size());
    for (const auto& m : p.w) g.w.push_back(MatXT<T>::Zero(m.rows(), m.cols()));
    for (const auto& v : p.b) g.b.push_back(VecXT<T>::Zero(v.size()));
    return g;
  }
  void set_zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
    log_s = T(0);
  }
  void add(const MlpGrads& o) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += o.w[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
    log_s += o.log_s;
  }
};

/// Intermediate activations captured by a forward pass, consumed by
/// mlp_pullback. Layouts are width x N with one column per point.
template <typename T>
struct MlpState {
  MatXT<T> enc;                   ///< in_dim x N encoding values
  MatXT<T> enc_d1;                ///< d e_i / d x_{c(i)} (single nonzero)
  MatXT<T> enc_d2;                ///< second derivative of the same entry
  std::vector<MatXT<T>> z;        ///< pre-activations per hidden layer
  std::vector<MatXT<T>> a;        ///< activations per hidden layer
  std::vector<std::array<MatXT<T>, 3>> ga;  ///< d a / d x_c per hidden layer
};

namespace detail {

constexpr double kActScale = 100.0;

/// Stable softplus(kActScale * z) / kActScale.
template <typename T>
void softplus(const MatXT<T>& z, MatXT<T>& out) {
  const T s = T(kActScale);
  out = z.cwiseMax(T(0)) +
        ((-(z * s).cwiseAbs()).array().exp().log1p() / s).matrix();
}

template <typename T>
void logistic_of(const MatXT<T>& z, MatXT<T>& out) {
  out = ((z * T(kActScale)).array().logistic()).matrix();
}

/// Index of the coordinate a given encoding row differentiates along.
inline int enc_coord(int row) { return row % 3; }

/// Fills the encoding matrix and the per-row first/second derivatives.
/// Row layout: [x, y, z, sin(w0 x), sin(w0 y), sin(w0 z), cos(w0 x), ...,
/// cos(w_{L-1} z)] with w_k = pi * 2^k.
template <typename T>
void encode(const MatXT<T>& pts, int freqs, MatXT<T>& enc, MatXT<T>& d1,
            MatXT<T>& d2) {
  const Eigen::Index n = pts.cols();
  const int dim = 3 + 6 * freqs;
  enc.resize(dim, n);
  d1.resize(dim, n);
  d2.resize(dim, n);
  enc.template topRows<3>() = pts;
  d1.template topRows<3>().setOnes();
  d2.template topRows<3>().setZero();
  T omega = T(M_PI);
  for (int k = 0; k < freqs; ++k) {
    const int rs = 3 + 6 * k;
    const int rc = rs + 3;
    const auto arg = (pts * omega).array();
    enc.middleRows(rs, 3) = arg.sin().matrix();
    enc.middleRows(rc, 3) = arg.cos().matrix();
    d1.middleRows(rs, 3) = omega * enc.middleRows(rc, 3);
    d1.middleRows(rc, 3) = -omega * enc.middleRows(rs, 3);
    d2.middleRows(rs, 3) = -omega * omega * enc.middleRows(rs, 3);
    d2.middleRows(rc, 3) = -omega * omega * enc.middleRows(rc, 3);
    omega *= T(2);
  }
}

}  // namespace detail

/// Field values at the columns of `pts`.
template <typename T>
void mlp_values(const MlpParams<T>& p, const MatXT<T>& pts, VecXT<T>& out) {
  MatXT<T> enc, d1, d2;
  detail::encode(pts, p.enc_freqs, enc, d1, d2);
  MatXT<T> a = std::move(enc);
  MatXT<T> z;
  for (int l = 0; l < p.depth; ++l) {
    z.noalias() = p.w[l] * a;
    z.colwise() += p.b[l];
    detail::softplus(z, a);
  }
  out = (p.w[p.depth] * a).transpose();
  out.array() += p.b[p.depth][0];
}

/// Field values and spatial gradients. When `state` is non-null the
/// intermediate activations are captured for a later mlp_pullback over the
/// same points.
template <typename T>
void mlp_value_grad(const MlpParams<T>& p, const MatXT<T>& pts, VecXT<T>& val,
                    MatXT<T>& grad, MlpState<T>* state = nullptr) {
  const Eigen::Index n = pts.cols();
  MlpState<T> local;
  MlpState<T>& st = state ? *state : local;
  detail::encode(pts, p.enc_freqs, st.enc, st.enc_d1, st.enc_d2);
  st.z.resize(p.depth);
  st.a.resize(p.depth);
  st.ga.resize(p.depth);

  // Encoding rows for coordinate c sit at stride 3; gather them once so the
  // first layer Jacobian multiplies only the nonzero block.
  const int dim = p.in_dim();
  std::array<std::vector<int>, 3> rows_c;
  for (int i = 0; i < dim; ++i) rows_c[detail::enc_coord(i)].push_back(i);

  MatXT<T> sp1;
  for (int l = 0; l < p.depth; ++l) {
    const MatXT<T>& prev = l == 0 ? st.enc : st.a[l - 1];
    st.z[l].noalias() = p.w[l] * prev;
    st.z[l].colwise() += p.b[l];
    detail::softplus(st.z[l], st.a[l]);
    detail::logistic_of(st.z[l], sp1);
    for (int c = 0; c < 3; ++c) {
      MatXT<T>& g = st.ga[l][c];
      if (l == 0) {
        MatXT<T> wc(p.width, static_cast<int>(rows_c[c].size()));
        MatXT<T> dc(static_cast<int>(rows_c[c].size()), n);
        for (std::size_t j = 0; j < rows_c[c].size(); ++j) {
          wc.col(static_cast<int>(j)) = p.w[0].col(rows_c[c][j]);
          dc.row(static_cast<int>(j)) = st.enc_d1.row(rows_c[c][j]);
        }
        g.noalias() = wc * dc;
      } else {
        g.noalias() = p.w[l] * st.ga[l - 1][c];
      }
      g.array() *= sp1.array();
    }
  }
  val = (p.w[p.depth] * st.a[p.depth - 1]).transpose();
  val.array() += p.b[p.depth][0];
  grad.resize(3, n);
  for (int c = 0; c < 3; ++c) {
    grad.row(c).noalias() = p.w[p.depth] * st.ga[p.depth - 1][c];
  }
}

/// Reverse pass for the functional L = sum_p ubar_p g(x_p) + vbar_p . grad
/// g(x_p). Accumulates parameter gradients into `grads`; when `dx` is
/// non-null also emits dL/dx_p (3 x N), which includes the Hessian-vector
/// term from the vbar path. `st` must come from mlp_value_grad over the same
/// points and parameters.
template <typename T>
void mlp_pullback(const MlpParams<T>& p, const MlpState<T>& st,
                  const VecXT<T>& ubar, const MatXT<T>& vbar,
                  MlpGrads<T>& grads, MatXT<T>* dx = nullptr) {
  const Eigen::Index n = ubar.size();
  const int D = p.depth;

  // Directional first-derivative chain gamma_l = (d a_l / d x) . vbar,
  // assembled from the stored per-coordinate Jacobians.
  std::vector<MatXT<T>> gamma(D);
  for (int l = 0; l < D; ++l) {
    MatXT<T>& g = gamma[l];
    g = (st.ga[l][0].array().rowwise() * vbar.row(0).array()).matrix();
    for (int c = 1; c < 3; ++c)
      g.array() += st.ga[l][c].array().rowwise() * vbar.row(c).array();
  }

  // Output layer.
  grads.w[D].noalias() += ubar.transpose() * st.a[D - 1].transpose();
  grads.w[D] += gamma[D - 1].rowwise().sum().transpose();
  grads.b[D][0] += ubar.sum();

  MatXT<T> abar = p.w[D].transpose() * ubar.transpose();  // width x N
  MatXT<T> gbar = p.w[D].transpose().replicate(1, n);

  MatXT<T> sp1, zbar, gzbar, gz, encg;
  for (int l = D - 1; l >= 0; --l) {
    detail::logistic_of(st.z[l], sp1);
    // gz = w_l * gamma_{l-1}; at the bottom the encoding directional
    // derivative plays the role of gamma_{-1}.
    if (l > 0) {
      gz.noalias() = p.w[l] * gamma[l - 1];
    } else {
      encg.resize(st.enc.rows(), n);
      for (Eigen::Index i = 0; i < st.enc.rows(); ++i) {
        const int c = detail::enc_coord(static_cast<int>(i));
        encg.row(i) = st.enc_d1.row(i).cwiseProduct(vbar.row(c));
      }
      gz.noalias() = p.w[0] * encg;
    }
    // d softplus' = kActScale * sp1 (1 - sp1), applied along the gamma path.
    zbar = (abar.array() * sp1.array() +
            gbar.array() *
                (T(detail::kActScale) * sp1.array() * (T(1) - sp1.array())) *
                gz.array())
               .matrix();
    gzbar = (gbar.array() * sp1.array()).matrix();

    const MatXT<T>& prev_a = l == 0 ? st.enc : st.a[l - 1];
    grads.w[l].noalias() += zbar * prev_a.transpose();
    grads.b[l].noalias() += zbar.rowwise().sum();
    if (l > 0) {
      grads.w[l].noalias() += gzbar * gamma[l - 1].transpose();
      abar = p.w[l].transpose() * zbar;
      gbar = p.w[l].transpose() * gzbar;
    } else {
      grads.w[0].noalias() += gzbar * encg.transpose();
      if (dx) {
        const MatXT<T> ebar = p.w[0].transpose() * zbar;      // in_dim x N
        const MatXT<T> egbar = p.w[0].transpose() * gzbar;
        dx->setZero(3, n);
        for (Eigen::Index i = 0; i < st.enc.rows(); ++i) {
          const int c = detail::enc_coord(static_cast<int>(i));
          dx->row(c).array() +=
              ebar.row(i).array() * st.enc_d1.row(i).array() +
              egbar.row(i).array() * st.enc_d2.row(i).array() *
                  vbar.row(c).array();
        }
      }
    }
  }
}

/// Freshly seeded network (He-normal weights, zero biases).
template <typename T>
MlpParams<T> make_mlp(int depth, int width, int enc_freqs, std::uint64_t seed,
                      T log_s = T(3)) {
  MlpParams<T> p;
  p.depth = depth;
  p.width = width;
  p.enc_freqs = enc_freqs;
  p.log_s = log_s;
  Rng rng(seed);
  auto fill = [&rng](MatXT<T>& m, double stddev) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, j) = static_cast<T>(rng.normal() * stddev);
  };
  const int in_dim = p.in_dim();
  p.w.resize(depth + 1);
  p.b.resize(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    const int rows = l == depth ? 1 : width;
    const int cols = l == 0 ? in_dim : width;
    p.w[l].resize(rows, cols);
    fill(p.w[l], std::sqrt(2.0 / cols));
    p.b[l] = VecXT<T>::Zero(rows);
  }
  return p;
}

/// Overwrites the weights of `p` so the untrained field already approximates
/// `|x| - radius`: fan-out scaled hidden weights, zero bias, first-layer
/// columns for the sin/cos rows zeroed, and a near-constant output row of
/// sqrt(pi / width) with bias -radius. High-frequency encoding channels only
/// enter once training moves their first-layer weights off zero.
template <typename T>
void geometric_init(MlpParams<T>& p, T radius, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(p.w[l].rows()));
    for (Eigen::Index j = 0; j < p.w[l].cols(); ++j)
      for (Eigen::Index i = 0; i < p.w[l].rows(); ++i)
        p.w[l](i, j) = static_cast<T>(rng.normal() * stddev);
    p.b[l].setZero();
  }
  p.w.front().rightCols(p.w.front().cols() - 3).setZero();
  MatXT<T>& out = p.w.back();
  const double mean = std::sqrt(M_PI / static_cast<double>(out.cols()));
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    out(0, j) = static_cast<T>(mean + rng.normal() * 1e-5);
  p.b.back()[0] = -radius;
}

template <typename To, typename From>
MlpParams<To> cast_params(const MlpParams<From>& p) {
  MlpParams<To> q;
  q.depth = p.depth;
  q.width = p.width;
  q.enc_freqs = p.enc_freqs;
  q.log_s = static_cast<To>(p.log_s);
  q.w.reserve(p.w.size());
  q.b.reserve(p.b.size());
  for (const auto& m : p.w) q.w.push_back(m.template cast<To>());
  for (const auto& v : p.b) q.b.push_back(v.template cast<To>());
  return q;
}

/// FieldBatch view over MLP parameters (non-owning).
template <typename T>
class MlpFieldRef final : public FieldBatchT<T> {
 public:
  explicit MlpFieldRef(const MlpParams<T>& p) : p_(&p) {}
  void values(const MatXT<T>& pts, VecXT<T>& out) const override {
    mlp_values(*p_, pts, out);
  }
  void value_grad(const MatXT<T>& pts, VecXT<T>& val,
                  MatXT<T>& grad) const override {
    mlp_value_grad(*p_, pts, val, grad);
  }

 private:
  const MlpParams<T>* p_;
};

}  // namespace neto
