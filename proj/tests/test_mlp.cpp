#include <doctest.h>

#include <cmath>
#include <vector>

#include "neto/adam.hpp"
#include "neto/mlp.hpp"
#include "neto/rng.hpp"

using namespace neto;

namespace {

MatXT<double> random_points(Rng& rng, int n, double span) {
  MatXT<double> pts(3, n);
  for (int i = 0; i < n; ++i) {
    pts.col(i) = Vec3(rng.uniform(-span, span), rng.uniform(-span, span),
                      rng.uniform(-span, span));
  }
  return pts;
}

// Scalar functional used for every finite-difference probe:
// L = sum_i ubar_i g(x_i) + vbar_i . grad g(x_i).
double probe_loss(const MlpParams<double>& p, const MatXT<double>& pts,
                  const VecXT<double>& ubar, const MatXT<double>& vbar) {
  VecXT<double> val;
  MatXT<double> grad;
  mlp_value_grad(p, pts, val, grad);
  return ubar.dot(val) + (vbar.array() * grad.array()).sum();
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("encoding layout and derivatives") {
  MatXT<double> pts(3, 1);
  pts.col(0) = Vec3(0.21, -0.47, 0.05);
  MatXT<double> enc, d1, d2;
  detail::encode<double>(pts, 2, enc, d1, d2);
  REQUIRE(enc.rows() == 15);
  CHECK(enc(0, 0) == doctest::Approx(0.21));
  CHECK(enc(3, 0) == doctest::Approx(std::sin(M_PI * 0.21)));
  CHECK(enc(4, 0) == doctest::Approx(std::sin(M_PI * -0.47)));
  CHECK(enc(6, 0) == doctest::Approx(std::cos(M_PI * 0.21)));
  CHECK(enc(9, 0) == doctest::Approx(std::sin(2 * M_PI * 0.21)));
  CHECK(enc(12, 0) == doctest::Approx(std::cos(2 * M_PI * 0.21)));

  // d1/d2 are the rowwise derivatives in the row's own coordinate.
  const double h = 1e-6;
  for (int row = 0; row < 15; ++row) {
    const int c = detail::enc_coord(row);
    MatXT<double> pp = pts, pm = pts;
    pp(c, 0) += h;
    pm(c, 0) -= h;
    MatXT<double> ep, e1p, e2p, em, e1m, e2m;
    detail::encode<double>(pp, 2, ep, e1p, e2p);
    detail::encode<double>(pm, 2, em, e1m, e2m);
    const double fd1 = (ep(row, 0) - em(row, 0)) / (2 * h);
    const double fd2 = (e1p(row, 0) - e1m(row, 0)) / (2 * h);
    CHECK(d1(row, 0) == doctest::Approx(fd1).epsilon(1e-6));
    CHECK(d2(row, 0) == doctest::Approx(fd2).epsilon(1e-5));
  }
}

TEST_CASE("make_mlp is deterministic and shaped correctly") {
  const auto p = make_mlp<double>(3, 16, 5, 77);
  CHECK(p.in_dim() == 33);
  REQUIRE(p.w.size() == 4);
  CHECK(p.w[0].rows() == 16);
  CHECK(p.w[0].cols() == 33);
  CHECK(p.w[2].rows() == 16);
  CHECK(p.w[3].rows() == 1);
  CHECK(p.b[3].size() == 1);
  CHECK(p.sharpness() == doctest::Approx(std::exp(3.0)));

  const auto q = make_mlp<double>(3, 16, 5, 77);
  for (std::size_t l = 0; l < p.w.size(); ++l) CHECK(p.w[l] == q.w[l]);
  const auto r = make_mlp<double>(3, 16, 5, 78);
  CHECK(p.w[0] != r.w[0]);
}

TEST_CASE("values and value_grad agree") {
  Rng rng(31);
  const auto p = make_mlp<double>(2, 16, 3, 5);
  const auto pts = random_points(rng, 40, 1.0);
  VecXT<double> v1, v2;
  MatXT<double> grad;
  mlp_values(p, pts, v1);
  mlp_value_grad(p, pts, v2, grad);
  REQUIRE(v1.size() == 40);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(v1.allFinite());
}

TEST_CASE("spatial gradients match finite differences") {
  Rng rng(32);
  const auto p = make_mlp<double>(3, 16, 4, 6);
  const auto pts = random_points(rng, 25, 0.8);
  VecXT<double> val;
  MatXT<double> grad;
  mlp_value_grad(p, pts, val, grad);
  const double h = 1e-5;
  for (int i = 0; i < pts.cols(); ++i) {
    for (int c = 0; c < 3; ++c) {
      MatXT<double> pp = pts, pm = pts;
      pp(c, i) += h;
      pm(c, i) -= h;
      VecXT<double> vp, vm;
      mlp_values(p, pp, vp);
      mlp_values(p, pm, vm);
      // Truncation error scales with the third derivative, which the top
      // encoding octave pushes to ~omega^3.
      const double fd = (vp[i] - vm[i]) / (2 * h);
      CHECK(grad(c, i) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("pullback parameter gradients match finite differences") {
  Rng rng(33);
  auto p = make_mlp<double>(2, 12, 3, 9);
  const int n = 6;
  const auto pts = random_points(rng, n, 0.7);
  VecXT<double> ubar(n);
  MatXT<double> vbar(3, n);
  for (int i = 0; i < n; ++i) {
    ubar[i] = rng.normal();
    vbar.col(i) = Vec3(rng.normal(), rng.normal(), rng.normal());
  }

  MlpState<double> st;
  VecXT<double> val;
  MatXT<double> grad;
  mlp_value_grad(p, pts, val, grad, &st);
  auto grads = MlpGrads<double>::zeros_like(p);
  mlp_pullback(p, st, ubar, vbar, grads);

  const double h = 1e-6;
  Rng pick(99);
  int checked = 0;
  for (int l = 0; l <= p.depth; ++l) {
    for (int probe = 0; probe < 40; ++probe) {
      const int i = static_cast<int>(pick.uniform_index(p.w[l].rows()));
      const int j = static_cast<int>(pick.uniform_index(p.w[l].cols()));
      const double keep = p.w[l](i, j);
      p.w[l](i, j) = keep + h;
      const double lp = probe_loss(p, pts, ubar, vbar);
      p.w[l](i, j) = keep - h;
      const double lm = probe_loss(p, pts, ubar, vbar);
      p.w[l](i, j) = keep;
      const double fd = (lp - lm) / (2 * h);
      CHECK(grads.w[l](i, j) == doctest::Approx(fd).epsilon(5e-5));
      ++checked;
    }
    for (int probe = 0; probe < 8; ++probe) {
      const int i = static_cast<int>(pick.uniform_index(p.b[l].size()));
      const double keep = p.b[l][i];
      p.b[l][i] = keep + h;
      const double lp = probe_loss(p, pts, ubar, vbar);
      p.b[l][i] = keep - h;
      const double lm = probe_loss(p, pts, ubar, vbar);
      p.b[l][i] = keep;
      const double fd = (lp - lm) / (2 * h);
      CHECK(grads.b[l][i] == doctest::Approx(fd).epsilon(5e-5));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("pullback input gradients include the curvature path") {
  Rng rng(34);
  const auto p = make_mlp<double>(2, 12, 3, 10);
  const int n = 5;
  const auto pts = random_points(rng, n, 0.7);
  VecXT<double> ubar(n);
  MatXT<double> vbar(3, n);
  for (int i = 0; i < n; ++i) {
    ubar[i] = rng.normal();
    vbar.col(i) = Vec3(rng.normal(), rng.normal(), rng.normal());
  }

  MlpState<double> st;
  VecXT<double> val;
  MatXT<double> grad;
  mlp_value_grad(p, pts, val, grad, &st);
  auto grads = MlpGrads<double>::zeros_like(p);
  MatXT<double> dx;
  mlp_pullback(p, st, ubar, vbar, grads, &dx);
  REQUIRE(dx.rows() == 3);
  REQUIRE(dx.cols() == n);

  const double h = 1e-5;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      MatXT<double> pp = pts, pm = pts;
      pp(c, i) += h;
      pm(c, i) -= h;
      const double fd =
          (probe_loss(p, pp, ubar, vbar) - probe_loss(p, pm, ubar, vbar)) /
          (2 * h);
      CHECK(dx(c, i) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("cast_params round trip") {
  const auto p = make_mlp<double>(2, 8, 2, 3);
  const auto f = cast_params<float>(p);
  const auto back = cast_params<double>(f);
  CHECK(back.depth == p.depth);
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    CHECK((back.w[l] - p.w[l]).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(f.log_s == doctest::Approx(3.0));
}

TEST_CASE("adam takes a bias-corrected first step") {
  auto p = make_mlp<double>(1, 4, 1, 2);
  auto g = MlpGrads<double>::zeros_like(p);
  g.w[0](0, 0) = 2.5;
  auto s = AdamState<double>::zeros_like(p);
  AdamConfig<double> cfg;
  cfg.lr = 1e-3;
  const double before = p.w[0](0, 0);
  const double b_before = p.b[0][0];
  adam_step(p, g, s, cfg);
  // First step moves by lr regardless of gradient scale (up to eps).
  CHECK(p.w[0](0, 0) == doctest::Approx(before - 1e-3).epsilon(1e-6));
  CHECK(p.b[0][0] == doctest::Approx(b_before));
  CHECK(s.step == 1);
}

TEST_CASE("sphere initialization approximates a centered ball") {
  auto p = make_mlp<float>(3, 32, 5, 1);
  const auto rep = init_sphere<float>(p, 0.5f, 1, 800);
  CHECK(rep.steps == 800);
  CHECK(rep.rms_value < 0.05);
  CHECK(rep.rms_grad < 0.5);

  Rng rng(8);
  MatXT<float> pts(3, 200);
  VecXT<float> want(200);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9),
                 rng.uniform(-0.9, 0.9));
    pts.col(i) = x.cast<float>();
    want[i] = static_cast<float>(x.norm() - 0.5);
  }
  VecXT<float> got;
  mlp_values(p, pts, got);
  const double err = (got - want).cwiseAbs().maxCoeff();
  CHECK(err < 0.2);

  // Zero crossing along a ray from the center sits near the radius.
  MatXT<float> line(3, 2);
  line.col(0) = Vec3T<float>(0.2f, 0.1f, 0.0f);
  line.col(1) = Vec3T<float>(0.6f, 0.3f, 0.0f);
  VecXT<float> lv;
  mlp_values(p, line, lv);
  CHECK(lv[0] < 0.0f);
  CHECK(lv[1] > 0.0f);
}

}  // TEST_SUITE
