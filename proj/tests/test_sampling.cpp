#include <doctest.h>

#include <cmath>
#include <vector>

#include "neto/rng.hpp"
#include "neto/sampling.hpp"

using namespace neto;

namespace {

double phi(double x, double s) { return 1.0 / (1.0 + std::exp(-s * x)); }

// L = wbar . w as a function of (g, s), recomputed from scratch.
double weight_loss(const VecX& g, double s, const VecX& wbar) {
  VecX alpha, w;
  section_weights<double>(g, s, alpha, w);
  return wbar.dot(w);
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("logistic cdf basics") {
  CHECK(logistic_cdf(0.0, 3.0) == doctest::Approx(0.5));
  CHECK(logistic_cdf(0.4, 2.0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-0.8))));
  for (double x : {-2.0, -0.3, 0.0, 0.7, 5.0}) {
    CHECK(logistic_cdf(x, 1.7) + logistic_cdf(-x, 1.7) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  // Stability far in the tails.
  CHECK(logistic_cdf(-1000.0, 20.0) == 0.0);
  CHECK(logistic_cdf(1000.0, 20.0) == doctest::Approx(1.0));
  CHECK(std::isfinite(logistic_cdf(-700.0, 1.0)));
}

TEST_CASE("section weights reproduce the closed form on a hand case") {
  VecX g(3);
  g << 1.0, 0.0, -1.0;
  VecX alpha, w;
  const double opacity = section_weights<double>(g, 1.0, alpha, w);
  REQUIRE(alpha.size() == 2);

  const double a0 = (phi(1, 1) - phi(0, 1)) / phi(1, 1);
  const double a1 = (phi(0, 1) - phi(-1, 1)) / phi(0, 1);
  CHECK(alpha[0] == doctest::Approx(a0).epsilon(1e-12));
  CHECK(alpha[1] == doctest::Approx(a1).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(a0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(a1 * (1 - a0)).epsilon(1e-12));
  CHECK(opacity == doctest::Approx(w[0] + w[1]).epsilon(1e-12));
}

TEST_CASE("weights are a sub-probability for any field sequence") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(40));
    VecX g(k);
    for (int i = 0; i < k; ++i) g[i] = rng.uniform(-2.0, 2.0);
    const double s = std::exp(rng.uniform(0.0, 5.0));
    VecX alpha, w;
    const double opacity = section_weights<double>(g, s, alpha, w);
    double sum = 0;
    for (int i = 0; i < w.size(); ++i) {
      CHECK(w[i] >= 0.0);
      CHECK(alpha[i] >= 0.0);
      CHECK(alpha[i] <= 1.0);
      sum += w[i];
    }
    CHECK(sum <= 1.0 + 1e-6);
    CHECK(opacity == doctest::Approx(sum).epsilon(1e-12));
    // A deep inside-going crossing saturates the opacity.
    if (trial == 0) {
      VecX cross(4);
      cross << 2.0, 1.0, -1.0, -2.0;
      VecX a2, w2;
      CHECK(section_weights<double>(cross, 20.0, a2, w2) ==
            doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("weight pullback matches finite differences") {
  // Strictly decreasing values keep every alpha off its clamp so the
  // derivative is smooth at the probe point.
  VecX g(6);
  g << 1.4, 0.9, 0.35, -0.2, -0.75, -1.3;
  const double s = 2.3;
  Rng rng(43);
  VecX wbar(5);
  for (int i = 0; i < 5; ++i) wbar[i] = rng.normal();

  VecX alpha, w;
  section_weights<double>(g, s, alpha, w);
  VecX gbar = VecX::Zero(6);
  const double sbar =
      section_weights_pullback<double>(g, s, alpha, wbar, gbar);

  const double h = 1e-7;
  for (int j = 0; j < 6; ++j) {
    VecX gp = g, gm = g;
    gp[j] += h;
    gm[j] -= h;
    const double fd =
        (weight_loss(gp, s, wbar) - weight_loss(gm, s, wbar)) / (2 * h);
    CHECK(gbar[j] == doctest::Approx(fd).epsilon(1e-5));
  }
  const double fd_s =
      (weight_loss(g, s + h, wbar) - weight_loss(g, s - h, wbar)) / (2 * h);
  CHECK(sbar == doctest::Approx(fd_s).epsilon(1e-5));
}

TEST_CASE("pullback propagates nothing through clamped intervals") {
  // First interval rises (alpha clamped at 0); derivative w.r.t. g[0] of the
  // remaining weights is still nonzero through the transmittance, so only
  // probe the clamped interval's own contribution.
  VecX g(4);
  g << -0.5, 0.8, 0.0, -0.9;
  const double s = 3.0;
  VecX alpha, w;
  section_weights<double>(g, s, alpha, w);
  REQUIRE(alpha[0] == 0.0);

  VecX wbar = VecX::Zero(3);
  wbar[0] = 1.7;  // adjoint lands only on the clamped interval
  VecX gbar = VecX::Zero(4);
  section_weights_pullback<double>(g, s, alpha, wbar, gbar);
  CHECK(gbar.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coarse samples are stratified midpoints") {
  std::vector<double> ts;
  coarse_samples(1.0, 3.0, 4, ts);
  REQUIRE(ts.size() == 4);
  CHECK(ts[0] == doctest::Approx(1.25));
  CHECK(ts[1] == doctest::Approx(1.75));
  CHECK(ts[2] == doctest::Approx(2.25));
  CHECK(ts[3] == doctest::Approx(2.75));
}

TEST_CASE("importance resampling concentrates at the crossing") {
  std::vector<double> ts;
  coarse_samples(0.0, 2.0, 21, ts);
  VecX gs(21);
  for (int i = 0; i < 21; ++i) gs[i] = 1.0 - ts[i];
  std::vector<double> fresh;
  importance_resample<double>(ts, gs, 50.0, 16, fresh);
  REQUIRE(fresh.size() == 16);
  int near_crossing = 0;
  for (double t : fresh) {
    CHECK(t >= ts.front());
    CHECK(t <= ts.back());
    if (std::abs(t - 1.0) < 0.15) ++near_crossing;
  }
  CHECK(near_crossing >= 14);
  for (std::size_t i = 1; i < fresh.size(); ++i) CHECK(fresh[i] >= fresh[i - 1]);
}

TEST_CASE("importance resampling falls back to uniform without mass") {
  std::vector<double> ts = {0.0, 1.0, 2.0};
  VecX gs(3);
  gs << 5.0, 4.0, 3.0;  // all far outside: negligible weight at high sharpness
  std::vector<double> fresh;
  importance_resample<double>(ts, gs, 400.0, 4, fresh);
  REQUIRE(fresh.size() == 4);
  CHECK(fresh[0] == doctest::Approx(0.25));
  CHECK(fresh[1] == doctest::Approx(0.75));
  CHECK(fresh[2] == doctest::Approx(1.25));
  CHECK(fresh[3] == doctest::Approx(1.75));
}

}  // TEST_SUITE
