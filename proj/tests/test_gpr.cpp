#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "aoigpr/errors.hpp"
#include "aoigpr/gpr.hpp"
#include "aoigpr/optimize.hpp"
#include "doctest.h"
#include "gp_oracle.hpp"

using namespace aoigpr;

namespace {

std::vector<double> random_point(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(0.0, 1.5);
  std::vector<double> x(dim);
  for (auto& v : x) v = u(rng);
  return x;
}

SlidingDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  SlidingDataset d(n);
  std::normal_distribution<double> g(5.0, 3.0);
  for (std::size_t i = 0; i < n; ++i) d.push({random_point(rng, dim), g(rng)});
  return d;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("matern: zero distance gives h^2") {
  for (double nu : {0.5, 1.5, 2.5, 0.8, 3.7}) {
    KernelHyperparams t{3.0, 0.7, nu, 0.0};
    std::vector<double> x{0.2, 0.4, 1.0};
    CHECK(matern(x, x, t) == doctest::Approx(9.0).epsilon(1e-12));
  }
}

TEST_CASE("matern: nu = 0.5 reduces to exp(-sqrt(2) r / lambda)") {
  KernelHyperparams t{1.0, std::sqrt(2.0), 0.5, 0.0};
  CHECK(matern(1.0, t) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(matern(1.0, t) == doctest::Approx(0.367879).epsilon(1e-6));
}

TEST_CASE("matern: closed forms agree with the Bessel definition") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 4.0);
  for (int i = 0; i < 200; ++i) {
    double r = u(rng), h = u(rng), lam = u(rng);
    for (double nu : {0.5, 1.5, 2.5, 0.9, 4.2}) {
      KernelHyperparams t{h, lam, nu, 0.0};
      CHECK(rel_close(matern(r, t), oracle::matern_bessel(r, h, lam, nu), 1e-10));
    }
  }
}

TEST_CASE("matern: standard scaling uses sqrt(2 nu)") {
  KernelHyperparams t{1.0, 1.0, 0.5, 0.0};
  CHECK(matern(1.0, t, KernelScaling::kStandard) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  t.nu = 1.5;
  const double z = std::sqrt(3.0);
  CHECK(matern(1.0, t, KernelScaling::kStandard) == doctest::Approx((1 + z) * std::exp(-z)).epsilon(1e-14));
}

TEST_CASE("matern: symmetric") {
  std::mt19937_64 rng(5);
  KernelHyperparams t{2.0, 0.9, 1.5, 0.0};
  for (int i = 0; i < 100; ++i) {
    auto a = random_point(rng, 4), b = random_point(rng, 4);
    CHECK(matern(a, b, t) == matern(b, a, t));
  }
  CHECK_THROWS_AS(matern(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, t), std::invalid_argument);
}

TEST_CASE("gram: single sample") {
  SlidingDataset d(4);
  d.push({{0.3, 1.0}, 2.0});
  KernelHyperparams t{2.0, 1.0, 0.5, 0.1};
  auto f = gram(d, t);
  REQUIRE(f.size() == 1);
  CHECK(f.L(0, 0) * f.L(0, 0) == doctest::Approx(4.0 + 0.01).epsilon(1e-14));
}

TEST_CASE("gram: duplicate inputs need jitter") {
  SlidingDataset d(4);
  d.push({{0.5, 1.0}, 2.0});
  d.push({{0.5, 1.0}, 3.0});
  KernelHyperparams t{2.0, 1.0, 0.5, 0.0};
  GprOptions fixed;
  fixed.jitter.escalate = false;
  CHECK_THROWS_AS(gram(d, t, fixed), SingularKernelError);
  t.sigma_j = 0.02;
  CHECK_NOTHROW(gram(d, t, fixed));

  t.sigma_j = 0.0;
  auto f = gram(d, t);  // escalation rescues it
  CHECK(f.escalated);
  CHECK(f.jitter2 > 0.0);
  CHECK(f.jitter2 <= 1e-2 * 4.0);
}

TEST_CASE("gram: factor reconstructs C within 1e-10") {
  std::mt19937_64 rng(9);
  auto d = random_dataset(rng, 10, 3);
  KernelHyperparams t{1.7, 0.8, 2.5, 0.05};
  auto f = gram(d, t);
  std::vector<std::vector<double>> xs;
  for (const auto& s : d) xs.push_back(s.x);
  Eigen::MatrixXd C = oracle::joint_covariance(xs, t, 0.0);
  C.diagonal().array() += t.sigma_j * t.sigma_j;
  CHECK((f.L * f.L.transpose() - C).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict: prior and interpolation") {
  KernelHyperparams t{3.0, 1.0, 0.5, 0.0};
  SlidingDataset d(5);
  auto p = predict(d, t, std::vector<double>{0.1, 0.2});
  CHECK(p.mu == 0.0);
  CHECK(p.sigma2 == doctest::Approx(9.0));

  d.push({{0.1, 0.2}, 7.5});
  t.sigma_j = 1e-6;
  p = predict(d, t, std::vector<double>{0.1, 0.2});
  CHECK(p.mu == doctest::Approx(7.5).epsilon(1e-9));
  CHECK(p.sigma2 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.sigma2 >= 0.0);
}

TEST_CASE("predict: matches brute-force Gaussian conditioning") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto d = random_dataset(rng, 5, 3);
    KernelHyperparams t{u(rng), u(rng), trial % 2 ? 0.5 : 1.5, 0.01 * u(rng)};
    auto xs = random_point(rng, 3);
    auto p = predict(d, t, xs);
    auto o = oracle::condition(d, t, xs);
    CHECK(rel_close(p.mu, o.mean, 1e-8));
    CHECK(rel_close(p.sigma2, std::max(o.var, 0.0), 1e-8));
  }
}

TEST_CASE("log marginal likelihood") {
  SUBCASE("single zero target is a scalar normal log-density") {
    SlidingDataset d(3);
    d.push({{0.4}, 0.0});
    KernelHyperparams t{2.0, 1.0, 0.5, 0.3};
    CHECK(log_marginal_likelihood(d, t) ==
          doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * (4.0 + 0.09))).epsilon(1e-14));
  }
  SUBCASE("dense oracle") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0.3, 3.0);
    for (int trial = 0; trial < 30; ++trial) {
      auto d = random_dataset(rng, 1 + trial % 15, 4);
      KernelHyperparams t{u(rng), u(rng), 0.5, 0.05 * u(rng)};
      CHECK(rel_close(log_marginal_likelihood(d, t), oracle::log_density(d, t), 1e-8));
    }
  }
  SUBCASE("zero targets leave only the determinant term") {
    std::mt19937_64 rng(34);
    auto d = random_dataset(rng, 8, 2);
    SlidingDataset z(8);
    for (const auto& s : d) z.push({s.x, 0.0});
    KernelHyperparams t{1.2, 0.6, 0.5, 0.05};
    auto f = gram(z, t);
    double logdet = 2.0 * f.L.diagonal().array().log().sum();
    CHECK(log_marginal_likelihood(z, t) ==
          doctest::Approx(-0.5 * logdet - 4.0 * std::log(2 * std::numbers::pi)).epsilon(1e-13));
  }
}

TEST_CASE("push_sample evicts oldest first") {
  SlidingDataset d(3);
  d.push({{1.0}, 1.0});
  d.push({{2.0}, 2.0});
  CHECK(d.size() == 2);
  auto ev = d.push({{3.0}, 3.0});
  CHECK(!ev);
  CHECK(d.size() == 3);
  ev = d.push({{4.0}, 4.0});
  REQUIRE(ev);
  CHECK(ev->y == 1.0);
  CHECK(d.size() == 3);
  CHECK(d[0].y == 2.0);
  CHECK(d[1].y == 3.0);
  CHECK(d[2].y == 4.0);
  CHECK_THROWS_AS(d.push({{1.0, 2.0}, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(SlidingDataset(0), std::invalid_argument);
}

TEST_CASE("nelder_mead finds a quadratic minimum and respects fixed dims") {
  auto f = [](std::span<const double> x) { return (x[0] - 1) * (x[0] - 1) + 3 * (x[1] + 2) * (x[1] + 2) + x[2]; };
  std::vector<double> lo{-10, -10, 0.5}, hi{10, 10, 0.5}, step{1, 1, 1};
  auto r = nelder_mead(f, {0, 0, 0.5}, step, lo, hi, 500);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-3));
  CHECK(r.x[2] == 0.5);
}

TEST_CASE("fit_hyperparams") {
  std::mt19937_64 rng(77);
  SUBCASE("recovers a GP draw's likelihood level") {
    for (int trial = 0; trial < 5; ++trial) {
      KernelHyperparams truth{4.0, 0.8, 0.5, 0.2};
      std::vector<std::vector<double>> xs;
      for (int i = 0; i < 60; ++i) xs.push_back(random_point(rng, 2));
      Eigen::MatrixXd S = oracle::joint_covariance(xs, truth, 0.0);
      S.diagonal().array() += truth.sigma_j * truth.sigma_j;
      Eigen::MatrixXd Lt = S.llt().matrixL();
      std::normal_distribution<double> g;
      Eigen::VectorXd w(60);
      for (auto& v : w) v = g(rng);
      Eigen::VectorXd y = Lt * w;
      SlidingDataset d(60);
      for (int i = 0; i < 60; ++i) d.push({xs[static_cast<std::size_t>(i)], y(i)});

      KernelHyperparams init{10.0, 1.0, 0.5, 0.01};
      Engine e(trial);
      auto res = fit_hyperparams(d, init, FitBounds::around(init), FitOptions{}, GprOptions{}, e);
      CHECK(!res.warning);
      GprOptions fixed;
      fixed.jitter.escalate = false;
      CHECK(res.lml >= log_marginal_likelihood(d, truth, fixed) - 0.5);
      CHECK(res.lml == doctest::Approx(log_marginal_likelihood(d, res.theta, fixed)));
      CHECK(res.lml >= log_marginal_likelihood(d, init, fixed));
    }
  }
  SUBCASE("never worse than a local optimum start") {
    auto d = random_dataset(rng, 20, 2);
    KernelHyperparams init{5.0, 1.0, 0.5, 0.5};
    Engine e(1);
    auto first = fit_hyperparams(d, init, FitBounds::around(init), FitOptions{}, GprOptions{}, e);
    auto again = fit_hyperparams(d, first.theta, FitBounds::around(init), FitOptions{}, GprOptions{}, e);
    CHECK(again.lml >= first.lml);
    CHECK(first.theta.h >= FitBounds::around(init).lower.h);
    CHECK(first.theta.h <= FitBounds::around(init).upper.h);
  }
  SUBCASE("degenerate box returns the initial value") {
    auto d = random_dataset(rng, 12, 2);
    KernelHyperparams init{5.0, 1.0, 0.5, 0.5};
    Engine e(1);
    auto res = fit_hyperparams(d, init, FitBounds{init, init}, FitOptions{}, GprOptions{}, e);
    CHECK(res.theta == init);
  }
  SUBCASE("all-singular data warns and keeps the initial value") {
    SlidingDataset d(12);
    for (int i = 0; i < 12; ++i) d.push({{0.5, 0.5}, 1.0 + i});
    KernelHyperparams init{5.0, 1.0, 0.5, 0.0};
    FitBounds b = FitBounds::around(init);
    b.lower.sigma_j = b.upper.sigma_j = 0.0;
    Engine e(1);
    auto res = fit_hyperparams(d, init, b, FitOptions{}, GprOptions{}, e);
    CHECK(res.warning);
    CHECK(res.theta == init);
  }
  SUBCASE("too few samples") {
    auto d = random_dataset(rng, 5, 2);
    Engine e(1);
    KernelHyperparams init{5.0, 1.0, 0.5, 0.5};
    CHECK_THROWS_AS(fit_hyperparams(d, init, FitBounds::around(init), FitOptions{}, GprOptions{}, e),
                    std::invalid_argument);
  }
}

TEST_CASE("property: jittered Gram matrices are positive definite") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 1 + rng() % 50;
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(random_point(rng, 1 + rng() % 6));
    for (auto& x : xs) x.resize(xs[0].size(), 0.0);
    KernelHyperparams t{u(rng), u(rng), trial % 3 == 0 ? 2.5 : 0.5, 0.0};
    t.sigma_j = std::sqrt(1e-6) * t.h;
    Eigen::MatrixXd C = oracle::joint_covariance(xs, t, 0.0);
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() == 0.0);
    C.diagonal().array() += t.sigma_j * t.sigma_j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("property: posterior variance bounded by prior and shrinks at new samples") {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    KernelHyperparams t{u(rng), u(rng), 0.5, 0.0};
    t.sigma_j = 1e-3 * t.h;
    auto d = random_dataset(rng, 1 + rng() % 15, 3);
    auto x = random_point(rng, 3);
    auto before = predict(d, t, x);
    CHECK(before.sigma2 <= t.h * t.h + 1e-9);
    CHECK(before.sigma2 >= 0.0);
    SlidingDataset bigger(d.size() + 1);
    for (const auto& s : d) bigger.push(s);
    bigger.push({x, 3.0});
    auto after = predict(bigger, t, x);
    CHECK(after.sigma2 <= before.sigma2 + 1e-6 * t.h * t.h);
  }
}

TEST_CASE("OnlineGpr tracks the batch factorization through window slides") {
  std::mt19937_64 rng(303);
  KernelHyperparams t{6.0, 0.9, 0.5, 0.0};
  t.sigma_j = 1e-3 * t.h;
  OnlineGpr online(12, t);
  std::normal_distribution<double> g(5.0, 2.0);
  for (int i = 0; i < 60; ++i) {
    online.push({random_point(rng, 4), g(rng)});
    auto ref = gram(online.dataset(), t);
    REQUIRE(online.factorized());
    CHECK((online.factor().L - ref.L).cwiseAbs().maxCoeff() < 1e-9);
    auto x = random_point(rng, 4);
    auto a = online.predict(x);
    auto b = predict(online.dataset(), ref, t, x);
    CHECK(rel_close(a.mu, b.mu, 1e-9));
    CHECK(rel_close(a.sigma2, b.sigma2, 1e-9));
  }
  // duplicates force the jitter path and still leave a valid factorization
  auto x = random_point(rng, 4);
  OnlineGpr dup(5, KernelHyperparams{6.0, 0.9, 0.5, 0.0});
  for (int i = 0; i < 8; ++i) dup.push({x, 1.0 * i});
  CHECK(dup.factorized());
  CHECK(std::isfinite(dup.predict(x).mu));
}

TEST_CASE("predict_batch equals one-at-a-time prediction") {
  std::mt19937_64 rng(404);
  auto d = random_dataset(rng, 15, 3);
  KernelHyperparams t{2.0, 0.7, 1.5, 0.01};
  auto f = gram(d, t);
  Eigen::MatrixXd cand(3, 9);
  for (int j = 0; j < 9; ++j) {
    auto x = random_point(rng, 3);
    for (int k = 0; k < 3; ++k) cand(k, j) = x[static_cast<std::size_t>(k)];
  }
  Eigen::VectorXd mu, s2;
  predict_batch(d, f, t, cand, mu, s2);
  for (int j = 0; j < 9; ++j) {
    std::vector<double> x(cand.col(j).data(), cand.col(j).data() + 3);
    auto p = predict(d, f, t, x);
    CHECK(p.mu == doctest::Approx(mu(j)).epsilon(1e-12));
    CHECK(p.sigma2 == doctest::Approx(s2(j)).epsilon(1e-12));
  }
}

TEST_CASE("window-mean centering is off unless asked for") {
  SlidingDataset d(4);
  d.push({{0.0}, 10.0});
  d.push({{1.0}, 12.0});
  KernelHyperparams t{1.0, 0.1, 0.5, 0.01};
  auto far = std::vector<double>{50.0};
  CHECK(predict(d, t, far).mu == doctest::Approx(0.0));
  GprOptions centered;
  centered.center_mean = true;
  CHECK(predict(d, t, far, centered).mu == doctest::Approx(11.0));
}
