#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <cstdlib>

#include "fakeidet/errors.hpp"
#include "fakeidet/kernels.hpp"
#include "fakeidet/logistic.hpp"
#include "fakeidet/patch.hpp"
#include "fakeidet/rng.hpp"
#include "support/synthetic.hpp"

using namespace fakeidet;
namespace k = fakeidet::kernels;

namespace {

struct Data {
  std::vector<float> x;
  std::vector<std::uint8_t> y;
  std::vector<double> w;
  std::size_t dim;
  k::FeatureView view() const { return {x, dim}; }
};

Data make_data(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Data d{std::vector<float>(rows * dim), std::vector<std::uint8_t>(rows), std::vector<double>(dim), dim};
  for (auto& v : d.x) v = static_cast<float>(rng.normal());
  for (auto& v : d.y) v = rng.below(2) ? 1 : 0;
  for (auto& v : d.w) v = 0.1 * rng.normal();
  return d;
}

class ThreadCount {
 public:
  explicit ThreadCount(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadCount() { omp_set_num_threads(saved_); }

 private:
  int saved_;
};

}  // namespace

TEST(Kernels, BlackFractionsAgree) {
  auto img = synth::noise_image(640, 448, 3);
  Rng rng(4);
  for (int i = 0; i < 50000; ++i) img.set(static_cast<int>(rng.below(640)), static_cast<int>(rng.below(448)), kBlack);
  const auto grid = extract_grid(640, 448, 64);
  const auto s = k::serial::black_fractions(img, grid, 64);
  ThreadCount tc(4);
  EXPECT_EQ(k::parallel::black_fractions(img, grid, 64), s);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_EQ(s[i], black_fraction(img.crop(grid[i].x, grid[i].y, 64, 64)));
}

TEST(Kernels, TileOutsideImageIsRejected) {
  const RgbImage img(64, 64);
  const std::vector<k::GridOrigin> o{{32, 0}};
  EXPECT_THROW(k::parallel::black_fractions(img, o, 64), Error);
}

TEST(Kernels, LogitsAgree) {
  const auto d = make_data(1000, 48, 1);
  std::vector<double> a(1000), b(1000);
  k::serial::logits(d.view(), d.w, 0.25, a);
  ThreadCount tc(4);
  k::parallel::logits(d.view(), d.w, 0.25, b);
  EXPECT_EQ(a, b);
}

TEST(Kernels, LossGradParallelMatchesSerial) {
  for (std::size_t rows : {1u, 31u, 32u, 33u, 1000u}) {
    const auto d = make_data(rows, 24, rows);
    const auto s = k::serial::bce_loss_grad(d.view(), d.y, {}, d.w, -0.1);
    ThreadCount tc(4);
    const auto p = k::parallel::bce_loss_grad(d.view(), d.y, {}, d.w, -0.1);
    EXPECT_NEAR(p.loss_sum, s.loss_sum, 1e-10 * rows);
    EXPECT_NEAR(p.grad_b, s.grad_b, 1e-10 * rows);
    for (std::size_t j = 0; j < d.dim; ++j) EXPECT_NEAR(p.grad_w[j], s.grad_w[j], 1e-10 * rows);
  }
}

TEST(Kernels, LossGradIsThreadCountInvariant) {
  const auto d = make_data(777, 16, 9);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 777; i += 2) rows.push_back(776 - i);
  k::LossGrad ref;
  {
    ThreadCount tc(1);
    ref = k::parallel::bce_loss_grad(d.view(), d.y, rows, d.w, 0.3);
  }
  for (int threads : {2, 3, 4, 8}) {
    ThreadCount tc(threads);
    const auto p = k::parallel::bce_loss_grad(d.view(), d.y, rows, d.w, 0.3);
    EXPECT_EQ(p.loss_sum, ref.loss_sum);
    EXPECT_EQ(p.grad_w, ref.grad_w);
    EXPECT_EQ(p.grad_b, ref.grad_b);
  }
}

TEST(Kernels, RowSubsetSelectsRows) {
  const auto d = make_data(10, 4, 2);
  const std::vector<std::size_t> rows{3};
  const auto g = k::serial::bce_loss_grad(d.view(), d.y, rows, d.w, 0.0);
  double z = 0.0;
  for (std::size_t j = 0; j < 4; ++j) z += d.w[j] * d.x[3 * 4 + j];
  EXPECT_NEAR(g.loss_sum, bce_loss(z, d.y[3]), 1e-12);
}

TEST(Kernels, ErrorRatesAgree) {
  Rng rng(5);
  std::vector<double> a(3000), b(2000), t(500);
  for (auto& v : a) v = std::round(rng.uniform01() * 100.0) / 100.0;  // ties on purpose
  for (auto& v : b) v = std::round(rng.uniform01() * 100.0) / 100.0;
  for (auto& v : t) v = std::round(rng.uniform(-0.1, 1.1) * 100.0) / 100.0;
  std::vector<double> sa(500), sb(500), pa(500), pb(500);
  k::serial::error_rates(a, b, t, sa, sb);
  ThreadCount tc(4);
  k::parallel::error_rates(a, b, t, pa, pb);
  EXPECT_EQ(sa, pa);
  EXPECT_EQ(sb, pb);
}

TEST(Kernels, ThreadsFromEnvironment) {
  const int saved = omp_get_max_threads();
  setenv("FAKEIDET_THREADS", "3", 1);
  EXPECT_EQ(k::configure_threads_from_env(), 3);
  setenv("FAKEIDET_THREADS", "zero", 1);
  try {
    k::configure_threads_from_env();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
  unsetenv("FAKEIDET_THREADS");
  omp_set_num_threads(saved);
}
