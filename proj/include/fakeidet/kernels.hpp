#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fakeidet/image.hpp"

// Data-parallel inner loops. Each kernel has a plain serial reference in
// `serial` and an OpenMP version in `parallel`. The parallel versions use a
// fixed block decomposition so results do not depend on the thread count.
namespace fakeidet::kernels {

struct GridOrigin {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridOrigin&, const GridOrigin&) = default;
};

// Row-major (count × dim) float features.
struct FeatureView {
  std::span<const float> data;
  std::size_t dim = 0;
  std::size_t rows() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(std::size_t i) const noexcept { return data.subspan(i * dim, dim); }
};

// Sum of BCE losses and their gradient over a subset of rows.
struct LossGrad {
  double loss_sum = 0.0;
  std::vector<double> grad_w;  // d(sum loss)/dw
  double grad_b = 0.0;
};

// Rows per reduction block in the parallel loss/gradient kernel.
inline constexpr std::size_t kReductionBlock = 32;

namespace serial {

// Fraction of pixels exactly (0,0,0) in each size×size tile.
std::vector<double> black_fractions(const RgbImage& img, std::span<const GridOrigin> origins, int size);

void logits(FeatureView x, std::span<const double> w, double b, std::span<double> out);

// rows == empty means every row.
LossGrad bce_loss_grad(FeatureView x, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> rows, std::span<const double> w, double b);

// APCER (attack < tau) and BPCER (bona fide >= tau) at each threshold,
// counted directly over unsorted scores.
void error_rates(std::span<const double> attack, std::span<const double> bonafide,
                 std::span<const double> thresholds, std::span<double> apcer, std::span<double> bpcer);

}  // namespace serial

namespace parallel {

std::vector<double> black_fractions(const RgbImage& img, std::span<const GridOrigin> origins, int size);

void logits(FeatureView x, std::span<const double> w, double b, std::span<double> out);

LossGrad bce_loss_grad(FeatureView x, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> rows, std::span<const double> w, double b);

// Same contract as serial::error_rates; the score lists are sorted
// internally and each threshold is resolved by binary search.
void error_rates(std::span<const double> attack, std::span<const double> bonafide,
                 std::span<const double> thresholds, std::span<double> apcer, std::span<double> bpcer);

}  // namespace parallel

// Applies FAKEIDET_THREADS (if set) to the OpenMP runtime. Returns the
// worker count in effect.
int configure_threads_from_env();

}  // namespace fakeidet::kernels
