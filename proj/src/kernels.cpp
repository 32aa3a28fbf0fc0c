#include "fakeidet/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>

#include "fakeidet/errors.hpp"
#include "fakeidet/logistic.hpp"

namespace fakeidet::kernels {

namespace {

double tile_black_fraction(const RgbImage& img, GridOrigin o, int size) {
  const auto bytes = img.bytes();
  const auto stride = static_cast<std::size_t>(img.width()) * 3;
  std::size_t black = 0;
  for (int y = o.y; y < o.y + size; ++y) {
    const std::uint8_t* p = bytes.data() + static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(o.x) * 3;
    for (int x = 0; x < size; ++x, p += 3) black += (p[0] | p[1] | p[2]) == 0;
  }
  return static_cast<double>(black) / (static_cast<double>(size) * size);
}

void check_tiles(const RgbImage& img, std::span<const GridOrigin> origins, int size) {
  if (size <= 0) throw Error(ErrorKind::config, "kernels", "tile size must be positive");
  for (const auto& o : origins)
    if (o.x < 0 || o.y < 0 || o.x + size > img.width() || o.y + size > img.height())
      throw Error(ErrorKind::config, "kernels", "tile outside image");
}

double dot(std::span<const float> x, std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += w[k] * static_cast<double>(x[k]);
  return acc;
}

// Accumulates rows [first, last) of `rows` (or of all rows when empty)
// into `out`, in order.
void accumulate(FeatureView x, std::span<const std::uint8_t> labels, std::span<const std::size_t> rows,
                std::size_t first, std::size_t last, std::span<const double> w, double b, LossGrad& out) {
  for (std::size_t i = first; i < last; ++i) {
    const std::size_t r = rows.empty() ? i : rows[i];
    const auto xr = x.row(r);
    const double z = dot(xr, w) + b;
    const double y = labels[r];
    out.loss_sum += bce_loss(z, y);
    const double g = bce_dlogit(z, y);
    for (std::size_t k = 0; k < xr.size(); ++k) out.grad_w[k] += g * static_cast<double>(xr[k]);
    out.grad_b += g;
  }
}

std::size_t count_below(std::span<const double> sorted, double tau) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin());
}

}  // namespace

namespace serial {

std::vector<double> black_fractions(const RgbImage& img, std::span<const GridOrigin> origins, int size) {
  check_tiles(img, origins, size);
  std::vector<double> out(origins.size());
  for (std::size_t i = 0; i < origins.size(); ++i) out[i] = tile_black_fraction(img, origins[i], size);
  return out;
}

void logits(FeatureView x, std::span<const double> w, double b, std::span<double> out) {
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = dot(x.row(i), w) + b;
}

LossGrad bce_loss_grad(FeatureView x, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> rows, std::span<const double> w, double b) {
  LossGrad out;
  out.grad_w.assign(x.dim, 0.0);
  const std::size_t n = rows.empty() ? x.rows() : rows.size();
  accumulate(x, labels, rows, 0, n, w, b, out);
  return out;
}

void error_rates(std::span<const double> attack, std::span<const double> bonafide,
                 std::span<const double> thresholds, std::span<double> apcer, std::span<double> bpcer) {
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    const double tau = thresholds[t];
    std::size_t missed = 0, rejected = 0;
    for (double s : attack) missed += s < tau;
    for (double s : bonafide) rejected += s >= tau;
    apcer[t] = static_cast<double>(missed) / static_cast<double>(attack.size());
    bpcer[t] = static_cast<double>(rejected) / static_cast<double>(bonafide.size());
  }
}

}  // namespace serial

namespace parallel {

std::vector<double> black_fractions(const RgbImage& img, std::span<const GridOrigin> origins, int size) {
  check_tiles(img, origins, size);
  std::vector<double> out(origins.size());
  const auto n = static_cast<std::ptrdiff_t>(origins.size());
#pragma omp parallel for schedule(static) if (n > 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = tile_black_fraction(img, origins[i], size);
  return out;
}

void logits(FeatureView x, std::span<const double> w, double b, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = dot(x.row(static_cast<std::size_t>(i)), w) + b;
}

LossGrad bce_loss_grad(FeatureView x, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> rows, std::span<const double> w, double b) {
  const std::size_t n = rows.empty() ? x.rows() : rows.size();
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<LossGrad> partial(blocks);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static) if (nb > 1)
  for (std::ptrdiff_t k = 0; k < nb; ++k) {
    auto& p = partial[static_cast<std::size_t>(k)];
    p.grad_w.assign(x.dim, 0.0);
    const std::size_t first = static_cast<std::size_t>(k) * kReductionBlock;
    accumulate(x, labels, rows, first, std::min(n, first + kReductionBlock), w, b, p);
  }
  // Block partials are combined in block order, independent of scheduling.
  LossGrad out;
  out.grad_w.assign(x.dim, 0.0);
  for (const auto& p : partial) {
    out.loss_sum += p.loss_sum;
    out.grad_b += p.grad_b;
    for (std::size_t d = 0; d < x.dim; ++d) out.grad_w[d] += p.grad_w[d];
  }
  return out;
}

void error_rates(std::span<const double> attack, std::span<const double> bonafide,
                 std::span<const double> thresholds, std::span<double> apcer, std::span<double> bpcer) {
  std::vector<double> a(attack.begin(), attack.end());
  std::vector<double> bf(bonafide.begin(), bonafide.end());
  std::sort(a.begin(), a.end());
  std::sort(bf.begin(), bf.end());
  const auto na = static_cast<double>(a.size());
  const auto nbf = static_cast<double>(bf.size());
  const auto n = static_cast<std::ptrdiff_t>(thresholds.size());
#pragma omp parallel for schedule(static) if (n > 1024)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const double tau = thresholds[t];
    apcer[t] = static_cast<double>(count_below(a, tau)) / na;
    bpcer[t] = static_cast<double>(bf.size() - count_below(bf, tau)) / nbf;
  }
}

}  // namespace parallel

int configure_threads_from_env() {
  if (const char* env = std::getenv("FAKEIDET_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n <= 0)
      throw Error(ErrorKind::usage, "kernels", std::string("FAKEIDET_THREADS must be a positive integer, got '") + env + "'");
    omp_set_num_threads(static_cast<int>(n));
  }
  return omp_get_max_threads();
}

}  // namespace fakeidet::kernels
