#pragma once

// Independent reference computations used to freeze and check expected
// values. Nothing here calls into the library's numeric code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fakeidet/image.hpp"

namespace oracle {

// Textbook Adam on f(theta) = theta^2, one scalar, written out step by step.
inline std::vector<double> adam_quadratic_trajectory(double theta0, int steps, double lr, double b1, double b2,
                                                     double eps) {
  std::vector<double> out;
  double theta = theta0, m = 0.0, v = 0.0;
  double b1_pow = 1.0, b2_pow = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * theta;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    b1_pow *= b1;
    b2_pow *= b2;
    const double mhat = m / (1.0 - b1_pow);
    const double vhat = v / (1.0 - b2_pow);
    theta = theta - lr * mhat / (std::sqrt(vhat) + eps);
    out.push_back(theta);
  }
  return out;
}

// Naive (unstable) logistic loss, for finite differences at moderate logits.
inline double naive_bce(std::span<const double> w, double b, std::span<const double> x, double y) {
  double z = b;
  for (std::size_t i = 0; i < x.size(); ++i) z += w[i] * x[i];
  const double p = 1.0 / (1.0 + std::exp(-z));
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

// Central differences of naive_bce over (w..., b).
inline std::vector<double> finite_difference_grad(std::vector<double> w, double b, std::span<const double> x,
                                                  double y, double h = 1e-6) {
  std::vector<double> g(w.size() + 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + h;
    const double up = naive_bce(w, b, x, y);
    w[i] = keep - h;
    const double down = naive_bce(w, b, x, y);
    w[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  g[w.size()] = (naive_bce(w, b + h, x, y) - naive_bce(w, b - h, x, y)) / (2.0 * h);
  return g;
}

// Bilinear resize as a tent-kernel sum over all source pixels, with the
// pixel-centre sample mapping and clamped coordinates.
inline fakeidet::RgbImage tent_resize(const fakeidet::RgbImage& src, int target) {
  fakeidet::RgbImage out(target, target);
  const double sx = static_cast<double>(src.width()) / target;
  const double sy = static_cast<double>(src.height()) / target;
  for (int dy = 0; dy < target; ++dy) {
    for (int dx = 0; dx < target; ++dx) {
      const double u = std::clamp((dx + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const double v = std::clamp((dy + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
      double acc[3] = {0, 0, 0};
      for (int j = 0; j < src.height(); ++j) {
        const double wy = std::max(0.0, 1.0 - std::fabs(v - j));
        if (wy == 0.0) continue;
        for (int i = 0; i < src.width(); ++i) {
          const double wx = std::max(0.0, 1.0 - std::fabs(u - i));
          if (wx == 0.0) continue;
          const auto p = src.at(i, j);
          acc[0] += wx * wy * p.r;
          acc[1] += wx * wy * p.g;
          acc[2] += wx * wy * p.b;
        }
      }
      auto q = [](double a) { return static_cast<std::uint8_t>(std::clamp(std::floor(a + 0.5), 0.0, 255.0)); };
      out.set(dx, dy, {q(acc[0]), q(acc[1]), q(acc[2])});
    }
  }
  return out;
}

inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct Rates {
  double apcer, bpcer;
};

// Direct rates by binary search on sorted copies (score >= tau is attack).
inline Rates rates_at(const std::vector<double>& attack_sorted, const std::vector<double>& bona_sorted, double tau) {
  const auto below = [](const std::vector<double>& v, double t) {
    return static_cast<double>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
  };
  return {below(attack_sorted, tau) / attack_sorted.size(),
          (bona_sorted.size() - below(bona_sorted, tau)) / bona_sorted.size()};
}

// min over tau of max(APCER, BPCER). tau ranges over a dense uniform grid
// plus every score and its next representable neighbour, so no step of
// either curve is missed.
inline double brute_force_eer(std::span<const double> attack, std::span<const double> bonafide,
                              int grid_points = 2001) {
  std::vector<double> a(attack.begin(), attack.end()), b(bonafide.begin(), bonafide.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double lo = std::min(a.front(), b.front()), hi = std::max(a.back(), b.back());
  std::vector<double> taus;
  for (int i = 0; i < grid_points; ++i) taus.push_back(lo - 1.0 + (hi - lo + 2.0) * i / (grid_points - 1));
  for (double s : a) {
    taus.push_back(s);
    taus.push_back(std::nextafter(s, std::numeric_limits<double>::infinity()));
  }
  for (double s : b) {
    taus.push_back(s);
    taus.push_back(std::nextafter(s, std::numeric_limits<double>::infinity()));
  }
  double best = 1.0;
  for (double t : taus) {
    const auto r = rates_at(a, b, t);
    best = std::min(best, std::max(r.apcer, r.bpcer));
  }
  return best;
}

}  // namespace oracle
