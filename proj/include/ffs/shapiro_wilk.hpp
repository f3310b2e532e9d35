#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ffs/errors.hpp"
#include "ffs/normal.hpp"

namespace firstfinish {

struct ShapiroWilkResult {
  double w = 0.0;
  double p_value = 0.0;
};

namespace detail {
inline double poly(const double* c, int n, double x) {
  double v = 0.0;
  for (int i = n - 1; i >= 0; --i) v = v * x + c[i];
  return v;
}
}  // namespace detail

/// Shapiro-Wilk normality test, Royston's AS R94 approximation (coefficients
/// and normalizing transforms as published). Valid for 3 <= n <= 5000.
inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample) {
  const int n = static_cast<int>(sample.size());
  if (n < 3 || n > 5000) throw std::invalid_argument("shapiro_wilk: sample size outside [3,5000]");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 0.0) {
    throw DegenerateSample("DEGENERATE_SAMPLE: constant sample has no normality statistic");
  }

  const int n2 = n / 2;
  std::vector<double> a(n2);  // coefficients for the upper order statistics
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    // Expected normal order statistics via Blom scores.
    std::vector<double> m(n2);
    double summ2 = 0.0;
    for (int i = 1; i <= n2; ++i) {
      m[i - 1] = normal_quantile((i - 0.375) / (n + 0.25));  // negative half
      summ2 += m[i - 1] * m[i - 1];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
    static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    const double a1 = detail::poly(c1, 6, rsn) - m[0] / ssumm2;
    int start;
    double fac;
    if (n > 5) {
      const double a2 = detail::poly(c2, 6, rsn) - m[1] / ssumm2;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[0] = a1;
      a[1] = a2;
      start = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
      a[0] = a1;
      start = 1;
    }
    for (int i = start; i < n2; ++i) a[i] = -m[i] / fac;
  }

  // W = (sum_i a_i (x_(n+1-i) - x_(i)))^2 / sum (x - mean)^2
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double sax = 0.0;
  for (int i = 0; i < n2; ++i) sax += a[i] * (x[n - 1 - i] - x[i]);
  double w = sax * sax / ssq;
  if (w > 1.0) w = 1.0;

  ShapiroWilkResult res;
  res.w = w;
  if (n == 3) {
    const double pi6 = 1.90985931710274;   // 6/pi
    const double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    res.p_value = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return res;
  }

  const double w1 = 1.0 - w;
  double y, mu, sigma;
  if (n <= 11) {
    static const double g[2] = {-2.273, 0.459};
    static const double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    const double gamma = detail::poly(g, 2, static_cast<double>(n));
    y = std::log(w1);
    if (y >= gamma) {
      res.p_value = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    mu = detail::poly(c3, 4, static_cast<double>(n));
    sigma = std::exp(detail::poly(c4, 4, static_cast<double>(n)));
  } else {
    static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static const double c6[3] = {-0.4803, -0.082676, 0.0030302};
    const double logn = std::log(static_cast<double>(n));
    y = std::log(w1);
    mu = detail::poly(c5, 4, logn);
    sigma = std::exp(detail::poly(c6, 3, logn));
  }
  res.p_value = normal_sf((y - mu) / sigma);
  return res;
}

}  // namespace firstfinish
