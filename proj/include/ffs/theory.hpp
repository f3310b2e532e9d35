#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "ffs/normal.hpp"
#include "ffs/rng.hpp"

namespace firstfinish {

/// Continuous, uncapped two-Gaussian correct/incorrect length mixture.
struct MixtureParams {
  double alpha = 0.5;
  double mu1 = 0.0;
  double sigma1 = 1.0;
  double mu2 = 0.0;
  double sigma2 = 1.0;

  void validate() const {
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
      throw std::invalid_argument("mixture: sigma1 and sigma2 must be > 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("mixture: alpha must be in [0,1]");
  }
};

/// Probability that a trace of length x is correct under the mixture,
/// evaluated in log space so extreme exponents cannot overflow. Degenerate
/// mixtures bypass the formula: alpha=0 -> 0, alpha=1 -> 1.
inline double p_correct_given_length(double x, const MixtureParams& p) {
  p.validate();
  if (p.alpha <= 0.0) return 0.0;
  if (p.alpha >= 1.0) return 1.0;
  const double z2 = (x - p.mu2) / p.sigma2;
  const double z1 = (x - p.mu1) / p.sigma1;
  // log of the ratio term: (1-a)/a * s1/s2 * exp(-0.5*(z2^2 - z1^2))
  const double log_ratio = std::log1p(-p.alpha) - std::log(p.alpha) +
                           std::log(p.sigma1 / p.sigma2) - 0.5 * (z2 * z2 - z1 * z1);
  if (log_ratio > 0.0) {
    const double e = std::exp(-log_ratio);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(log_ratio));
}

enum class Extreme { Min, Max };

/// Asymptotic (n -> infinity) expected extreme of n iid Normal(mu, sigma)
/// draws: mu -/+ sigma * sqrt(2 ln n). Exact equality is not expected at
/// finite n.
inline double expected_extreme(double mu, double sigma, long n, Extreme which) {
  if (n < 1) throw std::invalid_argument("expected_extreme: n must be >= 1");
  if (sigma <= 0.0) throw std::invalid_argument("expected_extreme: sigma must be > 0");
  const double spread = sigma * std::sqrt(2.0 * std::log(static_cast<double>(n)));
  return which == Extreme::Min ? mu - spread : mu + spread;
}

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo oracle for the expected extreme: empirical mean of the
/// min/max over `trials` draws of n Normal(mu, sigma) samples.
inline MonteCarloEstimate mc_extreme(double mu, double sigma, int n, long trials, Extreme which,
                                     RngStream rng) {
  if (trials < 1000) throw std::invalid_argument("mc_extreme: trials must be >= 1000");
  double sum = 0.0, sumsq = 0.0;
  for (long t = 0; t < trials; ++t) {
    double ext = rng.normal(mu, sigma);
    for (int i = 1; i < n; ++i) {
      const double y = rng.normal(mu, sigma);
      ext = which == Extreme::Min ? std::min(ext, y) : std::max(ext, y);
    }
    sum += ext;
    sumsq += ext * ext;
  }
  MonteCarloEstimate e;
  e.value = sum / trials;
  const double var = (sumsq - sum * sum / trials) / (trials - 1);
  e.std_error = std::sqrt(std::max(var, 0.0) / trials);
  return e;
}

/// Limiting relative lift of correctness given shortness: 1 / Pr(C).
inline double lift(double p_correct) {
  if (p_correct <= 0.0 || p_correct > 1.0)
    throw std::domain_error("lift: p_correct must be in (0,1]");
  return 1.0 / p_correct;
}

struct SampleStats {
  long n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased

  static SampleStats from_samples(std::span<const double> xs) {
    SampleStats s;
    s.n = static_cast<long>(xs.size());
    if (s.n == 0) return s;
    for (double v : xs) s.mean += v;
    s.mean /= s.n;
    if (s.n >= 2) {
      for (double v : xs) s.variance += (v - s.mean) * (v - s.mean);
      s.variance /= (s.n - 1);
    }
    return s;
  }
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;  // Welch-Satterthwaite degrees of freedom
};

inline WelchResult welch_t(const SampleStats& a, const SampleStats& b) {
  if (a.n < 2 || b.n < 2) throw std::invalid_argument("welch_t: both samples need n >= 2");
  const double va = a.variance / a.n;
  const double vb = b.variance / b.n;
  if (va + vb <= 0.0) throw std::invalid_argument("welch_t: undefined when both variances are 0");
  WelchResult r;
  r.t = (a.mean - b.mean) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (a.n - 1) + vb * vb / (b.n - 1));
  return r;
}

/// Monte-Carlo probability that the minimum of n mixture draws comes from
/// the correct component. Component assignment is rotation-stratified (with
/// a per-trial phase u, draw i is correct iff frac(u + i*alpha) < alpha) so
/// every race carries the mixture proportion of correct traces, matching the
/// simulated backend and the alpha-proportion premise behind the prediction.
inline MonteCarloEstimate ffs_success_estimate(const MixtureParams& p, int n, long trials,
                                               RngStream rng) {
  p.validate();
  if (n < 1) throw std::invalid_argument("ffs_success_estimate: n must be >= 1");
  if (p.alpha >= 1.0) return {1.0, 0.0};
  if (p.alpha <= 0.0) return {0.0, 0.0};
  long successes = 0;
  for (long t = 0; t < trials; ++t) {
    double best = 0.0;
    bool best_correct = false;
    const double phase = rng.uniform();
    for (int i = 0; i < n; ++i) {
      double rot = phase + i * p.alpha;
      rot -= std::floor(rot);
      const bool correct = rot < p.alpha;
      const double len = correct ? rng.normal(p.mu1, p.sigma1) : rng.normal(p.mu2, p.sigma2);
      if (i == 0 || len < best) {
        best = len;
        best_correct = correct;
      }
    }
    if (best_correct) ++successes;
  }
  MonteCarloEstimate e;
  const double phat = static_cast<double>(successes) / trials;
  e.value = phat;
  e.std_error = std::sqrt(phat * (1.0 - phat) / trials);
  return e;
}

}  // namespace firstfinish
