#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace firstfinish {

/// Two-Gaussian correct/incorrect trace-length mixture driving the simulator.
/// Units are tokens.
struct LengthProfile {
  double alpha = 0.5;    // proportion of correct traces
  double mu1 = 7200.0;   // correct-trace length mean
  double sigma1 = 4800.0;
  double mu2 = 15400.0;  // incorrect-trace length mean
  double sigma2 = 6000.0;
  long cap = 32768;      // context limit L; sampled lengths clamp to [1, cap]

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("profile: alpha must be in [0,1]");
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
      throw std::invalid_argument("profile: sigma1 and sigma2 must be > 0");
    if (mu1 <= 0.0 || mu2 <= 0.0) throw std::invalid_argument("profile: mu1 and mu2 must be > 0");
    if (cap <= 0) throw std::invalid_argument("profile: cap must be a positive token count");
  }

  static LengthProfile from_json(const nlohmann::json& j) {
    LengthProfile p;
    p.alpha = j.at("alpha").get<double>();
    p.mu1 = j.at("mu1").get<double>();
    p.sigma1 = j.at("sigma1").get<double>();
    p.mu2 = j.at("mu2").get<double>();
    p.sigma2 = j.at("sigma2").get<double>();
    p.cap = j.at("cap").get<long>();
    p.validate();
    return p;
  }

  nlohmann::json to_json() const {
    return {{"alpha", alpha}, {"mu1", mu1},     {"sigma1", sigma1},
            {"mu2", mu2},     {"sigma2", sigma2}, {"cap", cap}};
  }

  static LengthProfile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("profile: cannot read " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

}  // namespace firstfinish
