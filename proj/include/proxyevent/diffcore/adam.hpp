#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "proxyevent/diffcore/params.hpp"

namespace proxyevent::diffcore {

struct AdamConfig {
  double lr_encoder = 1e-3;
  double lr_rest = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are keyed by parameter name and
/// created lazily with the parameter's shape.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  long step_count() const { return step_; }

  void step(ParamStore& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (auto& p : params.all()) {
      auto& value = p.value.data();
      if (!p.value.has_grad()) continue;
      const auto& g = p.value.grad();
      auto& mom = moments_[p.name];
      if (mom.m.size() != value.size()) {
        if (!mom.m.empty())
          throw DimensionError("adam moment buffer for '" + p.name + "' has " + std::to_string(mom.m.size()) +
                               " entries, parameter has " + std::to_string(value.size()));
        mom.m.assign(value.size(), 0.0);
        mom.v.assign(value.size(), 0.0);
      }
      const double lr = p.group == ParamGroup::Encoder ? config_.lr_encoder : config_.lr_rest;
      for (std::size_t i = 0; i < value.size(); ++i) {
        mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g[i];
        mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        const double m_hat = mom.m[i] / bc1;
        const double v_hat = mom.v[i] / bc2;
        value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      }
    }
  }

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void set_step_count(long step) { step_ = step; }

 private:
  AdamConfig config_;
  long step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace proxyevent::diffcore
