#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "proxyevent/diffcore/tensor.hpp"

namespace proxyevent::diffcore {

/// Learning-rate group a parameter belongs to.
enum class ParamGroup { Encoder, Rest };

struct Parameter {
  std::string name;
  Tensor value;
  ParamGroup group = ParamGroup::Rest;
};

/// Named, ordered collection of learnable tensors. Registration order is
/// the iteration order everywhere (optimizer, checkpoints, gradient checks).
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value, ParamGroup group) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    index_[name] = params_.size();
    params_.push_back({name, std::move(value), group});
    return params_.back().value;
  }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("unknown parameter '" + name + "'");
    return params_[it->second].value;
  }
  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("unknown parameter '" + name + "'");
    return params_[it->second].value;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// N(0, std^2) entries.
inline Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Glorot-style normal init scaled by fan-in and fan-out of a matrix.
inline Tensor glorot_init(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return normal_init({fan_in, fan_out}, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

}  // namespace proxyevent::diffcore
