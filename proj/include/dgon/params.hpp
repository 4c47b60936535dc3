#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgon/tensor.hpp"

namespace dgon {

struct AdamConfig;

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named trainable tensors with gradient accumulators and Adam moments.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor initial);

  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<ParamId> find(std::string_view name) const;

  const std::string& name(ParamId id) const { return entries_.at(id.index).name; }
  Tensor& value(ParamId id) { return entries_.at(id.index).value; }
  const Tensor& value(ParamId id) const { return entries_.at(id.index).value; }
  Tensor& grad(ParamId id) { return entries_.at(id.index).grad; }
  const Tensor& grad(ParamId id) const { return entries_.at(id.index).grad; }

  void zero_grad();
  /// Number of optimizer steps taken; shared by every parameter.
  std::uint64_t step_count() const noexcept { return step_count_; }
  /// Total scalar count across all parameters.
  std::size_t scalar_count() const;

  /// Drops optimizer moments and the step counter; values are kept.
  void reset_optimizer();

 private:
  friend void adam_step(ParamStore& store, const AdamConfig& cfg);

  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor first_moment;
    Tensor second_moment;
  };
  std::vector<Entry> entries_;
  std::uint64_t step_count_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of every parameter, then zeroes gradients.
/// Throws DivergenceError naming the first parameter with a non-finite gradient;
/// in that case nothing is updated.
void adam_step(ParamStore& store, const AdamConfig& cfg);

}  // namespace dgon
